#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "faultsmith/errors.hpp"

namespace faultsmith {

// A deliberately small TOML-shaped reader: [section] headers, key = value
// lines, strings, numbers, booleans, and one-line arrays. That covers every
// knob the pipeline has without pulling in a full TOML implementation.

struct TomlValue {
    std::variant<std::string, double, std::int64_t, bool, std::vector<TomlValue>> data;

    bool is_string() const { return std::holds_alternative<std::string>(data); }
    bool is_array() const { return std::holds_alternative<std::vector<TomlValue>>(data); }

    std::string as_string() const {
        if (!is_string()) throw Error(ErrorCode::BadConfig, "expected a string value");
        return std::get<std::string>(data);
    }
    double as_number() const {
        if (std::holds_alternative<double>(data)) return std::get<double>(data);
        if (std::holds_alternative<std::int64_t>(data))
            return static_cast<double>(std::get<std::int64_t>(data));
        throw Error(ErrorCode::BadConfig, "expected a numeric value");
    }
    std::int64_t as_integer() const {
        if (std::holds_alternative<std::int64_t>(data)) return std::get<std::int64_t>(data);
        throw Error(ErrorCode::BadConfig, "expected an integer value");
    }
    bool as_bool() const {
        if (std::holds_alternative<bool>(data)) return std::get<bool>(data);
        throw Error(ErrorCode::BadConfig, "expected a boolean value");
    }
    const std::vector<TomlValue>& as_array() const {
        if (!is_array()) throw Error(ErrorCode::BadConfig, "expected an array value");
        return std::get<std::vector<TomlValue>>(data);
    }
};

using TomlTable = std::map<std::string, std::map<std::string, TomlValue>>;

namespace detail {

inline std::string_view toml_trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline TomlValue parse_toml_scalar(std::string_view raw, std::size_t line_number);

inline TomlValue parse_toml_value(std::string_view raw, std::size_t line_number) {
    raw = toml_trim(raw);
    if (raw.empty())
        throw Error(ErrorCode::BadConfig, "empty value at line " + std::to_string(line_number));
    if (raw.front() == '[') {
        if (raw.back() != ']')
            throw Error(ErrorCode::BadConfig, "unterminated array at line " + std::to_string(line_number));
        std::vector<TomlValue> items;
        std::string_view body = raw.substr(1, raw.size() - 2);
        std::size_t depth = 0;
        bool in_string = false;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= body.size(); ++i) {
            const bool at_end = i == body.size();
            const char c = at_end ? ',' : body[i];
            if (!at_end && c == '"' ) in_string = !in_string;
            if (in_string) continue;
            if (!at_end && c == '[') ++depth;
            if (!at_end && c == ']') --depth;
            if (c == ',' && depth == 0) {
                const std::string_view item = toml_trim(body.substr(start, i - start));
                if (!item.empty()) items.push_back(parse_toml_value(item, line_number));
                start = i + 1;
            }
        }
        return TomlValue{std::move(items)};
    }
    return parse_toml_scalar(raw, line_number);
}

inline TomlValue parse_toml_scalar(std::string_view raw, std::size_t line_number) {
    if (raw.front() == '"') {
        if (raw.size() < 2 || raw.back() != '"')
            throw Error(ErrorCode::BadConfig, "unterminated string at line " + std::to_string(line_number));
        std::string out;
        for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
            if (raw[i] == '\\' && i + 2 < raw.size()) {
                ++i;
                switch (raw[i]) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case 'r': out += '\r'; break;
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    default:
                        throw Error(ErrorCode::BadConfig,
                                    "unknown escape at line " + std::to_string(line_number));
                }
            } else {
                out += raw[i];
            }
        }
        return TomlValue{std::move(out)};
    }
    if (raw == "true") return TomlValue{true};
    if (raw == "false") return TomlValue{false};

    const std::string text(raw);
    const bool looks_float = text.find('.') != std::string::npos ||
                             text.find('e') != std::string::npos ||
                             text.find('E') != std::string::npos;
    try {
        if (looks_float) {
            std::size_t used = 0;
            const double v = std::stod(text, &used);
            if (used != text.size()) throw std::invalid_argument(text);
            return TomlValue{v};
        }
        std::size_t used = 0;
        const std::int64_t v = std::stoll(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return TomlValue{v};
    } catch (const std::exception&) {
        throw Error(ErrorCode::BadConfig,
                    "cannot parse value '" + text + "' at line " + std::to_string(line_number));
    }
}

} // namespace detail

inline TomlTable parse_toml(std::string_view text) {
    TomlTable table;
    std::string section; // "" = top level
    std::size_t line_number = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        ++line_number;
        std::string_view line = detail::toml_trim(text.substr(start, end - start));
        const bool last = end == text.size();
        start = end + 1;

        // strip comments outside strings
        bool in_string = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_string = !in_string;
            if (line[i] == '#' && !in_string) {
                line = detail::toml_trim(line.substr(0, i));
                break;
            }
        }
        if (line.empty()) {
            if (last) break;
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']')
                throw Error(ErrorCode::BadConfig, "bad section header at line " + std::to_string(line_number));
            section = std::string(detail::toml_trim(line.substr(1, line.size() - 2)));
            if (last) break;
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorCode::BadConfig, "expected key = value at line " + std::to_string(line_number));
        const std::string key(detail::toml_trim(line.substr(0, eq)));
        if (key.empty())
            throw Error(ErrorCode::BadConfig, "empty key at line " + std::to_string(line_number));
        table[section][key] = detail::parse_toml_value(line.substr(eq + 1), line_number);
        if (last) break;
    }
    return table;
}

inline TomlTable parse_toml_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw Error(ErrorCode::MissingFile, path.string());
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_toml(buffer.str());
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

enum class TaskFlow { Fault, Clone };

struct RunConfig {
    TaskFlow task = TaskFlow::Fault;

    // paths
    std::string corpus_path;
    std::string clone_tasks_path;
    std::string run_dir = "runs/default";

    // split
    double train_ratio = 0.8;
    double valid_ratio = 0.1;
    double test_ratio = 0.1;
    std::uint64_t split_seed = 7;

    // generator
    std::string generator_kind = "mock"; // mock | remote
    std::string endpoint;
    std::string model = "mock";
    std::uint64_t mock_seed = 42;
    std::size_t max_in_flight = 8;
    int max_retries = 3;
    int backoff_ms = 500;

    // sampling
    double top_p = 0.95;
    double temperature = 1.0;
    std::size_t n_samples = 10;
    std::size_t clone_n_samples = 200;
    std::size_t max_tokens = 1024;
    int request_timeout_s = 60;

    // prompt
    std::size_t k_shots = 2;
    std::uint64_t prompt_seed = 11;

    // validator
    double validate_timeout_s = 180.0;
    std::string fail_markers = "FAIL|AssertionError|Tests run.*Failures: [1-9]";
    std::size_t workers = 0;

    // selector
    double fraction = 0.3;
    std::vector<double> fractions = {0.1, 0.3, 0.5, 1.0};
    std::string embedder_kind = "hashing"; // hashing | remote
    std::size_t embed_dim = 256;
    std::string embed_endpoint;
    std::uint64_t selector_seed = 13;

    // random-select baseline
    std::uint64_t random_seed = 17;

    // evaluator
    std::string predictions_path;
    std::string retrieval_path;
    std::string pass_k_path;
    std::vector<std::uint64_t> pass_k_cuts = {1, 10, 100, 200};
    std::string fl_aggregate = "micro"; // micro | macro

    static RunConfig from_file(const std::filesystem::path& path) {
        return from_table(parse_toml_file(path));
    }

    static RunConfig from_table(const TomlTable& table) {
        RunConfig cfg;
        const auto get = [&table](const std::string& section,
                                  const std::string& key) -> const TomlValue* {
            const auto sec = table.find(section);
            if (sec == table.end()) return nullptr;
            const auto it = sec->second.find(key);
            return it == sec->second.end() ? nullptr : &it->second;
        };

        if (const auto* v = get("", "task")) {
            const std::string task = v->as_string();
            if (task == "fault") cfg.task = TaskFlow::Fault;
            else if (task == "clone") cfg.task = TaskFlow::Clone;
            else throw Error(ErrorCode::BadConfig, "task must be \"fault\" or \"clone\"");
        }
        if (const auto* v = get("paths", "corpus")) cfg.corpus_path = v->as_string();
        if (const auto* v = get("paths", "clone_tasks")) cfg.clone_tasks_path = v->as_string();
        if (const auto* v = get("paths", "run_dir")) cfg.run_dir = v->as_string();

        if (const auto* v = get("split", "ratios")) {
            const auto& arr = v->as_array();
            if (arr.size() != 3)
                throw Error(ErrorCode::BadConfig, "split.ratios must have three entries");
            cfg.train_ratio = arr[0].as_number();
            cfg.valid_ratio = arr[1].as_number();
            cfg.test_ratio = arr[2].as_number();
        }
        if (const auto* v = get("split", "seed")) cfg.split_seed = static_cast<std::uint64_t>(v->as_integer());

        if (const auto* v = get("generator", "kind")) cfg.generator_kind = v->as_string();
        if (const auto* v = get("generator", "endpoint")) cfg.endpoint = v->as_string();
        if (const auto* v = get("generator", "model")) cfg.model = v->as_string();
        if (const auto* v = get("generator", "mock_seed")) cfg.mock_seed = static_cast<std::uint64_t>(v->as_integer());
        if (const auto* v = get("generator", "max_in_flight")) cfg.max_in_flight = static_cast<std::size_t>(v->as_integer());
        if (const auto* v = get("generator", "max_retries")) cfg.max_retries = static_cast<int>(v->as_integer());
        if (const auto* v = get("generator", "backoff_ms")) cfg.backoff_ms = static_cast<int>(v->as_integer());

        if (const auto* v = get("sampling", "top_p")) cfg.top_p = v->as_number();
        if (const auto* v = get("sampling", "temperature")) cfg.temperature = v->as_number();
        if (const auto* v = get("sampling", "n_samples")) cfg.n_samples = static_cast<std::size_t>(v->as_integer());
        if (const auto* v = get("sampling", "clone_n_samples")) cfg.clone_n_samples = static_cast<std::size_t>(v->as_integer());
        if (const auto* v = get("sampling", "max_tokens")) cfg.max_tokens = static_cast<std::size_t>(v->as_integer());
        if (const auto* v = get("sampling", "timeout_s")) cfg.request_timeout_s = static_cast<int>(v->as_integer());

        if (const auto* v = get("prompt", "k_shots")) cfg.k_shots = static_cast<std::size_t>(v->as_integer());
        if (const auto* v = get("prompt", "seed")) cfg.prompt_seed = static_cast<std::uint64_t>(v->as_integer());

        if (const auto* v = get("validator", "timeout_s")) cfg.validate_timeout_s = v->as_number();
        if (const auto* v = get("validator", "fail_markers")) cfg.fail_markers = v->as_string();
        if (const auto* v = get("validator", "workers")) cfg.workers = static_cast<std::size_t>(v->as_integer());

        if (const auto* v = get("selector", "fraction")) cfg.fraction = v->as_number();
        if (const auto* v = get("selector", "fractions")) {
            cfg.fractions.clear();
            for (const auto& item : v->as_array()) cfg.fractions.push_back(item.as_number());
        }
        if (const auto* v = get("selector", "embedder")) cfg.embedder_kind = v->as_string();
        if (const auto* v = get("selector", "embed_dim")) cfg.embed_dim = static_cast<std::size_t>(v->as_integer());
        if (const auto* v = get("selector", "embed_endpoint")) cfg.embed_endpoint = v->as_string();
        if (const auto* v = get("selector", "seed")) cfg.selector_seed = static_cast<std::uint64_t>(v->as_integer());

        if (const auto* v = get("random", "seed")) cfg.random_seed = static_cast<std::uint64_t>(v->as_integer());

        if (const auto* v = get("evaluator", "predictions")) cfg.predictions_path = v->as_string();
        if (const auto* v = get("evaluator", "retrieval")) cfg.retrieval_path = v->as_string();
        if (const auto* v = get("evaluator", "pass_k")) cfg.pass_k_path = v->as_string();
        if (const auto* v = get("evaluator", "ks")) {
            cfg.pass_k_cuts.clear();
            for (const auto& item : v->as_array())
                cfg.pass_k_cuts.push_back(static_cast<std::uint64_t>(item.as_integer()));
        }
        if (const auto* v = get("evaluator", "aggregate")) cfg.fl_aggregate = v->as_string();

        cfg.validate();
        return cfg;
    }

    void validate() const {
        if (generator_kind != "mock" && generator_kind != "remote")
            throw Error(ErrorCode::BadConfig, "generator.kind must be mock or remote");
        if (embedder_kind != "hashing" && embedder_kind != "remote")
            throw Error(ErrorCode::BadConfig, "selector.embedder must be hashing or remote");
        if (fl_aggregate != "micro" && fl_aggregate != "macro")
            throw Error(ErrorCode::BadConfig, "evaluator.aggregate must be micro or macro");
        if (!(fraction > 0.0 && fraction <= 1.0))
            throw Error(ErrorCode::BadConfig, "selector.fraction must be in (0, 1]");
        if (k_shots == 0)
            throw Error(ErrorCode::BadConfig, "prompt.k_shots must be >= 1");
    }

    /// Canonical serialization: fixed key order, full precision. This is what
    /// gets persisted to the run directory and hashed into every manifest.
    std::string serialize() const {
        std::ostringstream out;
        out.precision(17);
        const auto quote = [](const std::string& s) {
            std::string q = "\"";
            for (const char c : s) {
                if (c == '"' || c == '\\') q += '\\';
                if (c == '\n') { q += "\\n"; continue; }
                q += c;
            }
            q += '"';
            return q;
        };
        out << "task = " << quote(task == TaskFlow::Fault ? "fault" : "clone") << "\n\n";
        out << "[paths]\n";
        out << "corpus = " << quote(corpus_path) << "\n";
        out << "clone_tasks = " << quote(clone_tasks_path) << "\n";
        out << "run_dir = " << quote(run_dir) << "\n\n";
        out << "[split]\n";
        out << "ratios = [" << train_ratio << ", " << valid_ratio << ", " << test_ratio << "]\n";
        out << "seed = " << split_seed << "\n\n";
        out << "[generator]\n";
        out << "kind = " << quote(generator_kind) << "\n";
        out << "endpoint = " << quote(endpoint) << "\n";
        out << "model = " << quote(model) << "\n";
        out << "mock_seed = " << mock_seed << "\n";
        out << "max_in_flight = " << max_in_flight << "\n";
        out << "max_retries = " << max_retries << "\n";
        out << "backoff_ms = " << backoff_ms << "\n\n";
        out << "[sampling]\n";
        out << "top_p = " << top_p << "\n";
        out << "temperature = " << temperature << "\n";
        out << "n_samples = " << n_samples << "\n";
        out << "clone_n_samples = " << clone_n_samples << "\n";
        out << "max_tokens = " << max_tokens << "\n";
        out << "timeout_s = " << request_timeout_s << "\n\n";
        out << "[prompt]\n";
        out << "k_shots = " << k_shots << "\n";
        out << "seed = " << prompt_seed << "\n\n";
        out << "[validator]\n";
        out << "timeout_s = " << validate_timeout_s << "\n";
        out << "fail_markers = " << quote(fail_markers) << "\n";
        out << "workers = " << workers << "\n\n";
        out << "[selector]\n";
        out << "fraction = " << fraction << "\n";
        out << "fractions = [";
        for (std::size_t i = 0; i < fractions.size(); ++i)
            out << (i ? ", " : "") << fractions[i];
        out << "]\n";
        out << "embedder = " << quote(embedder_kind) << "\n";
        out << "embed_dim = " << embed_dim << "\n";
        out << "embed_endpoint = " << quote(embed_endpoint) << "\n";
        out << "seed = " << selector_seed << "\n\n";
        out << "[random]\n";
        out << "seed = " << random_seed << "\n\n";
        out << "[evaluator]\n";
        out << "predictions = " << quote(predictions_path) << "\n";
        out << "retrieval = " << quote(retrieval_path) << "\n";
        out << "pass_k = " << quote(pass_k_path) << "\n";
        out << "ks = [";
        for (std::size_t i = 0; i < pass_k_cuts.size(); ++i)
            out << (i ? ", " : "") << pass_k_cuts[i];
        out << "]\n";
        out << "aggregate = " << quote(fl_aggregate) << "\n";
        return out.str();
    }
};

} // namespace faultsmith
