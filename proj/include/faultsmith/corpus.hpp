#pragma once

#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "faultsmith/errors.hpp"
#include "faultsmith/rng.hpp"

namespace faultsmith {

enum class Label { Buggy, NonBuggy };
enum class Language { Java, Cpp, Other };

inline std::string to_string(Label label) {
    return label == Label::Buggy ? "buggy" : "non_buggy";
}

inline std::string to_string(Language lang) {
    switch (lang) {
        case Language::Java: return "java";
        case Language::Cpp: return "cpp";
        case Language::Other: return "other";
    }
    return "other";
}

inline std::optional<Label> parse_label(std::string_view s) {
    if (s == "buggy") return Label::Buggy;
    if (s == "non_buggy") return Label::NonBuggy;
    return std::nullopt;
}

inline std::optional<Language> parse_language(std::string_view s) {
    if (s == "java") return Language::Java;
    if (s == "cpp") return Language::Cpp;
    if (s == "other") return Language::Other;
    return std::nullopt;
}

/// Line-comment marker used for prompt scaffolding in a given language.
inline std::string comment_marker(Language lang) {
    switch (lang) {
        case Language::Java:
        case Language::Cpp:
            return "//";
        case Language::Other:
            return "//";
    }
    return "//";
}

/// One function in a corpus; the unit every pipeline stage operates on.
struct FunctionRecord {
    std::string id;
    std::string project;
    std::string code;
    Label label = Label::NonBuggy;
    std::optional<std::string> fixed_code;
    std::optional<std::string> test_cmd;
    Language language = Language::Other;

    bool operator==(const FunctionRecord&) const = default;
};

struct CorpusProvenance {
    std::string source_path;
    // Kept in memory only; run artifacts must stay byte-identical across
    // reruns, so the timestamp never reaches serialized output.
    std::int64_t ingested_at_unix = 0;
};

struct Corpus {
    std::vector<FunctionRecord> records;
    CorpusProvenance provenance;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
};

struct CloneTask {
    std::string task_id;
    std::string prompt;
    std::string test_cmd;
    Language language = Language::Other;

    bool operator==(const CloneTask&) const = default;
};

struct SplitSpec {
    double train_ratio = 0.8;
    double valid_ratio = 0.1;
    double test_ratio = 0.1;
    std::uint64_t seed = 0;
};

struct SplitResult {
    Corpus train;
    Corpus valid;
    Corpus test;
};

struct RejectEntry {
    std::size_t line_number = 0; // 1-based
    std::string field;
    std::string message;
};

struct IngestResult {
    Corpus corpus;
    std::vector<RejectEntry> rejects;
};

struct CloneTaskIngestResult {
    std::vector<CloneTask> tasks;
    std::vector<RejectEntry> rejects;
};

/// Normalization used for duplicate fingerprints: every run of whitespace
/// (including newlines) collapses to a single space and the ends are
/// trimmed, so formatting and blank-line churn never defeats dedup.
inline std::string fingerprint_normalize(std::string_view code) {
    std::string out;
    out.reserve(code.size());
    bool in_ws = false;
    for (const char c : code) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            in_ws = true;
            continue;
        }
        if (in_ws && !out.empty()) out.push_back(' ');
        in_ws = false;
        out.push_back(c);
    }
    return out;
}

namespace detail {

inline std::optional<std::string> require_string(const nlohmann::json& obj, const char* key,
                                                 std::string& bad_field) {
    const auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) {
        bad_field = key;
        return std::nullopt;
    }
    return it->get<std::string>();
}

// Parses one JSON-lines function record. Returns nullopt and fills `reject`
// on any schema problem.
inline std::optional<FunctionRecord> parse_function_line(const std::string& line,
                                                         std::size_t line_number,
                                                         RejectEntry& reject) {
    reject.line_number = line_number;
    nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
        reject.field = "";
        reject.message = "not a JSON object";
        return std::nullopt;
    }
    std::string bad_field;
    FunctionRecord rec;
    if (auto v = require_string(obj, "id", bad_field)) rec.id = *v;
    else { reject.field = bad_field; reject.message = "missing or non-string"; return std::nullopt; }
    if (auto v = require_string(obj, "project", bad_field)) rec.project = *v;
    else { reject.field = bad_field; reject.message = "missing or non-string"; return std::nullopt; }
    if (auto v = require_string(obj, "code", bad_field)) rec.code = *v;
    else { reject.field = bad_field; reject.message = "missing or non-string"; return std::nullopt; }

    if (auto v = require_string(obj, "label", bad_field)) {
        const auto label = parse_label(*v);
        if (!label) { reject.field = "label"; reject.message = "expected \"buggy\" or \"non_buggy\""; return std::nullopt; }
        rec.label = *label;
    } else { reject.field = bad_field; reject.message = "missing or non-string"; return std::nullopt; }

    if (auto v = require_string(obj, "language", bad_field)) {
        const auto lang = parse_language(*v);
        if (!lang) { reject.field = "language"; reject.message = "expected java|cpp|other"; return std::nullopt; }
        rec.language = *lang;
    } else { reject.field = bad_field; reject.message = "missing or non-string"; return std::nullopt; }

    if (const auto it = obj.find("fixed_code"); it != obj.end() && !it->is_null()) {
        if (!it->is_string()) { reject.field = "fixed_code"; reject.message = "non-string"; return std::nullopt; }
        rec.fixed_code = it->get<std::string>();
    }
    if (const auto it = obj.find("test_cmd"); it != obj.end() && !it->is_null()) {
        if (!it->is_string()) { reject.field = "test_cmd"; reject.message = "non-string"; return std::nullopt; }
        rec.test_cmd = it->get<std::string>();
    }

    if (rec.label == Label::Buggy) {
        if (!rec.fixed_code) {
            reject.field = "fixed_code";
            reject.message = "buggy record without fixed_code";
            return std::nullopt;
        }
        if (fingerprint_normalize(*rec.fixed_code) == fingerprint_normalize(rec.code)) {
            reject.field = "fixed_code";
            reject.message = "fixed_code identical to code after normalization";
            return std::nullopt;
        }
    }
    return rec;
}

inline std::optional<CloneTask> parse_clone_task_line(const std::string& line,
                                                      std::size_t line_number,
                                                      RejectEntry& reject) {
    reject.line_number = line_number;
    nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
        reject.field = "";
        reject.message = "not a JSON object";
        return std::nullopt;
    }
    std::string bad_field;
    CloneTask task;
    if (auto v = require_string(obj, "task_id", bad_field)) task.task_id = *v;
    else { reject.field = bad_field; reject.message = "missing or non-string"; return std::nullopt; }
    if (auto v = require_string(obj, "prompt", bad_field)) task.prompt = *v;
    else { reject.field = bad_field; reject.message = "missing or non-string"; return std::nullopt; }
    if (auto v = require_string(obj, "test_cmd", bad_field)) task.test_cmd = *v;
    else { reject.field = bad_field; reject.message = "missing or non-string"; return std::nullopt; }
    if (task.test_cmd.empty()) {
        reject.field = "test_cmd";
        reject.message = "clone tasks require a non-empty test command";
        return std::nullopt;
    }
    if (auto v = require_string(obj, "language", bad_field)) {
        const auto lang = parse_language(*v);
        if (!lang) { reject.field = "language"; reject.message = "expected java|cpp|other"; return std::nullopt; }
        task.language = *lang;
    } else { reject.field = bad_field; reject.message = "missing or non-string"; return std::nullopt; }
    return task;
}

inline std::vector<std::string> read_lines_or_throw(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw Error(ErrorCode::MissingFile, path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

} // namespace detail

inline nlohmann::json to_json(const FunctionRecord& rec) {
    nlohmann::json obj{
        {"id", rec.id},
        {"project", rec.project},
        {"code", rec.code},
        {"label", to_string(rec.label)},
        {"language", to_string(rec.language)},
    };
    if (rec.fixed_code) obj["fixed_code"] = *rec.fixed_code;
    if (rec.test_cmd) obj["test_cmd"] = *rec.test_cmd;
    return obj;
}

/// Loads a JSON-lines function corpus. Malformed lines land in the rejects
/// report with their line number and offending field; they are never
/// silently dropped. Duplicate ids violate the corpus invariant and are
/// rejected the same way.
inline IngestResult ingest_functions(const std::filesystem::path& path) {
    IngestResult result;
    result.corpus.provenance.source_path = path.string();
    result.corpus.provenance.ingested_at_unix =
        static_cast<std::int64_t>(std::time(nullptr));

    const auto lines = detail::read_lines_or_throw(path);
    std::unordered_set<std::string> seen_ids;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        RejectEntry reject;
        auto rec = detail::parse_function_line(lines[i], i + 1, reject);
        if (!rec) {
            result.rejects.push_back(std::move(reject));
            continue;
        }
        if (!seen_ids.insert(rec->id).second) {
            result.rejects.push_back({i + 1, "id", "duplicate id " + rec->id});
            continue;
        }
        result.corpus.records.push_back(std::move(*rec));
    }
    if (result.corpus.empty())
        throw Error(ErrorCode::EmptyCorpus, "no valid records in " + path.string());
    return result;
}

inline CloneTaskIngestResult ingest_clone_tasks(const std::filesystem::path& path) {
    CloneTaskIngestResult result;
    const auto lines = detail::read_lines_or_throw(path);
    std::unordered_set<std::string> seen_ids;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        RejectEntry reject;
        auto task = detail::parse_clone_task_line(lines[i], i + 1, reject);
        if (!task) {
            result.rejects.push_back(std::move(reject));
            continue;
        }
        if (!seen_ids.insert(task->task_id).second) {
            result.rejects.push_back({i + 1, "task_id", "duplicate task_id " + task->task_id});
            continue;
        }
        result.tasks.push_back(std::move(*task));
    }
    if (result.tasks.empty())
        throw Error(ErrorCode::EmptyCorpus, "no valid clone tasks in " + path.string());
    return result;
}

/// Writes a corpus back out as JSON-lines (the inverse of ingest_functions).
inline void emit_functions(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    for (const auto& rec : corpus.records)
        out << to_json(rec).dump() << '\n';
}

/// Keeps the first record per normalized-code fingerprint, preserving input
/// order. Idempotent.
inline Corpus dedup(const Corpus& corpus) {
    if (corpus.empty())
        throw Error(ErrorCode::EmptyCorpus, "dedup requires a non-empty corpus");
    Corpus out;
    out.provenance = corpus.provenance;
    std::unordered_set<std::string> seen;
    for (const auto& rec : corpus.records) {
        if (seen.insert(fingerprint_normalize(rec.code)).second)
            out.records.push_back(rec);
    }
    return out;
}

/// Deterministic three-way split. Sizes are floor-allocated from the ratios
/// with the remainder assigned to train; the permutation is a seeded
/// Fisher-Yates shuffle, so a fixed seed gives identical splits everywhere.
inline SplitResult split(const Corpus& corpus, const SplitSpec& spec) {
    const double sum = spec.train_ratio + spec.valid_ratio + spec.test_ratio;
    if (spec.train_ratio < 0 || spec.valid_ratio < 0 || spec.test_ratio < 0 ||
        std::abs(sum - 1.0) > 1e-9)
        throw Error(ErrorCode::BadRatios, "split ratios must be non-negative and sum to 1");
    const std::size_t n = corpus.size();
    if (n < 3)
        throw Error(ErrorCode::CorpusTooSmall, "split requires at least 3 records");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(spec.seed);
    fisher_yates(order, rng);

    const std::size_t n_valid = static_cast<std::size_t>(std::floor(spec.valid_ratio * static_cast<double>(n)));
    const std::size_t n_test = static_cast<std::size_t>(std::floor(spec.test_ratio * static_cast<double>(n)));
    const std::size_t n_train = n - n_valid - n_test; // floor(train) + remainder

    SplitResult result;
    result.train.provenance = corpus.provenance;
    result.valid.provenance = corpus.provenance;
    result.test.provenance = corpus.provenance;
    for (std::size_t i = 0; i < n; ++i) {
        const FunctionRecord& rec = corpus.records[order[i]];
        if (i < n_train)
            result.train.records.push_back(rec);
        else if (i < n_train + n_valid)
            result.valid.records.push_back(rec);
        else
            result.test.records.push_back(rec);
    }
    return result;
}

} // namespace faultsmith
