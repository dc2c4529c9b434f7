#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "faultsmith/corpus.hpp"
#include "faultsmith/errors.hpp"
#include "faultsmith/promptgen.hpp"
#include "faultsmith/rng.hpp"

namespace faultsmith {

struct SamplingConfig {
    double top_p = 0.95;
    double temperature = 1.0;
    std::size_t n_samples = 10; // fault generation default; clone runs use 200
    std::size_t max_tokens = 1024;
    std::string model;
    int timeout_s = 60;

    void validate() const {
        if (!(top_p > 0.0 && top_p <= 1.0))
            throw Error(ErrorCode::BadConfig, "top_p must be in (0, 1]");
        if (temperature < 0.0)
            throw Error(ErrorCode::BadConfig, "temperature must be >= 0");
        if (n_samples < 1)
            throw Error(ErrorCode::BadConfig, "n_samples must be >= 1");
        if (max_tokens < 1)
            throw Error(ErrorCode::BadConfig, "max_tokens must be >= 1");
        if (timeout_s < 1)
            throw Error(ErrorCode::BadConfig, "timeout_s must be >= 1");
    }
};

enum class GeneratorKind { Remote, Mock };

struct GeneratedCandidate {
    std::string candidate_id;
    std::string source_id;
    std::string code; // extract_code(raw); equals raw for the mock generator
    std::string raw;
    GeneratorKind generator = GeneratorKind::Mock;
    std::string model; // generator model name, "mock" for the mock generator
    std::size_t sample_index = 0;
};

inline nlohmann::json to_json(const GeneratedCandidate& cand) {
    return nlohmann::json{
        {"candidate_id", cand.candidate_id},
        {"source_id", cand.source_id},
        {"code", cand.code},
        {"raw", cand.raw},
        {"generator", cand.generator == GeneratorKind::Mock ? "mock" : "remote"},
        {"model", cand.model},
        {"sample_index", cand.sample_index},
    };
}

/// Pulls the code out of a raw model completion: the first fenced block if
/// one exists, else everything after the last indicator line, else the raw
/// text trimmed. Total on any input.
inline std::string extract_code(std::string_view raw, Language language = Language::Other) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= raw.size()) {
        std::size_t end = raw.find('\n', start);
        if (end == std::string_view::npos) end = raw.size();
        lines.push_back(raw.substr(start, end - start));
        if (end == raw.size()) break;
        start = end + 1;
    }

    const auto is_fence = [](std::string_view line) {
        while (!line.empty() && (line.back() == ' ' || line.back() == '\r')) line.remove_suffix(1);
        return line.substr(0, 3) == "```";
    };

    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (!is_fence(lines[i])) continue;
        std::string interior;
        for (std::size_t j = i + 1; j < lines.size() && !is_fence(lines[j]); ++j) {
            interior += lines[j];
            interior += '\n';
        }
        if (!interior.empty()) interior.pop_back();
        return interior;
    }

    const std::string indicator = comment_marker(language) + " " + kIndicatorText;
    std::size_t last_indicator = lines.size();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string_view line = lines[i];
        while (!line.empty() && (line.back() == ' ' || line.back() == '\r')) line.remove_suffix(1);
        if (line == indicator) last_indicator = i;
    }
    if (last_indicator != lines.size()) {
        std::string tail;
        for (std::size_t j = last_indicator + 1; j < lines.size(); ++j) {
            tail += lines[j];
            tail += '\n';
        }
        if (!tail.empty()) tail.pop_back();
        return tail;
    }

    std::string_view trimmed = raw;
    const auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
    while (!trimmed.empty() && is_ws(trimmed.front())) trimmed.remove_prefix(1);
    while (!trimmed.empty() && is_ws(trimmed.back())) trimmed.remove_suffix(1);
    return std::string(trimmed);
}

// ---------------------------------------------------------------------------
// Mock fault generator: seeded single-edit mutations in the style of classic
// mutation-testing operators, so offline runs produce realistic TestFail
// candidates without any model.
// ---------------------------------------------------------------------------

namespace detail {

struct MutationSite {
    std::size_t pos = 0;
    std::size_t len = 0;
    std::string replacement;
};

inline bool ident_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

inline std::vector<MutationSite> relational_flip_sites(const std::string& code) {
    std::vector<MutationSite> sites;
    std::size_t i = 0;
    while (i < code.size()) {
        if (i + 1 < code.size()) {
            const std::string two = code.substr(i, 2);
            if (two == "==") { sites.push_back({i, 2, "!="}); i += 2; continue; }
            if (two == "!=") { sites.push_back({i, 2, "=="}); i += 2; continue; }
            if (two == "<=") { sites.push_back({i, 2, "<"}); i += 2; continue; }
            if (two == ">=") { sites.push_back({i, 2, ">"}); i += 2; continue; }
            if (two == "<<" || two == ">>" || two == "->") { i += 2; continue; }
        }
        const char c = code[i];
        if (c == '<')
            sites.push_back({i, 1, "<="});
        else if (c == '>' && (i == 0 || code[i - 1] != '-'))
            sites.push_back({i, 1, ">="});
        ++i;
    }
    return sites;
}

inline std::vector<MutationSite> arithmetic_flip_sites(const std::string& code) {
    std::vector<MutationSite> sites;
    for (std::size_t i = 0; i < code.size(); ++i) {
        const char c = code[i];
        if (c != '+' && c != '-') continue;
        const char prev = i > 0 ? code[i - 1] : '\0';
        const char next = i + 1 < code.size() ? code[i + 1] : '\0';
        if (prev == c || next == c || next == '=' || next == '>') continue;
        if ((prev == 'e' || prev == 'E') && i >= 2 && (code[i - 2] >= '0' && code[i - 2] <= '9'))
            continue; // exponent sign in a float literal
        sites.push_back({i, 1, std::string(1, c == '+' ? '-' : '+')});
    }
    return sites;
}

// Integer literal sites carry both the +1 and the -1 rewrite; the caller
// picks one of the two entries.
inline std::vector<MutationSite> boundary_sites(const std::string& code) {
    std::vector<MutationSite> sites;
    std::size_t i = 0;
    while (i < code.size()) {
        if (code[i] < '0' || code[i] > '9') { ++i; continue; }
        const std::size_t start = i;
        while (i < code.size() && code[i] >= '0' && code[i] <= '9') ++i;
        const bool led_in = start > 0 && (ident_char(code[start - 1]) || code[start - 1] == '.');
        const bool led_out = i < code.size() && (ident_char(code[i]) || code[i] == '.');
        if (led_in || led_out) continue;
        const std::string digits = code.substr(start, i - start);
        if (digits.size() > 18) continue; // avoid overflow on absurd literals
        const long long value = std::stoll(digits);
        sites.push_back({start, digits.size(), std::to_string(value + 1)});
        sites.push_back({start, digits.size(), std::to_string(value - 1)});
    }
    return sites;
}

inline std::vector<MutationSite> negate_condition_sites(const std::string& code) {
    std::vector<MutationSite> sites;
    for (const std::string_view keyword : {std::string_view("if"), std::string_view("while")}) {
        std::size_t from = 0;
        while (true) {
            const std::size_t at = code.find(keyword, from);
            if (at == std::string::npos) break;
            from = at + keyword.size();
            if (at > 0 && ident_char(code[at - 1])) continue;
            std::size_t p = at + keyword.size();
            while (p < code.size() && (code[p] == ' ' || code[p] == '\t')) ++p;
            if (p >= code.size() || code[p] != '(') continue;
            std::size_t depth = 0;
            std::size_t close = std::string::npos;
            for (std::size_t q = p; q < code.size(); ++q) {
                if (code[q] == '(') ++depth;
                if (code[q] == ')') {
                    --depth;
                    if (depth == 0) { close = q; break; }
                }
            }
            if (close == std::string::npos) continue;
            const std::string cond = code.substr(p + 1, close - p - 1);
            sites.push_back({p + 1, cond.size(), "!(" + cond + ")"});
        }
    }
    return sites;
}

inline std::vector<MutationSite> delete_statement_sites(const std::string& code) {
    std::vector<MutationSite> sites;
    std::size_t start = 0;
    while (start <= code.size()) {
        std::size_t end = code.find('\n', start);
        const bool last = end == std::string::npos;
        if (last) end = code.size();
        std::string_view line(code.data() + start, end - start);
        std::string_view body = line;
        while (!body.empty() && (body.back() == ' ' || body.back() == '\t' || body.back() == '\r'))
            body.remove_suffix(1);
        if (!body.empty() && body.back() == ';')
            sites.push_back({start, end - start + (last ? 0 : 1), ""});
        if (last) break;
        start = end + 1;
    }
    return sites;
}

// All mutation site lists for one function, per operator, skipping operators
// with no applicable site.
inline std::vector<std::vector<MutationSite>> mutation_menu(const std::string& code) {
    std::vector<std::vector<MutationSite>> menu;
    for (auto&& sites : {relational_flip_sites(code), arithmetic_flip_sites(code),
                         boundary_sites(code), negate_condition_sites(code),
                         delete_statement_sites(code)}) {
        if (!sites.empty()) menu.push_back(std::move(sites));
    }
    return menu;
}

inline std::string apply_site(const std::string& code, const MutationSite& site) {
    std::string out = code.substr(0, site.pos);
    out += site.replacement;
    out += code.substr(site.pos + site.len);
    return out;
}

} // namespace detail

/// Generates the `index`-th deterministic mutant of a function, or nullopt
/// when that sample degenerates (the edit disappears under normalization).
/// Throws NoMutableSite when no operator applies at all. Seeding is per
/// (seed, function id, index), so samples are order-independent.
inline std::optional<std::string> mock_mutate_one(const FunctionRecord& function,
                                                  std::uint64_t seed, std::size_t index) {
    if (function.label == Label::Buggy)
        throw Error(ErrorCode::QueryIsBuggy, "mock mutation takes non-buggy functions, got " + function.id);
    const auto menu = detail::mutation_menu(function.code);
    if (menu.empty())
        throw Error(ErrorCode::NoMutableSite, "no mutation operator applies to " + function.id);

    std::mt19937_64 rng(mix_seed(seed, function.id, index));
    const auto& sites = menu[bounded(rng, menu.size())];
    const auto& site = sites[bounded(rng, sites.size())];
    std::string mutated = detail::apply_site(function.code, site);
    if (fingerprint_normalize(mutated) == fingerprint_normalize(function.code))
        return std::nullopt;
    return mutated;
}

/// Produces up to n mock fault candidates for one non-buggy function. Samples
/// whose edit degenerates are skipped, so the result may hold fewer than n;
/// sample_index records which draws survived.
inline std::vector<GeneratedCandidate> mock_mutate(const FunctionRecord& function, std::size_t n,
                                                   std::uint64_t seed) {
    std::vector<GeneratedCandidate> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto mutated = mock_mutate_one(function, seed, i);
        if (!mutated) continue;
        GeneratedCandidate cand;
        cand.source_id = function.id;
        cand.sample_index = i;
        char idx[24];
        std::snprintf(idx, sizeof(idx), "%04zu", i);
        cand.candidate_id = function.id + "#" + idx;
        cand.raw = *mutated;
        cand.code = *mutated;
        cand.generator = GeneratorKind::Mock;
        cand.model = "mock";
        out.push_back(std::move(cand));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Generator ports
// ---------------------------------------------------------------------------

/// One raw completion per call; implementations must be safe to call from
/// several threads at once. Failures are reported by throwing Error.
class GeneratorPort {
public:
    virtual ~GeneratorPort() = default;
    virtual GeneratorKind kind() const = 0;
    virtual std::string complete(const PromptSpec& prompt, const SamplingConfig& cfg,
                                 std::size_t sample_index) = 0;
};

/// Offline generator: serves fault prompts by mutating the query function.
class MockGenerator final : public GeneratorPort {
public:
    MockGenerator(std::map<std::string, FunctionRecord> sources, std::uint64_t seed)
        : sources_(std::move(sources)), seed_(seed) {}

    GeneratorKind kind() const override { return GeneratorKind::Mock; }

    std::string complete(const PromptSpec& prompt, const SamplingConfig&,
                         std::size_t sample_index) override {
        if (prompt.kind != PromptKind::FaultGen)
            throw Error(ErrorCode::BadConfig, "the mock generator only serves fault prompts");
        const auto it = sources_.find(prompt.query_id);
        if (it == sources_.end())
            throw Error(ErrorCode::SchemaViolation, "unknown query id " + prompt.query_id);
        const auto mutated = mock_mutate_one(it->second, seed_, sample_index);
        if (!mutated)
            throw Error(ErrorCode::NoMutableSite,
                        "sample " + std::to_string(sample_index) + " degenerated for " + prompt.query_id);
        return *mutated;
    }

private:
    std::map<std::string, FunctionRecord> sources_;
    std::uint64_t seed_;
};

struct RemoteGeneratorConfig {
    std::string endpoint; // scheme://host:port
    std::string api_key;  // resolved from FAULTSMITH_API_KEY when empty
    int max_retries = 3;  // additional attempts after the first
    int backoff_ms = 500; // doubles per retry
};

/// Chat-completions client for any OpenAI-compatible runtime. Each sample is
/// one POST /v1/chat/completions with n=1, so per-sample failures stay
/// observable; retries with exponential backoff are bounded per request.
class RemoteGenerator final : public GeneratorPort {
public:
    explicit RemoteGenerator(RemoteGeneratorConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.endpoint.empty())
            throw Error(ErrorCode::BadConfig, "remote generator requires generator.endpoint");
        if (cfg_.api_key.empty()) {
            if (const char* key = std::getenv("FAULTSMITH_API_KEY")) cfg_.api_key = key;
        }
        if (cfg_.max_retries < 0 || cfg_.max_retries > 3)
            throw Error(ErrorCode::BadConfig, "max_retries must be in [0, 3]");
    }

    GeneratorKind kind() const override { return GeneratorKind::Remote; }

    std::string complete(const PromptSpec& prompt, const SamplingConfig& cfg,
                         std::size_t) override {
        const nlohmann::json body{
            {"model", cfg.model},
            {"messages", nlohmann::json::array({nlohmann::json{{"role", "user"}, {"content", prompt.text}}})},
            {"temperature", cfg.temperature},
            {"top_p", cfg.top_p},
            {"n", 1},
            {"max_tokens", cfg.max_tokens},
        };
        const std::string payload = body.dump();

        std::string last_error = "no attempt made";
        for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
            if (attempt > 0)
                std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.backoff_ms << (attempt - 1)));

            httplib::Client client(cfg_.endpoint);
            client.set_connection_timeout(cfg.timeout_s, 0);
            client.set_read_timeout(cfg.timeout_s, 0);
            client.set_write_timeout(cfg.timeout_s, 0);
            httplib::Headers headers;
            if (!cfg_.api_key.empty())
                headers.emplace("Authorization", "Bearer " + cfg_.api_key);

            auto res = client.Post("/v1/chat/completions", headers, payload, "application/json");
            if (!res) {
                last_error = "transport: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 401 || res->status == 403)
                throw Error(ErrorCode::AuthFailure, "endpoint rejected credentials (HTTP " +
                                                        std::to_string(res->status) + ")");
            if (res->status == 429 || res->status >= 500) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200)
                throw Error(ErrorCode::ResponseMalformed, "unexpected HTTP " + std::to_string(res->status));

            const nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
            if (reply.is_discarded() || !reply.contains("choices") || !reply["choices"].is_array() ||
                reply["choices"].empty())
                throw Error(ErrorCode::ResponseMalformed, "response body has no choices");
            const auto& choice = reply["choices"][0];
            if (!choice.contains("message") || !choice["message"].contains("content") ||
                !choice["message"]["content"].is_string())
                throw Error(ErrorCode::ResponseMalformed, "choice has no message content");
            return choice["message"]["content"].get<std::string>();
        }
        throw Error(ErrorCode::EndpointUnavailable,
                    cfg_.endpoint + " unavailable after " + std::to_string(cfg_.max_retries + 1) +
                        " attempts (" + last_error + ")");
    }

private:
    RemoteGeneratorConfig cfg_;
};

// ---------------------------------------------------------------------------
// Sample fan-out
// ---------------------------------------------------------------------------

struct SampleFailure {
    std::size_t sample_index = 0;
    std::string error;
};

struct GenerateResult {
    std::vector<GeneratedCandidate> candidates; // sorted by (source_id, sample_index)
    std::vector<SampleFailure> failures;
    std::vector<nlohmann::json> audit; // one request/response entry per sample, in index order
};

/// Collects up to n_samples candidates for one prompt. Samples run
/// concurrently up to max_in_flight; results are re-ordered by sample index
/// afterwards so downstream stages never observe completion order. Failed
/// samples become failure records; only a run where every sample failed
/// propagates as an error.
inline GenerateResult generate(const PromptSpec& prompt, const SamplingConfig& cfg,
                               GeneratorPort& port, Language language = Language::Other,
                               std::size_t max_in_flight = 8) {
    cfg.validate();
    const std::size_t n = cfg.n_samples;
    std::vector<std::optional<std::string>> raw(n);
    std::vector<std::string> errors(n);

    std::atomic<std::size_t> next{0};
    const std::size_t workers = std::min(std::max<std::size_t>(max_in_flight, 1), n);
    auto work = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                raw[i] = port.complete(prompt, cfg, i);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    GenerateResult result;
    for (std::size_t i = 0; i < n; ++i) {
        nlohmann::json entry{
            {"source_id", prompt.query_id},
            {"sample_index", i},
            {"generator", port.kind() == GeneratorKind::Mock ? "mock" : "remote"},
            {"request",
             {{"model", cfg.model},
              {"temperature", cfg.temperature},
              {"top_p", cfg.top_p},
              {"n", 1},
              {"max_tokens", cfg.max_tokens},
              {"prompt", prompt.text}}},
        };
        if (raw[i]) {
            entry["response"] = *raw[i];
            GeneratedCandidate cand;
            cand.source_id = prompt.query_id;
            cand.sample_index = i;
            char idx[24];
            std::snprintf(idx, sizeof(idx), "%04zu", i);
            cand.candidate_id = prompt.query_id + "#" + idx;
            cand.raw = *raw[i];
            cand.code = port.kind() == GeneratorKind::Mock ? *raw[i] : extract_code(*raw[i], language);
            cand.generator = port.kind();
            cand.model = port.kind() == GeneratorKind::Mock ? std::string("mock") : cfg.model;
            result.candidates.push_back(std::move(cand));
        } else {
            entry["error"] = errors[i];
            result.failures.push_back({i, errors[i]});
        }
        result.audit.push_back(std::move(entry));
    }

    if (result.candidates.empty() && !result.failures.empty())
        throw Error(ErrorCode::EndpointUnavailable,
                    "every sample failed for " + prompt.query_id + ": " + result.failures.front().error);
    return result;
}

} // namespace faultsmith
