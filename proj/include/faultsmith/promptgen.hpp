#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "faultsmith/corpus.hpp"
#include "faultsmith/embedding.hpp"
#include "faultsmith/errors.hpp"

namespace faultsmith {

enum class PromptKind { FaultGen, CloneGen };

inline std::string to_string(PromptKind kind) {
    return kind == PromptKind::FaultGen ? "fault_gen" : "clone_gen";
}

inline std::optional<PromptKind> parse_prompt_kind(std::string_view s) {
    if (s == "fault_gen") return PromptKind::FaultGen;
    if (s == "clone_gen") return PromptKind::CloneGen;
    return std::nullopt;
}

struct PromptSpec {
    PromptKind kind = PromptKind::FaultGen;
    std::string text;
    std::vector<std::string> shots; // example-pair ids, in prompt order
    std::string query_id;
};

inline nlohmann::json to_json(const PromptSpec& prompt) {
    return nlohmann::json{
        {"kind", to_string(prompt.kind)},
        {"text", prompt.text},
        {"shots", prompt.shots},
        {"query_id", prompt.query_id},
    };
}

/// A (non-buggy, buggy) example pair from the training pool, keyed by the
/// id of the buggy record it came from.
struct TrainingPair {
    std::string id;
    std::string non_buggy;
    std::string buggy;
};

inline const std::string kTaskDescriptionText = "Inject a bug for the non-buggy function";
inline const std::string kNonBuggyHeaderText = "Non-Buggy Function";
inline const std::string kIndicatorText = "Buggy Function";

/// Clusters a training pool once and serves per-query shot selection:
/// k-means over the non-buggy embeddings with k = shot count, then the most
/// cosine-similar member of each cluster, ordered nearest-first. A pool pair
/// sharing the query's id is skipped so a query can never see its own fix.
class ExampleSelector {
public:
    ExampleSelector(std::vector<TrainingPair> pool, Embedder& embedder, std::size_t k_shots,
                    std::uint64_t seed)
        : pool_(std::move(pool)), k_shots_(k_shots) {
        if (k_shots_ == 0 || pool_.size() < k_shots_)
            throw Error(ErrorCode::PoolTooSmall,
                        "pool of " + std::to_string(pool_.size()) + " pairs cannot serve " +
                            std::to_string(k_shots_) + " shots");
        points_.reserve(pool_.size());
        for (const auto& pair : pool_)
            points_.emplace_back(pair.id, embedder.embed(pair.non_buggy));
        clusters_ = kmeans(points_, k_shots_, seed);
    }

    const ClusterAssignment& clusters() const { return clusters_; }

    std::vector<std::string> select(const EmbeddingVector& query_embedding,
                                    const std::string& query_id) const {
        std::vector<std::pair<double, std::string>> picked;
        for (std::size_t c = 0; c < k_shots_; ++c) {
            std::string best_id;
            double best = 0.0;
            for (const auto& [id, vec] : points_) {
                if (id == query_id) continue;
                const auto it = clusters_.assignments.find(id);
                if (it == clusters_.assignments.end() || it->second != c) continue;
                const double sim = cosine(query_embedding, vec);
                if (best_id.empty() || sim > best || (sim == best && id < best_id)) {
                    best = sim;
                    best_id = id;
                }
            }
            if (!best_id.empty()) picked.emplace_back(best, best_id);
        }
        // A cluster can be emptied by the self-exclusion; top up from the
        // rest of the pool so the shot count stays k.
        while (picked.size() < k_shots_) {
            std::string best_id;
            double best = 0.0;
            for (const auto& [id, vec] : points_) {
                if (id == query_id) continue;
                bool taken = false;
                for (const auto& [sim, chosen] : picked) taken = taken || chosen == id;
                if (taken) continue;
                const double sim = cosine(query_embedding, vec);
                if (best_id.empty() || sim > best || (sim == best && id < best_id)) {
                    best = sim;
                    best_id = id;
                }
            }
            if (best_id.empty())
                throw Error(ErrorCode::PoolTooSmall, "pool exhausted while selecting shots");
            picked.emplace_back(best, best_id);
        }
        std::sort(picked.begin(), picked.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first; // highest similarity first
            return a.second < b.second;
        });
        std::vector<std::string> ids;
        ids.reserve(picked.size());
        for (const auto& [sim, id] : picked) ids.push_back(id);
        return ids;
    }

    const TrainingPair& pair(const std::string& id) const {
        for (const auto& p : pool_)
            if (p.id == id) return p;
        throw Error(ErrorCode::PoolTooSmall, "unknown pair id " + id);
    }

private:
    std::vector<TrainingPair> pool_;
    std::size_t k_shots_;
    std::vector<std::pair<std::string, EmbeddingVector>> points_;
    ClusterAssignment clusters_;
};

/// One-call form of the selection: embeds the pool, clusters with
/// k = k_shots, and returns the chosen pair ids ordered by descending
/// cosine similarity to the query.
inline std::vector<std::string> select_examples(const std::vector<TrainingPair>& pool,
                                                const FunctionRecord& query, std::size_t k_shots,
                                                Embedder& embedder, std::uint64_t seed) {
    ExampleSelector selector(pool, embedder, k_shots, seed);
    return selector.select(embedder.embed(query.code), query.id);
}

/// Builds the few-shot fault-generation prompt: each shot contributes the
/// task-description line, the non-buggy header and code, the indicator line,
/// and the buggy code; the query contributes only the first three and the
/// prompt ends right after its indicator line.
inline PromptSpec build_fault_prompt(const FunctionRecord& query,
                                     const std::vector<TrainingPair>& shots) {
    if (query.label == Label::Buggy)
        throw Error(ErrorCode::QueryIsBuggy, "fault prompts take non-buggy queries, got " + query.id);
    const std::string marker = comment_marker(query.language);

    std::string text;
    const auto append_block = [&](const std::string& code) {
        text += code;
        if (code.empty() || code.back() != '\n') text += '\n';
    };
    for (const auto& shot : shots) {
        text += marker + " " + kTaskDescriptionText + "\n";
        text += marker + " " + kNonBuggyHeaderText + "\n";
        append_block(shot.non_buggy);
        text += marker + " " + kIndicatorText + "\n";
        append_block(shot.buggy);
    }
    text += marker + " " + kTaskDescriptionText + "\n";
    text += marker + " " + kNonBuggyHeaderText + "\n";
    append_block(query.code);
    text += marker + " " + kIndicatorText + "\n";

    PromptSpec prompt;
    prompt.kind = PromptKind::FaultGen;
    prompt.text = std::move(text);
    for (const auto& shot : shots) prompt.shots.push_back(shot.id);
    prompt.query_id = query.id;
    return prompt;
}

/// Clone prompts are the task prompt verbatim, zero-shot.
inline PromptSpec build_clone_prompt(const CloneTask& task) {
    if (task.prompt.empty())
        throw Error(ErrorCode::EmptyPrompt, "clone task " + task.task_id + " has an empty prompt");
    PromptSpec prompt;
    prompt.kind = PromptKind::CloneGen;
    prompt.text = task.prompt;
    prompt.query_id = task.task_id;
    return prompt;
}

enum class PromptElementKind { TaskDescription, NonBuggyHeader, NonBuggyCode, Indicator, BuggyCode };

struct PromptElement {
    PromptElementKind kind;
    std::string text;
};

struct ParsedExample {
    std::string non_buggy_code;
    std::string buggy_code; // empty for the trailing query
};

struct ParsedFaultPrompt {
    std::vector<ParsedExample> examples; // complete 4-element shots
    std::string query_code;
    std::size_t element_count = 0; // 4 per shot + 3 for the query
};

/// Structural inverse of build_fault_prompt. Marker lines are exact-match
/// delimiters; code blocks are whatever sits between them. Counting the
/// non-buggy header and its code as one element, a two-shot prompt parses
/// into 2*4 + 3 elements.
inline ParsedFaultPrompt parse_fault_prompt(std::string_view text, const std::string& marker = "//") {
    const std::string task_line = marker + " " + kTaskDescriptionText;
    const std::string header_line = marker + " " + kNonBuggyHeaderText;
    const std::string indicator_line = marker + " " + kIndicatorText;

    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        lines.emplace_back(text.substr(start, end - start));
        if (end == text.size()) break;
        start = end + 1;
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();

    ParsedFaultPrompt parsed;
    std::size_t i = 0;
    while (i < lines.size()) {
        if (lines[i] != task_line)
            throw Error(ErrorCode::SchemaViolation, "expected task description at line " + std::to_string(i + 1));
        ++i;
        parsed.element_count += 1; // task description
        if (i >= lines.size() || lines[i] != header_line)
            throw Error(ErrorCode::SchemaViolation, "expected non-buggy header at line " + std::to_string(i + 1));
        ++i;
        std::string non_buggy;
        while (i < lines.size() && lines[i] != indicator_line) {
            non_buggy += lines[i];
            non_buggy += '\n';
            ++i;
        }
        if (i >= lines.size())
            throw Error(ErrorCode::SchemaViolation, "prompt ends before the indicator line");
        ++i; // consume indicator
        parsed.element_count += 2; // non-buggy function + indicator
        std::string buggy;
        while (i < lines.size() && lines[i] != task_line) {
            buggy += lines[i];
            buggy += '\n';
            ++i;
        }
        if (buggy.empty() && i >= lines.size()) {
            parsed.query_code = std::move(non_buggy);
            return parsed;
        }
        parsed.element_count += 1; // buggy function
        parsed.examples.push_back({std::move(non_buggy), std::move(buggy)});
    }
    throw Error(ErrorCode::SchemaViolation, "prompt has no trailing query section");
}

} // namespace faultsmith
