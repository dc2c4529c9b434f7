#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "faultsmith/corpus.hpp"
#include "faultsmith/embedding.hpp"
#include "faultsmith/errors.hpp"
#include "faultsmith/llmclient.hpp"
#include "faultsmith/promptgen.hpp"
#include "faultsmith/rng.hpp"
#include "faultsmith/textmetrics.hpp"

namespace faultsmith {

/// Reference distribution of the training pairs: mean lines changed, mean
/// edit distance, mean embedding cosine similarity.
struct ReferenceStats {
    double lc_ave = 0.0;
    double ed_ave = 0.0;
    double ss_ave = 0.0;
};

inline nlohmann::json to_json(const ReferenceStats& stats) {
    return nlohmann::json{{"lc_ave", stats.lc_ave}, {"ed_ave", stats.ed_ave}, {"ss_ave", stats.ss_ave}};
}

struct CandidateMetrics {
    double lc = 0.0;       // added + removed + modified lines
    std::size_t ed = 0;    // Levenshtein distance
    double ss = 0.0;       // cosine similarity, in [-1, 1]
};

struct ScoredCandidate {
    std::string candidate_id;
    std::string source_id;
    CandidateMetrics metrics;
    double score = 0.0;
};

inline nlohmann::json to_json(const ScoredCandidate& scored) {
    return nlohmann::json{
        {"candidate_id", scored.candidate_id}, {"source_id", scored.source_id},
        {"lc", scored.metrics.lc},             {"ed", scored.metrics.ed},
        {"ss", scored.metrics.ss},             {"score", scored.score},
    };
}

namespace detail {

// ceil(fraction * count) with a epsilon that absorbs binary representation
// drift: 0.1 * 30 evaluates to 3.0000000000000004, which must still cut 3.
inline std::size_t fraction_cut(double fraction, std::size_t count) {
    return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(count) - 1e-9));
}

} // namespace detail

inline CandidateMetrics candidate_metrics(const std::string& non_buggy_code,
                                          const std::string& candidate_code, Embedder& embedder) {
    CandidateMetrics metrics;
    metrics.lc = static_cast<double>(line_changes(non_buggy_code, candidate_code).total());
    metrics.ed = levenshtein(non_buggy_code, candidate_code);
    metrics.ss = cosine(embedder.embed(non_buggy_code), embedder.embed(candidate_code));
    return metrics;
}

/// Means over the training pairs, one contribution per pair. A zero mean
/// would turn the score's relative terms into divisions by zero, so it
/// aborts with guidance instead of silently substituting an epsilon.
inline ReferenceStats reference_stats(const std::vector<TrainingPair>& pairs, Embedder& embedder) {
    if (pairs.empty())
        throw Error(ErrorCode::EmptyTraining, "reference stats need at least one training pair");
    ReferenceStats stats;
    for (const auto& pair : pairs) {
        const CandidateMetrics m = candidate_metrics(pair.non_buggy, pair.buggy, embedder);
        stats.lc_ave += m.lc;
        stats.ed_ave += static_cast<double>(m.ed);
        stats.ss_ave += m.ss;
    }
    const auto n = static_cast<double>(pairs.size());
    stats.lc_ave /= n;
    stats.ed_ave /= n;
    stats.ss_ave /= n;
    if (stats.lc_ave == 0.0 || stats.ed_ave == 0.0 || stats.ss_ave == 0.0)
        throw Error(ErrorCode::ZeroAverage,
                    "a reference mean is zero (lc/ed/ss = " + std::to_string(stats.lc_ave) + "/" +
                        std::to_string(stats.ed_ave) + "/" + std::to_string(stats.ss_ave) +
                        "); the training pairs are degenerate - fix the pool before scoring");
    return stats;
}

/// The selection score: sum of the absolute relative deviations of LC, ED,
/// and SS from the training means. Lower means closer to the reference
/// distribution.
inline double score_from_metrics(const CandidateMetrics& metrics, const ReferenceStats& stats) {
    return std::abs((metrics.lc - stats.lc_ave) / stats.lc_ave) +
           std::abs((static_cast<double>(metrics.ed) - stats.ed_ave) / stats.ed_ave) +
           std::abs((metrics.ss - stats.ss_ave) / stats.ss_ave);
}

inline ScoredCandidate score_candidate(const std::string& non_buggy_code,
                                       const GeneratedCandidate& candidate,
                                       const ReferenceStats& stats, Embedder& embedder) {
    ScoredCandidate scored;
    scored.candidate_id = candidate.candidate_id;
    scored.source_id = candidate.source_id;
    scored.metrics = candidate_metrics(non_buggy_code, candidate.code, embedder);
    scored.score = score_from_metrics(scored.metrics, stats);
    return scored;
}

struct SelectedPair {
    std::string source_id;
    std::string candidate_id;

    bool operator==(const SelectedPair&) const = default;
};

/// Ranking selection: keep the minimum-score candidate per source function
/// (ties to the smallest candidate_id), sort the unique pairs by ascending
/// score (ties by source_id), and cut at ceil(fraction * count). Cuts nest:
/// the 10% selection is a prefix of the 30% one, and so on.
inline std::vector<SelectedPair> select_faults(const std::vector<ScoredCandidate>& scored,
                                               double fraction) {
    if (scored.empty())
        throw Error(ErrorCode::EmptyTraining, "select_faults needs at least one scored candidate");
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw Error(ErrorCode::BadConfig, "fraction must be in (0, 1]");

    std::map<std::string, const ScoredCandidate*> best;
    for (const auto& cand : scored) {
        auto [it, inserted] = best.try_emplace(cand.source_id, &cand);
        if (inserted) continue;
        const ScoredCandidate* cur = it->second;
        if (cand.score < cur->score ||
            (cand.score == cur->score && cand.candidate_id < cur->candidate_id))
            it->second = &cand;
    }

    std::vector<const ScoredCandidate*> ranked;
    ranked.reserve(best.size());
    for (const auto& [source_id, cand] : best) ranked.push_back(cand);
    std::sort(ranked.begin(), ranked.end(), [](const ScoredCandidate* a, const ScoredCandidate* b) {
        if (a->score != b->score) return a->score < b->score;
        return a->source_id < b->source_id;
    });

    const std::size_t cut = detail::fraction_cut(fraction, ranked.size());
    std::vector<SelectedPair> out;
    out.reserve(cut);
    for (std::size_t i = 0; i < cut && i < ranked.size(); ++i)
        out.push_back({ranked[i]->source_id, ranked[i]->candidate_id});
    return out;
}

/// Baseline for the ranking-vs-random comparison: one uniformly random
/// candidate per source, then a uniformly random ceil(fraction * count)
/// subset. Deterministic for a fixed seed.
inline std::vector<SelectedPair> random_select(const std::vector<ScoredCandidate>& scored,
                                               double fraction, std::uint64_t seed) {
    if (scored.empty())
        throw Error(ErrorCode::EmptyTraining, "random_select needs at least one scored candidate");
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw Error(ErrorCode::BadConfig, "fraction must be in (0, 1]");

    std::map<std::string, std::vector<const ScoredCandidate*>> by_source;
    for (const auto& cand : scored) by_source[cand.source_id].push_back(&cand);

    std::mt19937_64 rng(seed);
    std::vector<SelectedPair> pairs;
    pairs.reserve(by_source.size());
    for (auto& [source_id, cands] : by_source) {
        std::sort(cands.begin(), cands.end(), [](const ScoredCandidate* a, const ScoredCandidate* b) {
            return a->candidate_id < b->candidate_id;
        });
        const ScoredCandidate* pick = cands[bounded(rng, cands.size())];
        pairs.push_back({source_id, pick->candidate_id});
    }

    fisher_yates(pairs, rng);
    const std::size_t cut = detail::fraction_cut(fraction, pairs.size());
    pairs.resize(std::min(cut, pairs.size()));
    std::sort(pairs.begin(), pairs.end(), [](const SelectedPair& a, const SelectedPair& b) {
        return a.source_id < b.source_id;
    });
    return pairs;
}

struct CloneItem {
    std::string id;
    std::string code;
};

using DistanceMetric = std::function<double(const std::string&, const std::string&)>;

inline double levenshtein_metric(const std::string& a, const std::string& b) {
    return static_cast<double>(levenshtein(a, b));
}

/// Clone keep rule: within each task, a clone stays when its mean distance
/// to the other clones is at least the mean over all unordered pairs.
/// Two-clone groups always keep both (both sides equal the single distance),
/// and all-identical groups keep everything (0 >= 0).
inline std::map<std::string, std::vector<std::string>> select_clones(
    const std::map<std::string, std::vector<CloneItem>>& groups,
    const DistanceMetric& metric = levenshtein_metric) {
    std::map<std::string, std::vector<std::string>> kept;
    for (const auto& [task_id, clones] : groups) {
        const std::size_t g = clones.size();
        if (g < 2)
            throw Error(ErrorCode::GroupTooSmall,
                        "task " + task_id + " has " + std::to_string(g) + " clone(s); need >= 2");

        std::vector<std::vector<double>> dist(g, std::vector<double>(g, 0.0));
        double overall = 0.0;
        for (std::size_t i = 0; i < g; ++i) {
            for (std::size_t j = i + 1; j < g; ++j) {
                const double d = metric(clones[i].code, clones[j].code);
                dist[i][j] = d;
                dist[j][i] = d;
                overall += d;
            }
        }
        overall /= static_cast<double>(g * (g - 1) / 2);

        std::vector<std::string>& ids = kept[task_id];
        for (std::size_t i = 0; i < g; ++i) {
            double rel = 0.0;
            for (std::size_t j = 0; j < g; ++j)
                if (j != i) rel += dist[i][j];
            rel /= static_cast<double>(g - 1);
            if (rel >= overall) ids.push_back(clones[i].id);
        }
    }
    return kept;
}

struct GeneratedPair {
    FunctionRecord source;        // the non-buggy function that was mutated
    GeneratedCandidate candidate; // the selected fault for it
};

/// Union of the base corpus and the selected (non-buggy, buggy) pairs, with
/// generated records tagged by an id prefix, deduplicated afterwards so a
/// pair that duplicates a base record collapses onto it.
inline Corpus assemble_dataset(const Corpus& base, const std::vector<GeneratedPair>& selected,
                               const std::string& regime_label) {
    Corpus out;
    out.provenance.source_path = base.provenance.source_path + "+generated@" + regime_label;
    out.provenance.ingested_at_unix = base.provenance.ingested_at_unix;
    out.records = base.records;
    for (const auto& pair : selected) {
        FunctionRecord non_buggy;
        non_buggy.id = "gen:" + pair.candidate.candidate_id + ":src";
        non_buggy.project = pair.source.project;
        non_buggy.code = pair.source.code;
        non_buggy.label = Label::NonBuggy;
        non_buggy.language = pair.source.language;
        non_buggy.test_cmd = pair.source.test_cmd;

        FunctionRecord buggy;
        buggy.id = "gen:" + pair.candidate.candidate_id;
        buggy.project = pair.source.project;
        buggy.code = pair.candidate.code;
        buggy.label = Label::Buggy;
        buggy.fixed_code = pair.source.code;
        buggy.language = pair.source.language;

        out.records.push_back(std::move(non_buggy));
        out.records.push_back(std::move(buggy));
    }
    if (selected.empty()) return out;
    return dedup(out);
}

} // namespace faultsmith
