#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "faultsmith/errors.hpp"
#include "faultsmith/textmetrics.hpp"

namespace faultsmith {

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const { return tp + fp + tn + fn; }

    bool operator==(const ConfusionCounts&) const = default;
};

/// Line-level fault-localization metrics with buggy as the positive class.
/// A 0/0 cell yields 0 and the metric's name lands in `degenerate` instead
/// of aborting a whole evaluation run on one pathological function.
struct FlMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double fpr = 0.0;
    std::vector<std::string> degenerate;
};

inline FlMetrics fl_metrics(const ConfusionCounts& counts) {
    if (counts.total() == 0)
        throw Error(ErrorCode::EmptyCounts, "confusion counts are all zero");
    FlMetrics m;
    const auto tp = static_cast<double>(counts.tp);
    const auto fp = static_cast<double>(counts.fp);
    const auto tn = static_cast<double>(counts.tn);
    const auto fn = static_cast<double>(counts.fn);

    m.accuracy = (tp + tn) / static_cast<double>(counts.total());
    if (counts.tp + counts.fp > 0)
        m.precision = tp / (tp + fp);
    else
        m.degenerate.push_back("precision");
    if (counts.tp + counts.fn > 0)
        m.recall = tp / (tp + fn);
    else
        m.degenerate.push_back("recall");
    if (m.precision + m.recall > 0.0)
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    else
        m.degenerate.push_back("f1");
    if (counts.fp + counts.tn > 0)
        m.fpr = fp / (fp + tn);
    else
        m.degenerate.push_back("fpr");
    return m;
}

inline ConfusionCounts line_predictions_to_counts(const std::vector<int>& truth,
                                                  const std::vector<int>& pred) {
    if (truth.size() != pred.size())
        throw Error(ErrorCode::LengthMismatch,
                    "truth has " + std::to_string(truth.size()) + " lines, pred has " +
                        std::to_string(pred.size()));
    ConfusionCounts counts;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] != 0 && truth[i] != 1)
            throw Error(ErrorCode::SchemaViolation, "truth labels must be 0 or 1");
        if (pred[i] != 0 && pred[i] != 1)
            throw Error(ErrorCode::SchemaViolation, "pred labels must be 0 or 1");
        if (truth[i] == 1 && pred[i] == 1) ++counts.tp;
        else if (truth[i] == 0 && pred[i] == 1) ++counts.fp;
        else if (truth[i] == 0 && pred[i] == 0) ++counts.tn;
        else ++counts.fn;
    }
    return counts;
}

struct PassAtKInput {
    std::uint64_t n = 0; // samples per task
    std::uint64_t c = 0; // correct samples
    std::uint64_t k = 0; // cut
};

/// Unbiased pass@k: 1 - C(n-c, k) / C(n, k), evaluated as a running product
/// of (n-c-i)/(n-i) so n = 200 never overflows. c = 0 gives exactly 0 and
/// n-c < k gives exactly 1.
inline double pass_at_k(const PassAtKInput& input) {
    if (input.c > input.n || input.k < 1 || input.k > input.n)
        throw Error(ErrorCode::BadArity,
                    "need 0 <= c <= n and 1 <= k <= n, got n=" + std::to_string(input.n) +
                        " c=" + std::to_string(input.c) + " k=" + std::to_string(input.k));
    if (input.c == 0) return 0.0;
    if (input.n - input.c < input.k) return 1.0;
    double miss_all = 1.0;
    for (std::uint64_t i = 0; i < input.k; ++i)
        miss_all *= static_cast<double>(input.n - input.c - i) / static_cast<double>(input.n - i);
    return 1.0 - miss_all;
}

struct RetrievalQuery {
    std::string query_id;
    std::string label;
    std::vector<std::string> ranking; // candidate ids, best first
};

/// MAP@R over a retrieval run. R is per query: the number of other items in
/// the pool sharing the query's class. AP@R = (1/R) * sum over the top R of
/// Precision(i) * rel(i); MAP@R is the mean over queries (queries whose
/// class has no other member carry no retrieval signal and are skipped).
inline double map_at_r(const std::vector<RetrievalQuery>& queries,
                       const std::map<std::string, std::string>& labels) {
    double mean = 0.0;
    double compensation = 0.0; // Kahan, so aggregation order can never matter
    std::size_t counted = 0;
    for (const auto& query : queries) {
        std::size_t class_size = 0;
        for (const auto& [id, label] : labels)
            if (label == query.label) ++class_size;
        if (class_size == 0)
            throw Error(ErrorCode::SchemaViolation, "query " + query.query_id + " has an unknown label");
        const std::size_t r = class_size - 1;
        if (r == 0) continue;
        if (query.ranking.size() < r)
            throw Error(ErrorCode::ShortRanking,
                        "query " + query.query_id + " ranks " + std::to_string(query.ranking.size()) +
                            " candidates but R=" + std::to_string(r));

        double ap = 0.0;
        std::size_t hits = 0;
        for (std::size_t i = 0; i < r; ++i) {
            const std::string& cand = query.ranking[i];
            if (cand == query.query_id)
                throw Error(ErrorCode::SchemaViolation,
                            "query " + query.query_id + " appears in its own ranking");
            const auto it = labels.find(cand);
            const bool rel = it != labels.end() && it->second == query.label;
            if (rel) {
                ++hits;
                ap += static_cast<double>(hits) / static_cast<double>(i + 1);
            }
        }
        ap /= static_cast<double>(r);

        const double y = ap - compensation;
        const double t = mean + y;
        compensation = (t - mean) - y;
        mean = t;
        ++counted;
    }
    if (counted == 0)
        throw Error(ErrorCode::EmptyCounts, "no query had a non-empty relevant set");
    return mean / static_cast<double>(counted);
}

struct CharacterizeItem {
    std::string project;
    std::string non_buggy_code;
    std::string candidate_code;
};

/// One row per project: confirmed-fault count plus mean added/removed/
/// modified lines and mean edit distance between source and candidate.
struct FaultCharacteristics {
    std::string project;
    std::uint64_t test_fail = 0;
    double add = 0.0;
    double remove = 0.0;
    double modify = 0.0;
    double edit_distance = 0.0;
};

inline nlohmann::json to_json(const FaultCharacteristics& row) {
    return nlohmann::json{
        {"project", row.project}, {"test_fail", row.test_fail},       {"add", row.add},
        {"remove", row.remove},   {"modify", row.modify},             {"edit_distance", row.edit_distance},
    };
}

inline std::vector<FaultCharacteristics> characterize(const std::vector<CharacterizeItem>& items) {
    std::map<std::string, FaultCharacteristics> rows;
    for (const auto& item : items) {
        FaultCharacteristics& row = rows[item.project];
        row.project = item.project;
        const LineChangeCounts changes = line_changes(item.non_buggy_code, item.candidate_code);
        row.test_fail += 1;
        row.add += static_cast<double>(changes.added);
        row.remove += static_cast<double>(changes.removed);
        row.modify += static_cast<double>(changes.modified);
        row.edit_distance += static_cast<double>(levenshtein(item.non_buggy_code, item.candidate_code));
    }
    std::vector<FaultCharacteristics> out;
    out.reserve(rows.size());
    for (auto& [project, row] : rows) {
        const auto n = static_cast<double>(row.test_fail);
        row.add /= n;
        row.remove /= n;
        row.modify /= n;
        row.edit_distance /= n;
        out.push_back(std::move(row));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Prediction / retrieval / pass@k input files
// ---------------------------------------------------------------------------

struct LinePredictionRecord {
    std::string function_id;
    std::vector<int> truth;
    std::vector<int> pred;
};

enum class FlAggregate { Micro, Macro };

namespace detail {

inline std::vector<nlohmann::json> read_jsonl_objects(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw Error(ErrorCode::MissingFile, path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    std::vector<nlohmann::json> rows;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object())
            throw Error(ErrorCode::SchemaViolation,
                        path.string() + ":" + std::to_string(line_number) + " is not a JSON object");
        rows.push_back(std::move(obj));
    }
    return rows;
}

} // namespace detail

inline std::vector<LinePredictionRecord> read_predictions(const std::filesystem::path& path) {
    std::vector<LinePredictionRecord> records;
    for (const auto& obj : detail::read_jsonl_objects(path)) {
        LinePredictionRecord rec;
        if (!obj.contains("function_id") || !obj["function_id"].is_string() ||
            !obj.contains("truth") || !obj["truth"].is_array() || !obj.contains("pred") ||
            !obj["pred"].is_array())
            throw Error(ErrorCode::SchemaViolation, "prediction rows need function_id, truth, pred");
        rec.function_id = obj["function_id"].get<std::string>();
        for (const auto& v : obj["truth"]) rec.truth.push_back(v.get<int>());
        for (const auto& v : obj["pred"]) rec.pred.push_back(v.get<int>());
        records.push_back(std::move(rec));
    }
    return records;
}

struct RetrievalRun {
    std::vector<RetrievalQuery> queries;
    std::map<std::string, std::string> labels;
};

inline RetrievalRun read_retrieval(const std::filesystem::path& path) {
    RetrievalRun run;
    for (const auto& obj : detail::read_jsonl_objects(path)) {
        if (!obj.contains("query_id") || !obj["query_id"].is_string() || !obj.contains("label") ||
            !obj["label"].is_string() || !obj.contains("ranking") || !obj["ranking"].is_array())
            throw Error(ErrorCode::SchemaViolation, "retrieval rows need query_id, label, ranking");
        RetrievalQuery query;
        query.query_id = obj["query_id"].get<std::string>();
        query.label = obj["label"].get<std::string>();
        for (const auto& v : obj["ranking"]) query.ranking.push_back(v.get<std::string>());
        run.labels[query.query_id] = query.label;
        run.queries.push_back(std::move(query));
    }
    return run;
}

struct PassAtKRecord {
    std::string task_id;
    std::uint64_t n = 0;
    std::uint64_t c = 0;
};

inline std::vector<PassAtKRecord> read_pass_at_k(const std::filesystem::path& path) {
    std::vector<PassAtKRecord> records;
    for (const auto& obj : detail::read_jsonl_objects(path)) {
        if (!obj.contains("task_id") || !obj.contains("n") || !obj.contains("c"))
            throw Error(ErrorCode::SchemaViolation, "pass@k rows need task_id, n, c");
        records.push_back({obj["task_id"].get<std::string>(), obj["n"].get<std::uint64_t>(),
                           obj["c"].get<std::uint64_t>()});
    }
    return records;
}

/// Micro pools the confusion cells across functions before computing the
/// metrics; macro computes per-function metrics and averages them.
inline FlMetrics evaluate_predictions(const std::vector<LinePredictionRecord>& records,
                                      FlAggregate aggregate = FlAggregate::Micro) {
    if (records.empty())
        throw Error(ErrorCode::EmptyCounts, "no prediction records");
    if (aggregate == FlAggregate::Micro) {
        ConfusionCounts pooled;
        for (const auto& rec : records) {
            const ConfusionCounts counts = line_predictions_to_counts(rec.truth, rec.pred);
            pooled.tp += counts.tp;
            pooled.fp += counts.fp;
            pooled.tn += counts.tn;
            pooled.fn += counts.fn;
        }
        return fl_metrics(pooled);
    }
    FlMetrics mean;
    for (const auto& rec : records) {
        const FlMetrics m = fl_metrics(line_predictions_to_counts(rec.truth, rec.pred));
        mean.accuracy += m.accuracy;
        mean.precision += m.precision;
        mean.recall += m.recall;
        mean.f1 += m.f1;
        mean.fpr += m.fpr;
        for (const auto& name : m.degenerate)
            if (std::find(mean.degenerate.begin(), mean.degenerate.end(), name) == mean.degenerate.end())
                mean.degenerate.push_back(name);
    }
    const auto n = static_cast<double>(records.size());
    mean.accuracy /= n;
    mean.precision /= n;
    mean.recall /= n;
    mean.f1 /= n;
    mean.fpr /= n;
    return mean;
}

/// Average pass@k across tasks, one value per cut k; every task contributes
/// pass@k(n_t, c_t, k).
inline std::map<std::uint64_t, double> mean_pass_at_k(const std::vector<PassAtKRecord>& records,
                                                      const std::vector<std::uint64_t>& ks) {
    if (records.empty())
        throw Error(ErrorCode::EmptyCounts, "no pass@k records");
    std::map<std::uint64_t, double> means;
    for (const std::uint64_t k : ks) {
        double sum = 0.0;
        for (const auto& rec : records) sum += pass_at_k({rec.n, rec.c, k});
        means[k] = sum / static_cast<double>(records.size());
    }
    return means;
}

} // namespace faultsmith
