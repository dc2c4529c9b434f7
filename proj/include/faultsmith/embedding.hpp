#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "faultsmith/errors.hpp"
#include "faultsmith/rng.hpp"

namespace faultsmith {

enum class EmbeddingSource { Hashing, Remote };

struct EmbeddingVector {
    std::vector<double> values;
    EmbeddingSource source = EmbeddingSource::Hashing;

    std::size_t dim() const { return values.size(); }
};

/// Port for anything that can turn code text into a vector. The hashing
/// embedder is the deterministic offline default; a remote model service
/// can be plugged in behind the same interface.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual EmbeddingVector embed(std::string_view code) = 0;
    virtual std::size_t dim() const = 0;
};

/// Bag-of-tokens hashing embedder. Tokens are maximal identifier runs
/// ([A-Za-z0-9_]+) and single operator characters; each token is FNV-hashed
/// into one of `dim` buckets, counts are L2-normalized. Token order does not
/// matter, and a text with no tokens maps to the unit vector e_0.
class HashingEmbedder final : public Embedder {
public:
    static constexpr std::size_t kDefaultDim = 256;

    explicit HashingEmbedder(std::size_t dim = kDefaultDim) : dim_(dim == 0 ? kDefaultDim : dim) {}

    EmbeddingVector embed(std::string_view code) override {
        std::vector<double> counts(dim_, 0.0);
        std::size_t i = 0;
        bool any = false;
        const auto is_ident = [](char c) {
            return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
        };
        while (i < code.size()) {
            const char c = code[i];
            if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
                ++i;
                continue;
            }
            std::size_t start = i;
            if (is_ident(c)) {
                while (i < code.size() && is_ident(code[i])) ++i;
            } else {
                ++i;
            }
            counts[fnv1a64(code.substr(start, i - start)) % dim_] += 1.0;
            any = true;
        }

        EmbeddingVector vec;
        vec.source = EmbeddingSource::Hashing;
        vec.values = std::move(counts);
        if (!any) {
            vec.values.assign(dim_, 0.0);
            vec.values[0] = 1.0;
            return vec;
        }
        double norm = 0.0;
        for (const double v : vec.values) norm += v * v;
        norm = std::sqrt(norm);
        for (double& v : vec.values) v /= norm;
        return vec;
    }

    std::size_t dim() const override { return dim_; }

private:
    std::size_t dim_;
};

inline double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.dim() != v.dim())
        throw Error(ErrorCode::DimensionMismatch,
                    "cosine over dims " + std::to_string(u.dim()) + " and " + std::to_string(v.dim()));
    double dot = 0.0;
    double nu = 0.0;
    double nv = 0.0;
    for (std::size_t i = 0; i < u.values.size(); ++i) {
        dot += u.values[i] * v.values[i];
        nu += u.values[i] * u.values[i];
        nv += v.values[i] * v.values[i];
    }
    if (nu == 0.0 || nv == 0.0)
        throw Error(ErrorCode::DimensionMismatch, "cosine is undefined for a zero vector");
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

struct ClusterAssignment {
    std::size_t k = 0;
    std::map<std::string, std::size_t> assignments; // record id -> cluster index
    std::vector<EmbeddingVector> centroids;
    std::vector<double> sse_history; // within-cluster SSE after each Lloyd iteration
    std::size_t iterations = 0;
};

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        d += diff * diff;
    }
    return d;
}

} // namespace detail

namespace detail {

inline ClusterAssignment kmeans_single_run(
    const std::vector<std::pair<std::string, EmbeddingVector>>& points, std::size_t k,
    std::uint64_t seed, std::size_t max_iterations) {
    const std::size_t n = points.size();
    if (k == 0 || n < k)
        throw Error(ErrorCode::TooFewPoints,
                    "kmeans needs at least k=" + std::to_string(k) + " points, got " + std::to_string(n));
    const std::size_t dim = points.front().second.dim();
    for (const auto& [id, vec] : points) {
        if (vec.dim() != dim)
            throw Error(ErrorCode::DimensionMismatch, "kmeans point " + id + " has a different dimension");
    }

    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> centroids;
    centroids.reserve(k);
    std::vector<bool> chosen(n, false);

    // k-means++ seeding
    {
        const std::size_t first = bounded(rng, n);
        centroids.push_back(points[first].second.values);
        chosen[first] = true;
        std::vector<double> d2(n, 0.0);
        while (centroids.size() < k) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double best = std::numeric_limits<double>::max();
                for (const auto& c : centroids)
                    best = std::min(best, detail::sq_dist(points[i].second.values, c));
                d2[i] = best;
                total += best;
            }
            std::size_t pick = n;
            if (total > 0.0) {
                const double r = unit_draw(rng) * total;
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += d2[i];
                    if (r < acc) {
                        pick = i;
                        break;
                    }
                }
                if (pick == n) pick = n - 1; // float round-off on the last bucket
            } else {
                // all remaining points coincide with a centroid
                for (std::size_t i = 0; i < n; ++i) {
                    if (!chosen[i]) {
                        pick = i;
                        break;
                    }
                }
                if (pick == n) pick = 0;
            }
            chosen[pick] = true;
            centroids.push_back(points[pick].second.values);
        }
    }

    std::vector<std::size_t> assign(n, 0);
    std::vector<std::size_t> prev_assign;
    ClusterAssignment result;
    result.k = k;

    for (std::size_t iter = 0; iter < max_iterations; ++iter) {
        // assignment step
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best_cluster = 0;
            double best = std::numeric_limits<double>::max();
            for (std::size_t c = 0; c < k; ++c) {
                const double d = detail::sq_dist(points[i].second.values, centroids[c]);
                if (d < best) {
                    best = d;
                    best_cluster = c;
                }
            }
            assign[i] = best_cluster;
        }

        // empty-cluster repair: steal the worst-fitting point
        std::vector<std::size_t> sizes(k, 0);
        for (const std::size_t a : assign) ++sizes[a];
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] != 0) continue;
            std::size_t farthest = n;
            double worst = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (sizes[assign[i]] <= 1) continue;
                const double d = detail::sq_dist(points[i].second.values, centroids[assign[i]]);
                if (d > worst) {
                    worst = d;
                    farthest = i;
                }
            }
            if (farthest == n) break; // all occupied clusters are singletons
            --sizes[assign[farthest]];
            assign[farthest] = c;
            ++sizes[c];
            centroids[c] = points[farthest].second.values;
        }

        // update step
        std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t d = 0; d < dim; ++d) sums[assign[i]][d] += points[i].second.values[d];
            ++counts[assign[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            for (std::size_t d = 0; d < dim; ++d) centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
        }

        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            sse += detail::sq_dist(points[i].second.values, centroids[assign[i]]);
        result.sse_history.push_back(sse);
        result.iterations = iter + 1;

        if (assign == prev_assign) break;
        prev_assign = assign;
    }

    result.centroids.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        result.centroids[c].values = centroids[c];
        result.centroids[c].source = points.front().second.source;
    }
    for (std::size_t i = 0; i < n; ++i) result.assignments[points[i].first] = assign[i];
    return result;
}

} // namespace detail

/// Lloyd's algorithm with k-means++ seeding, run `restarts` times from
/// sub-seeds of `seed`, keeping the run with the lowest final SSE. A single
/// Lloyd run stalls in a local optimum on a sizable fraction of small
/// instances; ten seeded restarts push near-optimality above 95% while
/// keeping the whole computation a pure function of (points, k, seed).
/// Assignment ties break toward the lower cluster index and an emptied
/// cluster is re-seeded with the point farthest from its own centroid; each
/// run stops when assignments are stable or after max_iterations.
inline ClusterAssignment kmeans(const std::vector<std::pair<std::string, EmbeddingVector>>& points,
                                std::size_t k, std::uint64_t seed,
                                std::size_t max_iterations = 100, std::size_t restarts = 10) {
    if (restarts == 0) restarts = 1;
    ClusterAssignment best;
    for (std::size_t r = 0; r < restarts; ++r) {
        ClusterAssignment run =
            detail::kmeans_single_run(points, k, mix_seed(seed, "kmeans-restart", r), max_iterations);
        if (best.centroids.empty() || run.sse_history.back() < best.sse_history.back())
            best = std::move(run);
    }
    return best;
}

/// Returns the id inside `cluster` whose vector is most cosine-similar to
/// the query; exact ties go to the lexicographically smallest id.
inline std::string nearest_in_cluster(const EmbeddingVector& query,
                                      const ClusterAssignment& assignment,
                                      std::size_t cluster,
                                      const std::vector<std::pair<std::string, EmbeddingVector>>& pool) {
    std::string best_id;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& [id, vec] : pool) {
        const auto it = assignment.assignments.find(id);
        if (it == assignment.assignments.end() || it->second != cluster) continue;
        const double sim = cosine(query, vec);
        if (sim > best || (sim == best && (best_id.empty() || id < best_id))) {
            best = sim;
            best_id = id;
        }
    }
    if (best_id.empty())
        throw Error(ErrorCode::EmptyCluster, "cluster " + std::to_string(cluster) + " has no members in pool");
    return best_id;
}

} // namespace faultsmith
