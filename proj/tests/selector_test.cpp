#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "faultsmith/selector.hpp"

using namespace faultsmith;

namespace {

ScoredCandidate scored(const std::string& source, const std::string& cand, double score) {
    ScoredCandidate s;
    s.source_id = source;
    s.candidate_id = cand;
    s.score = score;
    return s;
}

GeneratedCandidate candidate(const std::string& id, const std::string& source,
                             const std::string& code) {
    GeneratedCandidate cand;
    cand.candidate_id = id;
    cand.source_id = source;
    cand.code = code;
    cand.raw = code;
    return cand;
}

} // namespace

TEST(ReferenceStats, MeanOfOnePairIsThatPair) {
    HashingEmbedder embedder(64);
    const std::vector<TrainingPair> pairs = {
        {"p1", "int f() {\n  return 1;\n}", "int f() {\n  return 2;\n}"}};
    const ReferenceStats stats = reference_stats(pairs, embedder);
    const CandidateMetrics m = candidate_metrics(pairs[0].non_buggy, pairs[0].buggy, embedder);
    EXPECT_DOUBLE_EQ(stats.lc_ave, m.lc);
    EXPECT_DOUBLE_EQ(stats.ed_ave, static_cast<double>(m.ed));
    EXPECT_DOUBLE_EQ(stats.ss_ave, m.ss);
}

TEST(ReferenceStats, ArithmeticMeanOverPairs) {
    HashingEmbedder embedder(64);
    // lc 1 (one modified line) and lc 3 (three modified lines)
    const std::vector<TrainingPair> pairs = {
        {"p1", "a();\nb();\nc();", "a();\nb();\nx();"},
        {"p2", "a();\nb();\nc();", "q();\nr();\ns();"},
    };
    const ReferenceStats stats = reference_stats(pairs, embedder);
    EXPECT_DOUBLE_EQ(stats.lc_ave, 2.0);
}

TEST(ReferenceStats, MatchesIndependentMeanOracle) {
    HashingEmbedder embedder(64);
    std::mt19937_64 rng(15);
    std::vector<TrainingPair> pairs;
    for (int i = 0; i < 5; ++i) {
        const std::string tag = std::to_string(i);
        pairs.push_back({"p" + tag,
                         "int f" + tag + "(int a) {\n  return a + " + std::to_string(rng() % 40) + ";\n}",
                         "int f" + tag + "(int a) {\n  return a - " + std::to_string(rng() % 40) + ";\n}"});
    }
    const ReferenceStats stats = reference_stats(pairs, embedder);
    double lc = 0.0, ed = 0.0, ss = 0.0;
    for (const auto& pair : pairs) {
        lc += static_cast<double>(line_changes(pair.non_buggy, pair.buggy).total());
        ed += static_cast<double>(levenshtein(pair.non_buggy, pair.buggy));
        ss += cosine(embedder.embed(pair.non_buggy), embedder.embed(pair.buggy));
    }
    EXPECT_NEAR(stats.lc_ave, lc / 5.0, 1e-12);
    EXPECT_NEAR(stats.ed_ave, ed / 5.0, 1e-12);
    EXPECT_NEAR(stats.ss_ave, ss / 5.0, 1e-12);
}

TEST(ReferenceStats, EmptyTrainingThrows) {
    HashingEmbedder embedder(64);
    try {
        reference_stats({}, embedder);
        FAIL() << "expected EmptyTraining";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyTraining);
    }
}

TEST(ReferenceStats, ZeroAverageAborts) {
    HashingEmbedder embedder(64);
    // orthogonal token sets give ss = 0 for every pair -> ss_ave = 0
    const std::vector<TrainingPair> pairs = {{"p1", "aaa", "bbb"}};
    try {
        reference_stats(pairs, embedder);
        FAIL() << "expected ZeroAverage";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroAverage);
    }
}

TEST(Score, ZeroAtTheReferencePoint) {
    const ReferenceStats stats{1.5, 50.0, 0.9};
    CandidateMetrics metrics;
    metrics.lc = 1.5;
    metrics.ed = 50;
    metrics.ss = 0.9;
    EXPECT_DOUBLE_EQ(score_from_metrics(metrics, stats), 0.0);
}

TEST(Score, WorkedExample) {
    // stats (1.5, 50, 0.9), candidate (3, 100, 0.45) -> |1| + |1| + |0.5| = 2.5
    const ReferenceStats stats{1.5, 50.0, 0.9};
    CandidateMetrics metrics;
    metrics.lc = 3.0;
    metrics.ed = 100;
    metrics.ss = 0.45;
    EXPECT_NEAR(score_from_metrics(metrics, stats), 2.5, 1e-12);
}

TEST(Score, SingleTermIsolation) {
    const ReferenceStats stats{2.0, 40.0, 0.8};
    CandidateMetrics at_mean;
    at_mean.lc = 2.0;
    at_mean.ed = 40;
    at_mean.ss = 0.8;
    CandidateMetrics doubled_ed = at_mean;
    doubled_ed.ed = 80;
    EXPECT_NEAR(score_from_metrics(doubled_ed, stats) - score_from_metrics(at_mean, stats), 1.0,
                1e-12);
}

TEST(SelectFaults, LowestScorePerSourceWins) {
    const std::vector<ScoredCandidate> all = {
        scored("s1", "s1#0", 2.5),
        scored("s1", "s1#1", 0.3),
        scored("s1", "s1#2", 1.1),
    };
    const auto selected = select_faults(all, 1.0);
    ASSERT_EQ(selected.size(), 1u);
    EXPECT_EQ(selected[0].candidate_id, "s1#1");
}

TEST(SelectFaults, FractionalCutUsesCeil) {
    std::vector<ScoredCandidate> all;
    for (int i = 0; i < 10; ++i)
        all.push_back(scored("s" + std::to_string(i), "c" + std::to_string(i), 0.1 * i));
    EXPECT_EQ(select_faults(all, 0.3).size(), 3u);
    EXPECT_EQ(select_faults(all, 0.25).size(), 3u); // ceil(2.5)
    EXPECT_EQ(select_faults(all, 1.0).size(), 10u);
}

TEST(SelectFaults, CutSurvivesFloatRepresentationDrift) {
    // 0.1 * 30 is 3.0000000000000004 in binary; the cut must still be 3
    std::vector<ScoredCandidate> all;
    for (int i = 0; i < 30; ++i)
        all.push_back(scored("s" + std::to_string(i), "c" + std::to_string(i), 0.01 * i));
    EXPECT_EQ(select_faults(all, 0.1).size(), 3u);
    EXPECT_EQ(select_faults(all, 0.3).size(), 9u);
}

TEST(SelectFaults, TieBreaksBySmallestCandidateId) {
    const std::vector<ScoredCandidate> all = {
        scored("s1", "s1#b", 0.5),
        scored("s1", "s1#a", 0.5),
    };
    const auto selected = select_faults(all, 1.0);
    ASSERT_EQ(selected.size(), 1u);
    EXPECT_EQ(selected[0].candidate_id, "s1#a");
}

TEST(SelectFaults, NestingPropertyOverRandomSets) {
    std::mt19937_64 rng(2718);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<ScoredCandidate> all;
        const std::size_t sources = 2 + rng() % 40;
        for (std::size_t s = 0; s < sources; ++s) {
            const std::size_t cands = 1 + rng() % 5;
            for (std::size_t c = 0; c < cands; ++c)
                all.push_back(scored("s" + std::to_string(s),
                                     "s" + std::to_string(s) + "#" + std::to_string(c),
                                     static_cast<double>(rng() % 1000) / 100.0));
        }
        std::vector<std::vector<SelectedPair>> cuts;
        for (const double fraction : {0.1, 0.3, 0.5, 1.0}) cuts.push_back(select_faults(all, fraction));
        for (std::size_t i = 1; i < cuts.size(); ++i) {
            ASSERT_LE(cuts[i - 1].size(), cuts[i].size());
            for (std::size_t j = 0; j < cuts[i - 1].size(); ++j)
                EXPECT_EQ(cuts[i - 1][j], cuts[i][j]) << "selection is not a nested prefix";
        }
        // per-source uniqueness at the full cut
        std::set<std::string> seen;
        for (const auto& pair : cuts.back()) EXPECT_TRUE(seen.insert(pair.source_id).second);
    }
}

TEST(RandomSelect, DeterministicForFixedSeed) {
    std::vector<ScoredCandidate> all;
    for (int s = 0; s < 20; ++s)
        for (int c = 0; c < 3; ++c)
            all.push_back(scored("s" + std::to_string(s),
                                 "s" + std::to_string(s) + "#" + std::to_string(c), 0.5 * c));
    const auto a = random_select(all, 0.3, 99);
    const auto b = random_select(all, 0.3, 99);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.size(), 6u); // ceil(0.3 * 20)
}

TEST(RandomSelect, UniqueSources) {
    std::vector<ScoredCandidate> all;
    for (int s = 0; s < 10; ++s)
        for (int c = 0; c < 4; ++c)
            all.push_back(scored("s" + std::to_string(s),
                                 "s" + std::to_string(s) + "#" + std::to_string(c), 1.0));
    const auto selected = random_select(all, 1.0, 5);
    EXPECT_EQ(selected.size(), 10u);
    std::set<std::string> seen;
    for (const auto& pair : selected) EXPECT_TRUE(seen.insert(pair.source_id).second);
}

TEST(SelectClones, TwoClonesKeepBoth) {
    std::map<std::string, std::vector<CloneItem>> groups;
    groups["t"] = {{"c1", "abcd"}, {"c2", "abxy"}};
    const auto kept = select_clones(groups);
    EXPECT_EQ(kept.at("t").size(), 2u);
}

TEST(SelectClones, WorkedThreeCloneExample) {
    // mutual distances {2, 2, 8}: overall 4, rel_avgs {2, 5, 5}; the two
    // clones touching the 8-distance pair are kept. These distances break
    // the triangle inequality, so they are stubbed through the metric handle.
    std::map<std::string, std::vector<CloneItem>> groups;
    groups["t"] = {{"c1", "hub"}, {"c2", "left"}, {"c3", "right"}};
    const auto stub = [](const std::string& a, const std::string& b) -> double {
        if ((a == "left" && b == "right") || (a == "right" && b == "left")) return 8.0;
        return 2.0;
    };
    const auto kept = select_clones(groups, stub);
    ASSERT_EQ(kept.at("t").size(), 2u);
    EXPECT_EQ(kept.at("t")[0], "c2");
    EXPECT_EQ(kept.at("t")[1], "c3");
}

TEST(SelectClones, RealStringsEndToEnd) {
    std::map<std::string, std::vector<CloneItem>> groups;
    groups["t"] = {{"c1", "aabbccdd"}, {"c2", "aabbccxy"}, {"c3", "qqrrsstt"}};
    // real Levenshtein distances: d12 = 2, d13 = 8, d23 = 8
    // overall = 6; rel: c1 = 5, c2 = 5, c3 = 8 -> only c3 survives
    const auto kept = select_clones(groups);
    ASSERT_EQ(kept.at("t").size(), 1u);
    EXPECT_EQ(kept.at("t")[0], "c3");
}

TEST(SelectClones, IdenticalClonesAllKept) {
    std::map<std::string, std::vector<CloneItem>> groups;
    groups["t"] = {{"c1", "same"}, {"c2", "same"}, {"c3", "same"}};
    const auto kept = select_clones(groups);
    EXPECT_EQ(kept.at("t").size(), 3u); // 0 >= 0 keeps everything
}

TEST(SelectClones, MatchesBruteForceOracle) {
    std::mt19937_64 rng(505);
    const auto random_code = [&rng]() {
        static const std::string alphabet = "abcdef();= ";
        std::string s;
        const std::size_t len = 3 + rng() % 25;
        for (std::size_t i = 0; i < len; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
        return s;
    };
    for (int trial = 0; trial < 25; ++trial) {
        std::map<std::string, std::vector<CloneItem>> groups;
        const std::size_t g = 2 + rng() % 29; // up to 30
        for (std::size_t i = 0; i < g; ++i)
            groups["t"].push_back({"c" + std::to_string(i), random_code()});

        // oracle: recompute from the definition with independent loops
        const auto& clones = groups["t"];
        double overall = 0.0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < g; ++i)
            for (std::size_t j = i + 1; j < g; ++j) {
                overall += static_cast<double>(levenshtein(clones[i].code, clones[j].code));
                ++pairs;
            }
        overall /= static_cast<double>(pairs);
        std::vector<std::string> expected;
        for (std::size_t i = 0; i < g; ++i) {
            double rel = 0.0;
            for (std::size_t j = 0; j < g; ++j)
                if (i != j) rel += static_cast<double>(levenshtein(clones[i].code, clones[j].code));
            rel /= static_cast<double>(g - 1);
            if (rel >= overall) expected.push_back(clones[i].id);
        }

        EXPECT_EQ(select_clones(groups).at("t"), expected);
    }
}

TEST(SelectClones, GroupTooSmallThrows) {
    std::map<std::string, std::vector<CloneItem>> groups;
    groups["t"] = {{"c1", "solo"}};
    try {
        select_clones(groups);
        FAIL() << "expected GroupTooSmall";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::GroupTooSmall);
    }
}

TEST(AssembleDataset, EmptySelectionLeavesBaseUnchanged) {
    Corpus base;
    for (int i = 0; i < 4; ++i) {
        FunctionRecord rec;
        rec.id = "base-" + std::to_string(i);
        rec.project = "Lang";
        rec.code = "int f" + std::to_string(i) + "() { return " + std::to_string(i) + "; }";
        rec.label = Label::NonBuggy;
        base.records.push_back(rec);
    }
    const Corpus out = assemble_dataset(base, {}, "30pct");
    EXPECT_EQ(out.records, base.records);
}

TEST(AssembleDataset, PairsAddTwoRecordsEach) {
    Corpus base;
    for (int i = 0; i < 10; ++i) {
        FunctionRecord rec;
        rec.id = "base-" + std::to_string(i);
        rec.project = "Lang";
        rec.code = "int f" + std::to_string(i) + "() { return " + std::to_string(i) + "; }";
        rec.label = Label::NonBuggy;
        base.records.push_back(rec);
    }
    std::vector<GeneratedPair> pairs;
    for (int i = 0; i < 3; ++i) {
        FunctionRecord source;
        source.id = "src-" + std::to_string(i);
        source.project = "Lang";
        source.code = "int g" + std::to_string(i) + "() { return 10; }";
        source.label = Label::NonBuggy;
        pairs.push_back({source, candidate("src-" + std::to_string(i) + "#0", source.id,
                                           "int g" + std::to_string(i) + "() { return 11; }")});
    }
    const Corpus out = assemble_dataset(base, pairs, "all");
    EXPECT_EQ(out.size(), 16u); // 10 + 3 pairs * 2, nothing collides
    // generated records carry the provenance prefix and proper labels
    std::size_t generated_buggy = 0;
    for (const auto& rec : out.records) {
        if (rec.id.rfind("gen:", 0) == 0 && rec.label == Label::Buggy) {
            ++generated_buggy;
            ASSERT_TRUE(rec.fixed_code.has_value());
            EXPECT_NE(*rec.fixed_code, rec.code);
        }
    }
    EXPECT_EQ(generated_buggy, 3u);
}

TEST(AssembleDataset, DuplicateOfBaseRecordCollapses) {
    Corpus base;
    FunctionRecord rec;
    rec.id = "base-0";
    rec.project = "Lang";
    rec.code = "int shared() { return 1; }";
    rec.label = Label::NonBuggy;
    base.records.push_back(rec);
    FunctionRecord other;
    other.id = "base-1";
    other.project = "Lang";
    other.code = "int distinct() { return 2; }";
    other.label = Label::NonBuggy;
    base.records.push_back(other);

    FunctionRecord source = rec; // the generated pair's non-buggy half equals base-0's code
    source.id = "src-0";
    std::vector<GeneratedPair> pairs = {
        {source, candidate("src-0#0", "src-0", "int shared() { return 9; }")}};
    const Corpus out = assemble_dataset(base, pairs, "10pct");
    // base(2) + pair(2) = 4 pre-dedup; the duplicated non-buggy collapses to 3
    ASSERT_EQ(out.size(), 3u);
    EXPECT_EQ(out.records[0].id, "base-0");
}
