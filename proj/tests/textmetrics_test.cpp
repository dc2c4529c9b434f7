#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "faultsmith/textmetrics.hpp"

using faultsmith::LineChangeCounts;
using faultsmith::levenshtein;
using faultsmith::line_changes;

namespace {

// Independent full DP-table oracle, including its own UTF-8 decode, so it
// shares nothing with the implementation path it checks.
std::size_t levenshtein_oracle(const std::string& a, const std::string& b) {
    std::vector<char32_t> ua;
    std::vector<char32_t> ub;
    const auto decode = [](const std::string& s, std::vector<char32_t>& out) {
        std::size_t i = 0;
        while (i < s.size()) {
            const auto b0 = static_cast<unsigned char>(s[i]);
            int extra = 0;
            char32_t cp = b0;
            if (b0 >= 0xF0) { extra = 3; cp = b0 & 0x07; }
            else if (b0 >= 0xE0) { extra = 2; cp = b0 & 0x0F; }
            else if (b0 >= 0xC0) { extra = 1; cp = b0 & 0x1F; }
            for (int j = 0; j < extra && i + 1 < s.size(); ++j) {
                ++i;
                cp = (cp << 6) | (static_cast<unsigned char>(s[i]) & 0x3F);
            }
            out.push_back(cp);
            ++i;
        }
    };
    decode(a, ua);
    decode(b, ub);

    std::vector<std::vector<std::size_t>> dp(ua.size() + 1, std::vector<std::size_t>(ub.size() + 1));
    for (std::size_t i = 0; i <= ua.size(); ++i) dp[i][0] = i;
    for (std::size_t j = 0; j <= ub.size(); ++j) dp[0][j] = j;
    for (std::size_t i = 1; i <= ua.size(); ++i) {
        for (std::size_t j = 1; j <= ub.size(); ++j) {
            dp[i][j] = std::min({dp[i - 1][j] + 1, dp[i][j - 1] + 1,
                                 dp[i - 1][j - 1] + (ua[i - 1] == ub[j - 1] ? 0 : 1)});
        }
    }
    return dp[ua.size()][ub.size()];
}

std::string random_string(std::mt19937_64& rng, std::size_t max_len) {
    static const std::string alphabet = "abcxyz(){};<>=+- \n\t0189";
    const std::size_t len = rng() % (max_len + 1);
    std::string s;
    s.reserve(len);
    for (std::size_t i = 0; i < len; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
    return s;
}

} // namespace

TEST(Levenshtein, EqualStringsAreZero) {
    EXPECT_EQ(levenshtein("abc", "abc"), 0u);
    EXPECT_EQ(levenshtein("", ""), 0u);
}

TEST(Levenshtein, ClassicWorkedExample) {
    EXPECT_EQ(levenshtein("kitten", "sitting"), 3u);
    EXPECT_EQ(levenshtein_oracle("kitten", "sitting"), 3u);
}

TEST(Levenshtein, PureInsertion) {
    EXPECT_EQ(levenshtein("", "abcd"), 4u);
    EXPECT_EQ(levenshtein("abcd", ""), 4u);
}

TEST(Levenshtein, CountsUnicodeScalarsNotBytes) {
    // U+00E9 is two bytes but one scalar value
    EXPECT_EQ(levenshtein("h\xc3\xa9llo", "hello"), 1u);
    EXPECT_EQ(levenshtein("\xc3\xa9", ""), 1u);
}

TEST(Levenshtein, MatchesOracleOnRandomPairs) {
    std::mt19937_64 rng(20240901);
    for (int i = 0; i < 300; ++i) {
        const std::string a = random_string(rng, 40);
        const std::string b = random_string(rng, 40);
        EXPECT_EQ(levenshtein(a, b), levenshtein_oracle(a, b)) << "a=" << a << " b=" << b;
    }
}

TEST(Levenshtein, MetricAxiomsOnRandomTriples) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 300; ++i) {
        const std::string a = random_string(rng, 25);
        const std::string b = random_string(rng, 25);
        const std::string c = random_string(rng, 25);
        const auto ab = levenshtein(a, b);
        const auto ba = levenshtein(b, a);
        const auto bc = levenshtein(b, c);
        const auto ac = levenshtein(a, c);
        EXPECT_EQ(ab, ba);
        EXPECT_LE(ac, ab + bc);
        if (ab == 0) EXPECT_EQ(a, b);
    }
}

TEST(Levenshtein, LengthBounds) {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 200; ++i) {
        const std::string a = random_string(rng, 30);
        const std::string b = random_string(rng, 30);
        const auto d = levenshtein(a, b);
        const auto la = faultsmith::decode_utf8(a).size();
        const auto lb = faultsmith::decode_utf8(b).size();
        EXPECT_LE(d, std::max(la, lb));
        EXPECT_GE(d + std::min(la, lb), std::max(la, lb)); // d >= |la - lb|
    }
}

TEST(LineChanges, IdenticalTextsAreAllZero) {
    const std::string text = "int a = 1;\nint b = 2;\nreturn a + b;";
    EXPECT_EQ(line_changes(text, text), (LineChangeCounts{0, 0, 0}));
}

TEST(LineChanges, SingleReplacedLineIsOneModification) {
    const std::string before = "int a = 1;\nint b = 2;\nreturn a + b;";
    const std::string after = "int a = 1;\nint b = 3;\nreturn a + b;";
    EXPECT_EQ(line_changes(before, after), (LineChangeCounts{0, 0, 1}));
}

TEST(LineChanges, BlankTextToThreeLinesIsPureAddition) {
    EXPECT_EQ(line_changes("", "a\nb\nc"), (LineChangeCounts{3, 0, 0}));
    EXPECT_EQ(line_changes("   \n  ", "a\nb\nc"), (LineChangeCounts{3, 0, 0}));
}

TEST(LineChanges, PureRemoval) {
    EXPECT_EQ(line_changes("a\nb\nc", ""), (LineChangeCounts{0, 3, 0}));
}

TEST(LineChanges, UnbalancedHunkSplitsIntoModifiedPlusSurplus) {
    // one line becomes three: 1 paired modification + 2 additions
    const std::string before = "keep\nold\nkeep2";
    const std::string after = "keep\nnew1\nnew2\nnew3\nkeep2";
    EXPECT_EQ(line_changes(before, after), (LineChangeCounts{2, 0, 1}));
}

TEST(LineChanges, TrailingWhitespaceDoesNotCountAsChange) {
    EXPECT_EQ(line_changes("a;  \nb;", "a;\nb;   "), (LineChangeCounts{0, 0, 0}));
}

TEST(LineChanges, SwapSymmetryOnRandomTexts) {
    std::mt19937_64 rng(4242);
    const auto random_text = [&rng]() {
        static const char* pool[] = {"alpha;", "beta;", "gamma;", "{", "}", "if (x) {", "return 1;"};
        const std::size_t n = rng() % 9;
        std::string text;
        for (std::size_t i = 0; i < n; ++i) {
            text += pool[rng() % 7];
            text += '\n';
        }
        return text;
    };
    for (int i = 0; i < 500; ++i) {
        const std::string a = random_text();
        const std::string b = random_text();
        const LineChangeCounts ab = line_changes(a, b);
        const LineChangeCounts ba = line_changes(b, a);
        EXPECT_EQ(ab.added, ba.removed) << "a=[" << a << "] b=[" << b << "]";
        EXPECT_EQ(ab.removed, ba.added);
        EXPECT_EQ(ab.modified, ba.modified);
    }
}
