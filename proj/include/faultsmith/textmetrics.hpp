#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace faultsmith {

struct LineChangeCounts {
    std::size_t added = 0;
    std::size_t removed = 0;
    std::size_t modified = 0;

    std::size_t total() const { return added + removed + modified; }

    bool operator==(const LineChangeCounts&) const = default;
};

/// Decodes UTF-8 into Unicode scalar values. Invalid bytes are kept as
/// one scalar each (0xDC00 + byte), so distances stay well defined on
/// arbitrary input instead of throwing mid-pipeline.
inline std::vector<char32_t> decode_utf8(std::string_view text) {
    std::vector<char32_t> out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const auto b0 = static_cast<unsigned char>(text[i]);
        std::size_t len = 1;
        char32_t cp = b0;
        if (b0 < 0x80) {
            len = 1;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        } else {
            out.push_back(0xDC00 + b0);
            ++i;
            continue;
        }
        if (len > 1) {
            if (i + len > text.size()) {
                out.push_back(0xDC00 + b0);
                ++i;
                continue;
            }
            bool ok = true;
            char32_t acc = cp;
            for (std::size_t j = 1; j < len; ++j) {
                const auto bj = static_cast<unsigned char>(text[i + j]);
                if ((bj & 0xC0) != 0x80) {
                    ok = false;
                    break;
                }
                acc = (acc << 6) | (bj & 0x3F);
            }
            if (!ok) {
                out.push_back(0xDC00 + b0);
                ++i;
                continue;
            }
            cp = acc;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

/// Levenshtein distance with unit insert/delete/substitute costs, computed
/// over Unicode scalar values rather than bytes.
inline std::size_t levenshtein(std::string_view a, std::string_view b) {
    const std::vector<char32_t> ua = decode_utf8(a);
    const std::vector<char32_t> ub = decode_utf8(b);
    const std::size_t n = ua.size();
    const std::size_t m = ub.size();
    if (n == 0) return m;
    if (m == 0) return n;

    std::vector<std::size_t> prev(m + 1);
    std::vector<std::size_t> cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t sub = prev[j - 1] + (ua[i - 1] == ub[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

namespace detail {

// Splits into lines, strips trailing whitespace per line, and drops trailing
// blank lines so an all-blank text counts as zero lines.
inline std::vector<std::string> diff_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
            line.remove_suffix(1);
        lines.emplace_back(line);
        if (end == text.size()) break;
        start = end + 1;
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

} // namespace detail

/// Counts added/removed/modified lines between two texts via an LCS line
/// diff. Within each hunk, removed and added runs are paired:
/// modified = min(removed_run, added_run), the surplus stays added/removed.
///
/// The backtrack tie-break is chosen so that swapping the inputs mirrors the
/// hunks exactly, giving line_changes(a,b).added == line_changes(b,a).removed.
inline LineChangeCounts line_changes(std::string_view before, std::string_view after) {
    const std::vector<std::string> a = detail::diff_lines(before);
    const std::vector<std::string> b = detail::diff_lines(after);
    const std::size_t n = a.size();
    const std::size_t m = b.size();

    std::vector<std::vector<std::uint32_t>> dp(n + 1, std::vector<std::uint32_t>(m + 1, 0));
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            if (a[i - 1] == b[j - 1])
                dp[i][j] = dp[i - 1][j - 1] + 1;
            else
                dp[i][j] = std::max(dp[i - 1][j], dp[i][j - 1]);
        }
    }

    LineChangeCounts counts;
    std::size_t run_removed = 0;
    std::size_t run_added = 0;
    const auto close_hunk = [&]() {
        const std::size_t paired = std::min(run_removed, run_added);
        counts.modified += paired;
        counts.removed += run_removed - paired;
        counts.added += run_added - paired;
        run_removed = 0;
        run_added = 0;
    };

    // Backtrack from the end; at a dp tie the choice must be antisymmetric
    // under input swap, otherwise the swap property breaks on ambiguous
    // alignments. Remaining lengths decide first, line content second.
    std::size_t i = n;
    std::size_t j = m;
    std::vector<int> ops; // 0 = common, 1 = removed, 2 = added; reversed order
    ops.reserve(n + m);
    while (i > 0 || j > 0) {
        if (i > 0 && j > 0 && a[i - 1] == b[j - 1]) {
            ops.push_back(0);
            --i;
            --j;
        } else if (j == 0) {
            ops.push_back(1);
            --i;
        } else if (i == 0) {
            ops.push_back(2);
            --j;
        } else if (dp[i - 1][j] != dp[i][j - 1]) {
            if (dp[i - 1][j] > dp[i][j - 1]) {
                ops.push_back(1);
                --i;
            } else {
                ops.push_back(2);
                --j;
            }
        } else if (i != j) {
            if (i > j) {
                ops.push_back(1);
                --i;
            } else {
                ops.push_back(2);
                --j;
            }
        } else if (a[i - 1] < b[j - 1]) {
            ops.push_back(1);
            --i;
        } else {
            ops.push_back(2);
            --j;
        }
    }

    for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
        switch (*it) {
            case 0: close_hunk(); break;
            case 1: ++run_removed; break;
            case 2: ++run_added; break;
        }
    }
    close_hunk();
    return counts;
}

} // namespace faultsmith
