#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "faultsmith/corpus.hpp"
#include "faultsmith/errors.hpp"
#include "faultsmith/promptgen.hpp"

namespace faultsmith {

enum class Verdict { TestFail, TestPass, Timeout, Other };

inline std::string to_string(Verdict verdict) {
    switch (verdict) {
        case Verdict::TestFail: return "test_fail";
        case Verdict::TestPass: return "test_pass";
        case Verdict::Timeout: return "timeout";
        case Verdict::Other: return "other";
    }
    return "other";
}

inline std::optional<Verdict> parse_verdict(std::string_view s) {
    if (s == "test_fail") return Verdict::TestFail;
    if (s == "test_pass") return Verdict::TestPass;
    if (s == "timeout") return Verdict::Timeout;
    if (s == "other") return Verdict::Other;
    return std::nullopt;
}

struct ValidationOutcome {
    std::string candidate_id;
    Verdict verdict = Verdict::Other;
    double wall_time_s = 0.0;
    std::optional<int> exit_code; // absent when the process was killed
    std::string log_excerpt;
};

inline nlohmann::json to_json(const ValidationOutcome& outcome) {
    nlohmann::json obj{
        {"candidate_id", outcome.candidate_id},
        {"verdict", to_string(outcome.verdict)},
        {"wall_time_s", outcome.wall_time_s},
        {"log_excerpt", outcome.log_excerpt},
    };
    if (outcome.exit_code)
        obj["exit_code"] = *outcome.exit_code;
    else
        obj["exit_code"] = nullptr;
    return obj;
}

struct ValidatorConfig {
    double timeout_s = 180.0;
    std::string fail_markers = "FAIL|AssertionError|Tests run.*Failures: [1-9]";
    std::size_t workers = 0; // 0 = hardware concurrency
    std::size_t log_excerpt_limit = 4096;
};

struct ValidationJob {
    std::string candidate_id;
    std::string code;
    std::string test_cmd; // template with {code_file} and optional {workdir}
    Language language = Language::Other;
};

namespace detail {

inline std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (const char c : s) {
        if (c == '\'')
            out += "'\\''";
        else
            out += c;
    }
    out += "'";
    return out;
}

inline std::string sanitize_for_path(std::string_view id) {
    std::string out;
    out.reserve(id.size());
    for (const char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                        c == '_' || c == '-' || c == '.';
        out.push_back(ok ? c : '_');
    }
    return out;
}

inline std::string code_file_extension(Language lang) {
    switch (lang) {
        case Language::Java: return ".java";
        case Language::Cpp: return ".cpp";
        case Language::Other: return ".txt";
    }
    return ".txt";
}

struct SubprocessResult {
    std::optional<int> exit_code;
    bool timed_out = false;
    double wall_time_s = 0.0;
    std::string output;
};

/// Runs `sh -c command` in its own process group, capturing combined
/// stdout/stderr. On deadline the whole group gets SIGKILL and the child is
/// reaped, so nothing outlives the budget.
inline SubprocessResult run_with_timeout(const std::string& command, double timeout_s,
                                         std::size_t output_limit) {
    int pipefd[2];
    if (::pipe(pipefd) != 0)
        throw Error(ErrorCode::SandboxSetupFailure, "pipe: " + std::string(std::strerror(errno)));

    const auto start = std::chrono::steady_clock::now();
    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(pipefd[0]);
        ::close(pipefd[1]);
        throw Error(ErrorCode::SandboxSetupFailure, "fork: " + std::string(std::strerror(errno)));
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(pipefd[1], STDOUT_FILENO);
        ::dup2(pipefd[1], STDERR_FILENO);
        ::close(pipefd[0]);
        ::close(pipefd[1]);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }

    ::close(pipefd[1]);
    ::fcntl(pipefd[0], F_SETFL, O_NONBLOCK);

    SubprocessResult result;
    const auto deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                      std::chrono::duration<double>(timeout_s));
    bool reaped = false;
    int status = 0;
    char buffer[4096];

    const auto drain = [&]() {
        while (true) {
            const ssize_t got = ::read(pipefd[0], buffer, sizeof(buffer));
            if (got <= 0) break;
            if (result.output.size() < output_limit)
                result.output.append(buffer, buffer + std::min<std::size_t>(
                                                          static_cast<std::size_t>(got),
                                                          output_limit - result.output.size()));
        }
    };

    while (std::chrono::steady_clock::now() < deadline) {
        const pid_t done = ::waitpid(pid, &status, WNOHANG);
        if (done == pid) {
            reaped = true;
            break;
        }
        struct pollfd pfd{pipefd[0], POLLIN, 0};
        ::poll(&pfd, 1, 50);
        drain();
    }

    if (!reaped) {
        ::kill(-pid, SIGKILL);
        ::kill(pid, SIGKILL); // in case setpgid lost the race
        while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
        }
        result.timed_out = true;
    } else {
        ::kill(-pid, SIGKILL); // reap stragglers the test script left behind
    }
    drain();
    ::close(pipefd[0]);

    result.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!result.timed_out && WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
    return result;
}

} // namespace detail

/// Writes the candidate to a fresh file under `workdir`, substitutes it into
/// the command template, runs the suite under the wall-clock budget, and
/// classifies the outcome:
///   exit 0                         -> TestPass
///   budget exceeded                -> Timeout (process tree killed)
///   nonzero exit + failure marker  -> TestFail
///   anything else                  -> Other (compile errors, crashes, ...)
inline ValidationOutcome validate(const ValidationJob& job, const ValidatorConfig& cfg,
                                  const std::filesystem::path& workdir) {
    if (job.test_cmd.find("{code_file}") == std::string::npos)
        throw Error(ErrorCode::BadTemplate, "test_cmd lacks the {code_file} placeholder");

    std::error_code ec;
    const std::filesystem::path sandbox = workdir / detail::sanitize_for_path(job.candidate_id);
    std::filesystem::remove_all(sandbox, ec);
    std::filesystem::create_directories(sandbox, ec);
    if (ec)
        throw Error(ErrorCode::SandboxSetupFailure, "cannot create " + sandbox.string());

    const std::filesystem::path code_file =
        sandbox / ("candidate" + detail::code_file_extension(job.language));
    {
        std::ofstream out(code_file, std::ios::binary);
        if (!out)
            throw Error(ErrorCode::SandboxSetupFailure, "cannot write " + code_file.string());
        out << job.code;
    }

    std::string command = job.test_cmd;
    const auto substitute = [&command](const std::string& placeholder, const std::string& value) {
        std::size_t at = 0;
        while ((at = command.find(placeholder, at)) != std::string::npos) {
            command.replace(at, placeholder.size(), value);
            at += value.size();
        }
    };
    substitute("{code_file}", detail::shell_quote(std::filesystem::absolute(code_file).string()));
    substitute("{workdir}", detail::shell_quote(std::filesystem::absolute(sandbox).string()));

    const auto run = detail::run_with_timeout(command, cfg.timeout_s, cfg.log_excerpt_limit);

    ValidationOutcome outcome;
    outcome.candidate_id = job.candidate_id;
    outcome.wall_time_s = run.wall_time_s;
    outcome.exit_code = run.exit_code;
    outcome.log_excerpt = run.output;

    if (run.timed_out || run.wall_time_s >= cfg.timeout_s) {
        outcome.verdict = Verdict::Timeout;
    } else if (run.exit_code && *run.exit_code == 0) {
        outcome.verdict = Verdict::TestPass;
    } else {
        const std::regex fail_re(cfg.fail_markers);
        outcome.verdict = std::regex_search(run.output, fail_re) ? Verdict::TestFail : Verdict::Other;
    }
    return outcome;
}

/// Runs jobs on a bounded worker pool; each worker owns its sandbox slot and
/// results come back sorted by candidate_id regardless of completion order.
inline std::vector<ValidationOutcome> validate_all(const std::vector<ValidationJob>& jobs,
                                                   const ValidatorConfig& cfg,
                                                   const std::filesystem::path& workdir) {
    std::size_t workers = cfg.workers != 0 ? cfg.workers : std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    workers = std::min(workers, jobs.size() == 0 ? std::size_t{1} : jobs.size());

    std::vector<ValidationOutcome> outcomes(jobs.size());
    std::vector<std::string> failures(jobs.size());
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            try {
                outcomes[i] = validate(jobs[i], cfg, workdir);
            } catch (const std::exception& e) {
                failures[i] = e.what();
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
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (!failures[i].empty())
            throw Error(ErrorCode::SandboxSetupFailure,
                        jobs[i].candidate_id + ": " + failures[i]);
    }

    std::sort(outcomes.begin(), outcomes.end(),
              [](const ValidationOutcome& a, const ValidationOutcome& b) {
                  return a.candidate_id < b.candidate_id;
              });
    return outcomes;
}

/// Applies the per-task keep rule: fault candidates must fail their tests,
/// clone candidates must pass them. Order is preserved.
inline std::vector<std::string> filter_by_task(const std::vector<ValidationOutcome>& outcomes,
                                               PromptKind kind) {
    const Verdict keep = kind == PromptKind::FaultGen ? Verdict::TestFail : Verdict::TestPass;
    std::vector<std::string> ids;
    for (const auto& outcome : outcomes)
        if (outcome.verdict == keep) ids.push_back(outcome.candidate_id);
    return ids;
}

} // namespace faultsmith
