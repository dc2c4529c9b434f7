#include <gtest/gtest.h>

#include <atomic>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "faultsmith/llmclient.hpp"

using namespace faultsmith;

namespace {

FunctionRecord non_buggy(const std::string& id, const std::string& code) {
    FunctionRecord rec;
    rec.id = id;
    rec.project = "Lang";
    rec.code = code;
    rec.label = Label::NonBuggy;
    rec.language = Language::Java;
    return rec;
}

PromptSpec fault_prompt(const std::string& query_id) {
    PromptSpec prompt;
    prompt.kind = PromptKind::FaultGen;
    prompt.text = "// Inject a bug for the non-buggy function\n";
    prompt.query_id = query_id;
    return prompt;
}

// Stub chat-completions server whose behavior is driven per test.
class StubServer {
public:
    explicit StubServer(httplib::Server::Handler handler) {
        server_.Post("/v1/chat/completions", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this]() { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }
    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

std::string chat_body(const std::string& content) {
    return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}
        .dump();
}

} // namespace

TEST(ExtractCode, SingleFence) {
    EXPECT_EQ(extract_code("```java\nint x;\n```"), "int x;");
}

TEST(ExtractCode, TrailingProseAfterFenceIgnored) {
    const std::string raw = "Here you go:\n```\nint y = 2;\nint z = 3;\n```\nHope that helps!";
    EXPECT_EQ(extract_code(raw), "int y = 2;\nint z = 3;");
}

TEST(ExtractCode, IndicatorFallback) {
    const std::string raw = "// Buggy Function\nint broken() { return 0; }";
    EXPECT_EQ(extract_code(raw, Language::Java), "int broken() { return 0; }");
    // everything after the LAST indicator
    const std::string two = "// Buggy Function\nold\n// Buggy Function\nnew body";
    EXPECT_EQ(extract_code(two, Language::Java), "new body");
}

TEST(ExtractCode, PlainTextFallsBackToTrimmedRaw) {
    EXPECT_EQ(extract_code("  int a = 1;\n "), "int a = 1;");
    EXPECT_EQ(extract_code(""), "");
}

TEST(MockMutate, RelationalFlipWorkedExample) {
    // a function whose only mutation sites are the single `<` comparison
    const auto fn = non_buggy("f", "bool lt(u a, u b) { ret a < b; }");
    bool saw_flip = false;
    for (std::size_t i = 0; i < 20 && !saw_flip; ++i) {
        const auto mutated = mock_mutate_one(fn, 3, i);
        if (mutated && mutated->find("a <= b") != std::string::npos) saw_flip = true;
    }
    EXPECT_TRUE(saw_flip);
}

TEST(MockMutate, DeterministicForFixedSeed) {
    const auto fn = non_buggy("f", "int f(int a, int b) {\n  if (a > b) {\n    return a - b;\n  }\n  return b + 1;\n}");
    const auto a = mock_mutate(fn, 5, 42);
    const auto b = mock_mutate(fn, 5, 42);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].candidate_id, b[i].candidate_id);
        EXPECT_EQ(a[i].code, b[i].code);
    }
}

TEST(MockMutate, OutputsDifferFromSource) {
    const auto fn = non_buggy("f", "int f(int a) {\n  int t = a + 2;\n  if (t > 10) {\n    return t - 1;\n  }\n  return 0;\n}");
    for (const auto& cand : mock_mutate(fn, 10, 7)) {
        EXPECT_NE(fingerprint_normalize(cand.code), fingerprint_normalize(fn.code));
        EXPECT_EQ(cand.raw, cand.code);
        EXPECT_EQ(cand.source_id, "f");
    }
}

TEST(MockMutate, NoMutableSiteThrows) {
    const auto fn = non_buggy("f", "hello world");
    try {
        mock_mutate(fn, 3, 1);
        FAIL() << "expected NoMutableSite";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoMutableSite);
    }
}

TEST(MockMutate, BuggySourceRejected) {
    FunctionRecord fn = non_buggy("f", "int f() { return 1; }");
    fn.label = Label::Buggy;
    fn.fixed_code = "int f() { return 2; }";
    try {
        mock_mutate(fn, 1, 1);
        FAIL() << "expected QueryIsBuggy";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::QueryIsBuggy);
    }
}

TEST(SamplingConfig, InvariantsEnforced) {
    SamplingConfig cfg;
    cfg.model = "m";
    cfg.top_p = 0.0;
    EXPECT_THROW(cfg.validate(), Error);
    cfg.top_p = 0.95;
    cfg.temperature = -1.0;
    EXPECT_THROW(cfg.validate(), Error);
    cfg.temperature = 1.0;
    cfg.n_samples = 0;
    EXPECT_THROW(cfg.validate(), Error);
    cfg.n_samples = 10;
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_DOUBLE_EQ(cfg.top_p, 0.95);
    EXPECT_DOUBLE_EQ(cfg.temperature, 1.0);
}

TEST(Generate, MockIsByteIdenticalAcrossRuns) {
    std::map<std::string, FunctionRecord> sources;
    sources["q"] = non_buggy("q", "int f(int a) {\n  if (a > 0) {\n    return a - 1;\n  }\n  return 0;\n}");
    MockGenerator gen_a(sources, 42);
    MockGenerator gen_b(sources, 42);
    SamplingConfig cfg;
    cfg.model = "mock";
    cfg.n_samples = 10;

    const auto a = generate(fault_prompt("q"), cfg, gen_a, Language::Java, 4);
    const auto b = generate(fault_prompt("q"), cfg, gen_b, Language::Java, 1);
    ASSERT_EQ(a.candidates.size(), b.candidates.size());
    for (std::size_t i = 0; i < a.candidates.size(); ++i) {
        EXPECT_EQ(a.candidates[i].candidate_id, b.candidates[i].candidate_id);
        EXPECT_EQ(a.candidates[i].code, b.candidates[i].code);
        EXPECT_EQ(a.candidates[i].sample_index, b.candidates[i].sample_index);
    }
    EXPECT_EQ(a.audit.size(), 10u);
}

TEST(Generate, EchoStubYieldsOneCandidate) {
    StubServer server([](const httplib::Request&, httplib::Response& res) {
        res.set_content(chat_body("```java\nint injected = 1;\n```"), "application/json");
    });
    RemoteGeneratorConfig rcfg;
    rcfg.endpoint = server.endpoint();
    rcfg.max_retries = 0;
    RemoteGenerator gen(rcfg);
    SamplingConfig cfg;
    cfg.model = "test-model";
    cfg.n_samples = 1;
    cfg.timeout_s = 5;

    const auto result = generate(fault_prompt("q"), cfg, gen, Language::Java, 1);
    ASSERT_EQ(result.candidates.size(), 1u);
    EXPECT_EQ(result.candidates[0].code, "int injected = 1;");
    EXPECT_NE(result.candidates[0].raw.find("```"), std::string::npos);
    EXPECT_TRUE(result.failures.empty());
}

TEST(Generate, RequestCarriesSamplingSettings) {
    nlohmann::json seen;
    std::mutex mu;
    StubServer server([&](const httplib::Request& req, httplib::Response& res) {
        {
            std::lock_guard<std::mutex> lock(mu);
            seen = nlohmann::json::parse(req.body);
        }
        res.set_content(chat_body("x = 1;"), "application/json");
    });
    RemoteGeneratorConfig rcfg;
    rcfg.endpoint = server.endpoint();
    RemoteGenerator gen(rcfg);
    SamplingConfig cfg;
    cfg.model = "code-model-7b";
    cfg.n_samples = 1;
    cfg.max_tokens = 512;
    cfg.timeout_s = 5;

    generate(fault_prompt("q"), cfg, gen, Language::Java, 1);
    EXPECT_EQ(seen["model"], "code-model-7b");
    EXPECT_DOUBLE_EQ(seen["temperature"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(seen["top_p"].get<double>(), 0.95);
    EXPECT_EQ(seen["n"], 1);
    EXPECT_EQ(seen["max_tokens"], 512);
    EXPECT_EQ(seen["messages"][0]["role"], "user");
}

TEST(Generate, PartialFailuresAreRecordedNotFabricated) {
    std::atomic<int> arrivals{0};
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
        const int n = ++arrivals;
        if (n == 3 || n == 7) {
            res.status = 500;
            return;
        }
        res.set_content(chat_body("int ok = " + std::to_string(n) + ";"), "application/json");
    });
    RemoteGeneratorConfig rcfg;
    rcfg.endpoint = server.endpoint();
    rcfg.max_retries = 0; // make each arrival a final answer
    RemoteGenerator gen(rcfg);
    SamplingConfig cfg;
    cfg.model = "m";
    cfg.n_samples = 10;
    cfg.timeout_s = 5;

    const auto result = generate(fault_prompt("q"), cfg, gen, Language::Java, 1);
    EXPECT_EQ(result.candidates.size(), 8u);
    EXPECT_EQ(result.failures.size(), 2u);
    EXPECT_EQ(result.audit.size(), 10u);
}

TEST(Generate, RetriesRecoverTransientFailures) {
    std::atomic<int> arrivals{0};
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
        if (++arrivals <= 2) {
            res.status = 503;
            return;
        }
        res.set_content(chat_body("int ok;"), "application/json");
    });
    RemoteGeneratorConfig rcfg;
    rcfg.endpoint = server.endpoint();
    rcfg.max_retries = 3;
    rcfg.backoff_ms = 5;
    RemoteGenerator gen(rcfg);
    SamplingConfig cfg;
    cfg.model = "m";
    cfg.n_samples = 1;
    cfg.timeout_s = 5;

    const auto result = generate(fault_prompt("q"), cfg, gen, Language::Java, 1);
    EXPECT_EQ(result.candidates.size(), 1u);
    EXPECT_EQ(arrivals.load(), 3);
}

TEST(Generate, AuthFailureSurfaces) {
    StubServer server([](const httplib::Request&, httplib::Response& res) { res.status = 401; });
    RemoteGeneratorConfig rcfg;
    rcfg.endpoint = server.endpoint();
    rcfg.max_retries = 2;
    rcfg.backoff_ms = 5;
    RemoteGenerator gen(rcfg);
    SamplingConfig cfg;
    cfg.model = "m";
    cfg.n_samples = 1;
    cfg.timeout_s = 5;

    try {
        generate(fault_prompt("q"), cfg, gen, Language::Java, 1);
        FAIL() << "expected a throw when every sample fails";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EndpointUnavailable);
        EXPECT_NE(std::string(e.what()).find("AuthFailure"), std::string::npos);
    }
}

TEST(Generate, MalformedResponseIsAFailure) {
    StubServer server([](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"unexpected\": true}", "application/json");
    });
    RemoteGeneratorConfig rcfg;
    rcfg.endpoint = server.endpoint();
    rcfg.max_retries = 0;
    RemoteGenerator gen(rcfg);
    SamplingConfig cfg;
    cfg.model = "m";
    cfg.n_samples = 1;
    cfg.timeout_s = 5;

    EXPECT_THROW(generate(fault_prompt("q"), cfg, gen, Language::Java, 1), Error);
}

TEST(Generate, UnreachableEndpointBoundedByRetries) {
    RemoteGeneratorConfig rcfg;
    rcfg.endpoint = "http://127.0.0.1:1"; // nothing listens there
    rcfg.max_retries = 1;
    rcfg.backoff_ms = 5;
    RemoteGenerator gen(rcfg);
    SamplingConfig cfg;
    cfg.model = "m";
    cfg.n_samples = 1;
    cfg.timeout_s = 1;

    try {
        generate(fault_prompt("q"), cfg, gen, Language::Java, 1);
        FAIL() << "expected EndpointUnavailable";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EndpointUnavailable);
    }
}

TEST(Generate, CandidatesSortedBySampleIndex) {
    std::map<std::string, FunctionRecord> sources;
    sources["q"] = non_buggy("q", "int f(int a) {\n  if (a > 0) {\n    return a - 1;\n  }\n  return 0;\n}");
    MockGenerator gen(sources, 11);
    SamplingConfig cfg;
    cfg.model = "mock";
    cfg.n_samples = 8;
    const auto result = generate(fault_prompt("q"), cfg, gen, Language::Java, 8);
    for (std::size_t i = 1; i < result.candidates.size(); ++i)
        EXPECT_LT(result.candidates[i - 1].sample_index, result.candidates[i].sample_index);
}
