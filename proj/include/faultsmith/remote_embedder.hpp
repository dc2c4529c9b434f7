#pragma once

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "faultsmith/embedding.hpp"
#include "faultsmith/errors.hpp"

namespace faultsmith {

struct RemoteEmbedderConfig {
    std::string endpoint; // scheme://host:port
    std::string path = "/embed";
    std::string api_key;
    int timeout_s = 30;
    int max_retries = 3;
    int backoff_ms = 250;
};

/// HTTP-backed embedder: POST {"input": "<code>"} -> {"embedding": [floats]}.
/// Stands in for a real code-embedding model service; the first response
/// pins the dimension and later mismatches are rejected.
class RemoteEmbedder final : public Embedder {
public:
    explicit RemoteEmbedder(RemoteEmbedderConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.endpoint.empty())
            throw Error(ErrorCode::BadConfig, "remote embedder requires an endpoint");
        if (cfg_.api_key.empty()) {
            if (const char* key = std::getenv("FAULTSMITH_API_KEY")) cfg_.api_key = key;
        }
    }

    EmbeddingVector embed(std::string_view code) override {
        const std::string payload = nlohmann::json{{"input", std::string(code)}}.dump();
        std::string last_error = "no attempt made";
        for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
            if (attempt > 0)
                std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.backoff_ms << (attempt - 1)));
            httplib::Client client(cfg_.endpoint);
            client.set_connection_timeout(cfg_.timeout_s, 0);
            client.set_read_timeout(cfg_.timeout_s, 0);
            httplib::Headers headers;
            if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

            auto res = client.Post(cfg_.path, headers, payload, "application/json");
            if (!res) {
                last_error = "transport: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 429 || res->status >= 500) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200)
                throw Error(ErrorCode::RemoteUnavailable, "unexpected HTTP " + std::to_string(res->status));

            const nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
            if (reply.is_discarded() || !reply.contains("embedding") || !reply["embedding"].is_array())
                throw Error(ErrorCode::ResponseMalformed, "response has no embedding array");
            EmbeddingVector vec;
            vec.source = EmbeddingSource::Remote;
            vec.values.reserve(reply["embedding"].size());
            for (const auto& v : reply["embedding"]) {
                if (!v.is_number())
                    throw Error(ErrorCode::ResponseMalformed, "embedding entry is not a number");
                vec.values.push_back(v.get<double>());
            }
            if (dim_ == 0) dim_ = vec.dim();
            if (vec.dim() != dim_)
                throw Error(ErrorCode::DimensionMismatch,
                            "service returned dimension " + std::to_string(vec.dim()) +
                                " after pinning " + std::to_string(dim_));
            return vec;
        }
        throw Error(ErrorCode::RemoteUnavailable,
                    cfg_.endpoint + " unavailable after retries (" + last_error + ")");
    }

    std::size_t dim() const override { return dim_; }

private:
    RemoteEmbedderConfig cfg_;
    std::size_t dim_ = 0;
};

} // namespace faultsmith
