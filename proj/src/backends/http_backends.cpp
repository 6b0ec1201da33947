#include "backends/http_backends.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>

#include "util/digest.hpp"
#include "util/errors.hpp"

namespace agentloop {

HttpWire::HttpWire(HttpOptions options) : options_(std::move(options)) {
    if (options_.endpoint.empty()) throw ConfigError("http backend requires an endpoint");
    if (options_.attempts < 1) throw ConfigError("http attempts must be >= 1");
}

nlohmann::json HttpWire::post_json(const std::string& route, const nlohmann::json& body) {
    const std::string payload = body.dump();
    std::string last_error = "no attempt made";
    int backoff = options_.backoff_ms;
    for (int attempt = 0; attempt < options_.attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff *= 2;
        }
        httplib::Result res;
        {
            // httplib clients are not safe for concurrent requests.
            std::lock_guard<std::mutex> lock(mutex_);
            httplib::Client client(options_.endpoint);
            client.set_connection_timeout(0, options_.timeout_ms * 1000);
            client.set_read_timeout(0, options_.timeout_ms * 1000);
            client.set_write_timeout(0, options_.timeout_ms * 1000);
            res = client.Post(route, payload, "application/json");
        }
        if (!res) {
            last_error = "connection failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
        if (parsed.is_discarded()) {
            throw MalformedJudgeReply("backend returned non-JSON body for " + route);
        }
        return parsed;
    }
    throw BackendUnavailable("POST " + options_.endpoint + route + " failed after " +
                             std::to_string(options_.attempts) + " attempts: " + last_error);
}

HttpGenerator::HttpGenerator(std::string name, HttpOptions options, nlohmann::json params)
    : name_(std::move(name)), wire_(std::move(options)), params_(std::move(params)) {
    if (!params_.is_object()) params_ = nlohmann::json::object();
}

GeneratedImage HttpGenerator::generate_bytes(const std::string& prompt_text, uint64_t seed) {
    nlohmann::json body{{"prompt", prompt_text}, {"seed", seed}, {"params", params_}};
    nlohmann::json reply;
    try {
        reply = wire_.post_json("/v1/generate", body);
    } catch (const MalformedJudgeReply& e) {
        throw BackendUnavailable(e.what());
    }
    if (!reply.contains("image_b64") || !reply.at("image_b64").is_string()) {
        throw BackendUnavailable("generator reply lacks image_b64");
    }
    GeneratedImage out;
    out.bytes = base64_decode(reply.at("image_b64").get<std::string>());
    out.model = reply.value("model", "unknown");
    return out;
}

HttpJudge::HttpJudge(std::string name, HttpOptions options)
    : name_(std::move(name)), wire_(std::move(options)) {}

JudgePointResult HttpJudge::judge_point_bytes(const Query& query, const std::string& image_bytes,
                                              const std::vector<std::string>& hints) {
    nlohmann::json body{{"prompt", query.text},
                        {"image_b64", base64_encode(image_bytes)},
                        {"hints", hints}};
    nlohmann::json reply = wire_.post_json("/v1/judge/point", body);
    if (!reply.contains("pass") || !reply.at("pass").is_boolean()) {
        throw MalformedJudgeReply("point judge reply lacks a boolean pass field");
    }
    JudgePointResult result;
    result.pass = reply.at("pass").get<bool>();
    result.reasoning = reply.value("reasoning", "");
    if (reply.contains("deficiencies")) {
        for (const auto& d : reply.at("deficiencies")) {
            result.deficiencies.push_back(d.get<std::string>());
        }
    }
    return result;
}

PairChoice HttpJudge::judge_pair_presented(const std::string& first_bytes,
                                           const std::string& second_bytes) {
    nlohmann::json body{{"image_a_b64", base64_encode(first_bytes)},
                        {"image_b_b64", base64_encode(second_bytes)}};
    nlohmann::json reply = wire_.post_json("/v1/judge/pair", body);
    const std::string winner = reply.value("winner", "");
    if (winner == "a") return PairChoice::first;
    if (winner == "b") return PairChoice::second;
    throw MalformedJudgeReply("pair judge reply winner must be \"a\" or \"b\"");
}

HttpTeacher::HttpTeacher(std::string name, HttpOptions options)
    : name_(std::move(name)), wire_(std::move(options)) {}

std::string HttpTeacher::complete(const nlohmann::json& messages) {
    nlohmann::json body{{"messages", messages}};
    nlohmann::json reply;
    try {
        reply = wire_.post_json("/v1/teacher/complete", body);
    } catch (const BackendUnavailable& e) {
        throw TeacherUnavailable(e.what());
    } catch (const MalformedJudgeReply& e) {
        throw TeacherUnavailable(e.what());
    }
    if (!reply.contains("text") || !reply.at("text").is_string()) {
        throw TeacherUnavailable("teacher reply lacks a text field");
    }
    return reply.at("text").get<std::string>();
}

}  // namespace agentloop
