#pragma once

#include <mutex>

#include "backends/backend.hpp"

namespace agentloop {

struct HttpOptions {
    std::string endpoint;  // scheme://host:port
    int timeout_ms = 5000;
    int attempts = 3;
    int backoff_ms = 250;  // doubles per retry
};

// Shared POST-JSON machinery with bounded retries and exponential backoff.
// Throws BackendUnavailable when the endpoint stays unreachable or keeps
// returning non-200 statuses.
class HttpWire {
  public:
    explicit HttpWire(HttpOptions options);
    nlohmann::json post_json(const std::string& route, const nlohmann::json& body);
    const HttpOptions& options() const { return options_; }

  private:
    HttpOptions options_;
    std::mutex mutex_;
};

// POST /v1/generate {prompt, seed, params} -> {image_b64, model}
class HttpGenerator : public GeneratorBackend {
  public:
    HttpGenerator(std::string name, HttpOptions options, nlohmann::json params);
    std::string name() const override { return name_; }
    GeneratedImage generate_bytes(const std::string& prompt_text, uint64_t seed) override;

  private:
    std::string name_;
    HttpWire wire_;
    nlohmann::json params_;
};

// POST /v1/judge/point {prompt, image_b64, hints} -> {pass, reasoning}
// POST /v1/judge/pair {image_a_b64, image_b_b64} -> {winner: "a"|"b"}
class HttpJudge : public JudgeBackend {
  public:
    HttpJudge(std::string name, HttpOptions options);
    std::string name() const override { return name_; }
    JudgePointResult judge_point_bytes(const Query& query, const std::string& image_bytes,
                                       const std::vector<std::string>& hints) override;
    PairChoice judge_pair_presented(const std::string& first_bytes,
                                    const std::string& second_bytes) override;

  private:
    std::string name_;
    HttpWire wire_;
};

// POST /v1/teacher/complete {messages} -> {text}
class HttpTeacher : public TeacherBackend {
  public:
    HttpTeacher(std::string name, HttpOptions options);
    std::string name() const override { return name_; }
    std::string complete(const nlohmann::json& messages) override;

  private:
    std::string name_;
    HttpWire wire_;
};

}  // namespace agentloop
