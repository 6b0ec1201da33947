#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <unordered_map>

#include "backends/backend.hpp"

namespace agentloop {

// JSONL session cache keyed by the SHA-256 of the canonicalized request
// body. Recording wrappers append on miss; replay backends require a hit.
class ReplayCache {
  public:
    // Loads existing entries when the file exists; appends in place.
    explicit ReplayCache(std::filesystem::path path);

    static std::string request_key(const nlohmann::json& body);

    std::optional<nlohmann::json> lookup(const std::string& key) const;
    void insert(const std::string& key, const std::string& route, const nlohmann::json& request,
                const nlohmann::json& response);
    size_t size() const;

  private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, nlohmann::json> entries_;
};

// Canonical request/response bodies shared by the wire protocol, the
// recorder, and replay.
namespace wire {
nlohmann::json generate_request(const std::string& prompt_text, uint64_t seed);
nlohmann::json point_request(const std::string& prompt_text, const std::string& image_bytes,
                             const std::vector<std::string>& hints);
nlohmann::json pair_request(const std::string& first_bytes, const std::string& second_bytes);
nlohmann::json teacher_request(const nlohmann::json& messages);
}  // namespace wire

class RecordingGenerator : public GeneratorBackend {
  public:
    RecordingGenerator(std::shared_ptr<GeneratorBackend> inner, std::shared_ptr<ReplayCache> cache)
        : inner_(std::move(inner)), cache_(std::move(cache)) {}
    std::string name() const override { return inner_->name(); }
    GeneratedImage generate_bytes(const std::string& prompt_text, uint64_t seed) override;

  private:
    std::shared_ptr<GeneratorBackend> inner_;
    std::shared_ptr<ReplayCache> cache_;
};

class ReplayGenerator : public GeneratorBackend {
  public:
    ReplayGenerator(std::string name, std::shared_ptr<ReplayCache> cache)
        : name_(std::move(name)), cache_(std::move(cache)) {}
    std::string name() const override { return name_; }
    GeneratedImage generate_bytes(const std::string& prompt_text, uint64_t seed) override;

  private:
    std::string name_;
    std::shared_ptr<ReplayCache> cache_;
};

class RecordingJudge : public JudgeBackend {
  public:
    RecordingJudge(std::shared_ptr<JudgeBackend> inner, std::shared_ptr<ReplayCache> cache)
        : inner_(std::move(inner)), cache_(std::move(cache)) {}
    std::string name() const override { return inner_->name(); }
    JudgePointResult judge_point_bytes(const Query& query, const std::string& image_bytes,
                                       const std::vector<std::string>& hints) override;
    PairChoice judge_pair_presented(const std::string& first_bytes,
                                    const std::string& second_bytes) override;

  private:
    std::shared_ptr<JudgeBackend> inner_;
    std::shared_ptr<ReplayCache> cache_;
};

class ReplayJudge : public JudgeBackend {
  public:
    ReplayJudge(std::string name, std::shared_ptr<ReplayCache> cache)
        : name_(std::move(name)), cache_(std::move(cache)) {}
    std::string name() const override { return name_; }
    JudgePointResult judge_point_bytes(const Query& query, const std::string& image_bytes,
                                       const std::vector<std::string>& hints) override;
    PairChoice judge_pair_presented(const std::string& first_bytes,
                                    const std::string& second_bytes) override;

  private:
    std::string name_;
    std::shared_ptr<ReplayCache> cache_;
};

class RecordingTeacher : public TeacherBackend {
  public:
    RecordingTeacher(std::shared_ptr<TeacherBackend> inner, std::shared_ptr<ReplayCache> cache)
        : inner_(std::move(inner)), cache_(std::move(cache)) {}
    std::string name() const override { return inner_->name(); }
    std::string complete(const nlohmann::json& messages) override;

  private:
    std::shared_ptr<TeacherBackend> inner_;
    std::shared_ptr<ReplayCache> cache_;
};

class ReplayTeacher : public TeacherBackend {
  public:
    ReplayTeacher(std::string name, std::shared_ptr<ReplayCache> cache)
        : name_(std::move(name)), cache_(std::move(cache)) {}
    std::string name() const override { return name_; }
    std::string complete(const nlohmann::json& messages) override;

  private:
    std::string name_;
    std::shared_ptr<ReplayCache> cache_;
};

}  // namespace agentloop
