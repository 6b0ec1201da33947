#include "backends/replay.hpp"

#include <fstream>

#include "util/digest.hpp"
#include "util/errors.hpp"
#include "util/fsio.hpp"

namespace agentloop {

ReplayCache::ReplayCache(std::filesystem::path path) : path_(std::move(path)) {
    if (!std::filesystem::exists(path_)) return;
    for (const auto& line : read_lines(path_)) {
        nlohmann::json entry = nlohmann::json::parse(line);
        entries_[entry.at("key").get<std::string>()] = entry.at("response");
    }
}

std::string ReplayCache::request_key(const nlohmann::json& body) {
    return sha256_hex(body.dump());
}

std::optional<nlohmann::json> ReplayCache::lookup(const std::string& key) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ReplayCache::insert(const std::string& key, const std::string& route,
                         const nlohmann::json& request, const nlohmann::json& response) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (entries_.count(key)) return;
    entries_[key] = response;
    if (path_.has_parent_path()) ensure_directory(path_.parent_path());
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw IoError("cannot append to replay cache: " + path_.string());
    out << nlohmann::json{{"key", key}, {"route", route}, {"request", request}, {"response", response}}
               .dump()
        << "\n";
}

size_t ReplayCache::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
}

namespace wire {

nlohmann::json generate_request(const std::string& prompt_text, uint64_t seed) {
    return nlohmann::json{{"prompt", prompt_text}, {"seed", seed}, {"params", nlohmann::json::object()}};
}

nlohmann::json point_request(const std::string& prompt_text, const std::string& image_bytes,
                             const std::vector<std::string>& hints) {
    return nlohmann::json{{"prompt", prompt_text},
                          {"image_b64", base64_encode(image_bytes)},
                          {"hints", hints}};
}

nlohmann::json pair_request(const std::string& first_bytes, const std::string& second_bytes) {
    return nlohmann::json{{"image_a_b64", base64_encode(first_bytes)},
                          {"image_b_b64", base64_encode(second_bytes)}};
}

nlohmann::json teacher_request(const nlohmann::json& messages) {
    return nlohmann::json{{"messages", messages}};
}

}  // namespace wire

namespace {

std::string choice_name(PairChoice c) {
    switch (c) {
        case PairChoice::first: return "a";
        case PairChoice::second: return "b";
        default: return "tie";
    }
}

PairChoice choice_from(const std::string& s) {
    if (s == "a") return PairChoice::first;
    if (s == "b") return PairChoice::second;
    if (s == "tie") return PairChoice::tie;
    throw MalformedJudgeReply("replayed pair winner must be a, b, or tie");
}

JudgePointResult point_from(const nlohmann::json& response) {
    JudgePointResult result;
    result.pass = response.at("pass").get<bool>();
    result.reasoning = response.value("reasoning", "");
    if (response.contains("deficiencies")) {
        for (const auto& d : response.at("deficiencies")) {
            result.deficiencies.push_back(d.get<std::string>());
        }
    }
    return result;
}

nlohmann::json point_to_json(const JudgePointResult& result) {
    return nlohmann::json{{"pass", result.pass},
                          {"reasoning", result.reasoning},
                          {"deficiencies", result.deficiencies}};
}

}  // namespace

GeneratedImage RecordingGenerator::generate_bytes(const std::string& prompt_text, uint64_t seed) {
    const nlohmann::json request = wire::generate_request(prompt_text, seed);
    const std::string key = ReplayCache::request_key(request);
    if (auto cached = cache_->lookup(key)) {
        return {base64_decode(cached->at("image_b64").get<std::string>()),
                cached->value("model", "unknown")};
    }
    GeneratedImage out = inner_->generate_bytes(prompt_text, seed);
    cache_->insert(key, "/v1/generate",
                   request, nlohmann::json{{"image_b64", base64_encode(out.bytes)}, {"model", out.model}});
    return out;
}

GeneratedImage ReplayGenerator::generate_bytes(const std::string& prompt_text, uint64_t seed) {
    const nlohmann::json request = wire::generate_request(prompt_text, seed);
    auto cached = cache_->lookup(ReplayCache::request_key(request));
    if (!cached) throw ReplayMiss("no recorded generation for prompt: " + prompt_text);
    return {base64_decode(cached->at("image_b64").get<std::string>()),
            cached->value("model", "unknown")};
}

JudgePointResult RecordingJudge::judge_point_bytes(const Query& query, const std::string& image_bytes,
                                                   const std::vector<std::string>& hints) {
    const nlohmann::json request = wire::point_request(query.text, image_bytes, hints);
    const std::string key = ReplayCache::request_key(request);
    if (auto cached = cache_->lookup(key)) return point_from(*cached);
    JudgePointResult result = inner_->judge_point_bytes(query, image_bytes, hints);
    cache_->insert(key, "/v1/judge/point", request, point_to_json(result));
    return result;
}

PairChoice RecordingJudge::judge_pair_presented(const std::string& first_bytes,
                                                const std::string& second_bytes) {
    const nlohmann::json request = wire::pair_request(first_bytes, second_bytes);
    const std::string key = ReplayCache::request_key(request);
    if (auto cached = cache_->lookup(key)) {
        return choice_from(cached->at("winner").get<std::string>());
    }
    PairChoice choice = inner_->judge_pair_presented(first_bytes, second_bytes);
    cache_->insert(key, "/v1/judge/pair", request, nlohmann::json{{"winner", choice_name(choice)}});
    return choice;
}

JudgePointResult ReplayJudge::judge_point_bytes(const Query& query, const std::string& image_bytes,
                                                const std::vector<std::string>& hints) {
    const nlohmann::json request = wire::point_request(query.text, image_bytes, hints);
    auto cached = cache_->lookup(ReplayCache::request_key(request));
    if (!cached) throw ReplayMiss("no recorded point judgment for query: " + query.id);
    return point_from(*cached);
}

PairChoice ReplayJudge::judge_pair_presented(const std::string& first_bytes,
                                             const std::string& second_bytes) {
    const nlohmann::json request = wire::pair_request(first_bytes, second_bytes);
    auto cached = cache_->lookup(ReplayCache::request_key(request));
    if (!cached) throw ReplayMiss("no recorded pair judgment");
    return choice_from(cached->at("winner").get<std::string>());
}

std::string RecordingTeacher::complete(const nlohmann::json& messages) {
    const nlohmann::json request = wire::teacher_request(messages);
    const std::string key = ReplayCache::request_key(request);
    if (auto cached = cache_->lookup(key)) return cached->at("text").get<std::string>();
    std::string text = inner_->complete(messages);
    cache_->insert(key, "/v1/teacher/complete", request, nlohmann::json{{"text", text}});
    return text;
}

std::string ReplayTeacher::complete(const nlohmann::json& messages) {
    const nlohmann::json request = wire::teacher_request(messages);
    auto cached = cache_->lookup(ReplayCache::request_key(request));
    if (!cached) throw ReplayMiss("no recorded teacher completion");
    return cached->at("text").get<std::string>();
}

}  // namespace agentloop
