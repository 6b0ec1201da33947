#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "agent/types.hpp"
#include "util/rng.hpp"

namespace agentloop {

// Content-addressed image bytes, keyed by lowercase hex SHA-256.
// Thread-safe.
class ImageStore {
  public:
    std::string put(std::string bytes);
    std::string get(const std::string& digest) const;
    bool contains(const std::string& digest) const;
    size_t size() const;

  private:
    mutable std::mutex mutex_;
    std::unordered_map<std::string, std::string> blobs_;
};

struct GeneratedImage {
    std::string bytes;
    std::string model;
};

class GeneratorBackend {
  public:
    virtual ~GeneratorBackend() = default;
    virtual std::string name() const = 0;
    virtual GeneratedImage generate_bytes(const std::string& prompt_text, uint64_t seed) = 0;
};

struct JudgePointResult {
    bool pass = false;
    std::string reasoning;
    // Unmet constraint tokens, when the judge can name them.
    std::vector<std::string> deficiencies;
};

// Raw pair verdict in *presented* order. Backends that cannot express a tie
// (the HTTP wire) never return it.
enum class PairChoice { first, second, tie };

class JudgeBackend {
  public:
    virtual ~JudgeBackend() = default;
    virtual std::string name() const = 0;
    virtual JudgePointResult judge_point_bytes(const Query& query, const std::string& image_bytes,
                                               const std::vector<std::string>& hints) = 0;
    virtual PairChoice judge_pair_presented(const std::string& first_bytes,
                                            const std::string& second_bytes) = 0;
};

class TeacherBackend {
  public:
    virtual ~TeacherBackend() = default;
    virtual std::string name() const = 0;
    virtual std::string complete(const nlohmann::json& messages) = 0;
};

// Runs the generator, stores the bytes, and returns the content-addressed
// reference for the given round.
ImageRef generate(GeneratorBackend& backend, ImageStore& store, const RefinedPrompt& prompt,
                  uint64_t seed);

// Pointwise judgment of a stored image. MalformedJudgeReply from the backend
// maps to a conservative fail; BackendUnavailable propagates.
JudgePointResult judge_point(JudgeBackend& backend, const ImageStore& store, const Query& query,
                             const ImageRef& image, const std::vector<std::string>& criteria_hints);

struct JudgePairResult {
    enum class Winner { first, second };
    enum class Order { as_given, swapped };
    Winner winner = Winner::first;   // trajectory order: first = earlier image
    Order presented_order = Order::as_given;
};

// Shuffles presentation order uniformly, asks the backend, and maps the
// verdict back to trajectory order. Ties are not improvements: they resolve
// to the earlier image deterministically. MalformedJudgeReply maps to
// earlier-wins.
JudgePairResult judge_pair(JudgeBackend& backend, const ImageStore& store, const ImageRef& earlier,
                           const ImageRef& later, Rng& rng);

}  // namespace agentloop
