#include "backends/backend.hpp"

#include <iostream>

#include "util/digest.hpp"
#include "util/errors.hpp"

namespace agentloop {

std::string ImageStore::put(std::string bytes) {
    std::string digest = sha256_hex(bytes);
    std::lock_guard<std::mutex> lock(mutex_);
    blobs_.emplace(digest, std::move(bytes));
    return digest;
}

std::string ImageStore::get(const std::string& digest) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = blobs_.find(digest);
    if (it == blobs_.end()) throw Error("image not found in store: " + digest);
    return it->second;
}

bool ImageStore::contains(const std::string& digest) const {
    std::lock_guard<std::mutex> lock(mutex_);
    return blobs_.find(digest) != blobs_.end();
}

size_t ImageStore::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return blobs_.size();
}

ImageRef generate(GeneratorBackend& backend, ImageStore& store, const RefinedPrompt& prompt,
                  uint64_t seed) {
    if (!prompt.well_formed) throw Error("generate requires a well-formed prompt");
    GeneratedImage img = backend.generate_bytes(prompt.text, seed);
    ImageRef ref;
    ref.handle = store.put(std::move(img.bytes));
    ref.round = prompt.round;
    ref.meta["backend"] = backend.name();
    ref.meta["model"] = img.model;
    ref.meta["seed"] = std::to_string(seed);
    return ref;
}

JudgePointResult judge_point(JudgeBackend& backend, const ImageStore& store, const Query& query,
                             const ImageRef& image, const std::vector<std::string>& criteria_hints) {
    const std::vector<std::string>& hints =
        criteria_hints.empty() ? query.effective_hints() : criteria_hints;
    try {
        return backend.judge_point_bytes(query, store.get(image.handle), hints);
    } catch (const MalformedJudgeReply& e) {
        std::cerr << "[agentloop] malformed judge reply treated as fail: " << e.what() << "\n";
        JudgePointResult fail;
        fail.pass = false;
        fail.reasoning = "judge reply unparseable";
        fail.deficiencies = {"judge reply unparseable"};
        return fail;
    }
}

JudgePairResult judge_pair(JudgeBackend& backend, const ImageStore& store, const ImageRef& earlier,
                           const ImageRef& later, Rng& rng) {
    JudgePairResult result;
    const bool swapped = rng.bernoulli(0.5);
    result.presented_order = swapped ? JudgePairResult::Order::swapped : JudgePairResult::Order::as_given;
    const std::string earlier_bytes = store.get(earlier.handle);
    const std::string later_bytes = store.get(later.handle);
    PairChoice choice;
    try {
        choice = swapped ? backend.judge_pair_presented(later_bytes, earlier_bytes)
                         : backend.judge_pair_presented(earlier_bytes, later_bytes);
    } catch (const MalformedJudgeReply& e) {
        std::cerr << "[agentloop] malformed pair reply treated as earlier-wins: " << e.what() << "\n";
        result.winner = JudgePairResult::Winner::first;
        return result;
    }
    if (choice == PairChoice::tie) {
        result.winner = JudgePairResult::Winner::first;
        return result;
    }
    const bool presented_first_won = choice == PairChoice::first;
    const bool earlier_won = swapped ? !presented_first_won : presented_first_won;
    result.winner = earlier_won ? JudgePairResult::Winner::first : JudgePairResult::Winner::second;
    return result;
}

}  // namespace agentloop
