#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "agent/episode.hpp"
#include "backends/sim_backends.hpp"
#include "sim/attributes.hpp"
#include "sim/image.hpp"
#include "util/rng.hpp"

namespace testutil {

using namespace agentloop;

// Unique scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("agentloop-" + tag + "-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline Query sample_query(int k, uint64_t seed, const std::string& id = "q") {
    Rng rng(seed);
    return sim::to_query(sim::sample_constraint_query(k, rng), id);
}

// Fixed-attribute query, convenient for hand-built fixtures.
inline Query fixed_query(int k, const std::string& id = "q") {
    std::vector<std::string> attrs(sim::attribute_names().begin(),
                                   sim::attribute_names().begin() + k);
    std::vector<std::string> targets;
    for (int i = 0; i < k; ++i) targets.push_back(sim::attribute_values()[static_cast<size_t>(i)][0]);
    return sim::to_query(sim::ConstraintQuery(attrs, targets), id);
}

// Stores a synthetic image whose first `satisfied_count` constraints hold.
inline ImageRef crafted_image(ImageStore& store, const Query& query, int satisfied_count,
                              uint64_t seed, int round) {
    sim::SimImage image;
    image.attribute_tokens = query.constraints;
    image.satisfied.assign(query.constraints.size(), false);
    for (int i = 0; i < satisfied_count; ++i) image.satisfied[static_cast<size_t>(i)] = true;
    image.seed = seed;
    ImageRef ref;
    ref.handle = store.put(sim::sim_image_bytes(image));
    ref.round = round;
    ref.meta["backend"] = "crafted";
    ref.meta["seed"] = std::to_string(seed);
    return ref;
}

// Trajectory whose round images carry the given satisfied-constraint counts.
inline Trajectory trajectory_with_counts(ImageStore& store, const Query& query,
                                         const std::vector<int>& counts, uint64_t seed,
                                         bool terminated = true, int n_max = 3) {
    Trajectory t;
    t.query = query;
    t.n_max = n_max;
    t.n = static_cast<int>(counts.size());
    t.terminated = terminated;
    const int k = static_cast<int>(query.constraints.size());
    for (int r = 1; r <= t.n; ++r) {
        Round round;
        round.reason = ThoughtStep{ThoughtKind::reason, "adjusting", r};
        round.prompt = RefinedPrompt{query.text, r, true};
        round.image = crafted_image(store, query, counts[static_cast<size_t>(r - 1)],
                                    mix_seed({seed, static_cast<uint64_t>(r)}), r);
        const bool pass = counts[static_cast<size_t>(r - 1)] >= k;
        round.judgment = ThoughtStep{ThoughtKind::judge, pass ? "all satisfied" : "unmet", r};
        round.verdict.satisfied = pass;
        if (!pass) round.verdict.deficiencies = {"unspecified deficiency"};
        t.rounds.push_back(std::move(round));
        t.token_stream.push_back(Token{"<generate>" + query.text + "</generate>",
                                       TokenSource::policy, std::nullopt});
        t.token_stream.push_back(Token{"[image:" + t.rounds.back().image.handle + "]",
                                       TokenSource::environment, std::nullopt});
    }
    return t;
}

// Policy that replays a fixed list of outputs, then repeats the last one.
class ScriptedPolicyHandle : public PolicyHandle {
  public:
    explicit ScriptedPolicyHandle(std::vector<std::string> outputs)
        : outputs_(std::move(outputs)) {}

    std::string name() const override { return "scripted"; }

    std::unique_ptr<EpisodePolicy> start_episode(const Query&, uint64_t) const override {
        class Episode : public EpisodePolicy {
          public:
            explicit Episode(const std::vector<std::string>& outputs) : outputs_(outputs) {}
            PolicyOutput next(const EpisodeContext&) override {
                const std::string& text =
                    outputs_[std::min(cursor_, outputs_.size() - 1)];
                ++cursor_;
                return PolicyOutput{{PolicyPiece{text, std::nullopt}}};
            }

          private:
            const std::vector<std::string>& outputs_;
            size_t cursor_ = 0;
        };
        return std::make_unique<Episode>(outputs_);
    }

  private:
    std::vector<std::string> outputs_;
};

// Pair judge that always prefers the first presented image.
class PositionBiasedJudge : public JudgeBackend {
  public:
    std::string name() const override { return "position-biased"; }
    JudgePointResult judge_point_bytes(const Query&, const std::string&,
                                       const std::vector<std::string>&) override {
        return {true, "looks fine", {}};
    }
    PairChoice judge_pair_presented(const std::string&, const std::string&) override {
        return PairChoice::first;
    }
};

}  // namespace testutil
