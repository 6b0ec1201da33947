#include "backends/sim_backends.hpp"

#include "util/errors.hpp"

namespace agentloop {

GeneratedImage SimulatedGenerator::generate_bytes(const std::string& prompt_text, uint64_t seed) {
    sim::PromptProgram program = sim::parse_prompt_program(prompt_text);
    sim::SimImage image = sim::sim_generate(program, seed, params_);
    return {sim::sim_image_bytes(image), name_};
}

JudgePointResult OracleJudge::judge_point_bytes(const Query& query, const std::string& image_bytes,
                                                const std::vector<std::string>& hints) {
    (void)hints;  // the oracle reads ground truth from the query constraints
    auto image = sim::parse_sim_image(image_bytes);
    if (!image) throw MalformedJudgeReply("oracle judge received non-simulated image bytes");
    JudgePointResult result;
    for (const auto& constraint : query.constraints) {
        if (!image->satisfies(constraint)) result.deficiencies.push_back(constraint);
    }
    result.pass = result.deficiencies.empty();
    if (result.pass) {
        result.reasoning = "checked " + std::to_string(query.constraints.size()) +
                           " conditions; all satisfied";
    } else {
        result.reasoning = "unmet:";
        for (const auto& d : result.deficiencies) result.reasoning += " " + d;
    }
    return result;
}

PairChoice OracleJudge::judge_pair_presented(const std::string& first_bytes,
                                             const std::string& second_bytes) {
    auto first = sim::parse_sim_image(first_bytes);
    auto second = sim::parse_sim_image(second_bytes);
    if (!first || !second) throw MalformedJudgeReply("oracle pair judge received non-simulated bytes");
    const int a = first->satisfied_count();
    const int b = second->satisfied_count();
    if (a > b) return PairChoice::first;
    if (b > a) return PairChoice::second;
    return PairChoice::tie;
}

NoisyOracleJudge::NoisyOracleJudge(std::string name, double flip_probability, uint64_t seed)
    : name_(std::move(name)), inner_(name_ + "/oracle"), flip_probability_(flip_probability),
      rng_(seed) {
    if (flip_probability < 0.0 || flip_probability >= 0.5) {
        throw ConfigError("flip probability must lie in [0, 0.5)");
    }
}

JudgePointResult NoisyOracleJudge::judge_point_bytes(const Query& query,
                                                     const std::string& image_bytes,
                                                     const std::vector<std::string>& hints) {
    JudgePointResult result = inner_.judge_point_bytes(query, image_bytes, hints);
    bool flip;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        flip = rng_.bernoulli(flip_probability_);
    }
    if (flip) {
        result.pass = !result.pass;
        if (result.pass) {
            result.deficiencies.clear();
            result.reasoning = "conditions appear satisfied";
        } else {
            result.deficiencies = {"judged deficient"};
            result.reasoning = "unmet: judged deficient";
        }
    }
    return result;
}

PairChoice NoisyOracleJudge::judge_pair_presented(const std::string& first_bytes,
                                                  const std::string& second_bytes) {
    PairChoice choice = inner_.judge_pair_presented(first_bytes, second_bytes);
    bool flip;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        flip = rng_.bernoulli(flip_probability_);
    }
    if (flip && choice != PairChoice::tie) {
        choice = choice == PairChoice::first ? PairChoice::second : PairChoice::first;
    }
    return choice;
}

}  // namespace agentloop
