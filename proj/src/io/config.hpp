#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "backends/scripted_teacher.hpp"
#include "grpo/grpo.hpp"
#include "sft/pipeline.hpp"
#include "sim/image.hpp"

namespace agentloop::io {

struct EnvironmentConfig {
    int attribute_count = 3;  // K
    sim::SimParams params;    // p0, g, clamp
};

struct BackendSpec {
    std::string name;
    std::string kind;
    nlohmann::json params = nlohmann::json::object();
    std::optional<std::string> record;  // cache path; wraps the backend when set
};

struct AgentConfig {
    int n_max = 3;
    int parse_retries = 1;
    int edits_per_round = 0;  // 0 = attribute count
    std::string policy = "reflective";  // reflective | toy-zero | checkpoint
    std::string checkpoint_path;
};

struct RunConfig {
    uint64_t seed = 0;
    std::string out_dir = "out";
    int threads = 0;  // 0 = auto
    EnvironmentConfig environment;
    BackendSpec generator{"sim0", "simulated", nlohmann::json::object(), std::nullopt};
    BackendSpec judge{"oracle0", "oracle", nlohmann::json::object(), std::nullopt};
    BackendSpec teacher{"teacher0", "scripted", nlohmann::json::object(), std::nullopt};
    rl::TrainerConfig trainer;
    AgentConfig agent;
    sft::PipelineConfig pipeline = sft::PipelineConfig::defaults();

    int effective_edits_per_round() const {
        return agent.edits_per_round > 0 ? agent.edits_per_round : environment.attribute_count;
    }

    void validate() const;
    nlohmann::json to_json() const;
    // Throws ConfigError on schema violations. AGENTLOOP_GENERATOR_ENDPOINT,
    // AGENTLOOP_JUDGE_ENDPOINT, and AGENTLOOP_TEACHER_ENDPOINT override the
    // corresponding params.endpoint fields.
    static RunConfig from_json(const nlohmann::json& j);
};

ScriptedTeacherConfig scripted_teacher_config(const nlohmann::json& params, uint64_t default_seed);

}  // namespace agentloop::io
