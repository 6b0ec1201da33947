#include "io/config.hpp"

#include <cstdlib>
#include <set>

#include "sim/attributes.hpp"
#include "util/errors.hpp"

namespace agentloop::io {

namespace {

const std::set<std::string> kGeneratorKinds = {"simulated", "http", "replay"};
const std::set<std::string> kJudgeKinds = {"oracle", "noisy-oracle", "http", "replay"};
const std::set<std::string> kTeacherKinds = {"scripted", "http", "replay"};

BackendSpec backend_spec(const nlohmann::json& j, const char* env_endpoint_var) {
    BackendSpec spec;
    spec.name = j.at("name").get<std::string>();
    spec.kind = j.at("kind").get<std::string>();
    if (j.contains("params")) {
        if (!j.at("params").is_object()) throw ConfigError("backend params must be an object");
        spec.params = j.at("params");
    }
    if (j.contains("record") && !j.at("record").is_null()) {
        spec.record = j.at("record").get<std::string>();
    }
    if (const char* endpoint = std::getenv(env_endpoint_var)) {
        spec.params["endpoint"] = endpoint;
    }
    return spec;
}

void require_endpoint(const BackendSpec& spec) {
    if (spec.kind == "http" &&
        (!spec.params.contains("endpoint") || !spec.params.at("endpoint").is_string() ||
         spec.params.at("endpoint").get<std::string>().empty())) {
        throw ConfigError("http backend '" + spec.name + "' requires params.endpoint");
    }
    if (spec.kind == "replay" &&
        (!spec.params.contains("cache") || !spec.params.at("cache").is_string())) {
        throw ConfigError("replay backend '" + spec.name + "' requires params.cache");
    }
}

}  // namespace

void RunConfig::validate() const {
    if (environment.attribute_count < 2 || environment.attribute_count > sim::kMaxAttributes) {
        throw ConfigError("environment.K must lie in [2, 8]");
    }
    if (environment.params.p0 < 0.0 || environment.params.p0 > 1.0 ||
        environment.params.g < 0.0 || environment.params.cap <= 0.0 ||
        environment.params.cap > 1.0) {
        throw ConfigError("environment probabilities out of range");
    }
    if (agent.n_max < 1) throw ConfigError("agent.n_max must be >= 1");
    if (agent.parse_retries < 0) throw ConfigError("agent.parse_retries must be >= 0");
    if (agent.policy != "reflective" && agent.policy != "toy-zero" && agent.policy != "checkpoint") {
        throw ConfigError("agent.policy must be reflective, toy-zero, or checkpoint");
    }
    if (agent.policy == "checkpoint" && agent.checkpoint_path.empty()) {
        throw ConfigError("agent.policy=checkpoint requires agent.checkpoint");
    }
    if (!kGeneratorKinds.count(generator.kind)) {
        throw ConfigError("unknown generator kind: " + generator.kind);
    }
    if (!kJudgeKinds.count(judge.kind)) throw ConfigError("unknown judge kind: " + judge.kind);
    if (!kTeacherKinds.count(teacher.kind)) {
        throw ConfigError("unknown teacher kind: " + teacher.kind);
    }
    std::set<std::string> names{generator.name, judge.name, teacher.name};
    if (names.size() != 3) throw ConfigError("backend names must be unique");
    require_endpoint(generator);
    require_endpoint(judge);
    require_endpoint(teacher);
    if (judge.kind == "noisy-oracle") {
        const double flip = judge.params.value("flip_probability", 0.0);
        if (flip < 0.0 || flip >= 0.5) {
            throw ConfigError("noisy-oracle flip_probability must lie in [0, 0.5)");
        }
    }
    trainer.validate();
    pipeline.validate();
}

nlohmann::json RunConfig::to_json() const {
    auto backend_json = [](const BackendSpec& spec) {
        nlohmann::json j{{"name", spec.name}, {"kind", spec.kind}, {"params", spec.params}};
        if (spec.record) j["record"] = *spec.record;
        return j;
    };
    nlohmann::json strata(pipeline.strata_targets);
    return nlohmann::json{
        {"seed", seed},
        {"out_dir", out_dir},
        {"threads", threads},
        {"environment",
         {{"K", environment.attribute_count},
          {"p0", environment.params.p0},
          {"g", environment.params.g},
          {"clamp", environment.params.cap}}},
        {"agent",
         {{"n_max", agent.n_max},
          {"parse_retries", agent.parse_retries},
          {"edits_per_round", agent.edits_per_round},
          {"policy", agent.policy},
          {"checkpoint", agent.checkpoint_path}}},
        {"backends",
         {{"generator", backend_json(generator)},
          {"judge", backend_json(judge)},
          {"teacher", backend_json(teacher)}}},
        {"trainer", trainer.to_json()},
        {"pipeline",
         {{"filter_passes", pipeline.filter_passes},
          {"corpus_size", pipeline.corpus_size},
          {"strata", strata},
          {"hint_screen", pipeline.hint_screen},
          {"rubric", pipeline.rubric}}}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    try {
        RunConfig cfg;
        if (!j.contains("seed")) throw ConfigError("seed is mandatory");
        cfg.seed = j.at("seed").get<uint64_t>();
        cfg.out_dir = j.value("out_dir", cfg.out_dir);
        cfg.threads = j.value("threads", 0);

        if (j.contains("environment")) {
            const auto& env = j.at("environment");
            cfg.environment.attribute_count = env.value("K", cfg.environment.attribute_count);
            cfg.environment.params.p0 = env.value("p0", cfg.environment.params.p0);
            cfg.environment.params.g = env.value("g", cfg.environment.params.g);
            cfg.environment.params.cap = env.value("clamp", cfg.environment.params.cap);
        }
        if (j.contains("agent")) {
            const auto& agent = j.at("agent");
            cfg.agent.n_max = agent.value("n_max", cfg.agent.n_max);
            cfg.agent.parse_retries = agent.value("parse_retries", cfg.agent.parse_retries);
            cfg.agent.edits_per_round = agent.value("edits_per_round", cfg.agent.edits_per_round);
            cfg.agent.policy = agent.value("policy", cfg.agent.policy);
            cfg.agent.checkpoint_path = agent.value("checkpoint", cfg.agent.checkpoint_path);
        }
        if (j.contains("backends")) {
            const auto& backends = j.at("backends");
            if (backends.contains("generator")) {
                cfg.generator = backend_spec(backends.at("generator"), "AGENTLOOP_GENERATOR_ENDPOINT");
            }
            if (backends.contains("judge")) {
                cfg.judge = backend_spec(backends.at("judge"), "AGENTLOOP_JUDGE_ENDPOINT");
            }
            if (backends.contains("teacher")) {
                cfg.teacher = backend_spec(backends.at("teacher"), "AGENTLOOP_TEACHER_ENDPOINT");
            }
        }
        if (j.contains("trainer")) cfg.trainer = rl::TrainerConfig::from_json(j.at("trainer"));
        cfg.trainer.seed = cfg.seed;

        if (j.contains("pipeline")) {
            const auto& p = j.at("pipeline");
            cfg.pipeline.filter_passes = p.value("filter_passes", cfg.pipeline.filter_passes);
            cfg.pipeline.corpus_size = p.value("corpus_size", cfg.pipeline.corpus_size);
            if (p.contains("strata")) {
                cfg.pipeline.strata_targets.clear();
                for (const auto& [key, value] : p.at("strata").items()) {
                    cfg.pipeline.strata_targets[key] = value.get<double>();
                }
            }
            if (p.contains("hint_screen")) {
                cfg.pipeline.hint_screen.clear();
                for (const auto& phrase : p.at("hint_screen")) {
                    cfg.pipeline.hint_screen.push_back(phrase.get<std::string>());
                }
            }
            cfg.pipeline.rubric = p.value("rubric", cfg.pipeline.rubric);
        }
        cfg.pipeline.seed = cfg.seed;
        cfg.validate();
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
}

ScriptedTeacherConfig scripted_teacher_config(const nlohmann::json& params, uint64_t default_seed) {
    ScriptedTeacherConfig cfg;
    cfg.verbosity_words = params.value("verbosity_words", cfg.verbosity_words);
    cfg.format_error_rate = params.value("format_error_rate", cfg.format_error_rate);
    cfg.judge_error_rate = params.value("judge_error_rate", cfg.judge_error_rate);
    cfg.inconsistency_rate = params.value("inconsistency_rate", cfg.inconsistency_rate);
    cfg.hint_leak_rate = params.value("hint_leak_rate", cfg.hint_leak_rate);
    cfg.refine_emphasis = params.value("refine_emphasis", cfg.refine_emphasis);
    cfg.reflect_emphasis = params.value("reflect_emphasis", cfg.reflect_emphasis);
    cfg.seed = params.value("seed", default_seed);
    for (double rate : {cfg.format_error_rate, cfg.judge_error_rate, cfg.inconsistency_rate,
                        cfg.hint_leak_rate}) {
        if (rate < 0.0 || rate > 1.0) throw ConfigError("teacher rates must lie in [0, 1]");
    }
    return cfg;
}

}  // namespace agentloop::io
