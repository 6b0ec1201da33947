#include "engine.hpp"

#include <filesystem>

#include "backends/http_backends.hpp"
#include "backends/replay.hpp"
#include "backends/sim_backends.hpp"
#include "backends/scripted_teacher.hpp"
#include "sim/attributes.hpp"
#include "sim/policies.hpp"
#include "grpo/trainer.hpp"
#include "util/errors.hpp"
#include "util/fsio.hpp"
#include "util/parallel.hpp"

namespace agentloop {

namespace fs = std::filesystem;

namespace {

HttpOptions http_options(const nlohmann::json& params) {
    HttpOptions options;
    options.endpoint = params.value("endpoint", "");
    options.timeout_ms = params.value("timeout_ms", options.timeout_ms);
    options.attempts = params.value("attempts", options.attempts);
    options.backoff_ms = params.value("backoff_ms", options.backoff_ms);
    return options;
}

std::shared_ptr<ReplayCache> cache_for(const std::string& path) {
    return std::make_shared<ReplayCache>(fs::path(path));
}

std::vector<Query> load_queries(const std::string& path) {
    std::vector<Query> queries;
    size_t line_no = 0;
    for (const auto& line : read_lines(path)) {
        nlohmann::json j = nlohmann::json::parse(line);
        if (!j.contains("id")) j["id"] = "q" + std::to_string(line_no);
        Query q = Query::from_json(j);
        q.validate();
        queries.push_back(std::move(q));
        ++line_no;
    }
    return queries;
}

}  // namespace

Engine::Engine(io::RunConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    store_ = std::make_unique<ImageStore>();

    if (cfg_.generator.kind == "simulated") {
        generator_ = std::make_shared<SimulatedGenerator>(cfg_.generator.name, cfg_.environment.params);
    } else if (cfg_.generator.kind == "http") {
        generator_ = std::make_shared<HttpGenerator>(cfg_.generator.name,
                                                     http_options(cfg_.generator.params),
                                                     cfg_.generator.params.value("params", nlohmann::json::object()));
    } else {
        generator_ = std::make_shared<ReplayGenerator>(
            cfg_.generator.name, cache_for(cfg_.generator.params.at("cache").get<std::string>()));
    }
    if (cfg_.generator.record) {
        generator_ = std::make_shared<RecordingGenerator>(generator_, cache_for(*cfg_.generator.record));
    }

    if (cfg_.judge.kind == "oracle") {
        judge_ = std::make_shared<OracleJudge>(cfg_.judge.name);
    } else if (cfg_.judge.kind == "noisy-oracle") {
        judge_ = std::make_shared<NoisyOracleJudge>(
            cfg_.judge.name, cfg_.judge.params.value("flip_probability", 0.1),
            cfg_.judge.params.value("seed", cfg_.seed));
    } else if (cfg_.judge.kind == "http") {
        judge_ = std::make_shared<HttpJudge>(cfg_.judge.name, http_options(cfg_.judge.params));
    } else {
        judge_ = std::make_shared<ReplayJudge>(
            cfg_.judge.name, cache_for(cfg_.judge.params.at("cache").get<std::string>()));
    }
    if (cfg_.judge.record) {
        judge_ = std::make_shared<RecordingJudge>(judge_, cache_for(*cfg_.judge.record));
    }

    if (cfg_.teacher.kind == "scripted") {
        teacher_ = std::make_shared<ScriptedTeacher>(
            cfg_.teacher.name, io::scripted_teacher_config(cfg_.teacher.params, cfg_.seed));
    } else if (cfg_.teacher.kind == "http") {
        teacher_ = std::make_shared<HttpTeacher>(cfg_.teacher.name, http_options(cfg_.teacher.params));
    } else {
        teacher_ = std::make_shared<ReplayTeacher>(
            cfg_.teacher.name, cache_for(cfg_.teacher.params.at("cache").get<std::string>()));
    }
    if (cfg_.teacher.record) {
        teacher_ = std::make_shared<RecordingTeacher>(teacher_, cache_for(*cfg_.teacher.record));
    }
}

std::string Engine::resolve_out_dir(const std::string& out_dir) const {
    return out_dir.empty() ? cfg_.out_dir : out_dir;
}

std::unique_ptr<PolicyHandle> Engine::make_policy(const sim::ToyPolicy** policy_out) {
    const int edits = cfg_.effective_edits_per_round();
    if (cfg_.agent.policy == "reflective") {
        return std::make_unique<sim::ReflectivePolicyHandle>(edits);
    }
    if (cfg_.agent.policy == "toy-zero") {
        checkpoint_policy_ = std::make_unique<sim::ToyPolicy>(cfg_.environment.attribute_count,
                                                              cfg_.agent.n_max);
    } else {
        nlohmann::json j = nlohmann::json::parse(read_file(cfg_.agent.checkpoint_path));
        checkpoint_policy_ =
            std::make_unique<sim::ToyPolicy>(sim::ToyPolicy::from_json(j.at("policy")));
    }
    if (policy_out) *policy_out = checkpoint_policy_.get();
    return std::make_unique<sim::ToyPolicyHandle>(*checkpoint_policy_, edits);
}

nlohmann::json Engine::run(const std::string& queries_path, const std::string& out_dir) {
    const std::vector<Query> queries = load_queries(queries_path);
    auto policy = make_policy(nullptr);
    const int threads = resolve_thread_count(cfg_.threads);

    struct EpisodeResult {
        Trajectory trajectory;
        reward::RewardBreakdown reward;
    };
    std::vector<EpisodeResult> results(queries.size());
    parallel_for(queries.size(), threads, [&](size_t i) {
        EpisodeOptions options;
        options.n_max = cfg_.agent.n_max;
        options.parse_retries = cfg_.agent.parse_retries;
        options.seed = mix_seed({cfg_.seed, fnv1a64("run"), static_cast<uint64_t>(i)});
        results[i].trajectory =
            run_episode(queries[i], *policy, *generator_, *judge_, *store_, options);
        Rng reward_rng(mix_seed({cfg_.seed, fnv1a64("run-reward"), static_cast<uint64_t>(i)}));
        results[i].reward =
            reward::compute_reward(results[i].trajectory, *judge_, *store_, reward_rng);
    });

    std::string jsonl;
    std::vector<long long> pass_at_round(static_cast<size_t>(cfg_.agent.n_max), 0);
    double reward_sum = 0.0;
    double rounds_sum = 0.0;
    long long terminated = 0;
    long long tool_errors = 0;
    for (const auto& result : results) {
        nlohmann::json record = result.trajectory.to_json();
        record["reward"] = result.reward.to_json();
        jsonl += record.dump();
        jsonl += "\n";
        const auto& t = result.trajectory;
        for (int r = 1; r <= cfg_.agent.n_max; ++r) {
            // Budget-r output: the last image available after r rounds.
            const int effective = std::min(r, t.n);
            if (effective >= 1 &&
                t.rounds[static_cast<size_t>(effective - 1)].verdict.satisfied) {
                ++pass_at_round[static_cast<size_t>(r - 1)];
            }
        }
        reward_sum += result.reward.r_total;
        rounds_sum += t.n;
        if (t.terminated) ++terminated;
        if (t.tool_error) ++tool_errors;
    }

    nlohmann::json pass_rates = nlohmann::json::array();
    for (long long count : pass_at_round) {
        pass_rates.push_back(queries.empty() ? 0.0
                                             : static_cast<double>(count) /
                                                   static_cast<double>(queries.size()));
    }
    nlohmann::json summary{
        {"episodes", queries.size()},
        {"pass_rate_by_round", pass_rates},
        {"mean_reward", queries.empty() ? 0.0 : reward_sum / static_cast<double>(queries.size())},
        {"mean_rounds", queries.empty() ? 0.0 : rounds_sum / static_cast<double>(queries.size())},
        {"terminated_rate",
         queries.empty() ? 0.0 : static_cast<double>(terminated) / static_cast<double>(queries.size())},
        {"tool_error_rate",
         queries.empty() ? 0.0 : static_cast<double>(tool_errors) / static_cast<double>(queries.size())}};

    const fs::path dir = resolve_out_dir(out_dir);
    atomic_write_file(dir / "trajectories.jsonl", jsonl);
    atomic_write_file(dir / "summary.json", summary.dump(2) + "\n");
    return summary;
}

nlohmann::json Engine::train(const std::string& out_dir) {
    rl::TrainEnvironment env{*generator_, *judge_, *store_,
                             EpisodeOptions{cfg_.agent.n_max, 0, cfg_.agent.parse_retries},
                             cfg_.effective_edits_per_round(),
                             cfg_.environment.attribute_count,
                             resolve_thread_count(cfg_.threads),
                             {}};
    env.sample_query = [this](uint64_t seed, const std::string& id) {
        Rng rng(seed);
        return sim::to_query(sim::sample_constraint_query(cfg_.environment.attribute_count, rng), id);
    };

    rl::TrainerConfig trainer_cfg = cfg_.trainer;
    trainer_cfg.seed = cfg_.seed;
    rl::TrainResult result = rl::train(trainer_cfg, env, nullptr);

    nlohmann::json checkpoint{{"trainer", trainer_cfg.to_json()},
                              {"seed", cfg_.seed},
                              {"kl_coefficient", trainer_cfg.kl_coefficient},
                              {"environment",
                               {{"K", cfg_.environment.attribute_count},
                                {"p0", cfg_.environment.params.p0},
                                {"g", cfg_.environment.params.g},
                                {"clamp", cfg_.environment.params.cap}}},
                              {"policy", result.policy.to_json()}};

    const fs::path dir = resolve_out_dir(out_dir);
    atomic_write_file(dir / "checkpoint.json", checkpoint.dump(2) + "\n");
    atomic_write_file(dir / "metrics.csv", rl::metrics_csv(result.metrics));

    nlohmann::json summary{{"iterations", result.metrics.size()}};
    if (!result.metrics.empty()) {
        summary["first_mean_reward"] = result.metrics.front().mean_reward;
        summary["final_mean_reward"] = result.metrics.back().mean_reward;
        summary["final_mean_rounds"] = result.metrics.back().mean_rounds;
    }
    return summary;
}

nlohmann::json Engine::build_sft(const std::string& pool_path, const std::string& out_dir) {
    std::vector<sft::PoolCandidate> pool;
    for (const auto& line : read_lines(pool_path)) {
        pool.push_back(sft::PoolCandidate::from_json(nlohmann::json::parse(line)));
    }

    sft::PipelineConfig pipeline_cfg = cfg_.pipeline;
    pipeline_cfg.seed = cfg_.seed;
    pipeline_cfg.threads = resolve_thread_count(cfg_.threads);
    sft::Pipeline pipeline(pipeline_cfg, *generator_, *judge_, *teacher_, *store_);
    sft::Pipeline::Outcome outcome = pipeline.run(pool);

    std::string jsonl;
    for (const auto& record : outcome.corpus) {
        jsonl += record.to_json().dump();
        jsonl += "\n";
    }
    nlohmann::json reports = nlohmann::json::array();
    for (const auto& report : outcome.reports) reports.push_back(report.to_json());

    const fs::path dir = resolve_out_dir(out_dir);
    atomic_write_file(dir / "corpus.jsonl", jsonl);
    atomic_write_file(dir / "stage_reports.json", reports.dump(2) + "\n");

    return nlohmann::json{{"pool", pool.size()},
                          {"corpus", outcome.corpus.size()},
                          {"stages", reports}};
}

nlohmann::json Engine::validate_corpus(const std::string& corpus_path) {
    std::vector<sft::SftRecord> records;
    for (const auto& line : read_lines(corpus_path)) {
        records.push_back(sft::SftRecord::from_json(nlohmann::json::parse(line)));
    }
    sft::PipelineConfig pipeline_cfg = cfg_.pipeline;
    const auto violations = sft::validate_corpus(records, pipeline_cfg);
    nlohmann::json list = nlohmann::json::array();
    for (const auto& v : violations) {
        list.push_back(nlohmann::json{{"record", v.record}, {"kind", v.kind}, {"detail", v.detail}});
    }
    return nlohmann::json{{"records", records.size()},
                          {"violations", list},
                          {"ok", violations.empty()}};
}

nlohmann::json Engine::diagnose(const std::string& trajectories_path) {
    std::vector<Trajectory> trajectories;
    for (const auto& line : read_lines(trajectories_path)) {
        trajectories.push_back(Trajectory::from_json(nlohmann::json::parse(line)));
    }
    return sft::diagnostics(trajectories).to_json();
}

}  // namespace agentloop
