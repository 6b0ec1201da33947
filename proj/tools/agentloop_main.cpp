// agentloop: batch CLI over the C API.
//   agentloop run       --config cfg.json QUERIES.jsonl [--seed N] [--out DIR]
//   agentloop train     --config cfg.json [--seed N] [--out DIR]
//   agentloop build-sft --config cfg.json POOL.jsonl [--seed N] [--out DIR]
//                       [--validate CORPUS.jsonl]
//   agentloop diagnose  TRAJECTORIES.jsonl [--out DIR]
// Exit codes: 0 ok, 2 configuration error, 3 backend failure, 1 otherwise.

#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "agentloop.h"

namespace {

int exit_code_for(al_status status) {
    switch (status) {
        case AL_OK: return 0;
        case AL_ERR_INVALID_ARGUMENT:
        case AL_ERR_CONFIG: return 2;
        case AL_ERR_BACKEND: return 3;
        default: return 1;
    }
}

int report_failure(al_status status) {
    std::fprintf(stderr, "agentloop: error: %s\n", al_last_error());
    return exit_code_for(status);
}

struct EngineHandle {
    al_engine* engine = nullptr;
    ~EngineHandle() { al_engine_destroy(engine); }
};

struct OwnedString {
    char* value = nullptr;
    ~OwnedString() { al_string_free(value); }
};

// Loads the config file and applies the CLI overrides before engine
// creation, so the engine sees one merged document.
int create_engine(const std::string& config_path, bool seed_set, unsigned long long seed,
                  const std::string& out_dir, EngineHandle& handle) {
    std::ifstream in(config_path);
    if (!in) {
        std::fprintf(stderr, "agentloop: error: cannot open config: %s\n", config_path.c_str());
        return 2;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    nlohmann::json config = nlohmann::json::parse(buf.str(), nullptr, false);
    if (config.is_discarded()) {
        std::fprintf(stderr, "agentloop: error: config is not valid JSON: %s\n", config_path.c_str());
        return 2;
    }
    if (seed_set) config["seed"] = seed;
    if (!out_dir.empty()) config["out_dir"] = out_dir;
    const std::string merged = config.dump();
    al_status status = al_engine_create(merged.c_str(), &handle.engine);
    if (status != AL_OK) return report_failure(status);
    return 0;
}

void print_summary(const OwnedString& summary) {
    if (summary.value) std::printf("%s\n", summary.value);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"agentloop: multi-turn generate-judge-reflect engine"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    unsigned long long seed = 0;
    bool seed_set = false;
    auto add_common = [&](CLI::App* cmd, bool config_required) {
        auto* opt = cmd->add_option("--config", config_path, "run configuration JSON");
        if (config_required) opt->required();
        cmd->add_option("--out", out_dir, "output directory (overrides config)");
        cmd->add_option("--seed", seed, "seed override")->each([&](const std::string&) {
            seed_set = true;
        });
    };

    std::string queries_path;
    auto* run_cmd = app.add_subcommand("run", "run one episode per query");
    add_common(run_cmd, true);
    run_cmd->add_option("queries", queries_path, "queries JSONL file")->required();

    auto* train_cmd = app.add_subcommand("train", "train the toy policy");
    add_common(train_cmd, true);

    std::string pool_path;
    std::string validate_path;
    auto* build_cmd = app.add_subcommand("build-sft", "build the cold-start corpus");
    add_common(build_cmd, true);
    build_cmd->add_option("pool", pool_path, "prompt pool JSONL file");
    build_cmd->add_option("--validate", validate_path, "re-run the screens over an existing corpus");

    std::string trajectories_path;
    auto* diagnose_cmd = app.add_subcommand("diagnose", "report corpus statistics");
    add_common(diagnose_cmd, false);
    diagnose_cmd->add_option("trajectories", trajectories_path, "trajectory or corpus JSONL file")
        ->required();

    CLI11_PARSE(app, argc, argv);

    if (diagnose_cmd->parsed()) {
        OwnedString report;
        al_status status = al_diagnose(trajectories_path.c_str(), &report.value);
        if (status != AL_OK) return report_failure(status);
        nlohmann::json j = nlohmann::json::parse(report.value);
        std::printf("error_rate: %.2f%%\n", j.at("error_rate").get<double>());
        std::printf("word_diff_leq5_rate: %.2f%%\n", j.at("word_diff_leq5_rate").get<double>());
        std::printf("reflection_improvement: %.2f%%\n",
                    j.at("reflection_improvement").get<double>());
        if (!out_dir.empty()) {
            std::ofstream out(out_dir + "/diagnostics.json");
            out << report.value << "\n";
        }
        return 0;
    }

    EngineHandle engine;
    if (int rc = create_engine(config_path, seed_set, seed, out_dir, engine); rc != 0) return rc;

    if (run_cmd->parsed()) {
        OwnedString summary;
        al_status status = al_engine_run(engine.engine, queries_path.c_str(), nullptr, &summary.value);
        if (status != AL_OK) return report_failure(status);
        print_summary(summary);
        return 0;
    }
    if (train_cmd->parsed()) {
        OwnedString summary;
        al_status status = al_engine_train(engine.engine, nullptr, &summary.value);
        if (status != AL_OK) return report_failure(status);
        print_summary(summary);
        return 0;
    }
    if (build_cmd->parsed()) {
        if (!validate_path.empty()) {
            OwnedString report;
            al_status status =
                al_engine_validate_corpus(engine.engine, validate_path.c_str(), &report.value);
            if (status != AL_OK) return report_failure(status);
            print_summary(report);
            nlohmann::json j = nlohmann::json::parse(report.value);
            return j.value("ok", false) ? 0 : 1;
        }
        if (pool_path.empty()) {
            std::fprintf(stderr, "agentloop: error: build-sft needs a pool file or --validate\n");
            return 2;
        }
        OwnedString summary;
        al_status status =
            al_engine_build_sft(engine.engine, pool_path.c_str(), nullptr, &summary.value);
        if (status != AL_OK) return report_failure(status);
        print_summary(summary);
        return 0;
    }
    return 1;
}
