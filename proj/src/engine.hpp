#pragma once

#include <memory>

#include "io/config.hpp"

namespace agentloop {

// Batch command surface behind the C API. Each command writes its outputs
// atomically under the chosen directory and returns a summary document.
class Engine {
  public:
    explicit Engine(io::RunConfig cfg);

    // One trajectory per query line; writes trajectories.jsonl + summary.json.
    nlohmann::json run(const std::string& queries_path, const std::string& out_dir);

    // Writes checkpoint.json + metrics.csv.
    nlohmann::json train(const std::string& out_dir);

    // Writes corpus.jsonl + stage_reports.json.
    nlohmann::json build_sft(const std::string& pool_path, const std::string& out_dir);

    // Re-runs the pipeline screens over an existing corpus.
    nlohmann::json validate_corpus(const std::string& corpus_path);

    // Table-style diagnostics over a trajectory or corpus JSONL file.
    static nlohmann::json diagnose(const std::string& trajectories_path);

    const io::RunConfig& config() const { return cfg_; }

  private:
    std::string resolve_out_dir(const std::string& out_dir) const;
    std::unique_ptr<PolicyHandle> make_policy(const sim::ToyPolicy** policy_out);

    io::RunConfig cfg_;
    std::shared_ptr<GeneratorBackend> generator_;
    std::shared_ptr<JudgeBackend> judge_;
    std::shared_ptr<TeacherBackend> teacher_;
    std::unique_ptr<ImageStore> store_;
    std::unique_ptr<sim::ToyPolicy> checkpoint_policy_;
};

}  // namespace agentloop
