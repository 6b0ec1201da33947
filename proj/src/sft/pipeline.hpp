#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agent/episode.hpp"
#include "backends/scripted_teacher.hpp"

namespace agentloop::sft {

struct PoolCandidate {
    std::string prompt;
    std::string source = "open";  // "open" | "synthetic"
    std::vector<std::string> constraints;
    std::optional<std::string> reference_image_b64;
    int fail_count = 0;

    Query to_query(const std::string& id) const;
    nlohmann::json to_json() const;
    static PoolCandidate from_json(const nlohmann::json& j);
};

struct StageReport {
    std::string stage;
    int input = 0;
    int retained = 0;
    std::map<std::string, int> rejections;
    std::map<std::string, int> notes;

    void check() const;  // retained <= input, rejection reasons sum exactly
    nlohmann::json to_json() const;
    static StageReport from_json(const nlohmann::json& j);
};

// Corpus record: a one- or two-round trajectory whose loss masks follow the
// token sources (teacher text on, generator/feedback off). terminal means
// the trajectory ends with the termination action.
struct SftRecord {
    Trajectory trajectory;
    std::string source;

    bool terminal() const { return trajectory.terminated; }
    std::string stratum() const { return source + (terminal() ? ":terminal" : ":continue"); }

    nlohmann::json to_json() const;
    static SftRecord from_json(const nlohmann::json& j);
};

struct PipelineConfig {
    int filter_passes = 3;
    std::string rubric;                        // judge rules; input only, never serialized
    std::vector<std::string> hint_screen;      // case-insensitive leak phrases
    std::map<std::string, double> strata_targets;
    int corpus_size = 0;                       // 0 keeps every accepted record
    uint64_t seed = 0;
    int threads = 1;

    static PipelineConfig defaults();
    void validate() const;
};

class Pipeline {
  public:
    Pipeline(PipelineConfig cfg, GeneratorBackend& generator, JudgeBackend& judge,
             TeacherBackend& teacher, ImageStore& store);

    struct RoundOne {
        size_t index = 0;  // original pool index, keeps seeds stable
        PoolCandidate candidate;
        Query query;
        std::string reasoning1;
        RefinedPrompt prompt1;
        ImageRef image1;
        std::string raw1;  // full teacher emission for round 1
    };

    struct Judged {
        RoundOne base;
        std::string judgment1;
        TeacherVerdict verdict1;
    };

    // Stage 1: keep candidates whose filter_passes generations all fail.
    std::vector<PoolCandidate> filter_pool(const std::vector<PoolCandidate>& candidates,
                                           StageReport& report);

    // Stage 2: teacher refinement + format screen + first image.
    std::vector<RoundOne> synthesize_round_one(const std::vector<PoolCandidate>& retained,
                                               StageReport& report);

    // Stage 3: teacher judgment routes pass to a terminal one-round record
    // and fail onwards to reflection.
    void synthesize_judgment(const std::vector<RoundOne>& partials,
                             std::vector<SftRecord>& terminal_out, std::vector<Judged>& continue_out,
                             StageReport& report);

    // Stage 4: hint-guided reflection with leak/pairwise/pointwise screens
    // and the second-round judgment.
    std::vector<SftRecord> synthesize_reflection(const std::vector<Judged>& partials,
                                                 StageReport& report);

    // Stage 5: drop records whose judgment text contradicts the routing.
    std::vector<SftRecord> consistency_screen(std::vector<SftRecord> records, StageReport& report);

    // Stage 6: stratified downsample to corpus_size.
    std::vector<SftRecord> balanced_sample(std::vector<SftRecord> records, StageReport& report);

    struct Outcome {
        std::vector<SftRecord> corpus;
        std::vector<StageReport> reports;
    };
    Outcome run(const std::vector<PoolCandidate>& pool);

  private:
    PipelineConfig cfg_;
    GeneratorBackend& generator_;
    JudgeBackend& judge_;
    TeacherBackend& teacher_;
    ImageStore& store_;
};

struct CorpusViolation {
    size_t record = 0;
    std::string kind;
    std::string detail;
};

// Re-runs the hint-leak, consistency, mask, and rubric screens over an
// existing corpus.
std::vector<CorpusViolation> validate_corpus(const std::vector<SftRecord>& records,
                                             const PipelineConfig& cfg);

struct DiagnosticsReport {
    long long total = 0;
    long long tool_errors = 0;
    long long with_rounds = 0;
    long long word_diff_leq5 = 0;
    long long round1_pass = 0;
    long long final_pass = 0;

    double error_rate_percent() const;
    double word_diff_leq5_percent() const;
    double reflection_improvement_percent() const;
    nlohmann::json to_json() const;
};

DiagnosticsReport diagnostics(const std::vector<Trajectory>& trajectories);

}  // namespace agentloop::sft
