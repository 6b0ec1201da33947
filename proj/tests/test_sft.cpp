#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sft/pipeline.hpp"
#include "util/errors.hpp"

using namespace agentloop;
using namespace testutil;

namespace {

sft::PoolCandidate candidate_from(const Query& q, const std::string& source) {
    sft::PoolCandidate c;
    c.prompt = q.text;
    c.source = source;
    c.constraints = q.constraints;
    return c;
}

std::vector<sft::PoolCandidate> sim_pool(int count, uint64_t seed) {
    std::vector<sft::PoolCandidate> pool;
    for (int i = 0; i < count; ++i) {
        Query q = sample_query(3, mix_seed({seed, static_cast<uint64_t>(i)}));
        pool.push_back(candidate_from(q, i % 2 == 0 ? "open" : "synthetic"));
    }
    return pool;
}

struct PipelineRig {
    SimulatedGenerator generator{"sim", sim::SimParams{}};
    OracleJudge judge{"oracle"};
    ImageStore store;

    sft::Pipeline make(ScriptedTeacherConfig teacher_cfg, sft::PipelineConfig cfg,
                       std::shared_ptr<ScriptedTeacher>& teacher_out) {
        teacher_out = std::make_shared<ScriptedTeacher>("teach", teacher_cfg);
        return sft::Pipeline(cfg, generator, judge, *teacher_out, store);
    }
};

}  // namespace

TEST_CASE("filter_pool keeps only candidates whose every attempt fails") {
    PipelineRig rig;
    std::shared_ptr<ScriptedTeacher> teacher;
    sft::PipelineConfig cfg = sft::PipelineConfig::defaults();
    cfg.seed = 11;
    auto pipeline = rig.make({}, cfg, teacher);

    // Unreachable constraint: raw prompts at emphasis 0 with p0 = 0 never pass.
    SimulatedGenerator impossible("imp", sim::SimParams{0.0, 0.0, 1.0});
    sft::Pipeline hard(cfg, impossible, rig.judge, *teacher, rig.store);
    sft::StageReport report;
    auto kept = hard.filter_pool(sim_pool(20, 1), report);
    CHECK(kept.size() == 20);
    for (const auto& c : kept) CHECK(c.fail_count == 3);

    // Always-pass generator: everything is rejected.
    SimulatedGenerator easy("easy", sim::SimParams{1.0, 0.0, 1.0});
    sft::Pipeline trivial(cfg, easy, rig.judge, *teacher, rig.store);
    sft::StageReport report2;
    CHECK(trivial.filter_pool(sim_pool(20, 2), report2).empty());
    CHECK(report2.rejections.at("passed-generation") == 20);
}

TEST_CASE("three-pass retention tracks (1-p)^3") {
    PipelineRig rig;
    std::shared_ptr<ScriptedTeacher> teacher;
    sft::PipelineConfig cfg = sft::PipelineConfig::defaults();
    cfg.seed = 313;
    auto pipeline = rig.make({}, cfg, teacher);
    sft::StageReport report;
    const int n = 1000;
    auto kept = pipeline.filter_pool(sim_pool(n, 3), report);
    const double p_pass = 0.35 * 0.35 * 0.35;  // K=3 raw prompts at emphasis 0
    const double expected = std::pow(1.0 - p_pass, 3);
    const double observed = static_cast<double>(kept.size()) / n;
    CHECK(std::abs(observed - expected) < 0.03);
}

TEST_CASE("round-one synthesis screens malformed teacher output and identity rewrites pass") {
    PipelineRig rig;
    std::shared_ptr<ScriptedTeacher> teacher;
    sft::PipelineConfig cfg = sft::PipelineConfig::defaults();
    cfg.seed = 17;

    SUBCASE("identity teacher yields P1 equal to the candidate prompt") {
        ScriptedTeacherConfig identity;
        identity.refine_emphasis = 0;
        identity.verbosity_words = 0;
        auto pipeline = rig.make(identity, cfg, teacher);
        sft::StageReport report;
        auto pool = sim_pool(5, 4);
        auto partials = pipeline.synthesize_round_one(pool, report);
        REQUIRE(partials.size() == 5);
        for (size_t i = 0; i < partials.size(); ++i) {
            CHECK(partials[i].prompt1.text == pool[i].prompt);
        }
    }

    SUBCASE("format errors are rejected with reason=format") {
        ScriptedTeacherConfig broken;
        broken.format_error_rate = 1.0;
        auto pipeline = rig.make(broken, cfg, teacher);
        sft::StageReport report;
        CHECK(pipeline.synthesize_round_one(sim_pool(5, 5), report).empty());
        CHECK(report.rejections.at("format") == 5);
    }
}

TEST_CASE("judgment synthesis routes on the teacher verdict and never serializes the rubric") {
    PipelineRig rig;
    std::shared_ptr<ScriptedTeacher> teacher;
    sft::PipelineConfig cfg = sft::PipelineConfig::defaults();
    cfg.seed = 23;
    auto pipeline = rig.make({}, cfg, teacher);

    sft::StageReport r1;
    auto partials = pipeline.synthesize_round_one(sim_pool(40, 6), r1);
    sft::StageReport r2;
    std::vector<sft::SftRecord> terminal;
    std::vector<sft::Pipeline::Judged> continuing;
    pipeline.synthesize_judgment(partials, terminal, continuing, r2);
    CHECK(terminal.size() + continuing.size() == partials.size());
    CHECK(r2.notes.at("routed-terminal") == static_cast<int>(terminal.size()));
    CHECK(r2.notes.at("routed-continue") == static_cast<int>(continuing.size()));
    CHECK(!terminal.empty());   // refined prompts pass often at emphasis 1
    CHECK(!continuing.empty());

    for (const auto& record : terminal) {
        CHECK(record.terminal());
        CHECK(record.trajectory.n == 1);
        for (const auto& token : record.trajectory.token_stream) {
            CHECK(token.text.find(cfg.rubric) == std::string::npos);
        }
    }
    for (const auto& judged : continuing) {
        CHECK(!judged.verdict1.pass);
        CHECK(!judged.verdict1.deficiencies.empty());
    }
}

TEST_CASE("reflection screens hint leaks, regressions, and failures") {
    PipelineRig rig;
    std::shared_ptr<ScriptedTeacher> teacher;
    sft::PipelineConfig cfg = sft::PipelineConfig::defaults();
    cfg.seed = 29;

    SUBCASE("leaking teacher is filtered out") {
        ScriptedTeacherConfig leaky;
        leaky.hint_leak_rate = 1.0;
        auto pipeline = rig.make(leaky, cfg, teacher);
        sft::StageReport r1;
        auto partials = pipeline.synthesize_round_one(sim_pool(30, 7), r1);
        sft::StageReport r2;
        std::vector<sft::SftRecord> terminal;
        std::vector<sft::Pipeline::Judged> continuing;
        pipeline.synthesize_judgment(partials, terminal, continuing, r2);
        REQUIRE(!continuing.empty());
        sft::StageReport r3;
        CHECK(pipeline.synthesize_reflection(continuing, r3).empty());
        CHECK(r3.rejections.at("hint-leak") == static_cast<int>(continuing.size()));
    }

    SUBCASE("accepted records are two-round with a strictly better, passing second image") {
        auto pipeline = rig.make({}, cfg, teacher);
        sft::StageReport r1;
        auto partials = pipeline.synthesize_round_one(sim_pool(80, 8), r1);
        sft::StageReport r2;
        std::vector<sft::SftRecord> terminal;
        std::vector<sft::Pipeline::Judged> continuing;
        pipeline.synthesize_judgment(partials, terminal, continuing, r2);
        sft::StageReport r3;
        auto records = pipeline.synthesize_reflection(continuing, r3);
        CHECK(!records.empty());
        CHECK(r3.rejections.count("pairwise-regression") + r3.rejections.count("pointwise-fail") > 0);
        OracleJudge oracle("check");
        for (const auto& record : records) {
            const Trajectory& t = record.trajectory;
            REQUIRE(t.n == 2);
            CHECK(t.terminated);  // perfect teacher agrees with the oracle
            auto final_result = judge_point(oracle, rig.store, t.query, t.rounds[1].image, {});
            CHECK(final_result.pass);
        }
    }
}

TEST_CASE("teacher judge errors create non-terminal two-round records") {
    PipelineRig rig;
    std::shared_ptr<ScriptedTeacher> teacher;
    sft::PipelineConfig cfg = sft::PipelineConfig::defaults();
    cfg.seed = 31;
    ScriptedTeacherConfig flaky;
    flaky.judge_error_rate = 0.35;
    auto pipeline = rig.make(flaky, cfg, teacher);
    auto outcome = pipeline.run(sim_pool(120, 9));
    int terminal = 0;
    int continuing = 0;
    for (const auto& record : outcome.corpus) {
        record.terminal() ? ++terminal : ++continuing;
    }
    CHECK(terminal > 0);
    CHECK(continuing > 0);
}

TEST_CASE("consistency screen drops contradictory judgments") {
    PipelineRig rig;
    std::shared_ptr<ScriptedTeacher> teacher;
    sft::PipelineConfig cfg = sft::PipelineConfig::defaults();
    cfg.seed = 37;
    ScriptedTeacherConfig contradictory;
    contradictory.inconsistency_rate = 1.0;
    auto pipeline = rig.make(contradictory, cfg, teacher);
    sft::StageReport r1;
    auto partials = pipeline.synthesize_round_one(sim_pool(20, 10), r1);
    sft::StageReport r2;
    std::vector<sft::SftRecord> terminal;
    std::vector<sft::Pipeline::Judged> continuing;
    pipeline.synthesize_judgment(partials, terminal, continuing, r2);
    sft::StageReport r5;
    auto kept = pipeline.consistency_screen(std::move(terminal), r5);
    CHECK(kept.empty());
    CHECK(r5.rejections.at("inconsistent") == r5.input);
}

TEST_CASE("full pipeline: reports telescope and masks are sound") {
    PipelineRig rig;
    std::shared_ptr<ScriptedTeacher> teacher;
    sft::PipelineConfig cfg = sft::PipelineConfig::defaults();
    cfg.seed = 41;
    cfg.corpus_size = 0;
    ScriptedTeacherConfig mildly_flawed;
    mildly_flawed.format_error_rate = 0.1;
    mildly_flawed.judge_error_rate = 0.2;
    mildly_flawed.hint_leak_rate = 0.1;
    auto pipeline = rig.make(mildly_flawed, cfg, teacher);
    auto outcome = pipeline.run(sim_pool(200, 11));

    REQUIRE(outcome.reports.size() == 6);
    for (const auto& report : outcome.reports) CHECK_NOTHROW(report.check());
    CHECK(outcome.reports[0].retained == outcome.reports[1].input);
    CHECK(outcome.reports[1].retained == outcome.reports[2].input);
    CHECK(outcome.reports[2].notes.at("routed-continue") == outcome.reports[3].input);
    CHECK(outcome.reports[2].notes.at("routed-terminal") + outcome.reports[3].retained ==
          outcome.reports[4].input);
    CHECK(outcome.reports[4].retained == outcome.reports[5].input);
    CHECK(outcome.reports[5].retained == static_cast<int>(outcome.corpus.size()));

    const auto violations = sft::validate_corpus(outcome.corpus, cfg);
    CHECK(violations.empty());
    for (const auto& record : outcome.corpus) {
        for (const auto& token : record.trajectory.token_stream) {
            CHECK(token.loss_mask() == (token.source == TokenSource::policy));
        }
    }
}

TEST_CASE("balanced sampling hits strata quotas within one") {
    PipelineRig rig;
    std::shared_ptr<ScriptedTeacher> teacher;
    sft::PipelineConfig cfg = sft::PipelineConfig::defaults();
    cfg.seed = 43;
    cfg.strata_targets = {{"open:terminal", 0.5}, {"synthetic:terminal", 0.5}};
    cfg.corpus_size = 10;
    auto pipeline = rig.make({}, cfg, teacher);

    std::vector<sft::SftRecord> records;
    for (int i = 0; i < 40; ++i) {
        Query q = sample_query(3, mix_seed({4300ull, static_cast<uint64_t>(i)}));
        sft::SftRecord record;
        record.source = i % 2 == 0 ? "open" : "synthetic";
        record.trajectory = trajectory_with_counts(rig.store, q, {3}, 4400 + i, true, 2);
        records.push_back(std::move(record));
    }
    sft::StageReport report;
    auto corpus = pipeline.balanced_sample(records, report);
    REQUIRE(corpus.size() == 10);
    int open_count = 0;
    for (const auto& r : corpus) {
        if (r.source == "open") ++open_count;
    }
    CHECK(std::abs(open_count - 5) <= 1);
}

TEST_CASE("empty stratum mass redistributes proportionally and shortfalls error") {
    PipelineRig rig;
    std::shared_ptr<ScriptedTeacher> teacher;
    sft::PipelineConfig cfg = sft::PipelineConfig::defaults();
    cfg.seed = 47;
    cfg.corpus_size = 8;
    auto pipeline = rig.make({}, cfg, teacher);

    std::vector<sft::SftRecord> records;  // only open:terminal and synthetic:terminal exist
    for (int i = 0; i < 20; ++i) {
        Query q = sample_query(3, mix_seed({4700ull, static_cast<uint64_t>(i)}));
        sft::SftRecord record;
        record.source = i % 2 == 0 ? "open" : "synthetic";
        record.trajectory = trajectory_with_counts(rig.store, q, {3}, 4800 + i, true, 2);
        records.push_back(std::move(record));
    }
    sft::StageReport report;
    auto corpus = pipeline.balanced_sample(records, report);
    REQUIRE(corpus.size() == 8);
    CHECK(report.notes.at("achieved open:terminal") == 4);
    CHECK(report.notes.at("achieved synthetic:terminal") == 4);

    cfg.corpus_size = 50;
    sft::Pipeline big(cfg, rig.generator, rig.judge, *teacher, rig.store);
    sft::StageReport overflow;
    CHECK_THROWS_AS(big.balanced_sample(records, overflow), InsufficientStratum);
}

TEST_CASE("corpus records round-trip through JSONL form") {
    PipelineRig rig;
    std::shared_ptr<ScriptedTeacher> teacher;
    sft::PipelineConfig cfg = sft::PipelineConfig::defaults();
    cfg.seed = 53;
    auto pipeline = rig.make({}, cfg, teacher);
    auto outcome = pipeline.run(sim_pool(40, 12));
    REQUIRE(!outcome.corpus.empty());
    for (const auto& record : outcome.corpus) {
        sft::SftRecord back = sft::SftRecord::from_json(record.to_json());
        CHECK(back.to_json() == record.to_json());
    }
}

TEST_CASE("diagnostics reproduce planted statistics exactly") {
    ImageStore store;
    Query q = fixed_query(3);

    SUBCASE("planted error rate of 13.36%") {
        std::vector<Trajectory> batch;
        const int total = 10000;
        const int flagged = 1336;
        for (int i = 0; i < total; ++i) {
            Trajectory t = trajectory_with_counts(store, q, {3},
                                                  mix_seed({6000ull, static_cast<uint64_t>(i)}));
            if (i < flagged) t.tool_error = true;
            batch.push_back(std::move(t));
        }
        auto report = sft::diagnostics(batch);
        CHECK(report.error_rate_percent() == 13.36);
    }

    SUBCASE("identity prompts give word_diff_leq5_rate of 100%") {
        std::vector<Trajectory> batch;
        for (int i = 0; i < 50; ++i) {
            batch.push_back(trajectory_with_counts(store, q, {3},
                                                   mix_seed({6100ull, static_cast<uint64_t>(i)})));
        }
        auto report = sft::diagnostics(batch);
        CHECK(report.word_diff_leq5_percent() == 100.0);
        CHECK(report.reflection_improvement_percent() == 0.0);  // single-round corpus
    }

    SUBCASE("verbose prompts give word_diff_leq5_rate of 0.00%") {
        std::vector<Trajectory> batch;
        for (int i = 0; i < 50; ++i) {
            Trajectory t = trajectory_with_counts(store, q, {3},
                                                  mix_seed({6200ull, static_cast<uint64_t>(i)}));
            t.rounds.back().prompt.text +=
                " highly detailed sharp studio lighting balanced framing rich";
            batch.push_back(std::move(t));
        }
        auto report = sft::diagnostics(batch);
        CHECK(report.word_diff_leq5_percent() == 0.0);
    }

    SUBCASE("reflection improvement is final pass rate minus round-1 pass rate") {
        std::vector<Trajectory> batch;
        batch.push_back(trajectory_with_counts(store, q, {1, 3}, 6301));  // fail -> pass
        batch.push_back(trajectory_with_counts(store, q, {3, 3}, 6302));  // pass -> pass
        batch.push_back(trajectory_with_counts(store, q, {1, 1}, 6303, false));
        batch.back().n_max = 2;
        batch.back().terminated = false;
        auto report = sft::diagnostics(batch);
        // round-1 passes: 1/3, final passes: 2/3
        CHECK(report.reflection_improvement_percent() ==
              doctest::Approx(100.0 / 3.0).epsilon(1e-12));
    }
}
