#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "backends/replay.hpp"
#include "backends/scripted_teacher.hpp"
#include "helpers.hpp"
#include "util/digest.hpp"
#include "util/errors.hpp"

using namespace agentloop;
using namespace testutil;

TEST_CASE("sha256 and base64 against known vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(base64_encode("any carnal pleasure") == "YW55IGNhcm5hbCBwbGVhc3VyZQ==");
    CHECK(base64_decode("YW55IGNhcm5hbCBwbGVhc3VyZQ==") == "any carnal pleasure");
    CHECK(base64_decode(base64_encode(std::string("\x00\x01\xff", 3))) ==
          std::string("\x00\x01\xff", 3));
}

TEST_CASE("image store is content addressed") {
    ImageStore store;
    const std::string bytes = "payload";
    const std::string digest = store.put(bytes);
    CHECK(digest == sha256_hex(bytes));
    CHECK(store.get(digest) == bytes);
    CHECK_THROWS_AS(store.get("missing"), Error);
}

TEST_CASE("simulated generation is deterministic in (prompt, seed)") {
    SimulatedGenerator generator("sim", {});
    ImageStore store;
    RefinedPrompt prompt{"a scene with !color=red and count=two", 1, true};
    ImageRef a = generate(generator, store, prompt, 99);
    ImageRef b = generate(generator, store, prompt, 99);
    ImageRef c = generate(generator, store, prompt, 100);
    CHECK(a.handle == b.handle);
    CHECK(a.handle != c.handle);
    CHECK(a.handle == sha256_hex(store.get(a.handle)));
    CHECK(a.meta.at("seed") == "99");
}

TEST_CASE("satisfied-count distribution matches the Bernoulli product at max emphasis") {
    SimulatedGenerator generator("sim", {});
    ImageStore store;
    const int k = 3;
    const double p = 0.85;
    // Closed-form Binomial(3, 0.85) probabilities.
    std::vector<double> expected(k + 1, 0.0);
    for (int c = 0; c <= k; ++c) {
        double comb = c == 0 || c == k ? 1.0 : 3.0;
        expected[static_cast<size_t>(c)] =
            comb * std::pow(p, c) * std::pow(1 - p, k - c);
    }
    std::vector<long long> counts(static_cast<size_t>(k + 1), 0);
    const int samples = 10000;
    for (int s = 0; s < samples; ++s) {
        GeneratedImage img = generator.generate_bytes(
            "a scene with !!color=red and !!count=two and !!size=big",
            mix_seed({3000ull, static_cast<uint64_t>(s)}));
        auto parsed = sim::parse_sim_image(img.bytes);
        REQUIRE(parsed.has_value());
        ++counts[static_cast<size_t>(parsed->satisfied_count())];
    }
    for (int c = 0; c <= k; ++c) {
        const double rate = static_cast<double>(counts[static_cast<size_t>(c)]) / samples;
        CHECK(std::abs(rate - expected[static_cast<size_t>(c)]) < 0.02);
    }
}

TEST_CASE("oracle pointwise judging is strict all-or-nothing") {
    OracleJudge judge("oracle");
    ImageStore store;
    Query q = fixed_query(5);
    ImageRef pass_image = crafted_image(store, q, 5, 1, 1);
    ImageRef fail_image = crafted_image(store, q, 4, 2, 1);

    auto pass = judge_point(judge, store, q, pass_image, {});
    CHECK(pass.pass);
    CHECK(!pass.reasoning.empty());
    CHECK(pass.deficiencies.empty());

    auto fail = judge_point(judge, store, q, fail_image, {});
    CHECK(!fail.pass);
    REQUIRE(fail.deficiencies.size() == 1);
    CHECK(fail.deficiencies[0] == q.constraints[4]);
}

TEST_CASE("noisy oracle flips at the configured rate") {
    NoisyOracleJudge judge("noisy", 0.1, 4242);
    ImageStore store;
    Query q = fixed_query(3);
    ImageRef pass_image = crafted_image(store, q, 3, 7, 1);
    int passes = 0;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) {
        if (judge_point(judge, store, q, pass_image, {}).pass) ++passes;
    }
    const double rate = static_cast<double>(passes) / trials;
    CHECK(std::abs(rate - 0.9) < 0.01);
    CHECK_THROWS_AS(NoisyOracleJudge("bad", 0.5, 1), ConfigError);
}

TEST_CASE("pairwise judging: strict win, tie policy, order mapping") {
    OracleJudge judge("oracle");
    ImageStore store;
    Query q = fixed_query(5);
    ImageRef earlier = crafted_image(store, q, 2, 11, 1);
    ImageRef later = crafted_image(store, q, 4, 12, 2);

    Rng rng(8);
    for (int i = 0; i < 32; ++i) {
        auto result = judge_pair(judge, store, earlier, later, rng);
        CHECK(result.winner == JudgePairResult::Winner::second);
    }

    ImageRef tie_a = crafted_image(store, q, 3, 13, 1);
    ImageRef tie_b = crafted_image(store, q, 3, 14, 2);
    for (int i = 0; i < 32; ++i) {
        auto result = judge_pair(judge, store, tie_a, tie_b, rng);
        CHECK(result.winner == JudgePairResult::Winner::first);  // ties are not improvements
    }
}

TEST_CASE("shuffling debiases a position-biased judge") {
    PositionBiasedJudge judge;
    ImageStore store;
    Query q = fixed_query(3);
    ImageRef earlier = crafted_image(store, q, 1, 21, 1);
    ImageRef later = crafted_image(store, q, 2, 22, 2);
    Rng rng(20250809);
    int earlier_wins = 0;
    const int trials = 1000;
    for (int i = 0; i < trials; ++i) {
        if (judge_pair(judge, store, earlier, later, rng).winner ==
            JudgePairResult::Winner::first) {
            ++earlier_wins;
        }
    }
    CHECK(std::abs(earlier_wins / static_cast<double>(trials) - 0.5) <= 0.04);
}

TEST_CASE("record then replay is bit-identical, replay misses throw") {
    TempDir dir("replay");
    auto cache = std::make_shared<ReplayCache>(dir.file("session.jsonl"));
    auto inner = std::make_shared<SimulatedGenerator>("sim", sim::SimParams{});
    RecordingGenerator recorder(inner, cache);

    GeneratedImage original = recorder.generate_bytes("a scene with color=red and count=two", 5);
    CHECK(cache->size() == 1);

    auto reload = std::make_shared<ReplayCache>(dir.file("session.jsonl"));
    ReplayGenerator replay("replay", reload);
    GeneratedImage replayed = replay.generate_bytes("a scene with color=red and count=two", 5);
    CHECK(replayed.bytes == original.bytes);
    CHECK(sha256_hex(replayed.bytes) == sha256_hex(original.bytes));
    CHECK_THROWS_AS(replay.generate_bytes("a different prompt", 5), ReplayMiss);
}

TEST_CASE("judge and teacher sessions replay through the cache") {
    TempDir dir("replay-judge");
    auto cache = std::make_shared<ReplayCache>(dir.file("judge.jsonl"));
    auto oracle = std::make_shared<OracleJudge>("oracle");
    RecordingJudge recorder(oracle, cache);
    ImageStore store;
    Query q = fixed_query(3);
    ImageRef image = crafted_image(store, q, 2, 31, 1);

    auto live = recorder.judge_point_bytes(q, store.get(image.handle), q.constraints);
    ReplayJudge replay("replay", std::make_shared<ReplayCache>(dir.file("judge.jsonl")));
    auto cached = replay.judge_point_bytes(q, store.get(image.handle), q.constraints);
    CHECK(cached.pass == live.pass);
    CHECK(cached.reasoning == live.reasoning);
    CHECK(cached.deficiencies == live.deficiencies);

    auto teacher_cache = std::make_shared<ReplayCache>(dir.file("teacher.jsonl"));
    auto scripted = std::make_shared<ScriptedTeacher>("scripted", ScriptedTeacherConfig{});
    RecordingTeacher teacher_recorder(scripted, teacher_cache);
    nlohmann::json messages = nlohmann::json::array(
        {nlohmann::json{{"role", "user"},
                        {"content", nlohmann::json{{"task", "refine"}, {"query", q.text}}.dump()}}});
    const std::string live_text = teacher_recorder.complete(messages);
    ReplayTeacher teacher_replay("replay", std::make_shared<ReplayCache>(dir.file("teacher.jsonl")));
    CHECK(teacher_replay.complete(messages) == live_text);
}

TEST_CASE("scripted teacher verdict parsing") {
    auto pass = parse_teacher_verdict("all good verdict=pass");
    REQUIRE(pass.has_value());
    CHECK(pass->pass);

    auto fail = parse_teacher_verdict("unmet: color=red; count=two verdict=fail");
    REQUIRE(fail.has_value());
    CHECK(!fail->pass);
    CHECK(fail->deficiencies == std::vector<std::string>{"color=red", "count=two"});

    CHECK(!parse_teacher_verdict("no marker here").has_value());
    CHECK(has_contradictory_verdicts("unmet: x verdict=fail verdict=pass"));
    CHECK(!has_contradictory_verdicts("verdict=pass"));
}
