#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "util/errors.hpp"

using namespace agentloop;
using namespace testutil;

TEST_CASE("query invariants") {
    Query q = fixed_query(3);
    CHECK_NOTHROW(q.validate());

    Query empty_text = q;
    empty_text.text.clear();
    CHECK_THROWS_AS(empty_text.validate(), Error);

    Query dup = q;
    dup.constraints.push_back(dup.constraints.front());
    CHECK_THROWS_AS(dup.validate(), Error);
}

TEST_CASE("verdict invariants") {
    Verdict ok{true, {}};
    CHECK_NOTHROW(ok.validate());
    Verdict satisfied_with_deficiency{true, {"x"}};
    CHECK_THROWS_AS(satisfied_with_deficiency.validate(), Error);
    Verdict unsatisfied_without_deficiency{false, {}};
    CHECK_THROWS_AS(unsatisfied_without_deficiency.validate(), Error);
}

TEST_CASE("trajectory validation rejects structural violations") {
    ImageStore store;
    Query q = fixed_query(3);
    Trajectory t = trajectory_with_counts(store, q, {1, 3}, 11, true);
    CHECK_NOTHROW(t.validate());
    CHECK(trajectory_round_count(t) == 2);

    Trajectory too_many = trajectory_with_counts(store, q, {1, 1, 2, 3}, 12, true, 3);
    CHECK_THROWS_AS(too_many.validate(), Error);

    Trajectory early_stop = trajectory_with_counts(store, q, {1}, 13, false, 3);
    CHECK_THROWS_AS(early_stop.validate(), Error);  // not terminated, not forced, no error
    early_stop.tool_error = true;
    CHECK_NOTHROW(early_stop.validate());

    Trajectory dup_handle = trajectory_with_counts(store, q, {2, 3}, 14, true);
    dup_handle.rounds[1].image.handle = dup_handle.rounds[0].image.handle;
    CHECK_THROWS_AS(dup_handle.validate(), Error);
}

TEST_CASE("json round-trip preserves the record") {
    ImageStore store;
    Query q = fixed_query(4);
    Trajectory t = trajectory_with_counts(store, q, {2, 4}, 21, true);
    t.parse_failures = 1;
    Trajectory back = Trajectory::from_json(t.to_json());
    CHECK(back.to_json() == t.to_json());
    CHECK(back.n == 2);
    CHECK(back.rounds[1].verdict.satisfied);
    CHECK(back.token_stream.size() == t.token_stream.size());
}

TEST_CASE("token stream reconstructs the transcript and tags every token once") {
    ImageStore store;
    Query q = fixed_query(3);
    Trajectory t = trajectory_with_counts(store, q, {0, 3}, 31, true);
    std::string by_source;
    size_t policy_tokens = 0;
    size_t environment_tokens = 0;
    for (const auto& token : t.token_stream) {
        if (token.source == TokenSource::policy) {
            ++policy_tokens;
            CHECK(token.loss_mask());
        } else {
            ++environment_tokens;
            CHECK(!token.loss_mask());
        }
        by_source += token.text;
    }
    CHECK(by_source == t.transcript());
    CHECK(policy_tokens + environment_tokens == t.token_stream.size());
}

TEST_CASE("loss mask mismatch in serialized form is rejected") {
    ImageStore store;
    Trajectory t = trajectory_with_counts(store, fixed_query(2), {2}, 41, true);
    nlohmann::json j = t.to_json();
    j["token_stream"][0]["loss_mask"] = false;  // policy token flipped off
    CHECK_THROWS_AS(Trajectory::from_json(j), Error);
}
