#include "sft/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "agent/tool_call.hpp"
#include "sim/image.hpp"
#include "util/digest.hpp"
#include "util/errors.hpp"
#include "util/parallel.hpp"
#include "util/text.hpp"

namespace agentloop::sft {

namespace {

constexpr const char* kRefineInstructions =
    "Rewrite the user request as short reasoning followed by exactly one generate call. "
    "Keep every stated requirement.";
constexpr const char* kReflectInstructions =
    "The previous image missed requirements named in the judgment. Strengthen the prompt for the "
    "unmet requirements and emit one generate call. Never mention the guidance image.";

nlohmann::json teacher_messages(const std::string& system_text, const nlohmann::json& payload) {
    return nlohmann::json::array({nlohmann::json{{"role", "system"}, {"content", system_text}},
                                  nlohmann::json{{"role", "user"}, {"content", payload.dump()}}});
}

Token policy_token(std::string text) {
    Token t;
    t.text = std::move(text);
    t.source = TokenSource::policy;
    return t;
}

Token environment_token(std::string text) {
    Token t;
    t.text = std::move(text);
    t.source = TokenSource::environment;
    return t;
}

Verdict verdict_from(const TeacherVerdict& tv) {
    Verdict v;
    v.satisfied = tv.pass;
    if (!tv.pass) v.deficiencies = tv.deficiencies;
    return v;
}

Round make_round(int round_no, const std::string& reasoning, const RefinedPrompt& prompt,
                 const ImageRef& image, const std::string& judgment, const Verdict& verdict) {
    Round r;
    r.reason = ThoughtStep{ThoughtKind::reason, reasoning, round_no};
    r.prompt = prompt;
    r.image = image;
    r.judgment = ThoughtStep{ThoughtKind::judge, judgment, round_no};
    r.verdict = verdict;
    return r;
}

// Largest-remainder apportionment of `size` over the positive-target strata,
// ties broken by key order.
std::map<std::string, int> apportion(const std::map<std::string, double>& targets, int size) {
    double mass = 0.0;
    for (const auto& [key, frac] : targets) mass += frac;
    if (mass <= 0.0) throw InsufficientStratum("no stratum mass available for sampling");
    std::map<std::string, int> quota;
    std::vector<std::pair<double, std::string>> remainders;
    int assigned = 0;
    for (const auto& [key, frac] : targets) {
        const double exact = static_cast<double>(size) * frac / mass;
        const int base = static_cast<int>(std::floor(exact));
        quota[key] = base;
        assigned += base;
        remainders.push_back({exact - base, key});
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int i = 0; i < size - assigned; ++i) {
        ++quota[remainders[static_cast<size_t>(i)].second];
    }
    return quota;
}

}  // namespace

Query PoolCandidate::to_query(const std::string& id) const {
    Query q;
    q.id = id;
    q.text = prompt;
    q.constraints = constraints;
    q.validate();
    return q;
}

nlohmann::json PoolCandidate::to_json() const {
    nlohmann::json j{{"prompt", prompt}, {"source", source}, {"constraints", constraints}};
    if (reference_image_b64) j["reference_image_b64"] = *reference_image_b64;
    if (fail_count > 0) j["fail_count"] = fail_count;
    return j;
}

PoolCandidate PoolCandidate::from_json(const nlohmann::json& j) {
    PoolCandidate c;
    c.prompt = j.at("prompt").get<std::string>();
    c.source = j.value("source", "open");
    if (c.source != "open" && c.source != "synthetic") {
        throw Error("pool candidate source must be open or synthetic");
    }
    if (j.contains("constraints")) {
        for (const auto& item : j.at("constraints")) c.constraints.push_back(item.get<std::string>());
    }
    if (j.contains("reference_image_b64")) {
        c.reference_image_b64 = j.at("reference_image_b64").get<std::string>();
    }
    c.fail_count = j.value("fail_count", 0);
    if (c.fail_count < 0 || c.fail_count > 3) throw Error("fail_count out of range");
    return c;
}

void StageReport::check() const {
    if (retained > input) throw Error("stage retained more than its input");
    int rejected = 0;
    for (const auto& [reason, count] : rejections) {
        (void)reason;
        rejected += count;
    }
    if (rejected != input - retained) throw Error("stage rejections do not reconcile");
}

nlohmann::json StageReport::to_json() const {
    return nlohmann::json{{"stage", stage},
                          {"input", input},
                          {"retained", retained},
                          {"rejections", rejections},
                          {"notes", notes}};
}

StageReport StageReport::from_json(const nlohmann::json& j) {
    StageReport r;
    r.stage = j.at("stage").get<std::string>();
    r.input = j.at("input").get<int>();
    r.retained = j.at("retained").get<int>();
    for (const auto& [k, v] : j.at("rejections").items()) r.rejections[k] = v.get<int>();
    if (j.contains("notes")) {
        for (const auto& [k, v] : j.at("notes").items()) r.notes[k] = v.get<int>();
    }
    return r;
}

nlohmann::json SftRecord::to_json() const {
    nlohmann::json j = trajectory.to_json();
    j["source"] = source;
    return j;
}

SftRecord SftRecord::from_json(const nlohmann::json& j) {
    SftRecord r;
    r.trajectory = Trajectory::from_json(j);
    r.source = j.value("source", "open");
    return r;
}

PipelineConfig PipelineConfig::defaults() {
    PipelineConfig cfg;
    cfg.rubric =
        "Check each listed requirement against the image. Declare verdict=pass only when every "
        "requirement holds; otherwise list the unmet requirements after 'unmet:' and declare "
        "verdict=fail.";
    cfg.hint_screen = {"reference image", "hint image", "provided image", "example image"};
    cfg.strata_targets = {{"open:terminal", 0.25},
                          {"open:continue", 0.25},
                          {"synthetic:terminal", 0.25},
                          {"synthetic:continue", 0.25}};
    return cfg;
}

void PipelineConfig::validate() const {
    if (filter_passes < 1) throw ConfigError("filter_passes must be >= 1");
    if (corpus_size < 0) throw ConfigError("corpus_size must be >= 0");
    if (corpus_size > 0) {
        double sum = 0.0;
        for (const auto& [key, frac] : strata_targets) {
            if (frac < 0.0) throw ConfigError("stratum target must be >= 0: " + key);
            sum += frac;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("strata targets must sum to 1");
    }
}

Pipeline::Pipeline(PipelineConfig cfg, GeneratorBackend& generator, JudgeBackend& judge,
                   TeacherBackend& teacher, ImageStore& store)
    : cfg_(std::move(cfg)), generator_(generator), judge_(judge), teacher_(teacher), store_(store) {
    cfg_.validate();
}

std::vector<PoolCandidate> Pipeline::filter_pool(const std::vector<PoolCandidate>& candidates,
                                                 StageReport& report) {
    report.stage = "filter_pool";
    report.input = static_cast<int>(candidates.size());

    struct Slot {
        std::optional<PoolCandidate> retained;
        std::string rejection;
    };
    std::vector<Slot> slots(candidates.size());
    parallel_for(candidates.size(), cfg_.threads, [&](size_t i) {
        PoolCandidate candidate = candidates[i];
        try {
            const Query query = candidate.to_query("pool" + std::to_string(i));
            RefinedPrompt prompt;
            prompt.text = candidate.prompt;
            prompt.round = 1;
            prompt.well_formed = true;
            int fails = 0;
            for (int pass = 0; pass < cfg_.filter_passes; ++pass) {
                const uint64_t seed = mix_seed({cfg_.seed, fnv1a64("filter"),
                                                static_cast<uint64_t>(i), static_cast<uint64_t>(pass)});
                ImageRef image = generate(generator_, store_, prompt, seed);
                if (!judge_point(judge_, store_, query, image, {}).pass) ++fails;
            }
            candidate.fail_count = fails;
            if (fails == cfg_.filter_passes) {
                slots[i].retained = std::move(candidate);
            } else {
                slots[i].rejection = "passed-generation";
            }
        } catch (const BackendUnavailable&) {
            slots[i].rejection = "backend-error";
        } catch (const Error&) {
            slots[i].rejection = "invalid-candidate";
        }
    });

    std::vector<PoolCandidate> retained;
    for (auto& slot : slots) {
        if (slot.retained) {
            retained.push_back(std::move(*slot.retained));
        } else {
            ++report.rejections[slot.rejection];
        }
    }
    report.retained = static_cast<int>(retained.size());
    report.check();
    return retained;
}

std::vector<Pipeline::RoundOne> Pipeline::synthesize_round_one(
    const std::vector<PoolCandidate>& retained, StageReport& report) {
    report.stage = "synthesize_round_one";
    report.input = static_cast<int>(retained.size());

    struct Slot {
        std::optional<RoundOne> ok;
        std::string rejection;
    };
    std::vector<Slot> slots(retained.size());
    parallel_for(retained.size(), cfg_.threads, [&](size_t i) {
        try {
            RoundOne partial;
            partial.index = i;
            partial.candidate = retained[i];
            partial.query = retained[i].to_query("sft" + std::to_string(i));
            const nlohmann::json payload{{"task", "refine"}, {"query", partial.query.text}};
            partial.raw1 = teacher_.complete(teacher_messages(kRefineInstructions, payload));
            PolicyOutputParse parsed = parse_policy_output(partial.raw1);
            if (!std::holds_alternative<RefinedPrompt>(parsed.value)) {
                slots[i].rejection = "format";
                return;
            }
            partial.prompt1 = std::get<RefinedPrompt>(parsed.value);
            partial.prompt1.round = 1;
            partial.reasoning1 = parsed.reasoning;
            const uint64_t seed = mix_seed({cfg_.seed, fnv1a64("sft-i1"), static_cast<uint64_t>(i)});
            partial.image1 = generate(generator_, store_, partial.prompt1, seed);
            slots[i].ok = std::move(partial);
        } catch (const TeacherUnavailable&) {
            slots[i].rejection = "teacher-unavailable";
        } catch (const BackendUnavailable&) {
            slots[i].rejection = "backend-error";
        }
    });

    std::vector<RoundOne> out;
    for (auto& slot : slots) {
        if (slot.ok) {
            out.push_back(std::move(*slot.ok));
        } else {
            ++report.rejections[slot.rejection];
        }
    }
    report.retained = static_cast<int>(out.size());
    report.check();
    return out;
}

void Pipeline::synthesize_judgment(const std::vector<RoundOne>& partials,
                                   std::vector<SftRecord>& terminal_out,
                                   std::vector<Judged>& continue_out, StageReport& report) {
    report.stage = "synthesize_judgment";
    report.input = static_cast<int>(partials.size());

    struct Slot {
        std::optional<SftRecord> terminal;
        std::optional<Judged> next;
        std::string rejection;
    };
    std::vector<Slot> slots(partials.size());
    parallel_for(partials.size(), cfg_.threads, [&](size_t i) {
        const RoundOne& base = partials[i];
        try {
            const nlohmann::json payload{{"task", "judge"},
                                         {"query", base.query.text},
                                         {"criteria", base.query.constraints},
                                         {"image_b64", base64_encode(store_.get(base.image1.handle))}};
            const std::string judgment = teacher_.complete(teacher_messages(cfg_.rubric, payload));
            auto verdict = parse_teacher_verdict(judgment);
            if (!verdict) {
                slots[i].rejection = "malformed-judge";
                return;
            }
            if (verdict->pass) {
                SftRecord record;
                record.source = base.candidate.source;
                Trajectory& t = record.trajectory;
                t.query = base.query;
                t.n_max = 2;
                t.n = 1;
                t.terminated = true;
                t.rounds.push_back(make_round(1, base.reasoning1, base.prompt1, base.image1,
                                              judgment, verdict_from(*verdict)));
                t.token_stream.push_back(policy_token(base.raw1));
                t.token_stream.push_back(environment_token("[image:" + base.image1.handle + "]"));
                t.token_stream.push_back(policy_token(judgment));
                t.token_stream.push_back(policy_token(render_termination()));
                t.validate();
                slots[i].terminal = std::move(record);
            } else {
                slots[i].next = Judged{base, judgment, *verdict};
            }
        } catch (const TeacherUnavailable&) {
            slots[i].rejection = "teacher-unavailable";
        } catch (const BackendUnavailable&) {
            slots[i].rejection = "backend-error";
        }
    });

    for (auto& slot : slots) {
        if (slot.terminal) {
            terminal_out.push_back(std::move(*slot.terminal));
            ++report.notes["routed-terminal"];
        } else if (slot.next) {
            continue_out.push_back(std::move(*slot.next));
            ++report.notes["routed-continue"];
        } else {
            ++report.rejections[slot.rejection];
        }
    }
    report.retained = static_cast<int>(terminal_out.size() + continue_out.size());
    report.check();
}

std::vector<SftRecord> Pipeline::synthesize_reflection(const std::vector<Judged>& partials,
                                                       StageReport& report) {
    report.stage = "synthesize_reflection";
    report.input = static_cast<int>(partials.size());

    struct Slot {
        std::optional<SftRecord> ok;
        std::string rejection;
    };
    std::vector<Slot> slots(partials.size());
    parallel_for(partials.size(), cfg_.threads, [&](size_t i) {
        const Judged& judged = partials[i];
        const RoundOne& base = judged.base;
        try {
            std::string hint_b64;
            if (base.candidate.reference_image_b64) {
                hint_b64 = *base.candidate.reference_image_b64;
            } else {
                // Synthesize a fully satisfying image as the guidance hint.
                sim::SimImage hint;
                hint.attribute_tokens = base.query.constraints;
                hint.satisfied.assign(base.query.constraints.size(), true);
                hint.seed = mix_seed({cfg_.seed, fnv1a64("hint"), static_cast<uint64_t>(base.index)});
                hint_b64 = base64_encode(sim::sim_image_bytes(hint));
            }
            const nlohmann::json payload{{"task", "reflect"},
                                         {"query", base.query.text},
                                         {"judgment", judged.judgment1},
                                         {"prior_prompt", base.prompt1.text},
                                         {"hint_image_b64", hint_b64}};
            const std::string raw2 = teacher_.complete(teacher_messages(kReflectInstructions, payload));
            PolicyOutputParse parsed = parse_policy_output(raw2);
            if (!std::holds_alternative<RefinedPrompt>(parsed.value)) {
                slots[i].rejection = "format";
                return;
            }
            RefinedPrompt prompt2 = std::get<RefinedPrompt>(parsed.value);
            prompt2.round = 2;
            for (const auto& phrase : cfg_.hint_screen) {
                if (contains_ci(prompt2.text, phrase) || contains_ci(parsed.reasoning, phrase)) {
                    slots[i].rejection = "hint-leak";
                    return;
                }
            }
            const uint64_t seed = mix_seed({cfg_.seed, fnv1a64("sft-i2"),
                                            static_cast<uint64_t>(base.index)});
            ImageRef image2 = generate(generator_, store_, prompt2, seed);

            Rng pair_rng(mix_seed({cfg_.seed, fnv1a64("sft-pair"), static_cast<uint64_t>(base.index)}));
            JudgePairResult pair = judge_pair(judge_, store_, base.image1, image2, pair_rng);
            if (pair.winner != JudgePairResult::Winner::second) {
                slots[i].rejection = "pairwise-regression";
                return;
            }
            if (!judge_point(judge_, store_, base.query, image2, {}).pass) {
                slots[i].rejection = "pointwise-fail";
                return;
            }

            const nlohmann::json judge_payload{
                {"task", "judge"},
                {"query", base.query.text},
                {"criteria", base.query.constraints},
                {"image_b64", base64_encode(store_.get(image2.handle))}};
            const std::string judgment2 = teacher_.complete(teacher_messages(cfg_.rubric, judge_payload));
            auto verdict2 = parse_teacher_verdict(judgment2);
            if (!verdict2) {
                slots[i].rejection = "malformed-judge";
                return;
            }

            SftRecord record;
            record.source = base.candidate.source;
            Trajectory& t = record.trajectory;
            t.query = base.query;
            t.n_max = 2;
            t.n = 2;
            t.terminated = verdict2->pass;
            t.rounds.push_back(make_round(1, base.reasoning1, base.prompt1, base.image1,
                                          judged.judgment1, verdict_from(judged.verdict1)));
            t.rounds.push_back(make_round(2, parsed.reasoning, prompt2, image2, judgment2,
                                          verdict_from(*verdict2)));
            t.token_stream.push_back(policy_token(base.raw1));
            t.token_stream.push_back(environment_token("[image:" + base.image1.handle + "]"));
            t.token_stream.push_back(policy_token(judged.judgment1));
            t.token_stream.push_back(policy_token(raw2));
            t.token_stream.push_back(environment_token("[image:" + image2.handle + "]"));
            t.token_stream.push_back(policy_token(judgment2));
            if (t.terminated) t.token_stream.push_back(policy_token(render_termination()));
            t.validate();
            slots[i].ok = std::move(record);
        } catch (const TeacherUnavailable&) {
            slots[i].rejection = "teacher-unavailable";
        } catch (const BackendUnavailable&) {
            slots[i].rejection = "backend-error";
        }
    });

    std::vector<SftRecord> out;
    for (auto& slot : slots) {
        if (slot.ok) {
            out.push_back(std::move(*slot.ok));
        } else {
            ++report.rejections[slot.rejection];
        }
    }
    report.retained = static_cast<int>(out.size());
    report.check();
    return out;
}

std::vector<SftRecord> Pipeline::consistency_screen(std::vector<SftRecord> records,
                                                    StageReport& report) {
    report.stage = "consistency_screen";
    report.input = static_cast<int>(records.size());
    std::vector<SftRecord> out;
    for (auto& record : records) {
        const Trajectory& t = record.trajectory;
        bool contradictory = false;
        for (const auto& round : t.rounds) {
            if (has_contradictory_verdicts(round.judgment.text)) contradictory = true;
        }
        const bool structural_mismatch =
            !t.rounds.empty() && t.rounds.back().verdict.satisfied != t.terminated;
        if (contradictory || structural_mismatch) {
            ++report.rejections["inconsistent"];
            continue;
        }
        out.push_back(std::move(record));
    }
    report.retained = static_cast<int>(out.size());
    report.check();
    return out;
}

std::vector<SftRecord> Pipeline::balanced_sample(std::vector<SftRecord> records,
                                                 StageReport& report) {
    report.stage = "balanced_sample";
    report.input = static_cast<int>(records.size());
    if (cfg_.corpus_size == 0) {
        report.retained = report.input;
        report.check();
        return records;
    }
    const int size = cfg_.corpus_size;
    std::map<std::string, std::vector<size_t>> members;
    for (size_t i = 0; i < records.size(); ++i) members[records[i].stratum()].push_back(i);

    if (static_cast<int>(records.size()) < size) {
        nlohmann::json achieved;
        for (const auto& [key, idx] : members) achieved[key] = idx.size();
        throw InsufficientStratum("accepted pool smaller than corpus size; available " +
                                  achieved.dump());
    }

    // Apportion over strata that both carry target mass and have members;
    // an empty stratum's mass spreads proportionally over the rest.
    std::map<std::string, double> active;
    for (const auto& [key, frac] : cfg_.strata_targets) {
        if (frac > 0.0 && members.count(key) && !members.at(key).empty()) active[key] = frac;
    }
    std::map<std::string, int> quota =
        active.empty() ? std::map<std::string, int>{} : apportion(active, size);

    int shortfall = size;
    for (auto& [key, q] : quota) {
        q = std::min(q, static_cast<int>(members.at(key).size()));
        shortfall -= q;
    }
    while (shortfall > 0) {
        bool progressed = false;
        for (auto& [key, idx] : members) {
            if (shortfall == 0) break;
            int& q = quota[key];
            if (q < static_cast<int>(idx.size())) {
                ++q;
                --shortfall;
                progressed = true;
            }
        }
        if (!progressed) {
            throw InsufficientStratum("cannot redistribute sampling shortfall");
        }
    }

    Rng rng(mix_seed({cfg_.seed, fnv1a64("balanced-sample")}));
    std::vector<SftRecord> out;
    out.reserve(static_cast<size_t>(size));
    for (const auto& [key, idx] : members) {
        const int take = quota.count(key) ? quota.at(key) : 0;
        report.notes["achieved " + key] = take;
        if (take == 0) continue;
        auto picks = rng.sample_without_replacement(idx.size(), static_cast<size_t>(take));
        std::sort(picks.begin(), picks.end());
        for (size_t p : picks) out.push_back(records[idx[p]]);
    }
    report.retained = static_cast<int>(out.size());
    report.rejections["not-sampled"] = report.input - report.retained;
    report.check();
    return out;
}

Pipeline::Outcome Pipeline::run(const std::vector<PoolCandidate>& pool) {
    Outcome outcome;
    outcome.reports.resize(6);

    std::vector<PoolCandidate> filtered = filter_pool(pool, outcome.reports[0]);
    std::vector<RoundOne> partials = synthesize_round_one(filtered, outcome.reports[1]);

    std::vector<SftRecord> terminal;
    std::vector<Judged> continuing;
    synthesize_judgment(partials, terminal, continuing, outcome.reports[2]);

    std::vector<SftRecord> reflected = synthesize_reflection(continuing, outcome.reports[3]);

    std::vector<SftRecord> merged;
    merged.reserve(terminal.size() + reflected.size());
    for (auto& r : terminal) merged.push_back(std::move(r));
    for (auto& r : reflected) merged.push_back(std::move(r));

    std::vector<SftRecord> consistent = consistency_screen(std::move(merged), outcome.reports[4]);
    outcome.corpus = balanced_sample(std::move(consistent), outcome.reports[5]);
    return outcome;
}

std::vector<CorpusViolation> validate_corpus(const std::vector<SftRecord>& records,
                                             const PipelineConfig& cfg) {
    std::vector<CorpusViolation> violations;
    for (size_t i = 0; i < records.size(); ++i) {
        const Trajectory& t = records[i].trajectory;
        for (const auto& token : t.token_stream) {
            if (token.loss_mask() != (token.source == TokenSource::policy)) {
                violations.push_back({i, "mask", "loss mask inconsistent with token source"});
            }
            if (!cfg.rubric.empty() && token.text.find(cfg.rubric) != std::string::npos) {
                violations.push_back({i, "rubric-leak", "judging rules serialized into tokens"});
            }
            if (token.source == TokenSource::policy) {
                for (const auto& phrase : cfg.hint_screen) {
                    if (contains_ci(token.text, phrase)) {
                        violations.push_back({i, "hint-leak", phrase});
                    }
                }
            }
        }
        for (const auto& round : t.rounds) {
            if (has_contradictory_verdicts(round.judgment.text)) {
                violations.push_back({i, "inconsistent", "contradictory verdict markers"});
            }
        }
        if (!t.rounds.empty() && t.rounds.back().verdict.satisfied != t.terminated) {
            violations.push_back({i, "inconsistent", "termination contradicts final verdict"});
        }
    }
    return violations;
}

double DiagnosticsReport::error_rate_percent() const {
    return percent_value(tool_errors, total);
}

double DiagnosticsReport::word_diff_leq5_percent() const {
    return percent_value(word_diff_leq5, with_rounds);
}

double DiagnosticsReport::reflection_improvement_percent() const {
    return percent_value(final_pass - round1_pass, with_rounds);
}

nlohmann::json DiagnosticsReport::to_json() const {
    return nlohmann::json{{"count", total},
                          {"error_rate", error_rate_percent()},
                          {"word_diff_leq5_rate", word_diff_leq5_percent()},
                          {"reflection_improvement", reflection_improvement_percent()}};
}

DiagnosticsReport diagnostics(const std::vector<Trajectory>& trajectories) {
    DiagnosticsReport report;
    report.total = static_cast<long long>(trajectories.size());
    for (const auto& t : trajectories) {
        if (t.tool_error) ++report.tool_errors;
        if (t.rounds.empty()) continue;
        ++report.with_rounds;
        const int diff = word_count(t.rounds.back().prompt.text) - word_count(t.query.text);
        if (diff <= 5) ++report.word_diff_leq5;
        if (t.rounds.front().verdict.satisfied) ++report.round1_pass;
        if (t.rounds.back().verdict.satisfied) ++report.final_pass;
    }
    return report;
}

}  // namespace agentloop::sft
