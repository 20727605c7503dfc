#include "dcc/dcc_engine.hpp"

#include "dcc/errors.hpp"
#include "dcc/rng.hpp"

namespace dcc {

bool dcc_check(const AnswerTriple& triple) {
    if (triple.answers[0].empty() || triple.answers[2].empty()) {
        throw DccError(Errc::InvalidTriple, "empty answer in triple");
    }
    return triple.answers[0] == triple.answers[2];
}

const char* dcc_call_mode_name(DccCallMode mode) {
    return mode == DccCallMode::SingleTrace ? "single-trace" : "three-call";
}

namespace {

// Parses one completion into k answers of the expected cardinality; fills
// outcome flags on failure and returns the answers on success.
std::optional<std::vector<std::string>> parse_completion(const std::string& raw,
                                                         TraceKind expected,
                                                         TraceOutcome* outcome) {
    auto stripped = strip_think_blocks(raw);
    outcome->unclosed_think = outcome->unclosed_think || stripped.unclosed_tag;
    ParseError err = ParseError::None;
    auto parsed = parse_scaffold(stripped.text, &err);
    if (!parsed) {
        outcome->parse_error = err;
        return std::nullopt;
    }
    if (parsed->kind != expected) {
        outcome->wrong_kind = true;
        return std::nullopt;
    }
    for (const auto& a : parsed->answers) {
        if (a.empty()) {
            outcome->empty_answer = true;
            return std::nullopt;
        }
    }
    return parsed->answers;
}

}  // namespace

TraceOutcome run_dcc_single_trace(const TaskInstance& instance, const PromptSpec& spec,
                                  const SamplingParams& params, Backend& backend,
                                  uint64_t run_seed, int attempt) {
    TraceOutcome outcome;
    MessageList prompt = render_dcc_prompt(instance, spec);
    SamplingParams p = params;
    p.n = 1;
    p.seed = derive_request_seed(run_seed, instance.id, attempt, 0);
    auto raws = backend.complete(prompt, p, RequestTag{instance.id, attempt, 0});
    outcome.raws.push_back(raws.at(0));
    auto answers = parse_completion(outcome.raws[0], TraceKind::Triple, &outcome);
    if (answers) {
        outcome.triple = AnswerTriple{{(*answers)[0], (*answers)[1], (*answers)[2]}};
    }
    return outcome;
}

TraceOutcome run_dcc_three_call(const TaskInstance& instance, const PromptSpec& spec,
                                const SamplingParams& params, Backend& backend,
                                uint64_t run_seed, int attempt) {
    TraceOutcome outcome;
    AnswerTriple triple;
    std::string previous;
    for (int step = 0; step < 3; ++step) {
        MessageList prompt = render_dcc_step_prompt(instance, spec, step, previous);
        SamplingParams p = params;
        p.n = 1;
        p.seed = derive_request_seed(run_seed, instance.id, attempt, step);
        auto raws = backend.complete(prompt, p, RequestTag{instance.id, attempt, step});
        outcome.raws.push_back(raws.at(0));
        auto answers = parse_completion(outcome.raws.back(), TraceKind::Single, &outcome);
        if (!answers) return outcome;  // a failed step aborts the attempt
        triple.answers[static_cast<size_t>(step)] = (*answers)[0];
        previous = (*answers)[0];
    }
    outcome.triple = triple;
    return outcome;
}

DccRecord sample_until_agreement(const TaskInstance& instance, const PromptSpec& spec,
                                 const SamplingParams& params, Backend& backend,
                                 int max_attempts, uint64_t run_seed, DccCallMode call_mode) {
    if (max_attempts < 1) throw DccError(Errc::Config, "max_attempts must be >= 1");
    DccRecord record;
    record.instance_id = instance.id;
    record.mode = call_mode;

    std::optional<AnswerTriple> last_parsed;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        TraceOutcome outcome = call_mode == DccCallMode::SingleTrace
                                   ? run_dcc_single_trace(instance, spec, params, backend,
                                                          run_seed, attempt)
                                   : run_dcc_three_call(instance, spec, params, backend,
                                                        run_seed, attempt);
        for (auto& raw : outcome.raws) record.raw_completions.push_back(std::move(raw));
        if (!outcome.triple) continue;  // parse failures consume the attempt
        last_parsed = outcome.triple;
        if (dcc_check(*outcome.triple)) {
            record.triple = *outcome.triple;
            record.consistent = true;
            record.attempts = attempt + 1;
            record.final_answer = record.triple.answers[0];
            break;
        }
    }
    if (!record.consistent) {
        record.attempts = max_attempts;
        if (last_parsed) {
            record.triple = *last_parsed;
            record.final_answer = record.triple.answers[0];
        } else {
            record.parse_failure = true;
        }
    }
    if (instance.gold_answer) {
        record.correct = !record.final_answer.empty() &&
                         record.final_answer == *instance.gold_answer;
    }
    return record;
}

double dcc_reward(std::string_view completion) {
    auto stripped = strip_think_blocks(completion);
    auto parsed = parse_scaffold(stripped.text);
    if (!parsed || parsed->kind != TraceKind::Triple) return 0.0;
    for (const auto& a : parsed->answers) {
        if (a.empty()) return 0.0;
    }
    return parsed->answers[0] == parsed->answers[2] ? 1.0 : 0.0;
}

AgreedAnswer agreed_answer_query(const TaskInstance& instance, const PromptSpec& spec,
                                 const SamplingParams& params, Backend& backend,
                                 uint64_t run_seed) {
    AgreedAnswer result;
    MessageList prompt = render_single_prompt(instance, spec);
    for (int query = 0; query < 2; ++query) {
        SamplingParams p = params;
        p.n = 1;
        p.seed = derive_request_seed(run_seed, instance.id, query, 0);
        auto raws = backend.complete(prompt, p, RequestTag{instance.id, query, 0});
        result.raws.push_back(raws.at(0));
        TraceOutcome scratch;
        auto answers = parse_completion(result.raws.back(), TraceKind::Single, &scratch);
        if (answers) {
            result.answers[static_cast<size_t>(query)] = (*answers)[0];
        } else {
            result.parse_failure = true;
        }
    }
    if (result.answers[0] && result.answers[1] && *result.answers[0] == *result.answers[1]) {
        result.agreed = result.answers[0];
    }
    return result;
}

nlohmann::json record_to_json(const DccRecord& record, bool include_raw) {
    nlohmann::json j{{"instance_id", record.instance_id},
                     {"mode", dcc_call_mode_name(record.mode)},
                     {"consistent", record.consistent},
                     {"attempts", record.attempts},
                     {"final_answer", record.final_answer},
                     {"parse_failure", record.parse_failure}};
    if (record.parse_failure) {
        j["triple"] = nullptr;
    } else {
        j["triple"] = record.triple.answers;
    }
    j["correct"] = record.correct ? nlohmann::json(*record.correct) : nlohmann::json(nullptr);
    if (include_raw) j["raw_completions"] = record.raw_completions;
    return j;
}

}  // namespace dcc
