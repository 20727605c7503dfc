#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dcc/model_client.hpp"
#include "dcc/prompting.hpp"
#include "dcc/task.hpp"
#include "dcc/trace_parser.hpp"

namespace dcc {

// The three answers of one trace: original, counterfactual, and double
// counterfactual (the answer after the model inverts its own intervention).
// A triple is valid when all three are non-empty.
struct AnswerTriple {
    std::array<std::string, 3> answers;

    friend bool operator==(const AnswerTriple&, const AnswerTriple&) = default;
};

// The consistency indicator: first and third answers equal as normalized
// strings. Reads nothing but answers[0] and answers[2]; throws InvalidTriple
// when either of those is empty.
bool dcc_check(const AnswerTriple& triple);

enum class DccCallMode { SingleTrace, ThreeCall };
const char* dcc_call_mode_name(DccCallMode mode);

// One generation attempt, parsed. `triple` is set only when the completion
// yielded three non-empty answers in the expected scaffold.
struct TraceOutcome {
    std::optional<AnswerTriple> triple;
    std::vector<std::string> raws;  // byte-exact completions (1 or 3)
    ParseError parse_error = ParseError::None;
    bool wrong_kind = false;    // scaffold parsed but with the wrong answer count for the mode
    bool empty_answer = false;  // an answer normalized to the empty string
    bool unclosed_think = false;
};

// One completion, expected to contain all three segments.
TraceOutcome run_dcc_single_trace(const TaskInstance& instance, const PromptSpec& spec,
                                  const SamplingParams& params, Backend& backend,
                                  uint64_t run_seed, int attempt);

// Three sequential completions; each later call's prompt carries only the
// previous step's normalized answer, never its reasoning. Any step failing
// to parse aborts the attempt.
TraceOutcome run_dcc_three_call(const TaskInstance& instance, const PromptSpec& spec,
                                const SamplingParams& params, Backend& backend,
                                uint64_t run_seed, int attempt);

struct DccRecord {
    std::string instance_id;
    AnswerTriple triple;  // empty strings when parse_failure
    bool consistent = false;
    int attempts = 0;
    std::string final_answer;  // answers[0] of the accepted (or last parseable) attempt
    std::optional<bool> correct;  // vs gold, when gold is known
    std::vector<std::string> raw_completions;  // all attempts, in order
    DccCallMode mode = DccCallMode::SingleTrace;
    bool parse_failure = false;  // no attempt produced a valid triple
};

// Rejection sampling: draw fresh whole generations until the first and third
// answers agree, up to max_attempts. Parse failures consume attempts. On
// exhaustion the last parseable attempt is kept with consistent=false, or a
// parse-failure record if none parsed. Transport errors propagate; they are
// run-level failures, not sampling outcomes.
DccRecord sample_until_agreement(const TaskInstance& instance, const PromptSpec& spec,
                                 const SamplingParams& params, Backend& backend,
                                 int max_attempts, uint64_t run_seed, DccCallMode call_mode);

// Reward for an external training loop: 1.0 iff think-stripping plus
// scaffold parsing yields a valid triple whose first and third answers agree,
// 0.0 for everything else including malformed completions. Pure.
double dcc_reward(std::string_view completion);

// Two independent completions of the same single prompt; the answer counts
// only if both agree. An unparseable completion counts as disagreement.
struct AgreedAnswer {
    std::optional<std::string> agreed;
    std::array<std::optional<std::string>, 2> answers;  // per query, when parseable
    std::vector<std::string> raws;
    bool parse_failure = false;  // at least one query failed to parse
};

AgreedAnswer agreed_answer_query(const TaskInstance& instance, const PromptSpec& spec,
                                 const SamplingParams& params, Backend& backend,
                                 uint64_t run_seed);

nlohmann::json record_to_json(const DccRecord& record, bool include_raw);

}  // namespace dcc
