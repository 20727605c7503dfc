#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dcc/dcc_engine.hpp"
#include "dcc/model_client.hpp"
#include "dcc/prompting.hpp"
#include "dcc/task.hpp"

namespace dcc {

enum class RunMode { Base, Icl, Dcc, DccNoIcl, RewardExport };

const char* run_mode_name(RunMode mode);
std::optional<RunMode> run_mode_from_name(std::string_view name);
bool run_mode_is_dcc(RunMode mode);

struct RunConfig {
    RunMode mode = RunMode::Dcc;
    DccCallMode dcc_call = DccCallMode::SingleTrace;
    int n_batches = 15;
    int batch_size = 64;
    int icl_pool_size = 10;
    int icl_k = 2;
    int max_attempts = 16;
    bool full_set = false;  // evaluate the whole remainder once, no batch stats
    SamplingParams sampling;
    uint64_t seed = 0;
    ThinkPolicy think_policy = ThinkPolicy::Default;
    std::string system_preamble = std::string(kDefaultSystemPreamble);
    std::string model = "unknown";
    std::string dataset_name;
    int max_inflight = 8;
    bool include_raw = true;
    std::string exemplars_path;  // DCC exemplar JSONL; optional
};

// Flag-level validation; throws Config. RewardExport is rejected here: the
// reward surface is the dedicated subcommand, not an eval run.
void validate_run_config(const RunConfig& config);

// Seeded sample of pool_size instances for in-context use. The pool is in
// draw order; the remainder preserves input order; the two are disjoint.
// Throws PoolTooLarge when pool_size >= |instances| (the evaluation set would
// be empty or negative).
std::pair<std::vector<TaskInstance>, std::vector<TaskInstance>> select_icl_pool(
    const std::vector<TaskInstance>& instances, int pool_size, uint64_t seed);

// n_batches batches of batch_size indices into the remainder, sampled with
// replacement. Throws EmptyRemainder.
std::vector<std::vector<size_t>> make_batches(size_t remainder_size, int n_batches, int batch_size,
                                              uint64_t seed);

// Outcome of the two-query agreement protocol for one instance.
struct BaseQueryRecord {
    std::string instance_id;
    std::array<std::optional<std::string>, 2> answers;
    bool agreed = false;
    std::optional<std::string> agreed_answer;
    std::string final_answer;  // first query's answer; the accuracy@first quantity
    std::optional<bool> correct;
    std::optional<bool> agreed_correct;
    bool parse_failure = false;
    std::vector<std::string> raw_completions;
};

struct InstanceOutcome {
    std::string instance_id;
    std::optional<DccRecord> dcc;
    std::optional<BaseQueryRecord> base;
};

nlohmann::json base_record_to_json(const BaseQueryRecord& record, bool include_raw);
// One trace-log line. Carries the run mode and the prompt's exemplar count
// so protocol properties are checkable from the log alone.
nlohmann::json outcome_to_json(const InstanceOutcome& outcome, RunMode mode, int n_exemplars,
                               bool include_raw);

// Everything derivable before the first backend call: pool split, batch
// composition, exemplars and the prompt spec. Written into the manifest
// up front.
struct EvalPlan {
    std::vector<TaskInstance> pool;
    std::vector<TaskInstance> eval_instances;          // unique, in id order
    std::vector<std::vector<std::string>> batch_ids;   // empty when full_set
    std::vector<DccExemplar> exemplars;
    PromptSpec prompt_spec;
    uint64_t pool_seed = 0;
    uint64_t batch_seed = 0;
};

EvalPlan plan_eval(const RunConfig& config, const std::vector<TaskInstance>& instances);

struct RunResult {
    std::vector<InstanceOutcome> outcomes;  // committed prefix, in plan order
    bool aborted = false;
    std::string abort_reason;
};

// Evaluates the plan's instances on a bounded worker pool. Records are
// committed in plan order and streamed to trace_out (one JSON line each,
// flushed) as soon as their prefix is complete, so an interrupted run leaves
// a valid trace log. A transport-level failure stops the run and flushes
// what finished; per-instance parse failures are ordinary outcomes.
RunResult execute_plan(const RunConfig& config, const EvalPlan& plan, Backend& backend,
                       std::ostream* trace_out);

}  // namespace dcc
