#include "dcc/orchestrator.hpp"

#include <algorithm>
#include <condition_variable>
#include <iostream>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "dcc/errors.hpp"
#include "dcc/rng.hpp"

namespace dcc {
namespace {

constexpr std::string_view kPoolSeedTag = "icl-pool";
constexpr std::string_view kBatchSeedTag = "batches";

constexpr std::string_view kFallbackReasoning =
    "The answer follows directly from the problem statement.";
constexpr std::string_view kIdentityFwd =
    "Suppose nothing about the problem changes.";
constexpr std::string_view kIdentityInv =
    "Suppose the problem is restored to its original state.";
constexpr std::string_view kIdentityRestoreReasoning =
    "The intervention is undone, so the original answer holds.";

}  // namespace

const char* run_mode_name(RunMode mode) {
    switch (mode) {
        case RunMode::Base: return "base";
        case RunMode::Icl: return "icl";
        case RunMode::Dcc: return "dcc";
        case RunMode::DccNoIcl: return "dcc-noicl";
        case RunMode::RewardExport: return "reward-export";
    }
    return "?";
}

std::optional<RunMode> run_mode_from_name(std::string_view name) {
    for (RunMode m : {RunMode::Base, RunMode::Icl, RunMode::Dcc, RunMode::DccNoIcl,
                      RunMode::RewardExport}) {
        if (name == run_mode_name(m)) return m;
    }
    return std::nullopt;
}

bool run_mode_is_dcc(RunMode mode) {
    return mode == RunMode::Dcc || mode == RunMode::DccNoIcl;
}

void validate_run_config(const RunConfig& config) {
    if (config.mode == RunMode::RewardExport) {
        throw DccError(Errc::Config,
                       "reward-export is not an eval mode; use the reward subcommand");
    }
    if (config.n_batches < 1) throw DccError(Errc::Config, "n_batches must be >= 1");
    if (config.batch_size < 1) throw DccError(Errc::Config, "batch_size must be >= 1");
    if (config.icl_pool_size < 0) throw DccError(Errc::Config, "icl_pool_size must be >= 0");
    if (config.icl_k < 0) throw DccError(Errc::Config, "icl_k must be >= 0");
    if (config.max_attempts < 1) throw DccError(Errc::Config, "max_attempts must be >= 1");
    if (config.max_inflight < 1) throw DccError(Errc::Config, "max_inflight must be >= 1");
    bool needs_exemplars = config.mode == RunMode::Icl || config.mode == RunMode::Dcc;
    if (needs_exemplars && config.icl_k < 1) {
        throw DccError(Errc::Config, "icl_k must be >= 1 for exemplar modes");
    }
    if (needs_exemplars && config.exemplars_path.empty() &&
        config.icl_k > config.icl_pool_size) {
        throw DccError(Errc::Config, "icl_k exceeds icl_pool_size and no exemplar file given");
    }
}

std::pair<std::vector<TaskInstance>, std::vector<TaskInstance>> select_icl_pool(
    const std::vector<TaskInstance>& instances, int pool_size, uint64_t seed) {
    if (pool_size < 0) throw DccError(Errc::Config, "pool_size must be >= 0");
    if (static_cast<size_t>(pool_size) >= instances.size() && pool_size > 0) {
        throw DccError(Errc::PoolTooLarge,
                       "pool of " + std::to_string(pool_size) + " from " +
                           std::to_string(instances.size()) + " instances leaves nothing to evaluate");
    }
    std::vector<size_t> idx(instances.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    Rng rng(seed);
    // Partial Fisher-Yates: the first pool_size slots are the draw.
    for (size_t i = 0; i < static_cast<size_t>(pool_size); ++i) {
        size_t j = i + static_cast<size_t>(rng.below(static_cast<uint64_t>(idx.size() - i)));
        std::swap(idx[i], idx[j]);
    }
    std::vector<TaskInstance> pool;
    pool.reserve(static_cast<size_t>(pool_size));
    for (size_t i = 0; i < static_cast<size_t>(pool_size); ++i) pool.push_back(instances[idx[i]]);

    std::vector<size_t> rest(idx.begin() + pool_size, idx.end());
    std::sort(rest.begin(), rest.end());  // remainder keeps input order
    std::vector<TaskInstance> remainder;
    remainder.reserve(rest.size());
    for (size_t i : rest) remainder.push_back(instances[i]);
    return {std::move(pool), std::move(remainder)};
}

std::vector<std::vector<size_t>> make_batches(size_t remainder_size, int n_batches,
                                              int batch_size, uint64_t seed) {
    if (remainder_size == 0) {
        throw DccError(Errc::EmptyRemainder, "no instances left to batch");
    }
    Rng rng(seed);
    std::vector<std::vector<size_t>> batches(static_cast<size_t>(n_batches));
    for (auto& batch : batches) {
        batch.reserve(static_cast<size_t>(batch_size));
        for (int k = 0; k < batch_size; ++k) {
            batch.push_back(static_cast<size_t>(rng.below(remainder_size)));
        }
    }
    return batches;
}

nlohmann::json base_record_to_json(const BaseQueryRecord& record, bool include_raw) {
    nlohmann::json j;
    j["instance_id"] = record.instance_id;
    nlohmann::json answers = nlohmann::json::array();
    for (const auto& a : record.answers) {
        if (a) answers.push_back(*a);
        else answers.push_back(nullptr);
    }
    j["answers"] = std::move(answers);
    j["agreed"] = record.agreed;
    if (record.agreed_answer) j["agreed_answer"] = *record.agreed_answer;
    else j["agreed_answer"] = nullptr;
    j["final_answer"] = record.final_answer;
    if (record.correct) j["correct"] = *record.correct;
    else j["correct"] = nullptr;
    if (record.agreed_correct) j["agreed_correct"] = *record.agreed_correct;
    else j["agreed_correct"] = nullptr;
    j["parse_failure"] = record.parse_failure;
    if (include_raw) j["raw_completions"] = record.raw_completions;
    return j;
}

nlohmann::json outcome_to_json(const InstanceOutcome& outcome, RunMode mode, int n_exemplars,
                               bool include_raw) {
    nlohmann::json j;
    if (outcome.dcc) {
        j = record_to_json(*outcome.dcc, include_raw);
    } else if (outcome.base) {
        j = base_record_to_json(*outcome.base, include_raw);
    } else {
        j["instance_id"] = outcome.instance_id;
    }
    j["run_mode"] = run_mode_name(mode);
    j["n_exemplars"] = n_exemplars;
    return j;
}

namespace {

// A degenerate exemplar whose intervention changes nothing: it demonstrates
// the three-step format with answer1 == answer0. Used only when a DCC run
// has no exemplar file.
DccExemplar identity_exemplar(const TaskInstance& inst) {
    DccExemplar ex;
    ex.question = inst.question;
    ex.answer0 = *inst.gold_answer;
    ex.answer1 = *inst.gold_answer;
    ex.answer0_again = *inst.gold_answer;
    ex.intervention_fwd = std::string(kIdentityFwd);
    ex.intervention_inv = std::string(kIdentityInv);
    std::string reasoning = inst.rationale.empty() ? std::string(kFallbackReasoning)
                                                   : inst.rationale;
    ex.reasoning0 = reasoning;
    ex.reasoning1 = "Nothing changed, so the answer is unchanged.";
    ex.reasoning2 = std::string(kIdentityRestoreReasoning);
    return ex;
}

std::vector<DccExemplar> exemplars_from_pool(const std::vector<TaskInstance>& pool, int icl_k,
                                             bool dcc_shape) {
    std::vector<DccExemplar> out;
    for (const auto& inst : pool) {
        if (static_cast<int>(out.size()) == icl_k) break;
        if (!inst.gold_answer || inst.gold_answer->empty()) continue;
        if (dcc_shape) {
            out.push_back(identity_exemplar(inst));
        } else {
            DccExemplar ex;
            ex.question = inst.question;
            ex.answer0 = *inst.gold_answer;
            ex.answer0_again = *inst.gold_answer;
            ex.reasoning0 = inst.rationale.empty() ? std::string(kFallbackReasoning)
                                                   : inst.rationale;
            out.push_back(std::move(ex));
        }
    }
    if (static_cast<int>(out.size()) < icl_k) {
        throw DccError(Errc::Config,
                       "pool yields only " + std::to_string(out.size()) + " of " +
                           std::to_string(icl_k) + " exemplars with known answers");
    }
    return out;
}

}  // namespace

EvalPlan plan_eval(const RunConfig& config, const std::vector<TaskInstance>& instances) {
    validate_run_config(config);
    if (instances.empty()) throw DccError(Errc::EmptyRecords, "no instances to evaluate");

    EvalPlan plan;
    plan.pool_seed = mix_seed(config.seed, fnv1a64(kPoolSeedTag));
    plan.batch_seed = mix_seed(config.seed, fnv1a64(kBatchSeedTag));

    std::vector<TaskInstance> remainder;
    std::tie(plan.pool, remainder) = select_icl_pool(instances, config.icl_pool_size,
                                                     plan.pool_seed);

    switch (config.mode) {
        case RunMode::Icl:
            plan.exemplars = exemplars_from_pool(plan.pool, config.icl_k, /*dcc_shape=*/false);
            break;
        case RunMode::Dcc:
            if (!config.exemplars_path.empty()) {
                auto loaded = load_exemplars_jsonl(config.exemplars_path);
                if (static_cast<int>(loaded.size()) < config.icl_k) {
                    throw DccError(Errc::MissingExemplars,
                                   config.exemplars_path + " holds " +
                                       std::to_string(loaded.size()) + " exemplars, need " +
                                       std::to_string(config.icl_k));
                }
                loaded.resize(static_cast<size_t>(config.icl_k));
                plan.exemplars = std::move(loaded);
            } else {
                std::cerr << "warning: no exemplar file; using identity exemplars "
                             "derived from the pool\n";
                plan.exemplars = exemplars_from_pool(plan.pool, config.icl_k, /*dcc_shape=*/true);
            }
            break;
        case RunMode::Base:
        case RunMode::DccNoIcl:
            break;
        case RunMode::RewardExport:
            throw DccError(Errc::Config, "unreachable");
    }

    // Instances that literally appear in the prompt are never evaluated.
    std::set<std::string> exemplar_questions;
    for (const auto& ex : plan.exemplars) exemplar_questions.insert(ex.question);
    std::vector<TaskInstance> eval_pool;
    eval_pool.reserve(remainder.size());
    for (auto& inst : remainder) {
        if (exemplar_questions.count(inst.question)) continue;
        eval_pool.push_back(std::move(inst));
    }
    if (eval_pool.empty()) throw DccError(Errc::EmptyRemainder, "exemplars shadow every instance");

    std::set<std::string> wanted_ids;
    if (config.full_set) {
        for (const auto& inst : eval_pool) wanted_ids.insert(inst.id);
    } else {
        auto batches = make_batches(eval_pool.size(), config.n_batches, config.batch_size,
                                    plan.batch_seed);
        for (const auto& batch : batches) {
            std::vector<std::string> ids;
            ids.reserve(batch.size());
            for (size_t idx : batch) {
                ids.push_back(eval_pool[idx].id);
                wanted_ids.insert(eval_pool[idx].id);
            }
            plan.batch_ids.push_back(std::move(ids));
        }
    }

    // Evaluation order is id order: stable across input shuffles.
    for (auto& inst : eval_pool) {
        if (wanted_ids.count(inst.id)) plan.eval_instances.push_back(std::move(inst));
    }
    std::sort(plan.eval_instances.begin(), plan.eval_instances.end(),
              [](const TaskInstance& a, const TaskInstance& b) { return a.id < b.id; });

    PromptSpec spec;
    spec.think_policy = config.think_policy;
    spec.system_preamble = config.system_preamble;
    spec.icl_required = config.icl_k;
    switch (config.mode) {
        case RunMode::Base: spec.mode = PromptMode::Base; break;
        case RunMode::Icl:
            spec.mode = PromptMode::Icl;
            spec.icl_exemplars = plan.exemplars;
            break;
        case RunMode::Dcc:
            spec.mode = PromptMode::DccIcl;
            spec.icl_exemplars = plan.exemplars;
            break;
        case RunMode::DccNoIcl: spec.mode = PromptMode::DccInstructionOnly; break;
        case RunMode::RewardExport: throw DccError(Errc::Config, "unreachable");
    }
    validate_prompt_spec(spec);
    plan.prompt_spec = std::move(spec);
    return plan;
}

namespace {

InstanceOutcome evaluate_one(const RunConfig& config, const EvalPlan& plan,
                             const TaskInstance& inst, Backend& backend) {
    InstanceOutcome outcome;
    outcome.instance_id = inst.id;
    if (run_mode_is_dcc(config.mode)) {
        outcome.dcc = sample_until_agreement(inst, plan.prompt_spec, config.sampling, backend,
                                             config.max_attempts, config.seed, config.dcc_call);
        return outcome;
    }
    AgreedAnswer aa = agreed_answer_query(inst, plan.prompt_spec, config.sampling, backend,
                                          config.seed);
    BaseQueryRecord rec;
    rec.instance_id = inst.id;
    rec.answers = aa.answers;
    rec.agreed = aa.agreed.has_value();
    rec.agreed_answer = aa.agreed;
    rec.final_answer = aa.answers[0].value_or("");
    rec.parse_failure = aa.parse_failure;
    rec.raw_completions = aa.raws;
    if (inst.gold_answer) {
        rec.correct = !rec.final_answer.empty() && rec.final_answer == *inst.gold_answer;
        rec.agreed_correct = aa.agreed.has_value() && *aa.agreed == *inst.gold_answer;
    }
    outcome.base = std::move(rec);
    return outcome;
}

}  // namespace

RunResult execute_plan(const RunConfig& config, const EvalPlan& plan, Backend& backend,
                       std::ostream* trace_out) {
    const auto& work = plan.eval_instances;
    const size_t n = work.size();
    const int n_exemplars = static_cast<int>(plan.exemplars.size());

    std::vector<std::optional<InstanceOutcome>> slots(n);
    std::vector<bool> done(n, false);
    std::atomic<size_t> next{0};
    std::atomic<bool> abort{false};
    std::mutex mu;
    size_t committed = 0;
    RunResult result;

    auto commit_ready = [&]() {
        // Caller holds mu. Streams the maximal complete prefix.
        while (committed < n && done[committed]) {
            if (!slots[committed]) break;  // failed slot: commit stops here for good
            if (trace_out) {
                *trace_out << outcome_to_json(*slots[committed], config.mode, n_exemplars,
                                              config.include_raw)
                               .dump()
                           << '\n';
                trace_out->flush();
            }
            result.outcomes.push_back(std::move(*slots[committed]));
            slots[committed].reset();
            ++committed;
        }
    };

    auto worker = [&]() {
        while (!abort.load()) {
            size_t i = next.fetch_add(1);
            if (i >= n) break;
            std::optional<InstanceOutcome> outcome;
            try {
                outcome = evaluate_one(config, plan, work[i], backend);
            } catch (const DccError& e) {
                std::lock_guard<std::mutex> lock(mu);
                if (!abort.load()) result.abort_reason = e.what();  // first failure wins
                abort.store(true);
            }
            std::lock_guard<std::mutex> lock(mu);
            slots[i] = std::move(outcome);
            done[i] = true;
            commit_ready();
        }
    };

    size_t n_workers = std::min<size_t>(static_cast<size_t>(config.max_inflight), std::max<size_t>(n, 1));
    std::vector<std::thread> threads;
    threads.reserve(n_workers);
    for (size_t t = 0; t < n_workers; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    {
        std::lock_guard<std::mutex> lock(mu);
        commit_ready();
    }
    result.aborted = abort.load();
    if (result.aborted && result.abort_reason.empty()) result.abort_reason = "backend failure";
    return result;
}

}  // namespace dcc
