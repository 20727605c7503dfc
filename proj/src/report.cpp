#include "dcc/report.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "dcc/errors.hpp"
#include "dcc/sha256.hpp"
#include "dcc/trace_parser.hpp"

namespace dcc {

std::map<std::string, std::string> gold_map(const std::vector<TaskInstance>& instances) {
    std::map<std::string, std::string> gold;
    for (const auto& inst : instances) {
        if (inst.gold_answer && !inst.gold_answer->empty()) gold[inst.id] = *inst.gold_answer;
    }
    return gold;
}

namespace {

struct RecordView {
    bool is_dcc = false;
    bool agreed = false;       // consistent (DCC) or two-query agreement (base)
    bool has_gold = false;
    bool first_correct = false;
    bool agreed_correct = false;
    int attempts = 0;
    bool parse_failure = false;
};

RecordView view_of(const InstanceOutcome& outcome, const std::map<std::string, std::string>& gold) {
    RecordView v;
    auto it = gold.find(outcome.instance_id);
    v.has_gold = it != gold.end();
    if (outcome.dcc) {
        const DccRecord& r = *outcome.dcc;
        v.is_dcc = true;
        v.agreed = r.consistent;
        v.attempts = r.attempts;
        v.parse_failure = r.parse_failure;
        if (v.has_gold) {
            v.first_correct = !r.final_answer.empty() && r.final_answer == it->second;
            // The sampled answer is agreed-upon only when the run converged.
            v.agreed_correct = r.consistent && v.first_correct;
        }
    } else if (outcome.base) {
        const BaseQueryRecord& r = *outcome.base;
        v.agreed = r.agreed;
        v.parse_failure = r.parse_failure;
        if (v.has_gold) {
            v.first_correct = !r.final_answer.empty() && r.final_answer == it->second;
            v.agreed_correct = r.agreed_answer && *r.agreed_answer == it->second;
        }
    }
    return v;
}

}  // namespace

ModeMetrics compute_metrics(const std::vector<const InstanceOutcome*>& records,
                            const std::map<std::string, std::string>& gold) {
    if (records.empty()) throw DccError(Errc::EmptyRecords, "no records to aggregate");
    ModeMetrics m;
    m.n = records.size();
    size_t n_dcc = 0, n_consistent = 0, n_gold = 0, n_first_correct = 0;
    size_t n_agreed_gold = 0, n_agreed_correct = 0, n_parse_fail = 0;
    long long attempt_sum = 0;
    for (const InstanceOutcome* rec : records) {
        RecordView v = view_of(*rec, gold);
        if (v.is_dcc) {
            ++n_dcc;
            attempt_sum += v.attempts;
            if (v.agreed) ++n_consistent;
        }
        if (v.has_gold) {
            ++n_gold;
            if (v.first_correct) ++n_first_correct;
            if (v.agreed) ++n_agreed_gold;
            if (v.agreed_correct) ++n_agreed_correct;
        }
        if (v.parse_failure) ++n_parse_fail;
    }
    if (n_dcc == m.n) {
        m.dcc_rate = static_cast<double>(n_consistent) / static_cast<double>(m.n);
        m.mean_attempts = static_cast<double>(attempt_sum) / static_cast<double>(m.n);
    }
    if (n_gold > 0) {
        m.accuracy_first = static_cast<double>(n_first_correct) / static_cast<double>(n_gold);
        m.accuracy_agreed_strict =
            static_cast<double>(n_agreed_correct) / static_cast<double>(n_gold);
    }
    if (n_agreed_gold > 0) {
        m.accuracy_agreed_conditional =
            static_cast<double>(n_agreed_correct) / static_cast<double>(n_agreed_gold);
    }
    m.parse_failure_rate = static_cast<double>(n_parse_fail) / static_cast<double>(m.n);
    return m;
}

ModeMetrics compute_metrics(const std::vector<InstanceOutcome>& records,
                            const std::map<std::string, std::string>& gold) {
    std::vector<const InstanceOutcome*> ptrs;
    ptrs.reserve(records.size());
    for (const auto& r : records) ptrs.push_back(&r);
    return compute_metrics(ptrs, gold);
}

namespace {

nlohmann::json opt_to_json(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

}  // namespace

nlohmann::json metrics_to_json(const ModeMetrics& m) {
    nlohmann::json j;
    j["n"] = m.n;
    j["dcc_rate"] = opt_to_json(m.dcc_rate);
    j["mean_attempts"] = opt_to_json(m.mean_attempts);
    j["accuracy_first"] = opt_to_json(m.accuracy_first);
    j["accuracy_agreed_strict"] = opt_to_json(m.accuracy_agreed_strict);
    j["accuracy_agreed_conditional"] = opt_to_json(m.accuracy_agreed_conditional);
    j["parse_failure_rate"] = m.parse_failure_rate;
    return j;
}

nlohmann::json batch_metrics_to_json(const std::vector<InstanceOutcome>& outcomes,
                                     const std::vector<std::vector<std::string>>& batch_ids,
                                     const std::map<std::string, std::string>& gold) {
    std::map<std::string, const InstanceOutcome*> by_id;
    for (const auto& o : outcomes) by_id[o.instance_id] = &o;

    std::vector<ModeMetrics> per_batch;
    for (const auto& batch : batch_ids) {
        std::vector<const InstanceOutcome*> records;
        records.reserve(batch.size());
        for (const auto& id : batch) {
            auto it = by_id.find(id);
            if (it == by_id.end()) {
                throw DccError(Errc::EmptyRecords, "batch references unevaluated instance " + id);
            }
            records.push_back(it->second);  // with replacement: duplicates count again
        }
        per_batch.push_back(compute_metrics(records, gold));
    }

    auto stat_block = [&](auto getter) {
        nlohmann::json block;
        nlohmann::json values = nlohmann::json::array();
        std::vector<double> defined;
        for (const auto& m : per_batch) {
            std::optional<double> v = getter(m);
            values.push_back(opt_to_json(v));
            if (v) defined.push_back(*v);
        }
        block["values"] = std::move(values);
        block["n_defined"] = defined.size();
        if (defined.empty()) {
            block["mean"] = nullptr;
            block["stddev"] = nullptr;
            block["stderr"] = nullptr;
            return block;
        }
        double sum = 0.0;
        for (double v : defined) sum += v;
        double mean = sum / static_cast<double>(defined.size());
        block["mean"] = mean;
        if (defined.size() < 2) {
            block["stddev"] = nullptr;
            block["stderr"] = nullptr;
            return block;
        }
        double ss = 0.0;
        for (double v : defined) ss += (v - mean) * (v - mean);
        double stddev = std::sqrt(ss / static_cast<double>(defined.size() - 1));
        block["stddev"] = stddev;
        block["stderr"] = stddev / std::sqrt(static_cast<double>(defined.size()));
        return block;
    };

    nlohmann::json j;
    j["n_batches"] = per_batch.size();
    j["dcc_rate"] = stat_block([](const ModeMetrics& m) { return m.dcc_rate; });
    j["mean_attempts"] = stat_block([](const ModeMetrics& m) { return m.mean_attempts; });
    j["accuracy_first"] = stat_block([](const ModeMetrics& m) { return m.accuracy_first; });
    j["accuracy_agreed_strict"] =
        stat_block([](const ModeMetrics& m) { return m.accuracy_agreed_strict; });
    j["accuracy_agreed_conditional"] =
        stat_block([](const ModeMetrics& m) { return m.accuracy_agreed_conditional; });
    j["parse_failure_rate"] = stat_block(
        [](const ModeMetrics& m) { return std::optional<double>(m.parse_failure_rate); });
    return j;
}

namespace {

std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

nlohmann::json build_manifest(const RunConfig& config, const EvalPlan& plan,
                              const std::string& backend_name, bool backend_deterministic) {
    nlohmann::json cfg;
    cfg["mode"] = run_mode_name(config.mode);
    cfg["dcc_call"] = dcc_call_mode_name(config.dcc_call);
    cfg["n_batches"] = config.n_batches;
    cfg["batch_size"] = config.batch_size;
    cfg["icl_pool_size"] = config.icl_pool_size;
    cfg["icl_k"] = config.icl_k;
    cfg["max_attempts"] = config.max_attempts;
    cfg["full_set"] = config.full_set;
    cfg["seed"] = config.seed;
    cfg["sampling"] = {{"temperature", config.sampling.temperature},
                       {"top_p", config.sampling.top_p},
                       {"max_tokens", config.sampling.max_new_tokens},
                       {"n", config.sampling.n}};
    cfg["think_policy"] =
        config.think_policy == ThinkPolicy::SuppressThinking ? "suppress" : "default";
    cfg["model"] = config.model;
    cfg["dataset"] = config.dataset_name;
    cfg["max_inflight"] = config.max_inflight;
    cfg["include_raw"] = config.include_raw;
    cfg["exemplars_path"] = config.exemplars_path;

    nlohmann::json hashes;
    hashes["system_preamble"] = sha256_hex(config.system_preamble);
    hashes["dcc_step_instructions"] = sha256_hex(kDccStepInstructions);
    nlohmann::json exemplar_hashes = nlohmann::json::array();
    for (const auto& ex : plan.exemplars) {
        std::string block = config.mode == RunMode::Icl ? render_icl_exemplar_block(ex)
                                                        : render_dcc_exemplar_block(ex);
        exemplar_hashes.push_back(sha256_hex(block));
    }
    hashes["exemplar_blocks"] = std::move(exemplar_hashes);

    nlohmann::json m;
    m["config"] = std::move(cfg);
    m["backend"] = {{"name", backend_name}, {"deterministic", backend_deterministic}};
    m["normalization_version"] = kNormalizationVersion;
    m["prompt_hashes"] = std::move(hashes);
    m["seeds"] = {{"run", config.seed}, {"pool", plan.pool_seed}, {"batches", plan.batch_seed}};
    nlohmann::json pool_ids = nlohmann::json::array();
    for (const auto& inst : plan.pool) pool_ids.push_back(inst.id);
    m["icl_pool"] = std::move(pool_ids);
    m["batches"] = plan.batch_ids;
    nlohmann::json eval_ids = nlohmann::json::array();
    for (const auto& inst : plan.eval_instances) eval_ids.push_back(inst.id);
    m["eval_instances"] = std::move(eval_ids);
    // Wall-clock stamps would break byte-reproducibility of deterministic runs.
    if (!backend_deterministic) m["timestamp_utc"] = utc_timestamp();
    return m;
}

nlohmann::json build_report(const RunConfig& config, const EvalPlan& plan,
                            const RunResult* result,
                            const std::map<std::string, std::string>& gold,
                            const std::string& backend_name, bool backend_deterministic,
                            const std::string& status) {
    nlohmann::json j;
    j["schema"] = "dcc-report/1";
    j["model"] = config.model;
    j["dataset"] = config.dataset_name;
    j["run_mode"] = run_mode_name(config.mode);
    j["status"] = status;
    j["manifest"] = build_manifest(config, plan, backend_name, backend_deterministic);
    if (!result) {
        j["n_records"] = 0;
        j["metrics"] = nullptr;
        j["batch_metrics"] = nullptr;
        j["abort_reason"] = nullptr;
        return j;
    }
    j["n_records"] = result->outcomes.size();
    j["abort_reason"] = result->aborted ? nlohmann::json(result->abort_reason) : nullptr;
    if (result->outcomes.empty()) {
        j["metrics"] = nullptr;
        j["batch_metrics"] = nullptr;
        return j;
    }
    j["metrics"] = metrics_to_json(compute_metrics(result->outcomes, gold));
    // Batch spread is meaningful only when every batch member finished.
    if (!plan.batch_ids.empty() && !result->aborted) {
        j["batch_metrics"] = batch_metrics_to_json(result->outcomes, plan.batch_ids, gold);
    } else {
        j["batch_metrics"] = nullptr;
    }
    return j;
}

namespace {

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

std::string format_metric(const nlohmann::json& v) {
    if (v.is_null()) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v.get<double>());
    return buf;
}

}  // namespace

std::string reports_to_csv(const std::vector<nlohmann::json>& reports) {
    std::string out = "model,dataset,mode,dcc_rate,accuracy\n";
    for (const auto& r : reports) {
        nlohmann::json dcc_rate = nullptr;
        nlohmann::json accuracy = nullptr;
        if (r.contains("metrics") && r["metrics"].is_object()) {
            dcc_rate = r["metrics"].value("dcc_rate", nlohmann::json(nullptr));
            accuracy = r["metrics"].value("accuracy_first", nlohmann::json(nullptr));
        }
        out += csv_escape(r.value("model", std::string{})) + ',';
        out += csv_escape(r.value("dataset", std::string{})) + ',';
        out += csv_escape(r.value("run_mode", std::string{})) + ',';
        out += format_metric(dcc_rate) + ',';
        out += format_metric(accuracy) + '\n';
    }
    return out;
}

std::string report_json_text(const nlohmann::json& report) {
    return report.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DccError(Errc::Io, "cannot open " + path + " for writing");
    out << content;
    out.flush();
    if (!out) throw DccError(Errc::Io, "short write to " + path);
}

std::string csv_path_for(const std::string& report_path) {
    size_t slash = report_path.find_last_of('/');
    size_t dot = report_path.find_last_of('.');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
        return report_path + ".csv";
    }
    return report_path.substr(0, dot) + ".csv";
}

}  // namespace dcc
