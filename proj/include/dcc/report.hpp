#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcc/orchestrator.hpp"
#include "dcc/task.hpp"

namespace dcc {

// Aggregate metrics over one set of records. A metric whose denominator is
// empty is absent (serialized as null), never 0/0.
struct ModeMetrics {
    size_t n = 0;
    std::optional<double> dcc_rate;            // DCC records only
    std::optional<double> mean_attempts;       // DCC records only
    std::optional<double> accuracy_first;      // first answer vs gold, over gold-known records
    std::optional<double> accuracy_agreed_strict;       // agreed && correct, over gold-known
    std::optional<double> accuracy_agreed_conditional;  // correct among agreed gold-known
    double parse_failure_rate = 0.0;
};

std::map<std::string, std::string> gold_map(const std::vector<TaskInstance>& instances);

// Correctness is recomputed here from the gold map, not read from the
// records, so a report can be rebuilt from a trace log plus the dataset.
// Throws EmptyRecords.
ModeMetrics compute_metrics(const std::vector<const InstanceOutcome*>& records,
                            const std::map<std::string, std::string>& gold);
ModeMetrics compute_metrics(const std::vector<InstanceOutcome>& records,
                            const std::map<std::string, std::string>& gold);

nlohmann::json metrics_to_json(const ModeMetrics& m);

// Per-batch spread of every metric: mean, sample stddev (n-1) and stderr over
// the batches where the metric is defined, plus the raw per-batch values.
nlohmann::json batch_metrics_to_json(const std::vector<InstanceOutcome>& outcomes,
                                     const std::vector<std::vector<std::string>>& batch_ids,
                                     const std::map<std::string, std::string>& gold);

// Everything needed to reproduce the run: config echo, prompt hashes, seeds,
// pool and batch composition. timestamp_utc appears only for backends that
// are not deterministic, so deterministic runs stay byte-identical.
nlohmann::json build_manifest(const RunConfig& config, const EvalPlan& plan,
                              const std::string& backend_name, bool backend_deterministic);

// The full report document, schema "dcc-report/1". status is "running",
// "complete" or "aborted"; metrics are null while running.
nlohmann::json build_report(const RunConfig& config, const EvalPlan& plan,
                            const RunResult* result,
                            const std::map<std::string, std::string>& gold,
                            const std::string& backend_name, bool backend_deterministic,
                            const std::string& status);

// One summary row per report: model,dataset,mode,dcc_rate,accuracy.
// Absent metrics are empty fields.
std::string reports_to_csv(const std::vector<nlohmann::json>& reports);

std::string report_json_text(const nlohmann::json& report);
void write_text_file(const std::string& path, const std::string& content);
// Derives the sibling CSV path for a report path (extension swapped to .csv).
std::string csv_path_for(const std::string& report_path);

}  // namespace dcc
