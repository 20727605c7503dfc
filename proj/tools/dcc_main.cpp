// Command-line entry point: eval, mutate, parse-check, reward, report-merge.
// Exit codes: 0 success, 1 runtime failure (including aborted runs), 2 usage.

#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dcc/dataset.hpp"
#include "dcc/dcc_engine.hpp"
#include "dcc/errors.hpp"
#include "dcc/model_client.hpp"
#include "dcc/mutation.hpp"
#include "dcc/orchestrator.hpp"
#include "dcc/report.hpp"
#include "dcc/symbolic.hpp"
#include "dcc/trace_parser.hpp"

namespace {

using nlohmann::json;

std::string read_all(std::istream& in) {
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string read_input(const std::string& path) {
    if (path.empty() || path == "-") return read_all(std::cin);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw dcc::DccError(dcc::Errc::Io, "cannot open " + path);
    return read_all(in);
}

dcc::DatasetFormat parse_format(const std::string& name) {
    if (name == "generic") return dcc::DatasetFormat::Generic;
    if (name == "gsm8k") return dcc::DatasetFormat::Gsm8kRaw;
    if (name == "cruxeval") return dcc::DatasetFormat::CruxEvalRaw;
    throw dcc::DccError(dcc::Errc::Config, "unknown dataset format " + name);
}

struct EvalArgs {
    std::string dataset_path;
    std::string format = "generic";
    std::string dataset_name;
    std::string mode = "dcc";
    std::string call = "single-trace";
    std::string backend = "mock";
    std::string mock_script_path;
    std::string wire_log_path;
    std::string out_path = "report.json";
    std::string traces_path = "traces.jsonl";
    std::string exemplars_path;
    uint64_t seed = 0;
    int n_batches = 15;
    int batch_size = 64;
    int pool_size = 10;
    int icl_k = 2;
    int max_attempts = 16;
    int max_inflight = 8;
    bool full_set = false;
    bool no_raw = false;
    bool nothink = false;
    double temperature = 0.6;
    double top_p = 0.95;
    int max_tokens = 1024;
    std::string api_base;
    std::string api_key;
    std::string model;
};

int cmd_eval(const EvalArgs& args) {
    dcc::DatasetSpec spec;
    spec.path = args.dataset_path;
    spec.format = parse_format(args.format);
    spec.name = args.dataset_name.empty() ? args.dataset_path : args.dataset_name;
    std::vector<dcc::TaskInstance> instances = dcc::load_dataset(spec);

    dcc::RunConfig config;
    auto mode = dcc::run_mode_from_name(args.mode);
    if (!mode) throw dcc::DccError(dcc::Errc::Config, "unknown mode " + args.mode);
    config.mode = *mode;
    if (args.call == "single-trace") config.dcc_call = dcc::DccCallMode::SingleTrace;
    else if (args.call == "three-call") config.dcc_call = dcc::DccCallMode::ThreeCall;
    else throw dcc::DccError(dcc::Errc::Config, "unknown call mode " + args.call);
    config.n_batches = args.n_batches;
    config.batch_size = args.batch_size;
    config.icl_pool_size = args.pool_size;
    config.icl_k = args.icl_k;
    config.max_attempts = args.max_attempts;
    config.max_inflight = args.max_inflight;
    config.full_set = args.full_set;
    config.include_raw = !args.no_raw;
    config.seed = args.seed;
    config.sampling.temperature = args.temperature;
    config.sampling.top_p = args.top_p;
    config.sampling.max_new_tokens = args.max_tokens;
    config.think_policy =
        args.nothink ? dcc::ThinkPolicy::SuppressThinking : dcc::ThinkPolicy::Default;
    config.dataset_name = spec.name;
    config.exemplars_path = args.exemplars_path;
    config.model = args.backend == "mock" ? "mock" : args.model;
    if (config.model.empty()) {
        throw dcc::DccError(dcc::Errc::Config, "--model (or DCC_MODEL) is required for http");
    }

    dcc::EvalPlan plan = dcc::plan_eval(config, instances);
    auto gold = dcc::gold_map(instances);

    std::ofstream wire_log;
    std::mutex wire_mu;
    dcc::WireLogSink sink;
    if (!args.wire_log_path.empty()) {
        wire_log.open(args.wire_log_path, std::ios::binary | std::ios::trunc);
        if (!wire_log) {
            throw dcc::DccError(dcc::Errc::Io, "cannot open " + args.wire_log_path);
        }
        sink = [&](const json& j) {
            std::lock_guard<std::mutex> lock(wire_mu);
            wire_log << j.dump() << '\n';
            wire_log.flush();
        };
    }

    std::unique_ptr<dcc::Backend> backend;
    if (args.backend == "mock") {
        dcc::MockScript script;
        if (!args.mock_script_path.empty()) script = dcc::load_mock_script(args.mock_script_path);
        backend = std::make_unique<dcc::MockBackend>(std::move(script));
    } else if (args.backend == "http") {
        if (args.api_base.empty()) {
            throw dcc::DccError(dcc::Errc::Config, "--api-base (or DCC_API_BASE) is required");
        }
        dcc::HttpBackendConfig http;
        http.api_base = args.api_base;
        http.api_key = args.api_key;
        http.model = config.model;
        http.max_inflight = args.max_inflight;
        backend = std::make_unique<dcc::HttpBackend>(http, sink);
    } else {
        throw dcc::DccError(dcc::Errc::Config, "unknown backend " + args.backend);
    }

    // The manifest hits disk before the first model call, so even a run that
    // dies mid-flight leaves its full provenance next to the partial traces.
    dcc::write_text_file(args.out_path,
                         dcc::report_json_text(dcc::build_report(
                             config, plan, nullptr, gold, backend->name(),
                             backend->deterministic(), "running")));

    std::ofstream traces(args.traces_path, std::ios::binary | std::ios::trunc);
    if (!traces) throw dcc::DccError(dcc::Errc::Io, "cannot open " + args.traces_path);

    dcc::RunResult result = dcc::execute_plan(config, plan, *backend, &traces);

    std::string status = result.aborted ? "aborted" : "complete";
    json report = dcc::build_report(config, plan, &result, gold, backend->name(),
                                    backend->deterministic(), status);
    dcc::write_text_file(args.out_path, dcc::report_json_text(report));
    dcc::write_text_file(dcc::csv_path_for(args.out_path), dcc::reports_to_csv({report}));

    std::cout << "records: " << result.outcomes.size() << "\n";
    if (!report["metrics"].is_null()) std::cout << "metrics: " << report["metrics"].dump() << "\n";
    std::cout << "report: " << args.out_path << "\n";
    if (result.aborted) {
        std::cerr << "aborted: " << result.abort_reason << "\n";
        return 1;
    }
    return 0;
}

struct MutateArgs {
    std::string kind;
    std::string in_path;
    std::string out_path;
    std::string sidecar_path;
    std::string exemplars_out;
    uint64_t seed = 0;
};

bool is_skippable(dcc::Errc code) {
    return code == dcc::Errc::NoNumericAnswer || code == dcc::Errc::NoStringLiteral ||
           code == dcc::Errc::NonFinite || code == dcc::Errc::DivisionByZero;
}

json sidecar_record(const dcc::MutationResult& r) {
    json j;
    j["id"] = r.mutated.id;
    j["kind"] = dcc::mutation_kind_name(r.kind);
    j["seed"] = r.seed;
    j["intervention_fwd"] = r.intervention_fwd;
    j["intervention_inv"] = r.intervention_inv;
    j["gold"] = r.gold.empty() ? json(nullptr) : json(r.gold);
    j["base_gold"] = r.base_gold.empty() ? json(nullptr) : json(r.base_gold);
    return j;
}

int cmd_mutate(const MutateArgs& args) {
    auto kind = dcc::mutation_kind_from_name(args.kind);
    if (!kind) throw dcc::DccError(dcc::Errc::Config, "unknown mutation kind " + args.kind);

    std::vector<dcc::TaskInstance> mutated;
    std::vector<json> sidecar;
    std::vector<dcc::DccExemplar> exemplars;
    int skipped = 0;

    auto note = [&](const dcc::MutationResult& r, const std::string& base_question,
                    const std::string& base_reasoning) {
        mutated.push_back(r.mutated);
        sidecar.push_back(sidecar_record(r));
        if (args.exemplars_out.empty()) return;
        if (r.gold.empty() || r.base_gold.empty()) {
            std::cerr << "warning: " << r.mutated.id
                      << " has no oracle answer; no exemplar emitted\n";
            return;
        }
        dcc::DccExemplar ex;
        ex.question = base_question;
        ex.answer0 = r.base_gold;
        ex.intervention_fwd = r.intervention_fwd;
        ex.answer1 = r.gold;
        ex.intervention_inv = r.intervention_inv;
        ex.answer0_again = r.base_gold;
        ex.reasoning0 = base_reasoning;
        ex.reasoning1 = r.mutated.rationale;
        ex.reasoning2 = base_reasoning;
        exemplars.push_back(std::move(ex));
    };

    if (*kind == dcc::MutationKind::MutateStringCF) {
        for (const auto& item : dcc::load_cruxeval_items(args.in_path)) {
            try {
                note(dcc::mutate_string_cf(item, args.seed), dcc::render_crux_question(item), "");
            } catch (const dcc::DccError& e) {
                if (!is_skippable(e.code())) throw;
                std::cerr << "warning: skipping " << item.id << ": " << e.what() << "\n";
                ++skipped;
            }
        }
    } else {
        for (const auto& problem : dcc::load_symbolic_corpus(args.in_path)) {
            try {
                dcc::MutationResult r = *kind == dcc::MutationKind::InsertConditional
                                            ? dcc::insert_conditional(problem, args.seed)
                                            : dcc::add_irrelevant_info(problem, args.seed);
                note(r, dcc::render_problem(problem), dcc::derive_rationale(problem));
            } catch (const dcc::DccError& e) {
                if (!is_skippable(e.code())) throw;
                std::cerr << "warning: skipping " << problem.id << ": " << e.what() << "\n";
                ++skipped;
            }
        }
    }

    dcc::save_dataset_jsonl(args.out_path, mutated);
    if (!args.sidecar_path.empty()) {
        std::string lines;
        for (const auto& j : sidecar) lines += j.dump() + '\n';
        dcc::write_text_file(args.sidecar_path, lines);
    }
    if (!args.exemplars_out.empty()) dcc::save_exemplars_jsonl(args.exemplars_out, exemplars);

    std::cout << "mutated: " << mutated.size() << "\n";
    if (skipped > 0) std::cout << "skipped: " << skipped << "\n";
    return 0;
}

int cmd_parse_check(const std::string& in_path) {
    std::string raw = read_input(in_path);
    auto stripped = dcc::strip_think_blocks(raw);
    dcc::ParseError err = dcc::ParseError::None;
    auto parsed = dcc::parse_scaffold(stripped.text, &err);

    json verdict;
    verdict["parse_error"] = dcc::parse_error_name(err);
    verdict["unclosed_think"] = stripped.unclosed_tag;
    if (parsed) {
        verdict["kind"] = parsed->kind == dcc::TraceKind::Triple ? "triple" : "single";
        verdict["answers"] = parsed->answers;
        verdict["n_reasonings"] = parsed->reasonings.size();
        verdict["consistent"] =
            parsed->kind == dcc::TraceKind::Triple &&
            !parsed->answers[0].empty() && !parsed->answers[2].empty() &&
            parsed->answers[0] == parsed->answers[2];
    } else {
        verdict["kind"] = nullptr;
        verdict["answers"] = json::array();
        verdict["n_reasonings"] = 0;
        verdict["consistent"] = false;
    }
    std::cout << verdict.dump(2) << "\n";
    return 0;
}

int cmd_reward() {
    std::string completion = read_all(std::cin);
    std::cout << (dcc::dcc_reward(completion) == 1.0 ? "1" : "0") << "\n";
    return 0;
}

int cmd_report_merge(const std::vector<std::string>& paths, const std::string& out_path) {
    std::vector<json> reports;
    for (const auto& path : paths) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw dcc::DccError(dcc::Errc::Io, "cannot open " + path);
        reports.push_back(json::parse(in));
    }
    std::string csv = dcc::reports_to_csv(reports);
    if (out_path.empty()) std::cout << csv;
    else dcc::write_text_file(out_path, csv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Double counterfactual consistency harness"};
    app.require_subcommand(1);
    int rc = 0;

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Run an evaluation and write report + traces");
    eval->add_option("--dataset", eval_args.dataset_path, "Dataset file")->required();
    eval->add_option("--format", eval_args.format, "generic|gsm8k|cruxeval");
    eval->add_option("--dataset-name", eval_args.dataset_name, "Name recorded in the report");
    eval->add_option("--mode", eval_args.mode, "base|icl|dcc|dcc-noicl");
    eval->add_option("--call", eval_args.call, "single-trace|three-call");
    eval->add_option("--backend", eval_args.backend, "mock|http");
    eval->add_option("--mock-script", eval_args.mock_script_path, "Scripted completions (JSON)");
    eval->add_option("--wire-log", eval_args.wire_log_path, "HTTP wire log (JSONL)");
    eval->add_option("--out", eval_args.out_path, "Report path");
    eval->add_option("--traces", eval_args.traces_path, "Trace log path (JSONL)");
    eval->add_option("--exemplars", eval_args.exemplars_path, "DCC exemplar file (JSONL)");
    eval->add_option("--seed", eval_args.seed, "Run seed");
    eval->add_option("--n-batches", eval_args.n_batches, "Number of batches");
    eval->add_option("--batch-size", eval_args.batch_size, "Instances per batch");
    eval->add_option("--pool-size", eval_args.pool_size, "In-context pool size");
    eval->add_option("--icl-k", eval_args.icl_k, "Exemplars per prompt");
    eval->add_option("--max-attempts", eval_args.max_attempts, "Rejection sampling cap");
    eval->add_option("--max-inflight", eval_args.max_inflight, "Concurrent requests");
    eval->add_flag("--full-set", eval_args.full_set, "Evaluate the whole remainder, no batches");
    eval->add_flag("--no-raw", eval_args.no_raw, "Omit raw completions from traces");
    eval->add_flag("--nothink", eval_args.nothink, "Append the think-suppression token");
    eval->add_option("--temperature", eval_args.temperature, "Sampling temperature");
    eval->add_option("--top-p", eval_args.top_p, "Nucleus mass");
    eval->add_option("--max-tokens", eval_args.max_tokens, "Completion token cap");
    eval->add_option("--api-base", eval_args.api_base, "Chat-completions base URL")
        ->envname("DCC_API_BASE");
    eval->add_option("--api-key", eval_args.api_key, "Bearer token")->envname("DCC_API_KEY");
    eval->add_option("--model", eval_args.model, "Model name")->envname("DCC_MODEL");
    eval->callback([&]() { rc = cmd_eval(eval_args); });

    MutateArgs mutate_args;
    auto* mutate = app.add_subcommand("mutate", "Apply a dataset mutation");
    mutate->add_option("--kind", mutate_args.kind,
                       "insert-conditional|irrelevant-info-hard|mutate-string-cf")
        ->required();
    mutate->add_option("--in", mutate_args.in_path, "Input corpus")->required();
    mutate->add_option("--out", mutate_args.out_path, "Mutated dataset (JSONL)")->required();
    mutate->add_option("--sidecar", mutate_args.sidecar_path, "Mutation records (JSONL)");
    mutate->add_option("--exemplars-out", mutate_args.exemplars_out,
                       "Derived DCC exemplars (JSONL)");
    mutate->add_option("--seed", mutate_args.seed, "Mutation seed");
    mutate->callback([&]() { rc = cmd_mutate(mutate_args); });

    std::string parse_in;
    auto* parse_check = app.add_subcommand("parse-check", "Parse one completion, print a verdict");
    parse_check->add_option("--in", parse_in, "Completion file (default stdin)");
    parse_check->callback([&]() { rc = cmd_parse_check(parse_in); });

    auto* reward = app.add_subcommand("reward", "Read a completion from stdin, print 0 or 1");
    reward->callback([&]() { rc = cmd_reward(); });

    std::vector<std::string> merge_paths;
    std::string merge_out;
    auto* merge = app.add_subcommand("report-merge", "Merge report JSONs into one CSV");
    merge->add_option("reports", merge_paths, "Report files")->required();
    merge->add_option("--out", merge_out, "CSV path (default stdout)");
    merge->callback([&]() { rc = cmd_report_merge(merge_paths, merge_out); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const dcc::DccError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}
