// Acceptance suite: eight end-to-end criteria, one pass/fail line each.
// Exits nonzero if any criterion fails. Independent of doctest on purpose:
// the checks here are the contract, not unit coverage.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcc/code_lexer.hpp"
#include "dcc/dataset.hpp"
#include "dcc/dcc_engine.hpp"
#include "dcc/errors.hpp"
#include "dcc/model_client.hpp"
#include "dcc/mutation.hpp"
#include "dcc/orchestrator.hpp"
#include "dcc/prompting.hpp"
#include "dcc/report.hpp"
#include "dcc/rng.hpp"
#include "dcc/symbolic.hpp"
#include "dcc/trace_parser.hpp"
#include "trace_fixtures.hpp"

using namespace dcc;
using nlohmann::json;

namespace {

struct Criterion {
    std::string name;
    std::function<bool(std::string*)> run;
};

std::string fail_msg;

#define EXPECT(cond)                                                          \
    do {                                                                      \
        if (!(cond)) {                                                        \
            *detail = std::string("line ") + std::to_string(__LINE__) + ": " #cond; \
            return false;                                                     \
        }                                                                     \
    } while (0)

// ---- 1. fixture fidelity -------------------------------------------------

bool fixture_fidelity(std::string* detail) {
    struct Case {
        const char* text;
        bool consistent;
        std::array<const char*, 3> answers;
    };
    const Case cases[] = {
        {dcc_fixtures::kTraceOledConsistent, true, {"25", "20", "25"}},
        {dcc_fixtures::kTraceBouncyInconsistent, false, {"14", "22", "16"}},
        {dcc_fixtures::kTraceSunscreenThink, true, {"4", "2", "4"}},
        {dcc_fixtures::kTraceAgeConditional, true, {"55", "cannot be determined", "55"}},
    };
    for (const Case& c : cases) {
        auto stripped = strip_think_blocks(c.text);
        ParseError err = ParseError::None;
        auto parsed = parse_scaffold(stripped.text, &err);
        EXPECT(parsed.has_value());
        EXPECT(parsed->kind == TraceKind::Triple);
        for (int i = 0; i < 3; ++i) EXPECT(parsed->answers[i] == c.answers[i]);
        AnswerTriple triple;
        triple.answers = {parsed->answers[0], parsed->answers[1], parsed->answers[2]};
        EXPECT(dcc_check(triple) == c.consistent);
    }
    return true;
}

// ---- 2. rejection-sampling oracle ----------------------------------------

std::string triple_text(const std::string& a, const std::string& b, const std::string& c) {
    return "<answer>" + a + "</answer><answer>" + b + "</answer><answer>" + c + "</answer>";
}

bool rejection_sampling_oracle(std::string* detail) {
    MockScript script;
    std::vector<TaskInstance> corpus;
    for (int i = 0; i < 100; ++i) {
        TaskInstance inst;
        inst.id = "s" + std::to_string(i);
        inst.question = "Q" + std::to_string(i);
        corpus.push_back(inst);
        int agree_attempt = (i % 5) + 1;  // 1-based attempt that converges
        for (int a = 0; a + 1 < agree_attempt; ++a) {
            script.set(inst.id, a, triple_text("1", "0", "2"));
        }
        script.set(inst.id, agree_attempt - 1, triple_text("7", "0", "7"));
    }
    MockBackend backend(script);
    PromptSpec spec;
    spec.mode = PromptMode::DccInstructionOnly;

    long long total = 0;
    std::vector<InstanceOutcome> outcomes;
    for (int i = 0; i < 100; ++i) {
        DccRecord rec = sample_until_agreement(corpus[i], spec, SamplingParams{}, backend, 16, 0,
                                               DccCallMode::SingleTrace);
        EXPECT(rec.consistent);
        EXPECT(rec.attempts == (i % 5) + 1);
        total += rec.attempts;
        InstanceOutcome o;
        o.instance_id = rec.instance_id;
        o.dcc = rec;
        outcomes.push_back(std::move(o));
    }
    EXPECT(total == 300);
    ModeMetrics m = compute_metrics(outcomes, {});
    EXPECT(m.mean_attempts.has_value());
    EXPECT(*m.mean_attempts == 3.0);  // exact
    return true;
}

// ---- 3. metric oracle equivalence ----------------------------------------

// Everything below recounts the emitted artifacts only: trace log lines,
// manifest batches and the dataset gold. No library metric code.
struct Recount {
    size_t n = 0, consistent = 0, gold = 0, first = 0, agreed_gold = 0, agreed_correct = 0,
           parse_fail = 0;
    long long attempts = 0;

    void add(const json& line, const std::map<std::string, std::string>& gold_map) {
        ++n;
        bool cons = line["consistent"].get<bool>();
        if (cons) ++consistent;
        attempts += line["attempts"].get<int>();
        if (line["parse_failure"].get<bool>()) ++parse_fail;
        auto it = gold_map.find(line["instance_id"].get<std::string>());
        if (it == gold_map.end()) return;
        ++gold;
        std::string final_answer = line["final_answer"].get<std::string>();
        bool first_ok = !final_answer.empty() && final_answer == it->second;
        if (first_ok) ++first;
        if (cons) ++agreed_gold;
        if (cons && first_ok) ++agreed_correct;
    }
};

bool json_num_eq(const json& a, double b) { return !a.is_null() && a.get<double>() == b; }

bool metric_oracle_equivalence(std::string* detail) {
    for (uint64_t corpus_seed = 0; corpus_seed < 10; ++corpus_seed) {
        Rng rng(mix_seed(1000, corpus_seed));
        std::vector<TaskInstance> corpus;
        MockScript script;
        int n = 24 + static_cast<int>(rng.below(30));
        for (int i = 0; i < n; ++i) {
            TaskInstance inst;
            char buf[16];
            std::snprintf(buf, sizeof(buf), "m%02d", i);
            inst.id = buf;
            inst.question = "Q " + std::to_string(corpus_seed) + "/" + std::to_string(i);
            std::string answer = std::to_string(rng.below(4));
            if (rng.coin()) inst.gold_answer = std::to_string(rng.below(4));
            switch (rng.below(4)) {
                case 0: script.set(inst.id, 0, "garbage"); break;  // parse failure forever
                case 1:  // inconsistent forever
                    script.set(inst.id, 0, triple_text(answer, "x", answer + "9"));
                    break;
                default:  // consistent on attempt 1 or 2
                    if (rng.coin()) script.set(inst.id, 0, triple_text("0", "x", "1"));
                    script.set(inst.id, rng.coin() ? 0 : 1, triple_text(answer, "x", answer));
            }
            corpus.push_back(std::move(inst));
        }
        script.default_completion = "garbage";

        RunConfig config;
        config.mode = RunMode::DccNoIcl;
        config.seed = corpus_seed;
        config.icl_pool_size = 5;
        config.n_batches = 6;
        config.batch_size = 16;
        config.max_attempts = 4;
        config.include_raw = false;
        config.model = "mock";
        config.dataset_name = "synthetic";

        EvalPlan plan = plan_eval(config, corpus);
        MockBackend backend(script);
        std::ostringstream trace;
        RunResult result = execute_plan(config, plan, backend, &trace);
        EXPECT(!result.aborted);
        auto gold = gold_map(corpus);
        json report = build_report(config, plan, &result, gold, "mock", true, "complete");

        // Recount overall metrics from the trace log text.
        std::map<std::string, json> by_id;
        Recount all;
        std::istringstream lines(trace.str());
        std::string line;
        while (std::getline(lines, line)) {
            json j = json::parse(line);
            by_id[j["instance_id"].get<std::string>()] = j;
            all.add(j, gold);
        }
        EXPECT(all.n == report["n_records"].get<size_t>());

        const json& m = report["metrics"];
        EXPECT(json_num_eq(m["dcc_rate"], double(all.consistent) / double(all.n)));
        EXPECT(json_num_eq(m["mean_attempts"], double(all.attempts) / double(all.n)));
        EXPECT(json_num_eq(m["parse_failure_rate"], double(all.parse_fail) / double(all.n)));
        if (all.gold == 0) {
            EXPECT(m["accuracy_first"].is_null());
            EXPECT(m["accuracy_agreed_strict"].is_null());
        } else {
            EXPECT(json_num_eq(m["accuracy_first"], double(all.first) / double(all.gold)));
            EXPECT(json_num_eq(m["accuracy_agreed_strict"],
                               double(all.agreed_correct) / double(all.gold)));
        }
        if (all.agreed_gold == 0) {
            EXPECT(m["accuracy_agreed_conditional"].is_null());
        } else {
            EXPECT(json_num_eq(m["accuracy_agreed_conditional"],
                               double(all.agreed_correct) / double(all.agreed_gold)));
        }

        // Recount per-batch values from the manifest's batch lists.
        const json& batches = report["manifest"]["batches"];
        const json& bm = report["batch_metrics"];
        EXPECT(bm["n_batches"].get<size_t>() == batches.size());
        std::vector<double> rates;
        for (size_t b = 0; b < batches.size(); ++b) {
            Recount rc;
            for (const auto& id : batches[b]) rc.add(by_id.at(id.get<std::string>()), gold);
            double rate = double(rc.consistent) / double(rc.n);
            rates.push_back(rate);
            EXPECT(json_num_eq(bm["dcc_rate"]["values"][b], rate));
        }
        double sum = 0;
        for (double r : rates) sum += r;
        double mean = sum / double(rates.size());
        EXPECT(json_num_eq(bm["dcc_rate"]["mean"], mean));
        double ss = 0;
        for (double r : rates) ss += (r - mean) * (r - mean);
        double stddev = std::sqrt(ss / double(rates.size() - 1));
        EXPECT(json_num_eq(bm["dcc_rate"]["stddev"], stddev));
        EXPECT(json_num_eq(bm["dcc_rate"]["stderr"], stddev / std::sqrt(double(rates.size()))));
    }
    return true;
}

// ---- 4. mutation invariants -----------------------------------------------

SymbolicProblem random_problem(Rng& rng, int index) {
    SymbolicProblem p;
    p.id = "gen-" + std::to_string(index);
    int n = 2 + static_cast<int>(rng.below(4));
    std::string prev;
    for (int i = 0; i < n; ++i) {
        std::string var = "v" + std::to_string(i);
        Relation rel;
        rel.target = var;
        if (i == 0) {
            rel.expr = make_const(Rational(rng.range(1, 40)));
        } else {
            ExprOp op = std::array{ExprOp::Add, ExprOp::Sub, ExprOp::Mul}[rng.below(3)];
            rel.expr = make_op(op, make_var(prev), make_const(Rational(rng.range(1, 12))));
        }
        rel.template_text = "Quantity " + var + " equals {" + var + "}.";
        p.relations.push_back(std::move(rel));
        p.variables[var] = "";
        prev = var;
    }
    p.answer_expr = make_var(prev);
    p.question_template = "What is the final quantity?";
    return p;
}

std::string random_code(Rng& rng) {
    static const char* kLiteralPool[] = {"alpha", "x",  "some words", "end-1", "T",
                                         "shore",  "k9", "mid dle",    "zz"};
    int n_literals = 1 + static_cast<int>(rng.below(3));
    std::string code = "def f(v):\n";
    for (int i = 0; i < n_literals; ++i) {
        char quote = rng.coin() ? '"' : '\'';
        std::string lit = kLiteralPool[rng.below(std::size(kLiteralPool))];
        code += "    s" + std::to_string(i) + " = " + quote + lit + quote + "\n";
    }
    code += "    return v";
    for (int i = 0; i < n_literals; ++i) code += " + s" + std::to_string(i);
    code += "\n";
    return code;
}

// Pulls X and Y back out of 'Suppose the string "X" is replaced by "Y".'
bool parse_replacement_sentence(const std::string& s, std::string* x, std::string* y) {
    const std::string head = "Suppose the string \"";
    const std::string mid = "\" is replaced by \"";
    const std::string tail = "\".";
    if (s.rfind(head, 0) != 0) return false;
    size_t mid_pos = s.rfind(mid);
    if (mid_pos == std::string::npos || s.substr(s.size() - tail.size()) != tail) return false;
    *x = s.substr(head.size(), mid_pos - head.size());
    *y = s.substr(mid_pos + mid.size(), s.size() - tail.size() - mid_pos - mid.size());
    return true;
}

bool mutation_invariants(std::string* detail) {
    Rng rng(20250815);

    // IrrelevantInfoHard: the gold answer survives, provably.
    for (int trial = 0; trial < 1000; ++trial) {
        SymbolicProblem p = random_problem(rng, trial);
        std::string base_gold = eval_symbolic(p);
        MutationResult r = add_irrelevant_info(p, rng.next_u64());
        EXPECT(r.gold == base_gold);
        EXPECT(r.mutated.symbolic.has_value());
        EXPECT(eval_symbolic(*r.mutated.symbolic) == base_gold);
    }

    // InsertConditional: gold flips on every accepted output and removing
    // the condition (the retained symbolic form) restores the base gold.
    for (int trial = 0; trial < 1000; ++trial) {
        SymbolicProblem p = random_problem(rng, trial + 5000);
        std::string base_gold = eval_symbolic(p);
        MutationResult r = insert_conditional(p, rng.next_u64());
        EXPECT(r.gold != base_gold);
        EXPECT(r.base_gold == base_gold);
        EXPECT(r.mutated.symbolic.has_value());
        EXPECT(eval_symbolic(*r.mutated.symbolic) == base_gold);
    }

    // MutateStringCF: token structure and length preserved; the inverse
    // intervention text, applied to the mutated code, restores the original.
    const std::string q_head = "You are given the following function:\n\n";
    const std::string q_tail = "\n\nWhat does f(";
    for (int trial = 0; trial < 1000; ++trial) {
        CruxItem item;
        item.id = "cx" + std::to_string(trial);
        item.code = random_code(rng);
        item.input = "'v'";
        item.output = "'out'";
        MutationResult r = mutate_string_cf(item, rng.next_u64());

        size_t tail_pos = r.mutated.question.rfind(q_tail);
        EXPECT(r.mutated.question.rfind(q_head, 0) == 0);
        EXPECT(tail_pos != std::string::npos);
        std::string mutated_code =
            r.mutated.question.substr(q_head.size(), tail_pos - q_head.size());

        EXPECT(mutated_code.size() == item.code.size());
        EXPECT(token_kinds(mutated_code) == token_kinds(item.code));

        std::string x, y;
        EXPECT(parse_replacement_sentence(r.intervention_inv, &x, &y));
        auto restored = apply_string_replacement(mutated_code, x, y);
        EXPECT(restored.has_value());
        EXPECT(*restored == item.code);

        // And the forward sentence describes exactly the edit that was made.
        std::string fx, fy;
        EXPECT(parse_replacement_sentence(r.intervention_fwd, &fx, &fy));
        EXPECT(fx == y);
        EXPECT(fy == x);
    }
    return true;
}

// ---- 5. protocol conformance ----------------------------------------------

bool protocol_conformance(std::string* detail) {
    std::vector<TaskInstance> corpus;
    for (int i = 0; i < 500; ++i) {
        TaskInstance inst;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "p%03d", i);
        inst.id = buf;
        inst.question = "What is " + std::to_string(i) + " + 1?";
        inst.gold_answer = std::to_string(i + 1);
        inst.rationale = "Add one.";
        corpus.push_back(std::move(inst));
    }
    RunConfig config;  // protocol defaults: 15 x 64, pool 10, 2 exemplars
    config.mode = RunMode::Icl;
    config.seed = 99;
    config.model = "mock";
    config.dataset_name = "synthetic";
    EXPECT(config.n_batches == 15);
    EXPECT(config.batch_size == 64);
    EXPECT(config.icl_pool_size == 10);
    EXPECT(config.icl_k == 2);

    EvalPlan plan = plan_eval(config, corpus);
    MockScript script;
    script.default_completion = "<answer>1</answer>";
    MockBackend backend(script);
    std::ostringstream trace;
    RunResult result = execute_plan(config, plan, backend, &trace);
    EXPECT(!result.aborted);
    json report = build_report(config, plan, &result, gold_map(corpus), "mock", true, "complete");

    const json& manifest = report["manifest"];
    EXPECT(manifest["icl_pool"].size() == 10);
    EXPECT(manifest["batches"].size() == 15);
    std::set<std::string> batch_ids;
    for (const auto& batch : manifest["batches"]) {
        EXPECT(batch.size() == 64);
        for (const auto& id : batch) batch_ids.insert(id.get<std::string>());
    }
    std::set<std::string> pool_ids;
    for (const auto& id : manifest["icl_pool"]) pool_ids.insert(id.get<std::string>());

    // Trace log inspection: every prompt carried exactly 2 exemplars, no
    // evaluated instance is in the pool, and the evaluated set is exactly
    // the distinct batched set.
    std::set<std::string> evaluated;
    std::istringstream lines(trace.str());
    std::string line;
    while (std::getline(lines, line)) {
        json j = json::parse(line);
        EXPECT(j["n_exemplars"].get<int>() == 2);
        std::string id = j["instance_id"].get<std::string>();
        EXPECT(!pool_ids.count(id));
        evaluated.insert(id);
    }
    EXPECT(evaluated == batch_ids);
    EXPECT(manifest["prompt_hashes"]["exemplar_blocks"].size() == 2);
    return true;
}

// ---- 6. determinism --------------------------------------------------------

bool determinism(std::string* detail) {
    auto run_once = [](std::string* report_text, std::string* trace_text) {
        std::vector<TaskInstance> corpus;
        for (int i = 0; i < 40; ++i) {
            TaskInstance inst;
            inst.id = "d" + std::to_string(100 + i);
            inst.question = "Q" + std::to_string(i);
            inst.gold_answer = "1";
            corpus.push_back(std::move(inst));
        }
        MockScript script;
        script.default_completion = triple_text("1", "2", "1");
        script.set("d104", 0, triple_text("1", "2", "3"));
        script.set("d105", 0, "garbage");
        RunConfig config;
        config.mode = RunMode::DccNoIcl;
        config.seed = 77;
        config.max_attempts = 3;
        config.model = "mock";
        config.dataset_name = "synthetic";
        config.icl_pool_size = 6;
        config.n_batches = 5;
        config.batch_size = 12;
        EvalPlan plan = plan_eval(config, corpus);
        MockBackend backend(script);
        std::ostringstream trace;
        RunResult result = execute_plan(config, plan, backend, &trace);
        json report =
            build_report(config, plan, &result, gold_map(corpus), "mock", true, "complete");
        *report_text = report_json_text(report);
        *trace_text = trace.str();
    };
    std::string r1, t1, r2, t2;
    run_once(&r1, &t1);
    run_once(&r2, &t2);
    EXPECT(!r1.empty());
    EXPECT(!t1.empty());
    EXPECT(r1 == r2);
    EXPECT(t1 == t2);
    return true;
}

// ---- 7. normalization / idempotence ----------------------------------------

std::string messy_string(Rng& rng) {
    static const char* kPieces[] = {"  ",      "\t", "\n",   "$",   "\"",  "'",  ".",
                                    "answer",  "25", "1/2",  "0.5", "<think>", "</think>",
                                    "cannot",  "be", "determined", "x y", "...", "-3",
                                    "<answer>", "</answer>", "a$b", "”", "done"};
    std::string out;
    size_t n = rng.below(12);
    for (size_t i = 0; i < n; ++i) out += kPieces[rng.below(std::size(kPieces))];
    return out;
}

bool normalization_idempotence(std::string* detail) {
    Rng rng(777);
    for (int i = 0; i < 10000; ++i) {
        std::string s = messy_string(rng);
        std::string once = normalize_answer(s);
        EXPECT(normalize_answer(once) == once);
        ThinkStripResult first = strip_think_blocks(s);
        ThinkStripResult second = strip_think_blocks(first.text);
        EXPECT(second.text == first.text);
    }
    EXPECT(normalize_answer("1/2") != normalize_answer("0.5"));
    EXPECT(normalize_answer("1/2") == "1/2");
    EXPECT(normalize_answer("0.5") == "0.5");
    return true;
}

// ---- 8. reward equivalence ---------------------------------------------------

bool reward_equivalence(std::string* detail) {
    std::vector<std::string> inputs = {
        dcc_fixtures::kTraceOledConsistent,   dcc_fixtures::kTraceBouncyInconsistent,
        dcc_fixtures::kTraceSunscreenThink,   dcc_fixtures::kTraceAgeConditional,
        dcc_fixtures::kTraceSunscreenInconsistent,
    };
    Rng rng(4040);
    for (int i = 0; i < 2000; ++i) inputs.push_back(messy_string(rng));
    for (const std::string a : {"7", "x", ""}) {
        for (const std::string b : {"7", "x", ""}) {
            inputs.push_back(triple_text(a, "mid", b));
            inputs.push_back("<answer>" + a + "</answer>");
        }
    }

    for (const std::string& x : inputs) {
        // The contract, recomputed from parts: strip, parse, then the check.
        bool expected = false;
        auto stripped = strip_think_blocks(x);
        auto parsed = parse_scaffold(stripped.text);
        if (parsed && parsed->kind == TraceKind::Triple && !parsed->answers[0].empty() &&
            !parsed->answers[1].empty() && !parsed->answers[2].empty()) {
            expected = parsed->answers[0] == parsed->answers[2];
        }
        double reward = dcc_reward(x);
        EXPECT(reward == (expected ? 1.0 : 0.0));
    }
    return true;
}

}  // namespace

int main() {
    struct Timed {
        const char* name;
        bool (*fn)(std::string*);
        double budget_ms;  // 0 = no budget
    };
    const Timed criteria[] = {
        {"fixture-fidelity", fixture_fidelity, 1000},
        {"rejection-sampling-oracle", rejection_sampling_oracle, 5000},
        {"metric-oracle-equivalence", metric_oracle_equivalence, 0},
        {"mutation-invariants", mutation_invariants, 30000},
        {"protocol-conformance", protocol_conformance, 0},
        {"determinism", determinism, 0},
        {"normalization-idempotence", normalization_idempotence, 0},
        {"reward-equivalence", reward_equivalence, 0},
    };

    int failures = 0;
    int index = 0;
    for (const auto& c : criteria) {
        ++index;
        std::string detail;
        auto start = std::chrono::steady_clock::now();
        bool ok = false;
        try {
            ok = c.fn(&detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        auto end = std::chrono::steady_clock::now();
        double ms = std::chrono::duration<double, std::milli>(end - start).count();
        if (ok && c.budget_ms > 0 && ms > c.budget_ms) {
            ok = false;
            detail = "over time budget: " + std::to_string(ms) + " ms > " +
                     std::to_string(c.budget_ms) + " ms";
        }
        std::printf("[%s] %d %s (%.0f ms)%s%s\n", ok ? "PASS" : "FAIL", index, c.name, ms,
                    detail.empty() ? "" : " -- ", detail.c_str());
        if (!ok) ++failures;
    }
    std::printf("%d/8 criteria passed\n", 8 - failures);
    return failures == 0 ? 0 : 1;
}
