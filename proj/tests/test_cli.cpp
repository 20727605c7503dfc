// End-to-end tests that shell out to the built binary.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dcc/symbolic.hpp"
#include "trace_fixtures.hpp"

using namespace dcc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr combined
};

CmdResult run(const std::string& args, const std::string& stdin_text = "") {
    std::string cmd;
    if (!stdin_text.empty()) {
        std::ofstream("cli_stdin_tmp.txt", std::ios::binary) << stdin_text;
        cmd = std::string(DCC_CLI_PATH) + " " + args + " < cli_stdin_tmp.txt 2>&1";
    } else {
        cmd = std::string(DCC_CLI_PATH) + " " + args + " 2>&1";
    }
    CmdResult result;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf;
    size_t got;
    while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) {
        result.output.append(buf.data(), got);
    }
    int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::remove("cli_stdin_tmp.txt");
    return result;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

size_t line_count(const std::string& text) {
    size_t n = 0;
    for (char c : text) {
        if (c == '\n') ++n;
    }
    return n;
}

// Scratch dir so the artifacts of one case never leak into another.
struct Workspace {
    fs::path dir;
    explicit Workspace(const std::string& name) : dir(fs::path("cli_ws_" + name)) {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Workspace() { fs::remove_all(dir); }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

void write_dataset(const std::string& path, int n) {
    std::ofstream out(path, std::ios::binary);
    for (int i = 0; i < n; ++i) {
        char id[8];
        std::snprintf(id, sizeof(id), "q%02d", i);
        out << json{{"id", id},
                    {"question", "What is " + std::to_string(i) + " + 1?"},
                    {"answer", std::to_string(i + 1)},
                    {"rationale", "Add one."}}
                   .dump()
            << "\n";
    }
}

void write_mock_script(const std::string& path, const std::string& default_completion) {
    std::ofstream(path, std::ios::binary)
        << json{{"default_completion", default_completion}}.dump() << "\n";
}

}  // namespace

TEST_CASE("help exits zero, usage errors exit two") {
    CHECK(run("--help").exit_code == 0);
    CHECK(run("eval --help").exit_code == 0);
    CHECK(run("eval").exit_code == 2);                       // missing --dataset
    CHECK(run("definitely-not-a-subcommand").exit_code == 2);
    CHECK(run("").exit_code == 2);                           // a subcommand is required
    CHECK(run("mutate --in x.jsonl --out y.jsonl").exit_code == 2);  // missing --kind
}

TEST_CASE("mock dcc eval writes report, traces and csv") {
    Workspace ws("eval");
    write_dataset(ws.path("data.jsonl"), 30);
    write_mock_script(ws.path("script.json"),
                      "<answer>1</answer><answer>2</answer><answer>1</answer>");

    CmdResult r = run("eval --dataset " + ws.path("data.jsonl") + " --mode dcc-noicl" +
                      " --mock-script " + ws.path("script.json") + " --seed 7" +
                      " --out " + ws.path("report.json") + " --traces " + ws.path("t.jsonl"));
    CHECK(r.exit_code == 0);

    json report = json::parse(slurp(ws.path("report.json")));
    CHECK(report["schema"] == "dcc-report/1");
    CHECK(report["status"] == "complete");
    CHECK(report["run_mode"] == "dcc-noicl");
    CHECK(report["metrics"]["dcc_rate"].get<double>() == 1.0);
    CHECK(report["manifest"]["icl_pool"].size() == 10);
    CHECK(report["manifest"]["batches"].size() == 15);
    CHECK_FALSE(report["manifest"].contains("timestamp_utc"));

    std::string traces = slurp(ws.path("t.jsonl"));
    CHECK(line_count(traces) == report["n_records"].get<size_t>());

    std::string csv = slurp(ws.path("report.csv"));
    CHECK(csv.find("model,dataset,mode,dcc_rate,accuracy\n") == 0);
    CHECK(csv.find("dcc-noicl") != std::string::npos);
}

TEST_CASE("identical mock runs are byte-identical") {
    Workspace ws("determinism");
    write_dataset(ws.path("data.jsonl"), 30);
    write_mock_script(ws.path("script.json"),
                      "<answer>3</answer><answer>4</answer><answer>3</answer>");
    std::string common = "eval --dataset " + ws.path("data.jsonl") +
                         " --mode dcc-noicl --mock-script " + ws.path("script.json") +
                         " --seed 11 ";
    CHECK(run(common + "--out " + ws.path("a.json") + " --traces " + ws.path("a.jsonl"))
              .exit_code == 0);
    CHECK(run(common + "--out " + ws.path("b.json") + " --traces " + ws.path("b.jsonl"))
              .exit_code == 0);
    CHECK(slurp(ws.path("a.json")) == slurp(ws.path("b.json")));
    CHECK(slurp(ws.path("a.jsonl")) == slurp(ws.path("b.jsonl")));
}

TEST_CASE("dcc-noicl trace lines carry zero exemplars") {
    Workspace ws("noicl");
    write_dataset(ws.path("data.jsonl"), 20);
    write_mock_script(ws.path("script.json"),
                      "<answer>1</answer><answer>2</answer><answer>1</answer>");
    CmdResult r = run("eval --dataset " + ws.path("data.jsonl") +
                      " --mode dcc-noicl --mock-script " + ws.path("script.json") +
                      " --pool-size 4 --n-batches 3 --batch-size 8" + " --out " +
                      ws.path("report.json") + " --traces " + ws.path("t.jsonl"));
    CHECK(r.exit_code == 0);
    std::istringstream lines(slurp(ws.path("t.jsonl")));
    std::string line;
    size_t n = 0;
    while (std::getline(lines, line)) {
        json j = json::parse(line);
        CHECK(j["n_exemplars"] == 0);
        CHECK(j["run_mode"] == "dcc-noicl");
        ++n;
    }
    CHECK(n > 0);
}

TEST_CASE("base mode eval produces agreement records") {
    Workspace ws("base");
    write_dataset(ws.path("data.jsonl"), 20);
    write_mock_script(ws.path("script.json"), "<answer>5</answer>");
    CmdResult r = run("eval --dataset " + ws.path("data.jsonl") +
                      " --mode base --mock-script " + ws.path("script.json") +
                      " --pool-size 0 --full-set --out " + ws.path("report.json") +
                      " --traces " + ws.path("t.jsonl"));
    CHECK(r.exit_code == 0);
    json report = json::parse(slurp(ws.path("report.json")));
    CHECK(report["metrics"]["dcc_rate"].is_null());
    CHECK(report["metrics"]["mean_attempts"].is_null());
    // Every instance answered "5"; only gold "5" (q04) matches.
    CHECK(report["metrics"]["accuracy_first"].get<double>() == doctest::Approx(0.05));
    CHECK(report["n_records"] == 20);
}

TEST_CASE("reward reads stdin and prints the indicator") {
    CmdResult one = run("reward", dcc_fixtures::kTraceOledConsistent);
    CHECK(one.exit_code == 0);
    CHECK(one.output == "1\n");

    CmdResult zero = run("reward", dcc_fixtures::kTraceBouncyInconsistent);
    CHECK(zero.exit_code == 0);
    CHECK(zero.output == "0\n");

    CmdResult malformed = run("reward", "no tags at all");
    CHECK(malformed.exit_code == 0);
    CHECK(malformed.output == "0\n");
}

TEST_CASE("parse-check prints a verdict and always exits zero") {
    CmdResult triple = run("parse-check", dcc_fixtures::kTraceSunscreenThink);
    CHECK(triple.exit_code == 0);
    json v = json::parse(triple.output);
    CHECK(v["kind"] == "triple");
    CHECK(v["consistent"] == true);
    CHECK(v["answers"] == json::array({"4", "2", "4"}));
    CHECK(v["unclosed_think"] == false);  // the fixture closes its think block

    CmdResult dangling = run("parse-check", "<think>half a thought <answer>9</answer>");
    CHECK(dangling.exit_code == 0);
    json vd = json::parse(dangling.output);
    CHECK(vd["unclosed_think"] == true);

    CmdResult bad = run("parse-check", "<answer>1</answer><answer>2</answer>");
    CHECK(bad.exit_code == 0);
    json vb = json::parse(bad.output);
    CHECK(vb["kind"].is_null());
    CHECK(vb["parse_error"] == "wrong-answer-count");
}

TEST_CASE("mutate emits dataset, sidecar and exemplars for symbolic corpora") {
    Workspace ws("mutate");
    SymbolicProblem p;
    p.id = "orchard-1";
    p.relations.push_back({"a", make_const(12), "A is {a}."});
    p.relations.push_back({"b", make_op(ExprOp::Mul, make_const(3), make_var("a")), "B is triple A."});
    p.relations.push_back({"total", make_op(ExprOp::Add, make_var("a"), make_var("b")),
                           "The total combines A and B."});
    p.answer_expr = make_var("total");
    p.question_template = "What is the total?";
    p.variables = {{"a", ""}, {"b", ""}, {"total", ""}};
    std::ofstream(ws.path("corpus.jsonl"), std::ios::binary)
        << symbolic_to_json(p).dump() << "\n";

    CmdResult r = run("mutate --kind insert-conditional --in " + ws.path("corpus.jsonl") +
                      " --out " + ws.path("mutated.jsonl") + " --sidecar " + ws.path("side.jsonl") +
                      " --exemplars-out " + ws.path("ex.jsonl") + " --seed 7");
    CHECK(r.exit_code == 0);

    std::string mutated = slurp(ws.path("mutated.jsonl"));
    CHECK(line_count(mutated) == 1);
    json inst = json::parse(mutated.substr(0, mutated.find('\n')));
    CHECK(inst["id"] == "orchard-1");
    CHECK(inst["question"].get<std::string>().find("only calculated as usual") !=
          std::string::npos);

    json side = json::parse(slurp(ws.path("side.jsonl")));
    CHECK(side["kind"] == "insert-conditional");
    CHECK(side["base_gold"] == "48");
    CHECK(side["gold"] != side["base_gold"]);

    json ex = json::parse(slurp(ws.path("ex.jsonl")));
    CHECK(ex["answer0"] == "48");
    CHECK(ex["answer0_again"] == "48");
    CHECK(ex["answer1"] == side["gold"]);
}

TEST_CASE("mutate skips crux items without string literals, exit stays zero") {
    Workspace ws("mutskip");
    std::ofstream out(ws.path("crux.jsonl"), std::ios::binary);
    out << json{{"id", "c1"},
                {"code", "def f(s):\n    return s + \"tail\"\n"},
                {"input", "'x'"},
                {"output", "'xtail'"}}
               .dump()
        << "\n";
    out << json{{"id", "c2"},
                {"code", "def f(n):\n    return n * 2\n"},
                {"input", "3"},
                {"output", "6"}}
               .dump()
        << "\n";
    out.close();

    CmdResult r = run("mutate --kind mutate-string-cf --in " + ws.path("crux.jsonl") + " --out " +
                      ws.path("mutated.jsonl") + " --sidecar " + ws.path("side.jsonl") +
                      " --seed 3");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("warning: skipping c2") != std::string::npos);
    CHECK(line_count(slurp(ws.path("mutated.jsonl"))) == 1);
    json side = json::parse(slurp(ws.path("side.jsonl")));
    CHECK(side["id"] == "c1");
    CHECK(side["gold"].is_null());  // no execution oracle
    CHECK(side["intervention_fwd"].get<std::string>().find("is replaced by") !=
          std::string::npos);
}

TEST_CASE("report-merge combines reports into one csv") {
    Workspace ws("merge");
    write_dataset(ws.path("data.jsonl"), 20);
    write_mock_script(ws.path("script.json"),
                      "<answer>1</answer><answer>2</answer><answer>1</answer>");
    std::string common = "eval --dataset " + ws.path("data.jsonl") +
                         " --mock-script " + ws.path("script.json") +
                         " --pool-size 4 --n-batches 2 --batch-size 4 --mode dcc-noicl ";
    CHECK(run(common + "--seed 1 --out " + ws.path("r1.json") + " --traces " + ws.path("t1.jsonl"))
              .exit_code == 0);
    CHECK(run(common + "--seed 2 --out " + ws.path("r2.json") + " --traces " + ws.path("t2.jsonl"))
              .exit_code == 0);

    CmdResult merged = run("report-merge " + ws.path("r1.json") + " " + ws.path("r2.json") +
                           " --out " + ws.path("all.csv"));
    CHECK(merged.exit_code == 0);
    std::string csv = slurp(ws.path("all.csv"));
    CHECK(line_count(csv) == 3);  // header + 2 rows

    CmdResult to_stdout = run("report-merge " + ws.path("r1.json"));
    CHECK(to_stdout.exit_code == 0);
    CHECK(to_stdout.output.find("model,dataset,mode,dcc_rate,accuracy\n") == 0);

    CHECK(run("report-merge " + ws.path("missing.json")).exit_code == 1);
}
