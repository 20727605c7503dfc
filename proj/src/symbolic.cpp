#include "dcc/symbolic.hpp"

#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "dcc/errors.hpp"

namespace dcc {

namespace {

using i128 = __int128;

int64_t checked_narrow(i128 v) {
    if (v > INT64_MAX || v < INT64_MIN) {
        throw DccError(Errc::NonFinite, "rational overflow");
    }
    return static_cast<int64_t>(v);
}

Rational make_canonical(i128 num, i128 den) {
    if (den == 0) throw DccError(Errc::DivisionByZero, "rational with zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    i128 a = num < 0 ? -num : num;
    i128 b = den;
    while (b != 0) {
        i128 t = a % b;
        a = b;
        b = t;
    }
    if (a != 0) {
        num /= a;
        den /= a;
    }
    Rational r;  // fields set directly: the value is canonical here
    r.num = checked_narrow(num);
    r.den = checked_narrow(den);
    return r;
}

}  // namespace

Rational::Rational(int64_t n) : num(n), den(1) {}

Rational::Rational(int64_t n, int64_t d) {
    Rational r = make_canonical(n, d);
    num = r.num;
    den = r.den;
}

std::string Rational::to_answer_string() const {
    if (den == 1) return std::to_string(num);
    return std::to_string(num) + "/" + std::to_string(den);
}

Rational operator+(const Rational& a, const Rational& b) {
    return make_canonical(i128(a.num) * b.den + i128(b.num) * a.den, i128(a.den) * b.den);
}

Rational operator-(const Rational& a, const Rational& b) {
    return make_canonical(i128(a.num) * b.den - i128(b.num) * a.den, i128(a.den) * b.den);
}

Rational operator*(const Rational& a, const Rational& b) {
    return make_canonical(i128(a.num) * b.num, i128(a.den) * b.den);
}

Rational operator/(const Rational& a, const Rational& b) {
    if (b.num == 0) throw DccError(Errc::DivisionByZero, "division by zero");
    return make_canonical(i128(a.num) * b.den, i128(a.den) * b.num);
}

bool rational_less(const Rational& a, const Rational& b) {
    return i128(a.num) * b.den < i128(b.num) * a.den;
}

ExprPtr make_const(Rational value) {
    return std::make_shared<Expr>(Expr{value});
}

ExprPtr make_var(std::string name) {
    return std::make_shared<Expr>(Expr{std::move(name)});
}

ExprPtr make_op(ExprOp op, ExprPtr lhs, ExprPtr rhs) {
    return std::make_shared<Expr>(Expr{std::make_pair(op, std::vector<ExprPtr>{std::move(lhs), std::move(rhs)})});
}

namespace {

const char* op_name(ExprOp op) {
    switch (op) {
        case ExprOp::Add: return "add";
        case ExprOp::Sub: return "sub";
        case ExprOp::Mul: return "mul";
        case ExprOp::Div: return "div";
    }
    return "?";
}

ExprOp op_from_name(const std::string& s) {
    if (s == "add") return ExprOp::Add;
    if (s == "sub") return ExprOp::Sub;
    if (s == "mul") return ExprOp::Mul;
    if (s == "div") return ExprOp::Div;
    throw DccError(Errc::FormatError, "unknown expression op '" + s + "'");
}

const char* op_symbol(ExprOp op) {
    switch (op) {
        case ExprOp::Add: return "+";
        case ExprOp::Sub: return "-";
        case ExprOp::Mul: return "*";
        case ExprOp::Div: return "/";
    }
    return "?";
}

Rational eval_expr(const ExprPtr& e, const std::map<std::string, Rational>& env) {
    if (const auto* c = std::get_if<Rational>(&e->node)) return *c;
    if (const auto* v = std::get_if<std::string>(&e->node)) {
        auto it = env.find(*v);
        if (it == env.end()) {
            throw DccError(Errc::FormatError, "undefined variable '" + *v + "'");
        }
        return it->second;
    }
    const auto& [op, args] = std::get<std::pair<ExprOp, std::vector<ExprPtr>>>(e->node);
    Rational lhs = eval_expr(args[0], env);
    Rational rhs = eval_expr(args[1], env);
    switch (op) {
        case ExprOp::Add: return lhs + rhs;
        case ExprOp::Sub: return lhs - rhs;
        case ExprOp::Mul: return lhs * rhs;
        case ExprOp::Div: return lhs / rhs;
    }
    throw DccError(Errc::NonFinite, "unreachable op");
}

// Infix rendering with variable values substituted, for worked solutions.
std::string render_expr(const ExprPtr& e, const std::map<std::string, Rational>& env) {
    if (const auto* c = std::get_if<Rational>(&e->node)) return c->to_answer_string();
    if (const auto* v = std::get_if<std::string>(&e->node)) {
        auto it = env.find(*v);
        return it == env.end() ? *v : it->second.to_answer_string();
    }
    const auto& [op, args] = std::get<std::pair<ExprOp, std::vector<ExprPtr>>>(e->node);
    std::string lhs = render_expr(args[0], env);
    std::string rhs = render_expr(args[1], env);
    bool leaf_only = args[0]->node.index() != 2 && args[1]->node.index() != 2;
    std::string body = lhs + " " + op_symbol(op) + " " + rhs;
    return leaf_only ? body : "(" + body + ")";
}

}  // namespace

ExprPtr expr_from_json(const nlohmann::json& j) {
    if (j.is_number_integer()) return make_const(Rational(j.get<int64_t>()));
    if (j.is_string()) return make_var(j.get<std::string>());
    if (j.is_object() && j.contains("op")) {
        const auto& args = j.at("args");
        if (!args.is_array() || args.size() != 2) {
            throw DccError(Errc::FormatError, "expression op requires exactly 2 args");
        }
        return make_op(op_from_name(j.at("op").get<std::string>()), expr_from_json(args[0]),
                       expr_from_json(args[1]));
    }
    if (j.is_object() && j.contains("num")) {
        return make_const(Rational(j.at("num").get<int64_t>(), j.value("den", int64_t{1})));
    }
    throw DccError(Errc::FormatError, "unrecognized expression node: " + j.dump());
}

nlohmann::json expr_to_json(const ExprPtr& e) {
    if (const auto* c = std::get_if<Rational>(&e->node)) {
        if (c->is_integer()) return c->num;
        return nlohmann::json{{"num", c->num}, {"den", c->den}};
    }
    if (const auto* v = std::get_if<std::string>(&e->node)) return *v;
    const auto& [op, args] = std::get<std::pair<ExprOp, std::vector<ExprPtr>>>(e->node);
    return nlohmann::json{{"op", op_name(op)},
                          {"args", nlohmann::json::array({expr_to_json(args[0]), expr_to_json(args[1])})}};
}

void collect_vars(const ExprPtr& e, std::vector<std::string>* out) {
    if (const auto* v = std::get_if<std::string>(&e->node)) {
        out->push_back(*v);
        return;
    }
    if (const auto* p = std::get_if<std::pair<ExprOp, std::vector<ExprPtr>>>(&e->node)) {
        for (const auto& arg : p->second) collect_vars(arg, out);
    }
}

SymbolicProblem symbolic_from_json(const nlohmann::json& j) {
    SymbolicProblem p;
    p.id = j.value("id", std::string{});
    if (j.contains("variables")) {
        for (const auto& [name, unit] : j.at("variables").items()) {
            p.variables[name] = unit.is_string() ? unit.get<std::string>() : std::string{};
        }
    }
    for (const auto& rj : j.at("relations")) {
        Relation r;
        r.target = rj.at("target").get<std::string>();
        r.expr = expr_from_json(rj.at("expr"));
        r.template_text = rj.value("template", std::string{});
        p.relations.push_back(std::move(r));
    }
    p.answer_expr = expr_from_json(j.at("answer_expr"));
    p.question_template = j.value("question_template", std::string{});
    // Variables may be declared implicitly by their defining relation.
    for (const auto& r : p.relations) {
        p.variables.emplace(r.target, "");
    }
    validate_symbolic(p);
    return p;
}

nlohmann::json symbolic_to_json(const SymbolicProblem& p) {
    nlohmann::json j;
    j["id"] = p.id;
    j["variables"] = nlohmann::json::object();
    for (const auto& [name, unit] : p.variables) j["variables"][name] = unit;
    j["relations"] = nlohmann::json::array();
    for (const auto& r : p.relations) {
        j["relations"].push_back(nlohmann::json{
            {"target", r.target}, {"expr", expr_to_json(r.expr)}, {"template", r.template_text}});
    }
    j["answer_expr"] = expr_to_json(p.answer_expr);
    j["question_template"] = p.question_template;
    return j;
}

std::vector<SymbolicProblem> load_symbolic_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DccError(Errc::Io, "cannot open " + path);
    std::vector<SymbolicProblem> out;
    // Array files start with '['; anything else is treated as JSONL.
    char first = 0;
    in >> std::ws;
    first = static_cast<char>(in.peek());
    if (first == '[') {
        nlohmann::json arr;
        try {
            in >> arr;
        } catch (const nlohmann::json::exception& e) {
            throw DccError(Errc::FormatError, path + ": " + e.what());
        }
        for (const auto& j : arr) out.push_back(symbolic_from_json(j));
        return out;
    }
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(symbolic_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw DccError(Errc::FormatError,
                           path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void validate_symbolic(const SymbolicProblem& p) {
    std::set<std::string> defined;
    for (const auto& r : p.relations) {
        if (r.target.empty()) throw DccError(Errc::FormatError, "relation with empty target");
        if (defined.count(r.target)) {
            throw DccError(Errc::FormatError, "variable '" + r.target + "' defined twice");
        }
        std::vector<std::string> used;
        collect_vars(r.expr, &used);
        for (const auto& v : used) {
            if (!defined.count(v)) {
                throw DccError(Errc::FormatError,
                               "variable '" + v + "' used before definition in '" + r.target + "'");
            }
        }
        defined.insert(r.target);
    }
    if (!p.answer_expr) throw DccError(Errc::FormatError, "missing answer_expr");
    std::vector<std::string> used;
    collect_vars(p.answer_expr, &used);
    for (const auto& v : used) {
        if (!defined.count(v)) {
            throw DccError(Errc::FormatError, "answer_expr references undefined '" + v + "'");
        }
    }
}

std::map<std::string, Rational> eval_relations(const SymbolicProblem& p) {
    std::map<std::string, Rational> env;
    for (const auto& r : p.relations) {
        env[r.target] = eval_expr(r.expr, env);
    }
    return env;
}

Rational eval_answer(const SymbolicProblem& p) {
    auto env = eval_relations(p);
    return eval_expr(p.answer_expr, env);
}

std::string eval_symbolic(const SymbolicProblem& p) {
    return eval_answer(p).to_answer_string();
}

namespace {

std::string fill_template(const std::string& tpl, const std::map<std::string, Rational>& env) {
    std::string out;
    size_t pos = 0;
    while (pos < tpl.size()) {
        size_t open = tpl.find('{', pos);
        if (open == std::string::npos) {
            out.append(tpl, pos, std::string::npos);
            break;
        }
        out.append(tpl, pos, open - pos);
        size_t close = tpl.find('}', open);
        if (close == std::string::npos) {
            throw DccError(Errc::FormatError, "unclosed { in template: " + tpl);
        }
        std::string name = tpl.substr(open + 1, close - open - 1);
        auto it = env.find(name);
        if (it == env.end()) {
            throw DccError(Errc::FormatError, "template references undefined '" + name + "'");
        }
        out += it->second.to_answer_string();
        pos = close + 1;
    }
    return out;
}

}  // namespace

std::vector<std::string> render_relation_sentences(const SymbolicProblem& p) {
    auto env = eval_relations(p);
    std::vector<std::string> out;
    for (const auto& r : p.relations) {
        if (r.template_text.empty()) continue;
        out.push_back(fill_template(r.template_text, env));
    }
    return out;
}

std::string render_question_sentence(const SymbolicProblem& p) {
    auto env = eval_relations(p);
    return fill_template(p.question_template, env);
}

std::string render_problem(const SymbolicProblem& p) {
    std::string out;
    for (const auto& s : render_relation_sentences(p)) {
        if (!out.empty()) out += " ";
        out += s;
    }
    if (!p.question_template.empty()) {
        if (!out.empty()) out += " ";
        out += render_question_sentence(p);
    }
    return out;
}

std::string derive_rationale(const SymbolicProblem& p) {
    std::map<std::string, Rational> env;
    std::ostringstream out;
    for (const auto& r : p.relations) {
        Rational value = eval_expr(r.expr, env);
        std::string shown = render_expr(r.expr, env);
        env[r.target] = value;
        out << r.target << " = " << shown;
        if (shown != value.to_answer_string()) out << " = " << value.to_answer_string();
        out << "\n";
    }
    Rational answer = eval_expr(p.answer_expr, env);
    out << "The answer is " << answer.to_answer_string() << ".";
    return out.str();
}

}  // namespace dcc
