#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

namespace dcc {

// Exact rational arithmetic for gold-answer oracles. Always stored canonical:
// den > 0, gcd(|num|, den) == 1. Arithmetic goes through 128-bit
// intermediates; a result that cannot be reduced back into int64 throws
// NonFinite rather than silently wrapping.
struct Rational {
    int64_t num = 0;
    int64_t den = 1;

    Rational() = default;
    Rational(int64_t n);  // NOLINT: implicit integer promotion is intended
    Rational(int64_t n, int64_t d);

    bool is_integer() const { return den == 1; }
    // Integer values render bare ("55"); non-integers as "num/den" ("1/2").
    std::string to_answer_string() const;

    friend bool operator==(const Rational&, const Rational&) = default;
};

Rational operator+(const Rational& a, const Rational& b);
Rational operator-(const Rational& a, const Rational& b);
Rational operator*(const Rational& a, const Rational& b);
Rational operator/(const Rational& a, const Rational& b);  // DivisionByZero
bool rational_less(const Rational& a, const Rational& b);

// Expression tree over rational constants, variable references and the four
// binary operations. JSON encoding: an integer or "a/b" object form for
// constants, a bare string for a variable reference, and
// {"op": "add|sub|mul|div", "args": [lhs, rhs]} for operations.
struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class ExprOp { Add, Sub, Mul, Div };

struct Expr {
    std::variant<Rational, std::string, std::pair<ExprOp, std::vector<ExprPtr>>> node;
};

ExprPtr make_const(Rational value);
ExprPtr make_var(std::string name);
ExprPtr make_op(ExprOp op, ExprPtr lhs, ExprPtr rhs);

ExprPtr expr_from_json(const nlohmann::json& j);
nlohmann::json expr_to_json(const ExprPtr& e);
// Variable names referenced anywhere in the expression.
void collect_vars(const ExprPtr& e, std::vector<std::string>* out);

// One definitional equation: target := expr, plus the natural-language
// sentence template that states it. Templates may interpolate any variable
// defined at or before this relation with "{name}".
struct Relation {
    std::string target;
    ExprPtr expr;
    std::string template_text;
};

// A word problem in symbolic form: an ordered DAG of relations (each variable
// defined exactly once, before use), the queried expression, and sentence
// templates for rendering back to natural language.
struct SymbolicProblem {
    std::string id;
    std::map<std::string, std::string> variables;  // name -> unit ("" allowed)
    std::vector<Relation> relations;
    ExprPtr answer_expr;
    std::string question_template;
};

SymbolicProblem symbolic_from_json(const nlohmann::json& j);
nlohmann::json symbolic_to_json(const SymbolicProblem& p);
// Loads either a JSON array of problems or JSONL, one problem per line.
std::vector<SymbolicProblem> load_symbolic_corpus(const std::string& path);

// Structural validation: every relation target declared and defined exactly
// once, expressions reference only previously defined targets, answer_expr
// references only defined variables. Throws FormatError.
void validate_symbolic(const SymbolicProblem& p);

// Environment of evaluated variables, in relation order.
std::map<std::string, Rational> eval_relations(const SymbolicProblem& p);
Rational eval_answer(const SymbolicProblem& p);
// Gold answer rendered per the dataset convention (normalized form).
std::string eval_symbolic(const SymbolicProblem& p);

// Renders the problem to natural language: relation sentences in order, then
// the question sentence, joined with single spaces. "{name}" slots are filled
// with evaluated variable values.
std::string render_problem(const SymbolicProblem& p);
// The same text in parts, for mutations that splice in extra sentences.
std::vector<std::string> render_relation_sentences(const SymbolicProblem& p);
std::string render_question_sentence(const SymbolicProblem& p);

// Derives a short worked solution ("x = 2 * 25 = 50" per line, then the
// answer) for use as exemplar reasoning text.
std::string derive_rationale(const SymbolicProblem& p);

}  // namespace dcc
