#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "dcc/dataset.hpp"
#include "dcc/symbolic.hpp"
#include "dcc/task.hpp"

namespace dcc {

enum class MutationKind { InsertConditional, IrrelevantInfoHard, MutateStringCF };

const char* mutation_kind_name(MutationKind kind);
std::optional<MutationKind> mutation_kind_from_name(std::string_view name);

struct MutationResult {
    TaskInstance mutated;
    std::string gold;       // normalized gold of the mutated instance; "" when no oracle
    std::string base_gold;  // normalized gold of the base instance, when known
    std::string intervention_fwd;
    std::string intervention_inv;
    MutationKind kind = MutationKind::InsertConditional;
    uint64_t seed = 0;
};

// A predicate wrapped around the answer: compare `subject` (optionally minus
// another variable) against a threshold; when the predicate fails, the
// answer is the fallback instead of the usual value.
struct ConditionalSpec {
    std::string subject_var;
    std::optional<std::string> minus_var;
    bool at_least = true;  // comparator: >= threshold; otherwise <=
    Rational threshold;
    Rational fallback;
};

bool conditional_predicate_holds(const SymbolicProblem& problem, const ConditionalSpec& cond);
// Gold under the condition: the usual answer when the predicate holds, the
// fallback when it does not.
Rational apply_conditional(const SymbolicProblem& problem, const ConditionalSpec& cond);
// True when the condition actually changes the gold answer; the default
// policy only emits such conditions.
bool conditional_is_counterfactual(const SymbolicProblem& problem, const ConditionalSpec& cond);
std::string render_conditional_sentence(const ConditionalSpec& cond);
std::string render_conditional_removal_sentence(const ConditionalSpec& cond);

// Wraps the answer in a predicate drawn to be FALSE on the base problem, so
// the gold answer changes to the fallback with certainty. The threshold sits
// strictly on the failing side of the compared quantity, and the fallback is
// redrawn until it differs from the base gold. Deterministic in
// (problem, seed). Throws NoNumericAnswer when answer_expr is not a plain
// variable reference.
MutationResult insert_conditional(const SymbolicProblem& problem, uint64_t seed);

// Splices 1-2 distractor sentences into the problem: fresh named quantities
// (collisions with existing names are redrawn) whose values sit in the
// magnitude range of existing quantities. The distractors enter the symbolic
// form as unused relations, so the gold answer is provably unchanged.
MutationResult add_irrelevant_info(const SymbolicProblem& problem, uint64_t seed);

// Core string counterfactual: replace one uniformly chosen non-empty string
// literal's content with a random [a-zA-Z0-9] sequence of the same byte
// length, unique among the program's literal contents. Throws
// NoStringLiteral when no non-empty literal exists.
struct StringCfEdit {
    size_t literal_index = 0;  // index among the code's string literals
    std::string original;      // X
    std::string replacement;   // Y
    std::string mutated_code;
};

StringCfEdit mutate_string_literal(std::string_view code, uint64_t seed);

// Replaces the one literal whose content equals `from` with `to`; nullopt
// when `from` matches zero or several literals (the edit would be ambiguous).
std::optional<std::string> apply_string_replacement(std::string_view code, std::string_view from,
                                                    std::string_view to);

MutationResult mutate_string_cf(const CruxItem& item, uint64_t seed);

}  // namespace dcc
