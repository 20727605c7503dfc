#include "dcc/mutation.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "dcc/code_lexer.hpp"
#include "dcc/errors.hpp"
#include "dcc/rng.hpp"
#include "dcc/trace_parser.hpp"

namespace dcc {

const char* mutation_kind_name(MutationKind kind) {
    switch (kind) {
        case MutationKind::InsertConditional: return "insert-conditional";
        case MutationKind::IrrelevantInfoHard: return "irrelevant-info-hard";
        case MutationKind::MutateStringCF: return "mutate-string-cf";
    }
    return "?";
}

std::optional<MutationKind> mutation_kind_from_name(std::string_view name) {
    if (name == "insert-conditional") return MutationKind::InsertConditional;
    if (name == "irrelevant-info-hard") return MutationKind::IrrelevantInfoHard;
    if (name == "mutate-string-cf") return MutationKind::MutateStringCF;
    return std::nullopt;
}

namespace {

// Per-problem RNG stream: the corpus seed mixed with the problem id.
Rng mutation_rng(const SymbolicProblem& problem, uint64_t seed) {
    return Rng(mix_seed(seed, fnv1a64(problem.id)));
}

int64_t floor_rational(const Rational& r) {
    if (r.num >= 0) return r.num / r.den;
    return -((-r.num + r.den - 1) / r.den);
}

int64_t ceil_rational(const Rational& r) {
    return -floor_rational(Rational(-r.num, r.den));
}

std::string display_var(const std::string& name) {
    std::string out = name;
    std::replace(out.begin(), out.end(), '_', ' ');
    return out;
}

std::string quantity_phrase(const ConditionalSpec& cond) {
    std::string out = "the value of " + display_var(cond.subject_var);
    if (cond.minus_var) out += " minus the value of " + display_var(*cond.minus_var);
    return out;
}

}  // namespace

bool conditional_predicate_holds(const SymbolicProblem& problem, const ConditionalSpec& cond) {
    auto env = eval_relations(problem);
    auto it = env.find(cond.subject_var);
    if (it == env.end()) {
        throw DccError(Errc::FormatError, "conditional references undefined '" + cond.subject_var + "'");
    }
    Rational q = it->second;
    if (cond.minus_var) {
        auto mt = env.find(*cond.minus_var);
        if (mt == env.end()) {
            throw DccError(Errc::FormatError,
                           "conditional references undefined '" + *cond.minus_var + "'");
        }
        q = q - mt->second;
    }
    // q >= t  <=>  !(q < t);  q <= t  <=>  !(t < q)
    return cond.at_least ? !rational_less(q, cond.threshold) : !rational_less(cond.threshold, q);
}

Rational apply_conditional(const SymbolicProblem& problem, const ConditionalSpec& cond) {
    return conditional_predicate_holds(problem, cond) ? eval_answer(problem) : cond.fallback;
}

bool conditional_is_counterfactual(const SymbolicProblem& problem, const ConditionalSpec& cond) {
    return !(apply_conditional(problem, cond) == eval_answer(problem));
}

std::string render_conditional_sentence(const ConditionalSpec& cond) {
    return "Suppose that the answer is only calculated as usual if " + quantity_phrase(cond) +
           " is " + (cond.at_least ? "at least " : "at most ") + cond.threshold.to_answer_string() +
           "; if this condition is not met, assume the answer is " +
           cond.fallback.to_answer_string() + ".";
}

std::string render_conditional_removal_sentence(const ConditionalSpec& cond) {
    return "Suppose that the condition about " + quantity_phrase(cond) +
           " is removed, so the answer is calculated as usual.";
}

MutationResult insert_conditional(const SymbolicProblem& problem, uint64_t seed) {
    const auto* answer_var = std::get_if<std::string>(&problem.answer_expr->node);
    if (!answer_var) {
        throw DccError(Errc::NoNumericAnswer,
                       "insert_conditional requires answer_expr to name a variable");
    }
    Rng rng = mutation_rng(problem, seed);
    Rational base_answer = eval_answer(problem);

    ConditionalSpec cond;
    cond.subject_var = *answer_var;
    std::vector<std::string> others;
    for (const auto& r : problem.relations) {
        if (r.target != *answer_var) others.push_back(r.target);
    }
    if (!others.empty() && rng.coin()) {
        cond.minus_var = others[rng.below(others.size())];
    }

    auto env = eval_relations(problem);
    Rational q = env.at(cond.subject_var);
    if (cond.minus_var) q = q - env.at(*cond.minus_var);

    cond.at_least = rng.coin();
    // Place the threshold strictly on the failing side of q.
    int64_t offset = rng.range(1, 9);
    cond.threshold = cond.at_least ? Rational(floor_rational(q) + offset)
                                   : Rational(ceil_rational(q) - offset);
    do {
        cond.fallback = rng.coin() ? Rational(0) : Rational(rng.range(1, 100));
    } while (cond.fallback == base_answer);

    // By construction the predicate is false and the gold flips to the
    // fallback; both are hard guarantees the evaluator re-checks.
    if (conditional_predicate_holds(problem, cond) || !conditional_is_counterfactual(problem, cond)) {
        throw DccError(Errc::NonFinite, "insert_conditional drew a non-counterfactual condition");
    }
    Rational mutated_gold = apply_conditional(problem, cond);

    std::string condition_sentence = render_conditional_sentence(cond);
    MutationResult result;
    result.kind = MutationKind::InsertConditional;
    result.seed = seed;
    result.base_gold = base_answer.to_answer_string();
    result.gold = mutated_gold.to_answer_string();
    result.intervention_fwd = condition_sentence;
    result.intervention_inv = render_conditional_removal_sentence(cond);

    std::string question;
    for (const auto& s : render_relation_sentences(problem)) {
        if (!question.empty()) question += " ";
        question += s;
    }
    question += " " + condition_sentence;
    if (!problem.question_template.empty()) {
        question += " " + render_question_sentence(problem);
    }

    result.mutated.id = problem.id;
    result.mutated.question = question;
    result.mutated.gold_answer = result.gold;
    result.mutated.symbolic = problem;
    result.mutated.rationale =
        derive_rationale(problem) + "\nHowever, the condition is not met, so the answer is " +
        mutated_gold.to_answer_string() + ".";
    return result;
}

namespace {

const char* kDistractorNames[] = {"Marcus", "Elena",  "Priya", "Jonas",  "Amara",
                                  "Felix",  "Norah",  "Tomas", "Ingrid", "Omar"};
const char* kDistractorNouns[] = {"marbles", "stickers", "coins",   "postcards",
                                  "seashells", "buttons", "crayons", "bottle caps"};

std::string lower_snake(std::string s) {
    for (auto& c : s) {
        if (c == ' ') c = '_';
        else c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return s;
}

bool text_contains_word(const std::string& text, const std::string& word) {
    auto pos = text.find(word);
    return pos != std::string::npos;
}

}  // namespace

MutationResult add_irrelevant_info(const SymbolicProblem& problem, uint64_t seed) {
    Rng rng = mutation_rng(problem, seed);
    std::string base_text = render_problem(problem);
    std::string base_gold = eval_symbolic(problem);

    // Magnitude range of the quantities already in the problem.
    auto env = eval_relations(problem);
    int64_t lo = 1, hi = 100;
    if (!env.empty()) {
        lo = INT64_MAX;
        hi = INT64_MIN;
        for (const auto& [name, value] : env) {
            int64_t mag = std::abs(floor_rational(value));
            lo = std::min(lo, mag);
            hi = std::max(hi, mag);
        }
        lo = std::max<int64_t>(1, lo);
        hi = std::max(hi, lo + 1);
    }

    SymbolicProblem mutated = problem;
    int n_distractors = 1 + static_cast<int>(rng.below(2));
    std::vector<std::string> sentences;
    std::vector<std::string> subjects;
    for (int d = 0; d < n_distractors; ++d) {
        std::string name, noun, var;
        // Redraw on any collision with existing names, text or variables.
        while (true) {
            name = kDistractorNames[rng.below(std::size(kDistractorNames))];
            noun = kDistractorNouns[rng.below(std::size(kDistractorNouns))];
            var = lower_snake(name + " " + noun);
            if (mutated.variables.count(var)) continue;
            if (text_contains_word(base_text, name)) continue;
            bool reused = false;
            for (const auto& s : subjects) {
                if (s == name) reused = true;
            }
            if (!reused) break;
        }
        int64_t value = rng.range(lo, hi);
        Relation rel;
        rel.target = var;
        rel.expr = make_const(Rational(value));
        rel.template_text = name + " has {" + var + "} " + noun + ".";
        size_t pos = rng.below(mutated.relations.size() + 1);
        mutated.relations.insert(mutated.relations.begin() + static_cast<ptrdiff_t>(pos),
                                 std::move(rel));
        mutated.variables[var] = "";
        subjects.push_back(name);
        sentences.push_back(name + " has " + std::to_string(value) + " " + noun + ".");
    }
    validate_symbolic(mutated);
    if (eval_symbolic(mutated) != base_gold) {
        throw DccError(Errc::NonFinite, "distractor changed the gold answer");
    }

    std::string joined;
    for (const auto& s : sentences) {
        if (!joined.empty()) joined += " ";
        joined += s;
    }
    std::string names;
    for (size_t i = 0; i < subjects.size(); ++i) {
        if (i > 0) names += i + 1 == subjects.size() ? " and " : ", ";
        names += subjects[i];
    }

    MutationResult result;
    result.kind = MutationKind::IrrelevantInfoHard;
    result.seed = seed;
    result.base_gold = base_gold;
    result.gold = base_gold;
    result.intervention_fwd =
        "Suppose the following information is added to the problem: " + joined;
    result.intervention_inv = "Suppose the added information about " + names +
                              " is removed, restoring the original problem.";
    result.mutated.id = problem.id;
    result.mutated.question = render_problem(mutated);
    result.mutated.gold_answer = base_gold;
    result.mutated.symbolic = mutated;
    // The distractors are irrelevant, so the base worked solution still applies.
    result.mutated.rationale = derive_rationale(problem);
    return result;
}

StringCfEdit mutate_string_literal(std::string_view code, uint64_t seed) {
    auto spans = find_string_literals(code);
    std::vector<size_t> candidates;
    std::set<std::string> contents;
    for (size_t i = 0; i < spans.size(); ++i) {
        std::string content(code.substr(spans[i].content_begin,
                                        spans[i].content_end - spans[i].content_begin));
        if (!content.empty()) candidates.push_back(i);
        contents.insert(std::move(content));
    }
    if (candidates.empty()) {
        throw DccError(Errc::NoStringLiteral, "no non-empty string literal to mutate");
    }
    Rng rng(mix_seed(seed, fnv1a64(code)));
    size_t pick = candidates[rng.below(candidates.size())];
    const auto& span = spans[pick];
    std::string original(code.substr(span.content_begin, span.content_end - span.content_begin));

    static constexpr std::string_view kAlphabet =
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
    std::string replacement;
    do {
        replacement.clear();
        for (size_t i = 0; i < original.size(); ++i) {
            replacement.push_back(kAlphabet[rng.below(kAlphabet.size())]);
        }
    } while (replacement == original || contents.count(replacement));

    StringCfEdit edit;
    edit.literal_index = pick;
    edit.original = original;
    edit.replacement = replacement;
    edit.mutated_code = std::string(code);
    edit.mutated_code.replace(span.content_begin, original.size(), replacement);
    return edit;
}

std::optional<std::string> apply_string_replacement(std::string_view code, std::string_view from,
                                                    std::string_view to) {
    auto spans = find_string_literals(code);
    std::optional<StringSpan> match;
    for (const auto& span : spans) {
        if (code.substr(span.content_begin, span.content_end - span.content_begin) == from) {
            if (match) return std::nullopt;  // ambiguous
            match = span;
        }
    }
    if (!match) return std::nullopt;
    std::string out(code);
    out.replace(match->content_begin, from.size(), std::string(to));
    return out;
}

MutationResult mutate_string_cf(const CruxItem& item, uint64_t seed) {
    StringCfEdit edit = mutate_string_literal(item.code, mix_seed(seed, fnv1a64(item.id)));
    CruxItem mutated_item = item;
    mutated_item.code = edit.mutated_code;

    MutationResult result;
    result.kind = MutationKind::MutateStringCF;
    result.seed = seed;
    result.intervention_fwd =
        "Suppose the string \"" + edit.original + "\" is replaced by \"" + edit.replacement + "\".";
    result.intervention_inv =
        "Suppose the string \"" + edit.replacement + "\" is replaced by \"" + edit.original + "\".";
    result.mutated.id = item.id;
    result.mutated.question = render_crux_question(mutated_item);
    // Gold for mutated code needs program execution; left absent unless an
    // external oracle fills it in.
    result.base_gold = normalize_answer(item.output);
    return result;
}

}  // namespace dcc
