#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dcc {

// Version tag for the normalization rule set, recorded in run manifests so
// reports can be compared across harness releases.
inline constexpr std::string_view kNormalizationVersion = "dcc-norm/1";

// Canonical string form used for every answer comparison in the harness.
// One pass applies, in order: trim, collapse internal whitespace runs to a
// single space, strip one surrounding quote or $...$ pair, strip one trailing
// period. Passes repeat until a fixpoint so the result is idempotent. Case is
// preserved and no numeric canonicalization happens: "1/2" and "0.5" stay
// distinct.
std::string normalize_answer(std::string_view raw);

struct ThinkStripResult {
    std::string text;
    bool unclosed_tag = false;  // an opening <think> had no closing tag (stripped to end)
};

// Removes every <think>...</think> span (non-greedy, any count). An unclosed
// opening tag strips to end-of-text and sets the warning flag instead of
// failing. Iterates to a fixpoint so stripping is idempotent even when a
// removal splices a new span together.
ThinkStripResult strip_think_blocks(std::string_view text);

enum class TraceKind { Single, Triple };

enum class ParseError {
    None,
    NoAnswers,         // zero <answer> spans
    WrongAnswerCount,  // 2 or >= 4 spans
    UnclosedTag,       // an <answer> opened but never closed
};

const char* parse_error_name(ParseError err);

struct ParsedTrace {
    TraceKind kind = TraceKind::Single;
    std::vector<std::string> answers;     // normalized; size 1 or 3
    std::vector<std::string> reasonings;  // raw inner text of well-formed <reasoning> spans
    std::string raw;                      // input text as given
};

// Extracts <answer> spans (and any <reasoning> spans) from a think-stripped
// completion. Exactly 1 span is a Single, exactly 3 a Triple; anything else
// is malformed and reported through `error` with a nullopt return, signalling
// the completion should be rejected and resampled. Tag matching is exact and
// case-sensitive; attributes are not recognized.
std::optional<ParsedTrace> parse_scaffold(std::string_view text, ParseError* error = nullptr);

}  // namespace dcc
