#include "dcc/trace_parser.hpp"

#include <cctype>

namespace dcc {

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";
constexpr std::string_view kReasoningOpen = "<reasoning>";
constexpr std::string_view kReasoningClose = "</reasoning>";

bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

std::string trim(std::string_view s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_run = false;
    for (char c : s) {
        if (is_space(c)) {
            in_run = true;
            continue;
        }
        if (in_run && !out.empty()) out.push_back(' ');
        in_run = false;
        out.push_back(c);
    }
    return out;
}

bool is_pair_delimiter(char c) {
    return c == '"' || c == '\'' || c == '$';
}

std::string normalize_pass(std::string_view s) {
    std::string out = collapse_whitespace(trim(s));
    if (out.size() >= 2 && out.front() == out.back() && is_pair_delimiter(out.front())) {
        out = out.substr(1, out.size() - 2);
    }
    if (!out.empty() && out.back() == '.') {
        out.pop_back();
    }
    return out;
}

// One left-to-right removal pass over <think> spans.
std::string strip_think_pass(std::string_view text, bool* unclosed) {
    std::string out;
    out.reserve(text.size());
    size_t pos = 0;
    while (pos < text.size()) {
        size_t open = text.find(kThinkOpen, pos);
        if (open == std::string_view::npos) {
            out.append(text.substr(pos));
            break;
        }
        out.append(text.substr(pos, open - pos));
        size_t close = text.find(kThinkClose, open + kThinkOpen.size());
        if (close == std::string_view::npos) {
            *unclosed = true;
            break;  // unterminated block: drop through end of text
        }
        pos = close + kThinkClose.size();
    }
    return out;
}

// Collects the inner spans of well-formed <tag>...</tag> pairs in a single
// linear scan, regex-global style. Returns false iff `strict` and an opening
// tag is left dangling after the last well-formed span.
bool collect_spans(std::string_view text, std::string_view open_tag, std::string_view close_tag,
                   bool strict, std::vector<std::string>* out) {
    size_t pos = 0;
    while (true) {
        size_t open = text.find(open_tag, pos);
        if (open == std::string_view::npos) return true;
        size_t body = open + open_tag.size();
        size_t close = text.find(close_tag, body);
        if (close == std::string_view::npos) return !strict;
        out->emplace_back(text.substr(body, close - body));
        pos = close + close_tag.size();
    }
}

}  // namespace

std::string normalize_answer(std::string_view raw) {
    std::string cur(raw);
    while (true) {
        std::string next = normalize_pass(cur);
        if (next == cur) return cur;
        cur = std::move(next);
    }
}

ThinkStripResult strip_think_blocks(std::string_view text) {
    ThinkStripResult result;
    result.text = std::string(text);
    while (true) {
        bool unclosed = false;
        std::string next = strip_think_pass(result.text, &unclosed);
        result.unclosed_tag = result.unclosed_tag || unclosed;
        if (next == result.text) break;
        result.text = std::move(next);
    }
    return result;
}

const char* parse_error_name(ParseError err) {
    switch (err) {
        case ParseError::None: return "none";
        case ParseError::NoAnswers: return "no-answers";
        case ParseError::WrongAnswerCount: return "wrong-answer-count";
        case ParseError::UnclosedTag: return "unclosed-tag";
    }
    return "unknown";
}

std::optional<ParsedTrace> parse_scaffold(std::string_view text, ParseError* error) {
    ParseError local = ParseError::None;
    ParseError& err = error ? *error : local;
    err = ParseError::None;

    std::vector<std::string> raw_answers;
    if (!collect_spans(text, kAnswerOpen, kAnswerClose, /*strict=*/true, &raw_answers)) {
        err = ParseError::UnclosedTag;
        return std::nullopt;
    }
    if (raw_answers.empty()) {
        err = ParseError::NoAnswers;
        return std::nullopt;
    }
    if (raw_answers.size() != 1 && raw_answers.size() != 3) {
        err = ParseError::WrongAnswerCount;
        return std::nullopt;
    }

    ParsedTrace trace;
    trace.kind = raw_answers.size() == 1 ? TraceKind::Single : TraceKind::Triple;
    trace.raw = std::string(text);
    for (const auto& a : raw_answers) trace.answers.push_back(normalize_answer(a));
    // Reasoning blocks are optional and uncounted; a dangling open is ignored.
    collect_spans(text, kReasoningOpen, kReasoningClose, /*strict=*/false, &trace.reasonings);
    return trace;
}

}  // namespace dcc
