#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace dcc {

// Lexer for a small Python-like subset: enough to locate string literals
// reliably. Handles single- and double-quoted strings with backslash
// escapes, and '#' comments running to end of line. Strings do not span
// lines; a newline or EOF inside one raises UnterminatedString.

enum class TokKind { Ident, Number, String, Comment, Punct };

struct Token {
    TokKind kind;
    size_t begin;  // byte offsets into the source
    size_t end;
};

std::vector<Token> tokenize(std::string_view code);

// Inner content of a string literal, quotes excluded. Escape sequences are
// kept raw: the content of 'a\'b' is the four bytes a \ ' b.
struct StringSpan {
    size_t content_begin;
    size_t content_end;
    char quote;
};

std::vector<StringSpan> find_string_literals(std::string_view code);

// Token kinds in order, for structure-preservation checks.
std::vector<TokKind> token_kinds(std::string_view code);

}  // namespace dcc
