#include "dcc/code_lexer.hpp"

#include <cctype>

#include "dcc/errors.hpp"

namespace dcc {

namespace {

bool ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

}  // namespace

std::vector<Token> tokenize(std::string_view code) {
    std::vector<Token> tokens;
    size_t i = 0;
    const size_t n = code.size();
    while (i < n) {
        char c = code[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        size_t begin = i;
        if (c == '#') {
            while (i < n && code[i] != '\n') ++i;
            tokens.push_back({TokKind::Comment, begin, i});
            continue;
        }
        if (c == '"' || c == '\'') {
            char quote = c;
            ++i;
            bool closed = false;
            while (i < n) {
                if (code[i] == '\\') {
                    i += 2;  // escape consumes the next byte, even a quote
                    continue;
                }
                if (code[i] == '\n') break;
                if (code[i] == quote) {
                    ++i;
                    closed = true;
                    break;
                }
                ++i;
            }
            if (!closed || i > n) {
                throw DccError(Errc::UnterminatedString,
                               "string starting at byte " + std::to_string(begin) + " never closes");
            }
            tokens.push_back({TokKind::String, begin, i});
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            while (i < n && (std::isdigit(static_cast<unsigned char>(code[i])) || code[i] == '.')) ++i;
            tokens.push_back({TokKind::Number, begin, i});
            continue;
        }
        if (ident_start(c)) {
            while (i < n && ident_char(code[i])) ++i;
            tokens.push_back({TokKind::Ident, begin, i});
            continue;
        }
        ++i;
        tokens.push_back({TokKind::Punct, begin, i});
    }
    return tokens;
}

std::vector<StringSpan> find_string_literals(std::string_view code) {
    std::vector<StringSpan> spans;
    for (const auto& tok : tokenize(code)) {
        if (tok.kind != TokKind::String) continue;
        spans.push_back({tok.begin + 1, tok.end - 1, code[tok.begin]});
    }
    return spans;
}

std::vector<TokKind> token_kinds(std::string_view code) {
    std::vector<TokKind> kinds;
    for (const auto& tok : tokenize(code)) kinds.push_back(tok.kind);
    return kinds;
}

}  // namespace dcc
