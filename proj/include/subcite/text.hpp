#pragma once

#include <string>
#include <string_view>

namespace subcite::text {

/// Decodes UTF-8 into Unicode scalar values. Throws subcite::Error on
/// malformed input.
std::u32string decode_utf8(std::string_view utf8);
std::string encode_utf8(std::u32string_view chars);

/// Letter (general category L*) or decimal digit.
bool is_word_char(char32_t c);
bool is_space(char32_t c);
/// Uppercase or titlecase letter.
bool is_capital(char32_t c);
/// Simple (one-to-one) case folding.
char32_t fold_case(char32_t c);

std::u32string fold_case(std::u32string_view s);

}  // namespace subcite::text
