#pragma once

#include <string>
#include <string_view>

namespace deid {

// UTF-8 <-> Unicode scalar values. Offsets everywhere in the toolkit count
// scalar values, so documents carry their text as std::u32string.
std::u32string utf8_decode(std::string_view bytes);
std::string utf8_encode(std::u32string_view text);

bool is_space(char32_t c);
bool is_punct(char32_t c);
bool is_upper(char32_t c);
bool is_digit(char32_t c);
bool is_alnum(char32_t c);

char32_t to_lower(char32_t c);
std::u32string to_lower(std::u32string_view s);

// Narrow copy with one byte per scalar value; non-ASCII becomes '?'. Lets
// std::regex run over text while keeping match positions equal to offsets.
std::string ascii_shadow(std::u32string_view s);

} // namespace deid
