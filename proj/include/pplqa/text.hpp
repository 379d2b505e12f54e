#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace pplqa {

std::string_view trim(std::string_view text) noexcept;

/// Number of Unicode code points in a UTF-8 string. Character offsets
/// throughout the library are code-point offsets, matching the
/// `text_offset` convention of OpenAI-compatible servers.
std::size_t utf8_length(std::string_view text) noexcept;

std::string to_lower_ascii(std::string_view text);

struct WordSpan {
    std::string_view text;
    std::size_t offset = 0;  // code points from the start of the input
};

/// Splits on ASCII whitespace.
std::vector<WordSpan> split_words(std::string_view text);

std::size_t word_count(std::string_view text);

std::vector<std::string> split(std::string_view text, char delimiter);

std::string join(const std::vector<std::string>& parts, std::string_view separator);

}  // namespace pplqa
