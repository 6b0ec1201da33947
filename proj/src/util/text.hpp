#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace agentloop {

std::string_view trim(std::string_view s);

// Whitespace-separated token count.
int word_count(std::string_view s);

std::vector<std::string> split_words(std::string_view s);

bool contains_ci(std::string_view haystack, std::string_view needle);

std::string to_lower(std::string_view s);

// Formats a fraction as a percentage with two decimals, e.g. "13.36".
// Multiplies by 100 before the single division so planted rates such as
// 1336/10000 print exactly.
std::string format_percent(long long numerator, long long denominator);

double percent_value(long long numerator, long long denominator);

}  // namespace agentloop
