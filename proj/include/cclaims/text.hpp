#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace cclaims::detail {

inline bool is_token_char(unsigned char c) {
  return std::isalnum(c) != 0;
}

// Lowercase alphanumeric runs. "Tylenol, 4 hours!" -> {"tylenol", "4", "hours"}.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (is_token_char(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

inline std::unordered_set<std::string> token_set(std::string_view text) {
  auto tokens = tokenize(text);
  return {tokens.begin(), tokens.end()};
}

}  // namespace cclaims::detail
