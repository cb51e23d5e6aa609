#pragma once

#include <array>
#include <span>
#include <string_view>

// Fixed word lists shipped with the library. Every entry is lowercase ASCII.
namespace icl::lexicon {

struct AntonymPair {
  std::string_view first;
  std::string_view second;
};

std::span<const std::string_view> common_words();    // 500 words, 3-9 letters
std::span<const std::string_view> positive_words();  // 50
std::span<const std::string_view> negative_words();  // 50
std::span<const AntonymPair> antonym_pairs();        // 80 disjoint pairs
std::span<const std::string_view> number_words();    // "zero" .. "twenty"

}  // namespace icl::lexicon
