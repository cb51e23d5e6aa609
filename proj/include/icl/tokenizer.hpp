#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace icl {

using TokenId = int;

// Closed, character-level vocabulary with the two format markers as
// whole tokens. Ids are stable:
//   0 "In:"  1 "Out:"  2 " "  3 "\n"  4 ","  5 "."  6 "+"  7 "-"  8 ":"
//   9..18 digits, 19..44 a-z, 45..70 A-Z
namespace tokenizer {

inline constexpr TokenId kIn = 0;
inline constexpr TokenId kOut = 1;
inline constexpr TokenId kSpace = 2;
inline constexpr TokenId kNewline = 3;
inline constexpr int kVocabSize = 71;

// Greedy: a marker wins over its first character. Throws UnknownSymbol.
std::vector<TokenId> tokenize(std::string_view text);
std::string detokenize(std::span<const TokenId> ids);
std::string_view token_text(TokenId id);
bool is_marker(TokenId id);

}  // namespace tokenizer
}  // namespace icl
