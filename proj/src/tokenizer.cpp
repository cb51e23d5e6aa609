#include "icl/tokenizer.hpp"

#include <array>
#include <string>

#include "icl/error.hpp"

namespace icl::tokenizer {
namespace {

constexpr std::array<std::string_view, 9> kSpecial = {"In:", "Out:", " ", "\n", ",",
                                                      ".",   "+",    "-", ":"};

TokenId char_id(char c) {
  if (c >= '0' && c <= '9') return 9 + (c - '0');
  if (c >= 'a' && c <= 'z') return 19 + (c - 'a');
  if (c >= 'A' && c <= 'Z') return 45 + (c - 'A');
  for (std::size_t i = 2; i < kSpecial.size(); ++i) {
    if (kSpecial[i][0] == c) return static_cast<TokenId>(i);
  }
  return -1;
}

const std::array<std::string, kVocabSize>& table() {
  static const std::array<std::string, kVocabSize> t = [] {
    std::array<std::string, kVocabSize> out;
    for (std::size_t i = 0; i < kSpecial.size(); ++i) out[i] = std::string(kSpecial[i]);
    for (int i = 0; i < 10; ++i) out[9 + i] = std::string(1, static_cast<char>('0' + i));
    for (int i = 0; i < 26; ++i) out[19 + i] = std::string(1, static_cast<char>('a' + i));
    for (int i = 0; i < 26; ++i) out[45 + i] = std::string(1, static_cast<char>('A' + i));
    return out;
  }();
  return t;
}

}  // namespace

std::vector<TokenId> tokenize(std::string_view text) {
  std::vector<TokenId> ids;
  ids.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text.substr(i, 3) == "In:") {
      ids.push_back(kIn);
      i += 3;
      continue;
    }
    if (text.substr(i, 4) == "Out:") {
      ids.push_back(kOut);
      i += 4;
      continue;
    }
    const TokenId id = char_id(text[i]);
    if (id < 0) {
      throw Error(ErrorCode::UnknownSymbol,
                  "character code " + std::to_string(static_cast<unsigned char>(text[i])) +
                      " at offset " + std::to_string(i));
    }
    ids.push_back(id);
    ++i;
  }
  return ids;
}

std::string detokenize(std::span<const TokenId> ids) {
  std::string out;
  for (TokenId id : ids) out += token_text(id);
  return out;
}

std::string_view token_text(TokenId id) {
  if (id < 0 || id >= kVocabSize) {
    throw Error(ErrorCode::UnknownSymbol, "token id " + std::to_string(id));
  }
  return table()[static_cast<std::size_t>(id)];
}

bool is_marker(TokenId id) { return id == kIn || id == kOut; }

}  // namespace icl::tokenizer
