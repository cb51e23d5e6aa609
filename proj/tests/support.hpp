#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "icl/error.hpp"
#include "icl/model.hpp"

namespace testing {

// Code of the icl::Error thrown by fn, or nullopt if nothing was thrown.
template <typename F>
std::optional<icl::ErrorCode> error_of(F&& fn) {
  try {
    fn();
  } catch (const icl::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline icl::ModelConfig tiny_config(std::uint64_t seed = 7) {
  icl::ModelConfig c;
  c.n_layers = 2;
  c.d_model = 16;
  c.n_heads = 2;
  c.d_ff = 32;
  c.max_seq = 256;
  c.seed = seed;
  return c;
}

inline icl::ModelConfig small_config(std::uint64_t seed = 11) {
  icl::ModelConfig c;
  c.n_layers = 3;
  c.d_model = 32;
  c.n_heads = 4;
  c.d_ff = 64;
  c.max_seq = 512;
  c.seed = seed;
  return c;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("icl_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
