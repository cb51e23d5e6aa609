#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "icl/intervene.hpp"
#include "icl/model.hpp"
#include "icl/trainer.hpp"

namespace icl {

// Settings shared by every subcommand. Each field has a config-file key of
// the same name and a CLI flag --<key with '_' replaced by '-'>.
// Precedence: defaults < config file < explicit flags. The environment is
// never consulted.
struct RunConfig {
  std::string model = "models/default.bin";
  std::uint64_t seed = 42;
  int k = 5;
  int n_t = 10;
  int n_t_headline = 50;
  int n_s = 10;
  double alpha = 3.0;
  int max_new = 32;
  double z = 1.96;
  int n_perm = 1000;

  int layer = 2;
  std::vector<int> layers;  // empty: every layer
  std::string scope = "all_demo";
  std::vector<std::string> scopes;     // empty: command default
  std::vector<std::string> positions;  // probe / trace positions
  std::string source = "uppercase";
  std::string target = "repeat_word";
  std::vector<std::string> pairs;  // "source->target"
  std::vector<std::string> tasks;  // empty: the eight core tasks
  std::string site = "post_block";
  std::string persistence = "initial_pass_only";
  std::string kind = "zero";            // ablation kind
  std::optional<double> sigma;          // random ablation std override
  std::string axis = "position_count";  // scaling axis
  std::vector<int> grid;                // empty: axis default
  bool headline = false;                // transfer: use n_t_headline
  int n_fit = 20;
  int n_eval = 20;
  std::vector<int> shots;  // eval: demo counts, empty: {k}

  std::string out = "results";
  std::string reports = "reports";

  // train
  int steps = 8000;
  int batch = 16;
  double lr = 1e-3;
  int warmup = 200;
  int eval_every = 250;
  double max_seconds = 0.0;
  int target_tasks = 6;   // early stop once this many core tasks reach 90%
  std::string train_log;  // empty: <model>.log.jsonl

  void validate() const;  // throws BadConfig
};

nlohmann::json to_json(const RunConfig& c);

// Overwrites the fields named in `j`. Unknown keys and ill-typed values
// throw BadConfig.
void apply_json(RunConfig& c, const nlohmann::json& j);

RunConfig load_config(const std::filesystem::path& path);  // defaults + file

RunOptions run_options(const RunConfig& c);
TrainConfig train_config(const RunConfig& c);
std::pair<std::string, std::string> parse_pair(const std::string& text);  // "a->b"

}  // namespace icl
