#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "icl/detail/transformer.hpp"
#include "icl/model.hpp"

namespace icl {

struct TaskWeight {
  std::string task;
  double weight = 0.0;
};

// Core tasks share 0.64 of the mass, the twelve variants 0.36.
std::vector<TaskWeight> default_mixture();

struct TrainConfig {
  int steps = 8000;
  int batch_size = 16;
  double learning_rate = 1e-3;
  int warmup = 200;
  int k_min = 2;
  int k_max = 6;
  std::vector<TaskWeight> mixture = default_mixture();
  std::uint64_t seed = 42;
  int eval_every = 250;  // 0 disables evaluation and early stopping
  int eval_n = 20;
  int log_every = 50;
  double grad_clip = 1.0;
  double beta2 = 0.999;
  double eps = 1e-8;
  double target_accuracy = 0.9;
  int target_tasks = 6;    // early stop once this many core tasks reach target_accuracy
  double max_seconds = 0;  // wall-clock budget; 0 means none

  void validate() const;  // throws BadConfig
};

struct TrainLogEntry {
  int step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
  std::map<std::string, double> accuracy;  // empty on non-eval steps
};

struct TrainResult {
  Model model;
  std::vector<TrainLogEntry> log;
  int steps_run = 0;
  bool early_stopped = false;
  double seconds = 0.0;
};

// One training sequence: k+1 complete demonstrations of a single task. Loss
// targets cover the format space after "Out:", the output tokens and the
// terminating newline of demonstrations 2..k+1.
detail::PackedBatch make_training_sequence(std::string_view task, int k, std::uint64_t seed);
void append_sequence(detail::PackedBatch& batch, const detail::PackedBatch& seq);

// Learning rate at a 1-based step: linear warmup, then linear decay to 10%
// of the peak at the final step.
double learning_rate_at(const TrainConfig& config, int step);

// Samples a batch from the mixture. Deterministic in (config.seed, step).
detail::PackedBatch sample_batch(const TrainConfig& config, int step, int max_seq);

// Writes one JSON object per log entry to `log` when non-null.
TrainResult meta_train(const TrainConfig& config, const ModelConfig& model_config,
                       std::ostream* log = nullptr);

double batch_loss(const Model& model, const detail::PackedBatch& batch);

// Fraction of n held-out queries answered exactly with k demonstrations.
// Query inputs are drawn first; demonstrations come from the remaining
// domain, so the two pools are disjoint.
double eval_fewshot(const Model& model, std::string_view task, int k, int n, std::uint64_t seed);

struct GradCheckResult {
  double max_rel_error = 0.0;
  int checked = 0;
  double loss = 0.0;
};

// Compares analytic gradients (double precision) against central finite
// differences on `samples` parameters drawn across every tensor. Relative
// error is |a - n| / max(|a| + |n|, 1e-6).
GradCheckResult grad_check(const Model& model, const detail::PackedBatch& batch, double epsilon,
                           int samples = 200, std::uint64_t seed = 1);

// Full analytic gradient in double precision.
std::vector<double> gradient(const Model& model, const detail::PackedBatch& batch, double* loss);

}  // namespace icl
