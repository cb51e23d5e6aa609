#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "icl/model.hpp"
#include "icl/prompt.hpp"
#include "icl/stats.hpp"
#include "icl/tasks.hpp"

namespace icl {

struct ExampleRecord {
  int index = 0;
  std::string query;
  std::string expected;  // target-task answer
  std::string generated;
  std::string label;  // transfer | preserve | malformed | ambiguous | skipped
  std::string failure;  // failure category for non-transfer outputs
  int edited = 0;       // positions edited
  int unaligned = 0;    // scope positions without a source vector
  std::optional<bool> clean_correct;  // noise/ablation runs: clean pass correct
  std::optional<bool> correct;        // target-task correctness of `generated`
};

struct Counts {
  int transfer = 0;
  int preserve = 0;
  int malformed = 0;
  int ambiguous = 0;
  int skipped = 0;

  int total() const { return transfer + preserve + malformed + ambiguous + skipped; }
  bool operator==(const Counts&) const = default;
};

struct ExperimentResult {
  std::string experiment;
  std::string source;
  std::string target;
  std::vector<int> layers;
  std::string scope;
  std::string site;
  std::string persistence;
  Counts counts;
  int n_total = 0;
  std::optional<double> tau;  // transfer / (n_total - ambiguous - skipped)
  std::optional<stats::RateCI> ci;
  std::optional<double> accuracy;        // target-task accuracy of the generations
  std::optional<double> clean_accuracy;  // same queries, no intervention
  std::optional<double> delta;           // (clean - accuracy) / clean
  std::vector<ExampleRecord> examples;
  std::map<std::string, std::uint64_t> seeds;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::string> warnings;
};

// Recomputes counts, tau, CI and accuracies from the per-example records.
void summarize(ExperimentResult& result, double z = 1.96);

// (clean - noised) / clean. Throws DegenerateBaseline when clean == 0.
double disruption_rate(double acc_clean, double acc_noised);

struct RunOptions {
  int k = 5;
  int n_t = 10;
  int n_s = 10;
  int max_new = 32;
  HookSite site;
  std::uint64_t seed = 42;
  double z = 1.96;
};

// Position-wise means keyed by layer and relative position key.
struct MeanActivations {
  std::string task;
  SiteKind site = SiteKind::PostBlock;
  Scope scope = Scope::AllDemo;
  int n_s = 0;
  int k = 0;
  std::pair<int, int> shape{0, 0};  // demo (input tokens, output tokens)
  std::map<int, std::map<std::string, std::vector<float>>> values;
  std::vector<std::string> prompts;  // source prompt texts
};

using KeyedVectors = std::map<int, std::map<std::string, std::vector<float>>>;

// Element-wise mean of per-prompt key maps. Throws AlignmentError when the
// key sets differ.
KeyedVectors mean_of(const std::vector<KeyedVectors>& per_prompt);

// Source prompts use demonstrations of a single (input, output) token-count
// shape, the most common one in the task domain, so every prompt yields the
// same key set. Throws AlignmentError if that pool is too small.
MeanActivations extract_mean_activations(const Model& model, std::string_view task, int n_s,
                                         const std::vector<int>& layers, Scope scope,
                                         std::uint64_t seed, int k = 5,
                                         SiteKind site = SiteKind::PostBlock);

// Most common demo shape and the domain inputs that have it.
std::pair<std::pair<int, int>, std::vector<std::string>> modal_shape_pool(const TaskSpec& task);

// Target prompts for an experiment: queries first, demos from the rest of
// the domain.
std::vector<PromptLayout> target_prompts(std::string_view task, int n, int k, std::uint64_t seed);

ExperimentResult run_transfer(const Model& model, std::string_view source, std::string_view target,
                              int layer, Scope scope, const RunOptions& options);
ExperimentResult run_transfer(const Model& model, const MeanActivations& means,
                              std::string_view target, int layer, const RunOptions& options);

// Per-layer pooled standard deviation of h over all positions and
// dimensions of n_prompts random suite prompts.
std::vector<double> activation_std(const Model& model, int n_prompts, std::uint64_t seed,
                                   SiteKind site = SiteKind::PostBlock);

enum class AblationKind { Zero, Random };
AblationKind parse_ablation(std::string_view name);  // throws BadConfig

// Random ablation replaces h with z ~ N(0, sigma^2 I); sigma defaults to
// the layer's activation std.
ExperimentResult run_ablation(const Model& model, std::string_view target, int layer, Scope scope,
                              AblationKind kind, const RunOptions& options,
                              std::optional<double> sigma = std::nullopt);

// One result per (layer, position): AddNoise with scale alpha and the
// layer's activation std, delta against the clean pass on the same queries.
std::vector<ExperimentResult> run_noise_trace(const Model& model, std::string_view task,
                                              const std::vector<Scope>& positions,
                                              const std::vector<int>& layers, double alpha,
                                              const RunOptions& options);

struct ControlRow {
  std::string source;
  std::string target;
  std::string distractor;
  std::map<std::string, ExperimentResult> results;  // true_source, random_source, matched_noise, shuffled
};

std::vector<ControlRow> run_controls(const Model& model,
                                     const std::vector<std::pair<std::string, std::string>>& pairs,
                                     int layer, Scope scope, const RunOptions& options);

// Same key set with every vector replaced by a Gaussian direction of equal norm.
KeyedVectors matched_noise(const KeyedVectors& means, std::uint64_t seed);

enum class ScalingAxis { PositionCount, SourceDemos, TargetDemos };
ScalingAxis parse_axis(std::string_view name);  // throws BadConfig
std::string_view to_string(ScalingAxis axis);

struct ScalingPoint {
  std::string label;  // grid value, "all", or a structured subset name
  int value = 0;
  std::optional<double> tau;
  std::vector<double> subset_taus;  // position_count: one per random subset
  std::vector<ExperimentResult> runs;
};

struct ScalingCurve {
  std::string source;
  std::string target;
  std::string axis;
  int layer = 0;
  std::vector<ScalingPoint> points;
  std::vector<ScalingPoint> structured;  // first_last, every_other, single_demo
};

inline constexpr int kAllPositions = -1;
inline constexpr int kRandomSubsets = 10;

// position_count runs over output_only positions; grid value kAllPositions
// means the full scope. Throws InfeasibleGrid for values no layout admits.
ScalingCurve run_scaling(const Model& model, std::string_view source, std::string_view target,
                         int layer, ScalingAxis axis, const std::vector<int>& grid, Scope scope,
                         const RunOptions& options);

struct MatrixSummary {
  std::vector<std::string> tasks;
  std::vector<ExperimentResult> cells;  // ordered pairs, row-major, diagonal excluded
  int high = 0;    // tau >= 0.5
  int medium = 0;  // 0.1 <= tau < 0.5
  int low = 0;     // tau < 0.1 (undefined tau counts here)
  std::vector<std::pair<std::string, std::string>> asymmetric;  // |tau(a,b) - tau(b,a)| > 0.5
  std::optional<stats::Correlation> surface_vs_tau;
  std::map<std::string, double> surface_similarity;  // "a->b"
  std::vector<std::string> warnings;
};

MatrixSummary transfer_matrix(const Model& model, const std::vector<std::string>& tasks, int layer,
                              Scope scope, const RunOptions& options);

struct LayerAblationRow {
  int layer = -1;  // -1: no ablation
  double accuracy = 0.0;
};

std::vector<LayerAblationRow> layer_output_ablation(const Model& model, std::string_view task,
                                                    const std::vector<int>& layers,
                                                    const RunOptions& options);

// Exactly four rows: pre_attention, post_attention, post_block (initial
// pass only) and post_block persistent across decode steps.
std::vector<ExperimentResult> timing_sweep(const Model& model, std::string_view source,
                                           std::string_view target, int layer, Scope scope,
                                           const RunOptions& options);

// Runs fn(i) for i in [0, n) across worker threads; results are stored by
// index so the output never depends on scheduling.
template <typename R, typename F>
std::vector<R> parallel_map(std::size_t n, F&& fn) {
  std::vector<R> out(n);
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          out[i] = fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace icl
