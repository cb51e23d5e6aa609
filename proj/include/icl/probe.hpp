#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "icl/model.hpp"
#include "icl/prompt.hpp"

namespace icl {

using Vector = std::vector<double>;

// Nearest-centroid task classifier at one (layer, position). Tasks are kept
// sorted by name; that order breaks distance ties.
struct CentroidProbe {
  int layer = 0;
  std::string position;
  SiteKind site = SiteKind::PostBlock;
  std::vector<std::string> tasks;
  std::vector<Vector> centroids;
  int n_per_task = 0;
  std::map<std::string, std::vector<std::string>> fit_inputs;  // query inputs used to fit

  // Index into `tasks` of the nearest centroid (plain Euclidean distance).
  std::size_t predict_index(const Vector& h) const;
  const std::string& predict(const Vector& h) const { return tasks[predict_index(h)]; }
};

// Centroids as arithmetic means of labelled samples, bypassing the model.
CentroidProbe fit_centroids_from(const std::map<std::string, std::vector<Vector>>& samples);

struct ProbeOptions {
  int k = 5;
  SiteKind site = SiteKind::PostBlock;
};

// Means of h at (layer, position) over n_per_task prompts per task.
// `position` is one of last_demo_token, separator, first_query_token.
CentroidProbe fit_centroids(const Model& model, const std::vector<std::string>& tasks, int layer,
                            Scope position, int n_per_task, std::uint64_t seed,
                            const ProbeOptions& options = {});

struct ProbeAccuracy {
  std::map<std::string, double> per_task;
  double overall = 0.0;  // over all evaluated prompts
};

// Evaluates on n_eval fresh prompts per task whose queries avoid the
// probe's fitting queries.
ProbeAccuracy probe_accuracy(const CentroidProbe& probe, const Model& model, int n_eval,
                             std::uint64_t seed, const ProbeOptions& options = {});

struct ProbeRow {
  int layer = 0;
  std::string position;
  std::string task;  // "overall" for the aggregate row
  double accuracy = 0.0;
};

struct ProbeSweep {
  std::vector<ProbeRow> rows;
  std::vector<std::string> warnings;
};

// Every (layer, position) cell from one pass per prompt. Fit and eval
// queries are disjoint.
ProbeSweep probe_sweep(const Model& model, const std::vector<std::string>& tasks,
                       const std::vector<int>& layers, const std::vector<Scope>& positions,
                       int n_fit, int n_eval, std::uint64_t seed, const ProbeOptions& options = {});

}  // namespace icl
