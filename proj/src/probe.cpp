#include "icl/probe.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "icl/error.hpp"
#include "icl/rng.hpp"
#include "icl/tasks.hpp"

namespace icl {

std::size_t CentroidProbe::predict_index(const Vector& h) const {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < centroids.size(); ++t) {
    double d = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      const double diff = h[i] - centroids[t][i];
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = t;
    }
  }
  return best;
}

CentroidProbe fit_centroids_from(const std::map<std::string, std::vector<Vector>>& samples) {
  CentroidProbe probe;
  for (const auto& [task, points] : samples) {
    if (points.empty()) throw Error(ErrorCode::InvalidCounts, "no samples for " + task);
    Vector mean(points.front().size(), 0.0);
    for (const auto& p : points) {
      if (p.size() != mean.size()) throw Error(ErrorCode::InvalidCounts, "ragged samples");
      for (std::size_t i = 0; i < p.size(); ++i) mean[i] += p[i];
    }
    for (double& m : mean) m /= static_cast<double>(points.size());
    probe.tasks.push_back(task);
    probe.centroids.push_back(std::move(mean));
    probe.n_per_task = static_cast<int>(points.size());
  }
  return probe;
}

namespace {

// h at each (layer, position) for one prompt, indexed [layer][position].
std::vector<std::vector<Vector>> capture(const Model& model, const PromptLayout& layout,
                                         const std::vector<int>& layers,
                                         const std::vector<Scope>& positions, SiteKind site) {
  CaptureRequest req;
  req.layers = layers;
  req.site = site;
  for (Scope s : positions) req.positions.push_back(resolve_position_set(layout, s).front());
  const auto res = model.forward(layout.token_ids, nullptr, &req);
  std::vector<std::vector<Vector>> out(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (int p : req.positions) {
      const auto& v = res.cache.at(layers[l], p);
      out[l].emplace_back(v.begin(), v.end());
    }
  }
  return out;
}

void check_positions(const std::vector<Scope>& positions) {
  for (Scope s : positions) {
    if (!is_singleton(s)) {
      throw Error(ErrorCode::UnknownScope,
                  "probe positions are last_demo_token, separator or first_query_token");
    }
  }
}

PromptLayout probe_prompt(const std::string& task, const TaskInstance& query, int k,
                          std::uint64_t seed, std::size_t index) {
  return build_prompt(task, k, query, derive_seed(seed, "probe-demos:" + task, index));
}

std::vector<std::string> sorted_unique(const std::vector<std::string>& tasks) {
  std::set<std::string> s(tasks.begin(), tasks.end());
  for (const auto& t : s) find_task(t);
  return {s.begin(), s.end()};
}

}  // namespace

CentroidProbe fit_centroids(const Model& model, const std::vector<std::string>& tasks, int layer,
                            Scope position, int n_per_task, std::uint64_t seed,
                            const ProbeOptions& options) {
  if (n_per_task < 1) throw Error(ErrorCode::InvalidCounts, "n_per_task must be at least 1");
  check_positions({position});
  std::map<std::string, std::vector<Vector>> samples;
  std::map<std::string, std::vector<std::string>> inputs;
  for (const auto& task : sorted_unique(tasks)) {
    const auto queries = generate_instances(task, static_cast<std::size_t>(n_per_task),
                                            derive_seed(seed, "probe-fit:" + task));
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const auto layout = probe_prompt(task, queries[i], options.k, seed, i);
      samples[task].push_back(capture(model, layout, {layer}, {position}, options.site)[0][0]);
      inputs[task].push_back(queries[i].input);
    }
  }
  auto probe = fit_centroids_from(samples);
  probe.layer = layer;
  probe.position = std::string(to_string(position));
  probe.site = options.site;
  probe.fit_inputs = std::move(inputs);
  return probe;
}

ProbeAccuracy probe_accuracy(const CentroidProbe& probe, const Model& model, int n_eval,
                             std::uint64_t seed, const ProbeOptions& options) {
  if (n_eval < 1) throw Error(ErrorCode::InvalidCounts, "n_eval must be at least 1");
  const Scope position = parse_scope(probe.position);
  ProbeAccuracy acc;
  int correct_total = 0;
  int total = 0;
  for (const auto& task : probe.tasks) {
    std::set<std::string> exclude;
    if (const auto it = probe.fit_inputs.find(task); it != probe.fit_inputs.end()) {
      exclude.insert(it->second.begin(), it->second.end());
    }
    const auto queries = generate_instances(task, static_cast<std::size_t>(n_eval),
                                            derive_seed(seed, "probe-eval:" + task), exclude);
    int correct = 0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const auto layout = probe_prompt(task, queries[i], options.k, seed ^ 0x5eed, i);
      const auto h = capture(model, layout, {probe.layer}, {position}, probe.site)[0][0];
      correct += probe.predict(h) == task;
    }
    acc.per_task[task] = static_cast<double>(correct) / n_eval;
    correct_total += correct;
    total += n_eval;
  }
  acc.overall = total ? static_cast<double>(correct_total) / total : 0.0;
  return acc;
}

ProbeSweep probe_sweep(const Model& model, const std::vector<std::string>& tasks,
                       const std::vector<int>& layers, const std::vector<Scope>& positions,
                       int n_fit, int n_eval, std::uint64_t seed, const ProbeOptions& options) {
  if (n_fit < 1 || n_eval < 1) throw Error(ErrorCode::InvalidCounts, "n_fit and n_eval must be >= 1");
  check_positions(positions);
  for (int l : layers) {
    if (l < 0 || l >= model.config().n_layers) throw Error(ErrorCode::PlanOutOfRange, "probe layer");
  }
  const auto names = sorted_unique(tasks);
  ProbeSweep sweep;
  if (names.size() < 2) {
    sweep.warnings.push_back("single-task probe: accuracy is trivially 1.0");
  }

  // acts[task][prompt][layer][position]
  std::map<std::string, std::vector<std::vector<std::vector<Vector>>>> fit, eval;
  for (const auto& task : names) {
    // Small domains get a proportional split so fit and eval queries stay disjoint.
    int task_fit = n_fit, task_eval = n_eval;
    const int avail = static_cast<int>(find_task(task).domain.size());
    if (n_fit + n_eval > avail && avail >= 2) {
      task_fit = std::clamp(avail * n_fit / (n_fit + n_eval), 1, avail - 1);
      task_eval = avail - task_fit;
      sweep.warnings.push_back(task + ": domain of " + std::to_string(avail) + " inputs, using " +
                               std::to_string(task_fit) + " fit and " + std::to_string(task_eval) +
                               " eval prompts");
    }
    const auto queries = generate_instances(task, static_cast<std::size_t>(task_fit + task_eval),
                                            derive_seed(seed, "probe-queries:" + task));
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const auto layout = probe_prompt(task, queries[i], options.k, seed, i);
      auto acts = capture(model, layout, layers, positions, options.site);
      (static_cast<int>(i) < task_fit ? fit : eval)[task].push_back(std::move(acts));
    }
  }

  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t p = 0; p < positions.size(); ++p) {
      std::map<std::string, std::vector<Vector>> samples;
      for (const auto& task : names) {
        for (const auto& prompt : fit[task]) samples[task].push_back(prompt[l][p]);
      }
      const auto probe = fit_centroids_from(samples);
      const std::string pos(to_string(positions[p]));
      int correct_total = 0;
      std::size_t eval_total = 0;
      for (const auto& task : names) {
        int correct = 0;
        for (const auto& prompt : eval[task]) correct += probe.predict(prompt[l][p]) == task;
        correct_total += correct;
        eval_total += eval[task].size();
        sweep.rows.push_back({layers[l], pos, task, static_cast<double>(correct) / static_cast<double>(eval[task].size())});
      }
      sweep.rows.push_back({layers[l], pos, "overall",
                            static_cast<double>(correct_total) / static_cast<double>(eval_total)});
    }
  }
  return sweep;
}

}  // namespace icl
