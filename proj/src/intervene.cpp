#include "icl/intervene.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>

#include "icl/error.hpp"
#include "icl/rng.hpp"

namespace icl {

void summarize(ExperimentResult& r, double z) {
  Counts c;
  int correct = 0, judged = 0, clean = 0, clean_judged = 0;
  for (const auto& e : r.examples) {
    if (e.label == "transfer") ++c.transfer;
    else if (e.label == "preserve") ++c.preserve;
    else if (e.label == "malformed") ++c.malformed;
    else if (e.label == "ambiguous") ++c.ambiguous;
    else if (e.label == "skipped") ++c.skipped;
    else throw Error(ErrorCode::CorruptResult, "unknown example label " + e.label);
    if (e.correct) {
      ++judged;
      correct += *e.correct;
    }
    if (e.clean_correct) {
      ++clean_judged;
      clean += *e.clean_correct;
    }
  }
  r.counts = c;
  r.n_total = static_cast<int>(r.examples.size());
  r.tau.reset();
  r.ci.reset();
  const int denom = r.n_total - c.ambiguous - c.skipped;
  if (!r.source.empty() && denom > 0) {
    r.tau = static_cast<double>(c.transfer) / denom;
    r.ci = stats::wilson_ci(c.transfer, denom, z);
  }
  r.accuracy.reset();
  r.clean_accuracy.reset();
  r.delta.reset();
  if (judged > 0) r.accuracy = static_cast<double>(correct) / judged;
  if (clean_judged > 0) r.clean_accuracy = static_cast<double>(clean) / clean_judged;
  if (r.accuracy && r.clean_accuracy && *r.clean_accuracy > 0) {
    r.delta = disruption_rate(*r.clean_accuracy, *r.accuracy);
  }
}

double disruption_rate(double acc_clean, double acc_noised) {
  if (acc_clean <= 0) throw Error(ErrorCode::DegenerateBaseline, "clean accuracy is zero");
  return (acc_clean - acc_noised) / acc_clean;
}

KeyedVectors mean_of(const std::vector<KeyedVectors>& per_prompt) {
  if (per_prompt.empty()) throw Error(ErrorCode::InvalidCounts, "no activations to average");
  KeyedVectors out = per_prompt.front();
  for (std::size_t i = 1; i < per_prompt.size(); ++i) {
    const auto& cur = per_prompt[i];
    bool same = cur.size() == out.size();
    for (auto it = out.begin(); same && it != out.end(); ++it) {
      const auto c = cur.find(it->first);
      same = c != cur.end() && c->second.size() == it->second.size();
      for (auto k = it->second.begin(); same && k != it->second.end(); ++k) {
        const auto ck = c->second.find(k->first);
        same = ck != c->second.end() && ck->second.size() == k->second.size();
        if (same) {
          for (std::size_t d = 0; d < k->second.size(); ++d) k->second[d] += ck->second[d];
        }
      }
    }
    if (!same) {
      throw Error(ErrorCode::AlignmentError,
                  "prompt " + std::to_string(i) + " has a different position key set");
    }
  }
  const float inv = 1.0f / static_cast<float>(per_prompt.size());
  for (auto& [_, keys] : out) {
    for (auto& [__, v] : keys) {
      for (float& x : v) x *= inv;
    }
  }
  return out;
}

std::pair<std::pair<int, int>, std::vector<std::string>> modal_shape_pool(const TaskSpec& task) {
  std::map<std::pair<int, int>, std::vector<std::string>> by_shape;
  for (const auto& x : task.domain) {
    const int in = static_cast<int>(tokenizer::tokenize(x).size());
    const int out = static_cast<int>(tokenizer::tokenize(task.expected(x)).size());
    by_shape[{in, out}].push_back(x);
  }
  auto best = by_shape.begin();
  for (auto it = by_shape.begin(); it != by_shape.end(); ++it) {
    if (it->second.size() > best->second.size()) best = it;
  }
  return {best->first, best->second};
}

namespace {

KeyedVectors capture_keys(const Model& model, const PromptLayout& layout,
                          const std::vector<int>& layers, Scope scope, SiteKind site) {
  CaptureRequest req;
  req.layers = layers;
  req.site = site;
  req.positions = resolve_position_set(layout, scope);
  const auto res = model.forward(layout.token_ids, nullptr, &req);
  KeyedVectors out;
  for (int l : layers) {
    for (int p : req.positions) out[l][position_key(layout, p, scope)] = res.cache.at(l, p);
  }
  return out;
}

struct EditSpec {
  std::vector<int> positions;
  std::vector<std::vector<float>> vectors;
  int unaligned = 0;
};

EditSpec aligned(const KeyedVectors& values, int layer, const PromptLayout& layout, Scope scope) {
  EditSpec spec;
  const auto it = values.find(layer);
  for (int p : resolve_position_set(layout, scope)) {
    const std::string key = position_key(layout, p, scope);
    if (it != values.end()) {
      if (const auto v = it->second.find(key); v != it->second.end()) {
        spec.positions.push_back(p);
        spec.vectors.push_back(v->second);
        continue;
      }
    }
    ++spec.unaligned;
  }
  return spec;
}

EditSpec filter(const EditSpec& spec, const std::function<bool(int)>& keep) {
  EditSpec out;
  out.unaligned = spec.unaligned;
  for (std::size_t i = 0; i < spec.positions.size(); ++i) {
    if (keep(spec.positions[i])) {
      out.positions.push_back(spec.positions[i]);
      out.vectors.push_back(spec.vectors[i]);
    }
  }
  return out;
}

void label_example(ExampleRecord& rec, const TaskSpec* source, const TaskSpec& target,
                   const TaskInstance& query) {
  rec.correct = rec.generated == query.expected;
  if (!source) {
    rec.label = *rec.correct ? "preserve" : "malformed";
    if (!*rec.correct) rec.failure = std::string(to_string(categorize_failure(rec.generated, target, target, query)));
    return;
  }
  if (source->name == target.name) {
    // Self-transplant: every query is trivially ambiguous, so judge by the task alone.
    rec.label = *rec.correct ? "preserve" : "malformed";
  } else {
    const Outcome o = classify_output(rec.generated, *source, target, query);
    rec.label = o.ambiguous ? "ambiguous" : std::string(to_string(o.label));
  }
  if (rec.label != "transfer" && rec.label != "ambiguous") {
    rec.failure = std::string(to_string(categorize_failure(rec.generated, *source, target, query)));
  }
}

using EditBuilder = std::function<EditSpec(std::size_t, const PromptLayout&)>;

// Core loop shared by transplant-style experiments. Examples with no
// editable position are skipped unless allow_empty is set.
ExperimentResult transplant(const Model& model, const std::string& source, const std::string& target,
                            int layer, const std::vector<PromptLayout>& layouts,
                            const EditBuilder& build, const RunOptions& o, bool allow_empty = false) {
  const TaskSpec& src = find_task(source);
  const TaskSpec& tgt = find_task(target);
  ExperimentResult r;
  r.source = source;
  r.target = target;
  r.layers = {layer};
  r.site = std::string(to_string(o.site.kind));
  r.persistence = std::string(to_string(o.site.persistence));
  r.examples = parallel_map<ExampleRecord>(layouts.size(), [&](std::size_t i) {
    const auto& layout = layouts[i];
    ExampleRecord rec;
    rec.index = static_cast<int>(i);
    rec.query = layout.query.input;
    rec.expected = layout.query.expected;
    const EditSpec spec = build(i, layout);
    rec.edited = static_cast<int>(spec.positions.size());
    rec.unaligned = spec.unaligned;
    if (spec.positions.empty() && !allow_empty) {
      rec.label = "skipped";
      return rec;
    }
    InterventionPlan plan;
    if (!spec.positions.empty()) {
      Edit e;
      e.layer = layer;
      e.site = o.site;
      e.positions = spec.positions;
      e.action = ActionKind::Replace;
      e.vectors = spec.vectors;
      plan.edits.push_back(std::move(e));
    }
    rec.generated = generate_greedy(model, layout, &plan, o.max_new);
    label_example(rec, &src, tgt, layout.query);
    return rec;
  });
  summarize(r, o.z);
  int unaligned = 0;
  for (const auto& e : r.examples) unaligned += e.unaligned > 0;
  if (unaligned > 0) {
    r.warnings.push_back(std::to_string(unaligned) +
                         " examples had scope positions without a source vector (left unedited)");
  }
  return r;
}

nlohmann::json snapshot(const RunOptions& o) {
  return {{"k", o.k},         {"n_t", o.n_t},
          {"n_s", o.n_s},     {"max_new", o.max_new},
          {"seed", o.seed},   {"site", std::string(to_string(o.site.kind))},
          {"z", o.z},         {"persistence", std::string(to_string(o.site.persistence))}};
}

void stamp(ExperimentResult& r, const std::string& experiment, const std::string& scope,
           const RunOptions& o) {
  r.experiment = experiment;
  r.scope = scope;
  r.config = snapshot(o);
  r.seeds["master"] = o.seed;
  r.seeds["source"] = derive_seed(o.seed, "source");
  r.seeds["target"] = derive_seed(o.seed, "target");
}

std::vector<bool> clean_correctness(const Model& model, const std::vector<PromptLayout>& layouts,
                                    const RunOptions& o) {
  const auto out = parallel_map<char>(layouts.size(), [&](std::size_t i) -> char {
    return generate_greedy(model, layouts[i], nullptr, o.max_new) == layouts[i].query.expected;
  });
  return {out.begin(), out.end()};
}

std::string pair_label(std::string_view a, std::string_view b) {
  return std::string(a) + "->" + std::string(b);
}

}  // namespace

MeanActivations extract_mean_activations(const Model& model, std::string_view task, int n_s,
                                         const std::vector<int>& layers, Scope scope,
                                         std::uint64_t seed, int k, SiteKind site) {
  if (n_s < 1) throw Error(ErrorCode::InvalidCounts, "n_s must be at least 1");
  if (k < 1) throw Error(ErrorCode::InvalidCounts, "k must be at least 1");
  const TaskSpec& spec = find_task(task);
  auto [shape, pool] = modal_shape_pool(spec);
  if (static_cast<int>(pool.size()) < k + 1) {
    throw Error(ErrorCode::AlignmentError, spec.name + ": only " + std::to_string(pool.size()) +
                                               " inputs share the modal demo shape");
  }
  MeanActivations m;
  m.task = spec.name;
  m.site = site;
  m.scope = scope;
  m.n_s = n_s;
  m.k = k;
  m.shape = shape;
  std::vector<KeyedVectors> per_prompt;
  for (int i = 0; i < n_s; ++i) {
    Rng rng(derive_seed(seed, "source-prompt:" + spec.name, static_cast<std::uint64_t>(i)));
    const auto& qx = spec.domain[rng.below(spec.domain.size())];
    std::vector<std::string> demos_pool;
    for (const auto& x : pool) {
      if (x != qx) demos_pool.push_back(x);
    }
    rng.shuffle(demos_pool);
    std::vector<TaskInstance> demos;
    for (int d = 0; d < k; ++d) demos.push_back({spec.name, demos_pool[d], spec.expected(demos_pool[d])});
    const auto layout = layout_from_instances(demos, {spec.name, qx, spec.expected(qx)});
    m.prompts.push_back(layout.text);
    per_prompt.push_back(capture_keys(model, layout, layers, scope, site));
  }
  m.values = mean_of(per_prompt);
  return m;
}

std::vector<PromptLayout> target_prompts(std::string_view task, int n, int k, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidCounts, "n_t must be at least 1");
  const auto queries = generate_instances(task, static_cast<std::size_t>(n), derive_seed(seed, "queries"));
  std::set<std::string> pool;
  for (const auto& q : queries) pool.insert(q.input);
  std::vector<PromptLayout> out;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    out.push_back(build_prompt(task, k, queries[i], derive_seed(seed, "demos", i), pool));
  }
  return out;
}

ExperimentResult run_transfer(const Model& model, std::string_view source, std::string_view target,
                              int layer, Scope scope, const RunOptions& o) {
  const auto means = extract_mean_activations(model, source, o.n_s, {layer}, scope,
                                              derive_seed(o.seed, "source"), o.k, o.site.kind);
  return run_transfer(model, means, target, layer, o);
}

ExperimentResult run_transfer(const Model& model, const MeanActivations& means,
                              std::string_view target, int layer, const RunOptions& o) {
  const auto layouts = target_prompts(target, o.n_t, o.k, derive_seed(o.seed, "target"));
  auto r = transplant(
      model, means.task, std::string(target), layer, layouts,
      [&](std::size_t, const PromptLayout& l) { return aligned(means.values, layer, l, means.scope); }, o);
  stamp(r, "transfer", std::string(to_string(means.scope)), o);
  return r;
}

std::vector<double> activation_std(const Model& model, int n_prompts, std::uint64_t seed,
                                   SiteKind site) {
  const int L = model.config().n_layers;
  std::vector<double> sum(static_cast<std::size_t>(L), 0.0), sq(static_cast<std::size_t>(L), 0.0);
  std::vector<double> count(static_cast<std::size_t>(L), 0.0);
  const auto core = core_task_names();
  Rng rng(seed);
  CaptureRequest req;
  req.site = site;
  for (int l = 0; l < L; ++l) req.layers.push_back(l);
  for (int i = 0; i < n_prompts; ++i) {
    const auto& task = core[rng.below(core.size())];
    const auto q = generate_instances(task, 1, rng.next());
    const auto layout = build_prompt(task, 5, q.front(), rng.next());
    const auto res = model.forward(layout.token_ids, nullptr, &req);
    for (const auto& [l, positions] : res.cache.values) {
      for (const auto& [_, v] : positions) {
        for (float x : v) {
          sum[l] += x;
          sq[l] += static_cast<double>(x) * x;
        }
        count[l] += static_cast<double>(v.size());
      }
    }
  }
  std::vector<double> out(static_cast<std::size_t>(L), 0.0);
  for (int l = 0; l < L; ++l) {
    if (count[l] == 0) continue;
    const double mean = sum[l] / count[l];
    out[l] = std::sqrt(std::max(0.0, sq[l] / count[l] - mean * mean));
  }
  return out;
}

AblationKind parse_ablation(std::string_view name) {
  if (name == "zero") return AblationKind::Zero;
  if (name == "random") return AblationKind::Random;
  throw Error(ErrorCode::BadConfig, "ablation kind must be zero or random");
}

ExperimentResult run_ablation(const Model& model, std::string_view target, int layer, Scope scope,
                              AblationKind kind, const RunOptions& o, std::optional<double> sigma) {
  const TaskSpec& tgt = find_task(target);
  if (layer < 0 || layer >= model.config().n_layers) throw Error(ErrorCode::PlanOutOfRange, "layer");
  double s = 0.0;
  if (kind == AblationKind::Random) {
    s = sigma ? *sigma
              : activation_std(model, 100, derive_seed(o.seed, "sigma"), o.site.kind)[static_cast<std::size_t>(layer)];
  }
  const auto layouts = target_prompts(target, o.n_t, o.k, derive_seed(o.seed, "target"));
  const auto clean = clean_correctness(model, layouts, o);
  ExperimentResult r;
  r.target = tgt.name;
  r.layers = {layer};
  r.site = std::string(to_string(o.site.kind));
  r.persistence = std::string(to_string(o.site.persistence));
  r.examples = parallel_map<ExampleRecord>(layouts.size(), [&](std::size_t i) {
    const auto& layout = layouts[i];
    ExampleRecord rec;
    rec.index = static_cast<int>(i);
    rec.query = layout.query.input;
    rec.expected = layout.query.expected;
    Edit e;
    e.layer = layer;
    e.site = o.site;
    e.positions = resolve_position_set(layout, scope);
    e.action = kind == AblationKind::Zero ? ActionKind::Zero : ActionKind::RandomGaussian;
    e.scale = static_cast<float>(s);
    e.seed = derive_seed(o.seed, "noise", i);
    rec.edited = static_cast<int>(e.positions.size());
    InterventionPlan plan{{e}};
    rec.generated = generate_greedy(model, layout, &plan, o.max_new);
    rec.clean_correct = clean[i];
    label_example(rec, nullptr, tgt, layout.query);
    return rec;
  });
  summarize(r, o.z);
  stamp(r, kind == AblationKind::Zero ? "ablate_zero" : "ablate_random",
        std::string(to_string(scope)), o);
  r.config["sigma"] = s;
  r.seeds["noise"] = derive_seed(o.seed, "noise");
  return r;
}

std::vector<ExperimentResult> run_noise_trace(const Model& model, std::string_view task,
                                              const std::vector<Scope>& positions,
                                              const std::vector<int>& layers, double alpha,
                                              const RunOptions& o) {
  if (alpha < 0) throw Error(ErrorCode::BadConfig, "alpha must be non-negative");
  const TaskSpec& tgt = find_task(task);
  for (int l : layers) {
    if (l < 0 || l >= model.config().n_layers) throw Error(ErrorCode::PlanOutOfRange, "trace layer");
  }
  const auto sigma = activation_std(model, 100, derive_seed(o.seed, "sigma"), o.site.kind);
  const auto layouts = target_prompts(task, o.n_t, o.k, derive_seed(o.seed, "target"));
  const auto clean = clean_correctness(model, layouts, o);
  std::vector<ExperimentResult> out;
  for (Scope scope : positions) {
    for (int layer : layers) {
      ExperimentResult r;
      r.target = tgt.name;
      r.layers = {layer};
      r.site = std::string(to_string(o.site.kind));
      r.persistence = std::string(to_string(o.site.persistence));
      r.examples = parallel_map<ExampleRecord>(layouts.size(), [&](std::size_t i) {
        const auto& layout = layouts[i];
        ExampleRecord rec;
        rec.index = static_cast<int>(i);
        rec.query = layout.query.input;
        rec.expected = layout.query.expected;
        Edit e;
        e.layer = layer;
        e.site = o.site;
        e.positions = resolve_position_set(layout, scope);
        e.action = ActionKind::AddNoise;
        e.scale = static_cast<float>(alpha);
        e.sigma = static_cast<float>(sigma[static_cast<std::size_t>(layer)]);
        e.seed = derive_seed(o.seed, "noise", i);
        rec.edited = static_cast<int>(e.positions.size());
        InterventionPlan plan{{e}};
        rec.generated = generate_greedy(model, layout, &plan, o.max_new);
        rec.clean_correct = clean[i];
        label_example(rec, nullptr, tgt, layout.query);
        return rec;
      });
      summarize(r, o.z);
      stamp(r, "trace", std::string(to_string(scope)), o);
      r.config["alpha"] = alpha;
      r.config["sigma"] = sigma[static_cast<std::size_t>(layer)];
      r.seeds["noise"] = derive_seed(o.seed, "noise");
      if (r.clean_accuracy && *r.clean_accuracy == 0) {
        r.warnings.push_back("clean accuracy is zero; disruption rate undefined");
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

KeyedVectors matched_noise(const KeyedVectors& means, std::uint64_t seed) {
  KeyedVectors out;
  std::uint64_t counter = 0;
  for (const auto& [layer, keys] : means) {
    for (const auto& [key, v] : keys) {
      Rng rng(derive_seed(seed, "matched-noise", counter++));
      std::vector<double> z(v.size());
      double zn = 0, vn = 0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        z[i] = rng.normal();
        zn += z[i] * z[i];
        vn += static_cast<double>(v[i]) * v[i];
      }
      const double scale = zn > 0 ? std::sqrt(vn / zn) : 0.0;
      auto& dst = out[layer][key];
      dst.resize(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) dst[i] = static_cast<float>(z[i] * scale);
    }
  }
  return out;
}

std::vector<ControlRow> run_controls(const Model& model,
                                     const std::vector<std::pair<std::string, std::string>>& pairs,
                                     int layer, Scope scope, const RunOptions& o) {
  std::vector<ControlRow> rows;
  const auto core = core_task_names();
  for (const auto& [source, target] : pairs) {
    ControlRow row;
    row.source = find_task(source).name;
    row.target = find_task(target).name;
    std::vector<std::string> others;
    for (const auto& t : core) {
      if (t != row.source && t != row.target) others.push_back(t);
    }
    Rng pick(derive_seed(o.seed, "distractor:" + pair_label(source, target)));
    row.distractor = others[pick.below(others.size())];

    const auto truth = extract_mean_activations(model, source, o.n_s, {layer}, scope,
                                                derive_seed(o.seed, "source"), o.k, o.site.kind);
    const auto layouts = target_prompts(target, o.n_t, o.k, derive_seed(o.seed, "target"));
    const std::string scope_name(to_string(scope));

    auto run = [&](const std::string& name, const EditBuilder& build) {
      auto r = transplant(model, row.source, row.target, layer, layouts, build, o);
      stamp(r, "controls/" + name, scope_name, o);
      row.results[name] = std::move(r);
    };
    run("true_source", [&](std::size_t, const PromptLayout& l) { return aligned(truth.values, layer, l, scope); });

    const auto distractor = extract_mean_activations(model, row.distractor, o.n_s, {layer}, scope,
                                                     derive_seed(o.seed, "source"), o.k, o.site.kind);
    run("random_source",
        [&](std::size_t, const PromptLayout& l) { return aligned(distractor.values, layer, l, scope); });
    row.results["random_source"].config["distractor"] = row.distractor;

    const auto noise = matched_noise(truth.values, derive_seed(o.seed, "matched-noise:" + row.source));
    run("matched_noise", [&](std::size_t, const PromptLayout& l) { return aligned(noise, layer, l, scope); });

    run("shuffled", [&](std::size_t i, const PromptLayout& l) {
      EditSpec spec = aligned(truth.values, layer, l, scope);
      Rng rng(derive_seed(o.seed, "shuffle", i));
      rng.shuffle(spec.vectors);
      return spec;
    });
    rows.push_back(std::move(row));
  }
  return rows;
}

ScalingAxis parse_axis(std::string_view name) {
  if (name == "position_count") return ScalingAxis::PositionCount;
  if (name == "source_demos") return ScalingAxis::SourceDemos;
  if (name == "target_demos") return ScalingAxis::TargetDemos;
  throw Error(ErrorCode::BadConfig, "unknown scaling axis " + std::string(name));
}

std::string_view to_string(ScalingAxis axis) {
  switch (axis) {
    case ScalingAxis::PositionCount: return "position_count";
    case ScalingAxis::SourceDemos: return "source_demos";
    case ScalingAxis::TargetDemos: return "target_demos";
  }
  return "?";
}

ScalingCurve run_scaling(const Model& model, std::string_view source, std::string_view target,
                         int layer, ScalingAxis axis, const std::vector<int>& grid, Scope scope,
                         const RunOptions& o) {
  ScalingCurve curve;
  curve.source = find_task(source).name;
  curve.target = find_task(target).name;
  curve.axis = std::string(to_string(axis));
  curve.layer = layer;
  const std::string scope_name(to_string(scope));
  const std::string tag = "scaling/" + curve.axis;

  auto finish = [&](ExperimentResult r, int value, const std::string& variant) {
    stamp(r, tag, scope_name, o);
    r.config["axis_value"] = value;
    r.config["variant"] = variant;
    return r;
  };

  if (axis == ScalingAxis::PositionCount) {
    const auto means = extract_mean_activations(model, source, o.n_s, {layer}, scope,
                                                derive_seed(o.seed, "source"), o.k, o.site.kind);
    const auto layouts = target_prompts(target, o.n_t, o.k, derive_seed(o.seed, "target"));
    std::vector<EditSpec> full;
    int min_available = std::numeric_limits<int>::max();
    for (const auto& l : layouts) {
      full.push_back(aligned(means.values, layer, l, scope));
      min_available = std::min(min_available, static_cast<int>(full.back().positions.size()));
    }
    for (int c : grid) {
      ScalingPoint pt;
      pt.value = c;
      if (c == kAllPositions) {
        pt.label = "all";
        pt.runs.push_back(finish(
            transplant(model, curve.source, curve.target, layer, layouts,
                       [&](std::size_t i, const PromptLayout&) { return full[i]; }, o),
            c, "all"));
        pt.tau = pt.runs.back().tau;
      } else if (c == 0) {
        pt.label = "0";
        pt.runs.push_back(finish(transplant(model, curve.source, curve.target, layer, layouts,
                                            [](std::size_t, const PromptLayout&) { return EditSpec{}; },
                                            o, true),
                                 c, "n0"));
        pt.tau = pt.runs.back().tau;
      } else {
        if (c < 0 || c > min_available) {
          throw Error(ErrorCode::InfeasibleGrid,
                      "position count " + std::to_string(c) + " exceeds the " +
                          std::to_string(min_available) + " aligned positions every layout has");
        }
        pt.label = std::to_string(c);
        double sum = 0;
        int defined = 0;
        for (int s = 0; s < kRandomSubsets; ++s) {
          auto r = transplant(
              model, curve.source, curve.target, layer, layouts,
              [&](std::size_t i, const PromptLayout&) {
                const EditSpec& f = full[i];
                std::vector<std::size_t> idx(f.positions.size());
                for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = j;
                Rng rng(derive_seed(o.seed, "subset:" + std::to_string(c) + ":" + std::to_string(s), i));
                rng.shuffle(idx);
                idx.resize(static_cast<std::size_t>(c));
                std::sort(idx.begin(), idx.end());
                EditSpec out;
                out.unaligned = f.unaligned;
                for (std::size_t j : idx) {
                  out.positions.push_back(f.positions[j]);
                  out.vectors.push_back(f.vectors[j]);
                }
                return out;
              },
              o);
          if (r.tau) {
            pt.subset_taus.push_back(*r.tau);
            sum += *r.tau;
            ++defined;
          }
          pt.runs.push_back(finish(std::move(r), c, "n" + std::to_string(c) + ".s" + std::to_string(s)));
        }
        if (defined > 0) pt.tau = sum / defined;
      }
      curve.points.push_back(std::move(pt));
    }

    // Structured subsets by demonstration index (1-based).
    const std::vector<std::pair<std::string, std::function<bool(int, int)>>> structured = {
        {"first_last", [](int d, int k) { return d == 1 || d == k; }},
        {"every_other", [](int d, int) { return d % 2 == 1; }},
        {"single_demo", [](int d, int k) { return d == k; }},
    };
    for (const auto& [name, keep_demo] : structured) {
      ScalingPoint pt;
      pt.label = name;
      auto r = transplant(
          model, curve.source, curve.target, layer, layouts,
          [&](std::size_t i, const PromptLayout& l) {
            return filter(full[i], [&](int p) {
              for (int d = 0; d < l.k(); ++d) {
                const auto& s = l.demos[static_cast<std::size_t>(d)];
                if (s.input.contains(p) || s.output.contains(p) || s.separator.contains(p)) {
                  return keep_demo(d + 1, l.k());
                }
              }
              return false;
            });
          },
          o);
      pt.tau = r.tau;
      pt.value = static_cast<int>(r.examples.empty() ? 0 : r.examples.front().edited);
      pt.runs.push_back(finish(std::move(r), pt.value, name));
      curve.structured.push_back(std::move(pt));
    }
    return curve;
  }

  for (int g : grid) {
    if (g < 1) throw Error(ErrorCode::InfeasibleGrid, "demo counts must be at least 1");
    ScalingPoint pt;
    pt.value = g;
    pt.label = std::to_string(g);
    ExperimentResult r;
    try {
      if (axis == ScalingAxis::SourceDemos) {
        const auto means = extract_mean_activations(model, source, o.n_s, {layer}, scope,
                                                    derive_seed(o.seed, "source"), g, o.site.kind);
        r = run_transfer(model, means, target, layer, o);
      } else {
        RunOptions t = o;
        t.k = g;
        const auto means = extract_mean_activations(model, source, o.n_s, {layer}, scope,
                                                    derive_seed(o.seed, "source"), o.k, o.site.kind);
        r = run_transfer(model, means, target, layer, t);
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::DomainExhausted || e.code() == ErrorCode::AlignmentError ||
          e.code() == ErrorCode::SequenceTooLong) {
        throw Error(ErrorCode::InfeasibleGrid, "grid value " + std::to_string(g) + ": " + e.what());
      }
      throw;
    }
    pt.tau = r.tau;
    pt.runs.push_back(finish(std::move(r), g, "k" + std::to_string(g)));
    curve.points.push_back(std::move(pt));
  }
  return curve;
}

MatrixSummary transfer_matrix(const Model& model, const std::vector<std::string>& tasks, int layer,
                              Scope scope, const RunOptions& o) {
  if (tasks.size() < 2) throw Error(ErrorCode::TooFewItems, "the matrix needs at least 2 tasks");
  MatrixSummary m;
  for (const auto& t : tasks) m.tasks.push_back(find_task(t).name);
  std::map<std::string, MeanActivations> means;
  for (const auto& t : m.tasks) {
    means.emplace(t, extract_mean_activations(model, t, o.n_s, {layer}, scope,
                                              derive_seed(o.seed, "source"), o.k, o.site.kind));
  }
  std::map<std::string, std::optional<double>> tau;
  std::vector<double> xs, ys;
  for (const auto& a : m.tasks) {
    for (const auto& b : m.tasks) {
      if (a == b) continue;
      auto r = run_transfer(model, means.at(a), b, layer, o);
      r.experiment = "matrix";
      const double v = r.tau.value_or(0.0);
      if (v >= 0.5) ++m.high;
      else if (v >= 0.1) ++m.medium;
      else ++m.low;
      tau[pair_label(a, b)] = r.tau;
      const double sim = surface_similarity(find_task(a), find_task(b), 20, derive_seed(o.seed, "surface"));
      m.surface_similarity[pair_label(a, b)] = sim;
      if (r.tau) {
        xs.push_back(sim);
        ys.push_back(*r.tau);
      }
      m.cells.push_back(std::move(r));
    }
  }
  for (std::size_t i = 0; i < m.tasks.size(); ++i) {
    for (std::size_t j = i + 1; j < m.tasks.size(); ++j) {
      const auto ab = tau[pair_label(m.tasks[i], m.tasks[j])];
      const auto ba = tau[pair_label(m.tasks[j], m.tasks[i])];
      if (ab && ba && std::abs(*ab - *ba) > 0.5) m.asymmetric.emplace_back(m.tasks[i], m.tasks[j]);
    }
  }
  try {
    m.surface_vs_tau = stats::pearson_r(xs, ys, 1000, derive_seed(o.seed, "surface-perm"));
  } catch (const Error& e) {
    m.warnings.push_back(std::string("surface-similarity correlation undefined: ") + e.what());
  }
  return m;
}

std::vector<LayerAblationRow> layer_output_ablation(const Model& model, std::string_view task,
                                                    const std::vector<int>& layers,
                                                    const RunOptions& o) {
  for (int l : layers) {
    if (l < 0 || l >= model.config().n_layers) {
      throw Error(ErrorCode::InfeasibleGrid, "layer " + std::to_string(l) + " outside the model");
    }
  }
  const auto layouts = target_prompts(task, o.n_t, o.k, derive_seed(o.seed, "target"));
  auto accuracy = [&](const InterventionPlan* plan) {
    const auto ok = parallel_map<char>(layouts.size(), [&](std::size_t i) -> char {
      return generate_greedy(model, layouts[i], plan, o.max_new) == layouts[i].query.expected;
    });
    double c = 0;
    for (char v : ok) c += v;
    return c / static_cast<double>(layouts.size());
  };
  std::vector<LayerAblationRow> rows{{-1, accuracy(nullptr)}};
  for (int l : layers) {
    Edit e;
    e.layer = l;
    e.action = ActionKind::LayerZero;
    InterventionPlan plan{{e}};
    rows.push_back({l, accuracy(&plan)});
  }
  return rows;
}

std::vector<ExperimentResult> timing_sweep(const Model& model, std::string_view source,
                                           std::string_view target, int layer, Scope scope,
                                           const RunOptions& o) {
  const std::vector<HookSite> sites = {
      {SiteKind::PreAttention, Persistence::InitialPassOnly},
      {SiteKind::PostAttention, Persistence::InitialPassOnly},
      {SiteKind::PostBlock, Persistence::InitialPassOnly},
      {SiteKind::PostBlock, Persistence::PersistentDecode},
  };
  std::vector<ExperimentResult> out;
  for (const auto& site : sites) {
    RunOptions t = o;
    t.site = site;
    auto r = run_transfer(model, source, target, layer, scope, t);
    r.experiment = "timing";
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace icl
