#include "icl/commands.hpp"

#include <chrono>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>

#include "icl/error.hpp"
#include "icl/intervene.hpp"
#include "icl/probe.hpp"
#include "icl/report.hpp"
#include "icl/results.hpp"
#include "icl/rng.hpp"
#include "icl/stats.hpp"
#include "icl/trainer.hpp"

namespace icl {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {
      "train", "eval",   "probe",  "transfer",     "ablate", "trace",     "controls",
      "scaling", "matrix", "layer-ablate", "timing", "attention", "stats",   "report"};
  return names;
}

namespace {

struct Context {
  const RunConfig& cfg;
  std::ostream& out;
  std::ostream& err;
  int failures = 0;

  fs::path root() const { return cfg.out; }

  Model model() const { return load_weights(cfg.model); }

  std::vector<int> layers(const Model& m) const {
    if (!cfg.layers.empty()) return cfg.layers;
    std::vector<int> all;
    for (int l = 0; l < m.config().n_layers; ++l) all.push_back(l);
    return all;
  }

  std::vector<std::string> tasks() const { return cfg.tasks.empty() ? core_task_names() : cfg.tasks; }

  std::vector<std::pair<std::string, std::string>> pairs() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& p : cfg.pairs) out.push_back(parse_pair(p));
    if (out.empty()) out.emplace_back(cfg.source, cfg.target);
    return out;
  }

  // Runs one item, reporting and counting its failure instead of aborting.
  void item(const std::string& label, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      ++failures;
      err << "error [" << label << "]: " << e.what() << "\n";
    }
  }

  void save(const ExperimentResult& r) { out << "  wrote " << write_result(root(), r).string() << "\n"; }
};

std::string fmt(const std::optional<double>& v) {
  if (!v) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << *v;
  return s.str();
}

void describe(std::ostream& out, const ExperimentResult& r) {
  out << r.experiment << " " << (r.source.empty() ? "" : r.source + "->") << r.target << " layer "
      << (r.layers.empty() ? -1 : r.layers[0]) << " " << r.scope << ": tau " << fmt(r.tau);
  if (r.ci) out << " [" << fmt(r.ci->lower) << ", " << fmt(r.ci->upper) << "]";
  out << " counts " << r.counts.transfer << "/" << r.counts.preserve << "/" << r.counts.malformed << "/"
      << r.counts.ambiguous << "/" << r.counts.skipped;
  if (r.accuracy) out << " acc " << fmt(r.accuracy);
  if (r.delta) out << " delta " << fmt(r.delta);
  out << "\n";
  for (const auto& w : r.warnings) out << "  warning: " << w << "\n";
}

void cmd_train(Context& c) {
  const TrainConfig tc = train_config(c.cfg);
  ModelConfig mc;
  mc.seed = c.cfg.seed;
  const fs::path model_path = c.cfg.model;
  const fs::path log_path = c.cfg.train_log.empty() ? fs::path(c.cfg.model + ".log.jsonl") : fs::path(c.cfg.train_log);
  if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw Error(ErrorCode::BadConfig, "cannot write " + log_path.string());
  const auto result = meta_train(tc, mc, &log);
  if (model_path.has_parent_path()) fs::create_directories(model_path.parent_path());
  save_weights(result.model, model_path);
  c.out << "trained " << result.steps_run << " steps in " << std::fixed << std::setprecision(1)
        << result.seconds << " s" << (result.early_stopped ? " (early stop)" : "") << "\n";
  if (!result.log.empty()) c.out << "final loss " << result.log.back().loss << "\n";
  for (auto it = result.log.rbegin(); it != result.log.rend(); ++it) {
    if (it->accuracy.empty()) continue;
    for (const auto& [task, acc] : it->accuracy) c.out << "  " << task << " " << fmt(acc) << "\n";
    break;
  }
  c.out << "wrote " << model_path.string() << " and " << log_path.string() << "\n";
}

void cmd_eval(Context& c) {
  const Model m = c.model();
  const std::vector<int> shots = c.cfg.shots.empty() ? std::vector<int>{c.cfg.k} : c.cfg.shots;
  json rows = json::array();
  for (const auto& task : c.tasks()) {
    for (int k : shots) {
      c.item(task + " k=" + std::to_string(k), [&] {
        const double acc = eval_fewshot(m, task, k, c.cfg.n_eval, derive_seed(c.cfg.seed, "eval"));
        rows.push_back({{"task", task}, {"k", k}, {"n", c.cfg.n_eval}, {"accuracy", acc}});
        c.out << task << " k=" << k << " accuracy " << fmt(acc) << "\n";
      });
    }
  }
  const json doc = envelope("eval", {{"rows", rows}, {"seed", c.cfg.seed}, {"model", c.cfg.model}});
  c.out << "wrote " << write_document(c.root(), "eval", "all", c.cfg.seed, doc).string() << "\n";
}

std::vector<Scope> scopes_or(const std::vector<std::string>& names, std::vector<Scope> fallback) {
  if (names.empty()) return fallback;
  std::vector<Scope> out;
  for (const auto& n : names) out.push_back(parse_scope(n));
  return out;
}

void cmd_probe(Context& c) {
  const Model m = c.model();
  const auto positions = scopes_or(c.cfg.positions, {Scope::LastDemoToken, Scope::Separator, Scope::FirstQueryToken});
  ProbeOptions opts;
  opts.k = c.cfg.k;
  opts.site = parse_site(c.cfg.site);
  const auto sweep = probe_sweep(m, c.tasks(), c.layers(m), positions, c.cfg.n_fit, c.cfg.n_eval,
                                 derive_seed(c.cfg.seed, "probe"), opts);
  json rows = json::array();
  for (const auto& r : sweep.rows) {
    rows.push_back({{"layer", r.layer}, {"position", r.position}, {"task", r.task}, {"accuracy", r.accuracy}});
    if (r.task == "overall") c.out << "layer " << r.layer << " " << r.position << " " << fmt(r.accuracy) << "\n";
  }
  for (const auto& w : sweep.warnings) c.out << "warning: " << w << "\n";
  const json doc = envelope("probe", {{"rows", rows},
                                      {"n_fit", c.cfg.n_fit},
                                      {"n_eval", c.cfg.n_eval},
                                      {"site", c.cfg.site},
                                      {"warnings", sweep.warnings}});
  c.out << "wrote " << write_document(c.root(), "probe", "all", c.cfg.seed, doc).string() << "\n";
}

void cmd_transfer(Context& c) {
  const Model m = c.model();
  const RunOptions o = run_options(c.cfg);
  const auto scopes = scopes_or(c.cfg.scopes, {parse_scope(c.cfg.scope)});
  const std::vector<int> layers = c.cfg.layers.empty() ? std::vector<int>{c.cfg.layer} : c.cfg.layers;
  for (const auto& [s, t] : c.pairs()) {
    for (Scope scope : scopes) {
      for (int layer : layers) {
        c.item(s + "->" + t + " " + std::string(to_string(scope)) + " L" + std::to_string(layer), [&] {
          const auto r = run_transfer(m, s, t, layer, scope, o);
          describe(c.out, r);
          c.save(r);
        });
      }
    }
  }
}

void cmd_ablate(Context& c) {
  const Model m = c.model();
  const RunOptions o = run_options(c.cfg);
  const auto scopes = scopes_or(c.cfg.scopes, {parse_scope(c.cfg.scope)});
  const std::vector<int> layers = c.cfg.layers.empty() ? std::vector<int>{c.cfg.layer} : c.cfg.layers;
  const AblationKind kind = parse_ablation(c.cfg.kind);
  for (Scope scope : scopes) {
    for (int layer : layers) {
      c.item(c.cfg.target + " " + std::string(to_string(scope)) + " L" + std::to_string(layer), [&] {
        const auto r = run_ablation(m, c.cfg.target, layer, scope, kind, o, c.cfg.sigma);
        describe(c.out, r);
        c.save(r);
      });
    }
  }
}

void cmd_trace(Context& c) {
  const Model m = c.model();
  const auto positions = scopes_or(c.cfg.positions, {Scope::FirstQueryToken, Scope::LastDemoToken});
  for (const auto& task : c.cfg.tasks.empty() ? std::vector<std::string>{c.cfg.target} : c.cfg.tasks) {
    c.item(task, [&] {
      for (const auto& r : run_noise_trace(m, task, positions, c.layers(m), c.cfg.alpha, run_options(c.cfg))) {
        describe(c.out, r);
        c.save(r);
      }
    });
  }
}

void cmd_controls(Context& c) {
  const Model m = c.model();
  const std::vector<int> layers = c.cfg.layers.empty() ? std::vector<int>{c.cfg.layer} : c.cfg.layers;
  for (const auto& pair : c.pairs()) {
    for (int layer : layers) {
      c.item(pair.first + "->" + pair.second + " L" + std::to_string(layer), [&] {
        const auto rows = run_controls(m, {pair}, layer, parse_scope(c.cfg.scope), run_options(c.cfg));
        for (const auto& row : rows) {
          for (const auto& [_, r] : row.results) {
            describe(c.out, r);
            c.save(r);
          }
        }
      });
    }
  }
}

void cmd_scaling(Context& c) {
  const Model m = c.model();
  const ScalingAxis axis = parse_axis(c.cfg.axis);
  std::vector<int> grid = c.cfg.grid;
  if (grid.empty()) {
    switch (axis) {
      case ScalingAxis::PositionCount: grid = {0, 1, 2, 4, 8, 12, kAllPositions}; break;
      case ScalingAxis::SourceDemos: grid = {1, 2, 3, 4, 5}; break;
      case ScalingAxis::TargetDemos: grid = {1, 2, 3, 5, 8}; break;
    }
  }
  // Position counts are over demonstration output positions.
  const Scope scope = axis == ScalingAxis::PositionCount && c.cfg.scopes.empty()
                          ? Scope::OutputOnly
                          : parse_scope(c.cfg.scopes.empty() ? c.cfg.scope : c.cfg.scopes.front());
  for (const auto& [s, t] : c.pairs()) {
    c.item(s + "->" + t, [&] {
      const auto curve = run_scaling(m, s, t, c.cfg.layer, axis, grid, scope, run_options(c.cfg));
      for (const auto* points : {&curve.points, &curve.structured}) {
        for (const auto& pt : *points) {
          c.out << curve.axis << " " << s << "->" << t << " " << pt.label << ": tau " << fmt(pt.tau) << "\n";
          for (const auto& r : pt.runs) write_result(c.root(), r);
        }
      }
    });
  }
  emit_report(c.root(), c.cfg.reports);
}

void cmd_matrix(Context& c) {
  const Model m = c.model();
  const Scope scope = parse_scope(c.cfg.scope);
  const auto summary = transfer_matrix(m, c.tasks(), c.cfg.layer, scope, run_options(c.cfg));
  for (const auto& r : summary.cells) {
    c.out << r.source << "->" << r.target << " " << fmt(r.tau) << "\n";
    write_result(c.root(), r);
  }
  json asym = json::array();
  for (const auto& [a, b] : summary.asymmetric) asym.push_back({a, b});
  json corr = nullptr;
  if (summary.surface_vs_tau) {
    corr = {{"r", summary.surface_vs_tau->r}, {"p", summary.surface_vs_tau->p}, {"n_perm", summary.surface_vs_tau->n_perm}};
  }
  const json doc = envelope("matrix_summary", {{"tasks", summary.tasks},
                                               {"layer", c.cfg.layer},
                                               {"scope", c.cfg.scope},
                                               {"pairs", summary.cells.size()},
                                               {"high", summary.high},
                                               {"medium", summary.medium},
                                               {"low", summary.low},
                                               {"asymmetric", asym},
                                               {"surface_vs_tau", corr},
                                               {"surface_similarity", summary.surface_similarity},
                                               {"warnings", summary.warnings}});
  c.out << "buckets >=0.5: " << summary.high << ", 0.1-0.5: " << summary.medium << ", <0.1: " << summary.low << "\n";
  for (const auto& w : summary.warnings) c.out << "warning: " << w << "\n";
  write_document(c.root(), "matrix_summary", "L" + std::to_string(c.cfg.layer) + "." + c.cfg.scope, c.cfg.seed, doc);
  emit_report(c.root(), c.cfg.reports);
  c.out << "wrote " << (fs::path(c.cfg.reports) / "transfer_matrix.csv").string() << "\n";
}

void cmd_layer_ablate(Context& c) {
  const Model m = c.model();
  for (const auto& task : c.cfg.tasks.empty() ? std::vector<std::string>{c.cfg.target} : c.cfg.tasks) {
    c.item(task, [&] {
      const auto rows = layer_output_ablation(m, task, c.layers(m), run_options(c.cfg));
      json js = json::array();
      for (const auto& r : rows) {
        js.push_back({{"layer", r.layer}, {"accuracy", r.accuracy}});
        c.out << task << " ablate " << (r.layer < 0 ? std::string("none") : std::to_string(r.layer)) << ": "
              << fmt(r.accuracy) << "\n";
      }
      const json doc = envelope("layer_ablation", {{"task", task}, {"n", run_options(c.cfg).n_t}, {"rows", js}});
      write_document(c.root(), "layer_ablation", task, c.cfg.seed, doc);
    });
  }
}

void cmd_timing(Context& c) {
  const Model m = c.model();
  for (const auto& [s, t] : c.pairs()) {
    c.item(s + "->" + t, [&] {
      for (const auto& r : timing_sweep(m, s, t, c.cfg.layer, parse_scope(c.cfg.scope), run_options(c.cfg))) {
        c.out << r.site << "/" << r.persistence << ": ";
        describe(c.out, r);
        c.save(r);
      }
    });
  }
}

void cmd_attention(Context& c) {
  const Model m = c.model();
  json rows = json::array();
  for (const auto& task : c.tasks()) {
    c.item(task, [&] {
      const auto layouts = target_prompts(task, c.cfg.n_eval, c.cfg.k, derive_seed(c.cfg.seed, "attention"));
      for (int layer : c.layers(m)) {
        AttentionSummary sum;
        for (const auto& l : layouts) {
          const auto a = attention_summary(m, l, layer);
          sum.demo_inputs += a.demo_inputs;
          sum.demo_outputs += a.demo_outputs;
          sum.separators += a.separators;
          sum.query_self += a.query_self;
          sum.markers += a.markers;
        }
        const double n = static_cast<double>(layouts.size());
        rows.push_back({{"task", task},
                        {"layer", layer},
                        {"n", layouts.size()},
                        {"demo_inputs", sum.demo_inputs / n},
                        {"demo_outputs", sum.demo_outputs / n},
                        {"separators", sum.separators / n},
                        {"query_self", sum.query_self / n},
                        {"markers", sum.markers / n}});
        c.out << task << " layer " << layer << ": inputs " << fmt(sum.demo_inputs / n) << " outputs "
              << fmt(sum.demo_outputs / n) << " separators " << fmt(sum.separators / n) << " query "
              << fmt(sum.query_self / n) << "\n";
      }
    });
  }
  const json doc = envelope("attention", {{"rows", rows}});
  write_document(c.root(), "attention", "all", c.cfg.seed, doc);
}

void cmd_stats(Context& c) {
  const Model m = c.model();
  ProbeOptions opts;
  opts.k = c.cfg.k;
  opts.site = parse_site(c.cfg.site);
  const std::string position = c.cfg.positions.empty() ? "last_demo_token" : c.cfg.positions.front();
  const auto probe = fit_centroids(m, c.tasks(), c.cfg.layer, parse_scope(position), c.cfg.n_fit,
                                   derive_seed(c.cfg.seed, "stats"), opts);
  std::map<Regime, int> regime_ids;
  std::vector<int> reference;
  for (const auto& t : probe.tasks) {
    const Regime r = find_task(t).regime;
    reference.push_back(regime_ids.emplace(r, static_cast<int>(regime_ids.size())).first->second);
  }
  const auto cos = stats::cosine_matrix(probe.centroids);
  const int n = static_cast<int>(probe.tasks.size());
  const auto cl = stats::cluster_and_test(probe.centroids, 2, n - 1, reference, c.cfg.n_perm,
                                          derive_seed(c.cfg.seed, "cluster"));
  json by_k = json::object();
  for (const auto& [k, s] : cl.silhouette_by_k) by_k[std::to_string(k)] = s;
  const json doc = envelope("stats", {{"layer", c.cfg.layer},
                                      {"position", position},
                                      {"tasks", probe.tasks},
                                      {"n_per_task", c.cfg.n_fit},
                                      {"cosine", cos},
                                      {"regimes", reference},
                                      {"k", cl.k},
                                      {"labels", cl.labels},
                                      {"silhouette", cl.silhouette},
                                      {"silhouette_by_k", by_k},
                                      {"agreement", cl.agreement},
                                      {"p_value", cl.p_value},
                                      {"n_perm", cl.n_perm},
                                      {"degenerate", cl.degenerate},
                                      {"warning", cl.warning}});
  c.out << "clusters k=" << cl.k << " silhouette " << fmt(cl.silhouette) << " ARI vs regime "
        << fmt(cl.agreement) << " p=" << fmt(cl.p_value) << "\n";
  if (!cl.warning.empty()) c.out << "warning: " << cl.warning << "\n";
  write_document(c.root(), "stats", "L" + std::to_string(c.cfg.layer), c.cfg.seed, doc);
}

void cmd_report(Context& c) {
  const auto summary = emit_report(c.root(), c.cfg.reports);
  c.out << "read " << summary.documents << " documents, wrote " << summary.written.size() << " files to "
        << c.cfg.reports << "\n";
  for (const auto& claim : summary.claims) {
    c.out << claim.status << " " << claim.id << ": " << claim.observation << "\n";
  }
  for (const auto& w : summary.warnings) c.err << "warning: " << w << "\n";
}

}  // namespace

int run_command(const std::string& name, const RunConfig& config, std::ostream& out, std::ostream& err) {
  static const std::map<std::string, std::function<void(Context&)>> table = {
      {"train", cmd_train},       {"eval", cmd_eval},       {"probe", cmd_probe},
      {"transfer", cmd_transfer}, {"ablate", cmd_ablate},   {"trace", cmd_trace},
      {"controls", cmd_controls}, {"scaling", cmd_scaling}, {"matrix", cmd_matrix},
      {"layer-ablate", cmd_layer_ablate}, {"timing", cmd_timing}, {"attention", cmd_attention},
      {"stats", cmd_stats},       {"report", cmd_report}};
  const auto it = table.find(name);
  if (it == table.end()) {
    err << "error: unknown subcommand " << name << "\n";
    return 2;
  }
  Context ctx{config, out, err};
  try {
    config.validate();
    it->second(ctx);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  if (ctx.failures > 0) {
    err << ctx.failures << " item(s) failed\n";
    return 1;
  }
  return 0;
}

}  // namespace icl
