// Acceptance run: one line per criterion. Criteria 1-9 decide the exit
// status; 10-13 are directional findings on the trained model and are
// reported as PASS or OBSERVED.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>

#include "icl/commands.hpp"
#include "icl/config.hpp"
#include "icl/intervene.hpp"
#include "icl/lexicon.hpp"
#include "icl/probe.hpp"
#include "icl/report.hpp"
#include "icl/results.hpp"
#include "icl/rng.hpp"
#include "icl/stats.hpp"
#include "icl/trainer.hpp"
#include "support.hpp"
#include "task_oracle.hpp"

using namespace icl;
namespace fs = std::filesystem;

namespace {

struct Check {
  bool ok = false;
  std::string detail;
};

int hard_failures = 0;

void report(int id, const std::string& name, bool hard, const std::function<Check()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Check o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const char* status = o.ok ? "PASS" : (hard ? "FAIL" : "OBSERVED");
  if (hard && !o.ok) ++hard_failures;
  std::ostringstream secs;
  secs.precision(1);
  secs << std::fixed << s;
  std::cout << "criterion " << id << " " << name << ": " << status << " (" << o.detail << "; " << secs.str()
            << " s)" << std::endl;
}

const fs::path kModel = fs::path(ICL_SOURCE_DIR) / "models" / "default.bin";
const fs::path kLog = fs::path(ICL_SOURCE_DIR) / "models" / "default.bin.log.jsonl";

std::string fixed(double v, int digits = 3) {
  std::ostringstream s;
  s.precision(digits);
  s << std::fixed << v;
  return s.str();
}

// Trains the default model when no checkpoint exists, the same way the
// train subcommand does.
void ensure_model() {
  if (fs::exists(kModel) && fs::exists(kLog)) return;
  std::cout << "no default model at " << kModel << "; training one" << std::endl;
  RunConfig cfg;
  cfg.model = kModel.string();
  cfg.max_seconds = 3300;
  cfg.target_tasks = 8;
  std::ostringstream out, err;
  if (run_command("train", cfg, out, err) != 0) throw std::runtime_error(err.str());
  std::cout << out.str();
}

const Model& trained() {
  static const Model m = [] {
    ensure_model();
    return load_weights(kModel);
  }();
  return m;
}

Check hook_identity() {
  const Model& m = trained();
  Rng rng(derive_seed(1, "hook-identity"));
  const Scope scopes[] = {Scope::AllDemo,       Scope::InputOnly, Scope::OutputOnly,      Scope::LastDemo,
                          Scope::LastDemoToken, Scope::Separator, Scope::FirstQueryToken};
  const auto tasks = all_task_names();
  int checked = 0;
  for (int i = 0; i < 20; ++i) {
    const auto& task = tasks[rng.below(tasks.size())];
    const auto q = generate_instances(task, 1, rng.next()).front();
    const auto layout = build_prompt(task, 5, q, rng.next());
    const int layer = static_cast<int>(rng.below(static_cast<std::uint64_t>(m.config().n_layers)));
    const Scope scope = scopes[rng.below(7)];
    const auto site = static_cast<SiteKind>(rng.below(3));
    CaptureRequest req{{layer}, {}, site};
    const auto clean = m.forward(layout.token_ids, nullptr, &req);
    const auto baseline = generate_greedy(m, layout);

    Edit self;
    self.layer = layer;
    self.site.kind = site;
    self.action = ActionKind::Replace;
    self.positions = resolve_position_set(layout, scope);
    for (int p : self.positions) self.vectors.push_back(clean.cache.at(layer, p));
    Edit noise = self;
    noise.action = ActionKind::AddNoise;
    noise.vectors.clear();
    noise.scale = 0.0f;
    noise.sigma = 1.0f;
    noise.seed = rng.next();
    const InterventionPlan empty, p1{{self}}, p2{{noise}};
    for (const auto* plan : {&empty, &p1, &p2}) {
      if (generate_greedy(m, layout, plan) != baseline) {
        return {false, task + " layer " + std::to_string(layer) + " " + std::string(to_string(scope)) + " changed"};
      }
    }
    self.site.persistence = Persistence::PersistentDecode;
    const InterventionPlan p3{{self}};
    if (generate_greedy(m, layout, &p3) != baseline) return {false, "persistent self-replacement changed output"};
    ++checked;
  }
  return {true, std::to_string(checked) + " (layer, scope) combinations, empty and zero-noise plans identical"};
}

Check formula_oracles() {
  Rng rng(derive_seed(2, "formulas"));
  const char* labels[] = {"transfer", "preserve", "malformed", "ambiguous", "skipped"};
  for (int t = 0; t < 100; ++t) {
    ExperimentResult r;
    r.source = "s";
    r.target = "t";
    const int n = 1 + static_cast<int>(rng.below(60));
    int transfer = 0, excluded = 0, correct = 0, clean = 0;
    for (int i = 0; i < n; ++i) {
      ExampleRecord e;
      e.label = labels[rng.below(5)];
      e.correct = rng.below(2) == 1;
      e.clean_correct = rng.below(4) != 0;
      transfer += e.label == "transfer";
      excluded += e.label == "ambiguous" || e.label == "skipped";
      correct += *e.correct;
      clean += *e.clean_correct;
      r.examples.push_back(e);
    }
    // Round trip through the result schema before recounting.
    summarize(r);
    r = experiment_from_json(to_json(r));
    const bool tau_ok = n - excluded > 0 ? r.tau && *r.tau == static_cast<double>(transfer) / (n - excluded) : !r.tau;
    const double ca = static_cast<double>(clean) / n, a = static_cast<double>(correct) / n;
    const bool delta_ok = clean > 0 ? r.delta && *r.delta == (ca - a) / ca : !r.delta;
    if (!tau_ok || !delta_ok || r.counts.total() != n) return {false, "set " + std::to_string(t) + " disagrees"};
  }
  return {true, "100 random result sets, tau and delta exact"};
}

Check wilson_golden() {
  const auto a = stats::wilson_ci(48, 50), b = stats::wilson_ci(0, 50);
  auto closed = [](int s, int n, int sign) {
    const double z = 1.96, p = static_cast<double>(s) / n, d = 1 + z * z / n;
    return std::clamp((p + z * z / (2.0 * n) + sign * z * std::sqrt(p * (1 - p) / n + z * z / (4.0 * n * n))) / d,
                      0.0, 1.0);
  };
  const bool ok = std::abs(a.lower - 0.865) <= 0.005 && std::abs(a.upper - 0.989) <= 0.005 && b.lower == 0.0 &&
                  std::abs(b.upper - 0.072) <= 0.005 && std::abs(a.lower - closed(48, 50, -1)) < 1e-12 &&
                  std::abs(a.upper - closed(48, 50, 1)) < 1e-12 && std::abs(b.upper - closed(0, 50, 1)) < 1e-12 &&
                  std::lround(a.lower * 100) == 87 && std::lround(a.upper * 100) == 99 &&
                  std::lround(b.upper * 100) == 7;
  return {ok, "(48,50) [" + fixed(a.lower) + ", " + fixed(a.upper) + "], (0,50) [" + fixed(b.lower) + ", " +
                  fixed(b.upper) + "]"};
}

Check classification() {
  int agree = 0;
  const auto cases = oracle::grid();
  for (const auto& c : cases) {
    const auto& s = find_task(c.source);
    const auto& t = find_task(c.target);
    const auto got = classify_output(c.generated, s, t, {t.name, c.input, t.expected(c.input)});
    const auto want = oracle::classify(c.generated, s, t, c.input);
    agree += std::string(to_string(got.label)) == want.label && got.ambiguous == want.ambiguous;
  }
  const auto& rw = find_task("repeat_word");
  const auto& up = find_task("uppercase");
  const TaskInstance q{"uppercase", "cat", "CAT"};
  const bool rows = classify_output("CAT", rw, up, q).label == OutcomeLabel::Preserve &&
                    classify_output("cat cat", rw, up, q).label == OutcomeLabel::Transfer &&
                    classify_output("cattac", rw, up, q).label == OutcomeLabel::Malformed;
  return {agree == static_cast<int>(cases.size()) && rows,
          std::to_string(agree) + "/" + std::to_string(cases.size()) + " grid cases agree; example rows " +
              (rows ? "reproduce" : "differ")};
}

Check probe_equivalence() {
  Rng rng(derive_seed(5, "probe"));
  int mismatches = 0, checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int tasks = 2 + static_cast<int>(rng.below(4));
    std::map<std::string, std::vector<Vector>> samples;
    for (int t = 0; t < tasks; ++t) {
      auto& pts = samples["task" + std::to_string(t)];
      const int n = 1 + static_cast<int>(rng.below(20));
      for (int i = 0; i < n; ++i) {
        Vector v(5);
        for (auto& x : v) x = rng.normal() + t;
        pts.push_back(v);
      }
    }
    const auto probe = fit_centroids_from(samples);
    for (int q = 0; q < 25; ++q) {
      Vector h(5);
      for (auto& x : h) x = 2 * rng.normal() + 1;
      std::string best;
      double best_d = std::numeric_limits<double>::infinity();
      for (const auto& [task, pts] : samples) {
        double d = 0;
        for (std::size_t j = 0; j < h.size(); ++j) {
          double mu = 0;
          for (const auto& p : pts) mu += p[j];
          mu /= static_cast<double>(pts.size());
          d += (h[j] - mu) * (h[j] - mu);
        }
        if (d < best_d) {
          best_d = d;
          best = task;
        }
      }
      mismatches += probe.predict(h) != best;
      ++checked;
    }
  }
  // Separation 100, spread 0.1: every point lands on its own centroid.
  std::map<std::string, std::vector<Vector>> far;
  for (int t = 0; t < 3; ++t) {
    for (int i = 0; i < 20; ++i) {
      Vector v(4, 100.0 * t);
      for (auto& x : v) x += 0.1 * rng.normal();
      far["c" + std::to_string(t)].push_back(v);
    }
  }
  const auto probe = fit_centroids_from(far);
  int right = 0;
  for (const auto& [task, pts] : far) {
    for (const auto& p : pts) right += probe.predict(p) == task;
  }
  return {mismatches == 0 && right == 60, std::to_string(checked - mismatches) + "/" + std::to_string(checked) +
                                              " oracle matches; separated clusters " + std::to_string(right) + "/60"};
}

Check gradient_check() {
  const Model m(testing::tiny_config());
  auto batch = make_training_sequence("repeat_word", 3, 5);
  append_sequence(batch, make_training_sequence("linear_2x", 4, 6));
  const auto g = grad_check(m, batch, 1e-3, 400);
  return {g.max_rel_error < 1e-3, "max relative error " + std::to_string(g.max_rel_error) + " over " +
                                      std::to_string(g.checked) + " parameters"};
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    out[fs::relative(e.path(), root).string()] = s.str();
  }
  return out;
}

Check determinism() {
  trained();
  const auto root = testing::scratch_dir("acceptance_determinism");
  RunConfig cfg;
  cfg.model = kModel.string();
  cfg.headline = true;
  std::map<std::string, std::string> runs[2];
  for (int i = 0; i < 2; ++i) {
    cfg.out = (root / ("run" + std::to_string(i))).string();
    std::ostringstream out, err;
    if (run_command("transfer", cfg, out, err) != 0) return {false, err.str()};
    runs[i] = read_tree(cfg.out);
  }
  const bool same = runs[0] == runs[1] && !runs[0].empty();
  std::string tau;
  for (const auto& [path, text] : runs[0]) {
    const auto doc = json::parse(text);
    tau = path + " n_total " + std::to_string(doc.at("n_total").get<int>());
  }
  return {same, std::to_string(runs[0].size()) + " document(s) byte-identical across reruns, " + tau};
}

Check variant_fidelity() {
  const auto& up = find_task("uppercase");
  const auto& upp = find_task("uppercase_period");
  const auto& rw = find_task("repeat_word");
  const auto& rn = find_task("repeat_n");
  int n = 0, ok = 0;
  for (auto w : lexicon::common_words()) {
    const std::string x(w);
    ++n;
    ok += *rn.apply(x + " 2") == *rw.apply(x) && *upp.apply(x) == *up.apply(x) + ".";
  }
  return {ok == n, std::to_string(ok) + "/" + std::to_string(n) + " lexicon words"};
}

Check training_sanity() {
  const Model& m = trained();
  double seconds = 0;
  int last_step = 0;
  std::ifstream log(kLog);
  std::string line;
  while (std::getline(log, line)) {
    const auto j = json::parse(line);
    seconds = std::max(seconds, j.value("seconds", 0.0));
    last_step = std::max(last_step, j.value("step", 0));
  }
  int reached = 0;
  std::string detail;
  for (const auto& task : core_task_names()) {
    // Query and demo pools are disjoint, so small domains keep 10 inputs for demos.
    const int n = std::min(50, static_cast<int>(find_task(task).domain.size()) - 10);
    const double acc = eval_fewshot(m, task, 5, n, derive_seed(9, "acceptance-eval"));
    reached += acc >= 0.9;
    detail += task + "=" + fixed(acc, 2) + "/" + std::to_string(n) + " ";
  }
  return {reached >= 6 && seconds < 3600.0 && seconds > 0,
          std::to_string(reached) + "/8 tasks >= 0.90 on up to 50 fresh queries [" + detail + "]; trained " +
              std::to_string(last_step) + " steps in " + fixed(seconds, 0) + " s"};
}

// Soft criteria: run the experiments through the command layer and read
// the resulting claims.
std::map<std::string, Claim> soft_claims() {
  trained();
  const auto root = testing::scratch_dir("acceptance_soft");
  RunConfig base;
  base.model = kModel.string();
  base.out = (root / "results").string();
  base.reports = (root / "reports").string();
  base.n_t = 20;
  std::vector<std::pair<std::string, RunConfig>> runs;
  {
    RunConfig c = base;
    c.pairs = {"uppercase->repeat_word", "repeat_word->uppercase", "linear_2x->length", "first_letter->uppercase"};
    c.scopes = {"last_demo_token", "all_demo", "output_only"};
    c.layers = {0, 1, 2, 3, 4, 5, 6, 7};
    runs.emplace_back("transfer", c);
  }
  {
    RunConfig c = base;
    c.tasks = {"uppercase", "first_letter"};
    runs.emplace_back("trace", c);
  }
  {
    RunConfig c = base;
    c.pairs = {"uppercase->repeat_word", "repeat_word->uppercase", "linear_2x->length"};
    c.layers = {0, 1, 2, 3};
    runs.emplace_back("controls", c);
  }
  runs.emplace_back("probe", base);
  for (const auto& [name, cfg] : runs) {
    std::ostringstream out, err;
    const int status = run_command(name, cfg, out, err);
    if (status != 0) std::cout << name << " reported errors:\n" << err.str();
  }
  const auto summary = emit_report(base.out, base.reports);
  std::map<std::string, Claim> out;
  for (const auto& c : summary.claims) out[c.id] = c;
  std::cout << "tables written to " << base.reports << std::endl;
  return out;
}

}  // namespace

int main() {
  std::cout << "acceptance: hard criteria 1-9 fail the run; soft criteria 10-13 report PASS or OBSERVED" << std::endl;
  report(1, "hook identity", true, hook_identity);
  report(2, "formula oracles", true, formula_oracles);
  report(3, "wilson golden values", true, wilson_golden);
  report(4, "classification oracle", true, classification);
  report(5, "probe equivalence", true, probe_equivalence);
  report(6, "gradient check", true, gradient_check);
  report(7, "determinism", true, determinism);
  report(8, "variant fidelity", true, variant_fidelity);
  report(9, "training sanity", true, training_sanity);

  std::map<std::string, Claim> claims;
  try {
    claims = soft_claims();
  } catch (const std::exception& e) {
    std::cout << "soft experiments failed: " << e.what() << std::endl;
  }
  auto soft = [&](int id, const std::string& name, const std::string& claim) {
    report(id, name, false, [&] {
      const auto it = claims.find(claim);
      if (it == claims.end()) return Check{false, "no result"};
      return Check{it->second.status == "PASS", it->second.observation};
    });
  };
  soft(10, "single vs multi-position transplant", "single_vs_multi");
  soft(11, "causal tracing direction", "tracing");
  soft(12, "true source dominates controls", "controls");
  soft(13, "demo vs query probe accuracy", "probe_gap");

  std::cout << (hard_failures == 0 ? "acceptance: all hard criteria passed"
                                   : "acceptance: " + std::to_string(hard_failures) + " hard criteria failed")
            << std::endl;
  return hard_failures == 0 ? 0 : 1;
}
