#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "icl/intervene.hpp"
#include "icl/results.hpp"
#include "icl/rng.hpp"
#include "support.hpp"

using namespace icl;
using testing::error_of;

namespace {

const Model& model() {
  static const Model m(testing::small_config());
  return m;
}

RunOptions quick(std::uint64_t seed = 42) {
  RunOptions o;
  o.k = 3;
  o.n_t = 4;
  o.n_s = 2;
  o.max_new = 8;
  o.seed = seed;
  return o;
}

// Rebuilds a layout from prompt text of the form "In: x Out: y\n...In: q Out:".
PromptLayout parse_prompt(const std::string& text, const std::string& task) {
  const auto& spec = find_task(task);
  std::vector<TaskInstance> demos;
  std::istringstream in(text);
  std::string line;
  TaskInstance query;
  while (std::getline(in, line)) {
    const auto o = line.find(" Out:");
    const std::string x = line.substr(4, o - 4);
    if (o + 5 == line.size()) query = {spec.name, x, spec.expected(x)};
    else demos.push_back({spec.name, x, line.substr(o + 6)});
  }
  return layout_from_instances(demos, query);
}

std::vector<std::string> generations(const ExperimentResult& r) {
  std::vector<std::string> out;
  for (const auto& e : r.examples) out.push_back(e.generated);
  return out;
}

ExampleRecord record(const std::string& label, std::optional<bool> correct = std::nullopt,
                     std::optional<bool> clean = std::nullopt) {
  ExampleRecord e;
  e.label = label;
  e.correct = correct;
  e.clean_correct = clean;
  return e;
}

}  // namespace

TEST_CASE("summarize recounts labels") {
  ExperimentResult r;
  r.source = "repeat_word";
  r.target = "uppercase";
  for (int i = 0; i < 48; ++i) r.examples.push_back(record("transfer"));
  r.examples.push_back(record("preserve"));
  r.examples.push_back(record("malformed"));
  summarize(r);
  CHECK(r.n_total == 50);
  CHECK(r.counts == Counts{48, 1, 1, 0, 0});
  CHECK(*r.tau == Catch::Approx(0.96));
  CHECK(std::lround(r.ci->lower * 100) == 87);
  CHECK(std::lround(r.ci->upper * 100) == 99);

  r.examples.push_back(record("ambiguous"));
  r.examples.push_back(record("skipped"));
  summarize(r);
  CHECK(r.n_total == 52);
  CHECK(r.counts.total() == 52);
  CHECK(*r.tau == Catch::Approx(0.96));

  r.examples.push_back(record("bogus"));
  CHECK(error_of([&] { summarize(r); }) == ErrorCode::CorruptResult);

  ExperimentResult none;
  none.source = "a";
  none.examples = {record("ambiguous"), record("skipped")};
  summarize(none);
  CHECK(!none.tau);
}

TEST_CASE("summarize agrees with a brute-force recount on random result sets") {
  Rng rng(77);
  const char* labels[] = {"transfer", "preserve", "malformed", "ambiguous", "skipped"};
  for (int t = 0; t < 100; ++t) {
    ExperimentResult r;
    r.source = "s";
    const int n = 1 + static_cast<int>(rng.below(80));
    int transfer = 0, excluded = 0, correct = 0, clean = 0;
    for (int i = 0; i < n; ++i) {
      const auto* l = labels[rng.below(5)];
      const bool c = rng.below(2), cc = rng.below(3) != 0;
      r.examples.push_back(record(l, c, cc));
      transfer += std::string(l) == "transfer";
      excluded += std::string(l) == "ambiguous" || std::string(l) == "skipped";
      correct += c;
      clean += cc;
    }
    summarize(r);
    REQUIRE(r.n_total == n);
    REQUIRE(r.counts.total() == n);
    REQUIRE(r.counts.transfer == transfer);
    if (n - excluded > 0) {
      REQUIRE(r.tau.has_value());
      REQUIRE(*r.tau == static_cast<double>(transfer) / (n - excluded));
    } else {
      REQUIRE(!r.tau);
    }
    REQUIRE(*r.accuracy == static_cast<double>(correct) / n);
    REQUIRE(*r.clean_accuracy == static_cast<double>(clean) / n);
    if (clean > 0) {
      const double ca = static_cast<double>(clean) / n, a = static_cast<double>(correct) / n;
      REQUIRE(*r.delta == (ca - a) / ca);
    } else {
      REQUIRE(!r.delta);
    }
  }
}

TEST_CASE("disruption rate") {
  CHECK(disruption_rate(1.0, 0.0) == 1.0);
  CHECK(disruption_rate(0.8, 0.8) == 0.0);
  CHECK(disruption_rate(0.5, 0.25) == 0.5);
  CHECK(error_of([] { disruption_rate(0.0, 0.0); }) == ErrorCode::DegenerateBaseline);
}

TEST_CASE("mean_of") {
  Rng rng(3);
  std::vector<KeyedVectors> maps(3);
  for (auto& m : maps) {
    for (const char* key : {"d1.out.0", "d2.in.1", "last_demo_token"}) {
      auto& v = m[1][key];
      for (int i = 0; i < 5; ++i) v.push_back(static_cast<float>(rng.normal()));
    }
  }
  const auto mean = mean_of(maps);
  for (const auto& [key, v] : mean.at(1)) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double want = (static_cast<double>(maps[0][1][key][i]) + maps[1][1][key][i] + maps[2][1][key][i]) / 3;
      CHECK(v[i] == Catch::Approx(want).margin(1e-6));
    }
  }
  CHECK(mean_of({maps[0]}) == maps[0]);
  CHECK(mean_of({maps[0], maps[0]}) == maps[0]);
  auto broken = maps;
  broken[2][1].erase("d2.in.1");
  CHECK(error_of([&] { mean_of(broken); }) == ErrorCode::AlignmentError);
  broken = maps;
  broken[1][1]["d9.out.0"] = std::vector<float>(5, 0.0f);
  CHECK(error_of([&] { mean_of(broken); }) == ErrorCode::AlignmentError);
}

TEST_CASE("mean activations are the average of the captured source prompts") {
  const auto& m = model();
  for (int n_s : {1, 3}) {
    const auto means = extract_mean_activations(m, "uppercase", n_s, {0, 2}, Scope::OutputOnly, 5, 3);
    REQUIRE(means.prompts.size() == static_cast<std::size_t>(n_s));
    CaptureRequest req;
    req.layers = {0, 2};
    std::map<int, std::map<std::string, std::vector<double>>> sum;
    for (const auto& text : means.prompts) {
      const auto l = parse_prompt(text, "uppercase");
      REQUIRE(l.text == text);
      const auto res = m.forward(l.token_ids, nullptr, &req);
      for (int layer : {0, 2}) {
        for (int p : resolve_position_set(l, Scope::OutputOnly)) {
          auto& acc = sum[layer][position_key(l, p, Scope::OutputOnly)];
          const auto& h = res.cache.at(layer, p);
          acc.resize(h.size(), 0.0);
          for (std::size_t i = 0; i < h.size(); ++i) acc[i] += h[i];
        }
      }
    }
    for (int layer : {0, 2}) {
      REQUIRE(means.values.at(layer).size() == sum[layer].size());
      for (const auto& [key, acc] : sum[layer]) {
        const auto& got = means.values.at(layer).at(key);
        for (std::size_t i = 0; i < acc.size(); ++i) {
          if (n_s == 1) REQUIRE(got[i] == static_cast<float>(acc[i]));
          else REQUIRE(got[i] == Catch::Approx(acc[i] / n_s).margin(1e-5));
        }
      }
    }
  }
}

TEST_CASE("source prompts share one demonstration shape") {
  const auto& m = model();
  const auto means = extract_mean_activations(m, "antonym", 4, {1}, Scope::AllDemo, 8, 5);
  const auto spec = find_task("antonym");
  const auto [shape, pool] = modal_shape_pool(spec);
  CHECK(means.shape == shape);
  for (const auto& text : means.prompts) {
    const auto l = parse_prompt(text, "antonym");
    for (const auto& d : l.demos) {
      CHECK(d.input.size() == shape.first);
      CHECK(d.output.size() == shape.second);
    }
  }
  CHECK(error_of([&] { extract_mean_activations(m, "antonym", 0, {1}, Scope::AllDemo, 8); }) ==
        ErrorCode::InvalidCounts);
}

TEST_CASE("self transplant of a prompt's own activations is the identity") {
  const auto& m = model();
  for (Scope s : {Scope::AllDemo, Scope::InputOnly, Scope::LastDemo, Scope::Separator}) {
    for (int layer = 0; layer < 3; ++layer) {
      const auto means = extract_mean_activations(m, "repeat_word", 1, {layer}, s, 11 + layer, 3);
      const auto l = parse_prompt(means.prompts[0], "repeat_word");
      Edit e;
      e.layer = layer;
      e.action = ActionKind::Replace;
      for (int p : resolve_position_set(l, s)) {
        e.positions.push_back(p);
        e.vectors.push_back(means.values.at(layer).at(position_key(l, p, s)));
      }
      const InterventionPlan plan{{e}};
      REQUIRE(generate_greedy(m, l, &plan, 8) == generate_greedy(m, l, nullptr, 8));
    }
  }
}

TEST_CASE("transfer runs") {
  const auto& m = model();
  const auto o = quick();
  const auto r = run_transfer(m, "uppercase", "repeat_word", 1, Scope::AllDemo, o);
  CHECK(r.experiment == "transfer");
  CHECK(r.n_total == o.n_t);
  CHECK(r.counts.total() == o.n_t);
  CHECK(r.layers == std::vector<int>{1});
  CHECK(r.scope == "all_demo");
  CHECK(r.seeds.at("master") == 42);
  CHECK(dump(to_json(r)) == dump(to_json(run_transfer(m, "uppercase", "repeat_word", 1, Scope::AllDemo, o))));
  const auto other = run_transfer(m, "uppercase", "repeat_word", 1, Scope::AllDemo, quick(43));
  CHECK(other.seeds.at("master") == 43);
  for (const auto& e : r.examples) {
    CHECK(e.expected == find_task("repeat_word").expected(e.query));
    CHECK(e.edited > 0);
  }

  const auto self = run_transfer(m, "sentiment", "sentiment", 2, Scope::OutputOnly, o);
  CHECK(self.counts.transfer == 0);
  CHECK(self.counts.ambiguous == 0);
  CHECK(self.counts.preserve + self.counts.malformed == o.n_t);
  CHECK(*self.tau == 0.0);

  // Round trip through the result schema.
  const auto back = experiment_from_json(to_json(r));
  CHECK(dump(to_json(back)) == dump(to_json(r)));
}

TEST_CASE("ablation") {
  const auto& m = model();
  const auto o = quick();
  const auto zero = run_ablation(m, "uppercase", 1, Scope::LastDemoToken, AblationKind::Zero, o);
  CHECK(zero.experiment == "ablate_zero");
  CHECK(zero.counts.total() == o.n_t);
  CHECK(zero.clean_accuracy.has_value());
  const auto rnd0 = run_ablation(m, "uppercase", 1, Scope::LastDemoToken, AblationKind::Random, o, 0.0);
  CHECK(generations(rnd0) == generations(zero));
  const auto rnd = run_ablation(m, "uppercase", 1, Scope::AllDemo, AblationKind::Random, o);
  CHECK(rnd.config.at("sigma").get<double>() > 0.0);
  CHECK(error_of([&] { run_ablation(m, "uppercase", 3, Scope::AllDemo, AblationKind::Zero, o); }) ==
        ErrorCode::PlanOutOfRange);
  CHECK(error_of([] { parse_ablation("mean"); }) == ErrorCode::BadConfig);
}

TEST_CASE("noise trace") {
  const auto& m = model();
  const auto o = quick();
  const auto rows = run_noise_trace(m, "uppercase", {Scope::FirstQueryToken, Scope::LastDemoToken}, {0, 2}, 0.0, o);
  CHECK(rows.size() == 4);
  for (const auto& r : rows) {
    CHECK(r.experiment == "trace");
    CHECK(r.accuracy == r.clean_accuracy);
    if (r.clean_accuracy && *r.clean_accuracy > 0) CHECK(*r.delta == 0.0);
    else CHECK(!r.delta);
    for (const auto& e : r.examples) CHECK(e.correct == e.clean_correct);
  }
  CHECK(error_of([&] { run_noise_trace(m, "uppercase", {Scope::FirstQueryToken}, {0}, -1.0, o); }) ==
        ErrorCode::BadConfig);
}

TEST_CASE("controls") {
  const auto& m = model();
  Rng rng(4);
  KeyedVectors means;
  for (const char* key : {"a", "b", "c"}) {
    auto& v = means[2][key];
    for (int i = 0; i < 32; ++i) v.push_back(static_cast<float>(rng.normal() * 3));
  }
  const auto noise = matched_noise(means, 9);
  for (const auto& [key, v] : means.at(2)) {
    double a = 0, b = 0, dot = 0;
    const auto& w = noise.at(2).at(key);
    for (std::size_t i = 0; i < v.size(); ++i) {
      a += v[i] * v[i];
      b += w[i] * w[i];
      dot += v[i] * w[i];
    }
    CHECK(std::abs(std::sqrt(a) - std::sqrt(b)) < 1e-4 * std::sqrt(a));
    CHECK(std::abs(dot) < std::sqrt(a * b));
  }

  const auto o = quick();
  const auto rows = run_controls(m, {{"uppercase", "repeat_word"}}, 1, Scope::LastDemoToken, o);
  REQUIRE(rows.size() == 1);
  const auto& row = rows[0];
  CHECK(row.distractor != "uppercase");
  CHECK(row.distractor != "repeat_word");
  CHECK(row.results.size() == 4);
  CHECK(generations(row.results.at("shuffled")) == generations(row.results.at("true_source")));
  for (const auto& [name, r] : row.results) {
    CHECK(r.experiment == "controls/" + name);
    CHECK(r.counts.total() == o.n_t);
  }
  CHECK(generations(row.results.at("true_source")) ==
        generations(run_transfer(m, "uppercase", "repeat_word", 1, Scope::LastDemoToken, o)));
}

TEST_CASE("position-count scaling") {
  const auto& m = model();
  const auto o = quick();
  const auto curve = run_scaling(m, "uppercase", "repeat_word", 1, ScalingAxis::PositionCount,
                                 {0, 2, kAllPositions}, Scope::OutputOnly, o);
  REQUIRE(curve.points.size() == 3);
  const auto full = run_transfer(m, "uppercase", "repeat_word", 1, Scope::OutputOnly, o);
  const auto& all = curve.points[2];
  REQUIRE(all.runs.size() == 1);
  CHECK(generations(all.runs[0]) == generations(full));
  CHECK(all.tau == full.tau);

  const auto& none = curve.points[0];
  REQUIRE(none.runs.size() == 1);
  const auto layouts = target_prompts("repeat_word", o.n_t, o.k, derive_seed(o.seed, "target"));
  for (std::size_t i = 0; i < layouts.size(); ++i) {
    CHECK(none.runs[0].examples[i].generated == generate_greedy(m, layouts[i], nullptr, o.max_new));
    CHECK(none.runs[0].examples[i].edited == 0);
  }
  CHECK(curve.points[1].subset_taus.size() == kRandomSubsets);
  CHECK(curve.points[1].runs.size() == kRandomSubsets);
  for (const auto& r : curve.points[1].runs) {
    for (const auto& e : r.examples) CHECK(e.edited == 2);
  }
  CHECK(curve.structured.size() == 3);
  CHECK(error_of([&] {
          run_scaling(m, "uppercase", "repeat_word", 1, ScalingAxis::PositionCount, {500}, Scope::OutputOnly, o);
        }) == ErrorCode::InfeasibleGrid);
}

TEST_CASE("demo-count scaling") {
  const auto& m = model();
  const auto o = quick();
  const auto src = run_scaling(m, "uppercase", "repeat_word", 1, ScalingAxis::SourceDemos, {1, 3}, Scope::AllDemo, o);
  CHECK(src.points.size() == 2);
  for (const auto& p : src.points) CHECK(p.runs.size() == 1);
  const auto tgt = run_scaling(m, "uppercase", "repeat_word", 1, ScalingAxis::TargetDemos, {2}, Scope::AllDemo, o);
  CHECK(tgt.points.size() == 1);
  CHECK(error_of([&] {
          run_scaling(m, "uppercase", "repeat_word", 1, ScalingAxis::TargetDemos, {0}, Scope::AllDemo, o);
        }) == ErrorCode::InfeasibleGrid);
  CHECK(error_of([] { parse_axis("width"); }) == ErrorCode::BadConfig);
}

TEST_CASE("transfer matrix") {
  const auto& m = model();
  auto o = quick();
  o.n_t = 2;
  const auto mx = transfer_matrix(m, {"uppercase", "length", "antonym"}, 1, Scope::AllDemo, o);
  CHECK(mx.cells.size() == 6);
  CHECK(mx.high + mx.medium + mx.low == 6);
  for (const auto& c : mx.cells) CHECK(c.source != c.target);
  CHECK(mx.surface_similarity.size() == 6);
  CHECK(mx.surface_similarity.at("uppercase->length") == mx.surface_similarity.at("length->uppercase"));
}

TEST_CASE("layer ablation and timing") {
  const auto& m = model();
  const auto o = quick();
  const auto rows = layer_output_ablation(m, "uppercase", {0, 1, 2}, o);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].layer == -1);
  const auto layouts = target_prompts("uppercase", o.n_t, o.k, derive_seed(o.seed, "target"));
  int correct = 0;
  for (const auto& l : layouts) correct += generate_greedy(m, l, nullptr, o.max_new) == l.query.expected;
  CHECK(rows[0].accuracy == static_cast<double>(correct) / o.n_t);
  CHECK(error_of([&] { layer_output_ablation(m, "uppercase", {3}, o); }) == ErrorCode::InfeasibleGrid);

  const auto t = timing_sweep(m, "uppercase", "repeat_word", 1, Scope::AllDemo, o);
  REQUIRE(t.size() == 4);
  CHECK(t[0].site == "pre_attention");
  CHECK(t[1].site == "post_attention");
  CHECK(t[2].site == "post_block");
  CHECK(t[3].persistence == "persistent");
  CHECK(generations(t[2]) == generations(run_transfer(m, "uppercase", "repeat_word", 1, Scope::AllDemo, o)));
}

TEST_CASE("results are independent of worker scheduling") {
  std::vector<int> out = parallel_map<int>(100, [](std::size_t i) { return static_cast<int>(i * i); });
  for (int i = 0; i < 100; ++i) CHECK(out[static_cast<std::size_t>(i)] == i * i);
  CHECK_THROWS(parallel_map<int>(10, [](std::size_t i) -> int {
    if (i == 7) throw Error(ErrorCode::InvalidCounts, "x");
    return 0;
  }));
}
