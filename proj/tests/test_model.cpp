#include <catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <thread>

#include "icl/model.hpp"
#include "icl/prompt.hpp"
#include "icl/rng.hpp"
#include "icl/tasks.hpp"
#include "support.hpp"

using namespace icl;
using testing::error_of;

namespace {

PromptLayout sample_prompt(const std::string& task, int k, std::uint64_t seed) {
  const auto q = generate_instances(task, 1, seed).front();
  return build_prompt(task, k, q, seed + 1);
}

Edit self_replace(const ForwardResult& clean, int layer, SiteKind site, const std::vector<int>& positions) {
  Edit e;
  e.layer = layer;
  e.site.kind = site;
  e.positions = positions;
  e.action = ActionKind::Replace;
  for (int p : positions) e.vectors.push_back(clean.cache.at(layer, p));
  return e;
}

CaptureRequest capture_all(const Model& m, SiteKind site) {
  CaptureRequest c;
  for (int l = 0; l < m.config().n_layers; ++l) c.layers.push_back(l);
  c.site = site;
  return c;
}

}  // namespace

TEST_CASE("config validation") {
  ModelConfig c = testing::tiny_config();
  CHECK_NOTHROW(c.validate());
  c.n_heads = 3;
  CHECK(error_of([&] { c.validate(); }) == ErrorCode::BadConfig);
  c = testing::tiny_config();
  c.n_layers = 0;
  CHECK(error_of([&] { c.validate(); }) == ErrorCode::BadConfig);
  const auto lay = ParamLayout::from(testing::tiny_config());
  std::size_t sum = 0;
  for (const auto& t : lay.tensors) {
    CHECK(t.offset == sum);
    sum += t.rows * t.cols;
  }
  CHECK(sum == lay.total);
}

TEST_CASE("init is deterministic in the seed") {
  const Model a(testing::tiny_config(3)), b(testing::tiny_config(3)), c(testing::tiny_config(4));
  CHECK(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  CHECK(!std::equal(a.params().begin(), a.params().end(), c.params().begin()));
}

TEST_CASE("forward shapes and length limits") {
  const Model m(testing::tiny_config());
  const auto l = sample_prompt("uppercase", 3, 1);
  const auto r = m.forward(l.token_ids);
  CHECK(r.rows == l.size());
  CHECK(r.vocab == tokenizer::kVocabSize);
  CHECK(r.logits.size() == static_cast<std::size_t>(l.size() * tokenizer::kVocabSize));
  for (float v : r.logits) REQUIRE(std::isfinite(v));
  std::vector<TokenId> too_long(257, 5);
  CHECK(error_of([&] { m.forward(too_long); }) == ErrorCode::SequenceTooLong);
}

TEST_CASE("empty plan equals no plan") {
  const Model m(testing::small_config());
  const auto l = sample_prompt("antonym", 5, 2);
  const InterventionPlan empty;
  CHECK(m.forward(l.token_ids).logits == m.forward(l.token_ids, &empty).logits);
  CHECK(generate_greedy(m, l) == generate_greedy(m, l, &empty));
}

TEST_CASE("self replacement is bit-identical at every site and scope") {
  const Model m(testing::small_config());
  Rng rng(5);
  for (SiteKind site : {SiteKind::PreAttention, SiteKind::PostAttention, SiteKind::PostBlock}) {
    const auto l = sample_prompt("repeat_word", 4, rng.next());
    const auto cap = capture_all(m, site);
    const auto clean = m.forward(l.token_ids, nullptr, &cap);
    for (Scope s : {Scope::AllDemo, Scope::OutputOnly, Scope::LastDemoToken, Scope::FirstQueryToken}) {
      const int layer = static_cast<int>(rng.below(3));
      InterventionPlan plan;
      plan.edits.push_back(self_replace(clean, layer, site, resolve_position_set(l, s)));
      for (Persistence p : {Persistence::InitialPassOnly, Persistence::PersistentDecode,
                            Persistence::PersistentLayers}) {
        plan.edits[0].site.persistence = p;
        if (p == Persistence::PersistentLayers) continue;  // re-applies one layer's value at deeper layers
        REQUIRE(m.forward(l.token_ids, &plan).logits == clean.logits);
        REQUIRE(generate_greedy(m, l, &plan) == generate_greedy(m, l));
      }
    }
  }
}

TEST_CASE("zero-strength noise is the identity") {
  const Model m(testing::small_config());
  const auto l = sample_prompt("length", 5, 3);
  InterventionPlan plan;
  Edit e;
  e.layer = 1;
  e.action = ActionKind::AddNoise;
  e.positions = {l.first_query_token};
  e.scale = 0.0f;
  e.sigma = 2.0f;
  e.seed = 9;
  plan.edits.push_back(e);
  CHECK(m.forward(l.token_ids, &plan).logits == m.forward(l.token_ids).logits);
  plan.edits[0].scale = 1.0f;
  CHECK(m.forward(l.token_ids, &plan).logits != m.forward(l.token_ids).logits);
}

TEST_CASE("edits only affect layers at or after their own") {
  const Model m(testing::small_config());
  const auto l = sample_prompt("sentiment", 5, 4);
  const auto cap = capture_all(m, SiteKind::PostBlock);
  const auto clean = m.forward(l.token_ids, nullptr, &cap);
  for (int layer = 0; layer < 3; ++layer) {
    for (ActionKind a : {ActionKind::Zero, ActionKind::RandomGaussian, ActionKind::LayerZero}) {
      InterventionPlan plan;
      Edit e;
      e.layer = layer;
      e.action = a;
      e.scale = 1.0f;
      e.seed = 1;
      if (a != ActionKind::LayerZero) e.positions = resolve_position_set(l, Scope::AllDemo);
      plan.edits.push_back(e);
      const auto hit = m.forward(l.token_ids, &plan, &cap);
      for (int below = 0; below < layer; ++below) {
        REQUIRE(hit.cache.values.at(below) == clean.cache.values.at(below));
      }
      REQUIRE(hit.cache.values.at(layer) != clean.cache.values.at(layer));
      if (a == ActionKind::Zero) {
        for (const auto& [p, v] : hit.cache.values.at(layer)) {
          const auto role = l.roles[static_cast<std::size_t>(p)];
          if (role == TokenRole::DemoInput || role == TokenRole::DemoOutput) {
            for (float x : v) REQUIRE(x == 0.0f);
          }
        }
      }
      // A zeroed layer contributes nothing, so its output is its input.
      if (a == ActionKind::LayerZero && layer > 0) {
        REQUIRE(hit.cache.values.at(layer) == clean.cache.values.at(layer - 1));
      }
    }
  }
}

TEST_CASE("zero ablation equals replacing with zero vectors") {
  const Model m(testing::tiny_config());
  const auto l = sample_prompt("first_letter", 3, 8);
  InterventionPlan z, r;
  Edit e;
  e.layer = 1;
  e.positions = {l.last_demo_token, l.separator};
  e.action = ActionKind::Zero;
  z.edits.push_back(e);
  e.action = ActionKind::Replace;
  e.vectors.assign(2, std::vector<float>(16, 0.0f));
  r.edits.push_back(e);
  CHECK(m.forward(l.token_ids, &z).logits == m.forward(l.token_ids, &r).logits);
}

TEST_CASE("causal masking") {
  const Model m(testing::small_config());
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    auto l = sample_prompt("uppercase", 3, rng.next());
    auto ids = l.token_ids;
    const auto base = m.forward(ids);
    const int t = static_cast<int>(rng.below(ids.size() - 1));
    for (std::size_t i = static_cast<std::size_t>(t) + 1; i < ids.size(); ++i) {
      ids[i] = static_cast<TokenId>(rng.below(tokenizer::kVocabSize));
    }
    const auto changed = m.forward(ids);
    for (int r = 0; r <= t; ++r) {
      const auto a = base.row(r), b = changed.row(r);
      REQUIRE(std::equal(a.begin(), a.end(), b.begin()));
    }
  }
}

TEST_CASE("attention rows are normalized") {
  const Model m(testing::small_config());
  const auto l = sample_prompt("antonym", 5, 6);
  const int n = l.size();
  for (int layer = 0; layer < 3; ++layer) {
    const auto r = m.forward(l.token_ids, nullptr, nullptr, layer);
    REQUIRE(r.attention.size() == static_cast<std::size_t>(4 * n * n));
    for (int h = 0; h < 4; ++h) {
      for (int q = 0; q < n; ++q) {
        double s = 0;
        for (int k = 0; k < n; ++k) {
          const float w = r.attention[static_cast<std::size_t>((h * n + q) * n + k)];
          REQUIRE(w >= 0.0f);
          if (k > q) REQUIRE(w == 0.0f);
          s += w;
        }
        REQUIRE(std::abs(s - 1.0) < 1e-6);
      }
    }
  }
}

TEST_CASE("attention summary categories") {
  const Model m(testing::small_config());
  for (int k : {1, 5}) {
    const auto l = sample_prompt("repeat_word", k, 12);
    for (int layer = 0; layer < 3; ++layer) {
      const auto s = attention_summary(m, l, layer);
      for (double v : {s.demo_inputs, s.demo_outputs, s.separators, s.query_self, s.markers}) CHECK(v >= 0.0);
      CHECK(s.demo_inputs > 0.0);
      CHECK(s.demo_outputs > 0.0);
      CHECK(s.demo_inputs + s.demo_outputs + s.separators + s.query_self + s.markers ==
            Catch::Approx(1.0).margin(1e-6));

      // Recompute the head average from the raw matrix.
      const auto r = m.forward(l.token_ids, nullptr, nullptr, layer);
      const int n = l.size(), q = l.first_query_token;
      double inputs = 0;
      for (int h = 0; h < 4; ++h) {
        for (int p = 0; p <= q; ++p) {
          if (l.roles[static_cast<std::size_t>(p)] == TokenRole::DemoInput)
            inputs += r.attention[static_cast<std::size_t>((h * n + q) * n + p)];
        }
      }
      CHECK(s.demo_inputs == Catch::Approx(inputs / 4).margin(1e-6));
    }
  }
  CHECK(error_of([&] { attention_summary(m, sample_prompt("uppercase", 2, 1), 3); }) ==
        ErrorCode::PlanOutOfRange);
}

TEST_CASE("greedy decoding is deterministic across runs and threads") {
  const Model m(testing::small_config());
  const auto l = sample_prompt("uppercase", 5, 13);
  const auto a = generate_greedy(m, l, nullptr, 8);
  std::string b, c;
  std::thread t1([&] { b = generate_greedy(m, l, nullptr, 8); });
  std::thread t2([&] { c = generate_greedy(m, l, nullptr, 8); });
  t1.join();
  t2.join();
  CHECK(a == b);
  CHECK(a == c);
  const auto g = m.generate(l.token_ids, nullptr, 8);
  CHECK(g.tokens.size() <= 8);
  CHECK(g.text.find('\n') == std::string::npos);
}

TEST_CASE("greedy decoding picks the lowest id on ties") {
  // Zero weights give uniform logits, so every step emits token 0 ("In:").
  const auto c = testing::tiny_config();
  const Model m(c, std::vector<float>(ParamLayout::from(c).total, 0.0f));
  const auto l = sample_prompt("uppercase", 1, 1);
  const auto g = m.generate(l.token_ids, nullptr, 3);
  CHECK(g.tokens == std::vector<TokenId>{0, 0, 0});
}

TEST_CASE("decode-step persistence differs from prompt-only edits") {
  const Model m(testing::small_config());
  const auto l = sample_prompt("repeat_word", 3, 14);
  InterventionPlan plan;
  Edit e;
  e.layer = 0;
  e.action = ActionKind::RandomGaussian;
  e.scale = 5.0f;
  e.seed = 3;
  e.positions = resolve_position_set(l, Scope::AllDemo);
  plan.edits.push_back(e);
  // The prompt pass is identical in both modes; only decoding can differ.
  plan.edits[0].site.persistence = Persistence::InitialPassOnly;
  const auto a = m.forward(l.token_ids, &plan).logits;
  plan.edits[0].site.persistence = Persistence::PersistentDecode;
  const auto b = m.forward(l.token_ids, &plan).logits;
  CHECK(a == b);
  CHECK(plan.has_persistence(Persistence::PersistentDecode));
  // Persistent edits reproduce the same noise on every re-application.
  CHECK(generate_greedy(m, l, &plan, 6) == generate_greedy(m, l, &plan, 6));
}

TEST_CASE("plan validation") {
  const auto c = testing::tiny_config();
  auto plan_with = [](Edit e) {
    InterventionPlan p;
    p.edits.push_back(std::move(e));
    return p;
  };
  Edit e;
  e.layer = 2;
  e.positions = {0};
  CHECK(error_of([&] { validate_plan(plan_with(e), c, 10); }) == ErrorCode::PlanOutOfRange);
  e.layer = 0;
  e.positions = {10};
  CHECK(error_of([&] { validate_plan(plan_with(e), c, 10); }) == ErrorCode::PlanOutOfRange);
  e.positions = {-1};
  CHECK(error_of([&] { validate_plan(plan_with(e), c, 10); }) == ErrorCode::PlanOutOfRange);
  e.positions = {1, 2};
  e.action = ActionKind::Replace;
  e.vectors = {std::vector<float>(16, 0.0f)};
  CHECK(error_of([&] { validate_plan(plan_with(e), c, 10); }) == ErrorCode::InvalidPlan);
  e.vectors = {std::vector<float>(16, 0.0f), std::vector<float>(15, 0.0f)};
  CHECK(error_of([&] { validate_plan(plan_with(e), c, 10); }) == ErrorCode::InvalidPlan);
  e.vectors = {std::vector<float>(16, 0.0f), std::vector<float>(16, 0.0f)};
  CHECK_NOTHROW(validate_plan(plan_with(e), c, 10));
  auto dup = plan_with(e);
  Edit z;
  z.layer = 0;
  z.positions = {2};
  dup.edits.push_back(z);
  CHECK(error_of([&] { validate_plan(dup, c, 10); }) == ErrorCode::InvalidPlan);
  z.site.kind = SiteKind::PreAttention;
  dup.edits.back() = z;
  CHECK_NOTHROW(validate_plan(dup, c, 10));
  const Model m(c);
  std::vector<TokenId> ids(10, 5);
  e.positions = {10};
  e.vectors = {std::vector<float>(16, 0.0f)};
  auto bad = plan_with(e);
  CHECK(error_of([&] { m.forward(ids, &bad); }) == ErrorCode::PlanOutOfRange);
}

TEST_CASE("site and persistence names") {
  for (const char* s : {"pre_attention", "post_attention", "post_block"}) CHECK(to_string(parse_site(s)) == s);
  for (const char* s : {"initial_pass_only", "persistent", "persistent_layers"})
    CHECK(to_string(parse_persistence(s)) == s);
  CHECK(error_of([] { parse_site("mid"); }) == ErrorCode::BadConfig);
  CHECK(HookSite{} == HookSite{SiteKind::PostBlock, Persistence::InitialPassOnly});
}

TEST_CASE("weight files") {
  const auto dir = testing::scratch_dir("weights");
  const Model m(testing::small_config(21));
  const auto path = dir / "m.bin";
  save_weights(m, path);
  const auto back = load_weights(path);
  CHECK(back.config() == m.config());
  CHECK(std::equal(m.params().begin(), m.params().end(), back.params().begin()));
  const auto l = sample_prompt("antonym", 5, 1);
  CHECK(back.forward(l.token_ids).logits == m.forward(l.token_ids).logits);
  CHECK_NOTHROW(load_weights(path, m.config()));

  auto other = m.config();
  other.d_model = 64;
  CHECK(error_of([&] { load_weights(path, other); }) == ErrorCode::ConfigMismatch);

  const auto size = std::filesystem::file_size(path);
  std::filesystem::copy_file(path, dir / "t.bin");
  std::filesystem::resize_file(dir / "t.bin", size - 7);
  CHECK(error_of([&] { load_weights(dir / "t.bin"); }) == ErrorCode::CorruptFile);

  std::filesystem::copy_file(path, dir / "f.bin");
  {
    std::fstream f(dir / "f.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(size - 3));
    f.put('\x55');
  }
  CHECK(error_of([&] { load_weights(dir / "f.bin"); }) == ErrorCode::CorruptFile);
  {
    std::ofstream f(dir / "junk.bin", std::ios::binary);
    f << "not a weight file";
  }
  CHECK(error_of([&] { load_weights(dir / "junk.bin"); }) == ErrorCode::CorruptFile);
  CHECK(error_of([&] { load_weights(dir / "missing.bin"); }).has_value());
}
