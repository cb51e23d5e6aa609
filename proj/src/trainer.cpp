#include "icl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <json.hpp>
#include <set>

#include "icl/error.hpp"
#include "icl/prompt.hpp"
#include "icl/rng.hpp"
#include "icl/tasks.hpp"

namespace icl {

std::vector<TaskWeight> default_mixture() {
  std::vector<TaskWeight> out;
  const auto core = core_task_names();
  std::vector<std::string> variants;
  for (const auto& name : all_task_names()) {
    if (!find_task(name).core) variants.push_back(name);
  }
  for (const auto& name : core) out.push_back({name, 0.64 / static_cast<double>(core.size())});
  for (const auto& name : variants) {
    out.push_back({name, 0.36 / static_cast<double>(variants.size())});
  }
  return out;
}

void TrainConfig::validate() const {
  if (steps < 0) throw Error(ErrorCode::BadConfig, "steps must be non-negative");
  if (batch_size <= 0 || learning_rate <= 0 || k_min < 1 || k_max < k_min || eval_n <= 0 ||
      log_every <= 0 || warmup < 0 || eval_every < 0) {
    throw Error(ErrorCode::BadConfig, "training hyperparameters must be positive");
  }
  if (mixture.empty()) throw Error(ErrorCode::BadConfig, "empty task mixture");
  double sum = 0;
  for (const auto& w : mixture) {
    find_task(w.task);
    if (w.weight < 0) throw Error(ErrorCode::BadConfig, "negative mixture weight");
    sum += w.weight;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw Error(ErrorCode::BadConfig, "mixture weights must sum to 1");
}

detail::PackedBatch make_training_sequence(std::string_view task, int k, std::uint64_t seed) {
  const auto demos = generate_instances(task, static_cast<std::size_t>(k + 1), seed);
  detail::PackedBatch b;
  std::vector<bool> scored;
  auto put = [&](std::string_view text, bool target) {
    for (int id : tokenizer::tokenize(text)) {
      b.ids.push_back(id);
      scored.push_back(target);
    }
  };
  for (std::size_t i = 0; i < demos.size(); ++i) {
    const bool t = i > 0;
    put("In: ", false);
    put(demos[i].input, false);
    put(" Out:", false);
    put(" ", t);
    put(demos[i].expected, t);
    put("\n", t);
  }
  // Row r predicts token r + 1.
  b.targets.assign(b.ids.size(), -1);
  for (std::size_t r = 0; r + 1 < b.ids.size(); ++r) {
    if (scored[r + 1]) b.targets[r] = b.ids[r + 1];
  }
  b.seq_starts = {0, static_cast<int>(b.ids.size())};
  return b;
}

void append_sequence(detail::PackedBatch& batch, const detail::PackedBatch& seq) {
  batch.ids.insert(batch.ids.end(), seq.ids.begin(), seq.ids.end());
  batch.targets.insert(batch.targets.end(), seq.targets.begin(), seq.targets.end());
  batch.seq_starts.push_back(static_cast<int>(batch.ids.size()));
}

double learning_rate_at(const TrainConfig& c, int step) {
  if (c.warmup > 0 && step <= c.warmup) {
    return c.learning_rate * static_cast<double>(step) / static_cast<double>(c.warmup);
  }
  const int span = std::max(1, c.steps - c.warmup);
  const double frac = std::clamp(static_cast<double>(step - c.warmup) / span, 0.0, 1.0);
  return c.learning_rate * (1.0 - 0.9 * frac);
}

detail::PackedBatch sample_batch(const TrainConfig& c, int step, int max_seq) {
  Rng rng(derive_seed(c.seed, "batch", static_cast<std::uint64_t>(step)));
  detail::PackedBatch batch;
  for (int i = 0; i < c.batch_size; ++i) {
    double u = rng.uniform();
    std::size_t pick = c.mixture.size() - 1;
    for (std::size_t j = 0; j < c.mixture.size(); ++j) {
      if (u < c.mixture[j].weight) {
        pick = j;
        break;
      }
      u -= c.mixture[j].weight;
    }
    const int k = rng.uniform_int(c.k_min, c.k_max);
    auto seq = make_training_sequence(c.mixture[pick].task, k, rng.next());
    if (static_cast<int>(seq.ids.size()) > max_seq) {
      throw Error(ErrorCode::SequenceTooLong, "training sequence exceeds max_seq");
    }
    append_sequence(batch, seq);
  }
  return batch;
}

double batch_loss(const Model& model, const detail::PackedBatch& batch) {
  detail::Transformer<float> net(model.config(), model.layout());
  return net.loss(model.params().data(), batch, nullptr);
}

double eval_fewshot(const Model& model, std::string_view task, int k, int n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidCounts, "n must be at least 1");
  const auto queries =
      generate_instances(task, static_cast<std::size_t>(n), derive_seed(seed, "queries"));
  std::set<std::string> pool;
  for (const auto& q : queries) pool.insert(q.input);
  int correct = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto layout = build_prompt(task, k, queries[i], derive_seed(seed, "demos", i), pool);
    correct += generate_greedy(model, layout) == queries[i].expected;
  }
  return static_cast<double>(correct) / n;
}

TrainResult meta_train(const TrainConfig& config, const ModelConfig& model_config,
                       std::ostream* log) {
  config.validate();
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - t0).count(); };

  TrainResult result{Model(model_config), {}, 0, false, 0.0};
  Model& model = result.model;
  auto params = model.mutable_params();
  const std::size_t P = params.size();
  std::vector<float> grad(P), v(P, 0.0f);
  detail::Transformer<float> net(model.config(), model.layout());
  const auto core = core_task_names();

  auto emit = [&](const TrainLogEntry& e) {
    result.log.push_back(e);
    if (!log) return;
    nlohmann::json j = {{"step", e.step}, {"loss", e.loss}, {"lr", e.lr}, {"seconds", e.seconds}};
    if (!e.accuracy.empty()) j["accuracy"] = e.accuracy;
    *log << j.dump() << '\n';
    log->flush();
  };

  double running = 0;
  int running_n = 0;
  for (int step = 1; step <= config.steps; ++step) {
    const auto batch = sample_batch(config, step, model_config.max_seq);
    std::fill(grad.begin(), grad.end(), 0.0f);
    const float loss = net.loss(model.params().data(), batch, grad.data());
    if (!std::isfinite(loss)) {
      throw Error(ErrorCode::DivergenceDetected, "non-finite loss at step " + std::to_string(step));
    }
    double norm = 0;
    for (float g : grad) norm += static_cast<double>(g) * g;
    norm = std::sqrt(norm);
    const float clip = norm > config.grad_clip ? static_cast<float>(config.grad_clip / norm) : 1.0f;

    // Momentum-free adaptive step:
    //   v <- b2 v + (1 - b2) g^2;  p <- p - lr g / (sqrt(v / (1 - b2^t)) + eps)
    const double lr = learning_rate_at(config, step);
    const float b2 = static_cast<float>(config.beta2);
    const float correction = static_cast<float>(1.0 / (1.0 - std::pow(config.beta2, step)));
    const float eps = static_cast<float>(config.eps);
    const float flr = static_cast<float>(lr);
    for (std::size_t i = 0; i < P; ++i) {
      const float g = grad[i] * clip;
      v[i] = b2 * v[i] + (1.0f - b2) * g * g;
      params[i] -= flr * g / (std::sqrt(v[i] * correction) + eps);
    }
    result.steps_run = step;
    running += loss;
    ++running_n;

    const bool eval_now = config.eval_every > 0 && step % config.eval_every == 0;
    if (step % config.log_every == 0 || eval_now || step == config.steps) {
      TrainLogEntry e{step, running / running_n, lr, elapsed(), {}};
      running = 0;
      running_n = 0;
      int reached = 0;
      if (eval_now) {
        for (const auto& task : core) {
          const int n = std::min<int>(config.eval_n,
                                      static_cast<int>(find_task(task).domain.size()) - 10);
          const double acc = eval_fewshot(model, task, 5, n, derive_seed(config.seed, "eval"));
          e.accuracy[task] = acc;
          reached += acc >= config.target_accuracy;
        }
      }
      emit(e);
      if (eval_now && reached >= config.target_tasks) {
        result.early_stopped = true;
        break;
      }
    }
    if (config.max_seconds > 0 && elapsed() > config.max_seconds) break;
  }
  result.seconds = elapsed();
  return result;
}

std::vector<double> gradient(const Model& model, const detail::PackedBatch& batch, double* loss) {
  const auto pf = model.params();
  std::vector<double> p(pf.begin(), pf.end());
  std::vector<double> g(p.size(), 0.0);
  detail::Transformer<double> net(model.config(), model.layout());
  const double l = net.loss(p.data(), batch, g.data());
  if (loss) *loss = l;
  return g;
}

GradCheckResult grad_check(const Model& model, const detail::PackedBatch& batch, double epsilon,
                           int samples, std::uint64_t seed) {
  GradCheckResult out;
  const auto analytic = gradient(model, batch, &out.loss);
  const auto pf = model.params();
  std::vector<double> p(pf.begin(), pf.end());
  detail::Transformer<double> net(model.config(), model.layout());

  // Spread samples over every tensor so each backward path is exercised.
  const auto& tensors = model.layout().tensors;
  Rng rng(seed);
  std::vector<std::size_t> idx;
  for (int s = 0; s < samples; ++s) {
    const auto& t = tensors[static_cast<std::size_t>(s) % tensors.size()];
    std::size_t i = t.offset + static_cast<std::size_t>(rng.below(t.rows * t.cols));
    if (t.name == "pos_emb") i = t.offset + static_cast<std::size_t>(rng.below(2 * t.cols));
    idx.push_back(i);
  }
  for (std::size_t i : idx) {
    const double orig = p[i];
    p[i] = orig + epsilon;
    const double up = net.loss(p.data(), batch, nullptr);
    p[i] = orig - epsilon;
    const double down = net.loss(p.data(), batch, nullptr);
    p[i] = orig;
    const double numeric = (up - down) / (2 * epsilon);
    const double a = analytic[i];
    const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-6);
    out.max_rel_error = std::max(out.max_rel_error, rel);
    ++out.checked;
  }
  return out;
}

}  // namespace icl
