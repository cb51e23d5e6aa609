#include "icl/model.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <tuple>

#include "icl/detail/kernels.hpp"
#include "icl/error.hpp"
#include "icl/rng.hpp"

namespace icl {

using detail::ConstMatMap;
using detail::ConstVecMap;
using detail::Mat;

void ModelConfig::validate() const {
  if (n_layers <= 0 || d_model <= 0 || n_heads <= 0 || d_ff <= 0 || vocab_size <= 0 ||
      max_seq <= 0) {
    throw Error(ErrorCode::BadConfig, "model dimensions must be positive");
  }
  if (d_model % n_heads != 0) throw Error(ErrorCode::BadConfig, "d_model must divide by n_heads");
  if (vocab_size != tokenizer::kVocabSize) {
    throw Error(ErrorCode::BadConfig, "vocab_size must equal the tokenizer vocabulary");
  }
}

ParamLayout ParamLayout::from(const ModelConfig& c) {
  ParamLayout p;
  const auto d = static_cast<std::size_t>(c.d_model);
  const auto f = static_cast<std::size_t>(c.d_ff);
  const auto v = static_cast<std::size_t>(c.vocab_size);
  const auto s = static_cast<std::size_t>(c.max_seq);
  std::size_t at = 0;
  auto take = [&](std::string name, std::size_t rows, std::size_t cols) {
    const std::size_t off = at;
    p.tensors.push_back({std::move(name), off, rows, cols});
    at += rows * cols;
    return off;
  };
  p.tok_emb = take("tok_emb", v, d);
  p.pos_emb = take("pos_emb", s, d);
  for (int l = 0; l < c.n_layers; ++l) {
    const std::string pre = "h" + std::to_string(l) + ".";
    Layer L{};
    L.ln1_g = take(pre + "ln1_g", 1, d);
    L.ln1_b = take(pre + "ln1_b", 1, d);
    L.w_qkv = take(pre + "w_qkv", d, 3 * d);
    L.b_qkv = take(pre + "b_qkv", 1, 3 * d);
    L.w_o = take(pre + "w_o", d, d);
    L.b_o = take(pre + "b_o", 1, d);
    L.ln2_g = take(pre + "ln2_g", 1, d);
    L.ln2_b = take(pre + "ln2_b", 1, d);
    L.w_fc = take(pre + "w_fc", d, f);
    L.b_fc = take(pre + "b_fc", 1, f);
    L.w_proj = take(pre + "w_proj", f, d);
    L.b_proj = take(pre + "b_proj", 1, d);
    p.layers.push_back(L);
  }
  p.lnf_g = take("lnf_g", 1, d);
  p.lnf_b = take("lnf_b", 1, d);
  p.w_head = take("w_head", d, v);
  p.b_head = take("b_head", 1, v);
  p.total = at;
  return p;
}

std::string_view to_string(SiteKind kind) {
  switch (kind) {
    case SiteKind::PreAttention: return "pre_attention";
    case SiteKind::PostAttention: return "post_attention";
    case SiteKind::PostBlock: return "post_block";
  }
  return "?";
}

std::string_view to_string(Persistence p) {
  switch (p) {
    case Persistence::InitialPassOnly: return "initial_pass_only";
    case Persistence::PersistentDecode: return "persistent";
    case Persistence::PersistentLayers: return "persistent_layers";
  }
  return "?";
}

SiteKind parse_site(std::string_view name) {
  if (name == "pre_attention") return SiteKind::PreAttention;
  if (name == "post_attention") return SiteKind::PostAttention;
  if (name == "post_block") return SiteKind::PostBlock;
  throw Error(ErrorCode::BadConfig, "unknown hook site " + std::string(name));
}

Persistence parse_persistence(std::string_view name) {
  if (name == "initial_pass_only") return Persistence::InitialPassOnly;
  if (name == "persistent") return Persistence::PersistentDecode;
  if (name == "persistent_layers") return Persistence::PersistentLayers;
  throw Error(ErrorCode::BadConfig, "unknown persistence " + std::string(name));
}

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::Replace: return "replace";
    case ActionKind::Zero: return "zero";
    case ActionKind::RandomGaussian: return "random_gaussian";
    case ActionKind::AddNoise: return "add_noise";
    case ActionKind::LayerZero: return "layer_zero";
  }
  return "?";
}

bool InterventionPlan::has_persistence(Persistence p) const {
  for (const auto& e : edits) {
    if (e.site.persistence == p) return true;
  }
  return false;
}

const std::vector<float>& ActivationCache::at(int layer, int position) const {
  const auto l = values.find(layer);
  if (l != values.end()) {
    const auto p = l->second.find(position);
    if (p != l->second.end()) return p->second;
  }
  throw Error(ErrorCode::PlanOutOfRange, "no cached activation at layer " + std::to_string(layer) +
                                             ", position " + std::to_string(position));
}

void validate_plan(const InterventionPlan& plan, const ModelConfig& config, int seq_len) {
  std::set<std::tuple<int, int, int>> seen;
  for (const auto& e : plan.edits) {
    if (e.layer < 0 || e.layer >= config.n_layers) {
      throw Error(ErrorCode::PlanOutOfRange, "edit layer " + std::to_string(e.layer));
    }
    if (e.action == ActionKind::LayerZero) {
      if (!seen.emplace(e.layer, -1, -1).second) {
        throw Error(ErrorCode::InvalidPlan, "duplicate layer ablation");
      }
      continue;
    }
    if (e.action == ActionKind::Replace) {
      if (e.vectors.size() != e.positions.size()) {
        throw Error(ErrorCode::InvalidPlan, "replace needs one vector per position");
      }
      for (const auto& v : e.vectors) {
        if (static_cast<int>(v.size()) != config.d_model) {
          throw Error(ErrorCode::InvalidPlan, "replacement vector length != d_model");
        }
      }
    }
    for (int p : e.positions) {
      if (p < 0 || p >= seq_len) {
        throw Error(ErrorCode::PlanOutOfRange, "edit position " + std::to_string(p) +
                                                   " outside sequence of length " +
                                                   std::to_string(seq_len));
      }
      if (!seen.emplace(e.layer, static_cast<int>(e.site.kind), p).second) {
        throw Error(ErrorCode::InvalidPlan, "more than one edit at layer " +
                                                std::to_string(e.layer) + ", position " +
                                                std::to_string(p));
      }
    }
  }
}

namespace {

// Edits grouped by (layer, site) for fast application.
class EditIndex {
 public:
  struct Ref {
    const Edit* edit;
    std::size_t slot;  // index into edit->positions / vectors
  };

  EditIndex(const InterventionPlan* plan, int n_layers)
      : by_site_(static_cast<std::size_t>(n_layers) * 3),
        layer_zero_(static_cast<std::size_t>(n_layers), false) {
    if (!plan) return;
    for (const auto& e : plan->edits) {
      if (e.action == ActionKind::LayerZero) {
        layer_zero_[static_cast<std::size_t>(e.layer)] = true;
        continue;
      }
      const int last = e.site.persistence == Persistence::PersistentLayers ? n_layers - 1 : e.layer;
      for (int l = e.layer; l <= last; ++l) {
        auto& refs = by_site_[index(l, e.site.kind)];
        for (std::size_t i = 0; i < e.positions.size(); ++i) refs.push_back({&e, i});
      }
    }
  }

  const std::vector<Ref>& at(int layer, SiteKind site) const { return by_site_[index(layer, site)]; }
  bool layer_zero(int layer) const { return layer_zero_[static_cast<std::size_t>(layer)]; }

 private:
  static std::size_t index(int layer, SiteKind site) {
    return static_cast<std::size_t>(layer) * 3 + static_cast<std::size_t>(site);
  }
  std::vector<std::vector<Ref>> by_site_;
  std::vector<bool> layer_zero_;
};

void gaussian(std::uint64_t seed, int layer, int position, std::span<float> out) {
  Rng rng(splitmix64(seed ^ (static_cast<std::uint64_t>(layer) << 32) ^
                     static_cast<std::uint64_t>(position)));
  for (float& x : out) x = static_cast<float>(rng.normal());
}

// One decoding state: a key/value cache over the positions processed so far.
class Engine {
 public:
  Engine(const Model& model, int capacity)
      : m_(model), c_(model.config()), lay_(model.layout()), capacity_(capacity) {
    const int d = c_.d_model;
    k_.assign(static_cast<std::size_t>(c_.n_layers), Mat<float>::Zero(capacity, d));
    v_.assign(static_cast<std::size_t>(c_.n_layers), Mat<float>::Zero(capacity, d));
  }

  int length() const { return length_; }

  // Processes ids at positions [length(), length() + ids.size()) and
  // returns their logits.
  Mat<float> run(std::span<const TokenId> ids, const EditIndex& edits,
                 const CaptureRequest* capture, ActivationCache* cache,
                 std::optional<int> attention_layer, std::vector<float>* attention) {
    const int n = static_cast<int>(ids.size());
    const int start = length_;
    if (start + n > capacity_) {
      throw Error(ErrorCode::SequenceTooLong, "sequence of length " + std::to_string(start + n) +
                                                  " exceeds capacity " +
                                                  std::to_string(capacity_));
    }
    const int d = c_.d_model;
    const int hd = c_.head_dim();
    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
    const float* P = m_.params().data();
    auto mat = [&](std::size_t off, int rows, int cols) { return ConstMatMap<float>(P + off, rows, cols); };
    auto vec = [&](std::size_t off, int cols) { return ConstVecMap<float>(P + off, cols); };

    Mat<float> x(n, d);
    const auto tok = mat(lay_.tok_emb, c_.vocab_size, d);
    const auto pos = mat(lay_.pos_emb, c_.max_seq, d);
    for (int i = 0; i < n; ++i) {
      const TokenId id = ids[static_cast<std::size_t>(i)];
      if (id < 0 || id >= c_.vocab_size) throw Error(ErrorCode::UnknownSymbol, "token id out of range");
      x.row(i) = tok.row(id) + pos.row(start + i);
    }

    auto hook = [&](int layer, SiteKind site) {
      for (const auto& ref : edits.at(layer, site)) {
        const Edit& e = *ref.edit;
        const int p = e.positions[ref.slot];
        if (p < start || p >= start + n) continue;
        auto row = x.row(p - start);
        switch (e.action) {
          case ActionKind::Replace:
            row = ConstVecMap<float>(e.vectors[ref.slot].data(), d);
            break;
          case ActionKind::Zero:
            row.setZero();
            break;
          case ActionKind::RandomGaussian: {
            std::vector<float> z(static_cast<std::size_t>(d));
            gaussian(e.seed, e.layer, p, z);
            row = ConstVecMap<float>(z.data(), d) * e.scale;
            break;
          }
          case ActionKind::AddNoise: {
            std::vector<float> z(static_cast<std::size_t>(d));
            gaussian(e.seed, e.layer, p, z);
            row += ConstVecMap<float>(z.data(), d) * (e.scale * e.sigma);
            break;
          }
          case ActionKind::LayerZero:
            break;
        }
      }
      if (capture && cache && capture->site == site) {
        bool wanted = false;
        for (int l : capture->layers) wanted = wanted || l == layer;
        if (!wanted) return;
        auto& dst = cache->values[layer];
        for (int i = 0; i < n; ++i) {
          const int p = start + i;
          bool keep = capture->positions.empty();
          for (int q : capture->positions) keep = keep || q == p;
          if (keep) dst[p] = std::vector<float>(x.row(i).data(), x.row(i).data() + d);
        }
      }
    };

    Mat<float> a(n, d), qkv(n, 3 * d), o(n, d), h(n, c_.d_ff), branch(n, d);
    for (int l = 0; l < c_.n_layers; ++l) {
      const auto& L = lay_.layers[static_cast<std::size_t>(l)];
      const bool skip = edits.layer_zero(l);
      hook(l, SiteKind::PreAttention);

      detail::layernorm_forward<float>(x, vec(L.ln1_g, d), vec(L.ln1_b, d), a);
      qkv.noalias() = a * mat(L.w_qkv, d, 3 * d);
      qkv.rowwise() += vec(L.b_qkv, 3 * d);
      auto& K = k_[static_cast<std::size_t>(l)];
      auto& V = v_[static_cast<std::size_t>(l)];
      K.middleRows(start, n) = qkv.middleCols(d, d);
      V.middleRows(start, n) = qkv.middleCols(2 * d, d);
      const bool want_attn = attention && attention_layer && *attention_layer == l;
      if (want_attn) {
        attention->assign(static_cast<std::size_t>(c_.n_heads) * static_cast<std::size_t>(n) *
                              static_cast<std::size_t>(start + n),
                          0.0f);
      }
      for (int hh = 0; hh < c_.n_heads; ++hh) {
        Mat<float> probs;
        detail::causal_attention_head<float>(qkv.middleCols(hh * hd, hd), K.middleCols(hh * hd, hd),
                                             V.middleCols(hh * hd, hd), start, scale,
                                             o.middleCols(hh * hd, hd), want_attn ? &probs : nullptr);
        if (want_attn) {
          std::memcpy(attention->data() + static_cast<std::size_t>(hh) * probs.size(), probs.data(),
                      sizeof(float) * static_cast<std::size_t>(probs.size()));
        }
      }
      if (!skip) {
        branch.noalias() = o * mat(L.w_o, d, d);
        branch.rowwise() += vec(L.b_o, d);
        x += branch;
      }
      hook(l, SiteKind::PostAttention);

      if (!skip) {
        detail::layernorm_forward<float>(x, vec(L.ln2_g, d), vec(L.ln2_b, d), a);
        h.noalias() = a * mat(L.w_fc, d, c_.d_ff);
        h.rowwise() += vec(L.b_fc, c_.d_ff);
        h = detail::gelu<float>(h);
        branch.noalias() = h * mat(L.w_proj, c_.d_ff, d);
        branch.rowwise() += vec(L.b_proj, d);
        x += branch;
      }
      hook(l, SiteKind::PostBlock);
    }

    detail::layernorm_forward<float>(x, vec(lay_.lnf_g, d), vec(lay_.lnf_b, d), a);
    Mat<float> logits = a * mat(lay_.w_head, d, c_.vocab_size);
    logits.rowwise() += vec(lay_.b_head, c_.vocab_size);
    length_ += n;
    return logits;
  }

 private:
  const Model& m_;
  const ModelConfig& c_;
  const ParamLayout& lay_;
  int capacity_;
  int length_ = 0;
  std::vector<Mat<float>> k_, v_;
};

TokenId argmax_lowest(const float* row, int n) {
  int best = 0;
  for (int i = 1; i < n; ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

}  // namespace

Model::Model(const ModelConfig& config) : config_(config), layout_(ParamLayout::from(config)) {
  config_.validate();
  params_.assign(layout_.total, 0.0f);
  Rng rng(config.seed);
  const float std = 0.02f;
  const float proj_std = std / std::sqrt(2.0f * static_cast<float>(config.n_layers));
  auto fill = [&](std::size_t off, std::size_t count, float s) {
    for (std::size_t i = 0; i < count; ++i) params_[off + i] = static_cast<float>(rng.normal()) * s;
  };
  auto ones = [&](std::size_t off, std::size_t count) {
    std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(off), count, 1.0f);
  };
  const auto d = static_cast<std::size_t>(config.d_model);
  const auto f = static_cast<std::size_t>(config.d_ff);
  const auto v = static_cast<std::size_t>(config.vocab_size);
  fill(layout_.tok_emb, v * d, std);
  fill(layout_.pos_emb, static_cast<std::size_t>(config.max_seq) * d, std);
  for (const auto& L : layout_.layers) {
    ones(L.ln1_g, d);
    ones(L.ln2_g, d);
    fill(L.w_qkv, d * 3 * d, std);
    fill(L.w_o, d * d, proj_std);
    fill(L.w_fc, d * f, std);
    fill(L.w_proj, f * d, proj_std);
  }
  ones(layout_.lnf_g, d);
  fill(layout_.w_head, d * v, std);
}

Model::Model(const ModelConfig& config, std::vector<float> params)
    : config_(config), layout_(ParamLayout::from(config)), params_(std::move(params)) {
  config_.validate();
  if (params_.size() != layout_.total) {
    throw Error(ErrorCode::ConfigMismatch, "parameter count does not match config");
  }
}

ForwardResult Model::forward(std::span<const TokenId> ids, const InterventionPlan* plan,
                             const CaptureRequest* capture,
                             std::optional<int> attention_layer) const {
  const int T = static_cast<int>(ids.size());
  if (T > config_.max_seq) {
    throw Error(ErrorCode::SequenceTooLong, std::to_string(T) + " > max_seq " +
                                                std::to_string(config_.max_seq));
  }
  if (plan) validate_plan(*plan, config_, T);
  if (capture) {
    for (int l : capture->layers) {
      if (l < 0 || l >= config_.n_layers) throw Error(ErrorCode::PlanOutOfRange, "capture layer");
    }
  }
  const EditIndex index(plan, config_.n_layers);
  Engine engine(*this, std::max(T, 1));
  ForwardResult out;
  out.cache.d_model = config_.d_model;
  if (capture) out.cache.site = capture->site;
  const Mat<float> logits = engine.run(ids, index, capture, capture ? &out.cache : nullptr,
                                       attention_layer, attention_layer ? &out.attention : nullptr);
  out.rows = T;
  out.vocab = config_.vocab_size;
  out.logits.assign(logits.data(), logits.data() + logits.size());
  return out;
}

Model::Generation Model::generate(std::span<const TokenId> prompt, const InterventionPlan* plan,
                                  int max_new) const {
  const int P = static_cast<int>(prompt.size());
  if (P > config_.max_seq) {
    throw Error(ErrorCode::SequenceTooLong, std::to_string(P) + " > max_seq " +
                                                std::to_string(config_.max_seq));
  }
  if (P == 0) throw Error(ErrorCode::PlanOutOfRange, "empty prompt");
  if (plan) validate_plan(*plan, config_, P);
  const EditIndex index(plan, config_.n_layers);
  const bool recompute = plan && plan->has_persistence(Persistence::PersistentDecode);
  const int capacity = std::min(config_.max_seq, P + std::max(max_new, 0));

  std::vector<TokenId> seq(prompt.begin(), prompt.end());
  Engine engine(*this, capacity);
  Mat<float> logits = engine.run(seq, index, nullptr, nullptr, std::nullopt, nullptr);
  Generation gen;
  for (int step = 0; step < max_new; ++step) {
    const TokenId next = argmax_lowest(logits.row(logits.rows() - 1).data(), config_.vocab_size);
    gen.tokens.push_back(next);
    seq.push_back(next);
    if (next == tokenizer::kNewline) break;
    if (static_cast<int>(seq.size()) >= capacity) break;
    if (recompute) {
      Engine fresh(*this, capacity);
      logits = fresh.run(seq, index, nullptr, nullptr, std::nullopt, nullptr);
    } else {
      const TokenId one[1] = {next};
      logits = engine.run(one, index, nullptr, nullptr, std::nullopt, nullptr);
    }
  }
  std::vector<TokenId> body = gen.tokens;
  if (!body.empty() && body.back() == tokenizer::kNewline) body.pop_back();
  gen.text = tokenizer::detokenize(body);
  if (!gen.text.empty() && gen.text.front() == ' ') gen.text.erase(0, 1);
  return gen;
}

std::string generate_greedy(const Model& model, const PromptLayout& layout,
                            const InterventionPlan* plan, int max_new) {
  return model.generate(layout.token_ids, plan, max_new).text;
}

AttentionSummary attention_summary(const Model& model, const PromptLayout& layout, int layer) {
  const auto& c = model.config();
  if (layer < 0 || layer >= c.n_layers) throw Error(ErrorCode::PlanOutOfRange, "attention layer");
  const auto res = model.forward(layout.token_ids, nullptr, nullptr, layer);
  const int T = layout.size();
  const int q = layout.first_query_token;
  AttentionSummary s;
  for (int h = 0; h < c.n_heads; ++h) {
    const float* row = res.attention.data() + (static_cast<std::size_t>(h) * T + q) * T;
    for (int j = 0; j <= q; ++j) {
      const double w = row[j] / static_cast<double>(c.n_heads);
      switch (layout.roles[static_cast<std::size_t>(j)]) {
        case TokenRole::DemoInput: s.demo_inputs += w; break;
        case TokenRole::DemoOutput: s.demo_outputs += w; break;
        case TokenRole::Separator: s.separators += w; break;
        case TokenRole::Query: s.query_self += w; break;
        case TokenRole::Marker: s.markers += w; break;
      }
    }
  }
  return s;
}

namespace {

constexpr std::array<char, 4> kMagic = {'I', 'C', 'L', 'W'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(const std::string& in, std::size_t& at) {
  if (at + sizeof(U) > in.size()) throw Error(ErrorCode::CorruptFile, "truncated header");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    v |= static_cast<U>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  at += sizeof(U);
  return v;
}

}  // namespace

void save_weights(const Model& model, const std::filesystem::path& path) {
  const auto& c = model.config();
  std::string payload;
  payload.reserve(model.params().size() * 4);
  for (float f : model.params()) put_le(payload, std::bit_cast<std::uint32_t>(f));
  std::string out(kMagic.begin(), kMagic.end());
  put_le(out, kFormatVersion);
  for (int v : {c.n_layers, c.d_model, c.n_heads, c.d_ff, c.vocab_size, c.max_seq}) {
    put_le(out, static_cast<std::uint32_t>(v));
  }
  put_le(out, c.seed);
  put_le(out, static_cast<std::uint64_t>(model.params().size()));
  put_le(out, fnv1a64(payload));
  out += payload;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::CorruptFile, "cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(ErrorCode::CorruptFile, "write failed for " + path.string());
}

Model load_weights(const std::filesystem::path& path, const std::optional<ModelConfig>& expected) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::MissingWeights, path.string());
  const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (in.size() < 4 || !std::equal(kMagic.begin(), kMagic.end(), in.begin())) {
    throw Error(ErrorCode::CorruptFile, "bad magic in " + path.string());
  }
  std::size_t at = 4;
  if (get_le<std::uint32_t>(in, at) != kFormatVersion) {
    throw Error(ErrorCode::CorruptFile, "unsupported weight format version");
  }
  ModelConfig c;
  c.n_layers = static_cast<int>(get_le<std::uint32_t>(in, at));
  c.d_model = static_cast<int>(get_le<std::uint32_t>(in, at));
  c.n_heads = static_cast<int>(get_le<std::uint32_t>(in, at));
  c.d_ff = static_cast<int>(get_le<std::uint32_t>(in, at));
  c.vocab_size = static_cast<int>(get_le<std::uint32_t>(in, at));
  c.max_seq = static_cast<int>(get_le<std::uint32_t>(in, at));
  c.seed = get_le<std::uint64_t>(in, at);
  const auto count = get_le<std::uint64_t>(in, at);
  const auto checksum = get_le<std::uint64_t>(in, at);
  if (in.size() - at != count * 4) throw Error(ErrorCode::CorruptFile, "payload size mismatch");
  const std::string_view payload(in.data() + at, in.size() - at);
  if (fnv1a64(payload) != checksum) throw Error(ErrorCode::CorruptFile, "checksum mismatch");
  if (expected) {
    ModelConfig e = *expected;
    e.seed = c.seed;  // the init seed does not constrain compatibility
    if (!(e == c)) throw Error(ErrorCode::ConfigMismatch, "weight file config differs from expected");
  }
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::CorruptFile, e.what());
  }
  if (ParamLayout::from(c).total != count) throw Error(ErrorCode::CorruptFile, "parameter count mismatch");
  std::vector<float> params(count);
  std::size_t p = at;
  for (auto& v : params) v = std::bit_cast<float>(get_le<std::uint32_t>(in, p));
  return Model(c, std::move(params));
}

}  // namespace icl
