#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "icl/prompt.hpp"
#include "icl/tokenizer.hpp"

namespace icl {

struct ModelConfig {
  int n_layers = 8;
  int d_model = 128;
  int n_heads = 4;
  int d_ff = 512;
  int vocab_size = tokenizer::kVocabSize;
  int max_seq = 512;
  std::uint64_t seed = 42;

  void validate() const;  // throws BadConfig
  int head_dim() const { return d_model / n_heads; }
  bool operator==(const ModelConfig&) const = default;
};

// Offsets of every tensor inside the flat parameter vector. Tensor order:
//   tok_emb[V,d] pos_emb[S,d]
//   per layer: ln1_g[d] ln1_b[d] w_qkv[d,3d] b_qkv[3d] w_o[d,d] b_o[d]
//              ln2_g[d] ln2_b[d] w_fc[d,f] b_fc[f] w_proj[f,d] b_proj[d]
//   lnf_g[d] lnf_b[d] w_head[d,V] b_head[V]
// All matrices are row-major with the input dimension first.
struct ParamLayout {
  struct Layer {
    std::size_t ln1_g, ln1_b, w_qkv, b_qkv, w_o, b_o, ln2_g, ln2_b, w_fc, b_fc, w_proj, b_proj;
  };
  struct Tensor {
    std::string name;
    std::size_t offset;
    std::size_t rows;
    std::size_t cols;
  };

  std::size_t tok_emb = 0, pos_emb = 0;
  std::vector<Layer> layers;
  std::size_t lnf_g = 0, lnf_b = 0, w_head = 0, b_head = 0;
  std::size_t total = 0;
  std::vector<Tensor> tensors;

  static ParamLayout from(const ModelConfig& config);
};

enum class SiteKind { PreAttention, PostAttention, PostBlock };

// InitialPassOnly: edits touch the prompt pass; decoding reuses the edited
// key/value cache. PersistentDecode: the whole sequence is recomputed with
// the edits for every generated token. PersistentLayers: an edit at layer l
// is re-applied at the same site of every layer >= l.
enum class Persistence { InitialPassOnly, PersistentDecode, PersistentLayers };

struct HookSite {
  SiteKind kind = SiteKind::PostBlock;
  Persistence persistence = Persistence::InitialPassOnly;

  bool operator==(const HookSite&) const = default;
};

std::string_view to_string(SiteKind kind);
std::string_view to_string(Persistence p);
SiteKind parse_site(std::string_view name);               // throws BadConfig
Persistence parse_persistence(std::string_view name);     // throws BadConfig

enum class ActionKind { Replace, Zero, RandomGaussian, AddNoise, LayerZero };
std::string_view to_string(ActionKind kind);

struct Edit {
  int layer = 0;
  HookSite site;
  std::vector<int> positions;  // empty for LayerZero (all positions)
  ActionKind action = ActionKind::Zero;
  std::vector<std::vector<float>> vectors;  // Replace: one per position
  float scale = 0.0f;  // RandomGaussian: std; AddNoise: alpha
  float sigma = 0.0f;  // AddNoise: per-layer activation std
  std::uint64_t seed = 0;
};

// Gaussian draws are a pure function of (edit seed, layer, position), so a
// persistent edit reproduces the same noise every time it is re-applied.
struct InterventionPlan {
  std::vector<Edit> edits;

  bool empty() const { return edits.empty(); }
  bool has_persistence(Persistence p) const;
};

struct CaptureRequest {
  std::vector<int> layers;
  std::vector<int> positions;  // empty: all positions
  SiteKind site = SiteKind::PostBlock;
};

struct ActivationCache {
  SiteKind site = SiteKind::PostBlock;
  std::string prompt_id;
  int d_model = 0;
  std::map<int, std::map<int, std::vector<float>>> values;  // layer -> position -> h

  const std::vector<float>& at(int layer, int position) const;
};

struct ForwardResult {
  std::vector<float> logits;  // row-major (seq_len x vocab_size)
  int rows = 0;
  int vocab = 0;
  ActivationCache cache;
  std::vector<float> attention;  // optional, (n_heads x seq_len x seq_len) at one layer

  std::span<const float> row(int t) const {
    return {logits.data() + static_cast<std::size_t>(t) * static_cast<std::size_t>(vocab),
            static_cast<std::size_t>(vocab)};
  }
};

class Model {
 public:
  explicit Model(const ModelConfig& config);  // deterministic init from config.seed
  Model(const ModelConfig& config, std::vector<float> params);

  const ModelConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  std::span<const float> params() const { return params_; }
  std::span<float> mutable_params() { return params_; }

  // Full-sequence pass. Throws SequenceTooLong, PlanOutOfRange, InvalidPlan.
  ForwardResult forward(std::span<const TokenId> ids, const InterventionPlan* plan = nullptr,
                        const CaptureRequest* capture = nullptr,
                        std::optional<int> attention_layer = std::nullopt) const;

  struct Generation {
    std::string text;  // continuation up to (excluding) newline, leading format space removed
    std::vector<TokenId> tokens;
  };

  // Greedy decoding; argmax ties go to the lowest token id. Stops after a
  // newline, max_new tokens, or max_seq.
  Generation generate(std::span<const TokenId> prompt, const InterventionPlan* plan = nullptr,
                      int max_new = 32) const;

 private:
  ModelConfig config_;
  ParamLayout layout_;
  std::vector<float> params_;
};

std::string generate_greedy(const Model& model, const PromptLayout& layout,
                            const InterventionPlan* plan = nullptr, int max_new = 32);

// Validates positions, vector sizes, layers and (layer, site, position)
// uniqueness against a sequence length.
void validate_plan(const InterventionPlan& plan, const ModelConfig& config, int seq_len);

struct AttentionSummary {
  double demo_inputs = 0;
  double demo_outputs = 0;
  double separators = 0;
  double query_self = 0;
  double markers = 0;  // remainder: format markers
};

// Head-averaged attention from first_query_token at `layer`.
AttentionSummary attention_summary(const Model& model, const PromptLayout& layout, int layer);

// Weight file: "ICLW", u32 version, i32 n_layers d_model n_heads d_ff
// vocab_size max_seq, u64 seed, u64 param_count, u64 FNV-1a checksum of the
// payload, then param_count little-endian float32 values.
void save_weights(const Model& model, const std::filesystem::path& path);
Model load_weights(const std::filesystem::path& path,
                   const std::optional<ModelConfig>& expected = std::nullopt);

}  // namespace icl
