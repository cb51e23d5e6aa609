#pragma once

// Differentiable forward/backward over a packed batch of sequences. Used by
// the trainer (float) and the gradient check (double). Inference with hooks
// lives in model.cpp and shares the kernels.

#include <cmath>
#include <limits>
#include <vector>

#include "icl/detail/kernels.hpp"
#include "icl/model.hpp"

namespace icl::detail {

// Sequences are concatenated row-wise; seq_starts has one more entry than
// there are sequences. targets[r] is the next-token id predicted at row r,
// or -1 where the loss is masked.
struct PackedBatch {
  std::vector<int> ids;
  std::vector<int> targets;
  std::vector<int> seq_starts{0};

  int rows() const { return static_cast<int>(ids.size()); }
  int sequences() const { return static_cast<int>(seq_starts.size()) - 1; }
  int target_count() const {
    int n = 0;
    for (int t : targets) n += t >= 0;
    return n;
  }
};

template <typename T>
class Transformer {
 public:
  using Col = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  Transformer(const ModelConfig& c, const ParamLayout& layout) : c_(c), lay_(layout) {}

  // Mean cross-entropy over unmasked targets. Accumulates d(loss)/d(params)
  // into grad when non-null. A batch with no targets has loss 0.
  T loss(const T* params, const PackedBatch& b, T* grad) {
    forward(params, b);
    const int n = b.rows();
    const int V = c_.vocab_size;
    const int count = b.target_count();
    if (count == 0) return T(0);
    T total = 0;
    Mat<T> dlogits = Mat<T>::Zero(n, V);
    for (int r = 0; r < n; ++r) {
      const int t = b.targets[static_cast<std::size_t>(r)];
      if (t < 0) continue;
      auto row = logits_.row(r);
      const T mx = row.maxCoeff();
      const auto e = (row.array() - mx).exp().eval();
      const T z = e.sum();
      total += std::log(z) + mx - row(t);
      if (grad) {
        dlogits.row(r) = (e / z).matrix() / static_cast<T>(count);
        dlogits(r, t) -= T(1) / static_cast<T>(count);
      }
    }
    if (grad) backward(params, b, dlogits, grad);
    return total / static_cast<T>(count);
  }

 private:
  struct LayerCache {
    Mat<T> x_in, a1, qkv, o, x_mid, a2, h_pre, g;
    Col m1, r1, m2, r2;
    std::vector<Mat<T>> probs;  // per (sequence, head)
  };

  ConstMatMap<T> mat(const T* p, std::size_t off, int r, int c) const { return ConstMatMap<T>(p + off, r, c); }
  ConstVecMap<T> vec(const T* p, std::size_t off, int c) const { return ConstVecMap<T>(p + off, c); }
  MatMap<T> gmat(T* p, std::size_t off, int r, int c) const { return MatMap<T>(p + off, r, c); }
  VecMap<T> gvec(T* p, std::size_t off, int c) const { return VecMap<T>(p + off, c); }

  void forward(const T* P, const PackedBatch& b) {
    const int n = b.rows();
    const int d = c_.d_model;
    const int f = c_.d_ff;
    const int hd = c_.head_dim();
    const T scale = T(1) / std::sqrt(static_cast<T>(hd));
    layers_.resize(static_cast<std::size_t>(c_.n_layers));

    Mat<T> x(n, d);
    const auto tok = mat(P, lay_.tok_emb, c_.vocab_size, d);
    const auto pos = mat(P, lay_.pos_emb, c_.max_seq, d);
    for (int s = 0; s < b.sequences(); ++s) {
      for (int r = b.seq_starts[s]; r < b.seq_starts[s + 1]; ++r) {
        x.row(r) = tok.row(b.ids[static_cast<std::size_t>(r)]) + pos.row(r - b.seq_starts[s]);
      }
    }
    for (int l = 0; l < c_.n_layers; ++l) {
      const auto& L = lay_.layers[static_cast<std::size_t>(l)];
      auto& C = layers_[static_cast<std::size_t>(l)];
      C.x_in = x;
      C.a1.resize(n, d);
      layernorm_forward<T>(x, vec(P, L.ln1_g, d), vec(P, L.ln1_b, d), C.a1, &C.m1, &C.r1);
      C.qkv.noalias() = C.a1 * mat(P, L.w_qkv, d, 3 * d);
      C.qkv.rowwise() += vec(P, L.b_qkv, 3 * d);
      C.o.resize(n, d);
      C.probs.resize(static_cast<std::size_t>(b.sequences() * c_.n_heads));
      for (int s = 0; s < b.sequences(); ++s) {
        const int s0 = b.seq_starts[s];
        const int len = b.seq_starts[s + 1] - s0;
        for (int h = 0; h < c_.n_heads; ++h) {
          causal_attention_head<T>(C.qkv.block(s0, h * hd, len, hd),
                                   C.qkv.block(s0, d + h * hd, len, hd),
                                   C.qkv.block(s0, 2 * d + h * hd, len, hd), 0, scale,
                                   C.o.block(s0, h * hd, len, hd),
                                   &C.probs[static_cast<std::size_t>(s * c_.n_heads + h)]);
        }
      }
      x.noalias() += C.o * mat(P, L.w_o, d, d);
      x.rowwise() += vec(P, L.b_o, d);
      C.x_mid = x;
      C.a2.resize(n, d);
      layernorm_forward<T>(x, vec(P, L.ln2_g, d), vec(P, L.ln2_b, d), C.a2, &C.m2, &C.r2);
      C.h_pre.noalias() = C.a2 * mat(P, L.w_fc, d, f);
      C.h_pre.rowwise() += vec(P, L.b_fc, f);
      C.g = gelu<T>(C.h_pre);
      x.noalias() += C.g * mat(P, L.w_proj, f, d);
      x.rowwise() += vec(P, L.b_proj, d);
    }
    x_final_ = x;
    af_.resize(n, d);
    layernorm_forward<T>(x, vec(P, lay_.lnf_g, d), vec(P, lay_.lnf_b, d), af_, &mf_, &rf_);
    logits_.noalias() = af_ * mat(P, lay_.w_head, d, c_.vocab_size);
    logits_.rowwise() += vec(P, lay_.b_head, c_.vocab_size);
  }

  void backward(const T* P, const PackedBatch& b, const Mat<T>& dlogits, T* G) {
    const int n = b.rows();
    const int d = c_.d_model;
    const int f = c_.d_ff;
    const int V = c_.vocab_size;
    const int hd = c_.head_dim();
    const T scale = T(1) / std::sqrt(static_cast<T>(hd));

    gmat(G, lay_.w_head, d, V).noalias() += af_.transpose() * dlogits;
    gvec(G, lay_.b_head, V) += dlogits.colwise().sum();
    Mat<T> daf = dlogits * mat(P, lay_.w_head, d, V).transpose();
    Mat<T> dx;
    layernorm_backward<T>(x_final_, mf_, rf_, vec(P, lay_.lnf_g, d), daf, dx, gvec(G, lay_.lnf_g, d),
                          gvec(G, lay_.lnf_b, d));

    Mat<T> dg, dh, da, dnorm, dattn(n, d), dqkv(n, 3 * d);
    for (int l = c_.n_layers - 1; l >= 0; --l) {
      const auto& L = lay_.layers[static_cast<std::size_t>(l)];
      auto& C = layers_[static_cast<std::size_t>(l)];

      gmat(G, L.w_proj, f, d).noalias() += C.g.transpose() * dx;
      gvec(G, L.b_proj, d) += dx.colwise().sum();
      dg.noalias() = dx * mat(P, L.w_proj, f, d).transpose();
      dh = dg.cwiseProduct(gelu_grad<T>(C.h_pre));
      gmat(G, L.w_fc, d, f).noalias() += C.a2.transpose() * dh;
      gvec(G, L.b_fc, f) += dh.colwise().sum();
      da.noalias() = dh * mat(P, L.w_fc, d, f).transpose();
      layernorm_backward<T>(C.x_mid, C.m2, C.r2, vec(P, L.ln2_g, d), da, dnorm, gvec(G, L.ln2_g, d),
                            gvec(G, L.ln2_b, d));
      dx += dnorm;

      gmat(G, L.w_o, d, d).noalias() += C.o.transpose() * dx;
      gvec(G, L.b_o, d) += dx.colwise().sum();
      dattn.noalias() = dx * mat(P, L.w_o, d, d).transpose();
      for (int s = 0; s < b.sequences(); ++s) {
        const int s0 = b.seq_starts[s];
        const int len = b.seq_starts[s + 1] - s0;
        for (int h = 0; h < c_.n_heads; ++h) {
          const Mat<T>& Pm = C.probs[static_cast<std::size_t>(s * c_.n_heads + h)];
          const auto q = C.qkv.block(s0, h * hd, len, hd);
          const auto k = C.qkv.block(s0, d + h * hd, len, hd);
          const auto v = C.qkv.block(s0, 2 * d + h * hd, len, hd);
          const auto dout = dattn.block(s0, h * hd, len, hd);
          Mat<T> dP = dout * v.transpose();
          dqkv.block(s0, 2 * d + h * hd, len, hd).noalias() = Pm.transpose() * dout;
          const Col rowdot = dP.cwiseProduct(Pm).rowwise().sum();
          Mat<T> dS = (Pm.array() * (dP.colwise() - rowdot).array()).matrix() * scale;
          dqkv.block(s0, h * hd, len, hd).noalias() = dS * k;
          dqkv.block(s0, d + h * hd, len, hd).noalias() = dS.transpose() * q;
        }
      }
      gmat(G, L.w_qkv, d, 3 * d).noalias() += C.a1.transpose() * dqkv;
      gvec(G, L.b_qkv, 3 * d) += dqkv.colwise().sum();
      da.noalias() = dqkv * mat(P, L.w_qkv, d, 3 * d).transpose();
      layernorm_backward<T>(C.x_in, C.m1, C.r1, vec(P, L.ln1_g, d), da, dnorm, gvec(G, L.ln1_g, d),
                            gvec(G, L.ln1_b, d));
      dx += dnorm;
    }

    auto dtok = gmat(G, lay_.tok_emb, V, d);
    auto dpos = gmat(G, lay_.pos_emb, c_.max_seq, d);
    for (int s = 0; s < b.sequences(); ++s) {
      for (int r = b.seq_starts[s]; r < b.seq_starts[s + 1]; ++r) {
        dtok.row(b.ids[static_cast<std::size_t>(r)]) += dx.row(r);
        dpos.row(r - b.seq_starts[s]) += dx.row(r);
      }
    }
  }

  const ModelConfig& c_;
  const ParamLayout& lay_;
  std::vector<LayerCache> layers_;
  Mat<T> x_final_, af_, logits_;
  Col mf_, rf_;
};

}  // namespace icl::detail
