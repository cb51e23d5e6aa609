#pragma once

// Scalar-templated building blocks shared by the inference path (float) and
// the training / gradient-check path (float and double).

#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace icl::detail {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, 1, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<Mat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const Mat<T>>;
template <typename T>
using VecMap = Eigen::Map<Vec<T>>;
template <typename T>
using ConstVecMap = Eigen::Map<const Vec<T>>;

inline constexpr double kLayerNormEps = 1e-5;

// y = (x - mean) * rstd * gamma + beta, row-wise. mean/rstd are kept for
// the backward pass.
template <typename T, typename In, typename Out>
void layernorm_forward(const In& x, const ConstVecMap<T>& gamma, const ConstVecMap<T>& beta,
                       Out& y, Eigen::Matrix<T, Eigen::Dynamic, 1>* mean_out = nullptr,
                       Eigen::Matrix<T, Eigen::Dynamic, 1>* rstd_out = nullptr) {
  const Eigen::Index rows = x.rows();
  const Eigen::Index d = x.cols();
  if (mean_out) mean_out->resize(rows);
  if (rstd_out) rstd_out->resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const T mean = x.row(r).sum() / static_cast<T>(d);
    const T var = (x.row(r).array() - mean).square().sum() / static_cast<T>(d);
    const T rstd = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    y.row(r) = ((x.row(r).array() - mean) * rstd) * gamma.array() + beta.array();
    if (mean_out) (*mean_out)(r) = mean;
    if (rstd_out) (*rstd_out)(r) = rstd;
  }
}

template <typename T>
void layernorm_backward(const Mat<T>& x, const Eigen::Matrix<T, Eigen::Dynamic, 1>& mean,
                        const Eigen::Matrix<T, Eigen::Dynamic, 1>& rstd,
                        const ConstVecMap<T>& gamma, const Mat<T>& dy, Mat<T>& dx,
                        VecMap<T> dgamma, VecMap<T> dbeta) {
  const Eigen::Index d = x.cols();
  dx.resize(x.rows(), d);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const auto xhat = ((x.row(r).array() - mean(r)) * rstd(r)).eval();
    const auto dxhat = (dy.row(r).array() * gamma.array()).eval();
    dgamma.array() += dy.row(r).array() * xhat;
    dbeta.array() += dy.row(r).array();
    const T m1 = dxhat.sum() / static_cast<T>(d);
    const T m2 = (dxhat * xhat).sum() / static_cast<T>(d);
    dx.row(r) = (rstd(r) * (dxhat - m1 - xhat * m2)).matrix();
  }
}

// tanh-approximated GELU and its derivative, elementwise.
template <typename T>
Mat<T> gelu(const Mat<T>& x) {
  const T c = static_cast<T>(0.7978845608028654);
  const T k = static_cast<T>(0.044715);
  const auto a = x.array();
  return (static_cast<T>(0.5) * a * (T(1) + (c * (a + k * a.cube())).tanh())).matrix();
}

template <typename T>
Mat<T> gelu_grad(const Mat<T>& x) {
  const T c = static_cast<T>(0.7978845608028654);
  const T k = static_cast<T>(0.044715);
  const auto a = x.array();
  const auto t = (c * (a + k * a.cube())).tanh().eval();
  return (static_cast<T>(0.5) * (T(1) + t) +
          static_cast<T>(0.5) * a * (T(1) - t.square()) * c * (T(1) + T(3) * k * a.square()))
      .matrix();
}

// Causal softmax attention for rows at absolute positions
// [start, start + q.rows()) against keys/values [0, start + q.rows()).
// `probs` (optional) receives the (rows x total) probability matrix.
template <typename T, typename Q, typename K, typename V, typename O>
void causal_attention_head(const Q& q, const K& k, const V& v, Eigen::Index start, T scale,
                           O&& out, Mat<T>* probs) {
  const Eigen::Index n = q.rows();
  const Eigen::Index total = start + n;
  Mat<T> s = (q * k.topRows(total).transpose()) * scale;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index visible = start + i + 1;
    auto row = s.row(i);
    auto head = row.head(visible);
    const T mx = head.maxCoeff();
    head = (head.array() - mx).exp().matrix();
    head /= head.sum();
    row.tail(total - visible).setZero();
  }
  out.noalias() = s * v.topRows(total);
  if (probs) *probs = std::move(s);
}

}  // namespace icl::detail
