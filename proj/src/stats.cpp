#include "icl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "icl/error.hpp"
#include "icl/rng.hpp"

namespace icl::stats {

RateCI wilson_ci(int successes, int n, double z) {
  if (n < 1 || successes < 0 || successes > n) {
    throw Error(ErrorCode::InvalidCounts,
                std::to_string(successes) + " successes out of " + std::to_string(n));
  }
  const double nn = n;
  const double p = successes / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2 * nn)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn)) / denom;
  RateCI out{successes, n, p, std::max(0.0, center - half), std::min(1.0, center + half), z};
  // Guard the containment invariant against rounding at the boundaries.
  out.lower = std::min(out.lower, p);
  out.upper = std::max(out.upper, p);
  return out;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 3) {
    throw Error(ErrorCode::InvalidCounts, "pearson needs two equal-length series of >= 3 points");
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw Error(ErrorCode::DegenerateVariance, "constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

Correlation pearson_r(const std::vector<double>& xs, const std::vector<double>& ys, int n_perm,
                      std::uint64_t seed) {
  Correlation c;
  c.r = pearson(xs, ys);
  c.n_perm = n_perm;
  if (n_perm <= 0) return c;
  Rng rng(seed);
  std::vector<double> perm = ys;
  int extreme = 0;
  // Tolerance absorbs summation-order noise for permutations equal to the identity.
  const double threshold = std::abs(c.r) - 1e-12;
  for (int i = 0; i < n_perm; ++i) {
    rng.shuffle(perm);
    extreme += std::abs(pearson(xs, perm)) >= threshold;
  }
  c.p = (extreme + 1.0) / (n_perm + 1.0);
  return c;
}

Matrix cosine_matrix(const Matrix& v) {
  const std::size_t n = v.size();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (v[i].size() != v[0].size()) throw Error(ErrorCode::InvalidCounts, "ragged vectors");
    double s = 0;
    for (double x : v[i]) s += x * x;
    norms[i] = std::sqrt(s);
    if (norms[i] == 0) throw Error(ErrorCode::ZeroVector, "row " + std::to_string(i));
  }
  Matrix out(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    out[i][i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double dot = 0;
      for (std::size_t t = 0; t < v[i].size(); ++t) dot += v[i][t] * v[j][t];
      out[i][j] = out[j][i] = std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0);
    }
  }
  return out;
}

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

std::vector<int> canonical(const std::vector<int>& raw) {
  std::map<int, int> ids;
  std::vector<int> out;
  for (int r : raw) out.push_back(ids.emplace(r, static_cast<int>(ids.size())).first->second);
  return out;
}

}  // namespace

// Lance-Williams recurrence on squared Euclidean distances:
//   d(i+j, k) = ((n_i + n_k) d(i,k) + (n_j + n_k) d(j,k) - n_k d(i,j)) / (n_i + n_j + n_k)
// Ties pick the pair that sorts first by member-set content, not by input
// position, so the tree does not depend on input order for distinct points.
WardTree::WardTree(const Matrix& points) : n_(static_cast<int>(points.size())) {
  const int n = n_;
  Matrix d(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) d[i][j] = d[j][i] = sq_dist(points[i], points[j]);
  }
  std::vector<int> size(n, 1);
  std::vector<bool> alive(n, true);
  std::vector<std::vector<double>> smallest(points);  // lexicographically least member
  for (int step = 0; step + 1 < n; ++step) {
    int bi = -1, bj = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (int j = i + 1; j < n; ++j) {
        if (!alive[j]) continue;
        const auto key = [&](int a, int b) {
          const auto lo = [&](int x, int y) { return std::min(smallest[x], smallest[y]); };
          const auto hi = [&](int x, int y) { return std::max(smallest[x], smallest[y]); };
          return std::pair(lo(a, b), hi(a, b)) < std::pair(lo(bi, bj), hi(bi, bj));
        };
        if (d[i][j] < best || (d[i][j] == best && key(i, j))) {
          best = d[i][j];
          bi = i;
          bj = j;
        }
      }
    }
    for (int k = 0; k < n; ++k) {
      if (!alive[k] || k == bi || k == bj) continue;
      const double ni = size[bi], nj = size[bj], nk = size[k];
      const double v = ((ni + nk) * d[bi][k] + (nj + nk) * d[bj][k] - nk * d[bi][bj]) / (ni + nj + nk);
      d[bi][k] = d[k][bi] = v;
    }
    size[bi] += size[bj];
    alive[bj] = false;
    smallest[bi] = std::min(smallest[bi], smallest[bj]);
    merges_.emplace_back(bi, bj);
  }
}

std::vector<int> WardTree::cut(int k) const {
  if (k < 1 || k > n_) throw Error(ErrorCode::InvalidCounts, "cluster count out of range");
  std::vector<int> owner(n_);
  for (int i = 0; i < n_; ++i) owner[i] = i;
  for (int m = 0; m < n_ - k; ++m) {
    const auto [into, from] = merges_[static_cast<std::size_t>(m)];
    for (int& o : owner) {
      if (o == from) o = into;
    }
  }
  return canonical(owner);
}

double silhouette(const Matrix& points, const std::vector<int>& labels) {
  const std::size_t n = points.size();
  int k = 0;
  for (int l : labels) k = std::max(k, l + 1);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
    std::vector<int> count(static_cast<std::size_t>(k), 0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sum[labels[j]] += std::sqrt(sq_dist(points[i], points[j]));
      ++count[labels[j]];
    }
    const int own = labels[i];
    if (count[own] == 0) continue;  // singleton
    const double a = sum[own] / count[own];
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c != own && count[c] > 0) b = std::min(b, sum[c] / count[c]);
    }
    const double m = std::max(a, b);
    if (m > 0 && std::isfinite(b)) total += (b - a) / m;
  }
  return total / static_cast<double>(n);
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::InvalidCounts, "label vectors differ in length");
  std::map<std::pair<int, int>, long> joint;
  std::map<int, long> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++joint[{a[i], b[i]}];
    ++ra[a[i]];
    ++rb[b[i]];
  }
  auto c2 = [](long x) { return static_cast<double>(x) * (x - 1) / 2.0; };
  double index = 0, sa = 0, sb = 0;
  for (const auto& [_, v] : joint) index += c2(v);
  for (const auto& [_, v] : ra) sa += c2(v);
  for (const auto& [_, v] : rb) sb += c2(v);
  const double total = c2(static_cast<long>(a.size()));
  const double expected = total > 0 ? sa * sb / total : 0.0;
  const double max_index = (sa + sb) / 2.0;
  if (max_index == expected) return index == expected ? 1.0 : 0.0;
  return (index - expected) / (max_index - expected);
}

ClusterResult cluster_and_test(const Matrix& points, int k_min, int k_max,
                               const std::vector<int>& reference, int n_perm, std::uint64_t seed) {
  const int n = static_cast<int>(points.size());
  if (n < 3) throw Error(ErrorCode::TooFewItems, "clustering needs at least 3 items");
  if (static_cast<int>(reference.size()) != n) {
    throw Error(ErrorCode::InvalidCounts, "reference labels do not match the item count");
  }
  ClusterResult out;
  out.n_perm = n_perm;
  bool spread = false;
  for (int i = 1; i < n && !spread; ++i) spread = sq_dist(points[0], points[i]) > 0;
  if (!spread) {
    out.degenerate = true;
    out.warning = "all items identical; clustering is undefined";
    out.k = 1;
    out.labels.assign(static_cast<std::size_t>(n), 0);
    return out;
  }
  const WardTree tree(points);
  const int lo = std::max(2, k_min);
  const int hi = std::min(n - 1, k_max);
  if (lo > hi) throw Error(ErrorCode::TooFewItems, "empty cluster-count range");
  out.silhouette = -std::numeric_limits<double>::infinity();
  for (int k = lo; k <= hi; ++k) {
    const auto labels = tree.cut(k);
    const double s = silhouette(points, labels);
    out.silhouette_by_k[k] = s;
    if (s > out.silhouette) {
      out.silhouette = s;
      out.k = k;
      out.labels = labels;
    }
  }
  out.agreement = adjusted_rand_index(out.labels, reference);
  Rng rng(seed);
  std::vector<int> perm = reference;
  int hits = 0;
  for (int i = 0; i < n_perm; ++i) {
    rng.shuffle(perm);
    hits += adjusted_rand_index(out.labels, perm) >= out.agreement - 1e-12;
  }
  out.p_value = (hits + 1.0) / (n_perm + 1.0);
  return out;
}

}  // namespace icl::stats
