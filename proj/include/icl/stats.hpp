#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace icl::stats {

struct RateCI {
  int successes = 0;
  int n = 0;
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double z = 1.96;
};

// Wilson score interval. Throws InvalidCounts unless 0 <= successes <= n, n >= 1.
RateCI wilson_ci(int successes, int n, double z = 1.96);

// Plain Pearson correlation. Throws InvalidCounts for fewer than 3 points or
// unequal lengths, DegenerateVariance when either side is constant.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

struct Correlation {
  double r = 0.0;
  double p = 1.0;  // two-sided: (#{|r_perm| >= |r|} + 1) / (n_perm + 1)
  int n_perm = 0;
};

Correlation pearson_r(const std::vector<double>& xs, const std::vector<double>& ys,
                      int n_perm = 1000, std::uint64_t seed = 0);

using Matrix = std::vector<std::vector<double>>;

// Throws ZeroVector for a zero-norm row, InvalidCounts for ragged input.
Matrix cosine_matrix(const Matrix& vectors);

// Ward-linkage agglomeration. Labels for a k-cluster cut are numbered by
// first appearance in input order.
class WardTree {
 public:
  explicit WardTree(const Matrix& points);
  std::vector<int> cut(int k) const;
  int size() const { return n_; }

 private:
  int n_ = 0;
  std::vector<std::pair<int, int>> merges_;  // (absorbing cluster, absorbed cluster)
};

// Mean silhouette over all points with Euclidean distance. Singletons score 0.
double silhouette(const Matrix& points, const std::vector<int>& labels);

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

struct ClusterResult {
  int k = 0;
  std::vector<int> labels;
  double silhouette = 0.0;
  std::map<int, double> silhouette_by_k;
  double agreement = 0.0;  // adjusted Rand index against the reference labels
  double p_value = 1.0;    // (#{ARI_perm >= ARI} + 1) / (n_perm + 1)
  int n_perm = 0;
  bool degenerate = false;
  std::string warning;
};

// Ward clustering with k chosen by maximum silhouette over [k_min, k_max]
// (clipped to [2, n - 1]), then a label-permutation test of agreement with
// `reference`. Throws TooFewItems for fewer than 3 points.
ClusterResult cluster_and_test(const Matrix& points, int k_min, int k_max,
                               const std::vector<int>& reference, int n_perm = 1000,
                               std::uint64_t seed = 0);

}  // namespace icl::stats
