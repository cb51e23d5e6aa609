#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "icl/rng.hpp"
#include "icl/stats.hpp"
#include "support.hpp"

using namespace icl;
using namespace icl::stats;
using testing::error_of;

namespace {

double closed_form_wilson(int s, int n, double z, bool upper) {
  const double p = static_cast<double>(s) / n;
  const double denom = 1 + z * z / n;
  const double centre = (p + z * z / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / n + z * z / (4.0 * n * n)) / denom;
  return upper ? centre + half : centre - half;
}

long double direct_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const long double n = static_cast<long double>(x.size());
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    syy += static_cast<long double>(y[i]) * y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Greedy Ward from scratch: merge the pair whose union raises the total
// within-cluster sum of squares the least.
std::vector<int> brute_ward(const Matrix& pts, int k) {
  std::vector<std::vector<int>> clusters;
  for (int i = 0; i < static_cast<int>(pts.size()); ++i) clusters.push_back({i});
  auto sse = [&](const std::vector<int>& c) {
    std::vector<double> mean(pts[0].size(), 0.0);
    for (int i : c)
      for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += pts[static_cast<std::size_t>(i)][j] / c.size();
    double s = 0;
    for (int i : c) s += std::pow(dist(pts[static_cast<std::size_t>(i)], mean), 2);
    return s;
  };
  while (static_cast<int>(clusters.size()) > k) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        auto u = clusters[i];
        u.insert(u.end(), clusters[j].begin(), clusters[j].end());
        const double cost = sse(u) - sse(clusters[i]) - sse(clusters[j]);
        if (cost < best) {
          best = cost;
          bi = i;
          bj = j;
        }
      }
    }
    clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
  }
  std::vector<int> raw(pts.size());
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (int i : clusters[c]) raw[static_cast<std::size_t>(i)] = static_cast<int>(c);
  // Relabel by first appearance.
  std::map<int, int> seen;
  std::vector<int> out;
  for (int r : raw) {
    const auto it = seen.emplace(r, static_cast<int>(seen.size())).first;
    out.push_back(it->second);
  }
  return out;
}

double brute_silhouette(const Matrix& pts, const std::vector<int>& labels) {
  const std::size_t n = pts.size();
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::map<int, std::pair<double, int>> by;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      auto& e = by[labels[j]];
      e.first += dist(pts[i], pts[j]);
      ++e.second;
    }
    if (!by.count(labels[i])) continue;  // singleton
    const double a = by[labels[i]].first / by[labels[i]].second;
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [l, e] : by)
      if (l != labels[i]) b = std::min(b, e.first / e.second);
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

Matrix blobs(Rng& rng, const std::vector<int>& sizes, double separation, double spread, int dim = 3) {
  Matrix out;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    std::vector<double> centre(static_cast<std::size_t>(dim), 0.0);
    centre[c % static_cast<std::size_t>(dim)] = separation * static_cast<double>(c / dim + 1);
    for (int i = 0; i < sizes[c]; ++i) {
      auto p = centre;
      for (auto& x : p) x += spread * rng.normal();
      out.push_back(p);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("Wilson interval golden values") {
  const auto hi = wilson_ci(48, 50);
  CHECK(hi.point == 0.96);
  CHECK(hi.lower == Catch::Approx(0.865).margin(0.005));
  CHECK(hi.upper == Catch::Approx(0.989).margin(0.005));
  CHECK(std::lround(hi.lower * 100) == 87);
  CHECK(std::lround(hi.upper * 100) == 99);
  const auto lo = wilson_ci(0, 50);
  CHECK(lo.lower == 0.0);
  CHECK(lo.upper == Catch::Approx(0.071).margin(0.005));
  CHECK(std::lround(lo.upper * 100) == 7);
  CHECK(wilson_ci(0, 1000000).upper < 1e-5);
}

TEST_CASE("Wilson interval matches the closed form and contains the point") {
  Rng rng(1);
  for (int t = 0; t < 500; ++t) {
    const int n = 1 + static_cast<int>(rng.below(300));
    const int s = static_cast<int>(rng.below(static_cast<std::uint64_t>(n) + 1));
    const double z = t % 2 ? 1.96 : 2.576;
    const auto ci = wilson_ci(s, n, z);
    REQUIRE(ci.lower == Catch::Approx(std::max(0.0, closed_form_wilson(s, n, z, false))).margin(1e-12));
    REQUIRE(ci.upper == Catch::Approx(std::min(1.0, closed_form_wilson(s, n, z, true))).margin(1e-12));
    REQUIRE(0.0 <= ci.lower);
    REQUIRE(ci.lower <= ci.point);
    REQUIRE(ci.point <= ci.upper);
    REQUIRE(ci.upper <= 1.0);
  }
  CHECK(error_of([] { wilson_ci(3, 2); }) == ErrorCode::InvalidCounts);
  CHECK(error_of([] { wilson_ci(0, 0); }) == ErrorCode::InvalidCounts);
  CHECK(error_of([] { wilson_ci(-1, 5); }) == ErrorCode::InvalidCounts);
}

TEST_CASE("Pearson correlation") {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  CHECK(pearson(x, {3, 5, 7, 9, 11}) == Catch::Approx(1.0).margin(1e-15));
  CHECK(pearson(x, {-1, -2, -3, -4, -5}) == Catch::Approx(-1.0).margin(1e-15));
  const std::vector<double> a = {0.3, -1.2, 2.5, 0.0, 4.1, -0.7, 1.9, 3.3, -2.2, 0.8};
  const std::vector<double> b = {1.1, 0.4, 2.0, -0.5, 3.9, 0.1, 0.9, 2.7, -1.5, 1.6};
  const double r = pearson(a, b);
  CHECK(std::abs(r - static_cast<double>(direct_pearson(a, b))) < 1e-12);

  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> xs(12), ys(12);
    for (auto& v : xs) v = rng.normal();
    for (auto& v : ys) v = rng.normal();
    const double base = pearson(xs, ys);
    const double sc = 0.5 + rng.uniform() * 10, sh = rng.normal() * 5;
    std::vector<double> xt = xs;
    for (auto& v : xt) v = sc * v + sh;
    REQUIRE(std::abs(pearson(xt, ys) - base) < 1e-12);
    REQUIRE(std::abs(base - static_cast<double>(direct_pearson(xs, ys))) < 1e-12);
  }
  CHECK(error_of([] { pearson({1, 1, 1}, {1, 2, 3}); }) == ErrorCode::DegenerateVariance);
  CHECK(error_of([] { pearson({1, 2}, {1, 2}); }) == ErrorCode::InvalidCounts);
  CHECK(error_of([] { pearson({1, 2, 3}, {1, 2}); }) == ErrorCode::InvalidCounts);
}

TEST_CASE("permutation p-values") {
  std::vector<double> x(30), y(30);
  for (int i = 0; i < 30; ++i) {
    x[static_cast<std::size_t>(i)] = i;
    y[static_cast<std::size_t>(i)] = 2 * i + 1;
  }
  const auto strong = pearson_r(x, y, 1000, 3);
  CHECK(strong.r == Catch::Approx(1.0));
  CHECK(strong.p == Catch::Approx(1.0 / 1001));
  CHECK(strong.n_perm == 1000);
  CHECK(pearson_r(x, y, 1000, 3).p == strong.p);

  Rng rng(9);
  int small = 0;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> a(20), b(20);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    const auto c = pearson_r(a, b, 200, static_cast<std::uint64_t>(t));
    CHECK(c.p > 0.0);
    CHECK(c.p <= 1.0);
    small += c.p < 0.05;
  }
  CHECK(small <= 4);
}

TEST_CASE("cosine matrix") {
  const auto m = cosine_matrix({{1, 0, 0}, {0, 2, 0}, {3, 0, 0}, {1, 1, 0}});
  CHECK(m[0][0] == Catch::Approx(1.0));
  CHECK(m[0][1] == Catch::Approx(0.0).margin(1e-15));
  CHECK(m[0][2] == Catch::Approx(1.0));
  CHECK(m[0][3] == Catch::Approx(std::sqrt(0.5)));
  Rng rng(4);
  Matrix v(7, std::vector<double>(5));
  for (auto& row : v)
    for (auto& x : row) x = rng.normal();
  const auto c = cosine_matrix(v);
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(c[i][i] == Catch::Approx(1.0).margin(1e-12));
    for (std::size_t j = 0; j < 7; ++j) {
      CHECK(std::abs(c[i][j] - c[j][i]) < 1e-12);
      double dot = 0, ni = 0, nj = 0;
      for (std::size_t k = 0; k < 5; ++k) {
        dot += v[i][k] * v[j][k];
        ni += v[i][k] * v[i][k];
        nj += v[j][k] * v[j][k];
      }
      CHECK(c[i][j] == Catch::Approx(dot / std::sqrt(ni * nj)).margin(1e-12));
    }
  }
  CHECK(error_of([] { cosine_matrix({{1, 0}, {0, 0}}); }) == ErrorCode::ZeroVector);
  CHECK(error_of([] { cosine_matrix({{1, 0}, {0, 1, 2}}); }) == ErrorCode::InvalidCounts);
}

TEST_CASE("Ward clustering and silhouette match brute force") {
  Rng rng(6);
  for (int t = 0; t < 25; ++t) {
    const int n = 3 + static_cast<int>(rng.below(8));
    Matrix pts(static_cast<std::size_t>(n), std::vector<double>(3));
    for (auto& p : pts)
      for (auto& x : p) x = rng.normal() * 3;
    const WardTree tree(pts);
    for (int k = 1; k <= n; ++k) {
      const auto got = tree.cut(k);
      REQUIRE(got == brute_ward(pts, k));
      if (k >= 2 && k < n) REQUIRE(silhouette(pts, got) == Catch::Approx(brute_silhouette(pts, got)).margin(1e-12));
    }
  }
}

TEST_CASE("adjusted Rand index") {
  CHECK(adjusted_rand_index({0, 0, 1, 1}, {1, 1, 0, 0}) == 1.0);
  CHECK(adjusted_rand_index({0, 0, 1, 1, 2, 2}, {0, 0, 1, 1, 2, 2}) == 1.0);
  // Hand computation: contingency [[1,1],[1,1]] gives index 0, expected 1, max 2.
  CHECK(adjusted_rand_index({0, 0, 1, 1}, {0, 1, 0, 1}) == Catch::Approx(-0.5));
  CHECK(error_of([] { adjusted_rand_index({0}, {0, 1}); }) == ErrorCode::InvalidCounts);
}

TEST_CASE("cluster_and_test on separated clusters") {
  Rng rng(7);
  const auto pts = blobs(rng, {4, 4, 4}, 50.0, 0.5);
  const std::vector<int> ref = {0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2};
  const auto r = cluster_and_test(pts, 2, 6, ref, 1000, 1);
  CHECK(r.k == 3);
  CHECK(r.agreement == 1.0);
  CHECK(r.p_value <= 1.0 / 1001 + 1e-15);
  CHECK(!r.degenerate);
  CHECK(r.silhouette == Catch::Approx(brute_silhouette(pts, r.labels)).margin(1e-12));
  double best = -2;
  for (const auto& [k, s] : r.silhouette_by_k) best = std::max(best, s);
  CHECK(r.silhouette == best);

  // Input order does not change the partition or its agreement.
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffler(8);
  shuffler.shuffle(order);
  Matrix p2;
  std::vector<int> ref2;
  for (auto i : order) {
    p2.push_back(pts[i]);
    ref2.push_back(ref[i]);
  }
  const auto r2 = cluster_and_test(p2, 2, 6, ref2, 1000, 1);
  CHECK(r2.k == r.k);
  CHECK(r2.agreement == r.agreement);
  CHECK(r2.silhouette == Catch::Approx(r.silhouette).margin(1e-12));
  std::vector<int> back(pts.size());
  for (std::size_t j = 0; j < order.size(); ++j) back[order[j]] = r2.labels[j];
  CHECK(adjusted_rand_index(back, r.labels) == 1.0);
}

TEST_CASE("cluster_and_test on random and degenerate inputs") {
  Rng rng(10);
  int small = 0;
  for (int t = 0; t < 10; ++t) {
    Matrix pts(12, std::vector<double>(4));
    for (auto& p : pts)
      for (auto& x : p) x = rng.normal();
    const std::vector<int> ref = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2};
    const auto r = cluster_and_test(pts, 2, 5, ref, 200, static_cast<std::uint64_t>(t));
    small += r.p_value < 0.05;
  }
  CHECK(small <= 3);

  const Matrix same(5, std::vector<double>{1.0, 2.0});
  const auto d = cluster_and_test(same, 2, 4, {0, 0, 1, 1, 2}, 100, 1);
  CHECK(d.degenerate);
  CHECK(!d.warning.empty());
  CHECK(error_of([] { cluster_and_test({{1.0}, {2.0}}, 2, 3, {0, 1}, 10, 1); }) == ErrorCode::TooFewItems);
}
