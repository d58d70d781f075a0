#include "shapead/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "shapead/error.hpp"

namespace shapead {

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double pn = n == 0 ? 1.0 : (n == 1 ? x : p1);
      const double pm = n == 1 ? 1.0 : p0;
      dp = n * (x * pn - pm) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    nodes[i] = x;
    weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

namespace {

TriangleRule make_triangle_rule(int degree) {
  TriangleRule r;
  r.degree = degree;
  if (degree <= 1) {
    r.points = {{1.0 / 3.0, 1.0 / 3.0}};
    r.weights = {0.5};
  } else if (degree == 2) {
    r.points = {{1.0 / 6.0, 1.0 / 6.0}, {2.0 / 3.0, 1.0 / 6.0}, {1.0 / 6.0, 2.0 / 3.0}};
    r.weights = {1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0};
  } else if (degree <= 5) {
    const double s15 = std::sqrt(15.0);
    const double a1 = (6.0 - s15) / 21.0, w1 = (155.0 - s15) / 2400.0;
    const double a2 = (6.0 + s15) / 21.0, w2 = (155.0 + s15) / 2400.0;
    r.points = {{1.0 / 3.0, 1.0 / 3.0}, {a1, a1}, {1.0 - 2.0 * a1, a1}, {a1, 1.0 - 2.0 * a1},
                {a2, a2}, {1.0 - 2.0 * a2, a2}, {a2, 1.0 - 2.0 * a2}};
    r.weights = {9.0 / 80.0, w1, w1, w1, w2, w2, w2};
  } else {
    // (xi, eta) = (u, v (1 - u)); the Jacobian (1 - u) raises the degree in u by one.
    const int n = (degree + 3) / 2;
    std::vector<double> x, w;
    gauss_legendre(n, x, w);
    for (int i = 0; i < n; ++i) {
      const double u = 0.5 * (x[i] + 1.0);
      for (int j = 0; j < n; ++j) {
        const double v = 0.5 * (x[j] + 1.0);
        r.points.push_back({u, v * (1.0 - u)});
        r.weights.push_back(0.25 * w[i] * w[j] * (1.0 - u));
      }
    }
  }
  return r;
}

}  // namespace

const TriangleRule& triangle_rule(int degree) {
  if (degree < 0 || degree > kMaxQuadratureDegree) {
    throw AssemblyError("quadrature degree " + std::to_string(degree) + " exceeds the supported maximum of 8");
  }
  static std::mutex mutex;
  static std::map<int, TriangleRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(degree);
  if (it == cache.end()) it = cache.emplace(degree, make_triangle_rule(degree)).first;
  return it->second;
}

const LineRule& line_rule(int degree) {
  if (degree < 0) throw AssemblyError("negative quadrature degree");
  static std::mutex mutex;
  static std::map<int, LineRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(degree);
  if (it == cache.end()) {
    LineRule r;
    r.degree = degree;
    std::vector<double> x, w;
    gauss_legendre(degree / 2 + 1, x, w);
    for (std::size_t i = 0; i < x.size(); ++i) {
      r.points.push_back(0.5 * (x[i] + 1.0));
      r.weights.push_back(0.5 * w[i]);
    }
    it = cache.emplace(degree, std::move(r)).first;
  }
  return it->second;
}

}  // namespace shapead
