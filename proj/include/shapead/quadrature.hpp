#pragma once

#include <array>
#include <vector>

namespace shapead {

/// Points on the reference triangle (0,0),(1,0),(0,1); weights sum to its area 1/2.
struct TriangleRule {
  int degree;
  std::vector<std::array<double, 2>> points;
  std::vector<double> weights;
};

/// Points on [0,1]; weights sum to 1.
struct LineRule {
  int degree;
  std::vector<double> points;
  std::vector<double> weights;
};

/// Rule exact for polynomials of total degree `degree` (0..8).
///   0-1: centroid; 2: three interior points; 3-5: seven-point degree-5 rule;
///   6-8: collapsed Gauss-Legendre product rule.
const TriangleRule& triangle_rule(int degree);

/// Gauss-Legendre rule on [0,1] exact to `degree` (0..8 and beyond).
const LineRule& line_rule(int degree);

/// n-point Gauss-Legendre nodes/weights on [-1,1], computed by Newton iteration.
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

constexpr int kMaxQuadratureDegree = 8;

}  // namespace shapead
