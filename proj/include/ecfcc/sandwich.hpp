#pragma once

#include "ecfcc/inversion.hpp"

#include <vector>

namespace ecfcc {

struct AffineSegment
{
  double slope = 0.0;
  double intercept = 0.0;

  double operator()(double x) const { return slope * x + intercept; }
};

/// Concave min-of-affines under-approximation of a CDF table on
/// [x_lb, inf). Segments run left to right with strictly decreasing
/// slopes; the last one is the flat cap at the table's right end.
struct PwaUnderApprox
{
  std::vector<AffineSegment> segments;
  double x_lb = 0.0;
  double eps = 0.0;
  /// Right end of the table; the cap value is the CDF there.
  double x_max = 0.0;

  int size() const { return static_cast<int>(segments.size()); }
  double cap() const { return segments.back().intercept; }
};

/// Builds the under-approximation right to left: each accepted chord
/// joins the current right anchor to the leftmost grid point whose chord
/// errors over the spanned points all lie in [0, eps]. Chords with errors
/// down to -quad_tol are admitted and shifted down by the excursion.
/// Stops when no chord reaches further than the adjacent grid point,
/// when `max_segments` chords are placed, or at the left end of the grid.
PwaUnderApprox under_approximate(const CdfTable& table, double eps, int max_segments);

/// min_r (a_r x + c_r); throws DomainError for x < x_lb.
double evaluate_pwa(const PwaUnderApprox& pwa, double x);

} // namespace ecfcc
