#include "ecfcc/sandwich.hpp"

#include "ecfcc/error.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

namespace ecfcc {

namespace {

struct Chord
{
  int anchor;
  AffineSegment line;
};

/// Leftmost admissible chord ending at grid index `right`.
std::optional<Chord>
leftmost_chord(const Eigen::VectorXd& x,
               const Eigen::VectorXd& F,
               int right,
               double eps,
               double slack,
               double min_slope)
{
  for (int j = 0; j < right; ++j) {
    const double a = (F(right) - F(j)) / (x(right) - x(j));
    if (!(a > min_slope))
      continue;
    const double c = F(right) - a * x(right);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int k = j; k <= right; ++k) {
      const double e = F(k) - (a * x(k) + c);
      lo = std::min(lo, e);
      hi = std::max(hi, e);
      if (lo < -slack || hi > eps - slack)
        break;
    }
    if (lo < -slack)
      continue;
    const double shift = std::max(0.0, -lo);
    if (hi + shift > eps - slack)
      continue;
    AffineSegment line{ a, c - shift };
    // Re-evaluate in the form evaluate_pwa uses so rounding cannot leave
    // the chord a few ulps above the table.
    for (int k = j; k <= right; ++k) {
      const double e = F(k) - line(x(k));
      if (e < 0.0)
        line.intercept = std::nextafter(line.intercept - (-e), -std::numeric_limits<double>::infinity());
    }
    return Chord{ j, line };
  }
  return std::nullopt;
}

} // namespace

PwaUnderApprox
under_approximate(const CdfTable& table, double eps, int max_segments)
{
  const double slack = table.quad_tol;
  if (!(eps > 2.0 * slack) || !(eps > 0.0)) {
    std::ostringstream os;
    os << "PWA error bound " << eps << " must exceed twice the table tolerance " << slack;
    throw ToleranceError(os.str());
  }
  if (max_segments < 1)
    throw PreconditionError("segment budget must be >= 1");
  const auto& x = table.grid;
  const auto& F = table.values;
  const int np = table.size();
  if (np < 2 || F.size() != np)
    throw PreconditionError("CDF table needs at least two points");

  std::vector<AffineSegment> chords; // right to left
  int right = np - 1;
  double min_slope = 0.0;
  while (right > 0 && static_cast<int>(chords.size()) < max_segments) {
    const auto chord = leftmost_chord(x, F, right, eps, slack, min_slope);
    if (!chord || chord->anchor == right - 1)
      break;
    chords.push_back(chord->line);
    min_slope = chord->line.slope;
    right = chord->anchor;
  }
  if (chords.empty()) {
    std::ostringstream os;
    os << "no concave region at the right end of the CDF table: no chord ending at x = "
       << x(np - 1) << " spans more than one grid cell within [0, " << eps
       << "] (grid region [" << x(std::max(0, np - 3)) << ", " << x(np - 1) << "])";
    throw RestrictionError(os.str());
  }

  PwaUnderApprox out;
  out.segments.assign(chords.rbegin(), chords.rend());
  out.segments.push_back({ 0.0, F(np - 1) });
  out.x_lb = x(right);
  out.eps = eps;
  out.x_max = x(np - 1);
  return out;
}

double
evaluate_pwa(const PwaUnderApprox& pwa, double x)
{
  if (x < pwa.x_lb) {
    std::ostringstream os;
    os << "x = " << x << " lies left of the concave restriction x_lb = " << pwa.x_lb;
    throw DomainError(os.str());
  }
  double value = std::numeric_limits<double>::infinity();
  for (const auto& s : pwa.segments)
    value = std::min(value, s(x));
  return value;
}

} // namespace ecfcc
