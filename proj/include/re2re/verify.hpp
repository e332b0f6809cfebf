#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "re2re/rng.hpp"
#include "re2re/separator.hpp"
#include "re2re/tape.hpp"

// Property suite behind `re2re verify`: algebraic identities, gradient checks
// and sampler statistics that must hold on any build.

namespace re2re {

struct PropertyResult {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  /// Report-only entries never fail the suite.
  bool gated = true;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyOptions {
  std::uint64_t seed = 0;
  /// Corrupts the backward rule of one op kind on every tape the suite builds.
  std::optional<diff::Op> fault_op;
  double fault_factor = 1.5;
  SeparatorConfig model;
  /// Random parameter points per loss in the separator gradient checks.
  std::size_t gradient_points = 10;
};

/// Builds a scalar from leaves on a fresh tape.
using ScalarFn = std::function<diff::Var(diff::Tape& tape, const std::vector<diff::Var>& leaves)>;

struct GradientCheck {
  double max_rel_error = 0.0;
  std::size_t probes = 0;
  std::size_t rejected = 0;  // probes that straddled an activation kink
};

struct GradientProbeOptions {
  double step = 1e-5;
  std::size_t random_directions = 3;
  /// Also probe the largest-gradient coordinate of each of these index ranges.
  std::vector<std::pair<std::size_t, std::size_t>> coordinate_ranges;
  std::optional<diff::Op> fault_op;
  double fault_factor = 1.0;
};

/// Central differences along random unit directions (and selected coordinates)
/// of leaf `wrt` against the reverse-mode gradient. Relative error
/// |a - f| / max(|a|, |f|, 1e-12) per probe. Probes whose two evaluation points
/// put any relu/prelu output on different sides of zero are redrawn.
GradientCheck check_gradient(const ScalarFn& fn, const std::vector<Tensor>& leaves, std::size_t wrt, Rng& rng,
                             const GradientProbeOptions& options = {});

/// Every property, in a fixed order.
std::vector<PropertyResult> run_property_suite(const VerifyOptions& options);

bool all_passed(const std::vector<PropertyResult>& results);
std::string format_results(const std::vector<PropertyResult>& results);

/// Upper tail of the chi-square distribution for odd degrees of freedom.
double chi_square_sf_odd(double x, unsigned dof);

}  // namespace re2re
