#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "pihnn/network.hpp"

namespace pihnn {

/// Target functions for the shallow-approximation demo, all holomorphic on a
/// neighbourhood of the closed unit disk.
enum class ApproxTarget { InvShift, Exp };

ApproxTarget approx_target_from_string(std::string_view name);
/// Taylor coefficients g_k at 0, k < n.
std::vector<C64> approx_taylor(ApproxTarget target, int n);
C64 approx_exact(ApproxTarget target, C64 z);

struct ApproxRow {
  int n = 0;
  double sup_error = 0.0;
  double max_abs_a = 0.0;
  double max_abs_c = 0.0;
  double solve_discrepancy = 0.0;
};

/// Sup error of the constructive approximator over 100 radii x 100 angles on
/// the closed unit disk, for n = 4, 8, ..., n_max.
std::vector<ApproxRow> approx_sweep(ApproxTarget target, int n_max);

/// Entry point of the command-line tool. Returns the process exit code;
/// diagnostics go to `err`.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pihnn
