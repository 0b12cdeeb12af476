#pragma once

#include <optional>
#include <vector>

namespace relaxals {

/// Per-iteration convergence record of a run. Entry 0 holds the error of the
/// starting point; entry ell the error after the ell-th sweep, together with
/// the relaxation parameter that produced it.
struct TraceEntry {
  int iter = 0;
  double err = 0.0;
  double omega_used = 1.0;
  std::optional<double> beta_sq_est;
};

struct ResidualTrace {
  std::vector<TraceEntry> entries;

  int size() const { return static_cast<int>(entries.size()); }
  const TraceEntry& back() const { return entries.back(); }

  void record(int iter, double err, double omega_used,
              std::optional<double> beta_sq_est = std::nullopt) {
    entries.push_back({iter, err, omega_used, beta_sq_est});
  }
};

}  // namespace relaxals
