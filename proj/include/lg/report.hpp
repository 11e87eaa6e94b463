#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "lg/jet.hpp"

namespace lg {

/// Verdict of one sampled property check.
struct CheckReport {
  std::string name;
  bool passed = true;
  double max_residual = 0.0;
  double tolerance = 0.0;
  std::size_t samples = 0;
  std::string witness;  // first failing sample, empty on pass
  std::vector<std::string> notes;

  /// Fold a residual in; the first residual above tolerance becomes the witness.
  void record(double residual, const std::string& where = {});
  void fail(const std::string& why);
  void merge(const CheckReport& other);
};

/// Result of one sample in a sampled check.
struct SampleOutcome {
  double residual = 0.0;
  std::string where;
};

/// Evaluates fn(i) for i in [0, n) in parallel and folds the outcomes in
/// index order. Library errors thrown by a sample count as failures.
CheckReport run_sampled(std::string name, double tolerance, std::size_t n,
                        const std::function<SampleOutcome(std::size_t)>& fn);

std::string format_vector(const Vec& v);
std::string format_double(double x);

}  // namespace lg
