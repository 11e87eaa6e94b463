#include "lg/report.hpp"

#include <cmath>
#include <cstdio>

#include "lg/error.hpp"
#include "lg/parallel.hpp"

namespace lg {

void CheckReport::record(double residual, const std::string& where) {
  ++samples;
  if (std::isnan(residual)) residual = INFINITY;
  if (residual > max_residual) max_residual = residual;
  if (residual > tolerance && passed) {
    passed = false;
    witness = where;
  }
}

void CheckReport::fail(const std::string& why) {
  if (passed) witness = why;
  passed = false;
}

void CheckReport::merge(const CheckReport& other) {
  samples += other.samples;
  if (other.max_residual > max_residual) max_residual = other.max_residual;
  if (!other.passed && passed) {
    passed = false;
    witness = other.name.empty() ? other.witness : other.name + ": " + other.witness;
  }
  notes.insert(notes.end(), other.notes.begin(), other.notes.end());
}

CheckReport run_sampled(std::string name, double tolerance, std::size_t n,
                        const std::function<SampleOutcome(std::size_t)>& fn) {
  std::vector<SampleOutcome> out(n);
  parallel_for(n, [&](std::size_t i) {
    try {
      out[i] = fn(i);
    } catch (const Error& e) {
      out[i] = {INFINITY, e.what() + (e.witness().empty() ? std::string() : " at " + e.witness())};
    }
  });
  CheckReport rep;
  rep.name = std::move(name);
  rep.tolerance = tolerance;
  for (const auto& o : out) rep.record(o.residual, o.where);
  return rep;
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string format_vector(const Vec& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += format_double(v[i]);
  }
  return s + ")";
}

}  // namespace lg
