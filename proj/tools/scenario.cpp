#include "scenario.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <istream>
#include <numbers>
#include <sstream>

#include "lg/algebroid.hpp"
#include "lg/convolution.hpp"
#include "lg/deformation.hpp"
#include "lg/desing.hpp"
#include "lg/error.hpp"
#include "lg/groupoid.hpp"

#ifndef LG_VERSION
#define LG_VERSION "unknown"
#endif

namespace lg::cli {

namespace {

const std::vector<std::string> kGroupoidChecks = {"axioms", "algebroid_axioms", "tame"};

std::vector<std::string> with(std::vector<std::string> base, std::initializer_list<const char*> more) {
  for (const char* m : more) base.emplace_back(m);
  return base;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Shortest representation that round-trips.
std::string fmt(double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

// Values on one line: newlines would break the format.
std::string flat(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorKind::Scenario, what); }

}  // namespace

const std::vector<ConstructionInfo>& constructions() {
  static const std::vector<ConstructionInfo> list = {
      {"pair", "pair(R^n)", with(kGroupoidChecks, {"algebroid_iso", "convolution"})},
      {"pullback", "f^!!(pair(R^k)) along the projection R^(n+k) -> R^k", with(kGroupoidChecks, {"algebroid_iso"})},
      {"adiabatic", "pair(R^n)_ad with the R+* scaling action", with(kGroupoidChecks, {"morphism"})},
      {"edge", "E(S^(n-1) x R^k, pi, pair(R^k))", with(kGroupoidChecks, {"morphism"})},
      {"edge_ni", "E_ni(S^(n-1) x R^k, pi, pair(R^k))", with(kGroupoidChecks, {"morphism"})},
      {"desingularize", "[[pair(R^(n+k)):R^k]]",
       with(kGroupoidChecks, {"algebroid_iso", "morphism", "bracket_closure", "ideal"})},
      {"desingularize_ni", "[[pair(R^(n+k)):R^k]]_ni",
       with(kGroupoidChecks, {"algebroid_iso", "morphism", "bracket_closure", "ideal"})},
      {"hyperbolic", "[[pair(R^k x [0,inf)^n):R^k x 0]] along the corner face", with(kGroupoidChecks, {"morphism"})},
      {"edge_operator_demo", "kernels on [[pair(R^(n+k)):R^k]] over S and in the interior", {"convolution"}},
  };
  return list;
}

const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names = {"axioms",          "algebroid_axioms", "tame",  "algebroid_iso",
                                                 "morphism",        "bracket_closure",  "ideal", "convolution"};
  return names;
}

double default_tolerance(const std::string& check) {
  static const std::map<std::string, double> tol = {
      {"axioms", 1e-10},   {"algebroid_axioms", 1e-5}, {"tame", 0.0},  {"algebroid_iso", 1e-5},
      {"morphism", 1e-10}, {"bracket_closure", 1e-8},  {"ideal", 1e-6}, {"convolution", 1e-6},
  };
  const auto it = tol.find(check);
  if (it == tol.end()) bad("unknown check " + check);
  return it->second;
}

Scenario parse_scenario(std::istream& in) {
  Scenario s;
  std::string line;
  int no = 0;
  auto number = [&](const std::string& v, const std::string& key) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size()) bad("line " + std::to_string(no) + ": " + key + " expects a number, got '" + v + "'");
    return x;
  };
  auto integer = [&](const std::string& v, const std::string& key) {
    const double x = number(v, key);
    if (x != std::floor(x) || x < 0) bad("line " + std::to_string(no) + ": " + key + " expects a non-negative integer");
    return x;
  };
  while (std::getline(in, line)) {
    ++no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) bad("line " + std::to_string(no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key == "construction") {
      s.construction = value;
    } else if (key == "n") {
      s.n = static_cast<int>(integer(value, key));
    } else if (key == "k") {
      s.k = static_cast<int>(integer(value, key));
    } else if (key == "order") {
      s.order = static_cast<int>(integer(value, key));
    } else if (key == "R") {
      s.R = number(value, key);
    } else if (key == "samples") {
      s.samples = static_cast<std::size_t>(integer(value, key));
    } else if (key == "seed") {
      try {
        s.seed = std::stoull(value);
      } catch (const std::exception&) {
        bad("line " + std::to_string(no) + ": seed expects an unsigned 64-bit integer");
      }
    } else if (key == "checks") {
      s.checks.clear();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) s.checks.push_back(item);
      }
    } else if (key.rfind("tol.", 0) == 0) {
      s.tol[key.substr(4)] = number(value, key);
    } else if (key == "inject") {
      s.inject = value;
    } else {
      bad("line " + std::to_string(no) + ": unknown key '" + key + "'");
    }
  }
  return s;
}

void validate(const Scenario& s) {
  const auto& list = constructions();
  const auto it = std::find_if(list.begin(), list.end(), [&](const auto& c) { return c.name == s.construction; });
  if (it == list.end()) bad("unknown construction '" + s.construction + "'");
  if (s.checks.empty()) bad("no checks requested");
  for (const auto& c : s.checks) {
    default_tolerance(c);
    if (std::find(it->checks.begin(), it->checks.end(), c) == it->checks.end())
      bad("check '" + c + "' does not apply to " + s.construction);
  }
  for (const auto& [name, value] : s.tol) {
    default_tolerance(name);
    if (!(value >= 0.0)) bad("tolerance for " + name + " must be >= 0");
  }
  if (s.samples == 0) bad("samples must be positive");
  if (s.n < 1 || s.k < 0 || s.n + s.k > 6) bad("need n >= 1, k >= 0 and n + k <= 6");
  const bool along_L = s.construction.rfind("desingularize", 0) == 0 || s.construction.rfind("edge", 0) == 0;
  if (along_L && (s.n < 2 || s.k < 1)) bad(s.construction + " needs n >= 2 and k >= 1");
  if (s.construction == "hyperbolic" && s.k < 1) bad("hyperbolic needs k >= 1");
  if (s.construction == "pair" && s.n > 1 &&
      std::find(s.checks.begin(), s.checks.end(), "convolution") != s.checks.end())
    bad("the pair convolution check runs on pair(R) only (n = 1)");
  if (s.order < 2 || s.R <= 0.0) bad("need order >= 2 and R > 0");
  if (!s.inject.empty() && s.inject != "nontame_f" && s.inject != "corrupt_mul")
    bad("unknown injection '" + s.inject + "'");
  if (s.inject == "nontame_f" && s.construction != "edge" && s.construction != "edge_ni" &&
      s.construction != "pullback")
    bad("nontame_f applies to edge, edge_ni and pullback");
}

bool ScenarioReport::passed() const {
  if (error) return false;
  return std::all_of(checks.begin(), checks.end(), [](const CheckEntry& c) { return c.passed; });
}

namespace {

// Everything a check may need, filled by the construction step.
struct Built {
  GroupoidPtr G;
  std::optional<SmoothMap> f;  // pullback / edge map
  GroupoidPtr H;               // groupoid pulled back
  std::optional<AdiabaticGroupoid> ad;
  std::optional<EdgeModification> E, E_ni;
  std::optional<Desingularization> D;
  std::optional<GroupoidMorphism> psi;
};

ManifoldPtr sphere_times_lines(int n, int k) {
  ModelBlock b{{Factor::sphere(n - 1)}};
  for (int i = 0; i < k; ++i) b.factors.push_back(Factor::line());
  return make_manifold({b}, "S" + std::to_string(n - 1) + "xR" + std::to_string(k));
}

std::vector<int> range(int from, int count) {
  std::vector<int> v;
  for (int i = 0; i < count; ++i) v.push_back(from + i);
  return v;
}

// h(x, y) = x + y on [0, inf)^2: a submersion that is not tame at the corner.
SmoothMap nontame_sum() {
  SmoothMap h;
  h.domain = make_manifold({ModelBlock{{Factor::half(), Factor::half()}}}, "HxH");
  h.codomain = half_line();
  h.value = [](const JPoint& p) { return JPoint{0, {p.x[0] + p.x[1]}}; };
  h.name = "x+y";
  return h;
}

void require_tame(const SmoothMap& f, const Scenario& s) {
  const CheckReport rep = check_tame_submersion(f, {s.seed, 200});
  if (!rep.passed) throw Error(ErrorKind::Tameness, f.name + " is not a tame submersion", rep.witness);
}

Built build(const Scenario& s) {
  Built b;
  const std::string& c = s.construction;
  if (c == "pair") {
    b.G = pair_groupoid(euclidean(s.n, "R" + std::to_string(s.n)));
  } else if (c == "pullback") {
    if (s.inject == "nontame_f") {
      b.f = nontame_sum();
      b.H = pair_groupoid(half_line(), true);
      require_tame(*b.f, s);
    } else {
      auto L = euclidean(s.k, "R" + std::to_string(s.k));
      b.f = block_projection(euclidean(s.n + s.k), L, range(s.n, s.k), "pr");
      b.H = pair_groupoid(L);
    }
    b.G = pullback_groupoid(*b.f, b.H);
  } else if (c == "adiabatic") {
    b.ad = adiabatic_groupoid(pair_groupoid(euclidean(s.n, "R" + std::to_string(s.n))));
    b.G = b.ad->groupoid;
  } else if (c == "edge" || c == "edge_ni") {
    if (s.inject == "nontame_f") {
      b.f = nontame_sum();
      b.H = pair_groupoid(half_line(), true);
      require_tame(*b.f, s);
    } else {
      auto L = euclidean(s.k, "R" + std::to_string(s.k));
      b.f = block_projection(sphere_times_lines(s.n, s.k), L, range(1, s.k), "pi");
      b.H = pair_groupoid(L);
    }
    b.E = edge_modification(*b.f, b.H);
    b.E_ni = edge_modification_ni(*b.f, b.H);
    b.G = c == "edge" ? b.E->groupoid : b.E_ni->groupoid;
  } else if (c == "desingularize" || c == "desingularize_ni" || c == "edge_operator_demo") {
    if (c == "edge_operator_demo") return b;
    auto P = pair_groupoid(euclidean(s.n + s.k, "R" + std::to_string(s.n + s.k)));
    SliceSpec spec;
    spec.normal_factors = range(0, s.n);
    const TameSubmanifold L = tame_submanifold(P, spec);
    if (c == "desingularize") {
      b.D = desingularize(P, L);
    } else {
      auto N = desingularize_ni(P, L);
      b.D = N.desing;
      b.psi = N.psi;
    }
    b.G = b.D->groupoid;
  } else if (c == "hyperbolic") {
    ModelBlock blk;
    for (int i = 0; i < s.k; ++i) blk.factors.push_back(Factor::line());
    for (int i = 0; i < s.n; ++i) blk.factors.push_back(Factor::half());
    auto M = make_manifold({blk}, "R" + std::to_string(s.k) + "xH" + std::to_string(s.n));
    SliceSpec face{SliceSpec::Kind::Face, range(s.k, s.n)};
    b.D = hyperbolic_desingularize(pair_groupoid(M, true), face);
    b.G = b.D->groupoid;
  }
  if (s.inject == "corrupt_mul" && b.G) b.G = corrupt_multiplication(b.G, 1e-3);
  return b;
}

CheckEntry entry(const std::string& name, const CheckReport& rep, double tol) {
  CheckEntry e;
  e.name = name;
  e.passed = rep.passed;
  e.max_residual = rep.max_residual;
  e.tolerance = tol;
  e.samples = rep.samples;
  e.witness = rep.witness;
  e.notes = rep.notes;
  return e;
}

double normal_pdf(double x, double var) {
  return std::exp(-x * x / (2 * var)) / std::sqrt(2 * std::numbers::pi * var);
}

// Gaussian composition on pair(R) against the closed form, plus associativity.
CheckReport pair_convolution(const Scenario& s, double tol) {
  const auto P = pair_groupoid(euclidean(1));
  const auto q = fiber_quadrature(P, s.order, s.R);
  auto heat = [](double var) {
    return Kernel{"N(" + fmt(var) + ")", [var](const Point& g) { return normal_pdf(g.x[0] - g.x[1], var); }};
  };
  const Kernel a = heat(0.5), b = heat(0.8), c = heat(0.3);
  const Kernel ab = convolve(a, b, q);
  CheckReport rep = run_sampled("gaussian_composition", tol, s.samples, [&](std::size_t i) -> SampleOutcome {
    Rng rng(s.seed, i);
    const Point g{0, {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)}};
    return {std::fabs(ab.eval(g) - normal_pdf(g.x[0] - g.x[1], 1.3)), "g=" + format_vector(g.x)};
  });
  ConvolutionPlan plan;
  plan.seed = s.seed;
  plan.count = std::min<std::size_t>(s.samples, 40);
  plan.tol = tol;
  plan.arrows = [](Rng& rng, std::size_t) { return Point{0, {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)}}; };
  rep.merge(associativity_check(a, b, c, q, plan));
  return rep;
}

CheckReport run_check(const std::string& check, const Scenario& s, const Built& b) {
  const double tol = s.tol.count(check) ? s.tol.at(check) : default_tolerance(check);
  const std::string& c = s.construction;
  const AlgebroidPlan aplan{s.seed, s.samples, tol};

  if (check == "axioms") return axiom_suite(b.G, AxiomPlan{s.seed, s.samples, s.samples, tol});
  if (check == "algebroid_axioms") {
    CheckReport rep = check_algebroid_axioms(lie_algebroid_of(b.G), aplan);
    if (b.D)
      rep.merge(check_algebroid_axioms(b.D->anisotropic ? desing_algebroid_ni(b.D->L) : desing_algebroid(b.D->L), aplan));
    return rep;
  }
  if (check == "tame") {
    CheckReport rep = structure_tameness(b.G, {s.seed, s.samples});
    if (b.f) rep.merge(check_tame_submersion(*b.f, {s.seed, s.samples}));
    if (b.G->allow_corners)
      rep.notes.push_back("built with allow_corners: the input pair groupoid already has non-tame d at corners of depth >= 2");
    return rep;
  }
  if (check == "algebroid_iso") {
    if (c == "pair") {
      const FiberMap first_half = [](const JPoint&, const JVec& v) {
        return JVec(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2));
      };
      return check_algebroid_morphism(lie_algebroid_of(b.G), tangent_algebroid(b.G->units), first_half, aplan);
    }
    if (c == "pullback") {
      // Arrow vectors (fiber_r[n], y_r[k], y_d[k], fiber_d[n]) -> (y_r, y_d, fiber_r).
      const auto n = static_cast<std::ptrdiff_t>(s.n), k = static_cast<std::ptrdiff_t>(s.k);
      const FiberMap phi = [n, k](const JPoint&, const JVec& v) {
        JVec out(v.begin() + n, v.begin() + n + 2 * k);
        out.insert(out.end(), v.begin(), v.begin() + n);
        return out;
      };
      return check_algebroid_morphism(lie_algebroid_of(b.G), pullback_algebroid(*b.f, lie_algebroid_of(b.H)), phi,
                                      aplan);
    }
    IsoPlan plan;
    plan.seed = s.seed;
    plan.count = s.samples;
    plan.tol = tol;
    return check_desing_algebroid_iso(*b.D, plan);
  }
  if (check == "morphism") {
    const AxiomPlan mplan{s.seed, s.samples, s.samples, tol};
    if (c == "adiabatic") {
      const ScalingCheck sc = check_scaling_action(*b.ad, {0.5, 2.0, 10.0}, mplan, std::max(tol, 1e-8));
      CheckReport rep = sc.chart;
      rep.merge(sc.group_law);
      rep.merge(check_adiabatic_structure(*b.ad, mplan));
      return rep;
    }
    if (c == "edge" || c == "edge_ni") return morphism_suite(comparison_morphism(*b.E, *b.E_ni), mplan);
    CheckReport rep = check_desing_structure(*b.D, mplan);
    if (b.psi) rep.merge(morphism_suite(*b.psi, mplan));
    return rep;
  }
  if (check == "bracket_closure") {
    const AlgebroidPtr A = b.D->anisotropic ? desing_algebroid_ni(b.D->L) : desing_algebroid(b.D->L);
    return check_bracket_closure(A, b.D->L, aplan);
  }
  if (check == "ideal") {
    CheckReport rep = check_ideal_property(b.D->L, aplan, true);
    const CheckReport restricted = check_ideal_property(b.D->L, aplan, false);
    rep.notes.push_back("diagnostic: without the sphere-fiber part of X the residual is " +
                        fmt(restricted.max_residual));
    return rep;
  }
  if (check == "convolution") {
    if (c == "pair") return pair_convolution(s, tol);
    EdgeDemoPlan plan;
    plan.seed = s.seed;
    plan.count = s.samples;
    plan.order = s.order;
    plan.R = s.R;
    plan.tol = tol;
    return edge_operator_demo(s.n, s.k, plan);
  }
  bad("unhandled check " + check);
}

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

}  // namespace

ScenarioReport run(const Scenario& s) {
  ScenarioReport r;
  r.scenario = s;
  r.version = LG_VERSION;
  const auto t0 = Clock::now();
  try {
    validate(s);
    const Built b = build(s);
    for (const auto& check : s.checks) {
      const auto t1 = Clock::now();
      try {
        const double tol = s.tol.count(check) ? s.tol.at(check) : default_tolerance(check);
        CheckEntry e = entry(check, run_check(check, s, b), tol);
        e.seconds = since(t1);
        r.checks.push_back(std::move(e));
      } catch (const Error& err) {
        CheckEntry e;
        e.name = check;
        e.passed = false;
        e.tolerance = s.tol.count(check) ? s.tol.at(check) : default_tolerance(check);
        e.witness = err.witness();
        e.notes.push_back(flat(err.what()));
        e.seconds = since(t1);
        r.checks.push_back(std::move(e));
      }
    }
  } catch (const Error& err) {
    r.error = ErrorEntry{std::string(to_string(err.kind())), flat(err.what()), flat(err.witness())};
  }
  r.seconds = since(t0);
  return r;
}

std::string payload(const ScenarioReport& r) {
  const Scenario& s = r.scenario;
  std::ostringstream o;
  o << "format = lg-report/1\n";
  o << "library_version = " << r.version << "\n";
  o << "construction = " << s.construction << "\n";
  o << "n = " << s.n << "\n";
  o << "k = " << s.k << "\n";
  o << "order = " << s.order << "\n";
  o << "R = " << fmt(s.R) << "\n";
  o << "samples = " << s.samples << "\n";
  o << "seed = " << s.seed << "\n";
  if (!s.inject.empty()) o << "inject = " << s.inject << "\n";
  o << "checks = ";
  for (std::size_t i = 0; i < s.checks.size(); ++i) o << (i ? ", " : "") << s.checks[i];
  o << "\n";
  for (const auto& [name, value] : s.tol) o << "tol." << name << " = " << fmt(value) << "\n";
  for (const auto& c : r.checks) {
    const std::string p = "check." + c.name + ".";
    o << p << "verdict = " << (c.passed ? "pass" : "fail") << "\n";
    o << p << "max_residual = " << fmt(c.max_residual) << "\n";
    o << p << "tolerance = " << fmt(c.tolerance) << "\n";
    o << p << "samples = " << c.samples << "\n";
    o << p << "witness = " << flat(c.witness) << "\n";
    for (std::size_t i = 0; i < c.notes.size(); ++i) o << p << "note." << i << " = " << flat(c.notes[i]) << "\n";
  }
  if (r.error) {
    o << "error.kind = " << r.error->kind << "\n";
    o << "error.message = " << r.error->message << "\n";
    o << "error.witness = " << r.error->witness << "\n";
  }
  o << "status = " << (r.passed() ? "pass" : "fail") << "\n";
  return o.str();
}

std::string render(const ScenarioReport& r) {
  std::ostringstream o;
  o << payload(r);
  for (const auto& c : r.checks) o << "timing." << c.name << "_s = " << fmt(c.seconds) << "\n";
  o << "timing.total_s = " << fmt(r.seconds) << "\n";
  return o.str();
}

std::string summary(const ScenarioReport& r) {
  std::ostringstream o;
  char buf[64];
  for (const auto& c : r.checks) {
    std::snprintf(buf, sizeof buf, "%.3g (tol %.3g, %zu samples)", c.max_residual, c.tolerance, c.samples);
    o << (c.passed ? "PASS " : "FAIL ") << c.name << "  residual " << buf;
    if (!c.passed && !c.witness.empty()) o << "  witness " << flat(c.witness);
    o << "\n";
  }
  if (r.error) {
    o << "ERROR " << r.error->kind << ": " << r.error->message;
    if (!r.error->witness.empty()) o << "  witness " << r.error->witness;
    o << "\n";
  }
  o << (r.passed() ? "all checks passed" : "scenario failed") << "\n";
  return o.str();
}

}  // namespace lg::cli
