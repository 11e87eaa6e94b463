#include "lg/jet.hpp"

#include "lg/error.hpp"

namespace lg {

namespace detail {
int& jet_level() {
  thread_local int level = 0;
  return level;
}
}  // namespace detail

LevelGuard::LevelGuard() : level_(detail::jet_level()) {
  if (level_ >= kMaxLevels)
    throw Error(ErrorKind::Capability, "differentiation nested deeper than " +
                                           std::to_string(kMaxLevels) + " levels");
  ++detail::jet_level();
}

LevelGuard::~LevelGuard() { --detail::jet_level(); }

JVec directional(const std::function<JVec(const JVec&)>& f, std::span<const Jet> x,
                 std::span<const Jet> v) {
  LevelGuard guard;
  const Jet eps = Jet::infinitesimal(guard.level());
  JVec xe(x.begin(), x.end());
  for (std::size_t i = 0; i < xe.size(); ++i) xe[i] += eps * v[i];
  JVec y = f(xe);
  for (auto& yi : y) yi = yi.part(guard.level());
  return y;
}

Jet directional_scalar(const std::function<Jet(const JVec&)>& f, std::span<const Jet> x,
                       std::span<const Jet> v) {
  LevelGuard guard;
  const Jet eps = Jet::infinitesimal(guard.level());
  JVec xe(x.begin(), x.end());
  for (std::size_t i = 0; i < xe.size(); ++i) xe[i] += eps * v[i];
  return f(xe).part(guard.level());
}

std::vector<Vec> jacobian(const std::function<JVec(const JVec&)>& f, std::span<const double> x) {
  const JVec xj = lift(x);
  std::vector<Vec> rows;
  for (std::size_t j = 0; j < x.size(); ++j) {
    JVec e(x.size(), Jet(0.0));
    e[j] = 1.0;
    const JVec col = directional(f, xj, e);
    if (rows.empty()) rows.assign(col.size(), Vec(x.size(), 0.0));
    for (std::size_t i = 0; i < col.size(); ++i) rows[i][j] = col[i].value();
  }
  return rows;
}

}  // namespace lg
