#include "seqbound/sets.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace seqbound::sets {

SemialgebraicSet::SemialgebraicSet(std::vector<VarId> v) : vars(std::move(v)) {
  std::sort(vars.begin(), vars.end());
  bounds.assign(vars.size(), {-1.0, 1.0});
}

void SemialgebraicSet::set_bound(VarId v, double lo, double hi) {
  auto it = std::find(vars.begin(), vars.end(), v);
  if (it == vars.end()) throw std::invalid_argument("set_bound: variable not in set");
  bounds[it - vars.begin()] = {lo, hi};
}

SemialgebraicSet SemialgebraicSet::product(const SemialgebraicSet& o) const {
  SemialgebraicSet r;
  r.vars = vars;
  r.bounds = bounds;
  for (std::size_t i = 0; i < o.vars.size(); ++i) {
    auto it = std::find(r.vars.begin(), r.vars.end(), o.vars[i]);
    if (it != r.vars.end()) continue;  // shared variable keeps first bound
    r.vars.push_back(o.vars[i]);
    r.bounds.push_back(o.bounds[i]);
  }
  // keep vars ascending with bounds aligned
  std::vector<std::size_t> idx(r.vars.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return r.vars[a] < r.vars[b]; });
  std::vector<VarId> vs;
  std::vector<std::pair<double, double>> bs;
  for (auto i : idx) {
    vs.push_back(r.vars[i]);
    bs.push_back(r.bounds[i]);
  }
  r.vars = std::move(vs);
  r.bounds = std::move(bs);
  r.ineqs = ineqs;
  r.ineqs.insert(r.ineqs.end(), o.ineqs.begin(), o.ineqs.end());
  r.eqs = eqs;
  r.eqs.insert(r.eqs.end(), o.eqs.begin(), o.eqs.end());
  return r;
}

double SemialgebraicSet::monomial_sup(const poly::Monomial& m) const {
  double s = 1.0;
  for (const auto& [v, e] : m.factors()) {
    auto it = std::find(vars.begin(), vars.end(), v);
    double mag = 1.0;
    if (it != vars.end()) {
      const auto& [lo, hi] = bounds[it - vars.begin()];
      mag = std::max(std::abs(lo), std::abs(hi));
    }
    for (int i = 0; i < e; ++i) s *= mag;
  }
  return s;
}

double SemialgebraicSet::l1_sup(const Polynomial& p) const {
  double s = 0;
  for (const auto& [m, c] : p.terms()) s += std::abs(c) * monomial_sup(m);
  return s;
}

bool SemialgebraicSet::contains(const std::vector<double>& point, double tol) const {
  if (point.size() != vars.size())
    throw std::invalid_argument("contains: point size does not match variable count");
  // translate the positional point to a VarId-indexed buffer for evaluation
  VarId top = vars.empty() ? 0 : vars.back() + 1;
  std::vector<double> buf(top, 0.0);
  for (std::size_t i = 0; i < vars.size(); ++i) buf[vars[i]] = point[i];
  for (const auto& g : ineqs)
    if (g.evaluate(buf) < -tol) return false;
  for (const auto& h : eqs)
    if (std::abs(h.evaluate(buf)) > tol) return false;
  return true;
}

SemialgebraicSet simplex(const std::vector<VarId>& vars, bool with_sum_eq) {
  SemialgebraicSet s(vars);
  Polynomial sum;
  for (VarId v : vars) {
    s.add_ineq(Polynomial::variable(v));
    sum += Polynomial::variable(v);
  }
  s.add_ineq(Polynomial(1.0) - sum);
  if (with_sum_eq) s.add_eq(sum - Polynomial(1.0));
  for (VarId v : vars) s.set_bound(v, 0.0, 1.0);
  return s;
}

SemialgebraicSet box(const std::vector<VarId>& vars, double lo, double hi) {
  SemialgebraicSet s(vars);
  for (VarId v : vars) {
    s.add_ineq(Polynomial::variable(v) - Polynomial(lo));
    s.add_ineq(Polynomial(hi) - Polynomial::variable(v));
    s.set_bound(v, lo, hi);
  }
  return s;
}

SemialgebraicSet ball(const std::vector<VarId>& vars, double radius) {
  SemialgebraicSet s(vars);
  Polynomial sq;
  for (VarId v : vars) sq += Polynomial::variable(v) * Polynomial::variable(v);
  s.add_ineq(Polynomial(radius * radius) - sq);
  for (VarId v : vars) s.set_bound(v, -radius, radius);
  return s;
}

}  // namespace seqbound::sets
