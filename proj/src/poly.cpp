#include "seqbound/poly.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>
#include <stdexcept>

namespace seqbound::poly {

VarId VariableRegistry::add(const std::string& name) {
  auto it = index_.find(name);
  if (it != index_.end()) throw std::invalid_argument("duplicate variable: " + name);
  VarId v = static_cast<VarId>(names_.size());
  names_.push_back(name);
  index_.emplace(name, v);
  return v;
}

std::vector<VarId> VariableRegistry::add_block(const std::string& prefix, int count) {
  std::vector<VarId> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(add(prefix + std::to_string(i)));
  return out;
}

VarId VariableRegistry::id(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("unknown variable: " + name);
  return it->second;
}

std::optional<VarId> VariableRegistry::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& VariableRegistry::name(VarId v) const {
  if (v < 0 || v >= static_cast<VarId>(names_.size()))
    throw std::out_of_range("variable id out of range");
  return names_[v];
}

Monomial::Monomial(std::vector<std::pair<VarId, int>> factors) : f_(std::move(factors)) {
  std::sort(f_.begin(), f_.end());
  // merge repeated variables, drop zero exponents
  std::vector<std::pair<VarId, int>> merged;
  for (const auto& [v, e] : f_) {
    if (e < 0) throw std::invalid_argument("negative exponent");
    if (e == 0) continue;
    if (!merged.empty() && merged.back().first == v)
      merged.back().second += e;
    else
      merged.emplace_back(v, e);
  }
  f_ = std::move(merged);
}

Monomial Monomial::var(VarId v, int e) {
  return Monomial({{v, e}});
}

int Monomial::degree() const {
  int d = 0;
  for (const auto& [v, e] : f_) d += e;
  return d;
}

int Monomial::exponent(VarId v) const {
  for (const auto& [w, e] : f_)
    if (w == v) return e;
  return 0;
}

int Monomial::degree_in(const std::vector<VarId>& vars) const {
  int d = 0;
  for (const auto& [v, e] : f_)
    if (std::find(vars.begin(), vars.end(), v) != vars.end()) d += e;
  return d;
}

bool Monomial::contains_only(const std::vector<VarId>& vars) const {
  for (const auto& [v, e] : f_)
    if (std::find(vars.begin(), vars.end(), v) == vars.end()) return false;
  return true;
}

Monomial Monomial::operator*(const Monomial& o) const {
  std::vector<std::pair<VarId, int>> out;
  out.reserve(f_.size() + o.f_.size());
  auto a = f_.begin();
  auto b = o.f_.begin();
  while (a != f_.end() || b != o.f_.end()) {
    if (b == o.f_.end() || (a != f_.end() && a->first < b->first)) {
      out.push_back(*a++);
    } else if (a == f_.end() || b->first < a->first) {
      out.push_back(*b++);
    } else {
      out.emplace_back(a->first, a->second + b->second);
      ++a;
      ++b;
    }
  }
  Monomial m;
  m.f_ = std::move(out);
  return m;
}

double Monomial::evaluate(const std::vector<double>& point) const {
  double r = 1.0;
  for (const auto& [v, e] : f_) {
    if (v >= static_cast<VarId>(point.size()))
      throw std::out_of_range("evaluation point too short");
    double base = point[v];
    for (int i = 0; i < e; ++i) r *= base;
  }
  return r;
}

std::string Monomial::str(const VariableRegistry& reg) const {
  if (f_.empty()) return "1";
  std::ostringstream os;
  bool first = true;
  for (const auto& [v, e] : f_) {
    if (!first) os << "*";
    first = false;
    os << reg.name(v);
    if (e > 1) os << "^" << e;
  }
  return os.str();
}

Monomial Monomial::parse(const VariableRegistry& reg, const std::string& s) {
  if (s == "1" || s.empty()) return Monomial();
  std::vector<std::pair<VarId, int>> factors;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t star = s.find('*', pos);
    std::string tok = s.substr(pos, star == std::string::npos ? std::string::npos : star - pos);
    pos = star == std::string::npos ? s.size() : star + 1;
    int e = 1;
    std::size_t caret = tok.find('^');
    if (caret != std::string::npos) {
      e = std::atoi(tok.c_str() + caret + 1);
      tok = tok.substr(0, caret);
    }
    factors.emplace_back(reg.id(tok), e);
  }
  return Monomial(std::move(factors));
}

bool GrlexLess::operator()(const Monomial& a, const Monomial& b) const {
  int da = a.degree(), db = b.degree();
  if (da != db) return da < db;
  // lexicographic on the sparse factor lists: smaller variable id with a
  // larger exponent sorts first
  auto ia = a.factors().begin();
  auto ib = b.factors().begin();
  while (ia != a.factors().end() && ib != b.factors().end()) {
    if (ia->first != ib->first) return ia->first < ib->first;
    if (ia->second != ib->second) return ia->second > ib->second;
    ++ia;
    ++ib;
  }
  return false;  // equal
}

Polynomial::Polynomial(double c) {
  if (std::abs(c) >= kDropTol) t_.emplace(Monomial(), c);
}

Polynomial::Polynomial(const Monomial& m, double c) {
  if (std::abs(c) >= kDropTol) t_.emplace(m, c);
}

void Polynomial::normalize() {
  for (auto it = t_.begin(); it != t_.end();) {
    if (std::abs(it->second) < kDropTol)
      it = t_.erase(it);
    else
      ++it;
  }
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
  Polynomial r = *this;
  r += o;
  return r;
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  for (const auto& [m, c] : o.t_) t_[m] += c;
  normalize();
  return *this;
}

Polynomial Polynomial::operator-(const Polynomial& o) const {
  Polynomial r = *this;
  r -= o;
  return r;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  for (const auto& [m, c] : o.t_) t_[m] -= c;
  normalize();
  return *this;
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
  Polynomial r;
  for (const auto& [ma, ca] : t_)
    for (const auto& [mb, cb] : o.t_) r.t_[ma * mb] += ca * cb;
  r.normalize();
  return r;
}

Polynomial Polynomial::operator*(double c) const {
  Polynomial r;
  for (const auto& [m, v] : t_) r.t_[m] = v * c;
  r.normalize();
  return r;
}

double Polynomial::coefficient(const Monomial& m) const {
  auto it = t_.find(m);
  return it == t_.end() ? 0.0 : it->second;
}

void Polynomial::add_term(const Monomial& m, double c) {
  t_[m] += c;
  if (std::abs(t_[m]) < kDropTol) t_.erase(m);
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& [m, c] : t_) d = std::max(d, m.degree());
  return d;
}

int Polynomial::degree_in(const std::vector<VarId>& vars) const {
  int d = 0;
  for (const auto& [m, c] : t_) d = std::max(d, m.degree_in(vars));
  return d;
}

double Polynomial::l1_norm() const {
  double s = 0;
  for (const auto& [m, c] : t_) s += std::abs(c);
  return s;
}

std::vector<VarId> Polynomial::variables() const {
  std::set<VarId> vs;
  for (const auto& [m, c] : t_)
    for (const auto& [v, e] : m.factors()) vs.insert(v);
  return {vs.begin(), vs.end()};
}

double Polynomial::evaluate(const std::vector<double>& point) const {
  double s = 0;
  for (const auto& [m, c] : t_) s += c * m.evaluate(point);
  return s;
}

Polynomial Polynomial::substitute(const std::map<VarId, Polynomial>& bind) const {
  // power cache per substituted variable
  std::map<VarId, std::vector<Polynomial>> pows;
  auto power = [&](VarId v, int e) -> const Polynomial& {
    auto& seq = pows[v];
    if (seq.empty()) seq.push_back(Polynomial(1.0));
    while (static_cast<int>(seq.size()) <= e) seq.push_back(seq.back() * bind.at(v));
    return seq[e];
  };
  Polynomial out;
  for (const auto& [m, c] : t_) {
    Polynomial term(c);
    Monomial untouched;
    for (const auto& [v, e] : m.factors()) {
      if (bind.count(v))
        term = term * power(v, e);
      else
        untouched = untouched * Monomial::var(v, e);
    }
    out += term * Polynomial(untouched);
  }
  return out;
}

Polynomial Polynomial::differentiate(VarId v) const {
  Polynomial out;
  for (const auto& [m, c] : t_) {
    int e = m.exponent(v);
    if (e == 0) continue;
    std::vector<std::pair<VarId, int>> fs;
    for (const auto& [w, k] : m.factors()) {
      if (w == v) {
        if (k > 1) fs.emplace_back(w, k - 1);
      } else {
        fs.emplace_back(w, k);
      }
    }
    out.add_term(Monomial(std::move(fs)), c * e);
  }
  return out;
}

std::string Polynomial::str(const VariableRegistry& reg) const {
  if (t_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [m, c] : t_) {
    if (!first) os << (c >= 0 ? " + " : " - ");
    else if (c < 0) os << "-";
    first = false;
    double a = std::abs(c);
    if (m.is_constant()) {
      os << a;
    } else {
      if (a != 1.0) os << a << "*";
      os << m.str(reg);
    }
  }
  return os.str();
}

namespace {

void enumerate_up_to(const std::vector<VarId>& vars, int cap, std::size_t i,
                     Monomial cur, std::vector<Monomial>& out) {
  if (i == vars.size()) {
    out.push_back(cur);
    return;
  }
  int used = cur.degree();
  for (int e = 0; e + used <= cap; ++e) {
    enumerate_up_to(vars, cap, i + 1, e == 0 ? cur : cur * Monomial::var(vars[i], e), out);
  }
}

std::vector<Monomial> sorted_unique(std::vector<Monomial> ms) {
  std::sort(ms.begin(), ms.end(), GrlexLess{});
  ms.erase(std::unique(ms.begin(), ms.end()), ms.end());
  return ms;
}

}  // namespace

std::vector<Monomial> monomials_up_to(const std::vector<VarId>& vars, int cap) {
  std::vector<Monomial> out;
  enumerate_up_to(vars, cap, 0, Monomial(), out);
  return sorted_unique(std::move(out));
}

std::vector<Monomial> monomial_basis(const BasisSpec& spec) {
  std::vector<std::vector<Monomial>> group_bases;
  group_bases.reserve(spec.groups.size());
  for (const auto& g : spec.groups) group_bases.push_back(monomials_up_to(g.vars, g.cap));

  std::vector<Monomial> out;
  if (spec.union_mode) {
    out.push_back(Monomial());
    for (const auto& gb : group_bases) out.insert(out.end(), gb.begin(), gb.end());
    for (const auto& x : spec.cross) {
      auto as = monomials_up_to(spec.groups.at(x.group_a).vars, x.cap_a);
      auto bs = monomials_up_to(spec.groups.at(x.group_b).vars, x.cap_b);
      for (const auto& a : as) {
        if (a.is_constant()) continue;
        for (const auto& b : bs) {
          if (b.is_constant()) continue;
          out.push_back(a * b);
        }
      }
    }
  } else {
    out.push_back(Monomial());
    for (const auto& gb : group_bases) {
      std::vector<Monomial> next;
      next.reserve(out.size() * gb.size());
      for (const auto& m : out)
        for (const auto& g : gb) {
          Monomial prod = m * g;
          if (spec.total_cap >= 0 && prod.degree() > spec.total_cap) continue;
          next.push_back(prod);
        }
      out = std::move(next);
    }
  }
  return sorted_unique(std::move(out));
}

std::vector<Monomial> merge_bases(const std::vector<std::vector<Monomial>>& bases) {
  std::vector<Monomial> out;
  for (const auto& b : bases) out.insert(out.end(), b.begin(), b.end());
  return sorted_unique(std::move(out));
}

}  // namespace seqbound::poly
