#pragma once
// Sparse multivariate polynomials over a shared variable registry.
// Monomial order is graded lexicographic throughout; every container of
// terms or basis monomials is kept in that order so downstream SDP
// assembly is deterministic.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace seqbound::poly {

using VarId = std::int32_t;

// Coefficients with magnitude below this are dropped on normalisation.
inline constexpr double kDropTol = 1e-14;

class VariableRegistry {
 public:
  VarId add(const std::string& name);
  std::vector<VarId> add_block(const std::string& prefix, int count);
  VarId id(const std::string& name) const;         // throws if unknown
  std::optional<VarId> find(const std::string& name) const;
  const std::string& name(VarId v) const;
  int size() const { return static_cast<int>(names_.size()); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, VarId> index_;
};

// Product of variable powers, stored as (var, exponent) pairs sorted by
// variable id with strictly positive exponents. Default is the constant 1.
class Monomial {
 public:
  Monomial() = default;
  explicit Monomial(std::vector<std::pair<VarId, int>> factors);
  static Monomial var(VarId v, int e = 1);

  int degree() const;
  int exponent(VarId v) const;
  // Total degree counting only the listed variables.
  int degree_in(const std::vector<VarId>& vars) const;
  bool is_constant() const { return f_.empty(); }
  bool contains_only(const std::vector<VarId>& vars) const;

  Monomial operator*(const Monomial& o) const;
  bool operator==(const Monomial& o) const { return f_ == o.f_; }
  bool operator!=(const Monomial& o) const { return f_ != o.f_; }

  const std::vector<std::pair<VarId, int>>& factors() const { return f_; }
  double evaluate(const std::vector<double>& point) const;

  std::string str(const VariableRegistry& reg) const;
  static Monomial parse(const VariableRegistry& reg, const std::string& s);

 private:
  std::vector<std::pair<VarId, int>> f_;
};

// Graded lex: lower total degree first, ties broken lexicographically with
// smaller variable ids dominating.
struct GrlexLess {
  bool operator()(const Monomial& a, const Monomial& b) const;
};

class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(double c);
  explicit Polynomial(const Monomial& m, double c = 1.0);
  static Polynomial variable(VarId v) { return Polynomial(Monomial::var(v)); }

  Polynomial operator+(const Polynomial& o) const;
  Polynomial operator-(const Polynomial& o) const;
  Polynomial operator*(const Polynomial& o) const;
  Polynomial operator*(double c) const;
  Polynomial operator-() const { return *this * -1.0; }
  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);

  double coefficient(const Monomial& m) const;
  void add_term(const Monomial& m, double c);

  bool is_zero() const { return t_.empty(); }
  int degree() const;
  int degree_in(const std::vector<VarId>& vars) const;
  std::size_t term_count() const { return t_.size(); }
  double l1_norm() const;
  std::vector<VarId> variables() const;

  double evaluate(const std::vector<double>& point) const;
  Polynomial substitute(const std::map<VarId, Polynomial>& bind) const;
  Polynomial differentiate(VarId v) const;

  // Terms in graded-lex order.
  const std::map<Monomial, double, GrlexLess>& terms() const { return t_; }

  std::string str(const VariableRegistry& reg) const;

 private:
  void normalize();
  std::map<Monomial, double, GrlexLess> t_;
};

inline Polynomial operator*(double c, const Polynomial& p) { return p * c; }

// Monomial basis construction. Groups partition (a subset of) the
// variables; cap bounds the total degree within the group.
struct GroupSpec {
  std::vector<VarId> vars;
  int cap = 0;
};

// Extra cross products between two groups, used with union mode:
// {m_a * m_b : 1 <= deg(m_a) <= cap_a, 1 <= deg(m_b) <= cap_b}.
struct CrossSpec {
  int group_a = 0;
  int group_b = 0;
  int cap_a = 1;
  int cap_b = 1;
};

struct BasisSpec {
  std::vector<GroupSpec> groups;
  // Product mode (default): all monomials respecting every per-group cap
  // and, when total_cap >= 0, the total-degree cap.
  // Union mode: the union of the per-group bases plus listed cross terms.
  bool union_mode = false;
  int total_cap = -1;
  std::vector<CrossSpec> cross;
};

// Sorted (grlex), deduplicated; always contains the constant monomial.
std::vector<Monomial> monomial_basis(const BasisSpec& spec);

// All monomials in the given variables of total degree <= cap.
std::vector<Monomial> monomials_up_to(const std::vector<VarId>& vars, int cap);

std::vector<Monomial> merge_bases(const std::vector<std::vector<Monomial>>& bases);

}  // namespace seqbound::poly
