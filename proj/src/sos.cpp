#include "seqbound/sos.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace seqbound::sos {

using json = nlohmann::json;

VarPoly VarPoly::decision(int var, Polynomial coeff) {
  VarPoly p;
  p.comps[var] = std::move(coeff);
  return p;
}

VarPoly VarPoly::parametric(conic::ConicProblem& prog, const std::vector<Monomial>& basis,
                            std::vector<int>* coeff_vars) {
  VarPoly p;
  for (const auto& m : basis) {
    int v = prog.add_free();
    p.comps[v] = Polynomial(m);
    if (coeff_vars) coeff_vars->push_back(v);
  }
  return p;
}

VarPoly& VarPoly::operator+=(const VarPoly& o) {
  base += o.base;
  for (const auto& [v, c] : o.comps) {
    auto& slot = comps[v];
    slot += c;
    if (slot.is_zero()) comps.erase(v);
  }
  return *this;
}

VarPoly& VarPoly::operator-=(const VarPoly& o) {
  base -= o.base;
  for (const auto& [v, c] : o.comps) {
    auto& slot = comps[v];
    slot -= c;
    if (slot.is_zero()) comps.erase(v);
  }
  return *this;
}

VarPoly& VarPoly::operator*=(double c) {
  base = base * c;
  for (auto& [v, p] : comps) p = p * c;
  return *this;
}

VarPoly operator*(const VarPoly& a, const Polynomial& p) {
  VarPoly r;
  r.base = a.base * p;
  for (const auto& [v, c] : a.comps) {
    Polynomial q = c * p;
    if (!q.is_zero()) r.comps[v] = std::move(q);
  }
  return r;
}

VarPoly VarPoly::substitute(const std::map<VarId, Polynomial>& repl) const {
  VarPoly r;
  r.base = base.substitute(repl);
  for (const auto& [v, c] : comps) {
    Polynomial q = c.substitute(repl);
    if (!q.is_zero()) r.comps[v] = std::move(q);
  }
  return r;
}

Polynomial VarPoly::evaluate_decision(const std::vector<double>& free_vars) const {
  Polynomial p = base;
  for (const auto& [v, c] : comps) {
    if (v < 0 || static_cast<std::size_t>(v) >= free_vars.size())
      throw std::out_of_range("VarPoly: decision variable outside solution vector");
    p += c * free_vars[v];
  }
  return p;
}

int VarPoly::degree() const {
  int d = base.degree();
  for (const auto& [v, c] : comps) d = std::max(d, c.degree());
  return d;
}

std::vector<Monomial> VarPoly::support() const {
  std::vector<Monomial> out;
  for (const auto& [m, c] : base.terms()) out.push_back(m);
  for (const auto& [v, p] : comps)
    for (const auto& [m, c] : p.terms()) out.push_back(m);
  std::sort(out.begin(), out.end(), poly::GrlexLess{});
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

CertificateTemplate make_template(const sets::SemialgebraicSet& S, const TemplateOptions& opt) {
  CertificateTemplate t;
  const int n = static_cast<int>(S.ineqs.size());
  std::vector<int> subset;
  // subsets of the inequality indices in size order, lexicographic within size
  auto emit = [&]() {
    Polynomial prod(1.0);
    for (int i : subset) prod = prod * S.ineqs[i];
    int remaining = opt.degree - prod.degree();
    std::vector<Monomial> basis;
    if (opt.basis_fn) {
      basis = opt.basis_fn(subset, remaining);
    } else if (remaining >= 0) {
      basis = poly::monomials_up_to(S.vars, remaining / 2);
    }
    if (!basis.empty()) t.products.push_back({subset, std::move(basis)});
  };
  std::function<void(int, int)> rec = [&](int start, int left) {
    if (left == 0) {
      emit();
      return;
    }
    for (int i = start; i < n; ++i) {
      subset.push_back(i);
      rec(i + 1, left - 1);
      subset.pop_back();
    }
  };
  for (int size = 0; size <= opt.depth; ++size) rec(0, size);

  for (int j = 0; j < static_cast<int>(S.eqs.size()); ++j) {
    int d = j < static_cast<int>(opt.eq_degrees.size()) ? opt.eq_degrees[j]
                                                        : opt.degree - S.eqs[j].degree();
    if (d < 0) continue;
    t.eq_terms.push_back({j, poly::monomials_up_to(S.vars, d)});
  }
  return t;
}

CertificateTemplate putinar_template(const sets::SemialgebraicSet& S, int degree) {
  TemplateOptions o;
  o.degree = degree;
  o.depth = 1;
  return make_template(S, o);
}

CertificateTemplate schmuedgen_template(const sets::SemialgebraicSet& S, int degree, int depth) {
  TemplateOptions o;
  o.degree = degree;
  o.depth = depth;
  return make_template(S, o);
}

namespace {

std::string raw_label(const Monomial& m) {
  if (m.is_constant()) return "1";
  std::ostringstream os;
  bool first = true;
  for (const auto& [v, e] : m.factors()) {
    if (!first) os << "*";
    first = false;
    os << "v" << v;
    if (e > 1) os << "^" << e;
  }
  return os.str();
}

struct RowAcc {
  std::map<int, double> lin;
  std::vector<conic::ConicProblem::MatTerm> mat;
  double rhs = 0;
};

}  // namespace

Compiled compile(const VarPoly& target, const sets::SemialgebraicSet& S,
                 const CertificateTemplate& tmpl, conic::ConicProblem& prog,
                 const std::string& label) {
  Compiled out;
  std::map<Monomial, RowAcc, poly::GrlexLess> rows;

  for (const auto& [m, c] : target.base.terms()) rows[m].rhs = -c;
  for (const auto& [v, p] : target.comps)
    for (const auto& [m, c] : p.terms()) rows[m].lin[v] += c;

  for (const auto& pt : tmpl.products) {
    Compiled::Term term;
    term.ineq_indices = pt.ineq_indices;
    term.basis = pt.basis;
    term.product = Polynomial(1.0);
    for (int i : pt.ineq_indices) {
      if (i < 0 || i >= static_cast<int>(S.ineqs.size()))
        throw std::out_of_range("sos::compile: inequality index out of range");
      term.product = term.product * S.ineqs[i];
    }
    const int dim = static_cast<int>(pt.basis.size());
    term.block = prog.add_psd_block(dim);
    for (int i = 0; i < dim; ++i) {
      for (int j = i; j < dim; ++j) {
        Polynomial pm = term.product * Polynomial(pt.basis[i] * pt.basis[j]);
        double fold = i == j ? 1.0 : 2.0;
        for (const auto& [m, c] : pm.terms())
          rows[m].mat.push_back({term.block, i, j, -fold * c});
      }
    }
    out.terms.push_back(std::move(term));
  }

  for (const auto& et : tmpl.eq_terms) {
    if (et.eq_index < 0 || et.eq_index >= static_cast<int>(S.eqs.size()))
      throw std::out_of_range("sos::compile: equality index out of range");
    Compiled::EqMult em;
    em.eq_index = et.eq_index;
    em.basis = et.basis;
    for (const auto& bm : et.basis) {
      int cv = prog.add_free();
      em.coeff_vars.push_back(cv);
      Polynomial pm = S.eqs[et.eq_index] * Polynomial(bm);
      for (const auto& [m, c] : pm.terms()) rows[m].lin[cv] -= c;
    }
    out.eq_mults.push_back(std::move(em));
  }

  std::vector<std::string> unmatched;
  out.first_row = static_cast<int>(prog.rows.size());
  for (auto& [m, acc] : rows) {
    bool empty = acc.mat.empty();
    if (empty)
      for (const auto& [v, c] : acc.lin)
        if (std::abs(c) > poly::kDropTol) empty = false;
    if (empty) {
      if (std::abs(acc.rhs) > 1e-12) unmatched.push_back(raw_label(m));
      continue;
    }
    conic::ConicProblem::Row row;
    row.kind = conic::ConicProblem::RowKind::Eq;
    for (const auto& [v, c] : acc.lin)
      if (std::abs(c) > poly::kDropTol) row.lin.push_back({v, c});
    row.mat = std::move(acc.mat);
    row.rhs = acc.rhs;
    row.label = label + "[" + raw_label(m) + "]";
    prog.rows.push_back(std::move(row));
  }
  out.num_rows = static_cast<int>(prog.rows.size()) - out.first_row;

  if (!unmatched.empty()) {
    std::ostringstream os;
    os << "sos::compile(" << label << "): template cannot produce monomial(s)";
    std::size_t shown = std::min<std::size_t>(unmatched.size(), 10);
    for (std::size_t i = 0; i < shown; ++i) os << " " << unmatched[i];
    if (unmatched.size() > shown) os << " (+" << unmatched.size() - shown << " more)";
    throw std::runtime_error(os.str());
  }
  return out;
}

Certificate extract(const Compiled& c, const conic::SdpSolution& sol) {
  Certificate cert;
  for (const auto& t : c.terms) {
    Certificate::Term ct;
    ct.ineq_indices = t.ineq_indices;
    ct.basis = t.basis;
    ct.gram = sol.blocks.at(t.block);
    cert.terms.push_back(std::move(ct));
  }
  for (const auto& em : c.eq_mults) {
    Certificate::EqMult m;
    m.eq_index = em.eq_index;
    for (std::size_t k = 0; k < em.basis.size(); ++k)
      m.mult.add_term(em.basis[k], sol.free.at(em.coeff_vars[k]));
    cert.eq_mults.push_back(std::move(m));
  }
  return cert;
}

Polynomial reconstruct(const Certificate& cert, const sets::SemialgebraicSet& S) {
  Polynomial total;
  for (const auto& t : cert.terms) {
    Polynomial prod(1.0);
    for (int i : t.ineq_indices) prod = prod * S.ineqs.at(i);
    Polynomial quad;
    const int n = static_cast<int>(t.basis.size());
    for (int i = 0; i < n; ++i) {
      quad.add_term(t.basis[i] * t.basis[i], t.gram(i, i));
      for (int j = i + 1; j < n; ++j) quad.add_term(t.basis[i] * t.basis[j], 2.0 * t.gram(i, j));
    }
    total += prod * quad;
  }
  for (const auto& em : cert.eq_mults) total += em.mult * S.eqs.at(em.eq_index);
  return total;
}

VerifyReport verify(const Certificate& cert, const Polynomial& target,
                    const sets::SemialgebraicSet& S) {
  VerifyReport r;
  Polynomial mismatch = target - reconstruct(cert, S);
  r.mismatch_sup = S.l1_sup(mismatch);
  r.min_gram_eig = 0;
  for (const auto& t : cert.terms) {
    if (t.basis.empty()) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t.gram, Eigen::EigenvaluesOnly);
    double lmin = es.eigenvalues().minCoeff();
    r.min_gram_eig = std::min(r.min_gram_eig, lmin);
    if (lmin < 0) {
      Polynomial prod(1.0);
      for (int i : t.ineq_indices) prod = prod * S.ineqs.at(i);
      double bsq = 0;
      for (const auto& b : t.basis) bsq += S.monomial_sup(b * b);
      r.gram_penalty += -lmin * S.l1_sup(prod) * bsq;
    }
  }
  r.delta = r.mismatch_sup + r.gram_penalty;
  return r;
}

std::string certificate_to_json(const Certificate& cert, const poly::VariableRegistry& reg) {
  json terms = json::array();
  for (const auto& t : cert.terms) {
    json b = json::array();
    for (const auto& m : t.basis) b.push_back(m.str(reg));
    json g = json::array();
    for (Eigen::Index i = 0; i < t.gram.rows(); ++i)
      for (Eigen::Index j = 0; j < t.gram.cols(); ++j) g.push_back(t.gram(i, j));
    terms.push_back({{"ineq_indices", t.ineq_indices}, {"basis", b}, {"gram", g}});
  }
  json mults = json::array();
  for (const auto& em : cert.eq_mults) {
    json coeffs = json::array();
    for (const auto& [m, c] : em.mult.terms()) coeffs.push_back({m.str(reg), c});
    mults.push_back({{"eq_index", em.eq_index}, {"coeffs", coeffs}});
  }
  return json{{"terms", terms}, {"eq_mults", mults}}.dump(2);
}

Certificate certificate_from_json(const std::string& text, const poly::VariableRegistry& reg) {
  json j = json::parse(text);
  Certificate cert;
  for (const auto& t : j.at("terms")) {
    Certificate::Term ct;
    ct.ineq_indices = t.at("ineq_indices").get<std::vector<int>>();
    for (const auto& s : t.at("basis")) ct.basis.push_back(Monomial::parse(reg, s.get<std::string>()));
    const int n = static_cast<int>(ct.basis.size());
    const auto& g = t.at("gram");
    if (static_cast<int>(g.size()) != n * n)
      throw std::runtime_error("certificate_from_json: gram size mismatch");
    ct.gram.resize(n, n);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) ct.gram(i, k) = g.at(i * n + k).get<double>();
    cert.terms.push_back(std::move(ct));
  }
  for (const auto& em : j.at("eq_mults")) {
    Certificate::EqMult m;
    m.eq_index = em.at("eq_index").get<int>();
    for (const auto& pair : em.at("coeffs"))
      m.mult.add_term(Monomial::parse(reg, pair.at(0).get<std::string>()), pair.at(1).get<double>());
    cert.eq_mults.push_back(std::move(m));
  }
  return cert;
}

BoundResult sos_lower_bound(const Polynomial& p, const sets::SemialgebraicSet& S,
                            const CertificateTemplate& tmpl, const conic::SolveOptions& opts) {
  conic::ConicProblem prog;
  int gamma = prog.add_free();
  VarPoly target = VarPoly(p) - VarPoly::decision(gamma);
  Compiled c = compile(target, S, tmpl, prog, "lb");
  prog.set_objective(gamma, -1.0);  // max gamma
  auto sol = conic::solve_sdp(prog, opts);
  BoundResult r;
  r.bound = sol.free.at(gamma);
  r.cert = extract(c, sol);
  r.report = sol.report;
  return r;
}

}  // namespace seqbound::sos
