#include "seqbound/sos.hpp"

#include <cmath>
#include <string>

#include "doctest.h"
#include "helpers.hpp"

using namespace seqbound;
using namespace seqbound::sos;
using poly::Monomial;
using poly::Polynomial;
using poly::VariableRegistry;

TEST_CASE("varpoly algebra tracks decision variables through substitution") {
  VariableRegistry reg;
  auto s = reg.add("s");
  conic::ConicProblem prog;
  std::vector<int> coeffs;
  VarPoly v = VarPoly::parametric(prog, poly::monomials_up_to({s}, 2), &coeffs);
  REQUIRE(coeffs.size() == 3);

  std::vector<double> d(prog.num_free, 0.0);
  d[coeffs[0]] = 2.0;
  d[coeffs[1]] = -1.0;
  d[coeffs[2]] = 0.5;
  Polynomial fixed = v.evaluate_decision(d);  // 2 - s + s^2/2

  std::map<poly::VarId, Polynomial> shift{{s, Polynomial::variable(s) + Polynomial(1.0)}};
  Polynomial a = v.substitute(shift).evaluate_decision(d);
  Polynomial b = fixed.substitute(shift);
  CHECK((a - b).l1_norm() < 1e-12);

  Polynomial w = Polynomial::variable(s) + Polynomial(2.0);
  Polynomial c = (v * w).evaluate_decision(d);
  CHECK((c - fixed * w).l1_norm() < 1e-12);

  VarPoly sum = v + VarPoly(Polynomial(3.0)) - VarPoly::decision(coeffs[1]);
  Polynomial e = sum.evaluate_decision(d);
  CHECK((e - (fixed + Polynomial(3.0 - d[coeffs[1]]))).l1_norm() < 1e-12);
}

TEST_CASE("perfect square certified on the line") {
  VariableRegistry reg;
  auto x = reg.add("x");
  sets::SemialgebraicSet S({x});  // no constraints, box [-1,1]

  conic::ConicProblem prog;
  Polynomial p = (Polynomial::variable(x) + Polynomial(1.0)) *
                 (Polynomial::variable(x) + Polynomial(1.0));
  CertificateTemplate tmpl;
  tmpl.products.push_back({{}, poly::monomials_up_to({x}, 1)});
  Compiled c = compile(VarPoly(p), S, tmpl, prog);
  auto sol = conic::solve_sdp(prog, {});
  REQUIRE(sol.report.status == conic::Status::Optimal);

  auto cert = extract(c, sol);
  auto rep = verify(cert, p, S);
  CHECK(rep.delta < 1e-7);
  CHECK(rep.min_gram_eig > -1e-9);
  // the Gram of (x+1)^2 over {1, x} is the all-ones matrix
  CHECK(cert.terms[0].gram(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(cert.terms[0].gram(0, 1) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(cert.terms[0].gram(1, 1) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("linear program style bounds on an interval") {
  VariableRegistry reg;
  auto x = reg.add("x");
  auto S = sets::box({x}, 0.0, 1.0);

  auto r1 = sos_lower_bound(Polynomial::variable(x), S, putinar_template(S, 1));
  CHECK(r1.report.status == conic::Status::Optimal);
  CHECK(r1.bound == doctest::Approx(0.0).epsilon(1e-7));

  auto r2 = sos_lower_bound(Polynomial::variable(x) + Polynomial(2.0), S, putinar_template(S, 2));
  CHECK(r2.bound == doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("degree gap on x(1-x): infeasible at 2, exact at 3, products fix it") {
  VariableRegistry reg;
  auto x = reg.add("x");
  auto S = sets::box({x}, 0.0, 1.0);
  Polynomial p = Polynomial::variable(x) * (Polynomial(1.0) - Polynomial::variable(x));

  auto deg2 = sos_lower_bound(p, S, putinar_template(S, 2));
  CHECK(deg2.report.status == conic::Status::Infeasible);

  auto deg3 = sos_lower_bound(p, S, putinar_template(S, 3));
  CHECK(deg3.report.status == conic::Status::Optimal);
  CHECK(deg3.bound == doctest::Approx(0.0).epsilon(1e-6));
  auto rep3 = verify(deg3.cert, p - Polynomial(deg3.bound), S);
  CHECK(rep3.delta < 1e-6);

  // depth-2 products make the quadratic certificate feasible again
  auto sch = sos_lower_bound(p, S, schmuedgen_template(S, 2, 2));
  CHECK(sch.report.status == conic::Status::Optimal);
  CHECK(sch.bound == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("equality multipliers tighten bounds on a slice") {
  VariableRegistry reg;
  auto x = reg.add("x");
  auto y = reg.add("y");
  auto S = sets::box({x, y}, 0.0, 1.0);
  S.add_eq(Polynomial::variable(x) + Polynomial::variable(y) - Polynomial(1.0));

  Polynomial p = Polynomial::variable(x) + Polynomial::variable(y);
  auto r = sos_lower_bound(p, S, putinar_template(S, 2));
  CHECK(r.report.status == conic::Status::Optimal);
  CHECK(r.bound == doctest::Approx(1.0).epsilon(1e-7));  // 0 without the equality
  CHECK_FALSE(r.cert.eq_mults.empty());
}

TEST_CASE("putinar is schmuedgen at depth one") {
  VariableRegistry reg;
  auto x = reg.add("x");
  auto y = reg.add("y");
  auto S = sets::box({x, y}, 0.0, 1.0);
  auto a = putinar_template(S, 4);
  auto b = schmuedgen_template(S, 4, 1);
  REQUIRE(a.products.size() == b.products.size());
  for (std::size_t i = 0; i < a.products.size(); ++i) {
    CHECK(a.products[i].ineq_indices == b.products[i].ineq_indices);
    CHECK(a.products[i].basis.size() == b.products[i].basis.size());
  }
  auto c = schmuedgen_template(S, 4, 2);
  CHECK(c.products.size() > a.products.size());
}

TEST_CASE("compile rejects unreachable monomials") {
  VariableRegistry reg;
  auto x = reg.add("x");
  sets::SemialgebraicSet S({x});
  conic::ConicProblem prog;
  CertificateTemplate tmpl;
  tmpl.products.push_back({{}, {Monomial()}});  // constants only
  Polynomial p(Monomial::var(x, 3), 1.0);
  try {
    compile(VarPoly(p), S, tmpl, prog);
    FAIL("expected compile to throw");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("cannot produce") != std::string::npos);
  }
}

TEST_CASE("verification slack formula on a hand built certificate") {
  VariableRegistry reg;
  auto x = reg.add("x");
  auto S = sets::box({x}, -1.0, 1.0);
  Certificate cert;
  Certificate::Term t;
  t.basis = {Monomial()};
  t.gram = Eigen::MatrixXd::Constant(1, 1, -0.5);
  cert.terms.push_back(t);
  auto rep = verify(cert, Polynomial(0.0), S);
  CHECK(rep.mismatch_sup == doctest::Approx(0.5));
  CHECK(rep.min_gram_eig == doctest::Approx(-0.5));
  CHECK(rep.gram_penalty == doctest::Approx(0.5));
  CHECK(rep.delta == doctest::Approx(1.0));
}

TEST_CASE("verification catches corrupted grams") {
  VariableRegistry reg;
  auto x = reg.add("x");
  auto S = sets::box({x}, -1.0, 1.0);
  Polynomial p = (Polynomial::variable(x) + Polynomial(1.0)) *
                 (Polynomial::variable(x) + Polynomial(1.0));
  conic::ConicProblem prog;
  CertificateTemplate tmpl;
  tmpl.products.push_back({{}, poly::monomials_up_to({x}, 1)});
  Compiled c = compile(VarPoly(p), S, tmpl, prog);
  auto sol = conic::solve_sdp(prog, {});
  auto cert = extract(c, sol);
  REQUIRE(verify(cert, p, S).delta < 1e-7);

  cert.terms[0].gram(0, 0) += 1e-3;  // constant coefficient now off by 1e-3
  auto rep = verify(cert, p, S);
  CHECK(rep.delta > 0.9e-3);
  CHECK(rep.delta < 1.5e-3);
}

TEST_CASE("certificate json round trip") {
  VariableRegistry reg;
  auto x = reg.add("x");
  auto y = reg.add("y");
  auto S = sets::box({x, y}, 0.0, 1.0);
  S.add_eq(Polynomial::variable(x) + Polynomial::variable(y) - Polynomial(1.0));
  Polynomial p = Polynomial::variable(x) + Polynomial(2.0) * Polynomial::variable(y);
  auto r = sos_lower_bound(p, S, putinar_template(S, 2));
  REQUIRE(r.report.status == conic::Status::Optimal);

  std::string text = certificate_to_json(r.cert, reg);
  Certificate back = certificate_from_json(text, reg);
  REQUIRE(back.terms.size() == r.cert.terms.size());
  Polynomial diff = reconstruct(back, S) - reconstruct(r.cert, S);
  CHECK(diff.l1_norm() < 1e-15);
  auto ra = verify(r.cert, p - Polynomial(r.bound), S);
  auto rb = verify(back, p - Polynomial(r.bound), S);
  CHECK(ra.delta == doctest::Approx(rb.delta).epsilon(1e-12));
}

TEST_CASE("compile is deterministic") {
  VariableRegistry reg;
  auto x = reg.add("x");
  auto y = reg.add("y");
  auto S = sets::box({x, y}, 0.0, 1.0);
  Polynomial p = Polynomial::variable(x) * Polynomial::variable(y) + Polynomial(1.0);

  conic::ConicProblem p1, p2;
  compile(VarPoly(p), S, putinar_template(S, 2), p1);
  compile(VarPoly(p), S, putinar_template(S, 2), p2);
  REQUIRE(p1.rows.size() == p2.rows.size());
  for (std::size_t i = 0; i < p1.rows.size(); ++i) {
    CHECK(p1.rows[i].label == p2.rows[i].label);
    CHECK(p1.rows[i].rhs == p2.rows[i].rhs);
    CHECK(p1.rows[i].mat.size() == p2.rows[i].mat.size());
  }

  auto a = sos_lower_bound(p, S, putinar_template(S, 2));
  auto b = sos_lower_bound(p, S, putinar_template(S, 2));
  CHECK(a.bound == b.bound);
}

TEST_CASE("random polynomials: certified bound never exceeds sampled minimum") {
  VariableRegistry reg;
  auto x = reg.add("x");
  auto y = reg.add("y");
  auto S = sets::box({x, y}, -1.0, 1.0);
  testutil::rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    Polynomial p = testutil::random_poly({x, y}, 3, 8, 2.0);
    auto r = sos_lower_bound(p, S, putinar_template(S, 4));
    if (r.report.status != conic::Status::Optimal) continue;
    double sampled_min = 1e300;
    for (int k = 0; k < 500; ++k) {
      auto pt = testutil::random_point(2);
      sampled_min = std::min(sampled_min, p.evaluate(pt));
    }
    CAPTURE(trial);
    CHECK(r.bound <= sampled_min + 1e-6);
    auto rep = verify(r.cert, p - Polynomial(r.bound), S);
    CHECK(rep.delta < 1e-5);
  }
}
