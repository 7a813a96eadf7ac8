#include "seqbound/seqopt.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"

using namespace seqbound;
using poly::Polynomial;
using poly::VarId;
using seqopt::AdaptiveGame;
using seqopt::Composition;
using seqopt::SequentialModel;
using seqopt::Step;

namespace {

// Oracle for adaptive games, independent of the backward recursion under
// test: enumerate every policy table (step, state) -> action and evaluate it
// by the linear forward identity v(k,t) = sum_t' W[a](t,t') v(k+1,t').
double policy_value(const AdaptiveGame& g, const std::vector<std::vector<int>>& policy) {
  Eigen::VectorXd v = g.terminal;
  for (int k = g.horizon - 1; k >= 0; --k) {
    Eigen::VectorXd nv(v.size());
    for (int t = 0; t < v.size(); ++t) nv(t) = g.W[policy[k][t]].row(t).dot(v);
    v = nv;
  }
  return v(g.start);
}

double exhaustive_game_value(const AdaptiveGame& g) {
  const int T = static_cast<int>(g.terminal.size());
  const int A = static_cast<int>(g.W.size());
  const int cells = g.horizon * T;
  long long count = 1;
  for (int i = 0; i < cells; ++i) count *= A;
  double best = -1e300;
  for (long long code = 0; code < count; ++code) {
    long long c = code;
    std::vector<std::vector<int>> policy(g.horizon, std::vector<int>(T));
    for (int k = 0; k < g.horizon; ++k)
      for (int t = 0; t < T; ++t) {
        policy[k][t] = static_cast<int>(c % A);
        c /= A;
      }
    best = std::max(best, policy_value(g, policy));
  }
  return best;
}

// one decision variable lambda in [0,1], no state: reward lambda(1 - lambda)
SequentialModel quadratic_model(poly::VariableRegistry& reg) {
  SequentialModel m;
  VarId lam = reg.add("lam");
  m.lambda_vars = {lam};
  m.lambda_set = sets::box({lam}, 0.0, 1.0);
  m.lambda_set.add_ineq(Polynomial::variable(lam) *
                        (Polynomial(1.0) - Polynomial::variable(lam)));
  Step st;
  st.domain = m.lambda_set;
  Polynomial l = Polynomial::variable(lam);
  st.reward = l * (Polynomial(1.0) - l);
  m.steps.push_back(st);
  m.num_vars = reg.size();
  return m;
}

// two steps, state s_1 = 0, update s' = s + lambda, reward lambda(1 - s);
// optimum 2 lambda - lambda^2 = 1 at lambda = 1
SequentialModel two_step_model(poly::VariableRegistry& reg) {
  SequentialModel m;
  VarId s = reg.add("s");
  VarId sn = reg.add("s_next");
  VarId lam = reg.add("lam");
  m.state_vars = {s};
  m.next_vars = {sn};
  m.lambda_vars = {lam};
  m.initial_state = {0.0};
  m.lambda_set = sets::box({lam}, 0.0, 1.0);
  m.lambda_set.add_ineq(Polynomial::variable(lam) *
                        (Polynomial(1.0) - Polynomial::variable(lam)));
  Polynomial sp = Polynomial::variable(s);
  Polynomial lp = Polynomial::variable(lam);
  for (int k = 0; k < 2; ++k) {
    Step st;
    st.domain = sets::box({s}, 0.0, 2.0).product(m.lambda_set);
    st.next_domain = sets::box({sn}, 0.0, 2.0);
    st.next[s] = sp + lp;
    st.reward = lp * (Polynomial(1.0) - sp);
    m.steps.push_back(st);
  }
  m.num_vars = reg.size();
  return m;
}

}  // namespace

TEST_CASE("adaptive game value matches exhaustive policy enumeration") {
  testutil::rng(7101);
  for (int trial = 0; trial < 20; ++trial) {
    AdaptiveGame g;
    int T = 2;
    int A = 2 + (trial % 2);
    g.horizon = 1 + trial % 3;
    g.start = trial % T;
    g.terminal = Eigen::VectorXd(T);
    for (int t = 0; t < T; ++t) g.terminal(t) = testutil::uniform(0.0, 1.0);
    for (int a = 0; a < A; ++a) {
      Eigen::MatrixXd W(T, T);
      for (int i = 0; i < T; ++i)
        for (int j = 0; j < T; ++j) W(i, j) = testutil::uniform(0.0, 1.0);
      g.W.push_back(W);
    }
    auto gv = seqopt::adaptive_game_value(g);
    CHECK(gv.value == doctest::Approx(exhaustive_game_value(g)).epsilon(1e-12));
    // the reported policy must achieve the reported value
    CHECK(policy_value(g, gv.policy) == doctest::Approx(gv.value).epsilon(1e-12));
  }
}

TEST_CASE("adaptive game ties pick the lowest action index") {
  AdaptiveGame g;
  g.horizon = 1;
  g.terminal = Eigen::VectorXd::Ones(2);
  g.W.push_back(Eigen::MatrixXd::Identity(2, 2));
  g.W.push_back(Eigen::MatrixXd::Identity(2, 2));
  auto gv = seqopt::adaptive_game_value(g);
  CHECK(gv.policy[0][0] == 0);
  CHECK(gv.policy[0][1] == 0);
}

namespace {

Eigen::MatrixXcd random_density(int d) {
  Eigen::MatrixXcd G(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      G(i, j) = std::complex<double>(testutil::uniform(-1.0, 1.0), testutil::uniform(-1.0, 1.0));
  Eigen::MatrixXcd rho = G * G.adjoint();
  return rho / rho.trace().real();
}

// binary qubit measurement embedded in a T-outcome family: outcome t' = swap
// gets M, everything else shares the remainder evenly
std::vector<std::vector<Eigen::MatrixXcd>> random_family(int T) {
  std::vector<std::vector<Eigen::MatrixXcd>> fam(T);
  for (int t = 0; t < T; ++t) {
    Eigen::MatrixXcd G(2, 2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        G(i, j) =
            std::complex<double>(testutil::uniform(-1.0, 1.0), testutil::uniform(-1.0, 1.0));
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(G);
    Eigen::MatrixXcd U = qr.householderQ();
    Eigen::Vector2d ev(testutil::uniform(0.0, 1.0), testutil::uniform(0.0, 1.0));
    Eigen::MatrixXcd M = U * ev.cast<std::complex<double>>().asDiagonal() * U.adjoint();
    Eigen::MatrixXcd rest = (Eigen::MatrixXcd::Identity(2, 2) - M) / static_cast<double>(T - 1);
    for (int tp = 0; tp < T; ++tp) fam[t].push_back(tp == (t + 1) % T ? M : rest);
  }
  return fam;
}

}  // namespace

TEST_CASE("preparation game value matches the weight-matrix recursion") {
  testutil::rng(7103);
  for (int trial = 0; trial < 10; ++trial) {
    const int T = 2 + trial % 2;
    const int rounds = 1 + trial % 3;
    Eigen::VectorXd score(T);
    for (int t = 0; t < T; ++t) score(t) = testutil::uniform(0.0, 1.0);
    auto g = seqopt::repeat_game(rounds, random_family(T), score, trial % T);
    seqopt::check_povm(g, 1e-9);

    std::vector<Eigen::MatrixXcd> feasible;
    for (int i = 0; i < 3; ++i) feasible.push_back(random_density(2));
    auto gs = seqopt::adaptive_game_value(g, feasible);

    AdaptiveGame w;
    w.horizon = rounds;
    w.start = g.initial;
    w.terminal = score;
    for (const auto& rho : feasible) {
      Eigen::MatrixXd W(T, T);
      for (int t = 0; t < T; ++t)
        for (int tp = 0; tp < T; ++tp) W(t, tp) = std::real((rho * g.povm[0][t][tp]).trace());
      w.W.push_back(W);
    }
    auto gv = seqopt::adaptive_game_value(w);
    CHECK(gs.value == doctest::Approx(gv.value).epsilon(1e-12));
    CHECK(gs.value == doctest::Approx(exhaustive_game_value(w)).epsilon(1e-12));

    // maximizer tables reproduce the mu recursion
    for (int k = 0; k < rounds; ++k)
      for (int t = 0; t < T; ++t) {
        const auto& rho = feasible[gs.maximizer[k][t]];
        double v = 0;
        for (int tp = 0; tp < T; ++tp)
          v += gs.mu[k + 1](tp) * std::real((rho * g.povm[k][t][tp]).trace());
        CHECK(gs.mu[k](t) == doctest::Approx(v).epsilon(1e-12));
      }
  }
}

TEST_CASE("povm validation rejects broken families") {
  Eigen::VectorXd score = Eigen::VectorXd::Ones(2);
  auto fam = random_family(2);
  auto g = seqopt::repeat_game(2, fam, score, 0);
  seqopt::check_povm(g, 1e-9);

  auto bad = g;
  bad.povm[1][0][0](0, 0) += 0.01;  // family no longer sums to the identity
  CHECK_THROWS_AS(seqopt::check_povm(bad, 1e-9), std::invalid_argument);

  auto neg = g;
  neg.povm[0][1][0] -= Eigen::MatrixXcd::Identity(2, 2) * 1.01;  // surely not PSD
  neg.povm[0][1][1] += Eigen::MatrixXcd::Identity(2, 2) * 1.01;  // sum stays the identity
  CHECK_THROWS_AS(seqopt::check_povm(neg, 1e-9), std::invalid_argument);

  auto off = g;
  off.initial = 5;
  CHECK_THROWS_AS(seqopt::check_povm(off, 1e-9), std::invalid_argument);
}

TEST_CASE("single step quadratic reward bounds at the true maximum") {
  poly::VariableRegistry reg;
  auto m = quadratic_model(reg);
  auto vc = seqopt::upper_bound(m);
  REQUIRE(vc.report.status != conic::Status::Infeasible);
  CHECK(vc.upper_bound == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(vc.values.size() == 1);
  CHECK(vc.constraints.size() == 2);
  CHECK(vc.constraints[0].label == "init");
  CHECK(vc.constraints[1].label == "step0");

  // certificates re-verify with tiny slack
  seqopt::AuditOptions ao;
  auto audit = seqopt::audit_certificate(m, vc, ao);
  CHECK(audit.max_delta < 1e-6);
  CHECK(audit.rigorous == doctest::Approx(0.25).epsilon(1e-5));
}

TEST_CASE("per-step controls enter through the step constraint") {
  poly::VariableRegistry reg;
  SequentialModel m;
  VarId h = reg.add("h");
  Step st;
  st.h_vars = {h};
  st.domain = sets::box({h}, 0.0, 1.0);
  st.domain.add_ineq(Polynomial::variable(h) * (Polynomial(1.0) - Polynomial::variable(h)));
  Polynomial hp = Polynomial::variable(h);
  st.reward = hp * (Polynomial(1.0) - hp);
  m.steps.push_back(st);
  m.num_vars = reg.size();

  auto vc = seqopt::upper_bound(m);
  CHECK(vc.upper_bound == doctest::Approx(0.25).epsilon(1e-6));

  seqopt::BruteForceOptions bo;
  bo.grid = 3;  // grid {0, 0.5, 1} hits the maximiser
  auto bf = seqopt::brute_force_value(m, bo);
  REQUIRE(bf.found);
  CHECK(bf.value == doctest::Approx(0.25));
  CHECK(bf.h[0][0] == doctest::Approx(0.5));
}

TEST_CASE("two step model is tight and composition modes agree") {
  poly::VariableRegistry reg;
  auto m = two_step_model(reg);

  seqopt::UpperBoundOptions sub;
  sub.composition = Composition::Substitute;
  auto vs = seqopt::upper_bound(m, sub);
  CHECK(vs.upper_bound == doctest::Approx(1.0).epsilon(1e-6));

  seqopt::UpperBoundOptions exp;
  exp.composition = Composition::Explicit;
  auto ve = seqopt::upper_bound(m, exp);
  CHECK(ve.upper_bound == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(vs.upper_bound - ve.upper_bound) < 1e-5);

  // explicit-mode step constraints live on the product set with s' tied
  CHECK(ve.constraints[1].set.eqs.size() == 1);
  CHECK(ve.constraints[1].set.vars.size() == 3);

  // audits agree on validity for both modes
  for (const auto* vc : {&vs, &ve}) {
    seqopt::AuditOptions ao;
    auto cert_audit = seqopt::audit_certificate(m, *vc, ao);
    CHECK(cert_audit.max_delta < 1e-6);
    ao.method = seqopt::AuditOptions::Method::Moment;
    auto mom_audit = seqopt::audit_certificate(m, *vc, ao);
    CHECK(mom_audit.rigorous >= 1.0 - 1e-7);
    CHECK(mom_audit.rigorous <= vc->upper_bound + 1e-4);
  }
}

TEST_CASE("audits detect a corrupted value function through both routes") {
  poly::VariableRegistry reg;
  auto m = two_step_model(reg);
  auto vc = seqopt::upper_bound(m);
  REQUIRE(vc.upper_bound == doctest::Approx(1.0).epsilon(1e-6));

  // lowering V_0 breaks the step-0 inequality by exactly the shift
  auto bad = vc;
  bad.values[0] -= Polynomial(0.02);

  seqopt::AuditOptions ao;
  auto cert_audit = seqopt::audit_certificate(m, bad, ao);
  CHECK(cert_audit.deltas[1] == doctest::Approx(0.02).epsilon(1e-2));
  CHECK(cert_audit.rigorous >= 1.0 + 0.019);

  ao.method = seqopt::AuditOptions::Method::Moment;
  auto mom_audit = seqopt::audit_certificate(m, bad, ao);
  CHECK(mom_audit.deltas[1] == doctest::Approx(0.02).epsilon(1e-2));
  CHECK(mom_audit.deltas[0] < 1e-6);  // init constraint only got slacker
  CHECK(mom_audit.rigorous >= 1.0 + 0.019);
}

TEST_CASE("brute force recovers the exact grid optimum") {
  poly::VariableRegistry reg;
  auto m = two_step_model(reg);

  seqopt::BruteForceOptions bo;
  bo.grid = 11;
  auto bf = seqopt::brute_force_value(m, bo);
  REQUIRE(bf.found);
  CHECK(bf.value == doctest::Approx(1.0));
  CHECK(bf.lambda[0] == doctest::Approx(1.0));
  CHECK(!bf.truncated);

  // the replayed strategy reproduces the reported value
  CHECK(seqopt::simulate(m, bf.lambda, bf.h) == doctest::Approx(bf.value).epsilon(1e-12));

  // restricting lambda restricts the enumeration
  auto m2 = m;
  m2.lambda_set.set_bound(m.lambda_vars[0], 0.0, 0.6);
  m2.steps[0].domain.set_bound(m.lambda_vars[0], 0.0, 0.6);
  m2.steps[1].domain.set_bound(m.lambda_vars[0], 0.0, 0.6);
  auto bf2 = seqopt::brute_force_value(m2, bo);
  CHECK(bf2.value == doctest::Approx(2 * 0.6 - 0.36));
}

TEST_CASE("brute force honours per-variable grid counts") {
  poly::VariableRegistry reg;
  SequentialModel m;
  VarId a = reg.add("a");
  VarId b = reg.add("b");
  m.lambda_vars = {a, b};
  m.lambda_set = sets::box({a, b}, 0.0, 1.0);
  Step st;
  st.domain = m.lambda_set;
  Polynomial pa = Polynomial::variable(a);
  Polynomial pb = Polynomial::variable(b);
  st.reward = pa * (Polynomial(1.0) - pa) + pb;
  m.steps.push_back(st);
  m.num_vars = reg.size();

  seqopt::BruteForceOptions bo;
  bo.grid = 2;            // b only sees the endpoints
  bo.grid_by_var[a] = 3;  // a also sees the midpoint 0.5
  auto bf = seqopt::brute_force_value(m, bo);
  REQUIRE(bf.found);
  CHECK(bf.evals == 6);
  CHECK(bf.value == doctest::Approx(1.25));
  CHECK(bf.lambda[0] == doctest::Approx(0.5));
  CHECK(bf.lambda[1] == doctest::Approx(1.0));
}

TEST_CASE("brute force is deterministic under the parallel path") {
  poly::VariableRegistry reg;
  auto m = two_step_model(reg);
  seqopt::BruteForceOptions bo;
  bo.grid = 9;
  auto a = seqopt::brute_force_value(m, bo);
  auto b = seqopt::brute_force_value(m, bo);
  CHECK(a.value == b.value);
  CHECK(a.lambda == b.lambda);
  CHECK(a.h == b.h);

  bo.parallel = false;
  auto c = seqopt::brute_force_value(m, bo);
  CHECK(a.value == c.value);
  CHECK(a.lambda == c.lambda);
}

TEST_CASE("tied controls restrict the strategy class") {
  poly::VariableRegistry reg;
  SequentialModel m;
  VarId h = reg.add("h");
  Polynomial hp = Polynomial::variable(h);
  Step s1;
  s1.h_vars = {h};
  s1.domain = sets::box({h}, 0.0, 2.0);
  s1.reward = hp * hp;
  Step s2 = s1;
  s2.reward = (Polynomial(2.0) - hp) * (Polynomial(2.0) - hp);
  m.steps = {s1, s2};
  m.num_vars = reg.size();

  seqopt::BruteForceOptions bo;
  bo.grid = 5;
  auto free_h = seqopt::brute_force_value(m, bo);
  CHECK(free_h.value == doctest::Approx(8.0));
  CHECK(free_h.h[0][0] == doctest::Approx(2.0));
  CHECK(free_h.h[1][0] == doctest::Approx(0.0));

  bo.tie_h = true;
  auto tied = seqopt::brute_force_value(m, bo);
  CHECK(tied.value == doctest::Approx(4.0));
  CHECK(tied.h[0] == tied.h[1]);
}

TEST_CASE("upper bound dominates enumeration on random models") {
  testutil::rng(7202);
  poly::VariableRegistry reg;
  VarId s = reg.add("s");
  VarId sn = reg.add("sn");
  VarId lam = reg.add("lam");

  for (int trial = 0; trial < 6; ++trial) {
    SequentialModel m;
    m.state_vars = {s};
    m.next_vars = {sn};
    m.lambda_vars = {lam};
    m.initial_state = {0.0};
    m.lambda_set = sets::box({lam}, 0.0, 1.0);
    m.lambda_set.add_ineq(Polynomial::variable(lam) *
                          (Polynomial(1.0) - Polynomial::variable(lam)));
    for (int k = 0; k < 2; ++k) {
      Step st;
      st.domain = sets::box({s}, -2.0, 2.0).product(m.lambda_set);
      st.next_domain = sets::box({sn}, -2.0, 2.0);
      st.next[s] = Polynomial(testutil::uniform(-0.5, 0.5)) +
                   Polynomial::variable(s) * testutil::uniform(-0.5, 0.5) +
                   Polynomial::variable(lam) * testutil::uniform(-0.5, 0.5);
      st.reward = testutil::random_poly({s, lam}, 2, 5, 1.0);
      m.steps.push_back(st);
    }
    m.num_vars = reg.size();

    seqopt::UpperBoundOptions opt;
    opt.degree = 4;
    opt.depth = 2;
    auto vc = seqopt::upper_bound(m, opt);
    REQUIRE(vc.report.status != conic::Status::Infeasible);

    seqopt::BruteForceOptions bo;
    bo.grid = 7;
    auto bf = seqopt::brute_force_value(m, bo);
    REQUIRE(bf.found);
    CHECK(bf.value <= vc.upper_bound + 1e-6);

    auto audit = seqopt::audit_certificate(m, vc, {});
    CHECK(bf.value <= audit.rigorous + 1e-9);
  }
}

TEST_CASE("simplification keeps the bound and only removes monomials") {
  poly::VariableRegistry reg;
  auto m = two_step_model(reg);
  auto vc = seqopt::upper_bound(m);

  seqopt::SimplifyOptions noop;
  noop.thresholds = {0.0};
  auto same = seqopt::simplify_values(m, vc, noop);
  CHECK(same.upper_bound == vc.upper_bound);
  for (std::size_t k = 0; k < same.values.size(); ++k)
    CHECK(same.values[k].term_count() == vc.values[k].term_count());

  auto slim = seqopt::simplify_values(m, vc, {});
  CHECK(slim.upper_bound <= vc.upper_bound + 1e-6);
  for (std::size_t k = 0; k < slim.values.size(); ++k)
    CHECK(slim.values[k].term_count() <= vc.values[k].term_count());
  auto audit = seqopt::audit_certificate(m, slim, {});
  CHECK(audit.max_delta < 1e-6);
  CHECK(audit.rigorous >= 1.0 - 1e-6);  // still a certificate for the optimum
}

TEST_CASE("optimizer recovery reads the maximiser off a tight certificate") {
  poly::VariableRegistry reg;
  auto m = two_step_model(reg);
  auto vc = seqopt::upper_bound(m);
  seqopt::RecoverOptions opt;
  opt.rank_tol = 1e-4;  // the slack band blurs the second eigenvalue
  auto rec = seqopt::recover_optimizer(m, vc, opt);
  REQUIRE(rec.feasible);
  REQUIRE(rec.extracted);
  CHECK(rec.relaxation_value == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(rec.lambda[0] == doctest::Approx(1.0).epsilon(1e-2));
  CHECK(rec.achieved == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(rec.achieved <= rec.relaxation_value + 1e-5);
}

TEST_CASE("recovery declines a loosened certificate") {
  poly::VariableRegistry reg;
  auto m = two_step_model(reg);
  auto vc = seqopt::upper_bound(m);
  auto loose = vc;
  // a uniform lift of the last value function keeps it a valid bound but
  // detaches it from the reward, so no point saturates the last inequality
  loose.values.back() = loose.values.back() + Polynomial(0.05);
  loose.upper_bound += 0.05;
  auto rec = seqopt::recover_optimizer(m, loose, {});
  CHECK_FALSE(rec.feasible);
  CHECK_FALSE(rec.extracted);
}

TEST_CASE("recovery reports non-extraction for flat objectives") {
  // constant reward: every lambda is optimal, moments need not be rank one;
  // whatever happens, achieved stays a genuine replay value
  poly::VariableRegistry reg;
  SequentialModel m;
  VarId lam = reg.add("lam");
  m.lambda_vars = {lam};
  m.lambda_set = sets::box({lam}, 0.0, 1.0);
  m.lambda_set.add_ineq(Polynomial::variable(lam) *
                        (Polynomial(1.0) - Polynomial::variable(lam)));
  Step st;
  st.domain = m.lambda_set;
  st.reward = Polynomial(0.5);
  m.steps.push_back(st);
  m.num_vars = reg.size();

  auto vc = seqopt::upper_bound(m);
  auto rec = seqopt::recover_optimizer(m, vc, {});
  REQUIRE(rec.feasible);
  CHECK(rec.relaxation_value == doctest::Approx(0.5).epsilon(1e-4));
  if (rec.extracted) CHECK(rec.achieved == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("upper bound is bitwise deterministic") {
  auto run = [] {
    poly::VariableRegistry reg;
    auto m = two_step_model(reg);
    return seqopt::upper_bound(m).upper_bound;
  };
  double a = run();
  double b = run();
  CHECK(std::memcmp(&a, &b, sizeof a) == 0);
}

TEST_CASE("model validation rejects malformed inputs") {
  poly::VariableRegistry reg;
  SequentialModel empty;
  CHECK_THROWS_AS(seqopt::upper_bound(empty), std::invalid_argument);

  auto m = two_step_model(reg);
  auto vc = seqopt::upper_bound(m);
  auto broken = vc;
  broken.constraints.pop_back();
  CHECK_THROWS_AS(seqopt::audit_certificate(m, broken, {}), std::invalid_argument);

  SequentialModel mismatched = m;
  mismatched.initial_state = {0.0, 1.0};
  CHECK_THROWS_AS(seqopt::upper_bound(mismatched), std::invalid_argument);
}
