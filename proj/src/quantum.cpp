#include "seqbound/quantum.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace seqbound::quantum {

namespace {

using Cx = std::complex<double>;

MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b) {
  MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace

Matrix2cd pauli_x() {
  Matrix2cd m;
  m << 0, 1, 1, 0;
  return m;
}

Matrix2cd pauli_y() {
  Matrix2cd m;
  m << Cx(0, 0), Cx(0, -1), Cx(0, 1), Cx(0, 0);
  return m;
}

Matrix2cd pauli_z() {
  Matrix2cd m;
  m << 1, 0, 0, -1;
  return m;
}

Matrix2cd bloch_state(const Vector3d& n) {
  return 0.5 * (Matrix2cd::Identity() + n.x() * pauli_x() + n.y() * pauli_y() +
                n.z() * pauli_z());
}

void bloch_coords(const Matrix2cd& m, double& a, Vector3d& v) {
  a = m.trace().real();
  v.x() = (m * pauli_x()).trace().real();
  v.y() = (m * pauli_y()).trace().real();
  v.z() = (m * pauli_z()).trace().real();
}

Matrix2cd bloch_operator(double a, const Vector3d& v) {
  return 0.5 * (a * Matrix2cd::Identity() + v.x() * pauli_x() +
                v.y() * pauli_y() + v.z() * pauli_z());
}

std::vector<Matrix2cd> pauli_eigenstates() {
  std::vector<Matrix2cd> out;
  for (const Matrix2cd& s : {pauli_x(), pauli_y(), pauli_z()}) {
    out.push_back(0.5 * (Matrix2cd::Identity() + s));
    out.push_back(0.5 * (Matrix2cd::Identity() - s));
  }
  return out;
}

int MpoTarget::bond(int k) const {
  if (k < 0 || k > size()) throw std::out_of_range("mpo bond index");
  if (k == 0) return static_cast<int>(sites.front()[0][0].rows());
  return static_cast<int>(sites[k - 1][0][0].cols());
}

void MpoTarget::validate() const {
  if (sites.empty()) throw std::invalid_argument("mpo has no sites");
  for (int k = 0; k < size(); ++k) {
    const auto& w = sites[k];
    const Eigen::Index rows = w[0][0].rows(), cols = w[0][0].cols();
    for (int s = 0; s < 2; ++s)
      for (int sp = 0; sp < 2; ++sp)
        if (w[s][sp].rows() != rows || w[s][sp].cols() != cols)
          throw std::invalid_argument("mpo site " + std::to_string(k) +
                                      " has inconsistent tensor shapes");
    if (k > 0 && sites[k - 1][0][0].cols() != rows)
      throw std::invalid_argument("mpo bond mismatch between sites " +
                                  std::to_string(k - 1) + " and " + std::to_string(k));
  }
  if (bond(0) != 1 || bond(size()) != 1)
    throw std::invalid_argument("mpo boundary bonds must have dimension 1");
}

int Mps::bond(int k) const {
  if (k < 0 || k > size()) throw std::out_of_range("mps bond index");
  if (k == 0) return static_cast<int>(sites.front()[0].rows());
  return static_cast<int>(sites[k - 1][0].cols());
}

void Mps::validate() const {
  if (sites.empty()) throw std::invalid_argument("mps has no sites");
  for (int k = 0; k < size(); ++k) {
    const auto& a = sites[k];
    if (a[0].rows() != a[1].rows() || a[0].cols() != a[1].cols())
      throw std::invalid_argument("mps site " + std::to_string(k) +
                                  " has inconsistent tensor shapes");
    if (k > 0 && sites[k - 1][0].cols() != a[0].rows())
      throw std::invalid_argument("mps bond mismatch between sites " +
                                  std::to_string(k - 1) + " and " + std::to_string(k));
  }
  if (bond(0) != 1 || bond(size()) != 1)
    throw std::invalid_argument("mps boundary bonds must have dimension 1");
}

MpoTarget mps_to_mpo(const Mps& psi) {
  psi.validate();
  MpoTarget rho;
  for (const auto& a : psi.sites) {
    MpoTarget::SiteTensor w;
    for (int s = 0; s < 2; ++s)
      for (int sp = 0; sp < 2; ++sp) w[s][sp] = kron(a[s], a[sp].conjugate());
    rho.sites.push_back(std::move(w));
  }
  return rho;
}

Mps ghz_mps(int sites) {
  if (sites < 2) throw std::invalid_argument("ghz mps needs at least 2 sites");
  Mps psi;
  const double isq2 = 1.0 / std::sqrt(2.0);
  for (int k = 0; k < sites; ++k) {
    Mps::SiteTensor a;
    for (int s = 0; s < 2; ++s) {
      if (k == 0) {
        a[s] = MatrixXcd::Zero(1, 2);
        a[s](0, s) = isq2;
      } else if (k + 1 == sites) {
        a[s] = MatrixXcd::Zero(2, 1);
        a[s](s, 0) = 1.0;
      } else {
        a[s] = MatrixXcd::Zero(2, 2);
        a[s](s, s) = 1.0;
      }
    }
    psi.sites.push_back(std::move(a));
  }
  return psi;
}

Mps plus_product_mps(int sites) {
  if (sites < 1) throw std::invalid_argument("mps needs at least 1 site");
  Mps psi;
  const double isq2 = 1.0 / std::sqrt(2.0);
  Mps::SiteTensor a;
  a[0] = MatrixXcd::Constant(1, 1, isq2);
  a[1] = MatrixXcd::Constant(1, 1, isq2);
  psi.sites.assign(sites, a);
  return psi;
}

MatrixXcd mpo_dense(const MpoTarget& rho) {
  rho.validate();
  // partial contractions indexed by the open right bond
  std::vector<MatrixXcd> r{MatrixXcd::Constant(1, 1, 1.0)};
  for (const auto& w : rho.sites) {
    const Eigen::Index dr = w[0][0].cols();
    std::vector<MatrixXcd> nxt(
        dr, MatrixXcd::Zero(r[0].rows() * 2, r[0].cols() * 2));
    for (int s = 0; s < 2; ++s)
      for (int sp = 0; sp < 2; ++sp) {
        MatrixXcd unit = MatrixXcd::Zero(2, 2);
        unit(s, sp) = 1.0;
        for (Eigen::Index al = 0; al < w[s][sp].rows(); ++al)
          for (Eigen::Index be = 0; be < dr; ++be)
            if (w[s][sp](al, be) != Cx(0, 0))
              nxt[be] += w[s][sp](al, be) * kron(r[al], unit);
      }
    r = std::move(nxt);
  }
  return r[0];
}

VectorXcd mps_dense(const Mps& psi) {
  psi.validate();
  std::vector<VectorXcd> r{VectorXcd::Constant(1, 1.0)};
  for (const auto& a : psi.sites) {
    const Eigen::Index dr = a[0].cols();
    std::vector<VectorXcd> nxt(dr, VectorXcd::Zero(r[0].size() * 2));
    for (int s = 0; s < 2; ++s) {
      VectorXcd unit = VectorXcd::Zero(2);
      unit(s) = 1.0;
      for (Eigen::Index al = 0; al < a[s].rows(); ++al)
        for (Eigen::Index be = 0; be < dr; ++be)
          if (a[s](al, be) != Cx(0, 0))
            nxt[be] += a[s](al, be) * kron(r[al], unit);
    }
    r = std::move(nxt);
  }
  return r[0];
}

void MeasurementProcess::validate() const {
  if (configs < 1) throw std::invalid_argument("process needs a configuration");
  if (initial < 0 || initial >= configs)
    throw std::invalid_argument("process initial configuration out of range");
  if (static_cast<int>(accept.size()) != configs)
    throw std::invalid_argument("process needs one accept effect per configuration");
  for (const auto& b : branches) {
    if (static_cast<int>(b.next.size()) != configs)
      throw std::invalid_argument("branch map does not cover the configurations");
    for (int t : b.next)
      if (t < 0 || t >= configs)
        throw std::invalid_argument("branch map leaves the configuration set");
  }
}

double mpo_type2(const MeasurementProcess& q, const MpoTarget& target) {
  q.validate();
  target.validate();
  const int n = target.size();
  if (n < 1) throw std::invalid_argument("empty mpo target");
  // site tensor contracted with an effect E: sum_{s,s'} W[s][s'] tr(|s><s'| E)
  auto apply = [](const MpoTarget::SiteTensor& w, const Matrix2cd& e) {
    MatrixXcd m = MatrixXcd::Zero(w[0][0].rows(), w[0][0].cols());
    for (int s = 0; s < 2; ++s)
      for (int sp = 0; sp < 2; ++sp) m += e(sp, s) * w[s][sp];
    return m;
  };

  MatrixXcd l = MatrixXcd::Zero(q.configs, 1);
  l(q.initial, 0) = 1.0;
  for (int k = 0; k + 1 < n; ++k) {
    MatrixXcd nxt = MatrixXcd::Zero(q.configs, target.bond(k + 1));
    for (const auto& b : q.branches) {
      MatrixXcd m = apply(target.sites[k], b.effect);
      for (int t = 0; t < q.configs; ++t)
        nxt.row(b.next[t]) += b.weight * (l.row(t) * m);
    }
    l = std::move(nxt);
  }
  Cx acc = 0;
  for (int t = 0; t < q.configs; ++t)
    acc += (l.row(t) * apply(target.sites[n - 1], q.accept[t]))(0, 0);
  return acc.real();
}

}  // namespace seqbound::quantum
