#pragma once
// Qubit and tensor-network helpers for the detection games: Pauli algebra,
// Bloch-vector states, matrix product states/operators, and the left-to-right
// contraction that evaluates a sequential measurement process on an MPO
// target.

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <vector>

namespace seqbound::quantum {

using Eigen::Matrix2cd;
using Eigen::MatrixXcd;
using Eigen::Vector3d;
using Eigen::VectorXcd;

Matrix2cd pauli_x();
Matrix2cd pauli_y();
Matrix2cd pauli_z();

// rho(n) = (I + n . sigma) / 2; n need not be normalised.
Matrix2cd bloch_state(const Vector3d& n);

// (re tr(M), re tr(M sigma_j)) so that M = (a I + v . sigma) / 2. Inverse of
// bloch_operator for Hermitian M.
void bloch_coords(const Matrix2cd& m, double& a, Vector3d& v);
Matrix2cd bloch_operator(double a, const Vector3d& v);

// Projectors onto the Pauli eigenstates, ordered +x, -x, +y, -y, +z, -z.
std::vector<Matrix2cd> pauli_eigenstates();

// Operator on N qubits in matrix product form. Site k carries one
// D_{k-1} x D_k matrix per physical index pair (s, s'); both boundary bonds
// have dimension 1, so contracting the chain yields a 2^N x 2^N operator.
struct MpoTarget {
  using SiteTensor = std::array<std::array<MatrixXcd, 2>, 2>;
  std::vector<SiteTensor> sites;

  int size() const { return static_cast<int>(sites.size()); }
  int bond(int k) const;  // D_k for k = 0..size()
  void validate() const;  // throws on empty chains or bond mismatches
};

// Pure state in matrix product form, same bond conventions.
struct Mps {
  using SiteTensor = std::array<MatrixXcd, 2>;
  std::vector<SiteTensor> sites;

  int size() const { return static_cast<int>(sites.size()); }
  int bond(int k) const;
  void validate() const;
};

// |psi><psi| with bond dimensions squared.
MpoTarget mps_to_mpo(const Mps& psi);

// (|0...0> + |1...1>)/sqrt(2), bond dimension 2.
Mps ghz_mps(int sites);

// |+>^{otimes sites}, bond dimension 1.
Mps plus_product_mps(int sites);

// Dense forms for small chains; cost grows as 4^N.
MatrixXcd mpo_dense(const MpoTarget& rho);
VectorXcd mps_dense(const Mps& psi);

// Measurement box applied to the sites one by one. During the first N-1
// rounds exactly one branch fires: with probability weight the qubit is hit
// by the (subnormalised) effect and the configuration moves through the
// branch's map. After measuring site N with the per-configuration accept
// effect, the box accepts.
struct MeasurementProcess {
  struct Branch {
    double weight = 1.0;
    Matrix2cd effect = Matrix2cd::Zero();
    std::vector<int> next;  // configuration map t -> t'
  };
  int configs = 1;
  int initial = 0;
  std::vector<Branch> branches;
  std::vector<Matrix2cd> accept;  // one effect per configuration

  void validate() const;
};

// Acceptance probability of the process on the MPO target: a single sweep
// carrying one bond-row per configuration, cost O(N |branches| |T| D^2).
double mpo_type2(const MeasurementProcess& q, const MpoTarget& target);

}  // namespace seqbound::quantum
