#pragma once

// Dense density-matrix core for registers of one to four qubits.
//
// Basis convention: qubit 0 is the most significant bit of the computational
// index, so for a two-qubit register |q0 q1> has index 2*q0 + q1.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "distill/rng.hpp"

namespace distill {

using Complex = std::complex<double>;
using Matrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;

inline constexpr int kMaxQubits = 4;

namespace tol {
inline constexpr double physical = 1e-9;   // trace, hermiticity, Kraus completeness
inline constexpr double eigen_floor = 1e-8;  // most negative eigenvalue tolerated
inline constexpr double algebraic = 1e-12;  // exact identities
inline constexpr double unitary = 1e-10;
inline constexpr double underflow = 1e-12;  // smallest measurable branch probability
}  // namespace tol

inline constexpr std::size_t dim_of(int n_qubits) { return std::size_t{1} << n_qubits; }

// Square operator on a small number of qubits. Not necessarily unitary; this is
// the shape shared by gates and Kraus operators.
class Operator {
 public:
  Operator() = default;
  Operator(int n_qubits, Matrix m) : n_(n_qubits), m_(std::move(m)) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
      throw std::invalid_argument("operator arity must be in [1, 4]");
    }
    if (m_.rows() != static_cast<Eigen::Index>(dim_of(n_)) || m_.cols() != m_.rows()) {
      throw std::invalid_argument("operator matrix shape does not match arity");
    }
  }

  int n_qubits() const { return n_; }
  std::size_t dim() const { return dim_of(n_); }
  const Matrix& matrix() const { return m_; }
  Complex operator()(std::size_t r, std::size_t c) const { return m_(r, c); }

  Operator adjoint() const { return Operator(n_, m_.adjoint()); }
  friend Operator operator*(const Operator& a, const Operator& b) {
    if (a.n_ != b.n_) throw std::invalid_argument("operator arity mismatch");
    return Operator(a.n_, a.m_ * b.m_);
  }
  friend Operator operator*(Complex s, const Operator& a) { return Operator(a.n_, s * a.m_); }

 private:
  int n_ = 1;
  Matrix m_ = Matrix::Identity(2, 2);
};

// Unitary on one or two qubits.
class GateMatrix {
 public:
  GateMatrix(int arity, Matrix m) : op_(arity, std::move(m)) {
    if (arity != 1 && arity != 2) throw std::invalid_argument("gate arity must be 1 or 2");
    const Matrix check = op_.matrix().adjoint() * op_.matrix();
    const double err = (check - Matrix::Identity(check.rows(), check.cols())).cwiseAbs().maxCoeff();
    if (err > tol::unitary) throw std::invalid_argument("gate matrix is not unitary");
  }

  int arity() const { return op_.n_qubits(); }
  const Operator& op() const { return op_; }
  const Matrix& matrix() const { return op_.matrix(); }

  GateMatrix adjoint() const { return GateMatrix(arity(), matrix().adjoint()); }
  friend GateMatrix operator*(const GateMatrix& a, const GateMatrix& b) {
    if (a.arity() != b.arity()) throw std::invalid_argument("gate arity mismatch");
    return GateMatrix(a.arity(), a.matrix() * b.matrix());
  }

 private:
  Operator op_;
};

class PureState {
 public:
  PureState(int n_qubits, Vector amplitudes) : n_(n_qubits), a_(std::move(amplitudes)) {
    if (n_ < 1 || n_ > kMaxQubits) throw std::invalid_argument("register size must be in [1, 4]");
    if (a_.size() != static_cast<Eigen::Index>(dim_of(n_))) {
      throw std::invalid_argument("amplitude vector length does not match register size");
    }
    if (std::abs(a_.norm() - 1.0) > tol::algebraic) {
      throw std::invalid_argument("pure state is not normalized");
    }
  }

  static PureState normalized(int n_qubits, Vector amplitudes) {
    const double norm = amplitudes.norm();
    if (!(norm > 0.0)) throw std::invalid_argument("zero amplitude vector");
    return PureState(n_qubits, amplitudes / norm);
  }

  static PureState basis(int n_qubits, std::size_t index) {
    Vector v = Vector::Zero(static_cast<Eigen::Index>(dim_of(n_qubits)));
    if (index >= dim_of(n_qubits)) throw std::out_of_range("basis index out of range");
    v(static_cast<Eigen::Index>(index)) = 1.0;
    return PureState(n_qubits, std::move(v));
  }

  int n_qubits() const { return n_; }
  std::size_t dim() const { return dim_of(n_); }
  const Vector& amplitudes() const { return a_; }
  Complex operator[](std::size_t i) const { return a_(static_cast<Eigen::Index>(i)); }

 private:
  int n_;
  Vector a_;
};

class DensityMatrix {
 public:
  struct Unchecked {};

  // Validates shape, finiteness, hermiticity, unit trace and positivity.
  DensityMatrix(int n_qubits, Matrix m) : n_(n_qubits), m_(std::move(m)) {
    check_shape();
    if (auto why = physicality_violation(); !why.empty()) {
      throw std::invalid_argument("not a density matrix: " + why);
    }
  }

  // For results of operations that preserve physicality by construction.
  DensityMatrix(int n_qubits, Matrix m, Unchecked) : n_(n_qubits), m_(std::move(m)) {
    check_shape();
  }

  explicit DensityMatrix(const PureState& psi)
      : n_(psi.n_qubits()), m_(psi.amplitudes() * psi.amplitudes().adjoint()) {}

  static DensityMatrix basis(int n_qubits, std::size_t index) {
    return DensityMatrix(PureState::basis(n_qubits, index));
  }

  static DensityMatrix maximally_mixed(int n_qubits) {
    const auto d = static_cast<Eigen::Index>(dim_of(n_qubits));
    return DensityMatrix(n_qubits, Matrix::Identity(d, d) / static_cast<double>(d), Unchecked{});
  }

  int n_qubits() const { return n_; }
  std::size_t dim() const { return dim_of(n_); }
  const Matrix& matrix() const { return m_; }
  Complex operator()(std::size_t r, std::size_t c) const { return m_(r, c); }

  Complex trace() const { return m_.trace(); }

  std::vector<double> eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m_, Eigen::EigenvaluesOnly);
    const auto& ev = solver.eigenvalues();
    return {ev.data(), ev.data() + ev.size()};
  }

  // Empty string when the state is physical at the standard tolerances,
  // otherwise the name of the first violated invariant.
  std::string physicality_violation() const {
    if (!m_.allFinite()) return "finite_entries";
    if (std::abs(m_.trace() - Complex(1.0)) > tol::physical) return "unit_trace";
    if ((m_ - m_.adjoint()).cwiseAbs().maxCoeff() > tol::physical) return "hermitian";
    const auto ev = eigenvalues();
    if (*std::min_element(ev.begin(), ev.end()) < -tol::eigen_floor) return "positive_semidefinite";
    return {};
  }
  bool is_physical() const { return physicality_violation().empty(); }

  // Largest entrywise deviation.
  double max_abs_diff(const DensityMatrix& other) const {
    if (other.n_ != n_) throw std::invalid_argument("dimension mismatch");
    return (m_ - other.m_).cwiseAbs().maxCoeff();
  }

 private:
  void check_shape() const {
    if (n_ < 1 || n_ > kMaxQubits) throw std::invalid_argument("register size must be in [1, 4]");
    const auto d = static_cast<Eigen::Index>(dim_of(n_));
    if (m_.rows() != d || m_.cols() != d) throw std::invalid_argument("matrix shape does not match register size");
  }

  int n_;
  Matrix m_;
};

// ---------------------------------------------------------------------------
// Standard gates

namespace gates {

inline GateMatrix make1(Complex a, Complex b, Complex c, Complex d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return GateMatrix(1, std::move(m));
}

inline GateMatrix identity() { return make1(1, 0, 0, 1); }
inline GateMatrix x() { return make1(0, 1, 1, 0); }
inline GateMatrix y() { return make1(0, Complex(0, -1), Complex(0, 1), 0); }
inline GateMatrix z() { return make1(1, 0, 0, -1); }
inline GateMatrix h() {
  const double s = 1.0 / std::sqrt(2.0);
  return make1(s, s, s, -s);
}
inline GateMatrix s() { return make1(1, 0, 0, Complex(0, 1)); }

// exp(-i angle Z / 2)
inline GateMatrix rz(double angle) {
  return make1(std::polar(1.0, -angle / 2), 0, 0, std::polar(1.0, angle / 2));
}
// exp(-i angle Y / 2)
inline GateMatrix ry(double angle) {
  const double c = std::cos(angle / 2), s = std::sin(angle / 2);
  return make1(c, -s, s, c);
}
// exp(-i angle X / 2)
inline GateMatrix rx(double angle) {
  const double c = std::cos(angle / 2), s = std::sin(angle / 2);
  return make1(c, Complex(0, -s), Complex(0, -s), c);
}

// |0><0| (x) on_zero + |1><1| (x) on_one, control is the first qubit.
inline GateMatrix controlled_pair(const GateMatrix& on_zero, const GateMatrix& on_one) {
  if (on_zero.arity() != 1 || on_one.arity() != 1) throw std::invalid_argument("controlled_pair takes 1-qubit gates");
  Matrix m = Matrix::Zero(4, 4);
  m.block(0, 0, 2, 2) = on_zero.matrix();
  m.block(2, 2, 2, 2) = on_one.matrix();
  return GateMatrix(2, std::move(m));
}

inline GateMatrix controlled(const GateMatrix& u) { return controlled_pair(identity(), u); }
inline GateMatrix cnot() { return controlled(x()); }
inline GateMatrix cz() { return controlled(z()); }

inline GateMatrix kron(const GateMatrix& a, const GateMatrix& b) {
  if (a.arity() != 1 || b.arity() != 1) throw std::invalid_argument("kron takes 1-qubit gates");
  Matrix m(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) m.block(2 * i, 2 * j, 2, 2) = a.matrix()(i, j) * b.matrix();
  return GateMatrix(2, std::move(m));
}

}  // namespace gates

// ---------------------------------------------------------------------------
// Register index helpers

namespace detail {

inline int bit_position(int n_qubits, int qubit) { return n_qubits - 1 - qubit; }

inline void check_targets(int n_qubits, std::span<const int> targets) {
  if (targets.empty()) throw std::invalid_argument("empty target list");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 0 || targets[i] >= n_qubits) throw std::out_of_range("target qubit outside register");
    for (std::size_t j = 0; j < i; ++j)
      if (targets[i] == targets[j]) throw std::invalid_argument("duplicate target qubit");
  }
}

// Offsets of the 2^k sub-basis states spanned by `targets` (first target is the
// most significant sub-index bit) and the base indices with those bits cleared.
struct Embedding {
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> bases;
};

inline Embedding embed(int n_qubits, std::span<const int> targets) {
  const std::size_t k = targets.size();
  Embedding e;
  e.offsets.resize(std::size_t{1} << k);
  std::size_t mask = 0;
  for (std::size_t s = 0; s < e.offsets.size(); ++s) {
    std::size_t off = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if ((s >> (k - 1 - j)) & 1U) off |= std::size_t{1} << bit_position(n_qubits, targets[j]);
    }
    e.offsets[s] = off;
  }
  for (int t : targets) mask |= std::size_t{1} << bit_position(n_qubits, t);
  for (std::size_t i = 0; i < dim_of(n_qubits); ++i)
    if ((i & mask) == 0) e.bases.push_back(i);
  return e;
}

// Returns O rho O^dagger with O acting on `targets`.
inline Matrix sandwich(const Matrix& rho, int n_qubits, const Matrix& op, std::span<const int> targets) {
  const Embedding e = embed(n_qubits, targets);
  const std::size_t d = dim_of(n_qubits);
  const std::size_t sub = e.offsets.size();
  Matrix left(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  std::array<Complex, 16> buf{};
  // left = O rho, column by column
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t base : e.bases) {
      for (std::size_t s = 0; s < sub; ++s) buf[s] = rho(base + e.offsets[s], c);
      for (std::size_t r = 0; r < sub; ++r) {
        Complex acc = 0;
        for (std::size_t s = 0; s < sub; ++s) acc += op(r, s) * buf[s];
        left(base + e.offsets[r], c) = acc;
      }
    }
  }
  // out = left O^dagger, row by row
  Matrix out(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t base : e.bases) {
      for (std::size_t s = 0; s < sub; ++s) buf[s] = left(r, base + e.offsets[s]);
      for (std::size_t c = 0; c < sub; ++c) {
        Complex acc = 0;
        for (std::size_t s = 0; s < sub; ++s) acc += buf[s] * std::conj(op(c, s));
        out(r, base + e.offsets[c]) = acc;
      }
    }
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations. All return new values; inputs are never modified.

inline DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.n_qubits() + b.n_qubits() > kMaxQubits) {
    throw std::length_error("tensor product exceeds the 4-qubit register limit");
  }
  const auto da = static_cast<Eigen::Index>(a.dim());
  const auto db = static_cast<Eigen::Index>(b.dim());
  Matrix m(da * db, da * db);
  for (Eigen::Index i = 0; i < da; ++i)
    for (Eigen::Index j = 0; j < da; ++j) m.block(i * db, j * db, db, db) = a.matrix()(i, j) * b.matrix();
  return DensityMatrix(a.n_qubits() + b.n_qubits(), std::move(m), DensityMatrix::Unchecked{});
}

inline DensityMatrix apply_gate(const DensityMatrix& rho, const GateMatrix& g, std::span<const int> targets) {
  detail::check_targets(rho.n_qubits(), targets);
  if (static_cast<int>(targets.size()) != g.arity()) throw std::invalid_argument("target count does not match gate arity");
  return DensityMatrix(rho.n_qubits(), detail::sandwich(rho.matrix(), rho.n_qubits(), g.matrix(), targets),
                       DensityMatrix::Unchecked{});
}

inline DensityMatrix apply_gate(const DensityMatrix& rho, const GateMatrix& g, std::initializer_list<int> targets) {
  return apply_gate(rho, g, std::span<const int>(targets.begin(), targets.size()));
}

inline double kraus_completeness_error(std::span<const Operator> ks) {
  if (ks.empty()) return std::numeric_limits<double>::infinity();
  const auto d = static_cast<Eigen::Index>(ks.front().dim());
  Matrix sum = Matrix::Zero(d, d);
  for (const auto& k : ks) {
    if (k.n_qubits() != ks.front().n_qubits()) return std::numeric_limits<double>::infinity();
    sum += k.matrix().adjoint() * k.matrix();
  }
  return (sum - Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
}

inline DensityMatrix apply_kraus(const DensityMatrix& rho, std::span<const Operator> ks, std::span<const int> targets) {
  detail::check_targets(rho.n_qubits(), targets);
  if (kraus_completeness_error(ks) > tol::physical) throw std::invalid_argument("Kraus set is not trace preserving");
  if (ks.front().n_qubits() != static_cast<int>(targets.size())) throw std::invalid_argument("Kraus arity does not match targets");
  const auto d = static_cast<Eigen::Index>(rho.dim());
  Matrix out = Matrix::Zero(d, d);
  for (const auto& k : ks) out += detail::sandwich(rho.matrix(), rho.n_qubits(), k.matrix(), targets);
  return DensityMatrix(rho.n_qubits(), std::move(out), DensityMatrix::Unchecked{});
}

inline DensityMatrix apply_kraus(const DensityMatrix& rho, std::span<const Operator> ks, std::initializer_list<int> targets) {
  return apply_kraus(rho, ks, std::span<const int>(targets.begin(), targets.size()));
}

// Reduced state on `keep`, in the order given (so this also permutes qubits).
inline DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const int> keep) {
  if (keep.empty()) throw std::invalid_argument("partial trace needs a nonempty keep set");
  detail::check_targets(rho.n_qubits(), keep);
  const int n = rho.n_qubits();
  std::vector<int> traced;
  for (int q = 0; q < n; ++q)
    if (std::find(keep.begin(), keep.end(), q) == keep.end()) traced.push_back(q);

  const auto kept = detail::embed(n, keep);
  std::vector<std::size_t> env{0};
  if (!traced.empty()) env = detail::embed(n, traced).offsets;

  const std::size_t dk = kept.offsets.size();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(dk), static_cast<Eigen::Index>(dk));
  for (std::size_t i = 0; i < dk; ++i)
    for (std::size_t j = 0; j < dk; ++j) {
      Complex acc = 0;
      for (std::size_t e : env) acc += rho(kept.offsets[i] + e, kept.offsets[j] + e);
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = acc;
    }
  return DensityMatrix(static_cast<int>(keep.size()), std::move(out), DensityMatrix::Unchecked{});
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, std::initializer_list<int> keep) {
  return partial_trace(rho, std::span<const int>(keep.begin(), keep.size()));
}

// Unnormalized projection of `q` onto `outcome`; returns the Born probability.
struct Projection {
  DensityMatrix post;
  double probability;
};

inline Projection project_qubit(const DensityMatrix& rho, int q, int outcome) {
  const int n = rho.n_qubits();
  if (q < 0 || q >= n) throw std::out_of_range("measured qubit outside register");
  if (outcome != 0 && outcome != 1) throw std::invalid_argument("outcome must be 0 or 1");
  const std::size_t bit = std::size_t{1} << detail::bit_position(n, q);
  const std::size_t want = outcome ? bit : 0;
  Matrix m = rho.matrix();
  double prob = 0.0;
  for (std::size_t i = 0; i < rho.dim(); ++i) {
    if ((i & bit) == want) prob += m(i, i).real();
    for (std::size_t j = 0; j < rho.dim(); ++j)
      if ((i & bit) != want || (j & bit) != want) m(i, j) = 0;
  }
  if (prob >= tol::underflow) m /= prob;
  return {DensityMatrix(n, std::move(m), DensityMatrix::Unchecked{}), std::max(prob, 0.0)};
}

struct Measurement {
  int outcome;
  DensityMatrix post;
  double probability;
};

inline Measurement measure_qubit(const DensityMatrix& rho, int q, RandomStream& rng) {
  const auto zero = project_qubit(rho, q, 0);
  const int outcome = rng.uniform() < zero.probability ? 0 : 1;
  auto branch = outcome == 0 ? zero : project_qubit(rho, q, 1);
  if (branch.probability < tol::underflow) {
    throw std::runtime_error("measurement branch probability underflow");
  }
  return {outcome, std::move(branch.post), branch.probability};
}

enum class Pauli : char { I = 'I', X = 'X', Y = 'Y', Z = 'Z' };

inline std::vector<Pauli> parse_paulis(std::string_view labels) {
  std::vector<Pauli> out;
  for (char c : labels) {
    switch (c) {
      case 'I': case 'X': case 'Y': case 'Z': out.push_back(static_cast<Pauli>(c)); break;
      default: throw std::invalid_argument(std::string("invalid Pauli label '") + c + "'");
    }
  }
  return out;
}

// Tr(rho P) for a Pauli string with one label per qubit.
inline double pauli_expectation(const DensityMatrix& rho, std::span<const Pauli> ops) {
  const int n = rho.n_qubits();
  if (static_cast<int>(ops.size()) != n) throw std::invalid_argument("need one Pauli label per qubit");
  std::size_t flip = 0;
  for (int q = 0; q < n; ++q) {
    if (ops[q] == Pauli::X || ops[q] == Pauli::Y) flip |= std::size_t{1} << detail::bit_position(n, q);
  }
  // Tr(rho P) = sum_i rho(j, i) <i|P|j> with j = i ^ flip.
  Complex acc = 0;
  for (std::size_t i = 0; i < rho.dim(); ++i) {
    const std::size_t j = i ^ flip;
    Complex factor = 1;
    for (int q = 0; q < n; ++q) {
      const bool b = (i >> detail::bit_position(n, q)) & 1U;
      switch (ops[q]) {
        case Pauli::Z: if (b) factor = -factor; break;
        case Pauli::Y: factor *= b ? Complex(0, 1) : Complex(0, -1); break;
        default: break;
      }
    }
    acc += rho(j, i) * factor;
  }
  return acc.real();
}

inline double pauli_expectation(const DensityMatrix& rho, std::string_view labels) {
  const auto ops = parse_paulis(labels);
  return pauli_expectation(rho, ops);
}

inline double fidelity_with_pure(const DensityMatrix& rho, const PureState& target) {
  if (rho.n_qubits() != target.n_qubits()) throw std::invalid_argument("dimension mismatch");
  const Complex f = target.amplitudes().dot(rho.matrix() * target.amplitudes());
  return f.real();
}

// Entrywise affine mix a*rho1 + (1-a)*rho2.
inline DensityMatrix mix(const DensityMatrix& rho1, const DensityMatrix& rho2, double weight1) {
  if (rho1.n_qubits() != rho2.n_qubits()) throw std::invalid_argument("dimension mismatch");
  if (weight1 < 0.0 || weight1 > 1.0) throw std::invalid_argument("mixing weight outside [0, 1]");
  return DensityMatrix(rho1.n_qubits(), weight1 * rho1.matrix() + (1.0 - weight1) * rho2.matrix(),
                       DensityMatrix::Unchecked{});
}

// Re-express the register so new qubit i is old qubit order[i].
inline DensityMatrix permute(const DensityMatrix& rho, std::span<const int> order) {
  if (static_cast<int>(order.size()) != rho.n_qubits()) throw std::invalid_argument("permutation must list every qubit");
  return partial_trace(rho, order);
}

inline DensityMatrix permute(const DensityMatrix& rho, std::initializer_list<int> order) {
  return permute(rho, std::span<const int>(order.begin(), order.size()));
}

// ---------------------------------------------------------------------------
// Debug dump: a header line, then one line per row holding re/im pairs with 17
// significant digits.

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);
  return buf;
}

inline void write_dump(std::ostream& os, const DensityMatrix& rho) {
  os << "density_matrix " << rho.n_qubits() << '\n';
  for (std::size_t r = 0; r < rho.dim(); ++r) {
    for (std::size_t c = 0; c < rho.dim(); ++c) {
      if (c) os << ' ';
      os << format_double(rho(r, c).real()) << ' ' << format_double(rho(r, c).imag());
    }
    os << '\n';
  }
}

inline std::string dump(const DensityMatrix& rho) {
  std::ostringstream os;
  write_dump(os, rho);
  return os.str();
}

inline DensityMatrix read_dump(std::istream& is) {
  std::string tag;
  int n = 0;
  if (!(is >> tag >> n) || tag != "density_matrix") throw std::runtime_error("malformed density matrix dump header");
  if (n < 1 || n > kMaxQubits) throw std::runtime_error("dump register size out of range");
  const auto d = static_cast<Eigen::Index>(dim_of(n));
  Matrix m(d, d);
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c) {
      double re = 0, im = 0;
      if (!(is >> re >> im)) throw std::runtime_error("truncated density matrix dump");
      m(r, c) = Complex(re, im);
    }
  return DensityMatrix(n, std::move(m), DensityMatrix::Unchecked{});
}

// ---------------------------------------------------------------------------
// Named states

namespace states {

inline PureState zero() { return PureState::basis(1, 0); }
inline PureState one() { return PureState::basis(1, 1); }
inline PureState plus_x() { return PureState::normalized(1, Vector{{1.0, 1.0}}); }
inline PureState minus_x() { return PureState::normalized(1, Vector{{1.0, -1.0}}); }
inline PureState plus_y() { return PureState::normalized(1, Vector{{Complex(1.0), Complex(0, 1)}}); }
inline PureState minus_y() { return PureState::normalized(1, Vector{{Complex(1.0), Complex(0, -1)}}); }

// (|01> + sign e^{i phase} |10>) / sqrt(2)
inline PureState psi(int sign, double phase = 0.0) {
  const double s = 1.0 / std::sqrt(2.0);
  Vector v = Vector::Zero(4);
  v(1) = s;
  v(2) = s * static_cast<double>(sign) * std::polar(1.0, phase);
  return PureState(2, std::move(v));
}
inline PureState psi_plus() { return psi(+1); }
inline PureState psi_minus() { return psi(-1); }

// G G^dagger / tr with G a complex Ginibre matrix of size 2^n by 2^n.
inline DensityMatrix random_mixed(int n_qubits, RandomStream& rng) {
  const auto d = static_cast<Eigen::Index>(dim_of(n_qubits));
  Matrix g(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = Complex(rng.normal(), rng.normal());
  Matrix m = g * g.adjoint();
  m /= m.trace().real();
  m = 0.5 * (m + m.adjoint()).eval();
  return DensityMatrix(n_qubits, std::move(m));
}

inline PureState random_pure(int n_qubits, RandomStream& rng) {
  const auto d = static_cast<Eigen::Index>(dim_of(n_qubits));
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = Complex(rng.normal(), rng.normal());
  return PureState::normalized(n_qubits, std::move(v));
}

}  // namespace states

}  // namespace distill
