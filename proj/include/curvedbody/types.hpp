#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace cb {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatX = Mat<double>;
using VecX = Vec<double>;
using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

enum class ErrorKind {
  SingularPoint,
  BadParams,
  NumericalDifferentiationFailure,
  DimensionMismatch,
  UnsupportedChart,
  SingularFrame,
  SingularPhi,
  SingularMetric,
  UnsupportedForce,
  IncompatibleMode,
  StepIntoSingularity,
  NoClassicalRegion,
  UnboundedMotion,
  QuadratureFailure,
  OutOfRegime,
  BracketFailure,
  ParseError,
  ValidationError,
  IoError,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Rank-3 array T(i, j, k), stored as n slices of n x n matrices indexed by i.
template <typename Scalar>
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(int n) : n_(n), slices_(n, Mat<Scalar>::Zero(n, n)) {}

  int dim() const { return n_; }
  Scalar& operator()(int i, int j, int k) { return slices_[i](j, k); }
  const Scalar& operator()(int i, int j, int k) const { return slices_[i](j, k); }
  Mat<Scalar>& slice(int i) { return slices_[i]; }
  const Mat<Scalar>& slice(int i) const { return slices_[i]; }

  Scalar max_abs() const {
    Scalar m = 0;
    for (const auto& s : slices_) m = std::max(m, s.cwiseAbs().maxCoeff());
    return m;
  }

  Tensor3& operator+=(const Tensor3& o) {
    for (int i = 0; i < n_; ++i) slices_[i] += o.slices_[i];
    return *this;
  }
  Tensor3& operator-=(const Tensor3& o) {
    for (int i = 0; i < n_; ++i) slices_[i] -= o.slices_[i];
    return *this;
  }
  Tensor3& operator*=(Scalar s) {
    for (auto& m : slices_) m *= s;
    return *this;
  }
  friend Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
  friend Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
  friend Tensor3 operator*(Scalar s, Tensor3 a) { return a *= s; }

 private:
  int n_ = 0;
  std::vector<Mat<Scalar>> slices_;
};

// Rank-4 array T(a, b, i, j) with dense row-major storage.
template <typename Scalar>
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(int n) : n_(n), data_(static_cast<size_t>(n) * n * n * n, Scalar(0)) {}

  int dim() const { return n_; }
  Scalar& operator()(int a, int b, int i, int j) { return data_[index(a, b, i, j)]; }
  const Scalar& operator()(int a, int b, int i, int j) const { return data_[index(a, b, i, j)]; }

  Scalar max_abs() const {
    Scalar m = 0;
    for (const auto& v : data_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  size_t index(int a, int b, int i, int j) const {
    return ((static_cast<size_t>(a) * n_ + b) * n_ + i) * n_ + j;
  }
  int n_ = 0;
  std::vector<Scalar> data_;
};

using Tensor3d = Tensor3<double>;
using Tensor4d = Tensor4<double>;

template <typename Scalar>
Mat<Scalar> skew_part(const Mat<Scalar>& m) {
  return (m - m.transpose()) / Scalar(2);
}

template <typename Scalar>
Mat<Scalar> sym_part(const Mat<Scalar>& m) {
  return (m + m.transpose()) / Scalar(2);
}

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> hat(const Eigen::Matrix<Scalar, 3, 1>& v) {
  Eigen::Matrix<Scalar, 3, 3> m;
  m << Scalar(0), -v(2), v(1), v(2), Scalar(0), -v(0), -v(1), v(0), Scalar(0);
  return m;
}

// Levi-Civita symbol on three indices.
inline double epsilon3(int a, int b, int c) {
  return 0.5 * static_cast<double>((a - b) * (b - c) * (c - a));
}

}  // namespace cb
