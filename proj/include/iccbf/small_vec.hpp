#pragma once

// Fixed-size vector helpers for code templated on the scalar type.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstddef>

#include "iccbf/autodiff.hpp"

namespace iccbf {

template <class S, std::size_t N>
using Vec = std::array<S, N>;

/// Row-major N×M matrix.
template <class S, std::size_t N, std::size_t M>
using Mat = std::array<std::array<S, M>, N>;

template <class S, std::size_t N>
S dot(const Vec<S, N>& a, const Vec<S, N>& b) {
  S acc(0.0);
  for (std::size_t i = 0; i < N; ++i) acc += a[i] * b[i];
  return acc;
}

/// aᵀ·G for a ∈ ℝᴺ and G ∈ ℝᴺˣᴹ.
template <class S, std::size_t N, std::size_t M>
Vec<S, M> left_multiply(const Vec<S, N>& a, const Mat<S, N, M>& g) {
  Vec<S, M> out;
  out.fill(S(0.0));
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < M; ++j) out[j] += a[i] * g[i][j];
  }
  return out;
}

/// Euclidean norm whose derivative is taken as zero at the origin.
template <class S, std::size_t N>
S safe_norm(const Vec<S, N>& a) {
  using std::sqrt;
  bool all_zero = true;
  for (const auto& c : a) all_zero = all_zero && value_of(c) == 0.0;
  if (all_zero) return S(0.0);
  return sqrt(dot(a, a));
}

template <std::size_t N>
Eigen::VectorXd to_eigen(const Vec<double, N>& a) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(N));
  for (std::size_t i = 0; i < N; ++i) out[static_cast<Eigen::Index>(i)] = a[i];
  return out;
}

template <std::size_t N, std::size_t M>
Eigen::MatrixXd to_eigen(const Mat<double, N, M>& a) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(M));
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < M; ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a[i][j];
    }
  }
  return out;
}

template <std::size_t N>
Vec<double, N> from_eigen(const Eigen::VectorXd& a) {
  Vec<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = a[static_cast<Eigen::Index>(i)];
  return out;
}

}  // namespace iccbf
