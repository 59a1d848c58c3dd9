#pragma once

// Dense matrix products for the operator layer. Eigen supplies the kernels;
// all calls are single-threaded and accumulate in a fixed order, so results
// are bitwise reproducible run to run on the same build.

#include <Eigen/Core>

#include <cstdint>

namespace sviptr::mm {

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// C[M,N] = A[M,K] * B[K,N]   (accumulate: C += ...)
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
             bool accumulate = false) {
  ConstMatMap<T> A(a, m, k), B(b, k, n);
  MatMap<T> C(c, m, n);
  if (accumulate)
    C.noalias() += A * B;
  else
    C.noalias() = A * B;
}

// C[M,N] = A[M,K] * B^T, with B stored as [N,K]
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
             bool accumulate = false) {
  ConstMatMap<T> A(a, m, k), B(b, n, k);
  MatMap<T> C(c, m, n);
  if (accumulate)
    C.noalias() += A * B.transpose();
  else
    C.noalias() = A * B.transpose();
}

// C[M,N] = A^T * B, with A stored as [K,M]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
             bool accumulate = false) {
  ConstMatMap<T> A(a, k, m), B(b, k, n);
  MatMap<T> C(c, m, n);
  if (accumulate)
    C.noalias() += A.transpose() * B;
  else
    C.noalias() = A.transpose() * B;
}

}  // namespace sviptr::mm
