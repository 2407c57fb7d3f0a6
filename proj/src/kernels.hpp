#pragma once

#include <cstddef>
#include <vector>

namespace tslab::kernels {

// c[m, n] += a[m, k] * b[k, n], row-major. The column loop is blocked so a
// slab of b stays cache resident across rows of a.
inline void mm_nn(std::size_t m, std::size_t k, std::size_t n, const float* __restrict a,
                  const float* __restrict b, float* __restrict c) {
  constexpr std::size_t kBlock = 512;
  for (std::size_t j0 = 0; j0 < n; j0 += kBlock) {
    const std::size_t j1 = j0 + kBlock < n ? j0 + kBlock : n;
    for (std::size_t i = 0; i < m; ++i) {
      float* __restrict crow = c + i * n;
      const float* arow = a + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        const float av = arow[p];
        const float* __restrict brow = b + p * n;
        for (std::size_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

// c[k, n] += a[m, k]^T * b[m, n]
inline void mm_tn(std::size_t m, std::size_t k, std::size_t n, const float* __restrict a,
                  const float* __restrict b, float* __restrict c) {
  for (std::size_t i = 0; i < m; ++i) {
    const float* arow = a + i * k;
    const float* __restrict brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const float av = arow[p];
      float* __restrict crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

inline void transpose(std::size_t rows, std::size_t cols, const float* __restrict src, float* __restrict dst) {
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
  }
}

// c[m, n] += a[m, k] * b[n, k]^T, via an explicit transpose of b so the
// inner loop stays a vectorizable axpy.
inline void mm_nt(std::size_t m, std::size_t k, std::size_t n, const float* a, const float* b, float* c,
                  std::vector<float>& scratch) {
  scratch.resize(k * n);
  transpose(n, k, b, scratch.data());
  mm_nn(m, k, n, a, scratch.data(), c);
}

}  // namespace tslab::kernels
