#pragma once

#include <cstdint>
#include <memory>
#include <type_traits>

// Hot numeric kernels. Every kernel has a serial driver and an OpenMP driver
// over the same per-element routine: one owner per output element, fixed
// accumulation order. The two drivers therefore produce bit-identical results
// for any thread count, which the tests assert and the trainer relies on for
// reproducibility. Reductions use a fixed chunk/lane schedule instead of
// left-to-right summation so they vectorize and still stay bit-stable.

namespace acan::kernels {

// Process-wide switch between the serial and OpenMP drivers.
void set_parallel(bool on);
bool parallel_enabled();
int max_threads();

// C[m x n] += A[m x k] * B[k x n], all row-major.
void mm_acc(const double* a, const double* b, double* c, int m, int k, int n);

// AT[cols x rows] = transpose of A[rows x cols].
void transpose(const double* a, double* at, int rows, int cols);

struct ConvGeom {
  int c, t, h, w;        // input extents
  int co, kt, kh, kw;    // kernel extents
  int st, sh, sw;        // strides
  int pt, ph, pw;        // padding
  int ot, oh, ow;        // output extents

  int patch() const { return c * kt * kh * kw; }
  int positions() const { return ot * oh * ow; }
};

// col[patch x positions] = unfolded input patches (zero padded).
void im2col(const double* in, const ConvGeom& g, double* col);

// in_grad[c x t x h x w] += fold of col[patch x positions]. Adjoint of im2col.
void col2im_acc(const double* col, const ConvGeom& g, double* in_grad);

// Bit-stable reductions (fixed chunk schedule, 4 lanes per chunk).
double sum(const double* x, int64_t n);
double dot(const double* a, const double* b, int64_t n);
double sqdist(const double* a, const double* b, int64_t n);  // sum (a-b)^2

// y[i] += alpha * x[i]
void axpy(double alpha, const double* x, double* y, int64_t n);

// Parallel loop over [0, n) in fixed chunks; fn(lo, hi) handles one chunk.
// Chunk boundaries do not depend on the thread count.
template <typename Fn>
void chunked_for(int64_t n, Fn&& fn);

namespace detail {
constexpr int64_t kChunk = 2048;
void chunked_for_impl(int64_t n, void (*trampoline)(void*, int64_t, int64_t), void* ctx);
}  // namespace detail

template <typename Fn>
void chunked_for(int64_t n, Fn&& fn) {
  using F = std::remove_reference_t<Fn>;
  auto trampoline = [](void* ctx, int64_t lo, int64_t hi) {
    (*static_cast<F*>(ctx))(lo, hi);
  };
  detail::chunked_for_impl(n, trampoline, const_cast<F*>(std::addressof(fn)));
}

}  // namespace acan::kernels
