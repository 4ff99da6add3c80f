#include "acan/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace acan::kernels {

namespace {
std::atomic<bool> g_parallel{true};
}

void set_parallel(bool on) { g_parallel.store(on); }
bool parallel_enabled() { return g_parallel.load(); }

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// ---------------------------------------------------------------- mm_acc

namespace {

// One output row of C. k ascending, j contiguous: the j loop vectorizes and
// the per-element order is fixed regardless of how rows are distributed.
inline void mm_row(const double* arow, const double* b, double* crow, int k, int n) {
  for (int kk = 0; kk < k; ++kk) {
    double a = arow[kk];
    const double* brow = b + static_cast<int64_t>(kk) * n;
    for (int j = 0; j < n; ++j) crow[j] += a * brow[j];
  }
}

}  // namespace

void mm_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  if (g_parallel.load()) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i)
      mm_row(a + static_cast<int64_t>(i) * k, b, c + static_cast<int64_t>(i) * n, k, n);
  } else {
    for (int i = 0; i < m; ++i)
      mm_row(a + static_cast<int64_t>(i) * k, b, c + static_cast<int64_t>(i) * n, k, n);
  }
}

void transpose(const double* a, double* at, int rows, int cols) {
  auto body = [&](int r) {
    const double* arow = a + static_cast<int64_t>(r) * cols;
    for (int cidx = 0; cidx < cols; ++cidx)
      at[static_cast<int64_t>(cidx) * rows + r] = arow[cidx];
  };
  if (g_parallel.load()) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) body(r);
  } else {
    for (int r = 0; r < rows; ++r) body(r);
  }
}

// ---------------------------------------------------------------- im2col

namespace {

// Fill one row of the col matrix: the (ci, kt, kh, kw) tap across all output
// positions.
inline void im2col_row(const double* in, const ConvGeom& g, int ck, double* crow) {
  int kw = ck % g.kw;
  int kh = (ck / g.kw) % g.kh;
  int kt = (ck / (g.kw * g.kh)) % g.kt;
  int ci = ck / (g.kw * g.kh * g.kt);
  int p = 0;
  for (int ot = 0; ot < g.ot; ++ot) {
    int it = ot * g.st + kt - g.pt;
    for (int oh = 0; oh < g.oh; ++oh) {
      int ih = oh * g.sh + kh - g.ph;
      if (it < 0 || it >= g.t || ih < 0 || ih >= g.h) {
        for (int ow = 0; ow < g.ow; ++ow) crow[p++] = 0.0;
        continue;
      }
      const double* irow = in + ((static_cast<int64_t>(ci) * g.t + it) * g.h + ih) * g.w;
      for (int ow = 0; ow < g.ow; ++ow) {
        int iw = ow * g.sw + kw - g.pw;
        crow[p++] = (iw >= 0 && iw < g.w) ? irow[iw] : 0.0;
      }
    }
  }
}

// Fold all taps of one input channel back into in_grad. Channel slices are
// disjoint, so channels can run concurrently; within a channel the
// (kt, kh, kw, position) order is fixed.
inline void col2im_channel(const double* col, const ConvGeom& g, int ci, double* in_grad) {
  int pos = g.positions();
  double* gch = in_grad + static_cast<int64_t>(ci) * g.t * g.h * g.w;
  for (int kt = 0; kt < g.kt; ++kt)
    for (int kh = 0; kh < g.kh; ++kh)
      for (int kw = 0; kw < g.kw; ++kw) {
        int ck = ((ci * g.kt + kt) * g.kh + kh) * g.kw + kw;
        const double* crow = col + static_cast<int64_t>(ck) * pos;
        int p = 0;
        for (int ot = 0; ot < g.ot; ++ot) {
          int it = ot * g.st + kt - g.pt;
          for (int oh = 0; oh < g.oh; ++oh) {
            int ih = oh * g.sh + kh - g.ph;
            if (it < 0 || it >= g.t || ih < 0 || ih >= g.h) {
              p += g.ow;
              continue;
            }
            double* grow = gch + (static_cast<int64_t>(it) * g.h + ih) * g.w;
            for (int ow = 0; ow < g.ow; ++ow, ++p) {
              int iw = ow * g.sw + kw - g.pw;
              if (iw >= 0 && iw < g.w) grow[iw] += crow[p];
            }
          }
        }
      }
}

}  // namespace

void im2col(const double* in, const ConvGeom& g, double* col) {
  int patch = g.patch();
  int pos = g.positions();
  if (g_parallel.load()) {
#pragma omp parallel for schedule(static)
    for (int ck = 0; ck < patch; ++ck)
      im2col_row(in, g, ck, col + static_cast<int64_t>(ck) * pos);
  } else {
    for (int ck = 0; ck < patch; ++ck)
      im2col_row(in, g, ck, col + static_cast<int64_t>(ck) * pos);
  }
}

void col2im_acc(const double* col, const ConvGeom& g, double* in_grad) {
  if (g_parallel.load()) {
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < g.c; ++ci) col2im_channel(col, g, ci, in_grad);
  } else {
    for (int ci = 0; ci < g.c; ++ci) col2im_channel(col, g, ci, in_grad);
  }
}

// ------------------------------------------------------------- reductions

namespace {

constexpr int kLanes = 4;

// 4 interleaved lanes inside a chunk, combined in lane order. The schedule is
// a function of the index range only, never of the thread count.
inline double chunk_sum(const double* x, int64_t lo, int64_t hi) {
  double lane[kLanes] = {0, 0, 0, 0};
  int64_t i = lo;
  for (; i + kLanes <= hi; i += kLanes)
    for (int l = 0; l < kLanes; ++l) lane[l] += x[i + l];
  double tail = 0.0;
  for (; i < hi; ++i) tail += x[i];
  return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + tail;
}

inline double chunk_dot(const double* a, const double* b, int64_t lo, int64_t hi) {
  double lane[kLanes] = {0, 0, 0, 0};
  int64_t i = lo;
  for (; i + kLanes <= hi; i += kLanes)
    for (int l = 0; l < kLanes; ++l) lane[l] += a[i + l] * b[i + l];
  double tail = 0.0;
  for (; i < hi; ++i) tail += a[i] * b[i];
  return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + tail;
}

inline double chunk_sqdist(const double* a, const double* b, int64_t lo, int64_t hi) {
  double lane[kLanes] = {0, 0, 0, 0};
  int64_t i = lo;
  for (; i + kLanes <= hi; i += kLanes)
    for (int l = 0; l < kLanes; ++l) {
      double d = a[i + l] - b[i + l];
      lane[l] += d * d;
    }
  double tail = 0.0;
  for (; i < hi; ++i) {
    double d = a[i] - b[i];
    tail += d * d;
  }
  return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + tail;
}

template <typename ChunkFn>
double reduce_chunks(int64_t n, ChunkFn&& fn) {
  int64_t nchunks = (n + detail::kChunk - 1) / detail::kChunk;
  if (nchunks <= 1) return fn(0, n);
  std::vector<double> partial(nchunks);
  if (g_parallel.load()) {
#pragma omp parallel for schedule(static)
    for (int64_t cidx = 0; cidx < nchunks; ++cidx)
      partial[cidx] = fn(cidx * detail::kChunk, std::min(n, (cidx + 1) * detail::kChunk));
  } else {
    for (int64_t cidx = 0; cidx < nchunks; ++cidx)
      partial[cidx] = fn(cidx * detail::kChunk, std::min(n, (cidx + 1) * detail::kChunk));
  }
  double acc = 0.0;
  for (double p : partial) acc += p;
  return acc;
}

}  // namespace

double sum(const double* x, int64_t n) {
  return reduce_chunks(n, [&](int64_t lo, int64_t hi) { return chunk_sum(x, lo, hi); });
}

double dot(const double* a, const double* b, int64_t n) {
  return reduce_chunks(n, [&](int64_t lo, int64_t hi) { return chunk_dot(a, b, lo, hi); });
}

double sqdist(const double* a, const double* b, int64_t n) {
  return reduce_chunks(n, [&](int64_t lo, int64_t hi) { return chunk_sqdist(a, b, lo, hi); });
}

void axpy(double alpha, const double* x, double* y, int64_t n) {
  chunked_for(n, [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) y[i] += alpha * x[i];
  });
}

namespace detail {

void chunked_for_impl(int64_t n, void (*trampoline)(void*, int64_t, int64_t), void* ctx) {
  int64_t nchunks = (n + kChunk - 1) / kChunk;
  if (nchunks <= 1) {
    if (n > 0) trampoline(ctx, 0, n);
    return;
  }
  if (g_parallel.load()) {
#pragma omp parallel for schedule(static)
    for (int64_t cidx = 0; cidx < nchunks; ++cidx)
      trampoline(ctx, cidx * kChunk, std::min(n, (cidx + 1) * kChunk));
  } else {
    for (int64_t cidx = 0; cidx < nchunks; ++cidx)
      trampoline(ctx, cidx * kChunk, std::min(n, (cidx + 1) * kChunk));
  }
}

}  // namespace detail

}  // namespace acan::kernels
