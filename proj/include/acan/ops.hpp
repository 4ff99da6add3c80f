#pragma once

#include "acan/tensor.hpp"

// Differentiable tensor operations. Forward results are checked finite at
// creation; backward closures accumulate (+=) into pass-local parent buffers,
// so fan-out sums naturally. Shapes are explicit: no broadcasting beyond
// scalar-tensor.

namespace acan {

struct Stride3 {
  int t = 1, h = 1, w = 1;
};
struct Pad3 {
  int t = 0, h = 0, w = 0;
};

// a[m x k] * b[k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);

// x[C x T x H x W], kernel[CO x C x KT x KH x KW] -> [CO x OT x OH x OW],
// cross-correlation, out extent = floor((in + 2p - k) / s) + 1 per axis.
Tensor conv3d(const Tensor& x, const Tensor& kernel, Stride3 stride, Pad3 pad);

// x[C x ...] + bias[C], bias broadcast over trailing axes.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

// Row-wise softmax with per-row max subtraction.
Tensor softmax_rows(const Tensor& x);

// Identity forward; backward scales the upstream gradient by -lambda.
Tensor grad_reverse(const Tensor& x, double lambda);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
// log(max(x, floor)); gradient is zero in the clamped region.
Tensor log_clamped(const Tensor& x, double floor = 1e-12);
Tensor sqrt(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);  // scalar-tensor broadcast allowed
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& x, double s);
Tensor mul_scalar(const Tensor& x, double s);

Tensor sum(const Tensor& x);   // -> scalar
Tensor mean(const Tensor& x);  // -> scalar

// [C x ...] -> [C], mean over all trailing axes.
Tensor global_avg_pool(const Tensor& x);

// 1-D concatenation a ++ b.
Tensor concat(const Tensor& a, const Tensor& b);

// n same-length 1-D tensors -> [n x c] matrix.
Tensor stack_rows(const std::vector<Tensor>& rows);

Tensor reshape(const Tensor& x, Shape dims);
Tensor transpose2d(const Tensor& x);

// sqrt(sum(x * x)) -> scalar
Tensor frobenius_norm(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& x) { return mul_scalar(x, s); }
inline Tensor operator*(const Tensor& x, double s) { return mul_scalar(x, s); }

}  // namespace acan
