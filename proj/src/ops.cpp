#include "acan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "acan/kernels.hpp"

namespace acan {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dims() != b.dims())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.dims()) +
                     " vs " + shape_str(b.dims()));
}

std::shared_ptr<std::vector<double>> share(std::vector<double> v) {
  return std::make_shared<std::vector<double>>(std::move(v));
}

}  // namespace

// ----------------------------------------------------------------- matmul

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.dims()) + " vs " +
                     shape_str(b.dims()));
  int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
  kernels::mm_acc(a.data().data(), b.data().data(), out.data(), m, k, n);

  auto ai = a.impl();
  auto bi = b.impl();
  return Tensor::make_node(
      {m, n}, std::move(out), {a, b},
      [ai, bi, m, k, n](const std::vector<double>& g,
                        const std::vector<std::vector<double>*>& sinks) {
        if (sinks[0]) {  // dA = g * B^T
          std::vector<double> bt(static_cast<size_t>(n) * k);
          kernels::transpose(bi->data.data(), bt.data(), k, n);
          kernels::mm_acc(g.data(), bt.data(), sinks[0]->data(), m, n, k);
        }
        if (sinks[1]) {  // dB = A^T * g
          std::vector<double> at(static_cast<size_t>(k) * m);
          kernels::transpose(ai->data.data(), at.data(), m, k);
          kernels::mm_acc(at.data(), g.data(), sinks[1]->data(), k, m, n);
        }
      },
      "matmul");
}

// ----------------------------------------------------------------- conv3d

Tensor conv3d(const Tensor& x, const Tensor& kernel, Stride3 stride, Pad3 pad) {
  if (x.ndim() != 4) throw ShapeError("conv3d: input must be CxTxHxW, got " + shape_str(x.dims()));
  if (kernel.ndim() != 5)
    throw ShapeError("conv3d: kernel must be COxCxKTxKHxKW, got " + shape_str(kernel.dims()));
  if (kernel.dim(1) != x.dim(0))
    throw ShapeError("conv3d: channel mismatch, input " + shape_str(x.dims()) + " vs kernel " +
                     shape_str(kernel.dims()));
  if (stride.t <= 0 || stride.h <= 0 || stride.w <= 0)
    throw UsageError("conv3d: strides must be positive");

  kernels::ConvGeom g;
  g.c = x.dim(0);
  g.t = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.co = kernel.dim(0);
  g.kt = kernel.dim(2);
  g.kh = kernel.dim(3);
  g.kw = kernel.dim(4);
  g.st = stride.t;
  g.sh = stride.h;
  g.sw = stride.w;
  g.pt = pad.t;
  g.ph = pad.h;
  g.pw = pad.w;
  g.ot = (g.t + 2 * g.pt - g.kt) / g.st + 1;
  g.oh = (g.h + 2 * g.ph - g.kh) / g.sh + 1;
  g.ow = (g.w + 2 * g.pw - g.kw) / g.sw + 1;
  if (g.t + 2 * g.pt < g.kt || g.h + 2 * g.ph < g.kh || g.w + 2 * g.pw < g.kw)
    throw ShapeError("conv3d: kernel " + shape_str(kernel.dims()) +
                     " does not fit padded input " + shape_str(x.dims()));

  int patch = g.patch(), pos = g.positions();
  std::vector<double> col(static_cast<size_t>(patch) * pos);
  kernels::im2col(x.data().data(), g, col.data());
  std::vector<double> out(static_cast<size_t>(g.co) * pos, 0.0);
  kernels::mm_acc(kernel.data().data(), col.data(), out.data(), g.co, patch, pos);

  auto xi = x.impl();
  auto ki = kernel.impl();
  return Tensor::make_node(
      {g.co, g.ot, g.oh, g.ow}, std::move(out), {x, kernel},
      [xi, ki, g, patch, pos](const std::vector<double>& gout,
                              const std::vector<std::vector<double>*>& sinks) {
        if (sinks[1]) {  // dW = gout * col^T; col recomputed from the input
          std::vector<double> col(static_cast<size_t>(patch) * pos);
          kernels::im2col(xi->data.data(), g, col.data());
          std::vector<double> colt(static_cast<size_t>(pos) * patch);
          kernels::transpose(col.data(), colt.data(), patch, pos);
          kernels::mm_acc(gout.data(), colt.data(), sinks[1]->data(), g.co, pos, patch);
        }
        if (sinks[0]) {  // dX = fold(W^T * gout)
          std::vector<double> wt(static_cast<size_t>(patch) * g.co);
          kernels::transpose(ki->data.data(), wt.data(), g.co, patch);
          std::vector<double> dcol(static_cast<size_t>(patch) * pos, 0.0);
          kernels::mm_acc(wt.data(), gout.data(), dcol.data(), patch, g.co, pos);
          kernels::col2im_acc(dcol.data(), g, sinks[0]->data());
        }
      },
      "conv3d");
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  if (bias.ndim() != 1 || bias.dim(0) != x.dim(0))
    throw ShapeError("add_channel_bias: bias " + shape_str(bias.dims()) +
                     " does not match channels of " + shape_str(x.dims()));
  int c = x.dim(0);
  int64_t inner = x.numel() / c;
  std::vector<double> out(x.data().begin(), x.data().end());
  for (int ci = 0; ci < c; ++ci) {
    double b = bias.data()[ci];
    double* row = out.data() + ci * inner;
    for (int64_t i = 0; i < inner; ++i) row[i] += b;
  }
  return Tensor::make_node(
      x.dims(), std::move(out), {x, bias},
      [c, inner](const std::vector<double>& g,
                 const std::vector<std::vector<double>*>& sinks) {
        if (sinks[0]) kernels::axpy(1.0, g.data(), sinks[0]->data(), g.size());
        if (sinks[1])
          for (int ci = 0; ci < c; ++ci)
            (*sinks[1])[ci] += kernels::sum(g.data() + ci * inner, inner);
      },
      "add_channel_bias");
}

// ----------------------------------------------------------- row softmax

Tensor softmax_rows(const Tensor& x) {
  if (x.ndim() != 2) throw ShapeError("softmax_rows: expected matrix, got " + shape_str(x.dims()));
  int r = x.dim(0), c = x.dim(1);
  std::vector<double> out(x.numel());
  auto body = [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      const double* in = x.data().data() + i * c;
      double* o = out.data() + i * c;
      double mx = in[0];
      for (int j = 1; j < c; ++j) mx = std::max(mx, in[j]);
      double z = 0.0;
      for (int j = 0; j < c; ++j) {
        o[j] = std::exp(in[j] - mx);
        z += o[j];
      }
      double inv = 1.0 / z;
      for (int j = 0; j < c; ++j) o[j] *= inv;
    }
  };
  kernels::chunked_for(r, body);

  auto y = share(out);  // backward needs the softmax output itself
  return Tensor::make_node(
      {r, c}, std::move(out), {x},
      [y, r, c](const std::vector<double>& g,
                const std::vector<std::vector<double>*>& sinks) {
        if (!sinks[0]) return;
        auto body = [&](int64_t lo, int64_t hi) {
          for (int64_t i = lo; i < hi; ++i) {
            const double* yi = y->data() + i * c;
            const double* gi = g.data() + i * c;
            double* si = sinks[0]->data() + i * c;
            double dotgy = 0.0;
            for (int j = 0; j < c; ++j) dotgy += gi[j] * yi[j];
            for (int j = 0; j < c; ++j) si[j] += yi[j] * (gi[j] - dotgy);
          }
        };
        kernels::chunked_for(r, body);
      },
      "softmax_rows");
}

Tensor grad_reverse(const Tensor& x, double lambda) {
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tensor::make_node(
      x.dims(), std::move(out), {x},
      [lambda](const std::vector<double>& g,
               const std::vector<std::vector<double>*>& sinks) {
        if (sinks[0]) kernels::axpy(-lambda, g.data(), sinks[0]->data(), g.size());
      },
      "grad_reverse");
}

// ------------------------------------------------------------ elementwise

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& x, const char* name, Fwd fwd, Bwd make_bwd) {
  std::vector<double> out(x.numel());
  const double* in = x.data().data();
  kernels::chunked_for(x.numel(), [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) out[i] = fwd(in[i]);
  });
  return Tensor::make_node(x.dims(), std::move(out), {x}, make_bwd(), name);
}

}  // namespace

Tensor relu(const Tensor& x) {
  auto xi = x.impl();
  return unary_op(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [xi]() {
        return [xi](const std::vector<double>& g,
                    const std::vector<std::vector<double>*>& sinks) {
          if (!sinks[0]) return;
          kernels::chunked_for(g.size(), [&](int64_t lo, int64_t hi) {
            for (int64_t i = lo; i < hi; ++i)
              if (xi->data[i] > 0.0) (*sinks[0])[i] += g[i];
          });
        };
      });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.numel());
  const double* in = x.data().data();
  kernels::chunked_for(x.numel(), [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) out[i] = 1.0 / (1.0 + std::exp(-in[i]));
  });
  auto y = share(out);
  return Tensor::make_node(
      x.dims(), std::move(out), {x},
      [y](const std::vector<double>& g, const std::vector<std::vector<double>*>& sinks) {
        if (!sinks[0]) return;
        kernels::chunked_for(g.size(), [&](int64_t lo, int64_t hi) {
          for (int64_t i = lo; i < hi; ++i) {
            double v = (*y)[i];
            (*sinks[0])[i] += g[i] * v * (1.0 - v);
          }
        });
      },
      "sigmoid");
}

Tensor exp(const Tensor& x) {
  std::vector<double> out(x.numel());
  const double* in = x.data().data();
  kernels::chunked_for(x.numel(), [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) out[i] = std::exp(in[i]);
  });
  auto y = share(out);
  return Tensor::make_node(
      x.dims(), std::move(out), {x},
      [y](const std::vector<double>& g, const std::vector<std::vector<double>*>& sinks) {
        if (!sinks[0]) return;
        kernels::chunked_for(g.size(), [&](int64_t lo, int64_t hi) {
          for (int64_t i = lo; i < hi; ++i) (*sinks[0])[i] += g[i] * (*y)[i];
        });
      },
      "exp");
}

Tensor log_clamped(const Tensor& x, double floor) {
  auto xi = x.impl();
  return unary_op(
      x, "log_clamped", [floor](double v) { return std::log(std::max(v, floor)); },
      [xi, floor]() {
        return [xi, floor](const std::vector<double>& g,
                           const std::vector<std::vector<double>*>& sinks) {
          if (!sinks[0]) return;
          kernels::chunked_for(g.size(), [&](int64_t lo, int64_t hi) {
            for (int64_t i = lo; i < hi; ++i)
              if (xi->data[i] > floor) (*sinks[0])[i] += g[i] / xi->data[i];
          });
        };
      });
}

Tensor sqrt(const Tensor& x) {
  std::vector<double> out(x.numel());
  const double* in = x.data().data();
  for (int64_t i = 0; i < x.numel(); ++i) out[i] = std::sqrt(in[i]);
  auto y = share(out);
  return Tensor::make_node(
      x.dims(), std::move(out), {x},
      [y](const std::vector<double>& g, const std::vector<std::vector<double>*>& sinks) {
        if (!sinks[0]) return;
        for (size_t i = 0; i < g.size(); ++i) (*sinks[0])[i] += g[i] * 0.5 / (*y)[i];
      },
      "sqrt");
}

namespace {

enum class BinKind { Add, Sub, Mul };

Tensor binary_op(const Tensor& a, const Tensor& b, BinKind kind, const char* name) {
  // scalar-tensor broadcast only; anything else must match exactly
  bool a_scalar = a.numel() == 1, b_scalar = b.numel() == 1;
  if (!a_scalar && !b_scalar) require_same_shape(a, b, name);
  const Tensor& shaped = a_scalar ? b : a;
  int64_t n = shaped.numel();
  std::vector<double> out(n);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (int64_t i = 0; i < n; ++i) {
    double va = a_scalar ? pa[0] : pa[i];
    double vb = b_scalar ? pb[0] : pb[i];
    out[i] = kind == BinKind::Add ? va + vb : kind == BinKind::Sub ? va - vb : va * vb;
  }
  auto ai = a.impl();
  auto bi = b.impl();
  return Tensor::make_node(
      shaped.dims(), std::move(out), {a, b},
      [ai, bi, kind, a_scalar, b_scalar](const std::vector<double>& g,
                                         const std::vector<std::vector<double>*>& sinks) {
        auto deposit = [&](int slot, bool scalar, auto factor) {
          if (!sinks[slot]) return;
          std::vector<double>& s = *sinks[slot];
          if (scalar) {
            double acc = 0.0;
            for (size_t i = 0; i < g.size(); ++i) acc += g[i] * factor(i);
            s[0] += acc;
          } else {
            for (size_t i = 0; i < g.size(); ++i) s[i] += g[i] * factor(i);
          }
        };
        switch (kind) {
          case BinKind::Add:
            deposit(0, a_scalar, [](size_t) { return 1.0; });
            deposit(1, b_scalar, [](size_t) { return 1.0; });
            break;
          case BinKind::Sub:
            deposit(0, a_scalar, [](size_t) { return 1.0; });
            deposit(1, b_scalar, [](size_t) { return -1.0; });
            break;
          case BinKind::Mul:
            deposit(0, a_scalar, [&](size_t i) { return b_scalar ? bi->data[0] : bi->data[i]; });
            deposit(1, b_scalar, [&](size_t i) { return a_scalar ? ai->data[0] : ai->data[i]; });
            break;
        }
      },
      name);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Mul, "mul"); }

Tensor add_scalar(const Tensor& x, double s) { return add(x, Tensor::scalar(s)); }
Tensor mul_scalar(const Tensor& x, double s) { return mul(x, Tensor::scalar(s)); }

// -------------------------------------------------------------- reductions

Tensor sum(const Tensor& x) {
  double v = kernels::sum(x.data().data(), x.numel());
  return Tensor::make_node(
      {1}, {v}, {x},
      [](const std::vector<double>& g, const std::vector<std::vector<double>*>& sinks) {
        if (!sinks[0]) return;
        double gv = g[0];
        for (double& s : *sinks[0]) s += gv;
      },
      "sum");
}

Tensor mean(const Tensor& x) {
  int64_t n = x.numel();
  double v = kernels::sum(x.data().data(), n) / static_cast<double>(n);
  return Tensor::make_node(
      {1}, {v}, {x},
      [n](const std::vector<double>& g, const std::vector<std::vector<double>*>& sinks) {
        if (!sinks[0]) return;
        double gv = g[0] / static_cast<double>(n);
        for (double& s : *sinks[0]) s += gv;
      },
      "mean");
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.ndim() < 2) throw ShapeError("global_avg_pool: need channel + value axes, got " +
                                     shape_str(x.dims()));
  int c = x.dim(0);
  int64_t inner = x.numel() / c;
  std::vector<double> out(c);
  for (int ci = 0; ci < c; ++ci)
    out[ci] = kernels::sum(x.data().data() + ci * inner, inner) / static_cast<double>(inner);
  return Tensor::make_node(
      {c}, std::move(out), {x},
      [c, inner](const std::vector<double>& g,
                 const std::vector<std::vector<double>*>& sinks) {
        if (!sinks[0]) return;
        for (int ci = 0; ci < c; ++ci) {
          double gv = g[ci] / static_cast<double>(inner);
          double* row = sinks[0]->data() + ci * inner;
          for (int64_t i = 0; i < inner; ++i) row[i] += gv;
        }
      },
      "global_avg_pool");
}

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 1 || b.ndim() != 1)
    throw ShapeError("concat: expects 1-D tensors, got " + shape_str(a.dims()) + " and " +
                     shape_str(b.dims()));
  std::vector<double> out;
  out.reserve(a.numel() + b.numel());
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  int na = static_cast<int>(a.numel());
  return Tensor::make_node(
      {na + static_cast<int>(b.numel())}, std::move(out), {a, b},
      [na](const std::vector<double>& g, const std::vector<std::vector<double>*>& sinks) {
        if (sinks[0])
          for (int i = 0; i < na; ++i) (*sinks[0])[i] += g[i];
        if (sinks[1])
          for (size_t i = na; i < g.size(); ++i) (*sinks[1])[i - na] += g[i];
      },
      "concat");
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw UsageError("stack_rows: empty input");
  int c = static_cast<int>(rows[0].numel());
  int n = static_cast<int>(rows.size());
  std::vector<double> out;
  out.reserve(static_cast<size_t>(n) * c);
  for (const Tensor& r : rows) {
    if (r.ndim() != 1 || r.numel() != c)
      throw ShapeError("stack_rows: row shape " + shape_str(r.dims()) + " != [" +
                       std::to_string(c) + "]");
    out.insert(out.end(), r.data().begin(), r.data().end());
  }
  return Tensor::make_node(
      {n, c}, std::move(out), rows,
      [n, c](const std::vector<double>& g, const std::vector<std::vector<double>*>& sinks) {
        for (int i = 0; i < n; ++i) {
          if (!sinks[i]) continue;
          for (int j = 0; j < c; ++j) (*sinks[i])[j] += g[static_cast<size_t>(i) * c + j];
        }
      },
      "stack_rows");
}

Tensor reshape(const Tensor& x, Shape dims) {
  if (shape_numel(dims) != x.numel())
    throw ShapeError("reshape: " + shape_str(x.dims()) + " -> " + shape_str(dims) +
                     " changes element count");
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tensor::make_node(
      std::move(dims), std::move(out), {x},
      [](const std::vector<double>& g, const std::vector<std::vector<double>*>& sinks) {
        if (sinks[0]) kernels::axpy(1.0, g.data(), sinks[0]->data(), g.size());
      },
      "reshape");
}

Tensor transpose2d(const Tensor& x) {
  if (x.ndim() != 2) throw ShapeError("transpose2d: expected matrix, got " + shape_str(x.dims()));
  int r = x.dim(0), c = x.dim(1);
  std::vector<double> out(x.numel());
  kernels::transpose(x.data().data(), out.data(), r, c);
  return Tensor::make_node(
      {c, r}, std::move(out), {x},
      [r, c](const std::vector<double>& g, const std::vector<std::vector<double>*>& sinks) {
        if (!sinks[0]) return;
        // g is c x r; sink is r x c
        for (int i = 0; i < c; ++i)
          for (int j = 0; j < r; ++j)
            (*sinks[0])[static_cast<size_t>(j) * c + i] += g[static_cast<size_t>(i) * r + j];
      },
      "transpose2d");
}

Tensor frobenius_norm(const Tensor& x) { return sqrt(sum(mul(x, x))); }

}  // namespace acan
