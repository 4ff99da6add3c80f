#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "acan/errors.hpp"

namespace acan {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& dims);
std::string shape_str(const Shape& dims);

struct TensorImpl;

// Receives the pass-local upstream gradient of a node and accumulates into
// the pass-local buffers of its parents (same order as TensorImpl::parents).
using BackwardFn =
    std::function<void(const std::vector<double>& gout,
                       const std::vector<std::vector<double>*>& parent_grads)>;

struct TensorImpl {
  Shape dims;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // persistent; leaves only, accumulates across backward calls
  std::vector<std::shared_ptr<TensorImpl>> parents;
  BackwardFn backward_fn;  // empty on leaves
  uint64_t seq = 0;        // global creation order; backward replays in reverse
  const char* op = "leaf";

  bool is_leaf() const { return !backward_fn; }
};

// Dense row-major f64 tensor (last dimension fastest). Value-semantics handle
// over shared storage; data is treated as immutable once an op has consumed
// it, so graphs can be replayed safely by backward().
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape dims, bool requires_grad = false);
  static Tensor full(Shape dims, double value, bool requires_grad = false);
  static Tensor from_data(Shape dims, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  // Internal: wrap an op result and register it on the tape.
  static Tensor make_node(Shape dims, std::vector<double> data,
                          std::vector<Tensor> parents, BackwardFn fn, const char* op);

  bool defined() const { return impl_ != nullptr; }
  const Shape& dims() const { return impl_->dims; }
  int dim(int i) const { return impl_->dims[i]; }
  int ndim() const { return static_cast<int>(impl_->dims.size()); }
  int64_t numel() const { return static_cast<int64_t>(impl_->data.size()); }

  std::span<const double> data() const { return impl_->data; }
  // Leaf initialization / in-place parameter updates only. Mutating a tensor
  // that is already an input of a live graph invalidates that graph.
  std::span<double> mutable_data() { return impl_->data; }

  double value() const;                       // scalar tensors
  double at(std::initializer_list<int> idx) const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool rg) { impl_->requires_grad = rg; }

  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  std::span<const double> grad() const;
  void zero_grad();

  std::shared_ptr<TensorImpl> impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Snapshot of the op tape reachable from one output, in execution order.
struct ComputeGraph {
  std::vector<TensorImpl*> order;  // ascending seq

  static ComputeGraph from(const Tensor& output);
};

// Reverse-mode sweep. Seeds d(loss)/d(loss) = 1, replays the graph in reverse
// execution order, and accumulates gradients into every requires_grad leaf.
// Calling it again without zero_grad adds another full gradient on top.
void backward(const Tensor& loss);

// While alive, new op results record no parents and no backward closure:
// pure inference, no tape growth. Thread-local.
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

// Throws NumericError naming `what` if any value is NaN/Inf.
void check_finite(std::span<const double> values, const char* what);

}  // namespace acan
