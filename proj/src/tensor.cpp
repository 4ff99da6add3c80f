#include "acan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace acan {

namespace {
std::atomic<uint64_t> g_seq{1};
thread_local bool g_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

int64_t shape_numel(const Shape& dims) {
  int64_t n = 1;
  for (int d : dims) n *= d;
  return n;
}

std::string shape_str(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < dims.size(); ++i) os << (i ? "x" : "") << dims[i];
  os << ']';
  return os.str();
}

void check_finite(std::span<const double> values, const char* what) {
  for (double v : values)
    if (!std::isfinite(v))
      throw NumericError(std::string("non-finite value in ") + what);
}

static std::shared_ptr<TensorImpl> new_impl(Shape dims, std::vector<double> data,
                                            bool requires_grad) {
  for (int d : dims)
    if (d <= 0) throw ShapeError("non-positive extent in shape " + shape_str(dims));
  if (shape_numel(dims) != static_cast<int64_t>(data.size()))
    throw ShapeError("data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(dims));
  auto impl = std::make_shared<TensorImpl>();
  impl->dims = std::move(dims);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  impl->seq = g_seq.fetch_add(1);
  return impl;
}

Tensor Tensor::zeros(Shape dims, bool requires_grad) {
  std::vector<double> d(shape_numel(dims), 0.0);
  return from_data(std::move(dims), std::move(d), requires_grad);
}

Tensor Tensor::full(Shape dims, double value, bool requires_grad) {
  std::vector<double> d(shape_numel(dims), value);
  return from_data(std::move(dims), std::move(d), requires_grad);
}

Tensor Tensor::from_data(Shape dims, std::vector<double> data, bool requires_grad) {
  Tensor t;
  t.impl_ = new_impl(std::move(dims), std::move(data), requires_grad);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::make_node(Shape dims, std::vector<double> data,
                         std::vector<Tensor> parents, BackwardFn fn, const char* op) {
  check_finite(data, op);
  bool rg = false;
  if (g_grad_enabled)
    for (const Tensor& p : parents) rg = rg || p.requires_grad();
  Tensor t;
  t.impl_ = new_impl(std::move(dims), std::move(data), rg);
  t.impl_->op = op;
  if (rg) {
    t.impl_->parents.reserve(parents.size());
    for (const Tensor& p : parents) t.impl_->parents.push_back(p.impl());
    t.impl_->backward_fn = std::move(fn);
  }
  return t;
}

double Tensor::value() const {
  if (numel() != 1) throw UsageError("value() on non-scalar tensor " + shape_str(dims()));
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<int> idx) const {
  const Shape& d = impl_->dims;
  if (idx.size() != d.size())
    throw UsageError("at(): index rank mismatch for shape " + shape_str(d));
  int64_t flat = 0;
  int i = 0;
  for (int ix : idx) {
    if (ix < 0 || ix >= d[i]) throw UsageError("at(): index out of range");
    flat = flat * d[i] + ix;
    ++i;
  }
  return impl_->data[flat];
}

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw UsageError("grad(): no gradient present");
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_ && !impl_->grad.empty())
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

ComputeGraph ComputeGraph::from(const Tensor& output) {
  ComputeGraph g;
  std::unordered_set<TensorImpl*> seen;
  std::vector<TensorImpl*> stack{output.impl().get()};
  seen.insert(output.impl().get());
  while (!stack.empty()) {
    TensorImpl* node = stack.back();
    stack.pop_back();
    g.order.push_back(node);
    for (const auto& p : node->parents)
      if (seen.insert(p.get()).second) stack.push_back(p.get());
  }
  std::sort(g.order.begin(), g.order.end(),
            [](const TensorImpl* a, const TensorImpl* b) { return a->seq < b->seq; });
  return g;
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw UsageError("backward: loss must be a defined scalar");
  if (!loss.requires_grad()) return;

  ComputeGraph graph = ComputeGraph::from(loss);

  // Pass-local gradient buffers so repeated backward calls stay additive.
  std::unordered_map<TensorImpl*, std::vector<double>> local;
  local.reserve(graph.order.size());
  local[loss.impl().get()] = {1.0};

  for (auto it = graph.order.rbegin(); it != graph.order.rend(); ++it) {
    TensorImpl* node = *it;
    auto found = local.find(node);
    if (found == local.end()) continue;  // no gradient flowed here
    std::vector<double>& gout = found->second;
    check_finite(gout, node->op);
    if (node->is_leaf()) continue;

    std::vector<std::vector<double>*> sinks;
    sinks.reserve(node->parents.size());
    for (const auto& p : node->parents) {
      if (!p->requires_grad) {
        sinks.push_back(nullptr);
        continue;
      }
      auto [slot, inserted] = local.try_emplace(p.get());
      if (inserted) slot->second.assign(p->data.size(), 0.0);
      sinks.push_back(&slot->second);
    }
    node->backward_fn(gout, sinks);
  }

  for (TensorImpl* node : graph.order) {
    if (!node->is_leaf() || !node->requires_grad) continue;
    auto found = local.find(node);
    if (found == local.end()) continue;
    if (node->grad.empty()) node->grad.assign(node->data.size(), 0.0);
    for (size_t i = 0; i < node->grad.size(); ++i) node->grad[i] += found->second[i];
  }
}

}  // namespace acan
