#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mimic {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tensor;

// One gradient per op input, built with tensor ops so that gradients of
// gradients remain well defined. `need[i]` is false when input i's gradient
// will be discarded; implementations may skip the work and return an empty
// Tensor in that slot.
using BackwardFn = std::function<std::vector<Tensor>(
    const Tensor& grad_out, const Tensor& self, const std::vector<Tensor>& inputs,
    const std::vector<char>& need)>;

namespace detail {

struct Node : std::enable_shared_from_this<Node> {
  Shape shape;
  std::vector<double> value;
  bool requires_grad = false;
  std::vector<Tensor> inputs;  // empty for leaves
  BackwardFn backward;         // null for leaves
  const char* op = "leaf";
  // Populated on leaves by backward(); accumulates across calls until
  // zero_grad().
  std::shared_ptr<Node> grad;
};

}  // namespace detail

// Value-semantic handle to a node of the differentiation graph. Copying a
// Tensor aliases the underlying storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double v, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor from_data(const Shape& shape, std::vector<double> data,
                          bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t size() const { return static_cast<int64_t>(node_->value.size()); }
  int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }

  const std::vector<double>& data() const { return node_->value; }
  // In-place mutation is reserved for leaves (parameters, buffers); mutating
  // an op output would desynchronize it from its recorded inputs.
  std::vector<double>& mutable_data();

  double item() const;
  double at(int64_t i) const { return node_->value[static_cast<size_t>(i)]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool rg);
  bool is_leaf() const { return node_->inputs.empty(); }
  const char* op_name() const { return node_->op; }

  // Leaf gradient accumulated by backward(); undefined Tensor if never set.
  Tensor grad() const;
  void clear_grad();
  void accumulate_grad(const Tensor& g);

  detail::Node* node() const { return node_.get(); }

  // Graph-recording op factory. Records inputs and the backward closure only
  // while grad mode is on and some input requires grad.
  static Tensor make_op(const char* op, Shape shape, std::vector<double> value,
                        std::vector<Tensor> inputs, BackwardFn backward);

  // Handle to an existing node (engine internal).
  static Tensor make_self(detail::Node* n);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;
};

// Thread-local grad mode, on by default. Rollouts and metric evaluation run
// under NoGradGuard so forward passes record nothing.
bool grad_mode_enabled();

struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

struct EnableGradGuard {
  EnableGradGuard();
  ~EnableGradGuard();
  EnableGradGuard(const EnableGradGuard&) = delete;
  EnableGradGuard& operator=(const EnableGradGuard&) = delete;

 private:
  bool prev_;
};

// Reverse-mode differentiation of a scalar `output` with respect to `inputs`.
// Inputs not reached by the graph get zero gradients. With `create_graph` the
// returned tensors stay connected so they can be differentiated again (used
// by the gradient penalty).
std::vector<Tensor> grad_of(const Tensor& output, const std::vector<Tensor>& inputs,
                            bool create_graph = false);

// Accumulates d loss / d leaf into .grad of every requires_grad leaf reachable
// from `loss`. Rejects non-scalar losses.
void backward(const Tensor& loss);

bool all_finite(const Tensor& t);

}  // namespace mimic
