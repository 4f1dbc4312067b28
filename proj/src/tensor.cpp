#include "mimic/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "mimic/ops.hpp"

namespace mimic {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

namespace {

thread_local bool g_grad_mode = true;

std::shared_ptr<detail::Node> new_leaf(Shape shape, std::vector<double> value,
                                       bool requires_grad) {
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor extent must be positive, got " + shape_str(shape));
  }
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

}  // namespace

bool grad_mode_enabled() { return g_grad_mode; }

NoGradGuard::NoGradGuard() : prev_(g_grad_mode) { g_grad_mode = false; }
NoGradGuard::~NoGradGuard() { g_grad_mode = prev_; }
EnableGradGuard::EnableGradGuard() : prev_(g_grad_mode) { g_grad_mode = true; }
EnableGradGuard::~EnableGradGuard() { g_grad_mode = prev_; }

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return from_data(shape, std::vector<double>(static_cast<size_t>(shape_numel(shape)), 0.0),
                   requires_grad);
}

Tensor Tensor::full(const Shape& shape, double v, bool requires_grad) {
  return from_data(shape, std::vector<double>(static_cast<size_t>(shape_numel(shape)), v),
                   requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_data({1}, {v}, requires_grad);
}

Tensor Tensor::from_data(const Shape& shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size()))
    throw std::invalid_argument("data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  return Tensor(new_leaf(shape, std::move(data), requires_grad));
}

std::vector<double>& Tensor::mutable_data() {
  if (!is_leaf()) throw std::logic_error("mutable_data on non-leaf tensor");
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1) throw std::logic_error("item() on tensor of size " + std::to_string(size()));
  return node_->value[0];
}

void Tensor::set_requires_grad(bool rg) {
  if (!is_leaf() && rg) throw std::logic_error("set_requires_grad on non-leaf tensor");
  node_->requires_grad = rg;
}

Tensor Tensor::grad() const {
  if (!node_->grad) return Tensor();
  return Tensor(node_->grad);
}

void Tensor::clear_grad() { node_->grad.reset(); }

void Tensor::accumulate_grad(const Tensor& g) {
  if (g.shape() != shape())
    throw std::logic_error("gradient shape " + shape_str(g.shape()) +
                           " does not match tensor shape " + shape_str(shape()));
  if (!node_->grad) {
    // Detach into a plain buffer so stored grads never pin graphs.
    node_->grad = new_leaf(g.shape(), g.data(), false);
  } else {
    auto& acc = node_->grad->value;
    const auto& add = g.data();
    for (size_t i = 0; i < acc.size(); ++i) acc[i] += add[i];
  }
}

Tensor Tensor::make_self(detail::Node* n) { return Tensor(n->shared_from_this()); }

Tensor Tensor::make_op(const char* op, Shape shape, std::vector<double> value,
                       std::vector<Tensor> inputs, BackwardFn backward_fn) {
  bool track = false;
  if (g_grad_mode) {
    for (const auto& in : inputs)
      if (in.requires_grad()) { track = true; break; }
  }
  auto n = new_leaf(std::move(shape), std::move(value), track);
  n->op = op;
  if (track) {
    n->inputs = std::move(inputs);
    n->backward = std::move(backward_fn);
  }
  return Tensor(n);
}

namespace {

// Reverse topological order of the subgraph that requires grad.
void topo_visit(detail::Node* n, std::unordered_set<detail::Node*>& seen,
                std::vector<detail::Node*>& order) {
  // Iterative DFS; graphs can be a few thousand nodes deep after a
  // double-backward pass.
  struct Frame { detail::Node* node; size_t next_input; };
  std::vector<Frame> stack{{n, 0}};
  seen.insert(n);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_input < f.node->inputs.size()) {
      detail::Node* in = f.node->inputs[f.next_input++].node();
      if (in->requires_grad && !seen.count(in)) {
        seen.insert(in);
        stack.push_back({in, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }
}

}  // namespace

std::vector<Tensor> grad_of(const Tensor& output, const std::vector<Tensor>& inputs,
                            bool create_graph) {
  if (!output.defined()) throw std::invalid_argument("grad_of: undefined output");
  if (output.size() != 1) throw std::invalid_argument("grad_of: output must be scalar");

  std::unordered_set<detail::Node*> seen;
  std::vector<detail::Node*> post;  // children before parents
  if (output.requires_grad()) topo_visit(output.node(), seen, post);

  // A node's grad is needed iff a requested input is reachable from it.
  std::unordered_set<detail::Node*> requested;
  for (const auto& t : inputs)
    if (t.defined()) requested.insert(t.node());
  std::unordered_set<detail::Node*> needed;
  for (detail::Node* n : post) {  // post order: inputs of n already decided
    if (requested.count(n)) { needed.insert(n); continue; }
    for (const auto& in : n->inputs)
      if (needed.count(in.node())) { needed.insert(n); break; }
  }

  std::unordered_map<detail::Node*, Tensor> gmap;
  if (needed.count(output.node()))
    gmap.emplace(output.node(), Tensor::full(output.shape(), 1.0));

  {
    // Grads of grads only when asked for.
    std::unique_ptr<NoGradGuard> off;
    std::unique_ptr<EnableGradGuard> on;
    if (create_graph) on = std::make_unique<EnableGradGuard>();
    else off = std::make_unique<NoGradGuard>();

    for (auto it = post.rbegin(); it != post.rend(); ++it) {
      detail::Node* n = *it;
      auto git = gmap.find(n);
      if (git == gmap.end() || n->inputs.empty()) continue;
      Tensor self = Tensor::make_self(n);
      std::vector<char> need(n->inputs.size(), 0);
      for (size_t i = 0; i < n->inputs.size(); ++i)
        need[i] = needed.count(n->inputs[i].node()) ? 1 : 0;
      std::vector<Tensor> gin = n->backward(git->second, self, n->inputs, need);
      if (gin.size() != n->inputs.size())
        throw std::logic_error(std::string("op '") + n->op + "' returned " +
                               std::to_string(gin.size()) + " gradients for " +
                               std::to_string(n->inputs.size()) + " inputs");
      for (size_t i = 0; i < n->inputs.size(); ++i) {
        if (!need[i]) continue;
        if (!gin[i].defined())
          throw std::logic_error(std::string("op '") + n->op +
                                 "' produced no gradient for needed input " + std::to_string(i));
        detail::Node* in = n->inputs[i].node();
        auto jt = gmap.find(in);
        if (jt == gmap.end()) gmap.emplace(in, gin[i]);
        else jt->second = add(jt->second, gin[i]);
      }
      if (!requested.count(n)) gmap.erase(n);  // free intermediate grads eagerly
    }
  }

  std::vector<Tensor> out;
  out.reserve(inputs.size());
  for (const auto& t : inputs) {
    auto it = t.defined() ? gmap.find(t.node()) : gmap.end();
    if (it != gmap.end()) out.push_back(it->second);
    else out.push_back(Tensor::zeros(t.shape()));
  }
  return out;
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward: undefined loss");
  if (loss.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
  if (!loss.requires_grad()) return;

  std::unordered_set<detail::Node*> seen;
  std::vector<detail::Node*> post;
  topo_visit(loss.node(), seen, post);

  std::vector<Tensor> leaves;
  for (detail::Node* n : post)
    if (n->inputs.empty() && n->requires_grad) leaves.push_back(Tensor::make_self(n));

  std::vector<Tensor> grads = grad_of(loss, leaves, /*create_graph=*/false);
  for (size_t i = 0; i < leaves.size(); ++i) leaves[i].accumulate_grad(grads[i]);
}

bool all_finite(const Tensor& t) {
  for (double v : t.data())
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace mimic
