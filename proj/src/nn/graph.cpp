#include <stdexcept>

#include "tac/nn.hpp"

namespace tac::nn {

void Graph::bind(const ParameterStore& store, std::span<double> grads, std::set<std::string> trainable) {
  if (grads.size() != store.size()) throw std::invalid_argument("gradient buffer size mismatch");
  bindings_.push_back(Binding{&store, grads, std::move(trainable)});
}

Var Graph::input(Tensor value, bool requires_grad) { return emit(std::move(value), requires_grad, nullptr); }

Var Graph::emit(Tensor value, bool requires_grad, Backward back) {
  nodes_.push_back(Node{std::move(value), {}, requires_grad, std::move(back)});
  return Var{static_cast<int>(nodes_.size() - 1)};
}

std::vector<double>& Graph::grad_mut(Var v) {
  auto& n = nodes_.at(static_cast<std::size_t>(v.id));
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

const Graph::Binding* Graph::binding_for(Param p) const {
  for (const auto& b : bindings_)
    if (b.store == p.store) return &b;
  return nullptr;
}

bool Graph::param_trainable(Param p) const {
  const Binding* b = binding_for(p);
  if (b == nullptr) return false;
  return b->trainable.empty() || b->trainable.contains(p.store->info(p.id).group);
}

double* Graph::param_grad(Param p) {
  if (!param_trainable(p)) return nullptr;
  const Binding* b = binding_for(p);
  return b->grads.data() + p.store->info(p.id).offset;
}

void Graph::backward(Var root, double seed) {
  auto& r = nodes_.at(static_cast<std::size_t>(root.id));
  if (r.value.size() != 1) throw std::invalid_argument("backward root must be a scalar");
  for (auto& n : nodes_) n.grad.clear();
  r.grad.assign(1, seed);
  for (int i = root.id; i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || !n.back || n.grad.empty()) continue;
    // Closures only touch their inputs, which have lower ids.
    n.back(*this, n.grad);
  }
}

}  // namespace tac::nn
