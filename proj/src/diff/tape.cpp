#include "ctdg/diff/tape.hpp"

#include <type_traits>

#include "ctdg/error.hpp"

namespace ctdg::diff {

template <typename Scalar>
auto BasicTape<Scalar>::push(Node node) -> var_type {
  nodes_.push_back(std::move(node));
  return var_type(this, nodes_.size() - 1);
}

template <typename Scalar>
auto BasicTape<Scalar>::constant(matrix_type value) -> var_type {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

template <typename Scalar>
auto BasicTape<Scalar>::variable(matrix_type value) -> var_type {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  n.keep_grad = true;
  return push(std::move(n));
}

template <typename Scalar>
auto BasicTape<Scalar>::parameter(Parameter& p) -> var_type {
  Node n;
  if constexpr (std::is_same_v<Scalar, double>) {
    n.external = &p.value;
  } else {
    n.value = p.value.cast<Scalar>();
  }
  n.param = &p;
  n.requires_grad = true;
  return push(std::move(n));
}

template <typename Scalar>
auto BasicTape<Scalar>::record(matrix_type value, std::initializer_list<var_type> inputs, BackwardFn fn)
    -> var_type {
  Node n;
  n.value = std::move(value);
  for (const var_type& in : inputs) {
    if (nodes_[in.id()].requires_grad) n.requires_grad = true;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

template <typename Scalar>
auto BasicTape<Scalar>::record(matrix_type value, const std::vector<var_type>& inputs, BackwardFn fn)
    -> var_type {
  Node n;
  n.value = std::move(value);
  for (const var_type& in : inputs) {
    if (nodes_[in.id()].requires_grad) n.requires_grad = true;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

template <typename Scalar>
auto BasicTape<Scalar>::value(std::size_t id) const -> const matrix_type& {
  const Node& n = nodes_[id];
  return n.external != nullptr ? *n.external : n.value;
}

template <typename Scalar>
void BasicTape<Scalar>::backward(var_type loss) {
  require(&loss.tape() == this, ErrorCategory::kInvalidArgument, "loss belongs to another tape");
  const matrix_type& lv = value(loss.id());
  require(lv.rows() == 1 && lv.cols() == 1, ErrorCategory::kShapeMismatch, "backward needs a scalar loss");
  if (!nodes_[loss.id()].requires_grad) return;
  nodes_[loss.id()].grad = matrix_type::Ones(1, 1);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param != nullptr) {
      if (n.param->grad.size() == 0) n.param->zero_grad();
      n.param->grad += n.grad.template cast<double>();
    }
    if (!n.keep_grad) n.grad.resize(0, 0);
  }
}

template <typename Scalar>
auto BasicTape<Scalar>::grad(var_type v) const -> matrix_type {
  const Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) {
    const matrix_type& val = value(v.id());
    return matrix_type::Zero(val.rows(), val.cols());
  }
  return n.grad;
}

template class BasicTape<double>;
template class BasicTape<float>;

}  // namespace ctdg::diff
