#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace ctdg::diff {

template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Matrix = MatrixT<double>;
using MatrixF = MatrixT<float>;

/// A trainable tensor and its accumulated gradient, always in double
/// precision; tapes of another scalar type work on a converted copy.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {
    grad = Matrix::Zero(value.rows(), value.cols());
  }

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

template <typename Scalar>
class BasicTape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <typename Scalar>
class BasicVar {
 public:
  using scalar_type = Scalar;
  using matrix_type = MatrixT<Scalar>;

  BasicVar() = default;

  const matrix_type& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  BasicTape<Scalar>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class BasicTape<Scalar>;
  BasicVar(BasicTape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  BasicTape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records primitive applications in creation order, which is a valid
/// topological order; backward() replays it in reverse exactly once.
template <typename Scalar>
class BasicTape {
 public:
  using matrix_type = MatrixT<Scalar>;
  using var_type = BasicVar<Scalar>;
  using BackwardFn = std::function<void(BasicTape&, const matrix_type& upstream)>;

  BasicTape() = default;
  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;

  /// Leaf without gradient.
  var_type constant(matrix_type value);
  /// Leaf with gradient, readable through grad() after backward().
  var_type variable(matrix_type value);
  /// Leaf reading p.value (by reference in double, converted otherwise);
  /// backward() adds its gradient into p.grad.
  var_type parameter(Parameter& p);

  /// Appends a node. `fn` receives the node's upstream gradient and must
  /// route it to the inputs through accumulate().
  var_type record(matrix_type value, std::initializer_list<var_type> inputs, BackwardFn fn);
  var_type record(matrix_type value, const std::vector<var_type>& inputs, BackwardFn fn);

  const matrix_type& value(std::size_t id) const;
  bool requires_grad(var_type v) const { return nodes_[v.id()].requires_grad; }

  template <typename Derived>
  void accumulate(var_type v, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[v.id()];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Zero-initialized (on first use) gradient storage of a node that
  /// requires grad, for ops that scatter into sub-blocks.
  matrix_type& grad_buffer(var_type v) {
    Node& n = nodes_[v.id()];
    if (n.grad.size() == 0) {
      const matrix_type& val = value(v.id());
      n.grad = matrix_type::Zero(val.rows(), val.cols());
    }
    return n.grad;
  }

  /// Reverse pass from a 1x1 node. Parameter leaves add into their grad.
  void backward(var_type loss);

  /// Gradient of a node after backward(); zero if the loss did not reach it.
  matrix_type grad(var_type v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    matrix_type value;
    const matrix_type* external = nullptr;
    Parameter* param = nullptr;
    matrix_type grad;
    bool requires_grad = false;
    bool keep_grad = false;
    BackwardFn backward;
  };

  var_type push(Node node);

  std::vector<Node> nodes_;
};

template <typename Scalar>
const MatrixT<Scalar>& BasicVar<Scalar>::value() const {
  return tape_->value(id_);
}

using Tape = BasicTape<double>;
using Var = BasicVar<double>;
using TapeF = BasicTape<float>;
using VarF = BasicVar<float>;

extern template class BasicTape<double>;
extern template class BasicTape<float>;

}  // namespace ctdg::diff
