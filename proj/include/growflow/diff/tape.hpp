#pragma once

#include "growflow/diff/parameter_store.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace growflow::diff {

class Tape;

// Handle to a node on a Tape. Cheap to copy; only meaningful for the tape
// that produced it.
class Var {
 public:
  Var() = default;
  int id() const { return id_; }
  bool valid() const { return id_ >= 0; }

 private:
  friend class Tape;
  explicit Var(int id) : id_(id) {}
  int id_ = -1;
};

// Records flat-vector operations in execution order and replays them in
// reverse to accumulate adjoints. Parameter leaves alias the ParameterStore's
// value and gradient buffers, so backward() writes parameter gradients in
// place (accumulating; call ParameterStore::zero_grad between steps).
//
// Calling backward() twice on the same recording adds the parameter and
// input-leaf gradients twice; intermediate adjoints are reset on each call.
class Tape {
 public:
  // Receives the adjoint of the node's output; accumulates into the adjoints
  // of its inputs via Tape::adjoint().
  using BackwardFn = std::function<void(Tape&, std::span<const double> out_adjoint)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves.
  Var param(ParameterStore& store, std::string_view name);
  Var input(std::vector<double> values);  // differentiable leaf with its own gradient
  Var constant(std::vector<double> values);
  // Non-owning constant leaf; `values` must outlive the tape recording.
  Var view(std::span<const double> values);

  // Fused kernel with a hand-written adjoint.
  Var custom(std::string_view op, std::vector<Var> inputs, std::vector<double> value, BackwardFn backward);

  // Elementwise.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var lincomb(std::span<const std::pair<double, Var>> terms);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var exp(Var a);

  // y[rows x out] = x[rows x in] * w[in x out] + b[out], row-major.
  Var linear(Var x, std::size_t rows, Var w, Var b);

  // Reductions.
  Var sum(Var a);
  Var mean(Var a);
  Var l1_loss(Var pred, std::span<const double> target);

  // Gather / scatter over fixed-width blocks.
  Var slice(Var a, std::size_t offset, std::size_t length);
  Var concat(std::span<const Var> parts);
  Var gather(Var a, std::span<const std::size_t> blocks, std::size_t width);
  Var scatter(Var base, Var src, std::span<const std::size_t> blocks, std::size_t width);

  // Normalizes `rows` consecutive vectors of `width` entries starting at
  // `offset`; everything else passes through.
  Var normalize_rows(Var a, std::size_t offset, std::size_t rows, std::size_t width);

  std::span<const double> value(Var v) const;
  double scalar(Var v) const;
  std::size_t size(Var v) const { return value(v).size(); }
  bool requires_grad(Var v) const;
  std::string_view op(Var v) const;
  std::size_t node_count() const { return nodes_.size(); }

  // Adjoint buffer of a node (allocated zeroed on first use). Custom backward
  // functions accumulate into the adjoints of their inputs through this.
  std::span<double> adjoint(Var v);
  // Read-only gradient of a leaf or intermediate after backward(); empty
  // when nothing flowed into it.
  std::span<const double> grad(Var v) const;

  // Throws ContractError when `loss` is not a scalar and NumericalError when
  // a non-finite value appears, naming the operation.
  void backward(Var loss);

  void clear() { nodes_.clear(); }

 private:
  struct Node {
    std::string op;
    std::vector<int> inputs;
    std::vector<double> owned_value;
    std::span<double> value;
    std::vector<double> owned_adjoint;
    std::span<double> adjoint;
    bool requires_grad = false;
    bool is_param = false;
    bool is_leaf = false;
    BackwardFn backward;
  };

  Var push(std::string op, std::vector<int> inputs, std::vector<double> value, BackwardFn backward);
  const Node& node(Var v) const;
  Node& node(Var v);
  void check_same_size(Var a, Var b, std::string_view op) const;

  std::vector<Node> nodes_;
};

}  // namespace growflow::diff
