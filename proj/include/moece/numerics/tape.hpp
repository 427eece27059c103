#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "moece/numerics/tensor.hpp"

namespace moece::numerics {

// Handle to a node recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

enum class Op {
  Constant,
  Variable,
  Parameter,
  Conv2d,
  Relu,
  Add,
  Scale,
  GlobalAvgPool,
  Softmax,
  GatherNormalized,
  WeightedSum,
  IfftFreqAxis,
  Nmse,
  DotConst,
  Sum,
};

std::string_view op_name(Op op);

// Records a forward computation as a list of nodes in topological order and
// replays it backwards to produce exact gradients. Parameter leaves keep a
// pointer to the owning Tensor; backward() accumulates into its grad slot,
// so the tensors must outlive the tape and stay at a fixed address.
//
// A tape is confined to one thread. Independent tapes over the same
// parameters may run concurrently as long as only one calls backward().
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  // Leaf that never receives gradient.
  Var constant(Tensor value);
  // Leaf that receives gradient (readable through grad()) but is not tied to
  // an external tensor.
  Var variable(Tensor value);
  Var parameter(Tensor& param);

  // Same-padded 3x3 cross-correlation. input [H,W,Cin], kernel
  // [3,3,Cin,Cout], bias [Cout]; output [ceil(H/stride), ceil(W/stride), Cout].
  Var conv2d(Var input, Var kernel, Var bias, std::size_t stride = 1);
  // Subgradient at 0 is 0.
  Var relu(Var x);
  Var add(Var a, Var b);
  Var scale(Var x, double factor);
  // [H,W,C] -> [C]
  Var global_avg_pool(Var x);
  // [r] -> [r], max-subtracted.
  Var softmax(Var logits);
  // out[j] = w[idx[j]] / sum_l w[idx[l]]. When the selected mass is zero the
  // output is uniform 1/k with zero gradient and degenerate() is bumped.
  Var gather_normalized(Var w, std::span<const std::size_t> idx);
  // sum_i weights[i] * candidates[i]; all candidates share one shape.
  Var weighted_sum(std::span<const Var> candidates, Var weights);
  // Inverse DFT (1/N) along axis 1 of a [A, N, 2] real/imag tensor.
  Var ifft_freq_axis(Var x);
  // ||pred - target||^2 / ||target||^2 as a [1] tensor.
  Var nmse(Var pred, const Tensor& target);
  // sum_i coeffs[i] * x[i] as a [1] tensor.
  Var dot_const(Var x, std::span<const double> coeffs);
  Var sum(Var x);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  Op op(Var v) const { return nodes_.at(v.id).op; }
  std::span<const std::size_t> inputs(Var v) const { return nodes_.at(v.id).inputs; }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  std::size_t degenerate() const { return degenerate_; }

  // Reverse sweep from `output`. With no seed the output must hold a single
  // element and is seeded with 1. Parameter leaves reached by the sweep get
  // their gradients accumulated; parameters never recorded stay untouched.
  void backward(Var output, std::optional<Tensor> seed = std::nullopt);
  // Gradient of the last backward() w.r.t. any node (zeros if unreached).
  std::vector<double> grad(Var v) const;

  // Recomputes every non-leaf node from its inputs in recorded order and
  // returns true when all values are bit-identical to the recorded ones.
  bool replay_matches() const;

 private:
  using ForwardFn = std::function<Tensor(const Tape&)>;
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  struct Node {
    Op op = Op::Constant;
    std::vector<std::size_t> inputs;
    Tensor value;
    std::vector<double> grad;
    Tensor* param = nullptr;
    bool requires_grad = false;
    ForwardFn forward;
    BackwardFn backward;
  };

  Var record(Op op, std::vector<std::size_t> inputs, ForwardFn forward, BackwardFn backward);
  const Tensor& val(std::size_t id) const { return nodes_[id].value; }
  std::span<double> grad_buffer(std::size_t id);
  std::span<const double> grad_of(std::size_t id) const { return nodes_[id].grad; }

  std::vector<Node> nodes_;
  std::size_t degenerate_ = 0;
};

}  // namespace moece::numerics
