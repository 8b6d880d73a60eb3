#pragma once

// Tensor-level reverse-mode differentiation. Every op appends a node holding
// its value and a closure that scatters the node's gradient into its inputs.
// Nodes are appended in evaluation order, so reverse id order is a valid
// topological order for the backward sweep.
//
// Activation layouts used by the network code:
//   channel layout  [C, B*L]  column b*L + l holds the C channels of bin l
//   feature layout  [L*C, B]  row l*C + c, one column per batch element

#include <cstddef>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "core/params.hpp"

namespace pvae::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr && id_ >= 0; }

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

struct ConvGeometry {
  int batch = 1;
  int in_len = 1;
  int kernel = 3;
  int stride = 1;
  int pad = 1;

  int out_len() const { return (in_len + 2 * pad - kernel) / stride + 1; }
};

class Tape {
 public:
  explicit Tape(bool record_gradients = true) : record_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  // When enabled, relu / clamp fold their branch pattern (which side of each
  // kink every element lies on) into a running hash. Two evaluations with equal
  // signatures took the same piecewise-smooth branch everywhere.
  void track_activations(bool on) { track_ = on; }
  std::uint64_t activation_signature() const { return signature_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Matrix value);
  // Leaf whose gradient is retained after backward().
  Var variable(Matrix value);
  // Leaf bound to store[index]; repeated calls return the same node.
  Var parameter(const ParamStore& store, std::size_t index);

  const Matrix& value(Var v) const { return nodes_[v.id()].value; }

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape. `loss` must be 1x1.
  void backward(Var loss);

  // Gradient of the last backward() target w.r.t. v; zeros when unreached.
  Matrix grad(Var v) const;

  // Adds the gradient of every parameter node into grads[param_index].
  void accumulate_parameter_grads(GradStore& grads) const;

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  Var exp(Var a);
  Var square(Var a);
  Var relu(Var a);
  Var clamp(Var a, double lo, double hi);
  Var sum(Var a);
  Var matmul(Var a, Var b);
  // w * x + b with b an [out, 1] column broadcast over columns.
  Var affine(Var w, Var x, Var b);
  Var conv1d(Var x, Var w, Var b, const ConvGeometry& geom);
  Var upsample_nearest(Var x, int batch, int in_len, int out_len);
  Var channels_to_features(Var x, int batch, int len);
  Var features_to_channels(Var x, int channels, int batch, int len);
  Var concat_rows(Var a, Var b);

 private:
  using Backward = std::function<void(Tape&, int)>;

  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<int> inputs;
    Backward backward;
    bool needs_grad = false;
    int param_index = -1;
  };

  Var push(Matrix value, std::vector<int> inputs, Backward fn);
  Matrix& grad_slot(int id);
  bool needs(int id) const { return nodes_[id].needs_grad; }
  const Matrix& out_grad(int id) const { return nodes_[id].grad; }
  void check_same(Var a, Var b) const;

  void fold_pattern(const Matrix& x, double lo, double hi);

  bool record_;
  bool track_ = false;
  std::uint64_t signature_ = 1469598103934665603ull;
  std::vector<Node> nodes_;
  std::unordered_map<std::size_t, int> param_nodes_;
};

inline Var operator+(Var a, Var b) { return a.tape()->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape()->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape()->mul(a, b); }
inline Var operator*(double s, Var a) { return a.tape()->scale(a, s); }
inline Var operator*(Var a, double s) { return a.tape()->scale(a, s); }
inline Var operator+(Var a, double s) { return a.tape()->add_scalar(a, s); }
inline Var operator-(Var a, double s) { return a.tape()->add_scalar(a, -s); }
inline Var operator-(Var a) { return a.tape()->scale(a, -1.0); }

inline Var exp(Var a) { return a.tape()->exp(a); }
inline Var square(Var a) { return a.tape()->square(a); }
inline Var relu(Var a) { return a.tape()->relu(a); }
inline Var sum(Var a) { return a.tape()->sum(a); }

}  // namespace pvae::ad
