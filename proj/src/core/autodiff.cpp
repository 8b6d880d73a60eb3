#include "core/autodiff.hpp"

#include <limits>
#include <memory>

#include "core/error.hpp"

namespace pvae::ad {
namespace {

Matrix im2col(const Matrix& x, const ConvGeometry& g) {
  const Eigen::Index cin = x.rows();
  const int lout = g.out_len();
  Matrix cols = Matrix::Zero(cin * g.kernel, static_cast<Eigen::Index>(g.batch) * lout);
  for (int b = 0; b < g.batch; ++b) {
    for (int lo = 0; lo < lout; ++lo) {
      const Eigen::Index col = static_cast<Eigen::Index>(b) * lout + lo;
      for (int k = 0; k < g.kernel; ++k) {
        const int pos = lo * g.stride + k - g.pad;
        if (pos < 0 || pos >= g.in_len) continue;
        cols.block(k * cin, col, cin, 1) = x.col(static_cast<Eigen::Index>(b) * g.in_len + pos);
      }
    }
  }
  return cols;
}

void col2im_add(const Matrix& dcols, const ConvGeometry& g, Matrix& dx) {
  const Eigen::Index cin = dx.rows();
  const int lout = g.out_len();
  for (int b = 0; b < g.batch; ++b) {
    for (int lo = 0; lo < lout; ++lo) {
      const Eigen::Index col = static_cast<Eigen::Index>(b) * lout + lo;
      for (int k = 0; k < g.kernel; ++k) {
        const int pos = lo * g.stride + k - g.pad;
        if (pos < 0 || pos >= g.in_len) continue;
        dx.col(static_cast<Eigen::Index>(b) * g.in_len + pos) += dcols.block(k * cin, col, cin, 1);
      }
    }
  }
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(*this); }

double Var::scalar() const {
  const Matrix& v = value();
  require(v.rows() == 1 && v.cols() == 1, ErrorCode::kShape, "shape error: not a scalar");
  return v(0, 0);
}

Var Tape::push(Matrix value, std::vector<int> inputs, Backward fn) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (int i : inputs) n.needs_grad = n.needs_grad || nodes_[i].needs_grad;
    if (n.needs_grad) {
      n.inputs = std::move(inputs);
      n.backward = std::move(fn);
    }
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Matrix& Tape::grad_slot(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::check_same(Var a, Var b) const {
  require(a.tape() == this && b.tape() == this, ErrorCode::kInvalidArgument,
          "variables from different tapes");
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(),
          ErrorCode::kShape, "shape error");
}

Var Tape::constant(Matrix value) { return push(std::move(value), {}, nullptr); }

Var Tape::variable(Matrix value) {
  Var v = push(std::move(value), {}, nullptr);
  nodes_[v.id()].needs_grad = record_;
  return v;
}

Var Tape::parameter(const ParamStore& store, std::size_t index) {
  if (auto it = param_nodes_.find(index); it != param_nodes_.end()) return Var(this, it->second);
  Var v = variable(store[index].value);
  nodes_[v.id()].param_index = static_cast<int>(index);
  param_nodes_.emplace(index, v.id());
  return v;
}

void Tape::backward(Var loss) {
  require(record_, ErrorCode::kInvalidArgument, "tape was created without gradient recording");
  require(loss.tape() == this, ErrorCode::kInvalidArgument, "loss belongs to another tape");
  require(value(loss).size() == 1, ErrorCode::kShape, "shape error: loss must be scalar");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  grad_slot(loss.id())(0, 0) = 1.0;
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, i);
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate_parameter_grads(GradStore& grads) const {
  for (const auto& [index, id] : param_nodes_) {
    const Node& n = nodes_[id];
    if (n.grad.size() == 0) continue;
    require(index < grads.size(), ErrorCode::kShape, "gradient store too small");
    grads[index] += n.grad;
  }
}

Var Tape::add(Var a, Var b) {
  check_same(a, b);
  return push(value(a) + value(b), {a.id(), b.id()}, [](Tape& t, int self) {
    const auto& in = t.nodes_[self].inputs;
    for (int i : in) {
      if (t.needs(i)) t.grad_slot(i) += t.out_grad(self);
    }
  });
}

Var Tape::sub(Var a, Var b) {
  check_same(a, b);
  return push(value(a) - value(b), {a.id(), b.id()}, [](Tape& t, int self) {
    const auto& in = t.nodes_[self].inputs;
    if (t.needs(in[0])) t.grad_slot(in[0]) += t.out_grad(self);
    if (t.needs(in[1])) t.grad_slot(in[1]) -= t.out_grad(self);
  });
}

Var Tape::mul(Var a, Var b) {
  check_same(a, b);
  return push(value(a).cwiseProduct(value(b)), {a.id(), b.id()}, [](Tape& t, int self) {
    const auto& in = t.nodes_[self].inputs;
    const Matrix& g = t.out_grad(self);
    if (t.needs(in[0])) t.grad_slot(in[0]) += g.cwiseProduct(t.nodes_[in[1]].value);
    if (t.needs(in[1])) t.grad_slot(in[1]) += g.cwiseProduct(t.nodes_[in[0]].value);
  });
}

Var Tape::scale(Var a, double s) {
  return push(value(a) * s, {a.id()}, [s](Tape& t, int self) {
    t.grad_slot(t.nodes_[self].inputs[0]) += s * t.out_grad(self);
  });
}

Var Tape::add_scalar(Var a, double s) {
  return push(value(a).array() + s, {a.id()}, [](Tape& t, int self) {
    t.grad_slot(t.nodes_[self].inputs[0]) += t.out_grad(self);
  });
}

Var Tape::exp(Var a) {
  return push(value(a).array().exp().matrix(), {a.id()}, [](Tape& t, int self) {
    const Node& n = t.nodes_[self];
    t.grad_slot(n.inputs[0]) += n.grad.cwiseProduct(n.value);
  });
}

Var Tape::square(Var a) {
  return push(value(a).array().square().matrix(), {a.id()}, [](Tape& t, int self) {
    const Node& n = t.nodes_[self];
    const Matrix& x = t.nodes_[n.inputs[0]].value;
    t.grad_slot(n.inputs[0]) += 2.0 * n.grad.cwiseProduct(x);
  });
}

void Tape::fold_pattern(const Matrix& x, double lo, double hi) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    const std::uint64_t side = v <= lo ? 0 : (v < hi ? 1 : 2);
    signature_ = (signature_ ^ side) * 1099511628211ull;
  }
}

Var Tape::relu(Var a) {
  if (track_) fold_pattern(value(a), 0.0, std::numeric_limits<double>::infinity());
  return push(value(a).cwiseMax(0.0), {a.id()}, [](Tape& t, int self) {
    const Node& n = t.nodes_[self];
    t.grad_slot(n.inputs[0]) +=
        (n.value.array() > 0.0).select(n.grad.array(), 0.0).matrix();
  });
}

Var Tape::clamp(Var a, double lo, double hi) {
  if (track_) fold_pattern(value(a), lo, hi);
  return push(value(a).cwiseMax(lo).cwiseMin(hi), {a.id()}, [lo, hi](Tape& t, int self) {
    const Node& n = t.nodes_[self];
    const Matrix& x = t.nodes_[n.inputs[0]].value;
    t.grad_slot(n.inputs[0]) +=
        (x.array() > lo && x.array() < hi).select(n.grad.array(), 0.0).matrix();
  });
}

Var Tape::sum(Var a) {
  Matrix s(1, 1);
  s(0, 0) = value(a).sum();
  return push(std::move(s), {a.id()}, [](Tape& t, int self) {
    const Node& n = t.nodes_[self];
    t.grad_slot(n.inputs[0]).array() += n.grad(0, 0);
  });
}

Var Tape::matmul(Var a, Var b) {
  require(value(a).cols() == value(b).rows(), ErrorCode::kShape, "shape error");
  Matrix out;
  out.noalias() = value(a) * value(b);
  return push(std::move(out), {a.id(), b.id()}, [](Tape& t, int self) {
    const Node& n = t.nodes_[self];
    const Matrix& av = t.nodes_[n.inputs[0]].value;
    const Matrix& bv = t.nodes_[n.inputs[1]].value;
    if (t.needs(n.inputs[0])) t.grad_slot(n.inputs[0]).noalias() += n.grad * bv.transpose();
    if (t.needs(n.inputs[1])) t.grad_slot(n.inputs[1]).noalias() += av.transpose() * n.grad;
  });
}

Var Tape::affine(Var w, Var x, Var b) {
  const Matrix& wv = value(w);
  const Matrix& xv = value(x);
  const Matrix& bv = value(b);
  require(wv.cols() == xv.rows() && bv.rows() == wv.rows() && bv.cols() == 1, ErrorCode::kShape,
          "shape error");
  Matrix out;
  out.noalias() = wv * xv;
  out.colwise() += bv.col(0);
  return push(std::move(out), {w.id(), x.id(), b.id()}, [](Tape& t, int self) {
    const Node& n = t.nodes_[self];
    const int wi = n.inputs[0], xi = n.inputs[1], bi = n.inputs[2];
    if (t.needs(wi)) t.grad_slot(wi).noalias() += n.grad * t.nodes_[xi].value.transpose();
    if (t.needs(xi)) t.grad_slot(xi).noalias() += t.nodes_[wi].value.transpose() * n.grad;
    if (t.needs(bi)) t.grad_slot(bi) += n.grad.rowwise().sum();
  });
}

Var Tape::conv1d(Var x, Var w, Var b, const ConvGeometry& geom) {
  const Matrix& xv = value(x);
  const Matrix& wv = value(w);
  const Matrix& bv = value(b);
  require(xv.cols() == static_cast<Eigen::Index>(geom.batch) * geom.in_len, ErrorCode::kShape,
          "shape error: conv input");
  require(wv.cols() == xv.rows() * geom.kernel && bv.rows() == wv.rows() && bv.cols() == 1,
          ErrorCode::kShape, "shape error: conv weights");
  require(geom.out_len() > 0, ErrorCode::kShape, "shape error: conv output empty");

  auto cols = std::make_shared<Matrix>(im2col(xv, geom));
  Matrix out;
  out.noalias() = wv * *cols;
  out.colwise() += bv.col(0);
  if (!record_) cols.reset();
  return push(std::move(out), {x.id(), w.id(), b.id()}, [cols, geom](Tape& t, int self) {
    const Node& n = t.nodes_[self];
    const int xi = n.inputs[0], wi = n.inputs[1], bi = n.inputs[2];
    if (t.needs(wi)) t.grad_slot(wi).noalias() += n.grad * cols->transpose();
    if (t.needs(bi)) t.grad_slot(bi) += n.grad.rowwise().sum();
    if (t.needs(xi)) {
      Matrix dcols;
      dcols.noalias() = t.nodes_[wi].value.transpose() * n.grad;
      col2im_add(dcols, geom, t.grad_slot(xi));
    }
  });
}

Var Tape::upsample_nearest(Var x, int batch, int in_len, int out_len) {
  const Matrix& xv = value(x);
  require(xv.cols() == static_cast<Eigen::Index>(batch) * in_len && out_len > 0, ErrorCode::kShape,
          "shape error: upsample input");
  Matrix out(xv.rows(), static_cast<Eigen::Index>(batch) * out_len);
  for (int b = 0; b < batch; ++b) {
    for (int j = 0; j < out_len; ++j) {
      const int src = static_cast<int>(static_cast<long long>(j) * in_len / out_len);
      out.col(static_cast<Eigen::Index>(b) * out_len + j) =
          xv.col(static_cast<Eigen::Index>(b) * in_len + src);
    }
  }
  return push(std::move(out), {x.id()}, [batch, in_len, out_len](Tape& t, int self) {
    const Node& n = t.nodes_[self];
    Matrix& dx = t.grad_slot(n.inputs[0]);
    for (int b = 0; b < batch; ++b) {
      for (int j = 0; j < out_len; ++j) {
        const int src = static_cast<int>(static_cast<long long>(j) * in_len / out_len);
        dx.col(static_cast<Eigen::Index>(b) * in_len + src) +=
            n.grad.col(static_cast<Eigen::Index>(b) * out_len + j);
      }
    }
  });
}

// [C, B*L] and [L*C, B] share the same column-major memory, so both
// conversions are reshapes.
Var Tape::channels_to_features(Var x, int batch, int len) {
  const Matrix& xv = value(x);
  require(xv.cols() == static_cast<Eigen::Index>(batch) * len, ErrorCode::kShape,
          "shape error: flatten");
  const Eigen::Index rows = xv.rows() * len;
  Matrix out = Eigen::Map<const Matrix>(xv.data(), rows, batch);
  return push(std::move(out), {x.id()}, [](Tape& t, int self) {
    const Node& n = t.nodes_[self];
    Matrix& dx = t.grad_slot(n.inputs[0]);
    Eigen::Map<Matrix>(dx.data(), n.grad.rows(), n.grad.cols()) += n.grad;
  });
}

Var Tape::features_to_channels(Var x, int channels, int batch, int len) {
  const Matrix& xv = value(x);
  require(xv.rows() == static_cast<Eigen::Index>(channels) * len && xv.cols() == batch,
          ErrorCode::kShape, "shape error: unflatten");
  Matrix out = Eigen::Map<const Matrix>(xv.data(), channels, static_cast<Eigen::Index>(batch) * len);
  return push(std::move(out), {x.id()}, [](Tape& t, int self) {
    const Node& n = t.nodes_[self];
    Matrix& dx = t.grad_slot(n.inputs[0]);
    Eigen::Map<Matrix>(dx.data(), n.grad.rows(), n.grad.cols()) += n.grad;
  });
}

Var Tape::concat_rows(Var a, Var b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  require(av.cols() == bv.cols(), ErrorCode::kShape, "shape error: concat");
  Matrix out(av.rows() + bv.rows(), av.cols());
  out.topRows(av.rows()) = av;
  out.bottomRows(bv.rows()) = bv;
  const Eigen::Index split = av.rows();
  return push(std::move(out), {a.id(), b.id()}, [split](Tape& t, int self) {
    const Node& n = t.nodes_[self];
    if (t.needs(n.inputs[0])) t.grad_slot(n.inputs[0]) += n.grad.topRows(split);
    if (t.needs(n.inputs[1])) {
      t.grad_slot(n.inputs[1]) += n.grad.bottomRows(n.grad.rows() - split);
    }
  });
}

}  // namespace pvae::ad
