#include "moece/numerics/tape.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "moece/error.hpp"
#include "moece/numerics/fft.hpp"

namespace moece::numerics {

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Constant: return "constant";
    case Op::Variable: return "variable";
    case Op::Parameter: return "parameter";
    case Op::Conv2d: return "conv2d";
    case Op::Relu: return "relu";
    case Op::Add: return "add";
    case Op::Scale: return "scale";
    case Op::GlobalAvgPool: return "global_avg_pool";
    case Op::Softmax: return "softmax";
    case Op::GatherNormalized: return "gather_normalized";
    case Op::WeightedSum: return "weighted_sum";
    case Op::IfftFreqAxis: return "ifft_freq_axis";
    case Op::Nmse: return "nmse";
    case Op::DotConst: return "dot_const";
    case Op::Sum: return "sum";
  }
  return "?";
}

namespace {

std::size_t out_extent(std::size_t n, std::size_t stride) { return (n + stride - 1) / stride; }

Tensor conv_forward(const Tensor& x, const Tensor& k, const Tensor& b, std::size_t stride) {
  const std::size_t h = x.extent(0), w = x.extent(1), cin = x.extent(2);
  const std::size_t cout = k.extent(3);
  const std::size_t oh = out_extent(h, stride), ow = out_extent(w, stride);
  Tensor y({oh, ow, cout});
  const double* xd = x.data().data();
  const double* kd = k.data().data();
  const double* bd = b.data().data();
  double* yd = y.data().data();
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      double* out = yd + (i * ow + j) * cout;
      for (std::size_t co = 0; co < cout; ++co) out[co] = bd[co];
      for (std::size_t dy = 0; dy < 3; ++dy) {
        const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(i * stride + dy) - 1;
        if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t dx = 0; dx < 3; ++dx) {
          const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(j * stride + dx) - 1;
          if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(w)) continue;
          const double* in = xd + (static_cast<std::size_t>(ii) * w + static_cast<std::size_t>(jj)) * cin;
          const double* kk = kd + (dy * 3 + dx) * cin * cout;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const double v = in[ci];
            const double* krow = kk + ci * cout;
            for (std::size_t co = 0; co < cout; ++co) out[co] += v * krow[co];
          }
        }
      }
    }
  }
  return y;
}

// Accumulates into whichever of dx/dk/db is non-null.
void conv_backward(const Tensor& x, const Tensor& k, std::size_t stride, std::span<const double> dyv,
                   double* dx, double* dk, double* db) {
  const std::size_t h = x.extent(0), w = x.extent(1), cin = x.extent(2);
  const std::size_t cout = k.extent(3);
  const std::size_t oh = out_extent(h, stride), ow = out_extent(w, stride);
  const double* xd = x.data().data();
  const double* kd = k.data().data();
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      const double* g = dyv.data() + (i * ow + j) * cout;
      if (db)
        for (std::size_t co = 0; co < cout; ++co) db[co] += g[co];
      for (std::size_t dy = 0; dy < 3; ++dy) {
        const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(i * stride + dy) - 1;
        if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t dxo = 0; dxo < 3; ++dxo) {
          const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(j * stride + dxo) - 1;
          if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(w)) continue;
          const std::size_t pix = (static_cast<std::size_t>(ii) * w + static_cast<std::size_t>(jj)) * cin;
          const std::size_t tap = (dy * 3 + dxo) * cin * cout;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const double* krow = kd + tap + ci * cout;
            if (dx) {
              double acc = 0.0;
              for (std::size_t co = 0; co < cout; ++co) acc += g[co] * krow[co];
              dx[pix + ci] += acc;
            }
            if (dk) {
              const double v = xd[pix + ci];
              double* dkrow = dk + tap + ci * cout;
              for (std::size_t co = 0; co < cout; ++co) dkrow[co] += v * g[co];
            }
          }
        }
      }
    }
  }
}

void ifft_rows(const Tensor& x, Tensor& out, bool inverse) {
  const std::size_t a = x.extent(0), n = x.extent(1);
  DftPlan plan(n);
  std::vector<cdouble> row(n);
  for (std::size_t r = 0; r < a; ++r) {
    for (std::size_t f = 0; f < n; ++f) row[f] = {x.at(r, f, 0), x.at(r, f, 1)};
    if (inverse)
      plan.inverse(row);
    else
      plan.forward(row);
    for (std::size_t f = 0; f < n; ++f) {
      out.at(r, f, 0) = row[f].real();
      out.at(r, f, 1) = row[f].imag();
    }
  }
}

}  // namespace

Var Tape::record(Op op, std::vector<std::size_t> inputs, ForwardFn forward, BackwardFn backward) {
  Node node;
  node.op = op;
  node.inputs = std::move(inputs);
  for (auto in : node.inputs) node.requires_grad = node.requires_grad || nodes_[in].requires_grad;
  node.value = forward(*this);
  node.forward = std::move(forward);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

std::span<double> Tape::grad_buffer(std::size_t id) {
  auto& node = nodes_[id];
  if (!node.requires_grad) return {};
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

Var Tape::constant(Tensor value) {
  Node node;
  node.op = Op::Constant;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Tape::variable(Tensor value) {
  Node node;
  node.op = Op::Variable;
  node.value = std::move(value);
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Tape::parameter(Tensor& param) {
  Node node;
  node.op = Op::Parameter;
  node.value = param;
  node.value.clear_grad();
  node.param = &param;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Tape::conv2d(Var input, Var kernel, Var bias, std::size_t stride) {
  const Tensor& x = value(input);
  const Tensor& k = value(kernel);
  const Tensor& b = value(bias);
  if (x.rank() != 3) throw ShapeError("conv2d input must be [H,W,C], got " + shape_to_string(x.shape()));
  if (k.rank() != 4 || k.extent(0) != 3 || k.extent(1) != 3)
    throw ShapeError("conv2d kernel must be [3,3,Cin,Cout], got " + shape_to_string(k.shape()));
  if (k.extent(2) != x.extent(2))
    throw ShapeError("conv2d channel mismatch: input has " + std::to_string(x.extent(2)) +
                     " channels, kernel expects " + std::to_string(k.extent(2)));
  if (b.rank() != 1 || b.extent(0) != k.extent(3))
    throw ShapeError("conv2d bias must be [Cout], got " + shape_to_string(b.shape()));
  if (stride == 0) throw ShapeError("conv2d stride must be positive");
  const std::size_t xi = input.id, ki = kernel.id, bi = bias.id;
  return record(
      Op::Conv2d, {xi, ki, bi},
      [=](const Tape& t) { return conv_forward(t.val(xi), t.val(ki), t.val(bi), stride); },
      [=](Tape& t, std::size_t self) {
        const auto g = t.grad_of(self);
        double* dx = t.grad_buffer(xi).data();
        double* dk = t.grad_buffer(ki).data();
        double* db = t.grad_buffer(bi).data();
        conv_backward(t.val(xi), t.val(ki), stride, g, dx, dk, db);
      });
}

Var Tape::relu(Var x) {
  const std::size_t xi = x.id;
  return record(
      Op::Relu, {xi},
      [=](const Tape& t) {
        Tensor y = t.val(xi);
        for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
        return y;
      },
      [=](Tape& t, std::size_t self) {
        const auto g = t.grad_of(self);
        const auto xv = t.val(xi).data();
        auto dx = t.grad_buffer(xi);
        if (dx.empty()) return;
        for (std::size_t i = 0; i < g.size(); ++i)
          if (xv[i] > 0.0) dx[i] += g[i];
      });
}

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  const std::size_t ai = a.id, bi = b.id;
  return record(
      Op::Add, {ai, bi},
      [=](const Tape& t) {
        Tensor y = t.val(ai);
        const auto bv = t.val(bi).data();
        auto yd = y.data();
        for (std::size_t i = 0; i < yd.size(); ++i) yd[i] += bv[i];
        return y;
      },
      [=](Tape& t, std::size_t self) {
        for (std::size_t in : {ai, bi}) {
          const auto g = t.grad_of(self);
          auto d = t.grad_buffer(in);
          if (d.empty()) continue;
          for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
        }
      });
}

Var Tape::scale(Var x, double factor) {
  const std::size_t xi = x.id;
  return record(
      Op::Scale, {xi},
      [=](const Tape& t) {
        Tensor y = t.val(xi);
        for (auto& v : y.data()) v *= factor;
        return y;
      },
      [=](Tape& t, std::size_t self) {
        const auto g = t.grad_of(self);
        auto d = t.grad_buffer(xi);
        if (d.empty()) return;
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += factor * g[i];
      });
}

Var Tape::global_avg_pool(Var x) {
  const Tensor& xv = value(x);
  if (xv.rank() != 3 || xv.extent(0) == 0 || xv.extent(1) == 0)
    throw ShapeError("global_avg_pool expects non-empty [H,W,C], got " + shape_to_string(xv.shape()));
  const std::size_t xi = x.id;
  return record(
      Op::GlobalAvgPool, {xi},
      [=](const Tape& t) {
        const Tensor& in = t.val(xi);
        const std::size_t pixels = in.extent(0) * in.extent(1), c = in.extent(2);
        Tensor y({c});
        for (std::size_t p = 0; p < pixels; ++p)
          for (std::size_t ch = 0; ch < c; ++ch) y[ch] += in[p * c + ch];
        for (auto& v : y.data()) v /= static_cast<double>(pixels);
        return y;
      },
      [=](Tape& t, std::size_t self) {
        const Tensor& in = t.val(xi);
        const std::size_t pixels = in.extent(0) * in.extent(1), c = in.extent(2);
        const auto g = t.grad_of(self);
        auto d = t.grad_buffer(xi);
        if (d.empty()) return;
        const double inv = 1.0 / static_cast<double>(pixels);
        for (std::size_t p = 0; p < pixels; ++p)
          for (std::size_t ch = 0; ch < c; ++ch) d[p * c + ch] += g[ch] * inv;
      });
}

Var Tape::softmax(Var logits) {
  if (value(logits).rank() != 1) throw ShapeError("softmax expects a vector");
  const std::size_t xi = logits.id;
  return record(
      Op::Softmax, {xi},
      [=](const Tape& t) {
        Tensor y = t.val(xi);
        auto d = y.data();
        const double mx = *std::max_element(d.begin(), d.end());
        double total = 0.0;
        for (auto& v : d) {
          v = std::exp(v - mx);
          total += v;
        }
        for (auto& v : d) v /= total;
        return y;
      },
      [=](Tape& t, std::size_t self) {
        const auto s = t.val(self).data();
        const auto g = t.grad_of(self);
        double dot = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) dot += g[i] * s[i];
        auto d = t.grad_buffer(xi);
        if (d.empty()) return;
        for (std::size_t i = 0; i < s.size(); ++i) d[i] += s[i] * (g[i] - dot);
      });
}

Var Tape::gather_normalized(Var w, std::span<const std::size_t> idx) {
  const Tensor& wv = value(w);
  if (wv.rank() != 1) throw ShapeError("gather_normalized expects a weight vector");
  if (idx.empty()) throw ShapeError("gather_normalized needs at least one index");
  std::vector<std::size_t> sel(idx.begin(), idx.end());
  for (std::size_t i = 0; i < sel.size(); ++i) {
    if (sel[i] >= wv.size()) throw ShapeError("gather_normalized index out of range");
    for (std::size_t j = 0; j < i; ++j)
      if (sel[i] == sel[j]) throw ShapeError("gather_normalized indices must be distinct");
  }
  double mass = 0.0;
  for (auto i : sel) mass += wv[i];
  if (mass == 0.0) ++degenerate_;
  const std::size_t wi = w.id;
  return record(
      Op::GatherNormalized, {wi},
      [=](const Tape& t) {
        const Tensor& in = t.val(wi);
        Tensor y({sel.size()});
        double s = 0.0;
        for (auto i : sel) s += in[i];
        for (std::size_t j = 0; j < sel.size(); ++j)
          y[j] = s == 0.0 ? 1.0 / static_cast<double>(sel.size()) : in[sel[j]] / s;
        return y;
      },
      [=](Tape& t, std::size_t self) {
        const Tensor& in = t.val(wi);
        double s = 0.0;
        for (auto i : sel) s += in[i];
        if (s == 0.0) return;
        const auto out = t.val(self).data();
        const auto g = t.grad_of(self);
        double dot = 0.0;
        for (std::size_t j = 0; j < sel.size(); ++j) dot += g[j] * out[j];
        auto d = t.grad_buffer(wi);
        if (d.empty()) return;
        for (std::size_t j = 0; j < sel.size(); ++j) d[sel[j]] += (g[j] - dot) / s;
      });
}

Var Tape::weighted_sum(std::span<const Var> candidates, Var weights) {
  const Tensor& wv = value(weights);
  if (candidates.empty()) throw ShapeError("weighted_sum needs at least one candidate");
  if (wv.rank() != 1 || wv.size() != candidates.size())
    throw ShapeError("weighted_sum: " + std::to_string(candidates.size()) + " candidates but weight shape " +
                     shape_to_string(wv.shape()));
  std::vector<std::size_t> ids;
  for (const auto& c : candidates) {
    require_same_shape(value(candidates.front()), value(c), "weighted_sum");
    ids.push_back(c.id);
  }
  const std::size_t wi = weights.id;
  std::vector<std::size_t> inputs = ids;
  inputs.push_back(wi);
  return record(
      Op::WeightedSum, std::move(inputs),
      [=](const Tape& t) {
        Tensor y(t.val(ids.front()).shape());
        auto yd = y.data();
        const Tensor& wt = t.val(wi);
        for (std::size_t c = 0; c < ids.size(); ++c) {
          const auto p = t.val(ids[c]).data();
          for (std::size_t i = 0; i < yd.size(); ++i) yd[i] += wt[c] * p[i];
        }
        return y;
      },
      [=](Tape& t, std::size_t self) {
        const Tensor& wt = t.val(wi);
        for (std::size_t c = 0; c < ids.size(); ++c) {
          const auto g = t.grad_of(self);
          const auto p = t.val(ids[c]).data();
          double dot = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * p[i];
          if (auto dw = t.grad_buffer(wi); !dw.empty()) dw[c] += dot;
          auto dp = t.grad_buffer(ids[c]);
          const auto g2 = t.grad_of(self);
          if (!dp.empty())
            for (std::size_t i = 0; i < g2.size(); ++i) dp[i] += wt[c] * g2[i];
        }
      });
}

Var Tape::ifft_freq_axis(Var x) {
  const Tensor& xv = value(x);
  if (xv.rank() != 3 || xv.extent(2) != 2 || xv.extent(1) == 0)
    throw ShapeError("ifft_freq_axis expects [A,N,2], got " + shape_to_string(xv.shape()));
  const std::size_t xi = x.id;
  return record(
      Op::IfftFreqAxis, {xi},
      [=](const Tape& t) {
        Tensor y(t.val(xi).shape());
        ifft_rows(t.val(xi), y, true);
        return y;
      },
      [=](Tape& t, std::size_t self) {
        // Adjoint of (1/N)·conj-DFT is (1/N)·DFT.
        const Tensor& in = t.val(xi);
        Tensor g(in.shape(), std::vector<double>(t.grad_of(self).begin(), t.grad_of(self).end()));
        Tensor back(in.shape());
        ifft_rows(g, back, false);
        const double inv = 1.0 / static_cast<double>(in.extent(1));
        auto d = t.grad_buffer(xi);
        if (d.empty()) return;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += back[i] * inv;
      });
}

Var Tape::nmse(Var pred, const Tensor& target) {
  require_same_shape(value(pred), target, "nmse");
  const double ref = target.squared_norm();
  if (!(ref > 0.0)) throw DomainError("nmse: reference has zero norm");
  const std::size_t pi = pred.id;
  auto tgt = std::make_shared<const Tensor>(target);
  return record(
      Op::Nmse, {pi},
      [=](const Tape& t) {
        const auto p = t.val(pi).data();
        const auto q = tgt->data();
        double err = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double e = p[i] - q[i];
          err += e * e;
        }
        return Tensor({1}, {err / ref});
      },
      [=](Tape& t, std::size_t self) {
        const double g = t.grad_of(self)[0];
        const auto p = t.val(pi).data();
        const auto q = tgt->data();
        auto d = t.grad_buffer(pi);
        if (d.empty()) return;
        const double c = 2.0 * g / ref;
        for (std::size_t i = 0; i < p.size(); ++i) d[i] += c * (p[i] - q[i]);
      });
}

Var Tape::dot_const(Var x, std::span<const double> coeffs) {
  if (value(x).size() != coeffs.size()) throw ShapeError("dot_const: length mismatch");
  const std::size_t xi = x.id;
  std::vector<double> c(coeffs.begin(), coeffs.end());
  return record(
      Op::DotConst, {xi},
      [=](const Tape& t) {
        const auto v = t.val(xi).data();
        double s = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) s += c[i] * v[i];
        return Tensor({1}, {s});
      },
      [=](Tape& t, std::size_t self) {
        const double g = t.grad_of(self)[0];
        auto d = t.grad_buffer(xi);
        if (d.empty()) return;
        for (std::size_t i = 0; i < c.size(); ++i) d[i] += g * c[i];
      });
}

Var Tape::sum(Var x) {
  const std::size_t xi = x.id;
  return record(
      Op::Sum, {xi},
      [=](const Tape& t) {
        double s = 0.0;
        for (double v : t.val(xi).data()) s += v;
        return Tensor({1}, {s});
      },
      [=](Tape& t, std::size_t self) {
        const double g = t.grad_of(self)[0];
        for (auto& d : t.grad_buffer(xi)) d += g;
      });
}

void Tape::backward(Var output, std::optional<Tensor> seed) {
  if (nodes_.empty()) throw UsageError("backward called on an empty tape");
  if (output.id >= nodes_.size()) throw UsageError("backward: output is not on this tape");
  for (auto& n : nodes_) n.grad.clear();
  auto& out = nodes_[output.id];
  if (seed) {
    require_same_shape(out.value, *seed, "backward seed");
    out.grad.assign(seed->data().begin(), seed->data().end());
  } else {
    if (out.value.size() != 1)
      throw UsageError("backward without a seed needs a single-element output, got " +
                       shape_to_string(out.value.shape()));
    out.grad.assign(1, 1.0);
  }
  for (std::size_t id = output.id + 1; id-- > 0;) {
    auto& node = nodes_[id];
    if (node.grad.empty() || !node.requires_grad) continue;
    if (node.backward) node.backward(*this, id);
    if (node.param) nodes_[id].param->accumulate_grad(nodes_[id].grad);
  }
}

std::vector<double> Tape::grad(Var v) const {
  const auto& node = nodes_.at(v.id);
  if (node.grad.empty()) return std::vector<double>(node.value.size(), 0.0);
  return node.grad;
}

bool Tape::replay_matches() const {
  for (const auto& node : nodes_) {
    if (!node.forward) continue;
    const Tensor again = node.forward(*this);
    if (!(again == node.value)) return false;
  }
  return true;
}

}  // namespace moece::numerics
