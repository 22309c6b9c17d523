#include "growflow/diff/tape.hpp"

#include "growflow/core/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <set>

namespace growflow::diff {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

Var Tape::push(std::string op, std::vector<int> inputs, std::vector<double> value, BackwardFn backward) {
  Node n;
  n.op = std::move(op);
  n.owned_value = std::move(value);
  n.value = n.owned_value;
  for (int in : inputs) n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(static_cast<int>(nodes_.size() - 1));
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id_ < 0 || static_cast<std::size_t>(v.id_) >= nodes_.size()) throw ContractError("Tape: invalid Var");
  return nodes_[v.id_];
}

Tape::Node& Tape::node(Var v) {
  if (v.id_ < 0 || static_cast<std::size_t>(v.id_) >= nodes_.size()) throw ContractError("Tape: invalid Var");
  return nodes_[v.id_];
}

void Tape::check_same_size(Var a, Var b, std::string_view op) const {
  if (size(a) != size(b)) {
    throw ContractError("Tape::" + std::string(op) + ": operand sizes differ (" + std::to_string(size(a)) +
                        " vs " + std::to_string(size(b)) + ")");
  }
}

std::span<const double> Tape::value(Var v) const { return node(v).value; }

double Tape::scalar(Var v) const {
  const auto& n = node(v);
  if (n.value.size() != 1) throw ContractError("Tape::scalar: node '" + n.op + "' is not a scalar");
  return n.value[0];
}

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

std::string_view Tape::op(Var v) const { return node(v).op; }

std::span<double> Tape::adjoint(Var v) {
  auto& n = node(v);
  if (n.adjoint.empty() && !n.value.empty()) {
    n.owned_adjoint.assign(n.value.size(), 0.0);
    n.adjoint = n.owned_adjoint;
  }
  return n.adjoint;
}

std::span<const double> Tape::grad(Var v) const { return node(v).adjoint; }

Var Tape::param(ParameterStore& store, std::string_view name) {
  Node n;
  n.op = "param:" + std::string(name);
  n.value = store.values(name);
  n.adjoint = store.grads(name);
  n.requires_grad = true;
  n.is_param = true;
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var(static_cast<int>(nodes_.size() - 1));
}

Var Tape::input(std::vector<double> values) {
  Node n;
  n.op = "input";
  n.owned_value = std::move(values);
  n.value = n.owned_value;
  n.requires_grad = true;
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var(static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(std::vector<double> values) {
  Node n;
  n.op = "constant";
  n.owned_value = std::move(values);
  n.value = n.owned_value;
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var(static_cast<int>(nodes_.size() - 1));
}

Var Tape::view(std::span<const double> values) {
  Node n;
  n.op = "view";
  n.value = std::span<double>(const_cast<double*>(values.data()), values.size());
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var(static_cast<int>(nodes_.size() - 1));
}

Var Tape::custom(std::string_view op, std::vector<Var> inputs, std::vector<double> value, BackwardFn backward) {
  std::vector<int> ids;
  for (auto v : inputs) {
    node(v);
    ids.push_back(v.id_);
  }
  return push(std::string(op), std::move(ids), std::move(value), std::move(backward));
}

Var Tape::add(Var a, Var b) {
  check_same_size(a, b, "add");
  auto va = value(a), vb = value(b);
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
  return push("add", {a.id_, b.id_}, std::move(out), [a, b](Tape& t, std::span<const double> g) {
    for (Var v : {a, b}) {
      if (!t.requires_grad(v)) continue;
      auto adj = t.adjoint(v);
      for (std::size_t i = 0; i < g.size(); ++i) adj[i] += g[i];
    }
  });
}

Var Tape::sub(Var a, Var b) {
  check_same_size(a, b, "sub");
  auto va = value(a), vb = value(b);
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] - vb[i];
  return push("sub", {a.id_, b.id_}, std::move(out), [a, b](Tape& t, std::span<const double> g) {
    if (t.requires_grad(a)) {
      auto adj = t.adjoint(a);
      for (std::size_t i = 0; i < g.size(); ++i) adj[i] += g[i];
    }
    if (t.requires_grad(b)) {
      auto adj = t.adjoint(b);
      for (std::size_t i = 0; i < g.size(); ++i) adj[i] -= g[i];
    }
  });
}

Var Tape::mul(Var a, Var b) {
  check_same_size(a, b, "mul");
  auto va = value(a), vb = value(b);
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
  return push("mul", {a.id_, b.id_}, std::move(out), [a, b](Tape& t, std::span<const double> g) {
    auto va = t.value(a), vb = t.value(b);
    if (t.requires_grad(a)) {
      auto adj = t.adjoint(a);
      for (std::size_t i = 0; i < g.size(); ++i) adj[i] += g[i] * vb[i];
    }
    if (t.requires_grad(b)) {
      auto adj = t.adjoint(b);
      for (std::size_t i = 0; i < g.size(); ++i) adj[i] += g[i] * va[i];
    }
  });
}

Var Tape::scale(Var a, double s) {
  auto va = value(a);
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * va[i];
  return push("scale", {a.id_}, std::move(out), [a, s](Tape& t, std::span<const double> g) {
    auto adj = t.adjoint(a);
    for (std::size_t i = 0; i < g.size(); ++i) adj[i] += s * g[i];
  });
}

Var Tape::lincomb(std::span<const std::pair<double, Var>> terms) {
  if (terms.empty()) throw ContractError("Tape::lincomb: no terms");
  std::vector<double> out(size(terms[0].second), 0.0);
  std::vector<int> ids;
  for (const auto& [c, v] : terms) {
    check_same_size(terms[0].second, v, "lincomb");
    auto vv = value(v);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c * vv[i];
    ids.push_back(v.id_);
  }
  std::vector<std::pair<double, Var>> captured(terms.begin(), terms.end());
  return push("lincomb", std::move(ids), std::move(out),
              [captured = std::move(captured)](Tape& t, std::span<const double> g) {
                for (const auto& [c, v] : captured) {
                  if (!t.requires_grad(v) || c == 0.0) continue;
                  auto adj = t.adjoint(v);
                  for (std::size_t i = 0; i < g.size(); ++i) adj[i] += c * g[i];
                }
              });
}

Var Tape::relu(Var a) {
  auto va = value(a);
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] > 0.0 ? va[i] : 0.0;
  return push("relu", {a.id_}, std::move(out), [a](Tape& t, std::span<const double> g) {
    auto va = t.value(a);
    auto adj = t.adjoint(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (va[i] > 0.0) adj[i] += g[i];
    }
  });
}

Var Tape::sigmoid(Var a) {
  auto va = value(a);
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-va[i]));
  const Var self(static_cast<int>(nodes_.size()));
  return push("sigmoid", {a.id_}, std::move(out), [a, self](Tape& t, std::span<const double> g) {
    auto y = t.value(self);
    auto adj = t.adjoint(a);
    for (std::size_t i = 0; i < g.size(); ++i) adj[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var Tape::exp(Var a) {
  auto va = value(a);
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(va[i]);
  const Var self(static_cast<int>(nodes_.size()));
  return push("exp", {a.id_}, std::move(out), [a, self](Tape& t, std::span<const double> g) {
    auto y = t.value(self);
    auto adj = t.adjoint(a);
    for (std::size_t i = 0; i < g.size(); ++i) adj[i] += g[i] * y[i];
  });
}

Var Tape::linear(Var x, std::size_t rows, Var w, Var b) {
  const std::size_t out_dim = size(b);
  if (rows == 0 || size(x) % rows != 0) throw ContractError("Tape::linear: input size not divisible by rows");
  const std::size_t in_dim = size(x) / rows;
  if (size(w) != in_dim * out_dim) {
    throw ContractError("Tape::linear: weight is not " + std::to_string(in_dim) + "x" + std::to_string(out_dim));
  }
  std::vector<double> out(rows * out_dim);
  {
    ConstMap X(value(x).data(), rows, in_dim);
    ConstMap W(value(w).data(), in_dim, out_dim);
    Eigen::Map<const Eigen::RowVectorXd> B(value(b).data(), out_dim);
    MutMap Y(out.data(), rows, out_dim);
    Y.noalias() = X * W;
    Y.rowwise() += B;
  }
  return push("linear", {x.id_, w.id_, b.id_}, std::move(out),
              [x, w, b, rows, in_dim, out_dim](Tape& t, std::span<const double> g) {
                ConstMap G(g.data(), rows, out_dim);
                if (t.requires_grad(x)) {
                  MutMap DX(t.adjoint(x).data(), rows, in_dim);
                  ConstMap W(t.value(w).data(), in_dim, out_dim);
                  DX.noalias() += G * W.transpose();
                }
                if (t.requires_grad(w)) {
                  MutMap DW(t.adjoint(w).data(), in_dim, out_dim);
                  ConstMap X(t.value(x).data(), rows, in_dim);
                  DW.noalias() += X.transpose() * G;
                }
                if (t.requires_grad(b)) {
                  Eigen::Map<Eigen::RowVectorXd> DB(t.adjoint(b).data(), out_dim);
                  DB += G.colwise().sum();
                }
              });
}

Var Tape::sum(Var a) {
  double s = 0.0;
  for (double v : value(a)) s += v;
  return push("sum", {a.id_}, {s}, [a](Tape& t, std::span<const double> g) {
    for (double& d : t.adjoint(a)) d += g[0];
  });
}

Var Tape::mean(Var a) {
  const auto n = static_cast<double>(size(a));
  if (n == 0) throw ContractError("Tape::mean: empty operand");
  double s = 0.0;
  for (double v : value(a)) s += v;
  return push("mean", {a.id_}, {s / n}, [a, n](Tape& t, std::span<const double> g) {
    for (double& d : t.adjoint(a)) d += g[0] / n;
  });
}

Var Tape::l1_loss(Var pred, std::span<const double> target) {
  auto p = value(pred);
  if (p.size() != target.size() || p.empty()) throw ContractError("Tape::l1_loss: size mismatch");
  double s = 0.0;
  std::vector<double> sign(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - target[i];
    s += std::abs(d);
    sign[i] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
  }
  const double n = static_cast<double>(p.size());
  return push("l1_loss", {pred.id_}, {s / n}, [pred, n, sign = std::move(sign)](Tape& t, std::span<const double> g) {
    auto adj = t.adjoint(pred);
    for (std::size_t i = 0; i < adj.size(); ++i) adj[i] += g[0] * sign[i] / n;
  });
}

Var Tape::slice(Var a, std::size_t offset, std::size_t length) {
  auto va = value(a);
  if (offset + length > va.size()) throw ContractError("Tape::slice: range out of bounds");
  std::vector<double> out(va.begin() + offset, va.begin() + offset + length);
  return push("slice", {a.id_}, std::move(out), [a, offset](Tape& t, std::span<const double> g) {
    auto adj = t.adjoint(a);
    for (std::size_t i = 0; i < g.size(); ++i) adj[offset + i] += g[i];
  });
}

Var Tape::concat(std::span<const Var> parts) {
  std::vector<double> out;
  std::vector<int> ids;
  for (auto p : parts) {
    auto v = value(p);
    out.insert(out.end(), v.begin(), v.end());
    ids.push_back(p.id_);
  }
  std::vector<Var> captured(parts.begin(), parts.end());
  return push("concat", std::move(ids), std::move(out),
              [captured = std::move(captured)](Tape& t, std::span<const double> g) {
                std::size_t offset = 0;
                for (auto p : captured) {
                  const auto n = t.size(p);
                  if (t.requires_grad(p)) {
                    auto adj = t.adjoint(p);
                    for (std::size_t i = 0; i < n; ++i) adj[i] += g[offset + i];
                  }
                  offset += n;
                }
              });
}

Var Tape::gather(Var a, std::span<const std::size_t> blocks, std::size_t width) {
  auto va = value(a);
  std::vector<double> out;
  out.reserve(blocks.size() * width);
  for (auto b : blocks) {
    if ((b + 1) * width > va.size()) throw ContractError("Tape::gather: block index out of range");
    out.insert(out.end(), va.begin() + b * width, va.begin() + (b + 1) * width);
  }
  std::vector<std::size_t> idx(blocks.begin(), blocks.end());
  return push("gather", {a.id_}, std::move(out), [a, idx = std::move(idx), width](Tape& t, std::span<const double> g) {
    auto adj = t.adjoint(a);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      for (std::size_t j = 0; j < width; ++j) adj[idx[k] * width + j] += g[k * width + j];
    }
  });
}

Var Tape::scatter(Var base, Var src, std::span<const std::size_t> blocks, std::size_t width) {
  auto vb = value(base);
  auto vs = value(src);
  if (vs.size() != blocks.size() * width) throw ContractError("Tape::scatter: source size mismatch");
  std::set<std::size_t> seen;
  std::vector<double> out(vb.begin(), vb.end());
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    if ((blocks[k] + 1) * width > vb.size()) throw ContractError("Tape::scatter: block index out of range");
    if (!seen.insert(blocks[k]).second) throw ContractError("Tape::scatter: duplicate block index");
    std::copy_n(vs.begin() + k * width, width, out.begin() + blocks[k] * width);
  }
  std::vector<std::size_t> idx(blocks.begin(), blocks.end());
  return push("scatter", {base.id_, src.id_}, std::move(out),
              [base, src, idx = std::move(idx), width](Tape& t, std::span<const double> g) {
                if (t.requires_grad(base)) {
                  auto adj = t.adjoint(base);
                  std::vector<double> masked(g.begin(), g.end());
                  for (auto b : idx) std::fill_n(masked.begin() + b * width, width, 0.0);
                  for (std::size_t i = 0; i < adj.size(); ++i) adj[i] += masked[i];
                }
                if (t.requires_grad(src)) {
                  auto adj = t.adjoint(src);
                  for (std::size_t k = 0; k < idx.size(); ++k) {
                    for (std::size_t j = 0; j < width; ++j) adj[k * width + j] += g[idx[k] * width + j];
                  }
                }
              });
}

Var Tape::normalize_rows(Var a, std::size_t offset, std::size_t rows, std::size_t width) {
  auto va = value(a);
  if (offset + rows * width > va.size()) throw ContractError("Tape::normalize_rows: range out of bounds");
  std::vector<double> out(va.begin(), va.end());
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double n2 = 0.0;
    for (std::size_t j = 0; j < width; ++j) n2 += va[offset + r * width + j] * va[offset + r * width + j];
    norms[r] = std::sqrt(n2);
    if (!(norms[r] > 1e-12)) throw NumericalError("normalize_rows: degenerate row " + std::to_string(r));
    for (std::size_t j = 0; j < width; ++j) out[offset + r * width + j] /= norms[r];
  }
  const Var self(static_cast<int>(nodes_.size()));
  return push("normalize_rows", {a.id_}, std::move(out),
              [a, self, offset, rows, width, norms = std::move(norms)](Tape& t, std::span<const double> g) {
                auto y = t.value(self);
                auto adj = t.adjoint(a);
                const std::size_t end = offset + rows * width;
                for (std::size_t i = 0; i < offset; ++i) adj[i] += g[i];
                for (std::size_t i = end; i < g.size(); ++i) adj[i] += g[i];
                for (std::size_t r = 0; r < rows; ++r) {
                  const std::size_t base = offset + r * width;
                  double dot = 0.0;
                  for (std::size_t j = 0; j < width; ++j) dot += y[base + j] * g[base + j];
                  for (std::size_t j = 0; j < width; ++j) adj[base + j] += (g[base + j] - y[base + j] * dot) / norms[r];
                }
              });
}

void Tape::backward(Var loss) {
  auto& out = node(loss);
  if (out.value.size() != 1) {
    throw ContractError("Tape::backward: loss node '" + out.op + "' is not a scalar (size " +
                        std::to_string(out.value.size()) + ")");
  }
  if (!std::isfinite(out.value[0])) {
    for (std::size_t i = 0; i <= static_cast<std::size_t>(loss.id_); ++i) {
      if (!all_finite(nodes_[i].value)) {
        throw NumericalError("non-finite value produced by op '" + nodes_[i].op + "' (node " + std::to_string(i) +
                             ")");
      }
    }
  }
  for (auto& n : nodes_) {
    if (!n.is_leaf) {
      n.owned_adjoint.clear();
      n.adjoint = {};
    }
  }
  adjoint(loss)[0] += 1.0;
  for (int i = loss.id_; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.backward || n.adjoint.empty()) continue;
    n.backward(*this, n.adjoint);
    for (int in : nodes_[i].inputs) {
      const Node& m = nodes_[in];
      if (!m.is_param && !all_finite(m.adjoint)) {
        throw NumericalError("non-finite gradient produced by backward of op '" + nodes_[i].op + "' (node " +
                             std::to_string(i) + ")");
      }
    }
  }
  for (const auto& n : nodes_) {
    if (n.is_param && !all_finite(n.adjoint)) {
      throw NumericalError("non-finite gradient accumulated into '" + n.op + "'");
    }
  }
}

}  // namespace growflow::diff
