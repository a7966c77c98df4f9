#include "revnet/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace revnet {

namespace {

void axpy(Tensor& out, const Tensor& g, double a = 1.0) {
  double* o = out.data();
  const double* x = g.data();
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) o[i] += a * x[i];
}

// C[m,n] += A[m,k] * B[k,n], raw row-major buffers.
void matmul_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<std::int64_t>(i) * k;
    double* ci = c + static_cast<std::int64_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + static_cast<std::int64_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[m,n] += A[m,k] * B[n,k]^T
void matmul_bt_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<std::int64_t>(i) * k;
    double* ci = c + static_cast<std::int64_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + static_cast<std::int64_t>(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

// C[k,n] += A[m,k]^T * B[m,n]
void matmul_at_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<std::int64_t>(i) * k;
    const double* bi = b + static_cast<std::int64_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      double* cp = c + static_cast<std::int64_t>(p) * n;
      for (int j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

}  // namespace

Tape::Tape(Precision precision, bool record) : precision_(precision), record_(record) {}

Var Tape::push(const char* op, Tensor value, std::vector<int> inputs, std::function<void(Tape&, int)> back) {
  if (precision_ == Precision::f32) {
    for (double& v : value.values()) v = static_cast<double>(static_cast<float>(v));
  }
  if (!value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by op '") + op + "'");
  }
  Node n;
  n.value = std::move(value);
  n.op = op;
  if (record_) {
    n.inputs = std::move(inputs);
    n.back = std::move(back);
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape::Node& Tape::node(Var v) {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
    throw ShapeError("invalid tape handle");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Tape::Node& Tape::node(Var v) const {
  return const_cast<Tape*>(this)->node(v);
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

Var Tape::constant(Tensor value) {
  return push("constant", std::move(value), {}, nullptr);
}

Var Tape::param(const Tensor& storage) {
  auto it = params_.find(&storage);
  if (it != params_.end()) return Var{it->second};
  Var v = push("param", storage, {}, nullptr);
  params_.emplace(&storage, v.id);
  return v;
}

Var Tape::add(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (!x.same_shape(y)) {
    throw ShapeError("add: shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  }
  Tensor out = x;
  axpy(out, y);
  return push("add", std::move(out), {a.id, b.id}, [](Tape& t, int id) {
    const Tensor& g = t.grads_[static_cast<std::size_t>(id)];
    const auto& in = t.nodes_[static_cast<std::size_t>(id)].inputs;
    axpy(t.grad_buf(in[0]), g);
    axpy(t.grad_buf(in[1]), g);
  });
}

Var Tape::sub(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (!x.same_shape(y)) {
    throw ShapeError("sub: shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  }
  Tensor out = x;
  axpy(out, y, -1.0);
  return push("sub", std::move(out), {a.id, b.id}, [](Tape& t, int id) {
    const Tensor& g = t.grads_[static_cast<std::size_t>(id)];
    const auto& in = t.nodes_[static_cast<std::size_t>(id)].inputs;
    axpy(t.grad_buf(in[0]), g);
    axpy(t.grad_buf(in[1]), g, -1.0);
  });
}

Var Tape::mul(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (!x.same_shape(y)) {
    throw ShapeError("mul: shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  }
  Tensor out = x;
  {
    double* o = out.data();
    const double* yv = y.data();
    for (std::int64_t i = 0; i < out.numel(); ++i) o[i] *= yv[i];
  }
  return push("mul", std::move(out), {a.id, b.id}, [](Tape& t, int id) {
    const Tensor& g = t.grads_[static_cast<std::size_t>(id)];
    const auto& in = t.nodes_[static_cast<std::size_t>(id)].inputs;
    const Tensor& xv = t.nodes_[static_cast<std::size_t>(in[0])].value;
    const Tensor& yv = t.nodes_[static_cast<std::size_t>(in[1])].value;
    Tensor& gx = t.grad_buf(in[0]);
    Tensor& gy = t.grad_buf(in[1]);
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      gx[i] += g[i] * yv[i];
      gy[i] += g[i] * xv[i];
    }
  });
}

Var Tape::scale(Var a, double c) {
  Tensor out = value(a);
  for (double& v : out.values()) v *= c;
  return push("scale", std::move(out), {a.id}, [c](Tape& t, int id) {
    const Tensor& g = t.grads_[static_cast<std::size_t>(id)];
    axpy(t.grad_buf(t.nodes_[static_cast<std::size_t>(id)].inputs[0]), g, c);
  });
}

Var Tape::add_scalar(Var v, Var s) {
  const Tensor& x = value(v);
  const Tensor& sc = value(s);
  if (sc.numel() != 1) throw ShapeError("add_scalar: broadcast operand must be scalar");
  Tensor out = x;
  const double c = sc[0];
  for (double& o : out.values()) o += c;
  return push("add_scalar", std::move(out), {v.id, s.id}, [](Tape& t, int id) {
    const Tensor& g = t.grads_[static_cast<std::size_t>(id)];
    const auto& in = t.nodes_[static_cast<std::size_t>(id)].inputs;
    axpy(t.grad_buf(in[0]), g);
    double total = 0.0;
    for (std::int64_t i = 0; i < g.numel(); ++i) total += g[i];
    t.grad_buf(in[1])[0] += total;
  });
}

Var Tape::sigmoid(Var a) {
  Tensor out = value(a);
  for (double& v : out.values()) v = 1.0 / (1.0 + std::exp(-v));
  return push("sigmoid", std::move(out), {a.id}, [](Tape& t, int id) {
    const Node& self = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(id)];
    Tensor& gx = t.grad_buf(self.inputs[0]);
    const Tensor& y = self.value;
    for (std::int64_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var Tape::tanh(Var a) {
  Tensor out = value(a);
  for (double& v : out.values()) v = std::tanh(v);
  return push("tanh", std::move(out), {a.id}, [](Tape& t, int id) {
    const Node& self = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(id)];
    Tensor& gx = t.grad_buf(self.inputs[0]);
    const Tensor& y = self.value;
    for (std::int64_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var Tape::exp(Var a) {
  Tensor out = value(a);
  for (double& v : out.values()) v = std::exp(v);
  return push("exp", std::move(out), {a.id}, [](Tape& t, int id) {
    const Node& self = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(id)];
    Tensor& gx = t.grad_buf(self.inputs[0]);
    const Tensor& y = self.value;
    for (std::int64_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * y[i];
  });
}

Var Tape::log(Var a) {
  Tensor out = value(a);
  for (double& v : out.values()) v = std::log(v);
  return push("log", std::move(out), {a.id}, [](Tape& t, int id) {
    const Node& self = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(id)];
    Tensor& gx = t.grad_buf(self.inputs[0]);
    const Tensor& x = t.nodes_[static_cast<std::size_t>(self.inputs[0])].value;
    for (std::int64_t i = 0; i < g.numel(); ++i) gx[i] += g[i] / x[i];
  });
}

Var Tape::relu(Var a) {
  Tensor out = value(a);
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return push("relu", std::move(out), {a.id}, [](Tape& t, int id) {
    const Node& self = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(id)];
    Tensor& gx = t.grad_buf(self.inputs[0]);
    const Tensor& x = t.nodes_[static_cast<std::size_t>(self.inputs[0])].value;
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      if (x[i] > 0.0) gx[i] += g[i];
    }
  });
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (x.rank() < 1 || x.rank() > 2 || y.rank() < 1 || y.rank() > 2) {
    throw ShapeError("matmul: operands must be rank 1 or 2");
  }
  // Effective 2-D views: rank-1 lhs is a row, rank-1 rhs is a column.
  const int m = x.rank() == 2 ? x.extent(0) : 1;
  const int k = x.rank() == 2 ? x.extent(1) : x.extent(0);
  const int k2 = y.rank() == 2 ? y.extent(0) : y.extent(0);
  const int n = y.rank() == 2 ? y.extent(1) : 1;
  if (k != k2) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  }
  Shape out_shape;
  if (x.rank() == 2 && y.rank() == 2) {
    out_shape = {m, n};
  } else if (x.rank() == 1 && y.rank() == 2) {
    out_shape = {n};
  } else if (x.rank() == 2 && y.rank() == 1) {
    out_shape = {m};
  } else {
    out_shape = {1};
  }
  Tensor out(std::move(out_shape));
  matmul_acc(x.data(), y.data(), out.data(), m, k, n);
  return push("matmul", std::move(out), {a.id, b.id}, [m, k, n](Tape& t, int id) {
    const Node& self = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(id)];
    const Tensor& xv = t.nodes_[static_cast<std::size_t>(self.inputs[0])].value;
    const Tensor& yv = t.nodes_[static_cast<std::size_t>(self.inputs[1])].value;
    // dA += dC * B^T, dB += A^T * dC (on the effective 2-D views).
    matmul_bt_acc(g.data(), yv.data(), t.grad_buf(self.inputs[0]).data(), m, n, k);
    matmul_at_acc(xv.data(), g.data(), t.grad_buf(self.inputs[1]).data(), m, k, n);
  });
}

Var Tape::concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: empty part list");
  int total = 0;
  std::vector<int> ids;
  ids.reserve(parts.size());
  for (Var p : parts) {
    const Tensor& v = value(p);
    if (v.rank() != 1) throw ShapeError("concat: parts must be rank 1");
    total += v.extent(0);
    ids.push_back(p.id);
  }
  Tensor out({total});
  int off = 0;
  for (Var p : parts) {
    const Tensor& v = value(p);
    std::copy(v.data(), v.data() + v.numel(), out.data() + off);
    off += static_cast<int>(v.numel());
  }
  return push("concat", std::move(out), std::move(ids), [](Tape& t, int id) {
    const Node& self = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(id)];
    std::int64_t off2 = 0;
    for (int in : self.inputs) {
      Tensor& gx = t.grad_buf(in);
      for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] += g[off2 + i];
      off2 += gx.numel();
    }
  });
}

Var Tape::slice(Var v, int offset, int length) {
  const Tensor& x = value(v);
  if (x.rank() != 1) throw ShapeError("slice: operand must be rank 1");
  if (offset < 0 || length <= 0 || offset + length > x.extent(0)) {
    throw ShapeError("slice: range [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                     ") out of bounds for " + shape_str(x.shape()));
  }
  Tensor out({length});
  std::copy(x.data() + offset, x.data() + offset + length, out.data());
  return push("slice", std::move(out), {v.id}, [offset](Tape& t, int id) {
    const Node& self = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(id)];
    Tensor& gx = t.grad_buf(self.inputs[0]);
    for (std::int64_t i = 0; i < g.numel(); ++i) gx[offset + i] += g[i];
  });
}

Var Tape::stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ShapeError("stack_rows: empty row list");
  const int n = value(rows[0]).rank() == 1 ? value(rows[0]).extent(0) : -1;
  if (n < 0) throw ShapeError("stack_rows: rows must be rank 1");
  std::vector<int> ids;
  ids.reserve(rows.size());
  Tensor out({static_cast<int>(rows.size()), n});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Tensor& v = value(rows[r]);
    if (v.rank() != 1 || v.extent(0) != n) {
      throw ShapeError("stack_rows: row " + std::to_string(r) + " has shape " + shape_str(v.shape()));
    }
    std::copy(v.data(), v.data() + n, out.data() + static_cast<std::int64_t>(r) * n);
    ids.push_back(rows[r].id);
  }
  return push("stack_rows", std::move(out), std::move(ids), [n](Tape& t, int id) {
    const Node& self = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(id)];
    for (std::size_t r = 0; r < self.inputs.size(); ++r) {
      Tensor& gx = t.grad_buf(self.inputs[r]);
      const double* gr = g.data() + static_cast<std::int64_t>(r) * n;
      for (int i = 0; i < n; ++i) gx[i] += gr[i];
    }
  });
}

Var Tape::row(Var m, int r) {
  const Tensor& x = value(m);
  if (x.rank() != 2) throw ShapeError("row: operand must be rank 2");
  if (r < 0 || r >= x.extent(0)) {
    throw ShapeError("row: index " + std::to_string(r) + " out of range for " + shape_str(x.shape()));
  }
  const int n = x.extent(1);
  Tensor out({n});
  std::copy(x.data() + static_cast<std::int64_t>(r) * n, x.data() + static_cast<std::int64_t>(r + 1) * n,
            out.data());
  return push("row", std::move(out), {m.id}, [r, n](Tape& t, int id) {
    const Node& self = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(id)];
    Tensor& gx = t.grad_buf(self.inputs[0]);
    double* row_grad = gx.data() + static_cast<std::int64_t>(r) * n;
    for (int i = 0; i < n; ++i) row_grad[i] += g[i];
  });
}

Var Tape::select(Var v, int i) {
  const Tensor& x = value(v);
  if (x.rank() != 1) throw ShapeError("select: operand must be rank 1");
  if (i < 0 || i >= x.extent(0)) {
    throw ShapeError("select: index " + std::to_string(i) + " out of range for " + shape_str(x.shape()));
  }
  Tensor out = Tensor::scalar(x[i]);
  return push("select", std::move(out), {v.id}, [i](Tape& t, int id) {
    const Node& self = t.nodes_[static_cast<std::size_t>(id)];
    t.grad_buf(self.inputs[0])[i] += t.grads_[static_cast<std::size_t>(id)][0];
  });
}

Var Tape::embed(Var table, int id) {
  const Tensor& x = value(table);
  if (x.rank() != 2) throw ShapeError("embed: table must be rank 2");
  if (id < 0 || id >= x.extent(0)) {
    throw DataError("embed: token id " + std::to_string(id) + " out of range for table " + shape_str(x.shape()));
  }
  return row(table, id);
}

Var Tape::sum(Var v) {
  const Tensor& x = value(v);
  double total = 0.0;
  for (double a : x.values()) total += a;
  return push("sum", Tensor::scalar(total), {v.id}, [](Tape& t, int id) {
    const Node& self = t.nodes_[static_cast<std::size_t>(id)];
    const double g = t.grads_[static_cast<std::size_t>(id)][0];
    Tensor& gx = t.grad_buf(self.inputs[0]);
    for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] += g;
  });
}

Var Tape::mean(Var v) {
  const Tensor& x = value(v);
  double total = 0.0;
  for (double a : x.values()) total += a;
  const double inv = 1.0 / static_cast<double>(x.numel());
  return push("mean", Tensor::scalar(total * inv), {v.id}, [inv](Tape& t, int id) {
    const Node& self = t.nodes_[static_cast<std::size_t>(id)];
    const double g = t.grads_[static_cast<std::size_t>(id)][0] * inv;
    Tensor& gx = t.grad_buf(self.inputs[0]);
    for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] += g;
  });
}

Var Tape::reduce_max(Var v) {
  const Tensor& x = value(v);
  if (x.rank() != 1) throw ShapeError("reduce_max: operand must be rank 1");
  int arg = 0;
  for (int i = 1; i < x.extent(0); ++i) {
    if (x[i] > x[arg]) arg = i;  // ties keep the lowest index
  }
  return push("reduce_max", Tensor::scalar(x[arg]), {v.id}, [arg](Tape& t, int id) {
    const Node& self = t.nodes_[static_cast<std::size_t>(id)];
    t.grad_buf(self.inputs[0])[arg] += t.grads_[static_cast<std::size_t>(id)][0];
  });
}

Var Tape::max_rows(Var m) {
  const Tensor& x = value(m);
  if (x.rank() != 2) throw ShapeError("max_rows: operand must be rank 2");
  const int k = x.extent(0);
  const int n = x.extent(1);
  Tensor out({n});
  std::vector<int> arg(static_cast<std::size_t>(n), 0);
  for (int j = 0; j < n; ++j) {
    double best = x.at(0, j);
    for (int r = 1; r < k; ++r) {
      if (x.at(r, j) > best) {
        best = x.at(r, j);
        arg[static_cast<std::size_t>(j)] = r;
      }
    }
    out[j] = best;
  }
  return push("max_rows", std::move(out), {m.id}, [arg = std::move(arg), n](Tape& t, int id) {
    const Node& self = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(id)];
    Tensor& gx = t.grad_buf(self.inputs[0]);
    for (int j = 0; j < n; ++j) {
      gx[static_cast<std::int64_t>(arg[static_cast<std::size_t>(j)]) * n + j] += g[j];
    }
  });
}

Var Tape::softmax(Var v) {
  const Tensor& x = value(v);
  if (x.rank() != 1) throw ShapeError("softmax: operand must be rank 1");
  double mx = x[0];
  for (double a : x.values()) mx = std::max(mx, a);
  Tensor out = x;
  double z = 0.0;
  for (double& o : out.values()) {
    o = std::exp(o - mx);
    z += o;
  }
  for (double& o : out.values()) o /= z;
  return push("softmax", std::move(out), {v.id}, [](Tape& t, int id) {
    const Node& self = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(id)];
    const Tensor& y = self.value;
    Tensor& gx = t.grad_buf(self.inputs[0]);
    double dot = 0.0;
    for (std::int64_t i = 0; i < g.numel(); ++i) dot += g[i] * y[i];
    for (std::int64_t i = 0; i < g.numel(); ++i) gx[i] += y[i] * (g[i] - dot);
  });
}

Var Tape::log_softmax(Var v) {
  const Tensor& x = value(v);
  if (x.rank() != 1) throw ShapeError("log_softmax: operand must be rank 1");
  double mx = x[0];
  for (double a : x.values()) mx = std::max(mx, a);
  double z = 0.0;
  for (double a : x.values()) z += std::exp(a - mx);
  const double lz = std::log(z) + mx;
  Tensor out = x;
  for (double& o : out.values()) o -= lz;
  return push("log_softmax", std::move(out), {v.id}, [](Tape& t, int id) {
    const Node& self = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(id)];
    const Tensor& y = self.value;
    Tensor& gx = t.grad_buf(self.inputs[0]);
    double total = 0.0;
    for (std::int64_t i = 0; i < g.numel(); ++i) total += g[i];
    for (std::int64_t i = 0; i < g.numel(); ++i) gx[i] += g[i] - std::exp(y[i]) * total;
  });
}

void Tape::backward(Var loss) {
  if (!record_) throw Error("backward: tape was created without recording");
  if (backward_done_) throw Error("backward: may run only once per tape");
  const Tensor& lv = value(loss);
  if (lv.numel() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_str(lv.shape()));
  }
  grads_.resize(static_cast<std::size_t>(loss.id) + 1);
  for (int i = 0; i <= loss.id; ++i) {
    grads_[static_cast<std::size_t>(i)] = Tensor(nodes_[static_cast<std::size_t>(i)].value.shape());
  }
  grads_[static_cast<std::size_t>(loss.id)][0] = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.back) n.back(*this, i);
  }
  backward_done_ = true;
}

Tensor Tape::grad(Var v) const {
  if (!backward_done_) throw Error("grad: backward has not run");
  const Node& n = node(v);
  if (v.id < static_cast<int>(grads_.size())) {
    return grads_[static_cast<std::size_t>(v.id)];
  }
  return Tensor(n.value.shape());
}

Tensor Tape::grad_of(const Tensor& storage) const {
  if (!backward_done_) throw Error("grad_of: backward has not run");
  auto it = params_.find(&storage);
  if (it == params_.end()) return Tensor(storage.shape());
  return grad(Var{it->second});
}

std::vector<Tensor> gradient_of(Tape& tape, Var loss, std::span<const Tensor* const> params) {
  if (!tape.backward_done()) tape.backward(loss);
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Tensor* p : params) out.push_back(tape.grad_of(*p));
  return out;
}

}  // namespace revnet
