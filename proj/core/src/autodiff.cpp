#include "cgvae/autodiff.hpp"

#include <cmath>
#include <stdexcept>

#include "cgvae/numeric.hpp"

namespace cgvae::ad {

namespace {

void check_finite(const Tensor& t, const char* op) {
  if (!t.all_finite())
    throw std::runtime_error(std::string("non-finite value in ") + op);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a.shape_str() + " vs " + b.shape_str());
}

}  // namespace

Tape::Node& Tape::node(Value v) {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
    throw std::logic_error("Tape: invalid value handle");
  return nodes_[v.id];
}

const Tape::Node& Tape::node(Value v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
    throw std::logic_error("Tape: invalid value handle");
  return nodes_[v.id];
}

Tensor& Tape::grad_buf(int id) {
  Node& n = nodes_[id];
  if (!n.grad_ready) {
    n.grad = Tensor(n.value.shape(), 0.0);
    n.grad_ready = true;
  }
  return n.grad;
}

int Tape::push(Tensor v, std::array<int, 2> parents,
               std::function<void(Tape&, int)> back) {
  Node n;
  n.value = std::move(v);
  n.parents = parents;
  n.back = std::move(back);
  n.requires_grad = false;
  for (int p : parents)
    if (p >= 0 && nodes_[p].requires_grad) n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Value Tape::leaf(Tensor v, bool requires_grad) {
  check_finite(v, "leaf");
  Node n;
  n.value = std::move(v);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Value{static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Tape::value(Value v) const { return node(v).value; }

const Tensor& Tape::grad(Value v) const {
  const Node& n = node(v);
  if (!n.grad_ready)
    throw std::logic_error("Tape: gradient not computed for this node");
  return n.grad;
}

Value Tape::add(Value a, Value b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  check_same_shape(av, bv, "add");
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  check_finite(out, "add");
  int id = push(std::move(out), {a.id, b.id}, [](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    for (int k = 0; k < 2; ++k) {
      int p = t.nodes_[self].parents[k];
      if (!t.nodes_[p].requires_grad) continue;
      Tensor& pg = t.grad_buf(p);
      for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
    }
  });
  return Value{id};
}

Value Tape::sub(Value a, Value b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  check_same_shape(av, bv, "sub");
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  check_finite(out, "sub");
  int id = push(std::move(out), {a.id, b.id}, [](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    int pa = t.nodes_[self].parents[0];
    int pb = t.nodes_[self].parents[1];
    if (t.nodes_[pa].requires_grad) {
      Tensor& pg = t.grad_buf(pa);
      for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
    }
    if (t.nodes_[pb].requires_grad) {
      Tensor& pg = t.grad_buf(pb);
      for (std::size_t i = 0; i < g.size(); ++i) pg[i] -= g[i];
    }
  });
  return Value{id};
}

Value Tape::mul(Value a, Value b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  check_same_shape(av, bv, "mul");
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  check_finite(out, "mul");
  int id = push(std::move(out), {a.id, b.id}, [](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    int pa = t.nodes_[self].parents[0];
    int pb = t.nodes_[self].parents[1];
    const Tensor& av = t.nodes_[pa].value;
    const Tensor& bv = t.nodes_[pb].value;
    if (t.nodes_[pa].requires_grad) {
      Tensor& pg = t.grad_buf(pa);
      for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i] * bv[i];
    }
    if (t.nodes_[pb].requires_grad) {
      Tensor& pg = t.grad_buf(pb);
      for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i] * av[i];
    }
  });
  return Value{id};
}

Value Tape::scale(Value a, double c) {
  const Tensor& av = value(a);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
  check_finite(out, "scale");
  int id = push(std::move(out), {a.id, -1}, [c](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    int p = t.nodes_[self].parents[0];
    if (!t.nodes_[p].requires_grad) return;
    Tensor& pg = t.grad_buf(p);
    for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i] * c;
  });
  return Value{id};
}

Value Tape::add_scalar(Value a, double c) {
  const Tensor& av = value(a);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + c;
  check_finite(out, "add_scalar");
  int id = push(std::move(out), {a.id, -1}, [](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    int p = t.nodes_[self].parents[0];
    if (!t.nodes_[p].requires_grad) return;
    Tensor& pg = t.grad_buf(p);
    for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
  });
  return Value{id};
}

Value Tape::relu(Value a) {
  const Tensor& av = value(a);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = av[i] > 0.0 ? av[i] : 0.0;
  // subgradient at 0 is 0
  int id = push(std::move(out), {a.id, -1}, [](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    int p = t.nodes_[self].parents[0];
    if (!t.nodes_[p].requires_grad) return;
    const Tensor& av = t.nodes_[p].value;
    Tensor& pg = t.grad_buf(p);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (av[i] > 0.0) pg[i] += g[i];
  });
  return Value{id};
}

Value Tape::exp(Value a) {
  const Tensor& av = value(a);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(av[i]);
  check_finite(out, "exp");
  int id = push(std::move(out), {a.id, -1}, [](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& ov = t.nodes_[self].value;
    int p = t.nodes_[self].parents[0];
    if (!t.nodes_[p].requires_grad) return;
    Tensor& pg = t.grad_buf(p);
    for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i] * ov[i];
  });
  return Value{id};
}

Value Tape::log(Value a) {
  const Tensor& av = value(a);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(av[i]);
  check_finite(out, "log");
  int id = push(std::move(out), {a.id, -1}, [](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    int p = t.nodes_[self].parents[0];
    if (!t.nodes_[p].requires_grad) return;
    const Tensor& av = t.nodes_[p].value;
    Tensor& pg = t.grad_buf(p);
    for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i] / av[i];
  });
  return Value{id};
}

Value Tape::sigmoid(Value a) {
  const Tensor& av = value(a);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = cgvae::sigmoid(av[i]);
  check_finite(out, "sigmoid");
  int id = push(std::move(out), {a.id, -1}, [](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& ov = t.nodes_[self].value;
    int p = t.nodes_[self].parents[0];
    if (!t.nodes_[p].requires_grad) return;
    Tensor& pg = t.grad_buf(p);
    for (std::size_t i = 0; i < g.size(); ++i)
      pg[i] += g[i] * ov[i] * (1.0 - ov[i]);
  });
  return Value{id};
}

Value Tape::matmul(Value a, Value b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.shape().size() != 2 || bv.shape().size() != 2 ||
      av.cols() != bv.rows())
    throw std::invalid_argument("matmul: incompatible shapes " +
                                av.shape_str() + " x " + bv.shape_str());
  std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
  Tensor out({n, m}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < k; ++l) {
      double x = av(i, l);
      for (std::size_t j = 0; j < m; ++j) out(i, j) += x * bv(l, j);
    }
  check_finite(out, "matmul");
  int id = push(std::move(out), {a.id, b.id}, [](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    int pa = t.nodes_[self].parents[0];
    int pb = t.nodes_[self].parents[1];
    const Tensor& av = t.nodes_[pa].value;
    const Tensor& bv = t.nodes_[pb].value;
    std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
    if (t.nodes_[pa].requires_grad) {
      Tensor& ga = t.grad_buf(pa);  // g . B^T
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          double gij = g(i, j);
          for (std::size_t l = 0; l < k; ++l) ga(i, l) += gij * bv(l, j);
        }
    }
    if (t.nodes_[pb].requires_grad) {
      Tensor& gb = t.grad_buf(pb);  // A^T . g
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = 0; l < k; ++l) {
          double ail = av(i, l);
          for (std::size_t j = 0; j < m; ++j) gb(l, j) += ail * g(i, j);
        }
    }
  });
  return Value{id};
}

Value Tape::add_rowvec(Value a, Value b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.shape().size() != 2 || bv.size() != av.cols())
    throw std::invalid_argument("add_rowvec: shape mismatch");
  std::size_t n = av.rows(), m = av.cols();
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out(i, j) = av(i, j) + bv[j];
  check_finite(out, "add_rowvec");
  int id = push(std::move(out), {a.id, b.id}, [](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    int pa = t.nodes_[self].parents[0];
    int pb = t.nodes_[self].parents[1];
    std::size_t n = g.rows(), m = g.cols();
    if (t.nodes_[pa].requires_grad) {
      Tensor& ga = t.grad_buf(pa);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.nodes_[pb].requires_grad) {
      Tensor& gb = t.grad_buf(pb);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) gb[j] += g(i, j);
    }
  });
  return Value{id};
}

Value Tape::reshape(Value a, std::vector<std::size_t> shape) {
  const Tensor& av = value(a);
  if (Tensor::numel(shape) != av.size())
    throw std::invalid_argument("reshape: element count mismatch");
  Tensor out(std::move(shape), av.values());
  int id = push(std::move(out), {a.id, -1}, [](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    int p = t.nodes_[self].parents[0];
    if (!t.nodes_[p].requires_grad) return;
    Tensor& pg = t.grad_buf(p);
    for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
  });
  return Value{id};
}

Value Tape::slice_cols(Value a, std::size_t start, std::size_t count) {
  const Tensor& av = value(a);
  if (av.shape().size() != 2 || start + count > av.cols())
    throw std::invalid_argument("slice_cols: out of range");
  std::size_t n = av.rows();
  Tensor out({n, count});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = av(i, start + j);
  int id = push(std::move(out), {a.id, -1}, [start, count](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    int p = t.nodes_[self].parents[0];
    if (!t.nodes_[p].requires_grad) return;
    Tensor& pg = t.grad_buf(p);
    std::size_t n = g.rows();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < count; ++j) pg(i, start + j) += g(i, j);
  });
  return Value{id};
}

Value Tape::tile_rows(Value a, std::size_t times) {
  const Tensor& av = value(a);
  if (av.shape().size() != 2 || times == 0)
    throw std::invalid_argument("tile_rows: bad arguments");
  std::size_t n = av.rows(), m = av.cols();
  Tensor out({n * times, m});
  for (std::size_t r = 0; r < times; ++r)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) out(r * n + i, j) = av(i, j);
  int id = push(std::move(out), {a.id, -1}, [times](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    int p = t.nodes_[self].parents[0];
    if (!t.nodes_[p].requires_grad) return;
    Tensor& pg = t.grad_buf(p);
    std::size_t n = pg.rows(), m = pg.cols();
    for (std::size_t r = 0; r < times; ++r)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) pg(i, j) += g(r * n + i, j);
  });
  return Value{id};
}

Value Tape::sum(Value a) {
  const Tensor& av = value(a);
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i];
  Tensor out = Tensor::scalar(s);
  check_finite(out, "sum");
  int id = push(std::move(out), {a.id, -1}, [](Tape& t, int self) {
    double g = t.nodes_[self].grad[0];
    int p = t.nodes_[self].parents[0];
    if (!t.nodes_[p].requires_grad) return;
    Tensor& pg = t.grad_buf(p);
    for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += g;
  });
  return Value{id};
}

Value Tape::mean(Value a) {
  const Tensor& av = value(a);
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i];
  double inv = 1.0 / static_cast<double>(av.size());
  Tensor out = Tensor::scalar(s * inv);
  check_finite(out, "mean");
  int id = push(std::move(out), {a.id, -1}, [inv](Tape& t, int self) {
    double g = t.nodes_[self].grad[0] * inv;
    int p = t.nodes_[self].parents[0];
    if (!t.nodes_[p].requires_grad) return;
    Tensor& pg = t.grad_buf(p);
    for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += g;
  });
  return Value{id};
}

Value Tape::row_sum(Value a) {
  const Tensor& av = value(a);
  std::size_t n = av.rows(), m = av.cols();
  Tensor out({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += av(i, j);
    out(i, 0) = s;
  }
  check_finite(out, "row_sum");
  int id = push(std::move(out), {a.id, -1}, [](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    int p = t.nodes_[self].parents[0];
    if (!t.nodes_[p].requires_grad) return;
    Tensor& pg = t.grad_buf(p);
    std::size_t n = pg.rows(), m = pg.cols();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) pg(i, j) += g(i, 0);
  });
  return Value{id};
}

Value Tape::logsumexp_rows(Value a) {
  const Tensor& av = value(a);
  std::size_t n = av.rows(), m = av.cols();
  Tensor out({n, 1});
  for (std::size_t i = 0; i < n; ++i)
    out(i, 0) = log_sum_exp({av.data() + i * m, m});
  check_finite(out, "logsumexp_rows");
  int id = push(std::move(out), {a.id, -1}, [](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& ov = t.nodes_[self].value;
    int p = t.nodes_[self].parents[0];
    if (!t.nodes_[p].requires_grad) return;
    const Tensor& av = t.nodes_[p].value;
    Tensor& pg = t.grad_buf(p);
    std::size_t n = pg.rows(), m = pg.cols();
    for (std::size_t i = 0; i < n; ++i) {
      double gi = g(i, 0);
      for (std::size_t j = 0; j < m; ++j)
        pg(i, j) += gi * std::exp(av(i, j) - ov(i, 0));
    }
  });
  return Value{id};
}

Value Tape::softmax_rows(Value a, double temperature) {
  if (temperature <= 0.0)
    throw std::invalid_argument("softmax_rows: temperature must be positive");
  const Tensor& av = value(a);
  std::size_t n = av.rows(), m = av.cols();
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i)
    cgvae::softmax({av.data() + i * m, m}, {out.data() + i * m, m},
                   temperature);
  check_finite(out, "softmax_rows");
  int id = push(std::move(out), {a.id, -1}, [temperature](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& ov = t.nodes_[self].value;
    int p = t.nodes_[self].parents[0];
    if (!t.nodes_[p].requires_grad) return;
    Tensor& pg = t.grad_buf(p);
    std::size_t n = pg.rows(), m = pg.cols();
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < m; ++j) dot += g(i, j) * ov(i, j);
      for (std::size_t j = 0; j < m; ++j)
        pg(i, j) += ov(i, j) * (g(i, j) - dot) / temperature;
    }
  });
  return Value{id};
}

Value Tape::bernoulli_nll(Value logits, const Tensor& targets) {
  const Tensor& lv = value(logits);
  check_same_shape(lv, targets, "bernoulli_nll");
  double s = 0.0;
  for (std::size_t i = 0; i < lv.size(); ++i) {
    double l = lv[i], x = targets[i];
    // max(l,0) - l*x + log(1 + exp(-|l|))
    s += std::max(l, 0.0) - l * x + std::log1p(std::exp(-std::abs(l)));
  }
  Tensor out = Tensor::scalar(s);
  check_finite(out, "bernoulli_nll");
  int id = push(std::move(out), {logits.id, -1}, [targets](Tape& t, int self) {
    double g = t.nodes_[self].grad[0];
    int p = t.nodes_[self].parents[0];
    if (!t.nodes_[p].requires_grad) return;
    const Tensor& lv = t.nodes_[p].value;
    Tensor& pg = t.grad_buf(p);
    for (std::size_t i = 0; i < pg.size(); ++i)
      pg[i] += g * (cgvae::sigmoid(lv[i]) - targets[i]);
  });
  return Value{id};
}

void Tape::backward(Value out) {
  backward(out, Tensor(value(out).shape(), 1.0));
}

void Tape::backward(Value out, const Tensor& seed) {
  Node& o = node(out);
  if (!o.value.same_shape(seed))
    throw std::invalid_argument("backward: seed shape mismatch");
  if (!o.requires_grad)
    throw std::logic_error("backward: output does not depend on any leaf");
  grad_buf(out.id);
  Node& on = nodes_[out.id];
  for (std::size_t i = 0; i < seed.size(); ++i) on.grad[i] += seed[i];
  // nodes_ is already in topological order (eager construction)
  for (int i = out.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.grad_ready || !n.back) continue;
    n.back(*this, i);
  }
  ran_backward_ = true;
}

double grad_check(const std::function<Value(Tape&, Value)>& f, const Tensor& x,
                  double step) {
  Tape tape;
  Value in = tape.leaf(x, true);
  Value out = f(tape, in);
  if (tape.value(out).size() != 1)
    throw std::invalid_argument("grad_check: f must be scalar-valued");
  tape.backward(out);
  Tensor analytic = tape.grad(in);

  auto eval = [&](const Tensor& p) {
    Tape t2;
    Value v = t2.leaf(p, false);
    return t2.value(f(t2, v))[0];
  };

  double max_err = 0.0;
  Tensor xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double orig = xp[i];
    xp[i] = orig + step;
    double fp = eval(xp);
    xp[i] = orig - step;
    double fm = eval(xp);
    xp[i] = orig;
    double central = (fp - fm) / (2.0 * step);
    double err = std::abs(analytic[i] - central) /
                 (std::abs(analytic[i]) + std::abs(central) + 1e-12);
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace cgvae::ad
