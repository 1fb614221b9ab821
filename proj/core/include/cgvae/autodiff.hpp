#pragma once

#include <array>
#include <functional>
#include <vector>

#include "cgvae/tensor.hpp"

namespace cgvae::ad {

/// Handle to a node on a Tape.
struct Value {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Define-by-run reverse-mode tape over dense tensors.
///
/// Operations evaluate eagerly and record a backward closure. The tape is
/// rebuilt per minibatch; a Tape instance is single-threaded.
class Tape {
 public:
  Value leaf(Tensor v, bool requires_grad = true);
  Value constant(Tensor v) { return leaf(std::move(v), false); }

  // element-wise
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  Value scale(Value a, double c);
  Value add_scalar(Value a, double c);
  Value relu(Value a);
  Value exp(Value a);
  Value log(Value a);
  Value sigmoid(Value a);

  // linear algebra / layout
  Value matmul(Value a, Value b);
  Value add_rowvec(Value a, Value b);  // (n,m) + (m) broadcast over rows
  Value reshape(Value a, std::vector<std::size_t> shape);
  Value slice_cols(Value a, std::size_t start, std::size_t count);
  Value tile_rows(Value a, std::size_t times);  // vertical stacking

  // reductions
  Value sum(Value a);
  Value mean(Value a);
  Value row_sum(Value a);         // (n,m) -> (n,1)
  Value logsumexp_rows(Value a);  // (n,m) -> (n,1), shifted form
  Value softmax_rows(Value a, double temperature = 1.0);

  /// Sum over all entries of the Bernoulli negative log-likelihood
  /// -[x log p + (1-x) log(1-p)] with p = sigmoid(logits); numerically
  /// stable in the logits.
  Value bernoulli_nll(Value logits, const Tensor& targets);

  const Tensor& value(Value v) const;
  const Tensor& grad(Value v) const;

  /// Accumulates d(seed . out)/d(leaf) into every reachable leaf.
  void backward(Value out);
  void backward(Value out, const Tensor& seed);

  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_ready = false;
    std::array<int, 2> parents{-1, -1};
    std::function<void(Tape&, int)> back;
  };

  int push(Tensor v, std::array<int, 2> parents,
           std::function<void(Tape&, int)> back);
  Node& node(Value v);
  const Node& node(Value v) const;
  Tensor& grad_buf(int id);

  std::vector<Node> nodes_;
  bool ran_backward_ = false;

  friend struct TapeAccess;
};

/// Max over coordinates of |analytic - central difference| relative error
/// for a scalar-valued function of one tensor input.
double grad_check(const std::function<Value(Tape&, Value)>& f, const Tensor& x,
                  double step);

}  // namespace cgvae::ad
