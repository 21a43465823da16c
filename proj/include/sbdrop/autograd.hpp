#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "sbdrop/tensor.hpp"

namespace sbdrop::ag {

class Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of a reverse-mode graph: a value, a same-shaped gradient
// accumulator, and the local rule that pulls this node's gradient into its
// parents. Gradients accumulate additively; call zero_grad between uses.
class Node {
 public:
  Node(Tensor v, bool req);

  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool backward_ran = false;  // set on the root by backward()
  std::vector<NodePtr> parents;
  std::function<void(const Tensor& g)> backprop;  // empty on leaves
};

NodePtr constant(Tensor v);
NodePtr param(Tensor v);

// Differentiable ops. add/sub/mul accept equal shapes or one size-1 operand
// (broadcast over the other; its gradient is the summed contribution).
NodePtr matmul(const NodePtr& a, const NodePtr& b);
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);
NodePtr scale(const NodePtr& a, double c);
NodePtr square(const NodePtr& a);
NodePtr relu(const NodePtr& a);
NodePtr reshape(const NodePtr& a, std::vector<std::size_t> shape);

// Max along `axis` of a rank-2 input; ties route the gradient to the lowest
// index.
NodePtr max_over_axis(const NodePtr& a, std::size_t axis);

NodePtr sum(const NodePtr& a);
NodePtr mean(const NodePtr& a);

// Row gather from a rank-2 table; gradient scatter-adds into the table.
NodePtr lookup_rows(const NodePtr& table, const std::vector<int>& rows);

NodePtr mse(const NodePtr& pred, const NodePtr& target);

// Mean over rows of -log softmax(logits)[label]. logits: [N x C] (or rank-1,
// treated as one row); labels: N class indices.
NodePtr softmax_cross_entropy(const NodePtr& logits,
                              const std::vector<int>& labels);

// Reverse pass from a scalar root. Accumulates d(root)/d(node) into every
// reachable node's grad. Calling twice on the same root without zero_grad
// throws.
void backward(const NodePtr& root);

// Zeroes grads of `node` and everything reachable through parents, and
// clears backward markers.
void zero_grad(const NodePtr& node);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
};

// Central-difference check of backward() gradients. f must build a scalar
// graph from a fresh leaf; it is evaluated twice at theta and must be
// bit-identical (any internal sampling has to reuse a frozen Rng).
// Relative errors use a max(1, |analytic|) denominator.
GradCheckReport finite_diff_check(
    const std::function<NodePtr(const NodePtr& theta)>& f, const Tensor& theta,
    double epsilon);

// Same check for a plain scalar function against an externally supplied
// analytic gradient.
GradCheckReport finite_diff_check_values(
    const std::function<double(const Tensor& theta)>& f, const Tensor& theta,
    double epsilon, const Tensor& analytic_grad);

}  // namespace sbdrop::ag
