#include "sbdrop/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>

namespace sbdrop::ag {

namespace {

NodePtr make_node(Tensor value, std::vector<NodePtr> parents,
                  std::function<void(const Tensor&)> backprop) {
  bool req = false;
  for (const auto& p : parents) req = req || p->requires_grad;
  auto n = std::make_shared<Node>(std::move(value), req);
  n->parents = std::move(parents);
  n->backprop = std::move(backprop);
  return n;
}

void accumulate(Node& n, const Tensor& g) {
  for (std::size_t i = 0; i < n.grad.size(); ++i) n.grad[i] += g[i];
}

void accumulate_scalar(Node& n, double g) { n.grad[0] += g; }

// Broadcast classification for the binary elementwise ops.
enum class Bcast { equal, a_scalar, b_scalar };

Bcast classify(const char* op, const Node& a, const Node& b) {
  if (a.value.same_shape(b.value)) return Bcast::equal;
  if (b.value.size() == 1) return Bcast::b_scalar;
  if (a.value.size() == 1) return Bcast::a_scalar;
  throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                              a.value.shape_string() + " vs " +
                              b.value.shape_string());
}

std::vector<Node*> topo_order(const NodePtr& root) {
  // Iterative post-order DFS over parents.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next].get();
      ++next;
      if (visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // parents before children; reverse for backprop
}

}  // namespace

Node::Node(Tensor v, bool req)
    : value(std::move(v)), grad(Tensor::zeros(value.shape())),
      requires_grad(req) {}

NodePtr constant(Tensor v) { return std::make_shared<Node>(std::move(v), false); }

NodePtr param(Tensor v) { return std::make_shared<Node>(std::move(v), true); }

NodePtr matmul(const NodePtr& a, const NodePtr& b) {
  Tensor value = sbdrop::matmul(a->value, b->value);
  return make_node(std::move(value), {a, b}, [a, b](const Tensor& g) {
    accumulate(*a, sbdrop::matmul(g, transpose(b->value)));
    accumulate(*b, sbdrop::matmul(transpose(a->value), g));
  });
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
  const Bcast bc = classify("add", *a, *b);
  Tensor value = [&] {
    switch (bc) {
      case Bcast::equal: return sbdrop::add(a->value, b->value);
      case Bcast::b_scalar: return sbdrop::add(a->value, b->value[0]);
      default: return sbdrop::add(b->value, a->value[0]);
    }
  }();
  return make_node(std::move(value), {a, b}, [a, b, bc](const Tensor& g) {
    switch (bc) {
      case Bcast::equal:
        accumulate(*a, g);
        accumulate(*b, g);
        break;
      case Bcast::b_scalar:
        accumulate(*a, g);
        accumulate_scalar(*b, sbdrop::sum(g));
        break;
      case Bcast::a_scalar:
        accumulate_scalar(*a, sbdrop::sum(g));
        accumulate(*b, g);
        break;
    }
  });
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
  const Bcast bc = classify("sub", *a, *b);
  Tensor value = [&] {
    switch (bc) {
      case Bcast::equal: return sbdrop::sub(a->value, b->value);
      case Bcast::b_scalar: return sbdrop::sub(a->value, b->value[0]);
      default: {
        Tensor t = sbdrop::mul(b->value, -1.0);
        return sbdrop::add(t, a->value[0]);
      }
    }
  }();
  return make_node(std::move(value), {a, b}, [a, b, bc](const Tensor& g) {
    switch (bc) {
      case Bcast::equal:
        accumulate(*a, g);
        accumulate(*b, sbdrop::mul(g, -1.0));
        break;
      case Bcast::b_scalar:
        accumulate(*a, g);
        accumulate_scalar(*b, -sbdrop::sum(g));
        break;
      case Bcast::a_scalar:
        accumulate_scalar(*a, sbdrop::sum(g));
        accumulate(*b, sbdrop::mul(g, -1.0));
        break;
    }
  });
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
  const Bcast bc = classify("mul", *a, *b);
  Tensor value = [&] {
    switch (bc) {
      case Bcast::equal: return sbdrop::mul(a->value, b->value);
      case Bcast::b_scalar: return sbdrop::mul(a->value, b->value[0]);
      default: return sbdrop::mul(b->value, a->value[0]);
    }
  }();
  return make_node(std::move(value), {a, b}, [a, b, bc](const Tensor& g) {
    switch (bc) {
      case Bcast::equal:
        accumulate(*a, sbdrop::mul(g, b->value));
        accumulate(*b, sbdrop::mul(g, a->value));
        break;
      case Bcast::b_scalar:
        accumulate(*a, sbdrop::mul(g, b->value[0]));
        accumulate_scalar(*b, sbdrop::sum(sbdrop::mul(g, a->value)));
        break;
      case Bcast::a_scalar:
        accumulate_scalar(*a, sbdrop::sum(sbdrop::mul(g, b->value)));
        accumulate(*b, sbdrop::mul(g, a->value[0]));
        break;
    }
  });
}

NodePtr scale(const NodePtr& a, double c) {
  return make_node(sbdrop::mul(a->value, c), {a}, [a, c](const Tensor& g) {
    accumulate(*a, sbdrop::mul(g, c));
  });
}

NodePtr square(const NodePtr& a) {
  return make_node(sbdrop::square(a->value), {a}, [a](const Tensor& g) {
    Tensor d = sbdrop::mul(a->value, 2.0);
    accumulate(*a, sbdrop::mul(g, d));
  });
}

NodePtr relu(const NodePtr& a) {
  Tensor value = a->value;
  Tensor keep = Tensor::zeros(value.shape());
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (value[i] > 0.0) {
      keep[i] = 1.0;
    } else {
      value[i] = 0.0;
    }
  }
  return make_node(std::move(value), {a},
                   [a, keep = std::move(keep)](const Tensor& g) {
                     accumulate(*a, sbdrop::mul(g, keep));
                   });
}

NodePtr reshape(const NodePtr& a, std::vector<std::size_t> shape) {
  Tensor value = Tensor::from_flat(std::move(shape), a->value.data());
  return make_node(std::move(value), {a}, [a](const Tensor& g) {
    accumulate(*a, g);  // flat layouts agree
  });
}

NodePtr max_over_axis(const NodePtr& a, std::size_t axis) {
  const Tensor& x = a->value;
  if (x.rank() != 2 || axis > 1) {
    throw std::invalid_argument("max_over_axis: expects rank-2 input and axis 0 or 1, got " +
                                x.shape_string() + ", axis " + std::to_string(axis));
  }
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  const std::size_t out_n = axis == 0 ? cols : rows;
  const std::size_t along = axis == 0 ? rows : cols;
  Tensor value = Tensor::zeros({out_n});
  std::vector<std::size_t> argmax(out_n, 0);
  for (std::size_t o = 0; o < out_n; ++o) {
    double best = axis == 0 ? x.at(0, o) : x.at(o, 0);
    std::size_t best_i = 0;
    for (std::size_t i = 1; i < along; ++i) {
      const double v = axis == 0 ? x.at(i, o) : x.at(o, i);
      if (v > best) {  // strict: ties keep the lowest index
        best = v;
        best_i = i;
      }
    }
    value[o] = best;
    argmax[o] = best_i;
  }
  return make_node(std::move(value), {a},
                   [a, axis, argmax = std::move(argmax)](const Tensor& g) {
                     Tensor d = Tensor::zeros(a->value.shape());
                     for (std::size_t o = 0; o < g.size(); ++o) {
                       if (axis == 0) {
                         d.at(argmax[o], o) = g[o];
                       } else {
                         d.at(o, argmax[o]) = g[o];
                       }
                     }
                     accumulate(*a, d);
                   });
}

NodePtr sum(const NodePtr& a) {
  Tensor value = Tensor::scalar(sbdrop::sum(a->value));
  return make_node(std::move(value), {a}, [a](const Tensor& g) {
    accumulate(*a, Tensor::full(a->value.shape(), g[0]));
  });
}

NodePtr mean(const NodePtr& a) {
  const double n = static_cast<double>(a->value.size());
  Tensor value = Tensor::scalar(sbdrop::sum(a->value) / n);
  return make_node(std::move(value), {a}, [a, n](const Tensor& g) {
    accumulate(*a, Tensor::full(a->value.shape(), g[0] / n));
  });
}

NodePtr lookup_rows(const NodePtr& table, const std::vector<int>& rows) {
  const Tensor& t = table->value;
  if (t.rank() != 2) {
    throw std::invalid_argument("lookup_rows: table must be rank-2, got " +
                                t.shape_string());
  }
  const std::size_t d = t.dim(1);
  for (int r : rows) {
    if (r < 0 || static_cast<std::size_t>(r) >= t.dim(0)) {
      throw std::invalid_argument("lookup_rows: row index " + std::to_string(r) +
                                  " out of range for table " + t.shape_string());
    }
  }
  Tensor value = Tensor::zeros({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      value.at(i, j) = t.at(static_cast<std::size_t>(rows[i]), j);
    }
  }
  return make_node(std::move(value), {table}, [table, rows, d](const Tensor& g) {
    Tensor d_table = Tensor::zeros(table->value.shape());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        d_table.at(static_cast<std::size_t>(rows[i]), j) += g.at(i, j);
      }
    }
    accumulate(*table, d_table);
  });
}

NodePtr mse(const NodePtr& pred, const NodePtr& target) {
  if (!pred->value.same_shape(target->value)) {
    throw std::invalid_argument("mse: shape mismatch " +
                                pred->value.shape_string() + " vs " +
                                target->value.shape_string());
  }
  const double n = static_cast<double>(pred->value.size());
  Tensor diff = sbdrop::sub(pred->value, target->value);
  double acc = 0.0;
  for (double v : diff.data()) acc += v * v;
  Tensor value = Tensor::scalar(acc / n);
  return make_node(std::move(value), {pred, target},
                   [pred, target, diff = std::move(diff), n](const Tensor& g) {
                     Tensor d = sbdrop::mul(diff, 2.0 * g[0] / n);
                     accumulate(*pred, d);
                     accumulate(*target, sbdrop::mul(d, -1.0));
                   });
}

NodePtr softmax_cross_entropy(const NodePtr& logits,
                              const std::vector<int>& labels) {
  Tensor z = logits->value;
  if (z.rank() == 1) z = Tensor::from_flat({1, z.size()}, z.data());
  if (z.rank() != 2) {
    throw std::invalid_argument("softmax_cross_entropy: logits must be rank 1 or 2, got " +
                                logits->value.shape_string());
  }
  const std::size_t n = z.dim(0), c = z.dim(1);
  if (labels.size() != n) {
    throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(n) +
                                " logit rows vs " + std::to_string(labels.size()) +
                                " labels");
  }
  Tensor probs = Tensor::zeros({n, c});
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      throw std::invalid_argument("softmax_cross_entropy: label " +
                                  std::to_string(labels[i]) +
                                  " out of range for " + std::to_string(c) +
                                  " classes");
    }
    double zmax = z.at(i, 0);
    for (std::size_t j = 1; j < c; ++j) zmax = std::max(zmax, z.at(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) denom += std::exp(z.at(i, j) - zmax);
    const double log_denom = std::log(denom) + zmax;
    for (std::size_t j = 0; j < c; ++j) {
      probs.at(i, j) = std::exp(z.at(i, j) - log_denom);
    }
    loss -= z.at(i, static_cast<std::size_t>(labels[i])) - log_denom;
  }
  loss /= static_cast<double>(n);
  return make_node(
      Tensor::scalar(loss), {logits},
      [logits, labels, probs = std::move(probs), n](const Tensor& g) {
        Tensor d = Tensor::zeros(logits->value.shape());
        const double s = g[0] / static_cast<double>(n);
        const std::size_t c = probs.dim(1);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            double v = probs.at(i, j);
            if (j == static_cast<std::size_t>(labels[i])) v -= 1.0;
            d[i * c + j] = v * s;
          }
        }
        accumulate(*logits, d);
      });
}

void backward(const NodePtr& root) {
  if (root->value.size() != 1) {
    throw std::invalid_argument("backward: root must be scalar, got " +
                                root->value.shape_string());
  }
  if (root->backward_ran) {
    throw std::runtime_error(
        "backward: already ran on this root; call zero_grad first");
  }
  std::vector<Node*> order = topo_order(root);
  root->grad = Tensor::ones(root->value.shape());
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) n->backprop(n->grad);
  }
  root->backward_ran = true;
}

void zero_grad(const NodePtr& node) {
  for (Node* n : topo_order(node)) {
    n->grad = Tensor::zeros(n->value.shape());
    n->backward_ran = false;
  }
}

GradCheckReport finite_diff_check(
    const std::function<NodePtr(const NodePtr& theta)>& f, const Tensor& theta,
    double epsilon) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("finite_diff_check: epsilon must be positive");
  }
  NodePtr leaf = param(theta);
  NodePtr root = f(leaf);
  if (root->value.size() != 1) {
    throw std::invalid_argument("finite_diff_check: f must produce a scalar, got " +
                                root->value.shape_string());
  }
  const double base = root->value[0];
  backward(root);
  const Tensor analytic = leaf->grad;

  NodePtr probe = f(param(theta));
  if (probe->value[0] != base) {
    throw std::runtime_error(
        "finite_diff_check: f is not deterministic; freeze its rng state");
  }

  auto eval = [&](const Tensor& t) { return f(param(t))->value[0]; };
  GradCheckReport report;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    Tensor tp = theta, tm = theta;
    tp[i] += epsilon;
    tm[i] -= epsilon;
    const double fd = (eval(tp) - eval(tm)) / (2.0 * epsilon);
    const double rel = std::abs(fd - analytic[i]) /
                       std::max(1.0, std::abs(analytic[i]));
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = i;
    }
  }
  return report;
}

GradCheckReport finite_diff_check_values(
    const std::function<double(const Tensor& theta)>& f, const Tensor& theta,
    double epsilon, const Tensor& analytic_grad) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("finite_diff_check: epsilon must be positive");
  }
  if (!theta.same_shape(analytic_grad)) {
    throw std::invalid_argument("finite_diff_check: gradient shape " +
                                analytic_grad.shape_string() +
                                " does not match theta " + theta.shape_string());
  }
  if (f(theta) != f(theta)) {
    throw std::runtime_error(
        "finite_diff_check: f is not deterministic; freeze its rng state");
  }
  GradCheckReport report;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    Tensor tp = theta, tm = theta;
    tp[i] += epsilon;
    tm[i] -= epsilon;
    const double fd = (f(tp) - f(tm)) / (2.0 * epsilon);
    const double rel = std::abs(fd - analytic_grad[i]) /
                       std::max(1.0, std::abs(analytic_grad[i]));
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = i;
    }
  }
  return report;
}

}  // namespace sbdrop::ag
