#include "glassbox/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "glassbox/error.hpp"

namespace glassbox {
namespace {

using detail::Node;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

void require_matrix(const Tensor& x, const char* op) {
  if (x.ndim() != 2) {
    throw DimensionError(std::string(op) + ": expected a 2-D tensor, got " +
                         shape_string(x.shape()));
  }
}

// Accumulates into parent `i` if it takes part in differentiation.
template <typename F>
void accumulate(Node& self, std::size_t i, F&& contribution) {
  Node& parent = *self.parents[i];
  if (!parent.requires_grad) return;
  auto& g = parent.ensure_grad();
  contribution(g);
}

template <typename Forward, typename Derivative>
Tensor unary(const char* name, const Tensor& x, Forward forward, Derivative derivative) {
  auto in = x.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = forward(in[i]);
  return Tensor::from_op(name, x.shape(), std::move(out), {x}, [derivative](Node& self) {
    accumulate(self, 0, [&](std::vector<double>& g) {
      const auto& xin = self.parents[0]->values;
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += self.grad[i] * derivative(xin[i], self.values[i]);
      }
    });
  });
}

double sigmoid_scalar(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: incompatible shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &bv[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return Tensor::from_op("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const auto& A = self.parents[0]->values;
    const auto& B = self.parents[1]->values;
    const auto& G = self.grad;
    accumulate(self, 0, [&](std::vector<double>& gA) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * B[p * n + j];
          gA[i * k + p] += s;
        }
    });
    accumulate(self, 1, [&](std::vector<double>& gB) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gB[p * n + j] += aip * G[i * n + j];
        }
    });
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return Tensor::from_op("add", a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      accumulate(self, p, [&](std::vector<double>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      });
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return Tensor::from_op("sub", a.shape(), std::move(out), {a, b}, [](Node& self) {
    accumulate(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
    accumulate(self, 1, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    });
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return Tensor::from_op("mul", a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& A = self.parents[0]->values;
    const auto& B = self.parents[1]->values;
    accumulate(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * B[i];
    });
    accumulate(self, 1, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * A[i];
    });
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "div");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (bv[i] == 0.0) throw DomainError("div: division by zero at flat index " + std::to_string(i));
    out[i] = av[i] / bv[i];
  }
  return Tensor::from_op("div", a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& B = self.parents[1]->values;
    accumulate(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / B[i];
    });
    accumulate(self, 1, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i] * self.values[i] / B[i];
    });
  });
}

Tensor neg(const Tensor& x) { return affine(x, -1.0, 0.0); }

Tensor relu(const Tensor& x) {
  return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary("tanh", x, [](double v) { return std::tanh(v); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor log(const Tensor& x) {
  auto v = x.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0)) {
      std::ostringstream msg;
      msg << "log: non-positive argument " << v[i] << " at flat index " << i;
      throw DomainError(msg.str());
    }
  }
  return unary("log", x, [](double a) { return std::log(a); },
               [](double a, double) { return 1.0 / a; });
}

Tensor exp(const Tensor& x) {
  return unary("exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor affine(const Tensor& x, double scale, double shift) {
  return unary("affine", x, [scale, shift](double v) { return scale * v + shift; },
               [scale](double, double) { return scale; });
}

Tensor elementwise(ElementwiseOp op, const Tensor& x, const Tensor* y) {
  auto need_y = [&]() -> const Tensor& {
    if (y == nullptr) throw ParameterError("elementwise: binary op requires a second operand");
    return *y;
  };
  switch (op) {
    case ElementwiseOp::kAdd: return add(x, need_y());
    case ElementwiseOp::kSub: return sub(x, need_y());
    case ElementwiseOp::kMul: return mul(x, need_y());
    case ElementwiseOp::kDiv: return div(x, need_y());
    case ElementwiseOp::kRelu: return relu(x);
    case ElementwiseOp::kSigmoid: return sigmoid(x);
    case ElementwiseOp::kTanh: return tanh(x);
    case ElementwiseOp::kLog: return log(x);
    case ElementwiseOp::kExp: return exp(x);
    case ElementwiseOp::kNeg: return neg(x);
  }
  throw ParameterError("elementwise: unknown op kind");
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_matrix(x, "add_bias");
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  if (bias.numel() != n || bias.ndim() > 2 || (bias.ndim() == 2 && bias.shape()[0] != 1)) {
    throw DimensionError("add_bias: bias shape " + shape_string(bias.shape()) +
                         " does not broadcast over " + shape_string(x.shape()));
  }
  auto xv = x.values(), bv = bias.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] + bv[j];
  return Tensor::from_op("add_bias", x.shape(), std::move(out), {x, bias}, [m, n](Node& self) {
    accumulate(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
    accumulate(self, 1, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
    });
  });
}

namespace {

void require_column(const Tensor& x, const Tensor& column, const char* op) {
  require_matrix(x, op);
  if (column.ndim() != 2 || column.shape()[0] != x.shape()[0] || column.shape()[1] != 1) {
    throw DimensionError(std::string(op) + ": column shape " + shape_string(column.shape()) +
                         " does not broadcast over " + shape_string(x.shape()));
  }
}

}  // namespace

Tensor mul_col(const Tensor& x, const Tensor& column) {
  require_column(x, column, "mul_col");
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  auto xv = x.values(), cv = column.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] * cv[i];
  return Tensor::from_op("mul_col", x.shape(), std::move(out), {x, column}, [m, n](Node& self) {
    const auto& X = self.parents[0]->values;
    const auto& C = self.parents[1]->values;
    accumulate(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i * n + j] * C[i];
    });
    accumulate(self, 1, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i] += self.grad[i * n + j] * X[i * n + j];
    });
  });
}

Tensor div_col(const Tensor& x, const Tensor& column) {
  require_column(x, column, "div_col");
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  auto xv = x.values(), cv = column.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    if (cv[i] == 0.0) throw DomainError("div_col: zero divisor in row " + std::to_string(i));
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] / cv[i];
  }
  return Tensor::from_op("div_col", x.shape(), std::move(out), {x, column}, [m, n](Node& self) {
    const auto& C = self.parents[1]->values;
    accumulate(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i * n + j] / C[i];
    });
    accumulate(self, 1, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          g[i] -= self.grad[i * n + j] * self.values[i * n + j] / C[i];
    });
  });
}

Tensor row_sum(const Tensor& x) {
  require_matrix(x, "row_sum");
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  auto xv = x.values();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += xv[i * n + j];
  return Tensor::from_op("row_sum", {m, 1}, std::move(out), {x}, [m, n](Node& self) {
    accumulate(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i];
    });
  });
}

Tensor select_columns(const Tensor& x, std::span<const std::size_t> indices) {
  require_matrix(x, "select_columns");
  const std::size_t m = x.shape()[0], n = x.shape()[1], k = indices.size();
  for (std::size_t c : indices) {
    if (c >= n) {
      throw IndexError("select_columns: column " + std::to_string(c) + " out of range for " +
                       shape_string(x.shape()));
    }
  }
  auto xv = x.values();
  std::vector<double> out(m * k);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = xv[i * n + indices[j]];
  std::vector<std::size_t> cols(indices.begin(), indices.end());
  return Tensor::from_op("select_columns", {m, k}, std::move(out), {x},
                         [m, n, k, cols = std::move(cols)](Node& self) {
                           accumulate(self, 0, [&](std::vector<double>& g) {
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t j = 0; j < k; ++j)
                                 g[i * n + cols[j]] += self.grad[i * k + j];
                           });
                         });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return Tensor::from_op("sum", {1}, {s}, {x}, [](Node& self) {
    accumulate(self, 0, [&](std::vector<double>& g) {
      for (double& gi : g) gi += self.grad[0];
    });
  });
}

Tensor mean(const Tensor& x) {
  const double n = static_cast<double>(x.numel());
  if (x.numel() == 0) throw DimensionError("mean of an empty tensor");
  return affine(sum(x), 1.0 / n, 0.0);
}

namespace {

// Visits every 1-D lane of a (≤2-D) tensor along `axis` as (offset, stride, length).
template <typename F>
void for_each_lane(const Shape& shape, std::size_t axis, F&& visit) {
  if (shape.size() == 1) {
    if (axis != 0) throw DimensionError("axis " + std::to_string(axis) + " invalid for 1-D tensor");
    visit(std::size_t{0}, std::size_t{1}, shape[0]);
    return;
  }
  if (shape.size() != 2 || axis > 1) {
    throw DimensionError("axis " + std::to_string(axis) + " invalid for shape " +
                         shape_string(shape));
  }
  const std::size_t m = shape[0], n = shape[1];
  if (axis == 1) {
    for (std::size_t i = 0; i < m; ++i) visit(i * n, std::size_t{1}, n);
  } else {
    for (std::size_t j = 0; j < n; ++j) visit(j, n, m);
  }
}

}  // namespace

Tensor softmax(const Tensor& x, std::size_t axis) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for_each_lane(x.shape(), axis, [&](std::size_t off, std::size_t stride, std::size_t len) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < len; ++t) mx = std::max(mx, xv[off + t * stride]);
    double z = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      out[off + t * stride] = std::exp(xv[off + t * stride] - mx);
      z += out[off + t * stride];
    }
    for (std::size_t t = 0; t < len; ++t) out[off + t * stride] /= z;
  });
  Shape shape = x.shape();
  return Tensor::from_op("softmax", shape, std::move(out), {x}, [shape, axis](Node& self) {
    accumulate(self, 0, [&](std::vector<double>& g) {
      for_each_lane(shape, axis, [&](std::size_t off, std::size_t stride, std::size_t len) {
        double dot = 0.0;
        for (std::size_t t = 0; t < len; ++t) {
          const std::size_t i = off + t * stride;
          dot += self.grad[i] * self.values[i];
        }
        for (std::size_t t = 0; t < len; ++t) {
          const std::size_t i = off + t * stride;
          g[i] += self.values[i] * (self.grad[i] - dot);
        }
      });
    });
  });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for_each_lane(x.shape(), axis, [&](std::size_t off, std::size_t stride, std::size_t len) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < len; ++t) mx = std::max(mx, xv[off + t * stride]);
    double z = 0.0;
    for (std::size_t t = 0; t < len; ++t) z += std::exp(xv[off + t * stride] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t t = 0; t < len; ++t) out[off + t * stride] = xv[off + t * stride] - lse;
  });
  Shape shape = x.shape();
  return Tensor::from_op("log_softmax", shape, std::move(out), {x}, [shape, axis](Node& self) {
    accumulate(self, 0, [&](std::vector<double>& g) {
      for_each_lane(shape, axis, [&](std::size_t off, std::size_t stride, std::size_t len) {
        double gsum = 0.0;
        for (std::size_t t = 0; t < len; ++t) gsum += self.grad[off + t * stride];
        for (std::size_t t = 0; t < len; ++t) {
          const std::size_t i = off + t * stride;
          g[i] += self.grad[i] - std::exp(self.values[i]) * gsum;
        }
      });
    });
  });
}

Tensor straight_through(const Tensor& soft, std::vector<double> hard) {
  if (hard.size() != soft.numel()) {
    throw DimensionError("straight_through: hard values size " + std::to_string(hard.size()) +
                         " vs soft shape " + shape_string(soft.shape()));
  }
  return Tensor::from_op("straight_through", soft.shape(), std::move(hard), {soft}, [](Node& self) {
    accumulate(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
  });
}

Tensor cross_entropy_with_logits(const Tensor& logits, std::span<const std::size_t> labels) {
  require_matrix(logits, "cross_entropy_with_logits");
  const std::size_t m = logits.shape()[0], c = logits.shape()[1];
  if (labels.size() != m) {
    throw DimensionError("cross_entropy_with_logits: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(m) + " rows");
  }
  if (m == 0) throw DimensionError("cross_entropy_with_logits: empty batch");
  for (std::size_t i = 0; i < m; ++i) {
    if (labels[i] >= c) {
      throw IndexError("cross_entropy_with_logits: label " + std::to_string(labels[i]) +
                       " at row " + std::to_string(i) + " out of range for " +
                       std::to_string(c) + " classes");
    }
  }
  auto lv = logits.values();
  std::vector<double> probs(m * c);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = &lv[i * c];
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(row[j] - lse);
    total += lse - row[labels[i]];
  }
  std::vector<std::size_t> y(labels.begin(), labels.end());
  return Tensor::from_op(
      "cross_entropy", {1}, {total / static_cast<double>(m)}, {logits},
      [m, c, y = std::move(y), probs = std::move(probs)](Node& self) {
        accumulate(self, 0, [&](std::vector<double>& g) {
          const double scale = self.grad[0] / static_cast<double>(m);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < c; ++j)
              g[i * c + j] += scale * (probs[i * c + j] - (j == y[i] ? 1.0 : 0.0));
        });
      });
}

Tensor mse(const Tensor& prediction, const Tensor& target) {
  require_same_shape(prediction, target, "mse");
  Tensor diff = sub(prediction, target);
  return mean(mul(diff, diff));
}

Tensor loss(LossKind kind, const Tensor& prediction, const Tensor& target) {
  switch (kind) {
    case LossKind::kMeanSquaredError:
      return mse(prediction, target);
    case LossKind::kCrossEntropyWithLogits: {
      std::vector<std::size_t> labels;
      labels.reserve(target.numel());
      for (double v : target.values()) {
        if (v < 0.0 || v != std::floor(v)) {
          throw IndexError("cross-entropy target " + std::to_string(v) +
                           " is not a valid class index");
        }
        labels.push_back(static_cast<std::size_t>(v));
      }
      return cross_entropy_with_logits(prediction, labels);
    }
  }
  throw ParameterError("loss: unknown kind");
}

}  // namespace glassbox
