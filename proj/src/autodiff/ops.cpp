#include "nnkgc/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "nnkgc/errors.hpp"

namespace nnkgc::ad {

namespace {

// Gradient buffer of parent i, or nullptr when that parent is not tracked.
std::vector<double>* parent_grad(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? &p.grad_buffer() : nullptr;
}

const std::vector<double>& parent_values(const Node& self, std::size_t i) {
  return self.parents[i]->values;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
  }
}

template <typename F, typename D>
Tensor unary(const Tensor& x, const char* op, F forward, D derivative) {
  auto in = x.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = forward(in[i]);
  return make_result(x.rows(), x.cols(), std::move(out), {x},
                     [derivative](Node& self) {
                       auto* g = parent_grad(self, 0);
                       if (!g) return;
                       const auto& xv = parent_values(self, 0);
                       for (std::size_t i = 0; i < self.grad.size(); ++i) {
                         (*g)[i] += self.grad[i] * derivative(xv[i], self.values[i]);
                       }
                     },
                     op);
}

double stable_sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + a.shape_string() + " x " +
                         b.shape_string());
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return make_result(m, n, std::move(out), {a, b},
                     [m, k, n](Node& self) {
                       const auto& A = parent_values(self, 0);
                       const auto& B = parent_values(self, 1);
                       const auto& G = self.grad;
                       if (auto* ga = parent_grad(self, 0)) {
                         // dA = G · Bᵀ
                         for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t p = 0; p < k; ++p) {
                             double s = 0.0;
                             for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * B[p * n + j];
                             (*ga)[i * k + p] += s;
                           }
                         }
                       }
                       if (auto* gb = parent_grad(self, 1)) {
                         // dB = Aᵀ · G
                         for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t p = 0; p < k; ++p) {
                             const double aip = A[i * k + p];
                             if (aip == 0.0) continue;
                             for (std::size_t j = 0; j < n; ++j) (*gb)[p * n + j] += aip * G[i * n + j];
                           }
                         }
                       }
                     },
                     "matmul");
}

Tensor transpose(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  auto v = x.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = v[i * n + j];
  return make_result(n, m, std::move(out), {x},
                     [m, n](Node& self) {
                       auto* g = parent_grad(self, 0);
                       if (!g) return;
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j) (*g)[i * n + j] += self.grad[j * m + i];
                     },
                     "transpose");
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.rows(), a.cols(), std::move(out), {a, b},
                     [](Node& self) {
                       for (std::size_t p = 0; p < 2; ++p) {
                         if (auto* g = parent_grad(self, p)) {
                           for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
                         }
                       }
                     },
                     "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result(a.rows(), a.cols(), std::move(out), {a, b},
                     [](Node& self) {
                       if (auto* g = parent_grad(self, 0))
                         for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
                       if (auto* g = parent_grad(self, 1))
                         for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] -= self.grad[i];
                     },
                     "sub");
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard");
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.rows(), a.cols(), std::move(out), {a, b},
                     [](Node& self) {
                       const auto& A = parent_values(self, 0);
                       const auto& B = parent_values(self, 1);
                       if (auto* g = parent_grad(self, 0))
                         for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * B[i];
                       if (auto* g = parent_grad(self, 1))
                         for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * A[i];
                     },
                     "hadamard");
}

Tensor scale(const Tensor& x, double factor) {
  auto v = x.values();
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] * factor;
  return make_result(x.rows(), x.cols(), std::move(out), {x},
                     [factor](Node& self) {
                       if (auto* g = parent_grad(self, 0))
                         for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * factor;
                     },
                     "scale");
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
  if (s.size() != 1) throw DimensionError("scale_by: factor must be 1x1, got " + s.shape_string());
  const double f = s.values()[0];
  auto v = x.values();
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] * f;
  return make_result(x.rows(), x.cols(), std::move(out), {x, s},
                     [](Node& self) {
                       const auto& X = parent_values(self, 0);
                       const double f = parent_values(self, 1)[0];
                       if (auto* g = parent_grad(self, 0))
                         for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * f;
                       if (auto* g = parent_grad(self, 1)) {
                         double acc = 0.0;
                         for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * X[i];
                         (*g)[0] += acc;
                       }
                     },
                     "scale_by");
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != x.cols()) {
    throw DimensionError("add_row: row " + row.shape_string() + " does not broadcast over " +
                         x.shape_string());
  }
  const std::size_t m = x.rows(), n = x.cols();
  auto xv = x.values();
  auto rv = row.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] + rv[j];
  return make_result(m, n, std::move(out), {x, row},
                     [m, n](Node& self) {
                       if (auto* g = parent_grad(self, 0))
                         for (std::size_t i = 0; i < m * n; ++i) (*g)[i] += self.grad[i];
                       if (auto* g = parent_grad(self, 1))
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < n; ++j) (*g)[j] += self.grad[i * n + j];
                     },
                     "add_row");
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary(
      x, "leaky_relu", [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, "sigmoid", stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& x) {
  for (double v : x.values()) {
    if (!(v <= 709.0)) throw DomainError("exp: argument " + std::to_string(v) + " overflows");
  }
  return unary(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.values()) {
    if (!(v > 0.0)) throw DomainError("log: non-positive argument " + std::to_string(v));
  }
  return unary(
      x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor softplus(const Tensor& x) {
  return unary(
      x, "softplus",
      [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); },
      [](double v, double) { return stable_sigmoid(v); });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (lo > hi) throw ContractError("clamp: lo > hi");
  return unary(
      x, "clamp", [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

namespace {

void check_mask(const Tensor& x, const Mask* mask, const char* op) {
  if (mask && (mask->rows != x.rows() || mask->cols != x.cols() ||
               mask->keep.size() != x.size())) {
    throw DimensionError(std::string(op) + ": mask shape does not match " + x.shape_string());
  }
}

// Fills probabilities (0 at masked entries) and returns per-row log-normalizers.
std::vector<double> softmax_forward(const Tensor& x, const Mask* mask, std::vector<double>& probs) {
  const std::size_t m = x.rows(), n = x.cols();
  auto v = x.values();
  probs.assign(m * n, 0.0);
  std::vector<double> log_z(m);
  for (std::size_t i = 0; i < m; ++i) {
    double row_max = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask && !(*mask)(i, j)) continue;
      any = true;
      row_max = std::max(row_max, v[i * n + j]);
    }
    if (!any) throw DegenerateRowError("softmax: row " + std::to_string(i) + " is fully masked");
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask && !(*mask)(i, j)) continue;
      const double e = std::exp(v[i * n + j] - row_max);
      probs[i * n + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < n; ++j) probs[i * n + j] /= z;
    log_z[i] = row_max + std::log(z);
  }
  return log_z;
}

}  // namespace

Tensor softmax_rows(const Tensor& x, const Mask* mask) {
  check_mask(x, mask, "softmax_rows");
  std::vector<double> probs;
  softmax_forward(x, mask, probs);
  const std::size_t m = x.rows(), n = x.cols();
  return make_result(m, n, std::move(probs), {x},
                     [m, n](Node& self) {
                       auto* g = parent_grad(self, 0);
                       if (!g) return;
                       const auto& y = self.values;
                       for (std::size_t i = 0; i < m; ++i) {
                         double dot = 0.0;
                         for (std::size_t j = 0; j < n; ++j) dot += y[i * n + j] * self.grad[i * n + j];
                         for (std::size_t j = 0; j < n; ++j)
                           (*g)[i * n + j] += y[i * n + j] * (self.grad[i * n + j] - dot);
                       }
                     },
                     "softmax_rows");
}

Tensor log_softmax_rows(const Tensor& x, const Mask* mask) {
  check_mask(x, mask, "log_softmax_rows");
  std::vector<double> probs;
  const auto log_z = softmax_forward(x, mask, probs);
  const std::size_t m = x.rows(), n = x.cols();
  auto v = x.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (!mask || (*mask)(i, j)) out[i * n + j] = v[i * n + j] - log_z[i];
  return make_result(m, n, std::move(out), {x},
                     [m, n, probs = std::move(probs), keep = mask ? mask->keep
                                                                  : std::vector<std::uint8_t>{}](Node& self) {
                       auto* g = parent_grad(self, 0);
                       if (!g) return;
                       for (std::size_t i = 0; i < m; ++i) {
                         double total = 0.0;
                         for (std::size_t j = 0; j < n; ++j)
                           if (keep.empty() || keep[i * n + j]) total += self.grad[i * n + j];
                         for (std::size_t j = 0; j < n; ++j) {
                           if (!keep.empty() && !keep[i * n + j]) continue;
                           (*g)[i * n + j] += self.grad[i * n + j] - probs[i * n + j] * total;
                         }
                       }
                     },
                     "log_softmax_rows");
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_result(1, 1, {s}, {x},
                     [](Node& self) {
                       if (auto* g = parent_grad(self, 0))
                         for (double& gi : *g) gi += self.grad[0];
                     },
                     "sum");
}

Tensor mean(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  const double n = static_cast<double>(x.size());
  return make_result(1, 1, {s / n}, {x},
                     [n](Node& self) {
                       if (auto* g = parent_grad(self, 0))
                         for (double& gi : *g) gi += self.grad[0] / n;
                     },
                     "mean");
}

Tensor mean_rows(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  auto v = x.values();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += v[i * n + j];
  for (double& o : out) o /= static_cast<double>(m);
  return make_result(1, n, std::move(out), {x},
                     [m, n](Node& self) {
                       auto* g = parent_grad(self, 0);
                       if (!g) return;
                       const double inv = 1.0 / static_cast<double>(m);
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j) (*g)[i * n + j] += self.grad[j] * inv;
                     },
                     "mean_rows");
}

Tensor sum_cols(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  auto v = x.values();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += v[i * n + j];
  return make_result(m, 1, std::move(out), {x},
                     [m, n](Node& self) {
                       auto* g = parent_grad(self, 0);
                       if (!g) return;
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j) (*g)[i * n + j] += self.grad[i];
                     },
                     "sum_cols");
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_cols: empty operand list");
  const std::size_t m = parts[0].rows();
  std::vector<std::size_t> offsets;
  std::size_t n = 0;
  for (const Tensor& p : parts) {
    if (p.rows() != m) {
      throw DimensionError("concat_cols: row counts differ, " + parts[0].shape_string() + " vs " +
                           p.shape_string());
    }
    offsets.push_back(n);
    n += p.cols();
  }
  std::vector<double> out(m * n);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto v = parts[k].values();
    const std::size_t w = parts[k].cols();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(v.data() + i * w, w, out.data() + i * n + offsets[k]);
  }
  return make_result(m, n, std::move(out), parts,
                     [m, n, offsets](Node& self) {
                       for (std::size_t k = 0; k < self.parents.size(); ++k) {
                         auto* g = parent_grad(self, k);
                         if (!g) continue;
                         const std::size_t w = self.parents[k]->cols;
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < w; ++j)
                             (*g)[i * w + j] += self.grad[i * n + offsets[k] + j];
                       }
                     },
                     "concat_cols");
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_rows: empty operand list");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  for (const Tensor& p : parts) {
    if (p.cols() != n) {
      throw DimensionError("concat_rows: column counts differ, " + parts[0].shape_string() +
                           " vs " + p.shape_string());
    }
    m += p.rows();
  }
  std::vector<double> out;
  out.reserve(m * n);
  for (const Tensor& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return make_result(m, n, std::move(out), parts,
                     [](Node& self) {
                       std::size_t offset = 0;
                       for (std::size_t k = 0; k < self.parents.size(); ++k) {
                         const std::size_t len = self.parents[k]->values.size();
                         if (auto* g = parent_grad(self, k))
                           for (std::size_t i = 0; i < len; ++i) (*g)[i] += self.grad[offset + i];
                         offset += len;
                       }
                     },
                     "concat_rows");
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  if (rows.empty()) throw ContractError("gather_rows: empty index list");
  const std::size_t n = x.cols();
  auto v = x.values();
  std::vector<double> out(rows.size() * n);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= x.rows()) {
      throw IndexError("gather_rows: index " + std::to_string(rows[r]) + " out of range for " +
                       x.shape_string());
    }
    std::copy_n(v.data() + rows[r] * n, n, out.data() + r * n);
  }
  return make_result(rows.size(), n, std::move(out), {x},
                     [n, idx = std::vector<std::size_t>(rows.begin(), rows.end())](Node& self) {
                       auto* g = parent_grad(self, 0);
                       if (!g) return;
                       for (std::size_t r = 0; r < idx.size(); ++r)
                         for (std::size_t j = 0; j < n; ++j) (*g)[idx[r] * n + j] += self.grad[r * n + j];
                     },
                     "gather_rows");
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
  if (count == 0 || begin + count > x.cols()) {
    throw IndexError("slice_cols: [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " + x.shape_string());
  }
  const std::size_t m = x.rows(), n = x.cols();
  auto v = x.values();
  std::vector<double> out(m * count);
  for (std::size_t i = 0; i < m; ++i) std::copy_n(v.data() + i * n + begin, count, out.data() + i * count);
  return make_result(m, count, std::move(out), {x},
                     [m, n, begin, count](Node& self) {
                       auto* g = parent_grad(self, 0);
                       if (!g) return;
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < count; ++j)
                           (*g)[i * n + begin + j] += self.grad[i * count + j];
                     },
                     "slice_cols");
}

Tensor pick_per_row(const Tensor& x, std::span<const std::size_t> index) {
  if (index.size() != x.rows()) {
    throw DimensionError("pick_per_row: " + std::to_string(index.size()) + " indices for " +
                         x.shape_string());
  }
  const std::size_t m = x.rows(), n = x.cols();
  auto v = x.values();
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (index[i] >= n) throw IndexError("pick_per_row: column index out of range");
    out[i] = v[i * n + index[i]];
  }
  return make_result(m, 1, std::move(out), {x},
                     [n, idx = std::vector<std::size_t>(index.begin(), index.end())](Node& self) {
                       auto* g = parent_grad(self, 0);
                       if (!g) return;
                       for (std::size_t i = 0; i < idx.size(); ++i) (*g)[i * n + idx[i]] += self.grad[i];
                     },
                     "pick_per_row");
}

Tensor l2_normalize_rows(const Tensor& x, std::vector<bool>* zero_rows) {
  const std::size_t m = x.rows(), n = x.cols();
  auto v = x.values();
  std::vector<double> out(m * n);
  std::vector<double> norms(m);
  if (zero_rows) zero_rows->assign(m, false);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += v[i * n + j] * v[i * n + j];
    norms[i] = std::sqrt(s);
    if (norms[i] == 0.0) {
      if (zero_rows) (*zero_rows)[i] = true;
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] = 0.0;
      continue;
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = v[i * n + j] / norms[i];
  }
  return make_result(m, n, std::move(out), {x},
                     [m, n, norms = std::move(norms)](Node& self) {
                       auto* g = parent_grad(self, 0);
                       if (!g) return;
                       const auto& y = self.values;
                       for (std::size_t i = 0; i < m; ++i) {
                         if (norms[i] == 0.0) continue;
                         double dot = 0.0;
                         for (std::size_t j = 0; j < n; ++j) dot += y[i * n + j] * self.grad[i * n + j];
                         for (std::size_t j = 0; j < n; ++j)
                           (*g)[i * n + j] += (self.grad[i * n + j] - y[i * n + j] * dot) / norms[i];
                       }
                     },
                     "l2_normalize_rows");
}

Tensor outer_sum(const Tensor& a, const Tensor& b) {
  if (a.cols() != 1 || b.cols() != 1) {
    throw DimensionError("outer_sum: expects column vectors, got " + a.shape_string() + " and " +
                         b.shape_string());
  }
  const std::size_t m = a.rows(), n = b.rows();
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i] + bv[j];
  return make_result(m, n, std::move(out), {a, b},
                     [m, n](Node& self) {
                       auto* ga = parent_grad(self, 0);
                       auto* gb = parent_grad(self, 1);
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j) {
                           const double g = self.grad[i * n + j];
                           if (ga) (*ga)[i] += g;
                           if (gb) (*gb)[j] += g;
                         }
                     },
                     "outer_sum");
}

Tensor embedding_bag_mean(const Tensor& table, std::span<const std::size_t> ids,
                          std::span<const std::size_t> offsets) {
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != ids.size()) {
    throw ContractError("embedding_bag_mean: offsets must run from 0 to ids.size()");
  }
  const std::size_t n = offsets.size() - 1, d = table.cols();
  auto tv = table.values();
  std::vector<double> out(n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t begin = offsets[i], end = offsets[i + 1];
    if (end <= begin) throw ContractError("embedding_bag_mean: empty segment " + std::to_string(i));
    for (std::size_t k = begin; k < end; ++k) {
      if (ids[k] >= table.rows()) {
        throw IndexError("embedding_bag_mean: id " + std::to_string(ids[k]) + " out of range for " +
                         table.shape_string());
      }
      const double* row = tv.data() + ids[k] * d;
      for (std::size_t j = 0; j < d; ++j) out[i * d + j] += row[j];
    }
    const double inv = 1.0 / static_cast<double>(end - begin);
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] *= inv;
  }
  return make_result(n, d, std::move(out), {table},
                     [d, ids = std::vector<std::size_t>(ids.begin(), ids.end()),
                      offsets = std::vector<std::size_t>(offsets.begin(), offsets.end())](Node& self) {
                       auto* g = parent_grad(self, 0);
                       if (!g) return;
                       for (std::size_t i = 0; i + 1 < offsets.size(); ++i) {
                         const double inv = 1.0 / static_cast<double>(offsets[i + 1] - offsets[i]);
                         for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k)
                           for (std::size_t j = 0; j < d; ++j)
                             (*g)[ids[k] * d + j] += self.grad[i * d + j] * inv;
                       }
                     },
                     "embedding_bag_mean");
}

Tensor layer_norm_rows(const Tensor& x, double eps) {
  const std::size_t m = x.rows(), n = x.cols();
  auto v = x.values();
  std::vector<double> out(m * n);
  std::vector<double> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += v[i * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (v[i * n + j] - mu) * (v[i * n + j] - mu);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = (v[i * n + j] - mu) * inv_std[i];
  }
  return make_result(m, n, std::move(out), {x},
                     [m, n, inv_std = std::move(inv_std)](Node& self) {
                       auto* g = parent_grad(self, 0);
                       if (!g) return;
                       const auto& y = self.values;
                       const double dn = static_cast<double>(n);
                       for (std::size_t i = 0; i < m; ++i) {
                         double mean_g = 0.0, mean_gy = 0.0;
                         for (std::size_t j = 0; j < n; ++j) {
                           mean_g += self.grad[i * n + j];
                           mean_gy += self.grad[i * n + j] * y[i * n + j];
                         }
                         mean_g /= dn;
                         mean_gy /= dn;
                         for (std::size_t j = 0; j < n; ++j)
                           (*g)[i * n + j] +=
                               inv_std[i] * (self.grad[i * n + j] - mean_g - y[i * n + j] * mean_gy);
                       }
                     },
                     "layer_norm_rows");
}

Tensor dropout(const Tensor& x, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ContractError("dropout: rate must lie in [0, 1)");
  if (p == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  const double factor = 1.0 / (1.0 - p);
  std::vector<double> mask(x.size());
  for (double& k : mask) k = keep(rng) ? factor : 0.0;
  return hadamard(x, Tensor(x.rows(), x.cols(), std::move(mask)));
}

}  // namespace nnkgc::ad
