#include "egat/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "egat/errors.hpp"
#include "egat/kernels.hpp"

namespace egat::numerics {

namespace {

using IndexPtr = std::shared_ptr<const std::vector<std::size_t>>;

inline long as_long(std::size_t v) { return static_cast<long>(v); }

// Gradient buffer of an input, or nullptr when no gradient flows into it.
std::vector<double>* grad_of(Tape& t, Var v) { return t.needs_grad(v) ? &t.grad_buffer(v) : nullptr; }

void require(bool cond, const char* op, const std::string& detail) {
  if (!cond) throw ShapeError(std::string(op) + ": " + detail);
}

std::string dims(const Tensor& x) { return shape_str(x.shape()); }

void require_matrix(const Tensor& x, const char* op) {
  require(x.rank() == 2, op, "expected a matrix, got " + dims(x));
}

// Segment owning each slot of seg_ptr.
std::vector<std::size_t> segment_owner(const std::vector<std::size_t>& seg_ptr) {
  std::vector<std::size_t> owner(seg_ptr.back());
  for (std::size_t s = 0; s + 1 < seg_ptr.size(); ++s) {
    for (std::size_t e = seg_ptr[s]; e < seg_ptr[s + 1]; ++e) owner[e] = s;
  }
  return owner;
}

}  // namespace

Var matmul(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require_matrix(av, "matmul");
  require_matrix(bv, "matmul");
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  require(bv.rows() == k, "matmul", "inner dimensions differ: " + dims(av) + " * " + dims(bv));
  Tensor out = Tensor::matrix(m, n);
  kernels::omp::gemm_nn(av.data().data(), bv.data().data(), out.data().data(), m, k, n, false);
  return t.record(OpKind::matmul, {a, b}, std::move(out), [a, b, m, k, n](Tape& t, const std::vector<double>& g) {
    if (auto* ga = grad_of(t, a)) kernels::omp::gemm_nt(g.data(), t.value(b).data().data(), ga->data(), m, n, k, true);
    if (auto* gb = grad_of(t, b)) kernels::omp::gemm_tn(t.value(a).data().data(), g.data(), gb->data(), k, m, n, true);
  });
}

Var add(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require(av.shape() == bv.shape(), "add", dims(av) + " vs " + dims(bv));
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  return t.record(OpKind::add, {a, b}, std::move(out), [a, b](Tape& t, const std::vector<double>& g) {
    for (Var v : {a, b}) {
      if (auto* gv = grad_of(t, v)) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gv)[i] += g[i];
      }
    }
  });
}

Var mul(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require(av.shape() == bv.shape(), "mul", dims(av) + " vs " + dims(bv));
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  return t.record(OpKind::mul, {a, b}, std::move(out), [a, b](Tape& t, const std::vector<double>& g) {
    if (auto* ga = grad_of(t, a)) {
      const Tensor& bv = t.value(b);
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[i];
    }
    if (auto* gb = grad_of(t, b)) {
      const Tensor& av = t.value(a);
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av[i];
    }
  });
}

Var affine(Tape& t, Var x, double alpha, double beta) {
  const Tensor& xv = t.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = alpha * xv[i] + beta;
  return t.record(OpKind::affine, {x}, std::move(out), [x, alpha](Tape& t, const std::vector<double>& g) {
    auto& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += alpha * g[i];
  });
}

Var add_row(Tape& t, Var x, Var b) {
  const Tensor& xv = t.value(x);
  const Tensor& bv = t.value(b);
  require_matrix(xv, "add_row");
  const std::size_t n = xv.rows(), d = xv.cols();
  require(bv.size() == d, "add_row", "bias " + dims(bv) + " for " + dims(xv));
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) out[i * d + c] = xv[i * d + c] + bv[c];
  return t.record(OpKind::add_row, {x, b}, std::move(out), [x, b, n, d](Tape& t, const std::vector<double>& g) {
    if (auto* gx = grad_of(t, x)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
    }
    if (auto* gb = grad_of(t, b)) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) (*gb)[c] += g[i * d + c];
    }
  });
}

Var mul_row(Tape& t, Var x, Var gain) {
  const Tensor& xv = t.value(x);
  const Tensor& gv = t.value(gain);
  require_matrix(xv, "mul_row");
  const std::size_t n = xv.rows(), d = xv.cols();
  require(gv.size() == d, "mul_row", "gain " + dims(gv) + " for " + dims(xv));
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) out[i * d + c] = xv[i * d + c] * gv[c];
  return t.record(OpKind::mul_row, {x, gain}, std::move(out),
                  [x, gain, n, d](Tape& t, const std::vector<double>& g) {
                    const Tensor& xv = t.value(x);
                    const Tensor& gv = t.value(gain);
                    if (auto* gx = grad_of(t, x)) {
                      for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t c = 0; c < d; ++c) (*gx)[i * d + c] += g[i * d + c] * gv[c];
                    }
                    if (auto* gg = grad_of(t, gain)) {
                      for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t c = 0; c < d; ++c) (*gg)[c] += g[i * d + c] * xv[i * d + c];
                    }
                  });
}

Var mul_rows(Tape& t, Var x, Var w) {
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(w);
  require_matrix(xv, "mul_rows");
  const std::size_t n = xv.rows(), d = xv.cols();
  require(wv.size() == n, "mul_rows", "weights " + dims(wv) + " for " + dims(xv));
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) out[i * d + c] = xv[i * d + c] * wv[i];
  return t.record(OpKind::mul_rows, {x, w}, std::move(out), [x, w, n, d](Tape& t, const std::vector<double>& g) {
    const Tensor& xv = t.value(x);
    const Tensor& wv = t.value(w);
    if (auto* gx = grad_of(t, x)) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) (*gx)[i * d + c] += g[i * d + c] * wv[i];
    }
    if (auto* gw = grad_of(t, w)) {
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += g[i * d + c] * xv[i * d + c];
        (*gw)[i] += s;
      }
    }
  });
}

Var leaky_relu(Tape& t, Var x, double slope) {
  const Tensor& xv = t.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : slope * xv[i];
  return t.record(OpKind::leaky_relu, {x}, std::move(out), [x, slope](Tape& t, const std::vector<double>& g) {
    const Tensor& xv = t.value(x);
    auto& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += xv[i] > 0.0 ? g[i] : slope * g[i];
  });
}

Var elu(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : std::expm1(xv[i]);
  return t.record(OpKind::elu, {x}, std::move(out), [x](Tape& t, const std::vector<double>& g) {
    const Tensor& xv = t.value(x);
    auto& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += xv[i] > 0.0 ? g[i] : g[i] * std::exp(xv[i]);
  });
}

Var relu(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return t.record(OpKind::relu, {x}, std::move(out), [x](Tape& t, const std::vector<double>& g) {
    const Tensor& xv = t.value(x);
    auto& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > 0.0) gx[i] += g[i];
  });
}

Var sigmoid(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double v = xv[i];
    out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  Var y{t.size()};
  return t.record(OpKind::sigmoid, {x}, std::move(out), [x, y](Tape& t, const std::vector<double>& g) {
    const Tensor& yv = t.value(y);
    auto& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * yv[i] * (1.0 - yv[i]);
  });
}

Var log(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::log(xv[i]);
  return t.record(OpKind::log, {x}, std::move(out), [x](Tape& t, const std::vector<double>& g) {
    const Tensor& xv = t.value(x);
    auto& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / xv[i];
  });
}

Var log_softmax_rows(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  require_matrix(xv, "log_softmax_rows");
  const std::size_t n = xv.rows(), c = xv.cols();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = xv.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = row[j] - lse;
  }
  Var y{t.size()};
  return t.record(OpKind::log_softmax_rows, {x}, std::move(out), [x, y, n, c](Tape& t, const std::vector<double>& g) {
    const Tensor& yv = t.value(y);
    auto& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < n; ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < c; ++j) gs += g[i * c + j];
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[i * c + j] - std::exp(yv[i * c + j]) * gs;
    }
  });
}

Var nll_loss(Tape& t, Var log_probs, std::span<const int> labels) {
  const Tensor& lp = t.value(log_probs);
  require_matrix(lp, "nll_loss");
  const std::size_t n = lp.rows(), c = lp.cols();
  require(labels.size() == n, "nll_loss", std::to_string(labels.size()) + " labels for " + dims(lp));
  std::vector<int> lab(labels.begin(), labels.end());
  std::size_t count = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (lab[i] < 0) continue;
    if (static_cast<std::size_t>(lab[i]) >= c) throw IndexError("nll_loss: label out of range");
    total -= lp[i * c + static_cast<std::size_t>(lab[i])];
    ++count;
  }
  const double denom = count ? static_cast<double>(count) : 1.0;
  return t.record(OpKind::nll_loss, {log_probs}, Tensor::scalar(total / denom),
                  [log_probs, lab = std::move(lab), c, denom](Tape& t, const std::vector<double>& g) {
                    auto& gl = t.grad_buffer(log_probs);
                    for (std::size_t i = 0; i < lab.size(); ++i) {
                      if (lab[i] >= 0) gl[i * c + static_cast<std::size_t>(lab[i])] -= g[0] / denom;
                    }
                  });
}

Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps) {
  const Tensor& xv = t.value(x);
  require_matrix(xv, "layer_norm");
  const std::size_t n = xv.rows(), d = xv.cols();
  require(d >= 1, "layer_norm", "zero-width rows");
  require(t.value(gain).size() == d && t.value(bias).size() == d, "layer_norm", "affine parameters must have width d");
  const Tensor& gv = t.value(gain);
  const Tensor& bv = t.value(bias);
  auto xhat = std::make_shared<std::vector<double>>(n * d);
  auto inv_std = std::make_shared<std::vector<double>>(n);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += xv[i * d + c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (xv[i * d + c] - mean) * (xv[i * d + c] - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = inv;
    for (std::size_t c = 0; c < d; ++c) {
      const double h = (xv[i * d + c] - mean) * inv;
      (*xhat)[i * d + c] = h;
      out[i * d + c] = h * gv[c] + bv[c];
    }
  }
  return t.record(OpKind::layer_norm, {x, gain, bias}, std::move(out),
                  [x, gain, bias, n, d, xhat, inv_std](Tape& t, const std::vector<double>& g) {
                    const Tensor& gv = t.value(gain);
                    if (auto* gg = grad_of(t, gain)) {
                      for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t c = 0; c < d; ++c) (*gg)[c] += g[i * d + c] * (*xhat)[i * d + c];
                    }
                    if (auto* gb = grad_of(t, bias)) {
                      for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t c = 0; c < d; ++c) (*gb)[c] += g[i * d + c];
                    }
                    if (auto* gx = grad_of(t, x)) {
                      const double inv_d = 1.0 / static_cast<double>(d);
                      for (std::size_t i = 0; i < n; ++i) {
                        double mean_dh = 0.0, mean_dh_h = 0.0;
                        for (std::size_t c = 0; c < d; ++c) {
                          const double dh = g[i * d + c] * gv[c];
                          mean_dh += dh;
                          mean_dh_h += dh * (*xhat)[i * d + c];
                        }
                        mean_dh *= inv_d;
                        mean_dh_h *= inv_d;
                        for (std::size_t c = 0; c < d; ++c) {
                          const double dh = g[i * d + c] * gv[c];
                          (*gx)[i * d + c] += (*inv_std)[i] * (dh - mean_dh - (*xhat)[i * d + c] * mean_dh_h);
                        }
                      }
                    }
                  });
}

Var dropout(Tape& t, Var x, double p, bool training, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout probability must lie in [0, 1), got " + std::to_string(p));
  if (!training || p == 0.0) return x;
  const Tensor& xv = t.value(x);
  auto mask = std::make_shared<std::vector<double>>(xv.size());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - p);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    (*mask)[i] = unif(rng) >= p ? keep_scale : 0.0;
    out[i] = xv[i] * (*mask)[i];
  }
  return t.record(OpKind::dropout, {x}, std::move(out), [x, mask](Tape& t, const std::vector<double>& g) {
    auto& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*mask)[i];
  });
}

Var concat_cols(Tape& t, const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  const std::size_t n = t.value(parts[0]).rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor& pv = t.value(p);
    require(pv.rows() == n, "concat_cols", "row counts differ");
    widths.push_back(pv.cols());
    total += pv.cols();
  }
  Tensor out = Tensor::matrix(n, total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = t.value(parts[k]);
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(pv.data().data() + i * widths[k], widths[k], out.data().data() + i * total + off);
    off += widths[k];
  }
  return t.record(OpKind::concat_cols, parts, std::move(out),
                  [parts, widths, n, total](Tape& t, const std::vector<double>& g) {
                    std::size_t off = 0;
                    for (std::size_t k = 0; k < parts.size(); ++k) {
                      if (auto* gp = grad_of(t, parts[k])) {
                        for (std::size_t i = 0; i < n; ++i)
                          for (std::size_t c = 0; c < widths[k]; ++c)
                            (*gp)[i * widths[k] + c] += g[i * total + off + c];
                      }
                      off += widths[k];
                    }
                  });
}

Var gather_rows(Tape& t, Var x, std::vector<std::size_t> rows) {
  const Tensor& xv = t.value(x);
  const std::size_t d = xv.cols();
  Tensor out = Tensor::matrix(rows.size(), d);
  for (std::size_t m = 0; m < rows.size(); ++m) {
    if (rows[m] >= xv.rows()) throw IndexError("gather_rows: row " + std::to_string(rows[m]) + " out of range");
    std::copy_n(xv.data().data() + rows[m] * d, d, out.data().data() + m * d);
  }
  return t.record(OpKind::gather_rows, {x}, std::move(out), [x, rows = std::move(rows), d](Tape& t, const std::vector<double>& g) {
    auto& gx = t.grad_buffer(x);
    for (std::size_t m = 0; m < rows.size(); ++m)
      for (std::size_t c = 0; c < d; ++c) gx[rows[m] * d + c] += g[m * d + c];
  });
}

Var head_dot(Tape& t, Var x, Var a) {
  const Tensor& xv = t.value(x);
  const Tensor& av = t.value(a);
  require_matrix(xv, "head_dot");
  require_matrix(av, "head_dot");
  const std::size_t n = xv.rows(), heads = av.rows(), hd = av.cols();
  require(xv.cols() == heads * hd, "head_dot", dims(xv) + " vs heads " + dims(av));
  Tensor out = Tensor::matrix(n, heads);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t h = 0; h < heads; ++h) {
      double s = 0.0;
      for (std::size_t d = 0; d < hd; ++d) s += xv[i * heads * hd + h * hd + d] * av[h * hd + d];
      out[i * heads + h] = s;
    }
  return t.record(OpKind::head_dot, {x, a}, std::move(out), [x, a, n, heads, hd](Tape& t, const std::vector<double>& g) {
    const std::size_t w = heads * hd;
    if (auto* gx = grad_of(t, x)) {
      const Tensor& av = t.value(a);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t h = 0; h < heads; ++h)
          for (std::size_t d = 0; d < hd; ++d) (*gx)[i * w + h * hd + d] += g[i * heads + h] * av[h * hd + d];
    }
    if (auto* ga = grad_of(t, a)) {
      const Tensor& xv = t.value(x);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t h = 0; h < heads; ++h)
          for (std::size_t d = 0; d < hd; ++d) (*ga)[h * hd + d] += g[i * heads + h] * xv[i * w + h * hd + d];
    }
  });
}

Var segment_softmax(Tape& t, Var logits, IndexPtr seg_ptr) {
  const Tensor& lv = t.value(logits);
  const std::size_t e_count = lv.rows(), k = lv.rank() == 1 ? 1 : lv.cols();
  require(!seg_ptr->empty() && seg_ptr->back() == e_count, "segment_softmax", "segments do not cover the rows");
  const std::size_t n_seg = seg_ptr->size() - 1;
  for (std::size_t s = 0; s < n_seg; ++s) {
    if ((*seg_ptr)[s + 1] <= (*seg_ptr)[s]) throw InternalError("segment_softmax: empty segment " + std::to_string(s));
  }
  Tensor out(lv.shape());
#pragma omp parallel for schedule(static) if (e_count > 4096)
  for (long ss = 0; ss < as_long(n_seg); ++ss) {
    const auto s = static_cast<std::size_t>(ss);
    const std::size_t lo = (*seg_ptr)[s], hi = (*seg_ptr)[s + 1];
    for (std::size_t h = 0; h < k; ++h) {
      double mx = lv[lo * k + h];
      for (std::size_t e = lo + 1; e < hi; ++e) mx = std::max(mx, lv[e * k + h]);
      double z = 0.0;
      for (std::size_t e = lo; e < hi; ++e) {
        out[e * k + h] = std::exp(lv[e * k + h] - mx);
        z += out[e * k + h];
      }
      for (std::size_t e = lo; e < hi; ++e) out[e * k + h] /= z;
    }
  }
  Var y{t.size()};
  return t.record(OpKind::segment_softmax, {logits}, std::move(out),
                  [logits, y, seg_ptr, k](Tape& t, const std::vector<double>& g) {
                    const Tensor& yv = t.value(y);
                    auto& gl = t.grad_buffer(logits);
                    const std::size_t n_seg = seg_ptr->size() - 1;
                    for (std::size_t s = 0; s < n_seg; ++s) {
                      const std::size_t lo = (*seg_ptr)[s], hi = (*seg_ptr)[s + 1];
                      for (std::size_t h = 0; h < k; ++h) {
                        double dot = 0.0;
                        for (std::size_t e = lo; e < hi; ++e) dot += yv[e * k + h] * g[e * k + h];
                        for (std::size_t e = lo; e < hi; ++e) gl[e * k + h] += yv[e * k + h] * (g[e * k + h] - dot);
                      }
                    }
                  });
}

Var segment_aggregate(Tape& t, Var alpha, Var values, IndexPtr src, IndexPtr seg_ptr) {
  const Tensor& av = t.value(alpha);
  const Tensor& vv = t.value(values);
  const std::size_t e_count = av.rows(), heads = av.rank() == 1 ? 1 : av.cols();
  require(src->size() == e_count && seg_ptr->back() == e_count, "segment_aggregate", "edge arrays misaligned");
  require(vv.rank() == 2 && vv.cols() % heads == 0, "segment_aggregate",
          "values " + dims(vv) + " not divisible into " + std::to_string(heads) + " heads");
  for (std::size_t j : *src) {
    if (j >= vv.rows()) throw IndexError("segment_aggregate: source row out of range");
  }
  const std::size_t width = vv.cols(), head_dim = width / heads, n_seg = seg_ptr->size() - 1;
  Tensor out = Tensor::matrix(n_seg, width);
  kernels::omp::segment_weighted_sum(av.data(), heads, vv.data(), head_dim, {*seg_ptr, {}, *src}, out.data(), false);
  return t.record(
      OpKind::segment_aggregate, {alpha, values}, std::move(out),
      [alpha, values, src, seg_ptr, heads, head_dim, width](Tape& t, const std::vector<double>& g) {
        const std::vector<std::size_t> owner = segment_owner(*seg_ptr);
        if (auto* ga = grad_of(t, alpha)) {
          const Tensor& vv = t.value(values);
          for (std::size_t e = 0; e < owner.size(); ++e) {
            const double* grow = g.data() + owner[e] * width;
            const double* vrow = vv.data().data() + (*src)[e] * width;
            for (std::size_t h = 0; h < heads; ++h) {
              double s = 0.0;
              for (std::size_t d = h * head_dim; d < (h + 1) * head_dim; ++d) s += grow[d] * vrow[d];
              (*ga)[e * heads + h] += s;
            }
          }
        }
        if (auto* gv = grad_of(t, values)) {
          // transpose: group edges by their source row
          const std::size_t n_rows = t.value(values).rows();
          std::vector<std::size_t> by_src_ptr(n_rows + 1, 0);
          for (std::size_t j : *src) ++by_src_ptr[j + 1];
          for (std::size_t r = 0; r < n_rows; ++r) by_src_ptr[r + 1] += by_src_ptr[r];
          std::vector<std::size_t> order(src->size());
          std::vector<std::size_t> fill(by_src_ptr.begin(), by_src_ptr.end() - 1);
          for (std::size_t e = 0; e < src->size(); ++e) order[fill[(*src)[e]]++] = e;
          kernels::omp::segment_weighted_sum(t.value(alpha).data(), heads, g, head_dim, {by_src_ptr, order, owner},
                                             *gv, true);
        }
      });
}

Var head_mean(Tape& t, Var x, std::size_t heads) {
  const Tensor& xv = t.value(x);
  require_matrix(xv, "head_mean");
  require(heads >= 1 && xv.cols() % heads == 0, "head_mean", dims(xv) + " not divisible by heads");
  const std::size_t n = xv.rows(), d = xv.cols() / heads;
  const double inv = 1.0 / static_cast<double>(heads);
  Tensor out = Tensor::matrix(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t c = 0; c < d; ++c) out[i * d + c] += xv[i * heads * d + h * d + c] * inv;
  return t.record(OpKind::head_mean, {x}, std::move(out), [x, n, d, heads, inv](Tape& t, const std::vector<double>& g) {
    auto& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t c = 0; c < d; ++c) gx[i * heads * d + h * d + c] += g[i * d + c] * inv;
  });
}

Var set_attention(Tape& t, Var q, Var k, Var v, IndexPtr seg_ptr, std::size_t heads, std::vector<double>* probs_out) {
  const Tensor& qv = t.value(q);
  const Tensor& kv = t.value(k);
  const Tensor& vv = t.value(v);
  require_matrix(qv, "set_attention");
  require(qv.shape() == kv.shape() && qv.shape() == vv.shape(), "set_attention", "q, k, v shapes differ");
  const std::size_t rows = qv.rows(), d = qv.cols();
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("set_attention: model width " + std::to_string(d) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  require(!seg_ptr->empty() && seg_ptr->back() == rows, "set_attention", "sets do not cover the rows");
  const std::size_t hd = d / heads, n_seg = seg_ptr->size() - 1;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  // probability block offsets per set
  auto p_off = std::make_shared<std::vector<std::size_t>>(n_seg + 1, 0);
  for (std::size_t s = 0; s < n_seg; ++s) {
    const std::size_t n = (*seg_ptr)[s + 1] - (*seg_ptr)[s];
    (*p_off)[s + 1] = (*p_off)[s] + heads * n * n;
  }
  auto probs = std::make_shared<std::vector<double>>(p_off->back());
  Tensor out = Tensor::matrix(rows, d);
#pragma omp parallel for schedule(dynamic, 64) if (n_seg > 256)
  for (long ss = 0; ss < as_long(n_seg); ++ss) {
    const auto s = static_cast<std::size_t>(ss);
    const std::size_t lo = (*seg_ptr)[s], n = (*seg_ptr)[s + 1] - lo;
    for (std::size_t h = 0; h < heads; ++h) {
      double* p = probs->data() + (*p_off)[s] + h * n * n;
      for (std::size_t a = 0; a < n; ++a) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < n; ++b) {
          double sc = 0.0;
          for (std::size_t c = 0; c < hd; ++c) sc += qv[(lo + a) * d + h * hd + c] * kv[(lo + b) * d + h * hd + c];
          p[a * n + b] = sc * scale;
          mx = std::max(mx, p[a * n + b]);
        }
        double z = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
          p[a * n + b] = std::exp(p[a * n + b] - mx);
          z += p[a * n + b];
        }
        for (std::size_t b = 0; b < n; ++b) p[a * n + b] /= z;
        for (std::size_t b = 0; b < n; ++b) {
          const double w = p[a * n + b];
          for (std::size_t c = 0; c < hd; ++c) out[(lo + a) * d + h * hd + c] += w * vv[(lo + b) * d + h * hd + c];
        }
      }
    }
  }
  if (probs_out != nullptr) *probs_out = *probs;
  return t.record(
      OpKind::set_attention, {q, k, v}, std::move(out),
      [q, k, v, seg_ptr, heads, hd, d, scale, probs, p_off](Tape& t, const std::vector<double>& g) {
        const Tensor& qv = t.value(q);
        const Tensor& kv = t.value(k);
        const Tensor& vv = t.value(v);
        auto* gq = grad_of(t, q);
        auto* gk = grad_of(t, k);
        auto* gv = grad_of(t, v);
        const std::size_t n_seg = seg_ptr->size() - 1;
#pragma omp parallel for schedule(dynamic, 64) if (n_seg > 256)
        for (long ss = 0; ss < as_long(n_seg); ++ss) {
          const auto s = static_cast<std::size_t>(ss);
          const std::size_t lo = (*seg_ptr)[s], n = (*seg_ptr)[s + 1] - lo;
          std::vector<double> dp(n * n);
          for (std::size_t h = 0; h < heads; ++h) {
            const double* p = probs->data() + (*p_off)[s] + h * n * n;
            for (std::size_t a = 0; a < n; ++a) {
              for (std::size_t b = 0; b < n; ++b) {
                double sdp = 0.0;
                for (std::size_t c = 0; c < hd; ++c) sdp += g[(lo + a) * d + h * hd + c] * vv[(lo + b) * d + h * hd + c];
                dp[a * n + b] = sdp;
                if (gv != nullptr) {
                  for (std::size_t c = 0; c < hd; ++c)
                    (*gv)[(lo + b) * d + h * hd + c] += p[a * n + b] * g[(lo + a) * d + h * hd + c];
                }
              }
              double dot = 0.0;
              for (std::size_t b = 0; b < n; ++b) dot += p[a * n + b] * dp[a * n + b];
              for (std::size_t b = 0; b < n; ++b) {
                const double ds = p[a * n + b] * (dp[a * n + b] - dot) * scale;
                if (ds == 0.0) continue;
                for (std::size_t c = 0; c < hd; ++c) {
                  if (gq != nullptr) (*gq)[(lo + a) * d + h * hd + c] += ds * kv[(lo + b) * d + h * hd + c];
                  if (gk != nullptr) (*gk)[(lo + b) * d + h * hd + c] += ds * qv[(lo + a) * d + h * hd + c];
                }
              }
            }
          }
        }
      });
}

Var segment_weighted_sum(Tape& t, Var x, Var w, IndexPtr seg_ptr) {
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(w);
  require_matrix(xv, "segment_weighted_sum");
  const std::size_t rows = xv.rows(), d = xv.cols();
  require(wv.size() == rows, "segment_weighted_sum", "weights " + dims(wv) + " for " + dims(xv));
  require(!seg_ptr->empty() && seg_ptr->back() == rows, "segment_weighted_sum", "segments do not cover the rows");
  const std::size_t n_seg = seg_ptr->size() - 1;
  Tensor out = Tensor::matrix(n_seg, d);
  for (std::size_t s = 0; s < n_seg; ++s)
    for (std::size_t r = (*seg_ptr)[s]; r < (*seg_ptr)[s + 1]; ++r)
      for (std::size_t c = 0; c < d; ++c) out[s * d + c] += wv[r] * xv[r * d + c];
  return t.record(OpKind::segment_weighted_sum, {x, w}, std::move(out),
                  [x, w, seg_ptr, d](Tape& t, const std::vector<double>& g) {
                    const std::size_t n_seg = seg_ptr->size() - 1;
                    auto* gx = grad_of(t, x);
                    auto* gw = grad_of(t, w);
                    const Tensor& xv = t.value(x);
                    const Tensor& wv = t.value(w);
                    for (std::size_t s = 0; s < n_seg; ++s)
                      for (std::size_t r = (*seg_ptr)[s]; r < (*seg_ptr)[s + 1]; ++r) {
                        double acc = 0.0;
                        for (std::size_t c = 0; c < d; ++c) {
                          if (gx != nullptr) (*gx)[r * d + c] += wv[r] * g[s * d + c];
                          acc += g[s * d + c] * xv[r * d + c];
                        }
                        if (gw != nullptr) (*gw)[r] += acc;
                      }
                  });
}

Var sum_all(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  double s = 0.0;
  for (double v : xv.data()) s += v;
  return t.record(OpKind::sum_all, {x}, Tensor::scalar(s), [x](Tape& t, const std::vector<double>& g) {
    auto& gx = t.grad_buffer(x);
    for (double& v : gx) v += g[0];
  });
}

Var mean_all(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  require(xv.size() > 0, "mean_all", "empty tensor");
  const double inv = 1.0 / static_cast<double>(xv.size());
  double s = 0.0;
  for (double v : xv.data()) s += v;
  return t.record(OpKind::mean_all, {x}, Tensor::scalar(s * inv), [x, inv](Tape& t, const std::vector<double>& g) {
    auto& gx = t.grad_buffer(x);
    for (double& v : gx) v += g[0] * inv;
  });
}

}  // namespace egat::numerics
