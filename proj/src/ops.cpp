#include "mimic/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mimic {

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

// C[M,N] (+)= A[M,K] * B[K,N], row-major. The k loop is outermost per row so
// each C entry accumulates in strict k order; the conv oracle tests rely on
// that order being reproducible.
void gemm_nn(int m, int k, int n, const double* a, const double* b, double* c,
             bool accumulate) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<int64_t>(i) * n;
    if (!accumulate) std::fill(ci, ci + n, 0.0);
    const double* ai = a + static_cast<int64_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + static_cast<int64_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[M,N] (+)= A^T[M,K2] * B[K2,N] with A stored [K2,M].
void gemm_tn(int m, int k2, int n, const double* a, const double* b, double* c,
             bool accumulate) {
  if (!accumulate) std::fill(c, c + static_cast<int64_t>(m) * n, 0.0);
  for (int p = 0; p < k2; ++p) {
    const double* ap = a + static_cast<int64_t>(p) * m;
    const double* bp = b + static_cast<int64_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double av = ap[i];
      if (av == 0.0) continue;
      double* ci = c + static_cast<int64_t>(i) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[M,N] (+)= A[M,K2] * B^T[K2,N] with B stored [N,K2].
void gemm_nt(int m, int k2, int n, const double* a, const double* b, double* c,
             bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<int64_t>(i) * k2;
    double* ci = c + static_cast<int64_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + static_cast<int64_t>(j) * k2;
      double acc = 0.0;
      for (int p = 0; p < k2; ++p) acc += ai[p] * bj[p];
      if (accumulate) ci[j] += acc;
      else ci[j] = acc;
    }
  }
}

Tensor unary_op(const char* name, const Tensor& a, std::vector<double> out,
                BackwardFn bf) {
  return Tensor::make_op(name, a.shape(), std::move(out), {a}, std::move(bf));
}

std::vector<Tensor> one_grad(Tensor g) { return {std::move(g)}; }

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  std::vector<double> out(a.data());
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  return Tensor::make_op(
      "add", a.shape(), std::move(out), {a, b},
      [](const Tensor& g, const Tensor&, const std::vector<Tensor>&,
         const std::vector<char>&) -> std::vector<Tensor> { return {g, g}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  std::vector<double> out(a.data());
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  return Tensor::make_op(
      "sub", a.shape(), std::move(out), {a, b},
      [](const Tensor& g, const Tensor&, const std::vector<Tensor>&,
         const std::vector<char>& need) -> std::vector<Tensor> {
        return {need[0] ? g : Tensor(), need[1] ? scale(g, -1.0) : Tensor()};
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  std::vector<double> out(a.data());
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
  return Tensor::make_op(
      "mul", a.shape(), std::move(out), {a, b},
      [](const Tensor& g, const Tensor&, const std::vector<Tensor>& in,
         const std::vector<char>& need) -> std::vector<Tensor> {
        return {need[0] ? mul(g, in[1]) : Tensor(), need[1] ? mul(g, in[0]) : Tensor()};
      });
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_same_shape("div", a, b);
  std::vector<double> out(a.data());
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] /= bd[i];
  return Tensor::make_op(
      "div", a.shape(), std::move(out), {a, b},
      [](const Tensor& g, const Tensor& self, const std::vector<Tensor>& in,
         const std::vector<char>& need) -> std::vector<Tensor> {
        Tensor ga = need[0] ? div(g, in[1]) : Tensor();
        Tensor gb = need[1] ? neg(div(mul(g, self), in[1])) : Tensor();
        return {ga, gb};
      });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  check_same_shape("minimum", a, b);
  const auto& ad = a.data();
  const auto& bd = b.data();
  std::vector<double> out(ad.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::min(ad[i], bd[i]);
  return Tensor::make_op(
      "minimum", a.shape(), std::move(out), {a, b},
      [](const Tensor& g, const Tensor&, const std::vector<Tensor>& in,
         const std::vector<char>& need) -> std::vector<Tensor> {
        const auto& x = in[0].data();
        const auto& y = in[1].data();
        std::vector<double> ma(x.size()), mb(x.size());
        for (size_t i = 0; i < x.size(); ++i) {
          ma[i] = x[i] <= y[i] ? 1.0 : 0.0;
          mb[i] = 1.0 - ma[i];
        }
        Tensor ga = need[0] ? mul(g, Tensor::from_data(in[0].shape(), std::move(ma))) : Tensor();
        Tensor gb = need[1] ? mul(g, Tensor::from_data(in[1].shape(), std::move(mb))) : Tensor();
        return {ga, gb};
      });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.data());
  for (double& v : out) v *= c;
  return unary_op("scale", a, std::move(out),
                  [c](const Tensor& g, const Tensor&, const std::vector<Tensor>&,
                      const std::vector<char>&) { return one_grad(scale(g, c)); });
}

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.data());
  for (double& v : out) v += c;
  return unary_op("add_scalar", a, std::move(out),
                  [](const Tensor& g, const Tensor&, const std::vector<Tensor>&,
                     const std::vector<char>&) { return one_grad(g); });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor relu(const Tensor& a) { return lrelu(a, 0.0); }

Tensor lrelu(const Tensor& a, double slope) {
  const auto& ad = a.data();
  std::vector<double> out(ad.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = ad[i] >= 0.0 ? ad[i] : slope * ad[i];
  return unary_op("lrelu", a, std::move(out),
                  [slope](const Tensor& g, const Tensor&, const std::vector<Tensor>& in,
                          const std::vector<char>&) {
                    const auto& x = in[0].data();
                    std::vector<double> m(x.size());
                    for (size_t i = 0; i < m.size(); ++i) m[i] = x[i] >= 0.0 ? 1.0 : slope;
                    return one_grad(mul(g, Tensor::from_data(in[0].shape(), std::move(m))));
                  });
}

Tensor sigmoid(const Tensor& a) {
  const auto& ad = a.data();
  std::vector<double> out(ad.size());
  for (size_t i = 0; i < out.size(); ++i) {
    const double x = ad[i];
    out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                      : std::exp(x) / (1.0 + std::exp(x));
  }
  return unary_op("sigmoid", a, std::move(out),
                  [](const Tensor& g, const Tensor& self, const std::vector<Tensor>&,
                     const std::vector<char>&) {
                    Tensor one_minus = add_scalar(neg(self), 1.0);
                    return one_grad(mul(mul(g, self), one_minus));
                  });
}

Tensor softplus(const Tensor& a) {
  const auto& ad = a.data();
  std::vector<double> out(ad.size());
  for (size_t i = 0; i < out.size(); ++i) {
    const double x = ad[i];
    out[i] = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  }
  return unary_op("softplus", a, std::move(out),
                  [](const Tensor& g, const Tensor&, const std::vector<Tensor>& in,
                     const std::vector<char>&) { return one_grad(mul(g, sigmoid(in[0]))); });
}

Tensor exp(const Tensor& a) {
  const auto& ad = a.data();
  std::vector<double> out(ad.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::exp(ad[i]);
  return unary_op("exp", a, std::move(out),
                  [](const Tensor& g, const Tensor& self, const std::vector<Tensor>&,
                     const std::vector<char>&) { return one_grad(mul(g, self)); });
}

Tensor log(const Tensor& a) {
  const auto& ad = a.data();
  std::vector<double> out(ad.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::log(ad[i]);
  return unary_op("log", a, std::move(out),
                  [](const Tensor& g, const Tensor&, const std::vector<Tensor>& in,
                     const std::vector<char>&) { return one_grad(div(g, in[0])); });
}

Tensor sqrt(const Tensor& a) {
  const auto& ad = a.data();
  std::vector<double> out(ad.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(ad[i]);
  return unary_op("sqrt", a, std::move(out),
                  [](const Tensor& g, const Tensor& self, const std::vector<Tensor>&,
                     const std::vector<char>&) { return one_grad(div(scale(g, 0.5), self)); });
}

Tensor clampv(const Tensor& a, double lo, double hi) {
  const auto& ad = a.data();
  std::vector<double> out(ad.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(ad[i], lo, hi);
  return unary_op("clamp", a, std::move(out),
                  [lo, hi](const Tensor& g, const Tensor&, const std::vector<Tensor>& in,
                           const std::vector<char>&) {
                    const auto& x = in[0].data();
                    std::vector<double> m(x.size());
                    for (size_t i = 0; i < m.size(); ++i)
                      m[i] = (x[i] >= lo && x[i] <= hi) ? 1.0 : 0.0;
                    return one_grad(mul(g, Tensor::from_data(in[0].shape(), std::move(m))));
                  });
}

// ---------------------------------------------------------------------------
// Reductions and broadcasts

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return Tensor::make_op("sum", {1}, {s}, {a},
                         [](const Tensor& g, const Tensor&, const std::vector<Tensor>& in,
                            const std::vector<char>&) {
                           return one_grad(broadcast_scalar(g, in[0].shape()));
                         });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

static void check_rank2(const char* op, const Tensor& a) {
  if (a.ndim() != 2)
    throw std::invalid_argument(std::string(op) + ": expected rank-2 tensor, got " +
                                shape_str(a.shape()));
}

Tensor row_sum(const Tensor& a) {
  check_rank2("row_sum", a);
  const int r = a.dim(0), c = a.dim(1);
  std::vector<double> out(static_cast<size_t>(r), 0.0);
  const auto& ad = a.data();
  for (int i = 0; i < r; ++i) {
    double s = 0.0;
    for (int j = 0; j < c; ++j) s += ad[static_cast<size_t>(i) * c + j];
    out[static_cast<size_t>(i)] = s;
  }
  return Tensor::make_op("row_sum", {r}, std::move(out), {a},
                         [c](const Tensor& g, const Tensor&, const std::vector<Tensor>&,
                             const std::vector<char>&) { return one_grad(broadcast_col(g, c)); });
}

Tensor col_sum(const Tensor& a) {
  check_rank2("col_sum", a);
  const int r = a.dim(0), c = a.dim(1);
  std::vector<double> out(static_cast<size_t>(c), 0.0);
  const auto& ad = a.data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[static_cast<size_t>(j)] += ad[static_cast<size_t>(i) * c + j];
  return Tensor::make_op("col_sum", {c}, std::move(out), {a},
                         [r](const Tensor& g, const Tensor&, const std::vector<Tensor>&,
                             const std::vector<char>&) { return one_grad(broadcast_row(g, r)); });
}

Tensor broadcast_row(const Tensor& v, int rows) {
  if (v.ndim() != 1) throw std::invalid_argument("broadcast_row: expected rank-1 tensor");
  const int c = v.dim(0);
  std::vector<double> out(static_cast<size_t>(rows) * c);
  const auto& vd = v.data();
  for (int i = 0; i < rows; ++i)
    std::copy(vd.begin(), vd.end(), out.begin() + static_cast<int64_t>(i) * c);
  return Tensor::make_op("broadcast_row", {rows, c}, std::move(out), {v},
                         [](const Tensor& g, const Tensor&, const std::vector<Tensor>&,
                            const std::vector<char>&) { return one_grad(col_sum(g)); });
}

Tensor broadcast_col(const Tensor& v, int cols) {
  if (v.ndim() != 1) throw std::invalid_argument("broadcast_col: expected rank-1 tensor");
  const int r = v.dim(0);
  std::vector<double> out(static_cast<size_t>(r) * cols);
  const auto& vd = v.data();
  for (int i = 0; i < r; ++i)
    std::fill_n(out.begin() + static_cast<int64_t>(i) * cols, cols, vd[static_cast<size_t>(i)]);
  return Tensor::make_op("broadcast_col", {r, cols}, std::move(out), {v},
                         [](const Tensor& g, const Tensor&, const std::vector<Tensor>&,
                            const std::vector<char>&) { return one_grad(row_sum(g)); });
}

Tensor broadcast_scalar(const Tensor& s, const Shape& shape) {
  if (s.size() != 1) throw std::invalid_argument("broadcast_scalar: source must be scalar");
  std::vector<double> out(static_cast<size_t>(shape_numel(shape)), s.at(0));
  return Tensor::make_op("broadcast_scalar", shape, std::move(out), {s},
                         [](const Tensor& g, const Tensor&, const std::vector<Tensor>&,
                            const std::vector<char>&) { return one_grad(sum(g)); });
}

Tensor broadcast_chan(const Tensor& v, int n, int h, int w) {
  if (v.ndim() != 1) throw std::invalid_argument("broadcast_chan: expected rank-1 tensor");
  const int c = v.dim(0);
  const int64_t hw = static_cast<int64_t>(h) * w;
  std::vector<double> out(static_cast<size_t>(n) * c * hw);
  const auto& vd = v.data();
  int64_t p = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) {
      std::fill_n(out.begin() + p, hw, vd[static_cast<size_t>(j)]);
      p += hw;
    }
  return Tensor::make_op("broadcast_chan", {n, c, h, w}, std::move(out), {v},
                         [](const Tensor& g, const Tensor&, const std::vector<Tensor>&,
                            const std::vector<char>&) { return one_grad(chan_sum(g)); });
}

Tensor chan_sum(const Tensor& a) {
  if (a.ndim() != 4) throw std::invalid_argument("chan_sum: expected rank-4 tensor");
  const int n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
  const int64_t hw = static_cast<int64_t>(h) * w;
  std::vector<double> out(static_cast<size_t>(c), 0.0);
  const auto& ad = a.data();
  int64_t p = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) {
      double s = 0.0;
      for (int64_t q = 0; q < hw; ++q) s += ad[static_cast<size_t>(p + q)];
      out[static_cast<size_t>(j)] += s;
      p += hw;
    }
  return Tensor::make_op("chan_sum", {c}, std::move(out), {a},
                         [n, h, w](const Tensor& g, const Tensor&, const std::vector<Tensor>&,
                                   const std::vector<char>&) {
                           return one_grad(broadcast_chan(g, n, h, w));
                         });
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (shape_numel(shape) != a.size())
    throw std::invalid_argument("reshape: size mismatch " + shape_str(a.shape()) + " -> " +
                                shape_str(shape));
  std::vector<double> out(a.data());
  return Tensor::make_op("reshape", shape, std::move(out), {a},
                         [](const Tensor& g, const Tensor&, const std::vector<Tensor>& in,
                            const std::vector<char>&) {
                           return one_grad(reshape(g, in[0].shape()));
                         });
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor transpose2d(const Tensor& a) {
  check_rank2("transpose2d", a);
  const int m = a.dim(0), n = a.dim(1);
  std::vector<double> out(static_cast<size_t>(m) * n);
  const auto& ad = a.data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<size_t>(j) * m + i] = ad[static_cast<size_t>(i) * n + j];
  return Tensor::make_op("transpose2d", {n, m}, std::move(out), {a},
                         [](const Tensor& g, const Tensor&, const std::vector<Tensor>&,
                            const std::vector<char>&) { return one_grad(transpose2d(g)); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_rank2("matmul", a);
  check_rank2("matmul", b);
  if (a.dim(1) != b.dim(0))
    throw std::invalid_argument("matmul: inner axes differ, " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(static_cast<size_t>(m) * n);
  gemm_nn(m, k, n, a.data().data(), b.data().data(), out.data(), false);
  return Tensor::make_op(
      "matmul", {m, n}, std::move(out), {a, b},
      [](const Tensor& g, const Tensor&, const std::vector<Tensor>& in,
         const std::vector<char>& need) -> std::vector<Tensor> {
        Tensor ga = need[0] ? matmul(g, transpose2d(in[1])) : Tensor();
        Tensor gb = need[1] ? matmul(transpose2d(in[0]), g) : Tensor();
        return {ga, gb};
      });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1))
    throw std::invalid_argument("bmm: incompatible shapes " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  const int bsz = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  std::vector<double> out(static_cast<size_t>(bsz) * m * n);
  for (int i = 0; i < bsz; ++i)
    gemm_nn(m, k, n, a.data().data() + static_cast<int64_t>(i) * m * k,
            b.data().data() + static_cast<int64_t>(i) * k * n,
            out.data() + static_cast<int64_t>(i) * m * n, false);
  return Tensor::make_op(
      "bmm", {bsz, m, n}, std::move(out), {a, b},
      [](const Tensor& g, const Tensor&, const std::vector<Tensor>& in,
         const std::vector<char>& need) -> std::vector<Tensor> {
        Tensor ga = need[0] ? bmm(g, transpose_bmm(in[1])) : Tensor();
        Tensor gb = need[1] ? bmm(transpose_bmm(in[0]), g) : Tensor();
        return {ga, gb};
      });
}

Tensor transpose_bmm(const Tensor& a) {
  if (a.ndim() != 3) throw std::invalid_argument("transpose_bmm: expected rank-3 tensor");
  const int bsz = a.dim(0), m = a.dim(1), n = a.dim(2);
  std::vector<double> out(static_cast<size_t>(bsz) * m * n);
  const auto& ad = a.data();
  for (int i = 0; i < bsz; ++i) {
    const double* src = ad.data() + static_cast<int64_t>(i) * m * n;
    double* dst = out.data() + static_cast<int64_t>(i) * m * n;
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < n; ++c) dst[static_cast<int64_t>(c) * m + r] = src[static_cast<int64_t>(r) * n + c];
  }
  return Tensor::make_op("transpose_bmm", {bsz, n, m}, std::move(out), {a},
                         [](const Tensor& g, const Tensor&, const std::vector<Tensor>&,
                            const std::vector<char>&) { return one_grad(transpose_bmm(g)); });
}

Tensor softmax_rows(const Tensor& a) {
  if (a.ndim() < 1) throw std::invalid_argument("softmax_rows: expected rank >= 1");
  const int c = a.dim(a.ndim() - 1);
  const int64_t rows = a.size() / c;
  std::vector<double> out(a.data().size());
  const auto& ad = a.data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* x = ad.data() + r * c;
    double* y = out.data() + r * c;
    double mx = x[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, x[j]);
    double s = 0.0;
    for (int j = 0; j < c; ++j) {
      y[j] = std::exp(x[j] - mx);
      s += y[j];
    }
    for (int j = 0; j < c; ++j) y[j] /= s;
  }
  const int rows_i = static_cast<int>(rows);
  return Tensor::make_op(
      "softmax_rows", a.shape(), std::move(out), {a},
      [rows_i, c](const Tensor& g, const Tensor& self, const std::vector<Tensor>&,
                  const std::vector<char>&) {
        // dx = y * (g - rowsum(g*y)), flattened to [R,C] then restored.
        Tensor g2 = reshape(g, {rows_i, c});
        Tensor y2 = reshape(self, {rows_i, c});
        Tensor dot = row_sum(mul(g2, y2));
        Tensor gx = mul(y2, sub(g2, broadcast_col(dot, c)));
        return one_grad(reshape(gx, self.shape()));
      });
}

// ---------------------------------------------------------------------------
// Convolution

namespace {

struct ConvDims {
  int n, c, h, w;       // input
  int f, kh, kw;        // filters
  int sh, sw, ph, pw;   // stride / pad
  int oh, ow;           // output
};

int out_extent(const char* op, const char* axis, int in, int k, int s, int p) {
  if (in + 2 * p < k)
    throw std::invalid_argument(std::string(op) + ": kernel " + std::to_string(k) +
                                " exceeds padded " + axis + " axis (" + std::to_string(in) +
                                " + 2*" + std::to_string(p) + ")");
  return (in + 2 * p - k) / s + 1;
}

ConvDims conv_dims(const char* op, const Shape& xs, const Shape& ws, int sh, int sw, int ph,
                   int pw) {
  if (xs.size() != 4) throw std::invalid_argument(std::string(op) + ": input must be N,C,H,W");
  if (ws.size() != 4) throw std::invalid_argument(std::string(op) + ": weight must be F,C,kh,kw");
  ConvDims d;
  d.n = xs[0]; d.c = xs[1]; d.h = xs[2]; d.w = xs[3];
  d.f = ws[0]; d.kh = ws[2]; d.kw = ws[3];
  if (ws[1] != d.c)
    throw std::invalid_argument(std::string(op) + ": channel axis mismatch, input C=" +
                                std::to_string(d.c) + " vs weight C=" + std::to_string(ws[1]));
  if (sh < 1 || sw < 1) throw std::invalid_argument(std::string(op) + ": stride must be >= 1");
  if (ph < 0 || pw < 0) throw std::invalid_argument(std::string(op) + ": negative padding");
  d.sh = sh; d.sw = sw; d.ph = ph; d.pw = pw;
  d.oh = out_extent(op, "height", d.h, d.kh, sh, ph);
  d.ow = out_extent(op, "width", d.w, d.kw, sw, pw);
  return d;
}

// Columns laid out [C*kh*kw, OH*OW] with k index (c, ki, kj) row-major, so a
// sequential-k GEMM accumulates in the same order as a (c, ki, kj) loop nest.
void im2col(const double* x, const ConvDims& d, double* cols) {
  const int p = d.oh * d.ow;
  for (int c = 0; c < d.c; ++c) {
    const double* xc = x + static_cast<int64_t>(c) * d.h * d.w;
    for (int ki = 0; ki < d.kh; ++ki)
      for (int kj = 0; kj < d.kw; ++kj) {
        double* row = cols + static_cast<int64_t>((c * d.kh + ki) * d.kw + kj) * p;
        for (int oh = 0; oh < d.oh; ++oh) {
          const int ih = oh * d.sh - d.ph + ki;
          double* dst = row + static_cast<int64_t>(oh) * d.ow;
          if (ih < 0 || ih >= d.h) {
            std::fill(dst, dst + d.ow, 0.0);
            continue;
          }
          const double* src = xc + static_cast<int64_t>(ih) * d.w;
          for (int ow = 0; ow < d.ow; ++ow) {
            const int iw = ow * d.sw - d.pw + kj;
            dst[ow] = (iw >= 0 && iw < d.w) ? src[iw] : 0.0;
          }
        }
      }
  }
}

void col2im_add(const double* cols, const ConvDims& d, double* x) {
  const int p = d.oh * d.ow;
  for (int c = 0; c < d.c; ++c) {
    double* xc = x + static_cast<int64_t>(c) * d.h * d.w;
    for (int ki = 0; ki < d.kh; ++ki)
      for (int kj = 0; kj < d.kw; ++kj) {
        const double* row = cols + static_cast<int64_t>((c * d.kh + ki) * d.kw + kj) * p;
        for (int oh = 0; oh < d.oh; ++oh) {
          const int ih = oh * d.sh - d.ph + ki;
          if (ih < 0 || ih >= d.h) continue;
          const double* src = row + static_cast<int64_t>(oh) * d.ow;
          double* dst = xc + static_cast<int64_t>(ih) * d.w;
          for (int ow = 0; ow < d.ow; ++ow) {
            const int iw = ow * d.sw - d.pw + kj;
            if (iw >= 0 && iw < d.w) dst[iw] += src[ow];
          }
        }
      }
  }
}

std::vector<double>& conv_scratch() {
  thread_local std::vector<double> buf;
  return buf;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, int sh, int sw, int ph, int pw) {
  ConvDims d = conv_dims("conv2d", x.shape(), w.shape(), sh, sw, ph, pw);
  const int k = d.c * d.kh * d.kw;
  const int p = d.oh * d.ow;
  std::vector<double> out(static_cast<size_t>(d.n) * d.f * p);
  auto& cols = conv_scratch();
  cols.resize(static_cast<size_t>(k) * p);
  for (int i = 0; i < d.n; ++i) {
    im2col(x.data().data() + static_cast<int64_t>(i) * d.c * d.h * d.w, d, cols.data());
    gemm_nn(d.f, k, p, w.data().data(), cols.data(),
            out.data() + static_cast<int64_t>(i) * d.f * p, false);
  }
  const int in_h = d.h, in_w = d.w, kh = d.kh, kw = d.kw;
  return Tensor::make_op(
      "conv2d", {d.n, d.f, d.oh, d.ow}, std::move(out), {x, w},
      [sh, sw, ph, pw, in_h, in_w, kh, kw](const Tensor& g, const Tensor&,
                                           const std::vector<Tensor>& in,
                                           const std::vector<char>& need) -> std::vector<Tensor> {
        Tensor gx = need[0] ? conv2d_input_grad(g, in[1], sh, sw, ph, pw, in_h, in_w) : Tensor();
        Tensor gw = need[1] ? conv2d_weight_grad(g, in[0], sh, sw, ph, pw, kh, kw) : Tensor();
        return {gx, gw};
      });
}

Tensor conv2d_input_grad(const Tensor& gy, const Tensor& w, int sh, int sw, int ph, int pw,
                         int in_h, int in_w) {
  const Shape& ws = w.shape();
  Shape xs = {gy.dim(0), ws[1], in_h, in_w};
  ConvDims d = conv_dims("conv2d_input_grad", xs, ws, sh, sw, ph, pw);
  if (gy.dim(1) != d.f || gy.dim(2) != d.oh || gy.dim(3) != d.ow)
    throw std::invalid_argument("conv2d_input_grad: upstream shape " + shape_str(gy.shape()) +
                                " does not match expected " +
                                shape_str({d.n, d.f, d.oh, d.ow}));
  const int k = d.c * d.kh * d.kw;
  const int p = d.oh * d.ow;
  std::vector<double> out(static_cast<size_t>(d.n) * d.c * d.h * d.w, 0.0);
  auto& cols = conv_scratch();
  cols.resize(static_cast<size_t>(k) * p);
  for (int i = 0; i < d.n; ++i) {
    gemm_tn(k, d.f, p, w.data().data(), gy.data().data() + static_cast<int64_t>(i) * d.f * p,
            cols.data(), false);
    col2im_add(cols.data(), d, out.data() + static_cast<int64_t>(i) * d.c * d.h * d.w);
  }
  return Tensor::make_op(
      "conv2d_input_grad", xs, std::move(out), {gy, w},
      [sh, sw, ph, pw](const Tensor& u, const Tensor&, const std::vector<Tensor>& in,
                       const std::vector<char>& need) -> std::vector<Tensor> {
        // Both slots follow from bilinearity of conv in (x, w).
        const Shape& ws2 = in[1].shape();
        Tensor ggy = need[0] ? conv2d(u, in[1], sh, sw, ph, pw) : Tensor();
        Tensor gw = need[1] ? conv2d_weight_grad(in[0], u, sh, sw, ph, pw, ws2[2], ws2[3]) : Tensor();
        return {ggy, gw};
      });
}

Tensor conv2d_weight_grad(const Tensor& gy, const Tensor& x, int sh, int sw, int ph, int pw,
                          int kh, int kw) {
  Shape ws = {gy.dim(1), x.dim(1), kh, kw};
  ConvDims d = conv_dims("conv2d_weight_grad", x.shape(), ws, sh, sw, ph, pw);
  if (gy.dim(0) != d.n || gy.dim(2) != d.oh || gy.dim(3) != d.ow)
    throw std::invalid_argument("conv2d_weight_grad: upstream shape " + shape_str(gy.shape()) +
                                " does not match expected " +
                                shape_str({d.n, d.f, d.oh, d.ow}));
  const int k = d.c * d.kh * d.kw;
  const int p = d.oh * d.ow;
  std::vector<double> out(static_cast<size_t>(d.f) * k, 0.0);
  auto& cols = conv_scratch();
  cols.resize(static_cast<size_t>(k) * p);
  for (int i = 0; i < d.n; ++i) {
    im2col(x.data().data() + static_cast<int64_t>(i) * d.c * d.h * d.w, d, cols.data());
    gemm_nt(d.f, p, k, gy.data().data() + static_cast<int64_t>(i) * d.f * p, cols.data(),
            out.data(), true);
  }
  const int in_h = d.h, in_w = d.w;
  return Tensor::make_op(
      "conv2d_weight_grad", ws, std::move(out), {gy, x},
      [sh, sw, ph, pw, in_h, in_w](const Tensor& u, const Tensor&,
                                   const std::vector<Tensor>& in,
                                   const std::vector<char>& need) -> std::vector<Tensor> {
        Tensor ggy = need[0] ? conv2d(in[1], u, sh, sw, ph, pw) : Tensor();
        Tensor gx = need[1] ? conv2d_input_grad(in[0], u, sh, sw, ph, pw, in_h, in_w) : Tensor();
        return {ggy, gx};
      });
}

// ---------------------------------------------------------------------------
// Max pooling

namespace {

Tensor pool_gather(const Tensor& g, std::shared_ptr<std::vector<int64_t>> idx, Shape out_shape);

// Scatter-add of pooled gradients back to source positions; the linear adjoint
// of the gather defined by `idx`.
Tensor pool_scatter(const Tensor& g, std::shared_ptr<std::vector<int64_t>> idx,
                    Shape src_shape) {
  std::vector<double> out(static_cast<size_t>(shape_numel(src_shape)), 0.0);
  const auto& gd = g.data();
  for (size_t i = 0; i < gd.size(); ++i) out[static_cast<size_t>((*idx)[i])] += gd[i];
  Shape g_shape = g.shape();
  return Tensor::make_op(
      "max_pool3d_scatter", std::move(src_shape), std::move(out), {g},
      [idx, g_shape](const Tensor& u, const Tensor&, const std::vector<Tensor>&,
                     const std::vector<char>&) { return one_grad(pool_gather(u, idx, g_shape)); });
}

Tensor pool_gather(const Tensor& g, std::shared_ptr<std::vector<int64_t>> idx, Shape out_shape) {
  std::vector<double> out(idx->size());
  const auto& gd = g.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = gd[static_cast<size_t>((*idx)[i])];
  Shape g_shape = g.shape();
  return Tensor::make_op(
      "max_pool3d_gather", std::move(out_shape), std::move(out), {g},
      [idx, g_shape](const Tensor& u, const Tensor&, const std::vector<Tensor>&,
                     const std::vector<char>&) { return one_grad(pool_scatter(u, idx, g_shape)); });
}

}  // namespace

Tensor max_pool3d(const Tensor& x, int kc, int kh, int kw, int sc, int sh, int sw, int pc,
                  int ph, int pw) {
  if (x.ndim() != 4) throw std::invalid_argument("max_pool3d: input must be N,C,H,W");
  if (pc >= kc || ph >= kh || pw >= kw)
    throw std::invalid_argument("max_pool3d: padding must stay below kernel size");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oc = out_extent("max_pool3d", "channel", c, kc, sc, pc);
  const int oh = out_extent("max_pool3d", "height", h, kh, sh, ph);
  const int ow = out_extent("max_pool3d", "width", w, kw, sw, pw);
  std::vector<double> out(static_cast<size_t>(n) * oc * oh * ow);
  auto idx = std::make_shared<std::vector<int64_t>>(out.size());
  const auto& xd = x.data();
  size_t o = 0;
  for (int i = 0; i < n; ++i) {
    const int64_t base_n = static_cast<int64_t>(i) * c * h * w;
    for (int ocidx = 0; ocidx < oc; ++ocidx)
      for (int ohidx = 0; ohidx < oh; ++ohidx)
        for (int owidx = 0; owidx < ow; ++owidx) {
          double best = -std::numeric_limits<double>::infinity();
          int64_t best_i = -1;
          for (int dc = 0; dc < kc; ++dc) {
            const int ci = ocidx * sc - pc + dc;
            if (ci < 0 || ci >= c) continue;
            for (int dh = 0; dh < kh; ++dh) {
              const int hi = ohidx * sh - ph + dh;
              if (hi < 0 || hi >= h) continue;
              for (int dw = 0; dw < kw; ++dw) {
                const int wi = owidx * sw - pw + dw;
                if (wi < 0 || wi >= w) continue;
                const int64_t src = base_n + (static_cast<int64_t>(ci) * h + hi) * w + wi;
                if (xd[static_cast<size_t>(src)] > best) {
                  best = xd[static_cast<size_t>(src)];
                  best_i = src;
                }
              }
            }
          }
          out[o] = best;
          (*idx)[o] = best_i;
          ++o;
        }
  }
  Shape src_shape = x.shape();
  return Tensor::make_op(
      "max_pool3d", {n, oc, oh, ow}, std::move(out), {x},
      [idx, src_shape](const Tensor& g, const Tensor&, const std::vector<Tensor>&,
                       const std::vector<char>&) { return one_grad(pool_scatter(g, idx, src_shape)); });
}

// ---------------------------------------------------------------------------
// Composites

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  check_rank2("dense", x);
  check_rank2("dense", w);
  if (x.dim(1) != w.dim(1))
    throw std::invalid_argument("dense: input axis " + std::to_string(x.dim(1)) +
                                " vs weight input axis " + std::to_string(w.dim(1)));
  if (b.ndim() != 1 || b.dim(0) != w.dim(0))
    throw std::invalid_argument("dense: bias axis does not match output axis");
  return add(matmul(x, transpose2d(w)), broadcast_row(b, x.dim(0)));
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  Tensor x2 = x;
  bool was_vec = false;
  if (x.ndim() == 1) {
    x2 = reshape(x, {1, x.dim(0)});
    was_vec = true;
  }
  check_rank2("layer_norm", x2);
  const int n = x2.dim(0), d = x2.dim(1);
  if (gain.ndim() != 1 || gain.dim(0) != d || bias.ndim() != 1 || bias.dim(0) != d)
    throw std::invalid_argument("layer_norm: gain/bias must have extent " + std::to_string(d));
  Tensor mu = scale(row_sum(x2), 1.0 / d);
  Tensor xc = sub(x2, broadcast_col(mu, d));
  Tensor var = scale(row_sum(mul(xc, xc)), 1.0 / d);
  Tensor inv = div(Tensor::full({n}, 1.0), sqrt(add_scalar(var, eps)));
  Tensor xhat = mul(xc, broadcast_col(inv, d));
  Tensor out = add(mul(xhat, broadcast_row(gain, n)), broadcast_row(bias, n));
  return was_vec ? reshape(out, {d}) : out;
}

// ---------------------------------------------------------------------------
// Finite differences

double grad_check_coords(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                         double step, const std::vector<int64_t>& coords) {
  Tensor xg = Tensor::from_data(x.shape(), x.data(), /*requires_grad=*/true);
  Tensor y = f(xg);
  if (y.size() != 1) throw std::invalid_argument("grad_check: f must be scalar-valued");
  Tensor analytic = grad_of(y, {xg})[0];

  double worst = 0.0;
  NoGradGuard ng;
  for (int64_t ci : coords) {
    std::vector<double> d = x.data();
    d[static_cast<size_t>(ci)] += step;
    const double up = f(Tensor::from_data(x.shape(), d)).item();
    d[static_cast<size_t>(ci)] -= 2.0 * step;
    const double dn = f(Tensor::from_data(x.shape(), d)).item();
    const double numeric = (up - dn) / (2.0 * step);
    const double a = analytic.at(ci);
    const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double step) {
  std::vector<int64_t> coords(static_cast<size_t>(x.size()));
  for (int64_t i = 0; i < x.size(); ++i) coords[static_cast<size_t>(i)] = i;
  return grad_check_coords(f, x, step, coords);
}

}  // namespace mimic
