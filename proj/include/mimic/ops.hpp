#pragma once

#include <functional>

#include "mimic/tensor.hpp"

namespace mimic {

// Elementwise (shapes must match exactly; no implicit broadcasting).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);

Tensor relu(const Tensor& a);
Tensor lrelu(const Tensor& a, double slope);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor clampv(const Tensor& a, double lo, double hi);

// Reductions and broadcasts.
Tensor sum(const Tensor& a);   // -> [1]
Tensor mean(const Tensor& a);  // -> [1]
Tensor row_sum(const Tensor& a);                    // [R,C] -> [R]
Tensor col_sum(const Tensor& a);                    // [R,C] -> [C]
Tensor broadcast_row(const Tensor& v, int rows);    // [C] -> [R,C]
Tensor broadcast_col(const Tensor& v, int cols);    // [R] -> [R,C]
Tensor broadcast_scalar(const Tensor& s, const Shape& shape);
Tensor broadcast_chan(const Tensor& v, int n, int h, int w);  // [C] -> [N,C,H,W]
Tensor chan_sum(const Tensor& a);                   // [N,C,H,W] -> [C]

Tensor reshape(const Tensor& a, const Shape& shape);

// Linear algebra.
Tensor transpose2d(const Tensor& a);                   // [M,N] -> [N,M]
Tensor matmul(const Tensor& a, const Tensor& b);       // [M,K]x[K,N] -> [M,N]
Tensor bmm(const Tensor& a, const Tensor& b);          // [B,M,K]x[B,K,N] -> [B,M,N]
Tensor transpose_bmm(const Tensor& a);                 // [B,M,N] -> [B,N,M]

// Softmax over the last axis with per-row max subtraction.
Tensor softmax_rows(const Tensor& a);

// Convolution (cross-correlation) over NCHW tensors, zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, int sh, int sw, int ph, int pw);
// Adjoints of conv2d; differentiable themselves so gradient-of-gradient
// expressions (gradient penalty) stay inside the graph.
Tensor conv2d_input_grad(const Tensor& gy, const Tensor& w, int sh, int sw, int ph,
                         int pw, int in_h, int in_w);
Tensor conv2d_weight_grad(const Tensor& gy, const Tensor& x, int sh, int sw, int ph,
                          int pw, int kh, int kw);

// Max pooling over the (channel, height, width) axes of an NCHW tensor.
// Padding behaves as minus infinity: it never wins a window.
Tensor max_pool3d(const Tensor& x, int kc, int kh, int kw, int sc, int sh, int sw,
                  int pc, int ph, int pw);

// Composites.
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b);  // [N,I]x[O,I]+[O]
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);

// Max over coordinates of |analytic - numeric| / max(1e-8, |analytic|+|numeric|)
// with central finite differences of step `step`.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                  double step);
// Same, restricted to the given flat coordinates of x.
double grad_check_coords(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                         double step, const std::vector<int64_t>& coords);

}  // namespace mimic
