#pragma once

#include <vector>

#include "warpgrad/tape.hpp"

namespace wg {

// Behaviour for sample coordinates outside the source extent.
enum class Border { kZero, kClamp };

// ---- elementwise ----
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double c);       // c * x, c a plain constant
Var scalar_mul(Var x, Var s);     // s is shape [1]
Var scalar_add(Var x, Var s);     // s is shape [1]
Var leaky_relu(Var x, double slope = 0.2);
Var sigmoid(Var x);
Var tanh_act(Var x);
Var abs_val(Var x);
Var sqrt_val(Var x);
// log of x clamped into [1e-7, 1-1e-7]; used on discriminator probabilities.
Var log_guarded(Var x);

// ---- linear algebra / structure ----
Var matmul(Var a, Var b, bool transpose_a = false, bool transpose_b = false);
Var reshape(Var x, std::vector<int> shape);
Var concat(const std::vector<Var>& xs, int axis);
Var slice(Var x, const std::vector<int>& starts, const std::vector<int>& sizes);

// ---- reductions ----
Var sum(Var x, std::vector<int> axes = {});   // empty = all axes, result [1]
Var mean(Var x, std::vector<int> axes = {});
Var softmax(Var x, int axis);

// ---- normalization ----
// Per-channel (axis 0) normalization over the remaining axes, no affine.
Var instance_norm(Var x, double eps = 1e-8);
// Normalization over every entry of the tensor (one training case).
Var layer_norm_all(Var x, double eps = 1e-8);
// out[c,...] = x[c,...] * gamma[c] + beta[c]
Var channel_affine(Var x, Var gamma, Var beta);

// ---- convolution ----
// x: Cin x H x W, w: Cout x Cin x kH x kW, optional bias Cout (pass Var{}).
Var conv2d(Var x, Var w, Var bias, int stride, int padding);
// x: Cin x L, w: Cout x Cin x k, optional bias Cout.
Var conv1d(Var x, Var w, Var bias, int stride, int padding, int dilation = 1);

// ---- sampling ----
// x: C x H x W -> C x fH x fW, half-pixel-aligned bilinear interpolation.
Var bilinear_upsample(Var x, int factor);
// f: C x H x W, coords: 2 x H' x W' (channel 0 = x, channel 1 = y), output
// C x H' x W'. Differentiable wrt both f and coords.
Var bilinear_sample(Var f, Var coords, Border border = Border::kClamp);
// For every location of coords, the n x n unit-spaced patch of f centered
// there, each point bilinearly sampled. Output (C*n*n) x H' x W' with patch
// element (i,j) at channel c*n*n + i*n + j.
Var extract_patches(Var f, Var coords, int n, Border border = Border::kClamp);
// patches: (C*n2) x H x W, kernel: n2 x H x W ->  C x H x W weighted sum.
Var kernel_weighted_patch_sum(Var patches, Var kernel);
// (1 - m) * f_t + m * f_attn with m: 1 x H x W broadcast over channels.
// Throws ContractError when m leaves [0,1].
Var mask_blend(Var f_t, Var f_attn, Var m);

// ---- plain-tensor helpers shared with the oracles-free code paths ----
Tensor bilinear_sample_tensor(const Tensor& f, const Tensor& coords, Border border);
Tensor bilinear_upsample_tensor(const Tensor& x, int factor);

}  // namespace wg
