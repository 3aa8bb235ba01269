#include <algorithm>
#include <cmath>

#include "warpgrad/error.hpp"
#include "warpgrad/ops.hpp"

namespace wg {

namespace {

// Row-major strides for a shape.
std::vector<int> strides_of(const std::vector<int>& shape) {
  std::vector<int> s(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) {
    s[static_cast<size_t>(i)] = s[static_cast<size_t>(i + 1)] * shape[static_cast<size_t>(i + 1)];
  }
  return s;
}

void check_axis(const Tensor& x, int axis, const char* op) {
  if (axis < 0 || axis >= x.rank()) {
    throw ContractError(std::string(op) + ": axis " + std::to_string(axis) +
                        " out of range for shape " + x.shape_str());
  }
}

}  // namespace

Var matmul(Var a, Var b, bool transpose_a, bool transpose_b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2) {
    throw ShapeError("matmul expects rank-2 tensors, got " + av.shape_str() +
                     " and " + bv.shape_str());
  }
  const int m = transpose_a ? av.dim(1) : av.dim(0);
  const int k = transpose_a ? av.dim(0) : av.dim(1);
  const int kb = transpose_b ? bv.dim(1) : bv.dim(0);
  const int n = transpose_b ? bv.dim(0) : bv.dim(1);
  if (k != kb) {
    throw ShapeError("matmul inner dimension mismatch: " + av.shape_str() +
                     (transpose_a ? "^T" : "") + " x " + bv.shape_str() +
                     (transpose_b ? "^T" : ""));
  }
  auto at = [&](int i, int j) { return transpose_a ? av.at2(j, i) : av.at2(i, j); };
  auto bt = [&](int i, int j) { return transpose_b ? bv.at2(j, i) : bv.at2(i, j); };
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double av_ip = at(i, p);
      if (av_ip == 0.0) continue;
      for (int j = 0; j < n; ++j) out.at2(i, j) += av_ip * bt(p, j);
    }
  }
  return a.tape->emit(
      "matmul", std::move(out), {a, b},
      [ia = a.id, ib = b.id, transpose_a, transpose_b, m, n, k](Tape& t, const Tensor& g) {
        const Tensor& av = t.value(Var{&t, ia});
        const Tensor& bv = t.value(Var{&t, ib});
        Tensor ga(av.shape()), gb(bv.shape());
        // dA = G B^T (layouts adjusted for the transpose flags), dB = A^T G.
        for (int i = 0; i < m; ++i) {
          for (int p = 0; p < k; ++p) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) {
              const double bvpj = transpose_b ? bv.at2(j, p) : bv.at2(p, j);
              acc += g.at2(i, j) * bvpj;
            }
            if (transpose_a) ga.at2(p, i) += acc; else ga.at2(i, p) += acc;
          }
        }
        for (int p = 0; p < k; ++p) {
          for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int i = 0; i < m; ++i) {
              const double avip = transpose_a ? av.at2(p, i) : av.at2(i, p);
              acc += avip * g.at2(i, j);
            }
            if (transpose_b) gb.at2(j, p) += acc; else gb.at2(p, j) += acc;
          }
        }
        t.accumulate_grad(ia, std::move(ga));
        t.accumulate_grad(ib, std::move(gb));
      });
}

Var reshape(Var x, std::vector<int> shape) {
  const Tensor& xv = x.value();
  if (Tensor::product(shape) != xv.numel()) {
    throw ShapeError("reshape from " + xv.shape_str() + " to " +
                     Tensor::shape_str(shape) + " changes element count");
  }
  Tensor out(shape, std::vector<double>(xv.data(), xv.data() + xv.numel()));
  return x.tape->emit("reshape", std::move(out), {x},
                      [ix = x.id](Tape& t, const Tensor& g) {
                        const Tensor& xv = t.value(Var{&t, ix});
                        Tensor gx(xv.shape(),
                                  std::vector<double>(g.data(), g.data() + g.numel()));
                        t.accumulate_grad(ix, std::move(gx));
                      });
}

Var concat(const std::vector<Var>& xs, int axis) {
  if (xs.empty()) throw ContractError("concat of zero tensors");
  Tape* tape = xs[0].tape;
  const Tensor& first = xs[0].value();
  check_axis(first, axis, "concat");
  std::vector<int> out_shape = first.shape();
  for (size_t i = 1; i < xs.size(); ++i) {
    const Tensor& v = xs[i].value();
    if (v.rank() != first.rank()) {
      throw ShapeError("concat rank mismatch: " + first.shape_str() + " vs " +
                       v.shape_str());
    }
    for (int d = 0; d < v.rank(); ++d) {
      if (d == axis) continue;
      if (v.dim(d) != first.dim(d)) {
        throw ShapeError("concat shape mismatch off-axis: " + first.shape_str() +
                         " vs " + v.shape_str());
      }
    }
    out_shape[static_cast<size_t>(axis)] += v.dim(axis);
  }

  // outer = product of dims before axis, inner = product after.
  int outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= first.dim(d);
  for (int d = axis + 1; d < first.rank(); ++d) inner *= first.dim(d);

  Tensor out(out_shape);
  const int out_axis = out_shape[static_cast<size_t>(axis)];
  std::vector<int> axis_sizes, axis_offsets;
  {
    int off = 0;
    for (const Var& v : xs) {
      axis_sizes.push_back(v.value().dim(axis));
      axis_offsets.push_back(off);
      off += axis_sizes.back();
    }
  }
  for (size_t part = 0; part < xs.size(); ++part) {
    const Tensor& v = xs[part].value();
    const int asz = axis_sizes[part];
    const int aoff = axis_offsets[part];
    for (int o = 0; o < outer; ++o) {
      const double* src = v.data() + static_cast<size_t>(o) * asz * inner;
      double* dst = out.data() + (static_cast<size_t>(o) * out_axis + aoff) * inner;
      std::copy(src, src + static_cast<size_t>(asz) * inner, dst);
    }
  }

  std::vector<int> ids;
  for (const Var& v : xs) ids.push_back(v.id);
  return tape->emit(
      "concat", std::move(out), xs,
      [ids, axis_sizes, axis_offsets, outer, inner, out_axis](Tape& t, const Tensor& g) {
        for (size_t part = 0; part < ids.size(); ++part) {
          const Tensor& v = t.value(Var{&t, ids[part]});
          Tensor gx(v.shape());
          const int asz = axis_sizes[part];
          const int aoff = axis_offsets[part];
          for (int o = 0; o < outer; ++o) {
            const double* src = g.data() + (static_cast<size_t>(o) * out_axis + aoff) * inner;
            double* dst = gx.data() + static_cast<size_t>(o) * asz * inner;
            std::copy(src, src + static_cast<size_t>(asz) * inner, dst);
          }
          t.accumulate_grad(ids[part], std::move(gx));
        }
      });
}

Var slice(Var x, const std::vector<int>& starts, const std::vector<int>& sizes) {
  const Tensor& xv = x.value();
  const int r = xv.rank();
  if (static_cast<int>(starts.size()) != r || static_cast<int>(sizes.size()) != r) {
    throw ContractError("slice: starts/sizes must match tensor rank " +
                        std::to_string(r));
  }
  for (int d = 0; d < r; ++d) {
    if (starts[static_cast<size_t>(d)] < 0 || sizes[static_cast<size_t>(d)] < 1 ||
        starts[static_cast<size_t>(d)] + sizes[static_cast<size_t>(d)] > xv.dim(d)) {
      throw ContractError("slice out of range at axis " + std::to_string(d) +
                          " for shape " + xv.shape_str());
    }
  }
  Tensor out(sizes);
  const auto in_strides = strides_of(xv.shape());
  const auto out_strides = strides_of(sizes);
  const int m = out.numel();
  for (int i = 0; i < m; ++i) {
    int rem = i, src = 0;
    for (int d = 0; d < r; ++d) {
      const int id = rem / out_strides[static_cast<size_t>(d)];
      rem -= id * out_strides[static_cast<size_t>(d)];
      src += (starts[static_cast<size_t>(d)] + id) * in_strides[static_cast<size_t>(d)];
    }
    out[i] = xv[src];
  }
  return x.tape->emit(
      "slice", std::move(out), {x},
      [ix = x.id, starts, in_strides, out_strides, r](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(Var{&t, ix});
        Tensor gx(xv.shape());
        const int m = g.numel();
        for (int i = 0; i < m; ++i) {
          int rem = i, dst = 0;
          for (int d = 0; d < r; ++d) {
            const int id = rem / out_strides[static_cast<size_t>(d)];
            rem -= id * out_strides[static_cast<size_t>(d)];
            dst += (starts[static_cast<size_t>(d)] + id) * in_strides[static_cast<size_t>(d)];
          }
          gx[dst] = g[i];
        }
        t.accumulate_grad(ix, std::move(gx));
      });
}

namespace {

// Shared reduce machinery for sum/mean. Reduced axes are removed from the
// shape; reducing everything yields [1].
struct ReducePlan {
  std::vector<int> out_shape;
  std::vector<int> in_strides;
  std::vector<int> kept_axes;
  std::vector<int> red_axes;
  int red_count = 1;
};

ReducePlan plan_reduce(const Tensor& x, std::vector<int> axes, const char* op) {
  ReducePlan p;
  if (axes.empty()) {
    for (int d = 0; d < x.rank(); ++d) axes.push_back(d);
  }
  std::sort(axes.begin(), axes.end());
  for (size_t i = 0; i < axes.size(); ++i) {
    check_axis(x, axes[i], op);
    if (i > 0 && axes[i] == axes[i - 1]) {
      throw ContractError(std::string(op) + ": duplicate axis " + std::to_string(axes[i]));
    }
  }
  p.in_strides = strides_of(x.shape());
  size_t ai = 0;
  for (int d = 0; d < x.rank(); ++d) {
    if (ai < axes.size() && axes[ai] == d) {
      p.red_axes.push_back(d);
      p.red_count *= x.dim(d);
      ++ai;
    } else {
      p.kept_axes.push_back(d);
      p.out_shape.push_back(x.dim(d));
    }
  }
  if (p.out_shape.empty()) p.out_shape = {1};
  return p;
}

Var reduce_impl(Var x, std::vector<int> axes, bool take_mean, const char* name) {
  const Tensor& xv = x.value();
  ReducePlan p = plan_reduce(xv, std::move(axes), name);
  Tensor out(p.out_shape);

  // Enumerate kept-index combinations, then reduced combinations inside.
  const int out_n = out.numel();
  std::vector<int> kept_dims, red_dims;
  for (int d : p.kept_axes) kept_dims.push_back(xv.dim(d));
  for (int d : p.red_axes) red_dims.push_back(xv.dim(d));

  auto base_offset = [&](int out_idx) {
    int rem = out_idx, off = 0;
    for (int i = static_cast<int>(kept_dims.size()) - 1; i >= 0; --i) {
      const int id = rem % kept_dims[static_cast<size_t>(i)];
      rem /= kept_dims[static_cast<size_t>(i)];
      off += id * p.in_strides[static_cast<size_t>(p.kept_axes[static_cast<size_t>(i)])];
    }
    return off;
  };
  auto red_offset = [&](int red_idx) {
    int rem = red_idx, off = 0;
    for (int i = static_cast<int>(red_dims.size()) - 1; i >= 0; --i) {
      const int id = rem % red_dims[static_cast<size_t>(i)];
      rem /= red_dims[static_cast<size_t>(i)];
      off += id * p.in_strides[static_cast<size_t>(p.red_axes[static_cast<size_t>(i)])];
    }
    return off;
  };

  std::vector<int> red_offsets(static_cast<size_t>(p.red_count));
  for (int j = 0; j < p.red_count; ++j) red_offsets[static_cast<size_t>(j)] = red_offset(j);

  const double inv = take_mean ? 1.0 / p.red_count : 1.0;
  for (int i = 0; i < out_n; ++i) {
    const int base = base_offset(i);
    double acc = 0.0;
    for (int j = 0; j < p.red_count; ++j) acc += xv[base + red_offsets[static_cast<size_t>(j)]];
    out[i] = acc * inv;
  }

  std::vector<int> base_offsets(static_cast<size_t>(out_n));
  for (int i = 0; i < out_n; ++i) base_offsets[static_cast<size_t>(i)] = base_offset(i);

  return x.tape->emit(name, std::move(out), {x},
                      [ix = x.id, base_offsets, red_offsets, inv](Tape& t, const Tensor& g) {
                        const Tensor& xv = t.value(Var{&t, ix});
                        Tensor gx(xv.shape());
                        for (size_t i = 0; i < base_offsets.size(); ++i) {
                          const double gv = g[static_cast<int>(i)] * inv;
                          const int base = base_offsets[i];
                          for (int off : red_offsets) gx[base + off] += gv;
                        }
                        t.accumulate_grad(ix, std::move(gx));
                      });
}

}  // namespace

Var sum(Var x, std::vector<int> axes) { return reduce_impl(x, std::move(axes), false, "sum"); }
Var mean(Var x, std::vector<int> axes) { return reduce_impl(x, std::move(axes), true, "mean"); }

Var softmax(Var x, int axis) {
  const Tensor& xv = x.value();
  check_axis(xv, axis, "softmax");
  const auto strides = strides_of(xv.shape());
  const int n = xv.dim(axis);
  const int stride = strides[static_cast<size_t>(axis)];
  int outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= xv.dim(d);
  for (int d = axis + 1; d < xv.rank(); ++d) inner *= xv.dim(d);

  Tensor out(xv.shape());
  for (int o = 0; o < outer; ++o) {
    for (int in = 0; in < inner; ++in) {
      const int base = o * n * stride + in;
      double mx = xv[base];
      for (int j = 1; j < n; ++j) mx = std::max(mx, xv[base + j * stride]);
      double z = 0.0;
      for (int j = 0; j < n; ++j) {
        const double e = std::exp(xv[base + j * stride] - mx);
        out[base + j * stride] = e;
        z += e;
      }
      const double invz = 1.0 / z;
      for (int j = 0; j < n; ++j) out[base + j * stride] *= invz;
    }
  }
  std::vector<double> saved(out.data(), out.data() + out.numel());
  return x.tape->emit("softmax", std::move(out), {x},
                      [ix = x.id, saved, outer, inner, n, stride](Tape& t, const Tensor& g) {
                        const Tensor& xv = t.value(Var{&t, ix});
                        Tensor gx(xv.shape());
                        for (int o = 0; o < outer; ++o) {
                          for (int in = 0; in < inner; ++in) {
                            const int base = o * n * stride + in;
                            double dot = 0.0;
                            for (int j = 0; j < n; ++j) {
                              dot += g[base + j * stride] * saved[static_cast<size_t>(base + j * stride)];
                            }
                            for (int j = 0; j < n; ++j) {
                              const double y = saved[static_cast<size_t>(base + j * stride)];
                              gx[base + j * stride] = y * (g[base + j * stride] - dot);
                            }
                          }
                        }
                        t.accumulate_grad(ix, std::move(gx));
                      });
}

namespace {

// Normalizes `count` entries found at base + k*stride-ish layouts. The two
// norm ops below differ only in how groups are enumerated, so share the math.
// Denominator is sigma (biased std) with the small-sigma guard sigma+eps.
struct NormGroup {
  std::vector<int> offsets;  // element offsets of this group
};

Var norm_over_groups(Var x, std::vector<NormGroup> groups, double eps, const char* name) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  std::vector<double> denoms(groups.size());
  std::vector<double> means(groups.size());
  for (size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& off = groups[gi].offsets;
    const double inv_n = 1.0 / static_cast<double>(off.size());
    double mu = 0.0;
    for (int o : off) mu += xv[o];
    mu *= inv_n;
    double var = 0.0;
    for (int o : off) {
      const double d = xv[o] - mu;
      var += d * d;
    }
    var *= inv_n;
    double sigma = std::sqrt(var);
    const double denom = sigma < eps ? sigma + eps : sigma;
    for (int o : off) out[o] = (xv[o] - mu) / denom;
    denoms[gi] = denom;
    means[gi] = mu;
  }
  std::vector<double> saved(out.data(), out.data() + out.numel());
  return x.tape->emit(
      name, std::move(out), {x},
      [ix = x.id, groups = std::move(groups), denoms, saved](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(Var{&t, ix});
        Tensor gx(xv.shape());
        for (size_t gi = 0; gi < groups.size(); ++gi) {
          const auto& off = groups[gi].offsets;
          const double inv_n = 1.0 / static_cast<double>(off.size());
          const double denom = denoms[gi];
          double gbar = 0.0, gydot = 0.0;
          for (int o : off) {
            gbar += g[o];
            gydot += g[o] * saved[static_cast<size_t>(o)];
          }
          gbar *= inv_n;
          gydot *= inv_n;
          for (int o : off) {
            const double y = saved[static_cast<size_t>(o)];
            gx[o] = (g[o] - gbar - y * gydot) / denom;
          }
        }
        t.accumulate_grad(ix, std::move(gx));
      });
}

}  // namespace

Var instance_norm(Var x, double eps) {
  const Tensor& xv = x.value();
  if (xv.rank() < 2) {
    throw ShapeError("instance_norm expects rank >= 2, got " + xv.shape_str());
  }
  const int c = xv.dim(0);
  const int per = xv.numel() / c;
  if (per < 2) {
    throw ContractError("instance_norm needs at least 2 entries per channel");
  }
  std::vector<NormGroup> groups(static_cast<size_t>(c));
  for (int ch = 0; ch < c; ++ch) {
    auto& off = groups[static_cast<size_t>(ch)].offsets;
    off.resize(static_cast<size_t>(per));
    for (int i = 0; i < per; ++i) off[static_cast<size_t>(i)] = ch * per + i;
  }
  return norm_over_groups(x, std::move(groups), eps, "instance_norm");
}

Var layer_norm_all(Var x, double eps) {
  const Tensor& xv = x.value();
  if (xv.numel() < 2) {
    throw ContractError("layer_norm_all needs at least 2 entries");
  }
  std::vector<NormGroup> groups(1);
  groups[0].offsets.resize(static_cast<size_t>(xv.numel()));
  for (int i = 0; i < xv.numel(); ++i) groups[0].offsets[static_cast<size_t>(i)] = i;
  return norm_over_groups(x, std::move(groups), eps, "layer_norm");
}

Var channel_affine(Var x, Var gamma, Var beta) {
  const Tensor& xv = x.value();
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  const int c = xv.dim(0);
  if (gv.numel() != c || bv.numel() != c) {
    throw ShapeError("channel_affine: gamma/beta must have " + std::to_string(c) +
                     " entries, got " + gv.shape_str() + " and " + bv.shape_str());
  }
  const int per = xv.numel() / c;
  Tensor out(xv.shape());
  for (int ch = 0; ch < c; ++ch) {
    const double gm = gv[ch], bt = bv[ch];
    const double* src = xv.data() + static_cast<size_t>(ch) * per;
    double* dst = out.data() + static_cast<size_t>(ch) * per;
    for (int i = 0; i < per; ++i) dst[i] = src[i] * gm + bt;
  }
  return x.tape->emit(
      "channel_affine", std::move(out), {x, gamma, beta},
      [ix = x.id, ig = gamma.id, ib = beta.id, c, per](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(Var{&t, ix});
        const Tensor& gv = t.value(Var{&t, ig});
        Tensor gx(xv.shape()), gg(gv.shape()), gb(gv.shape());
        for (int ch = 0; ch < c; ++ch) {
          const double gm = gv[ch];
          const double* xs = xv.data() + static_cast<size_t>(ch) * per;
          const double* gs = g.data() + static_cast<size_t>(ch) * per;
          double* gxs = gx.data() + static_cast<size_t>(ch) * per;
          double acc_g = 0.0, acc_b = 0.0;
          for (int i = 0; i < per; ++i) {
            gxs[i] = gs[i] * gm;
            acc_g += gs[i] * xs[i];
            acc_b += gs[i];
          }
          gg[ch] = acc_g;
          gb[ch] = acc_b;
        }
        t.accumulate_grad(ix, std::move(gx));
        t.accumulate_grad(ig, std::move(gg));
        t.accumulate_grad(ib, std::move(gb));
      });
}

}  // namespace wg
