#include <algorithm>
#include <string>

#include "warpgrad/error.hpp"
#include "warpgrad/ops.hpp"

namespace wg {

namespace {

int out_extent(int in, int k_eff, int stride, int padding, const char* op) {
  const int padded = in + 2 * padding;
  if (k_eff > padded) {
    throw ShapeError(std::string(op) + ": kernel extent " + std::to_string(k_eff) +
                     " exceeds padded input " + std::to_string(padded));
  }
  return (padded - k_eff) / stride + 1;
}

// Valid output range [lo, hi) for which in = out*stride - padding + tap stays
// inside [0, in_size).
void valid_range(int tap, int stride, int padding, int in_size, int out_size,
                 int* lo, int* hi) {
  int l = 0;
  const int shift = tap - padding;
  if (shift < 0) l = (-shift + stride - 1) / stride;
  int h = out_size;
  // out*stride + shift <= in_size-1  =>  out <= (in_size-1-shift)/stride
  const int top = in_size - 1 - shift;
  if (top < 0) {
    h = 0;
  } else {
    h = std::min(h, top / stride + 1);
  }
  *lo = l;
  *hi = std::max(h, l);
}

}  // namespace

Var conv2d(Var x, Var w, Var bias, int stride, int padding) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (xv.rank() != 3 || wv.rank() != 4) {
    throw ShapeError("conv2d expects x rank 3 and w rank 4, got " + xv.shape_str() +
                     " and " + wv.shape_str());
  }
  if (stride < 1 || padding < 0) throw ContractError("conv2d: bad stride/padding");
  const int cin = xv.dim(0), h = xv.dim(1), win = xv.dim(2);
  const int cout = wv.dim(0), kcin = wv.dim(1), kh = wv.dim(2), kw = wv.dim(3);
  if (kcin != cin) {
    throw ShapeError("conv2d channel mismatch: x " + xv.shape_str() + " vs w " +
                     wv.shape_str());
  }
  const bool has_bias = bias.valid();
  if (has_bias && bias.value().numel() != cout) {
    throw ShapeError("conv2d bias must have " + std::to_string(cout) + " entries, got " +
                     bias.value().shape_str());
  }
  const int ho = out_extent(h, kh, stride, padding, "conv2d");
  const int wo = out_extent(win, kw, stride, padding, "conv2d");

  Tensor out({cout, ho, wo});
  for (int oc = 0; oc < cout; ++oc) {
    double* oplane = out.data() + static_cast<size_t>(oc) * ho * wo;
    if (has_bias) {
      const double b = bias.value()[oc];
      for (int i = 0; i < ho * wo; ++i) oplane[i] = b;
    }
    for (int ic = 0; ic < cin; ++ic) {
      const double* xplane = xv.data() + static_cast<size_t>(ic) * h * win;
      const double* wbase =
          wv.data() + (static_cast<size_t>(oc) * cin + ic) * kh * kw;
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          const double wval = wbase[ky * kw + kx];
          if (wval == 0.0) continue;
          int xlo, xhi, ylo, yhi;
          valid_range(kx, stride, padding, win, wo, &xlo, &xhi);
          valid_range(ky, stride, padding, h, ho, &ylo, &yhi);
          for (int oy = ylo; oy < yhi; ++oy) {
            const int iy = oy * stride - padding + ky;
            const double* xrow = xplane + static_cast<size_t>(iy) * win - padding + kx;
            double* orow = oplane + static_cast<size_t>(oy) * wo;
            for (int ox = xlo; ox < xhi; ++ox) {
              orow[ox] += wval * xrow[ox * stride];
            }
          }
        }
      }
    }
  }

  std::vector<Var> inputs = has_bias ? std::vector<Var>{x, w, bias}
                                     : std::vector<Var>{x, w};
  return x.tape->emit(
      "conv2d", std::move(out), inputs,
      [ix = x.id, iw = w.id, ibias = has_bias ? bias.id : -1, stride, padding, cin,
       cout, h, win, kh, kw, ho, wo](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(Var{&t, ix});
        const Tensor& wv = t.value(Var{&t, iw});
        Tensor gx(xv.shape());
        Tensor gw(wv.shape());
        for (int oc = 0; oc < cout; ++oc) {
          const double* gplane = g.data() + static_cast<size_t>(oc) * ho * wo;
          for (int ic = 0; ic < cin; ++ic) {
            const double* xplane = xv.data() + static_cast<size_t>(ic) * h * win;
            double* gxplane = gx.data() + static_cast<size_t>(ic) * h * win;
            const double* wbase = wv.data() + (static_cast<size_t>(oc) * cin + ic) * kh * kw;
            double* gwbase = gw.data() + (static_cast<size_t>(oc) * cin + ic) * kh * kw;
            for (int ky = 0; ky < kh; ++ky) {
              for (int kx = 0; kx < kw; ++kx) {
                const double wval = wbase[ky * kw + kx];
                double wacc = 0.0;
                int xlo, xhi, ylo, yhi;
                valid_range(kx, stride, padding, win, wo, &xlo, &xhi);
                valid_range(ky, stride, padding, h, ho, &ylo, &yhi);
                for (int oy = ylo; oy < yhi; ++oy) {
                  const int iy = oy * stride - padding + ky;
                  const double* xrow = xplane + static_cast<size_t>(iy) * win - padding + kx;
                  double* gxrow = gxplane + static_cast<size_t>(iy) * win - padding + kx;
                  const double* grow = gplane + static_cast<size_t>(oy) * wo;
                  for (int ox = xlo; ox < xhi; ++ox) {
                    const double gv = grow[ox];
                    wacc += gv * xrow[ox * stride];
                    gxrow[ox * stride] += wval * gv;
                  }
                }
                gwbase[ky * kw + kx] += wacc;
              }
            }
          }
        }
        t.accumulate_grad(ix, std::move(gx));
        t.accumulate_grad(iw, std::move(gw));
        if (ibias >= 0) {
          Tensor gb({cout});
          for (int oc = 0; oc < cout; ++oc) {
            const double* gplane = g.data() + static_cast<size_t>(oc) * ho * wo;
            double acc = 0.0;
            for (int i = 0; i < ho * wo; ++i) acc += gplane[i];
            gb[oc] = acc;
          }
          t.accumulate_grad(ibias, std::move(gb));
        }
      });
}

Var conv1d(Var x, Var w, Var bias, int stride, int padding, int dilation) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (xv.rank() != 2 || wv.rank() != 3) {
    throw ShapeError("conv1d expects x rank 2 and w rank 3, got " + xv.shape_str() +
                     " and " + wv.shape_str());
  }
  if (stride < 1 || padding < 0 || dilation < 1) {
    throw ContractError("conv1d: bad stride/padding/dilation");
  }
  const int cin = xv.dim(0), len = xv.dim(1);
  const int cout = wv.dim(0), kcin = wv.dim(1), k = wv.dim(2);
  if (kcin != cin) {
    throw ShapeError("conv1d channel mismatch: x " + xv.shape_str() + " vs w " +
                     wv.shape_str());
  }
  const bool has_bias = bias.valid();
  if (has_bias && bias.value().numel() != cout) {
    throw ShapeError("conv1d bias must have " + std::to_string(cout) + " entries");
  }
  const int k_eff = (k - 1) * dilation + 1;
  const int lo_len = out_extent(len, k_eff, stride, padding, "conv1d");

  Tensor out({cout, lo_len});
  for (int oc = 0; oc < cout; ++oc) {
    double* orow = out.data() + static_cast<size_t>(oc) * lo_len;
    if (has_bias) {
      const double b = bias.value()[oc];
      for (int i = 0; i < lo_len; ++i) orow[i] = b;
    }
    for (int ic = 0; ic < cin; ++ic) {
      const double* xrow = xv.data() + static_cast<size_t>(ic) * len;
      const double* wrow = wv.data() + (static_cast<size_t>(oc) * cin + ic) * k;
      for (int kk = 0; kk < k; ++kk) {
        const double wval = wrow[kk];
        if (wval == 0.0) continue;
        int lo, hi;
        valid_range(kk * dilation, stride, padding, len, lo_len, &lo, &hi);
        const double* xs = xrow - padding + kk * dilation;
        for (int o = lo; o < hi; ++o) orow[o] += wval * xs[o * stride];
      }
    }
  }

  std::vector<Var> inputs = has_bias ? std::vector<Var>{x, w, bias}
                                     : std::vector<Var>{x, w};
  return x.tape->emit(
      "conv1d", std::move(out), inputs,
      [ix = x.id, iw = w.id, ibias = has_bias ? bias.id : -1, stride, padding, dilation,
       cin, cout, len, k, lo_len](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(Var{&t, ix});
        const Tensor& wv = t.value(Var{&t, iw});
        Tensor gx(xv.shape());
        Tensor gw(wv.shape());
        for (int oc = 0; oc < cout; ++oc) {
          const double* grow = g.data() + static_cast<size_t>(oc) * lo_len;
          for (int ic = 0; ic < cin; ++ic) {
            const double* xrow = xv.data() + static_cast<size_t>(ic) * len;
            double* gxrow = gx.data() + static_cast<size_t>(ic) * len;
            const double* wrow = wv.data() + (static_cast<size_t>(oc) * cin + ic) * k;
            double* gwrow = gw.data() + (static_cast<size_t>(oc) * cin + ic) * k;
            for (int kk = 0; kk < k; ++kk) {
              const double wval = wrow[kk];
              double wacc = 0.0;
              int lo, hi;
              valid_range(kk * dilation, stride, padding, len, lo_len, &lo, &hi);
              const double* xs = xrow - padding + kk * dilation;
              double* gxs = gxrow - padding + kk * dilation;
              for (int o = lo; o < hi; ++o) {
                const double gv = grow[o];
                wacc += gv * xs[o * stride];
                gxs[o * stride] += wval * gv;
              }
              gwrow[kk] += wacc;
            }
          }
        }
        t.accumulate_grad(ix, std::move(gx));
        t.accumulate_grad(iw, std::move(gw));
        if (ibias >= 0) {
          Tensor gb({cout});
          for (int oc = 0; oc < cout; ++oc) {
            const double* grow = g.data() + static_cast<size_t>(oc) * lo_len;
            double acc = 0.0;
            for (int i = 0; i < lo_len; ++i) acc += grow[i];
            gb[oc] = acc;
          }
          t.accumulate_grad(ibias, std::move(gb));
        }
      });
}

}  // namespace wg
