#include <cmath>

#include "warpgrad/error.hpp"
#include "warpgrad/ops.hpp"

namespace wg {

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// One bilinear tap: corner indices and weights for a sample at (x, y).
struct Tap {
  int x0, y0;
  double fx, fy;
};

inline Tap make_tap(double x, double y) {
  Tap t;
  const double fx0 = std::floor(x);
  const double fy0 = std::floor(y);
  t.x0 = static_cast<int>(fx0);
  t.y0 = static_cast<int>(fy0);
  t.fx = x - fx0;
  t.fy = y - fy0;
  return t;
}

// Fetch with border handling; `inside` reports whether the texel exists.
inline double fetch(const double* plane, int h, int w, int y, int x, Border border,
                    bool* inside) {
  if (x >= 0 && x < w && y >= 0 && y < h) {
    *inside = true;
    return plane[static_cast<size_t>(y) * w + x];
  }
  *inside = false;
  if (border == Border::kZero) return 0.0;
  return plane[static_cast<size_t>(clampi(y, 0, h - 1)) * w + clampi(x, 0, w - 1)];
}

inline double sample_plane(const double* plane, int h, int w, const Tap& t,
                           Border border) {
  bool in;
  const double f00 = fetch(plane, h, w, t.y0, t.x0, border, &in);
  const double f10 = fetch(plane, h, w, t.y0, t.x0 + 1, border, &in);
  const double f01 = fetch(plane, h, w, t.y0 + 1, t.x0, border, &in);
  const double f11 = fetch(plane, h, w, t.y0 + 1, t.x0 + 1, border, &in);
  const double top = f00 + t.fx * (f10 - f00);
  const double bot = f01 + t.fx * (f11 - f01);
  return top + t.fy * (bot - top);
}

// d(sample)/dx and d(sample)/dy at a tap.
inline void sample_plane_coord_grad(const double* plane, int h, int w, const Tap& t,
                                    Border border, double* dx, double* dy) {
  bool in;
  const double f00 = fetch(plane, h, w, t.y0, t.x0, border, &in);
  const double f10 = fetch(plane, h, w, t.y0, t.x0 + 1, border, &in);
  const double f01 = fetch(plane, h, w, t.y0 + 1, t.x0, border, &in);
  const double f11 = fetch(plane, h, w, t.y0 + 1, t.x0 + 1, border, &in);
  *dx = (1.0 - t.fy) * (f10 - f00) + t.fy * (f11 - f01);
  *dy = (1.0 - t.fx) * (f01 - f00) + t.fx * (f11 - f10);
}

// Scatter `v` into the gradient plane at the tap corners.
inline void scatter_plane(double* gplane, int h, int w, const Tap& t, Border border,
                          double v) {
  const double w00 = (1.0 - t.fx) * (1.0 - t.fy);
  const double w10 = t.fx * (1.0 - t.fy);
  const double w01 = (1.0 - t.fx) * t.fy;
  const double w11 = t.fx * t.fy;
  const int xs[2] = {t.x0, t.x0 + 1};
  const int ys[2] = {t.y0, t.y0 + 1};
  const double ws[2][2] = {{w00, w10}, {w01, w11}};
  for (int iy = 0; iy < 2; ++iy) {
    for (int ix = 0; ix < 2; ++ix) {
      const double wt = ws[iy][ix];
      if (wt == 0.0) continue;
      int x = xs[ix], y = ys[iy];
      if (x < 0 || x >= w || y < 0 || y >= h) {
        if (border == Border::kZero) continue;
        x = clampi(x, 0, w - 1);
        y = clampi(y, 0, h - 1);
      }
      gplane[static_cast<size_t>(y) * w + x] += wt * v;
    }
  }
}

void check_coords(const Tensor& coords, const char* op) {
  if (coords.rank() != 3 || coords.dim(0) != 2) {
    throw ShapeError(std::string(op) + ": coords must be 2 x H x W, got " +
                     coords.shape_str());
  }
  if (!coords.all_finite()) {
    throw NumericError(std::string(op) + ": non-finite coordinates");
  }
}

}  // namespace

Tensor bilinear_sample_tensor(const Tensor& f, const Tensor& coords, Border border) {
  if (f.rank() != 3) {
    throw ShapeError("bilinear_sample: feature map must be C x H x W, got " +
                     f.shape_str());
  }
  check_coords(coords, "bilinear_sample");
  const int c = f.dim(0), h = f.dim(1), w = f.dim(2);
  const int ho = coords.dim(1), wo = coords.dim(2);
  const int loc = ho * wo;
  Tensor out({c, ho, wo});
  const double* cx = coords.data();
  const double* cy = coords.data() + loc;
  for (int l = 0; l < loc; ++l) {
    const Tap t = make_tap(cx[l], cy[l]);
    for (int ch = 0; ch < c; ++ch) {
      out.data()[static_cast<size_t>(ch) * loc + l] =
          sample_plane(f.data() + static_cast<size_t>(ch) * h * w, h, w, t, border);
    }
  }
  return out;
}

Var bilinear_sample(Var f, Var coords, Border border) {
  Tensor out = bilinear_sample_tensor(f.value(), coords.value(), border);
  const int c = f.value().dim(0), h = f.value().dim(1), w = f.value().dim(2);
  const int ho = coords.value().dim(1), wo = coords.value().dim(2);
  return f.tape->emit(
      "bilinear_sample", std::move(out), {f, coords},
      [iff = f.id, ic = coords.id, c, h, w, ho, wo, border](Tape& t, const Tensor& g) {
        const Tensor& fv = t.value(Var{&t, iff});
        const Tensor& cv = t.value(Var{&t, ic});
        Tensor gf(fv.shape());
        Tensor gc(cv.shape());
        const int loc = ho * wo;
        const double* cx = cv.data();
        const double* cy = cv.data() + loc;
        double* gcx = gc.data();
        double* gcy = gc.data() + loc;
        for (int l = 0; l < loc; ++l) {
          const Tap tap = make_tap(cx[l], cy[l]);
          double accx = 0.0, accy = 0.0;
          for (int ch = 0; ch < c; ++ch) {
            const double gv = g.data()[static_cast<size_t>(ch) * loc + l];
            const double* plane = fv.data() + static_cast<size_t>(ch) * h * w;
            double dx, dy;
            sample_plane_coord_grad(plane, h, w, tap, border, &dx, &dy);
            accx += gv * dx;
            accy += gv * dy;
            scatter_plane(gf.data() + static_cast<size_t>(ch) * h * w, h, w, tap,
                          border, gv);
          }
          gcx[l] = accx;
          gcy[l] = accy;
        }
        t.accumulate_grad(iff, std::move(gf));
        t.accumulate_grad(ic, std::move(gc));
      });
}

Var extract_patches(Var f, Var coords, int n, Border border) {
  const Tensor& fv = f.value();
  const Tensor& cv = coords.value();
  if (fv.rank() != 3) {
    throw ShapeError("extract_patches: feature map must be C x H x W, got " +
                     fv.shape_str());
  }
  check_coords(cv, "extract_patches");
  if (n < 1 || n % 2 == 0) {
    throw ContractError("extract_patches: patch size must be odd and positive, got " +
                        std::to_string(n));
  }
  const int c = fv.dim(0), h = fv.dim(1), w = fv.dim(2);
  const int ho = cv.dim(1), wo = cv.dim(2);
  const int loc = ho * wo;
  const int n2 = n * n;
  const int half = (n - 1) / 2;

  Tensor out({c * n2, ho, wo});
  const double* cx = cv.data();
  const double* cy = cv.data() + loc;
  for (int l = 0; l < loc; ++l) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const Tap tap = make_tap(cx[l] + (j - half), cy[l] + (i - half));
        const int pidx = i * n + j;
        for (int ch = 0; ch < c; ++ch) {
          out.data()[(static_cast<size_t>(ch) * n2 + pidx) * loc + l] = sample_plane(
              fv.data() + static_cast<size_t>(ch) * h * w, h, w, tap, border);
        }
      }
    }
  }

  return f.tape->emit(
      "extract_patches", std::move(out), {f, coords},
      [iff = f.id, ic = coords.id, c, h, w, ho, wo, n, half, border](Tape& t,
                                                                     const Tensor& g) {
        const Tensor& fv = t.value(Var{&t, iff});
        const Tensor& cv = t.value(Var{&t, ic});
        Tensor gf(fv.shape());
        Tensor gc(cv.shape());
        const int loc = ho * wo;
        const int n2 = n * n;
        const double* cx = cv.data();
        const double* cy = cv.data() + loc;
        double* gcx = gc.data();
        double* gcy = gc.data() + loc;
        for (int l = 0; l < loc; ++l) {
          double accx = 0.0, accy = 0.0;
          for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
              const Tap tap = make_tap(cx[l] + (j - half), cy[l] + (i - half));
              const int pidx = i * n + j;
              for (int ch = 0; ch < c; ++ch) {
                const double gv =
                    g.data()[(static_cast<size_t>(ch) * n2 + pidx) * loc + l];
                if (gv == 0.0) continue;
                const double* plane = fv.data() + static_cast<size_t>(ch) * h * w;
                double dx, dy;
                sample_plane_coord_grad(plane, h, w, tap, border, &dx, &dy);
                accx += gv * dx;
                accy += gv * dy;
                scatter_plane(gf.data() + static_cast<size_t>(ch) * h * w, h, w, tap,
                              border, gv);
              }
            }
          }
          gcx[l] = accx;
          gcy[l] = accy;
        }
        t.accumulate_grad(iff, std::move(gf));
        t.accumulate_grad(ic, std::move(gc));
      });
}

Var kernel_weighted_patch_sum(Var patches, Var kernel) {
  const Tensor& pv = patches.value();
  const Tensor& kv = kernel.value();
  if (pv.rank() != 3 || kv.rank() != 3) {
    throw ShapeError("kernel_weighted_patch_sum expects rank-3 inputs");
  }
  const int n2 = kv.dim(0);
  const int ho = kv.dim(1), wo = kv.dim(2);
  if (pv.dim(1) != ho || pv.dim(2) != wo || pv.dim(0) % n2 != 0) {
    throw ShapeError("kernel_weighted_patch_sum: patches " + pv.shape_str() +
                     " incompatible with kernel " + kv.shape_str());
  }
  const int c = pv.dim(0) / n2;
  const int loc = ho * wo;
  Tensor out({c, ho, wo});
  for (int ch = 0; ch < c; ++ch) {
    double* oplane = out.data() + static_cast<size_t>(ch) * loc;
    for (int i = 0; i < n2; ++i) {
      const double* pplane = pv.data() + (static_cast<size_t>(ch) * n2 + i) * loc;
      const double* kplane = kv.data() + static_cast<size_t>(i) * loc;
      for (int l = 0; l < loc; ++l) oplane[l] += kplane[l] * pplane[l];
    }
  }
  return patches.tape->emit(
      "kernel_weighted_patch_sum", std::move(out), {patches, kernel},
      [ip = patches.id, ik = kernel.id, c, n2, loc](Tape& t, const Tensor& g) {
        const Tensor& pv = t.value(Var{&t, ip});
        const Tensor& kv = t.value(Var{&t, ik});
        Tensor gp(pv.shape());
        Tensor gk(kv.shape());
        for (int ch = 0; ch < c; ++ch) {
          const double* gplane = g.data() + static_cast<size_t>(ch) * loc;
          for (int i = 0; i < n2; ++i) {
            const double* pplane = pv.data() + (static_cast<size_t>(ch) * n2 + i) * loc;
            const double* kplane = kv.data() + static_cast<size_t>(i) * loc;
            double* gpp = gp.data() + (static_cast<size_t>(ch) * n2 + i) * loc;
            double* gkp = gk.data() + static_cast<size_t>(i) * loc;
            for (int l = 0; l < loc; ++l) {
              gpp[l] = kplane[l] * gplane[l];
              gkp[l] += pplane[l] * gplane[l];
            }
          }
        }
        t.accumulate_grad(ip, std::move(gp));
        t.accumulate_grad(ik, std::move(gk));
      });
}

Var mask_blend(Var f_t, Var f_attn, Var m) {
  const Tensor& tv = f_t.value();
  const Tensor& av = f_attn.value();
  const Tensor& mv = m.value();
  check_same_shape(tv, av, "mask_blend");
  if (mv.rank() != 3 || mv.dim(0) != 1 || mv.dim(1) != tv.dim(1) ||
      mv.dim(2) != tv.dim(2)) {
    throw ShapeError("mask_blend: mask must be 1 x H x W matching features, got " +
                     mv.shape_str() + " vs " + tv.shape_str());
  }
  const int loc = mv.numel();
  for (int l = 0; l < loc; ++l) {
    if (!(mv[l] >= 0.0 && mv[l] <= 1.0)) {
      throw ContractError("mask_blend: mask value " + std::to_string(mv[l]) +
                          " outside [0,1]");
    }
  }
  const int c = tv.dim(0);
  Tensor out(tv.shape());
  for (int ch = 0; ch < c; ++ch) {
    const double* tp = tv.data() + static_cast<size_t>(ch) * loc;
    const double* ap = av.data() + static_cast<size_t>(ch) * loc;
    double* op = out.data() + static_cast<size_t>(ch) * loc;
    for (int l = 0; l < loc; ++l) op[l] = (1.0 - mv[l]) * tp[l] + mv[l] * ap[l];
  }
  return f_t.tape->emit(
      "mask_blend", std::move(out), {f_t, f_attn, m},
      [it = f_t.id, ia = f_attn.id, im = m.id, c, loc](Tape& t, const Tensor& g) {
        const Tensor& tv = t.value(Var{&t, it});
        const Tensor& av = t.value(Var{&t, ia});
        const Tensor& mv = t.value(Var{&t, im});
        Tensor gt(tv.shape()), ga(av.shape()), gm(mv.shape());
        for (int ch = 0; ch < c; ++ch) {
          const double* tp = tv.data() + static_cast<size_t>(ch) * loc;
          const double* ap = av.data() + static_cast<size_t>(ch) * loc;
          const double* gp = g.data() + static_cast<size_t>(ch) * loc;
          double* gtp = gt.data() + static_cast<size_t>(ch) * loc;
          double* gap = ga.data() + static_cast<size_t>(ch) * loc;
          for (int l = 0; l < loc; ++l) {
            gtp[l] = (1.0 - mv[l]) * gp[l];
            gap[l] = mv[l] * gp[l];
            gm[l] += (ap[l] - tp[l]) * gp[l];
          }
        }
        t.accumulate_grad(it, std::move(gt));
        t.accumulate_grad(ia, std::move(ga));
        t.accumulate_grad(im, std::move(gm));
      });
}

Tensor bilinear_upsample_tensor(const Tensor& x, int factor) {
  if (x.rank() != 3) {
    throw ShapeError("bilinear_upsample expects C x H x W, got " + x.shape_str());
  }
  if (factor < 1) throw ContractError("bilinear_upsample: factor must be >= 1");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int ho = h * factor, wo = w * factor;
  Tensor out({c, ho, wo});
  for (int oy = 0; oy < ho; ++oy) {
    const double sy = (oy + 0.5) / factor - 0.5;
    for (int ox = 0; ox < wo; ++ox) {
      const double sx = (ox + 0.5) / factor - 0.5;
      const Tap tap = make_tap(sx, sy);
      for (int ch = 0; ch < c; ++ch) {
        out.at3(ch, oy, ox) = sample_plane(x.data() + static_cast<size_t>(ch) * h * w,
                                           h, w, tap, Border::kClamp);
      }
    }
  }
  return out;
}

Var bilinear_upsample(Var x, int factor) {
  Tensor out = bilinear_upsample_tensor(x.value(), factor);
  const int c = x.value().dim(0), h = x.value().dim(1), w = x.value().dim(2);
  return x.tape->emit(
      "bilinear_upsample", std::move(out), {x},
      [ix = x.id, c, h, w, factor](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(Var{&t, ix});
        Tensor gx(xv.shape());
        const int ho = h * factor, wo = w * factor;
        for (int oy = 0; oy < ho; ++oy) {
          const double sy = (oy + 0.5) / factor - 0.5;
          for (int ox = 0; ox < wo; ++ox) {
            const double sx = (ox + 0.5) / factor - 0.5;
            const Tap tap = make_tap(sx, sy);
            for (int ch = 0; ch < c; ++ch) {
              scatter_plane(gx.data() + static_cast<size_t>(ch) * h * w, h, w, tap,
                            Border::kClamp, g.at3(ch, oy, ox));
            }
          }
        }
        t.accumulate_grad(ix, std::move(gx));
      });
}

}  // namespace wg
