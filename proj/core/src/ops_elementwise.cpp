#include <cmath>

#include "warpgrad/error.hpp"
#include "warpgrad/ops.hpp"

namespace wg {

namespace {

void check_same_tape(Var a, Var b, const char* op) {
  if (a.tape != b.tape) {
    throw ContractError(std::string(op) + ": operands live on different tapes");
  }
}

void check_scalar(Var s, const char* op) {
  if (s.value().numel() != 1) {
    throw ContractError(std::string(op) + ": expected a [1] operand, got " +
                        s.value().shape_str());
  }
}

}  // namespace

Var add(Var a, Var b) {
  check_same_tape(a, b, "add");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  check_same_shape(av, bv, "add");
  Tensor out(av.shape());
  const int m = out.numel();
  for (int i = 0; i < m; ++i) out[i] = av[i] + bv[i];
  return a.tape->emit("add", std::move(out), {a, b},
                      [ia = a.id, ib = b.id](Tape& t, const Tensor& g) {
                        t.accumulate_grad(ia, g);
                        t.accumulate_grad(ib, g);
                      });
}

Var sub(Var a, Var b) {
  check_same_tape(a, b, "sub");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  check_same_shape(av, bv, "sub");
  Tensor out(av.shape());
  const int m = out.numel();
  for (int i = 0; i < m; ++i) out[i] = av[i] - bv[i];
  return a.tape->emit("sub", std::move(out), {a, b},
                      [ia = a.id, ib = b.id](Tape& t, const Tensor& g) {
                        t.accumulate_grad(ia, g);
                        Tensor ng(g.shape());
                        for (int i = 0; i < g.numel(); ++i) ng[i] = -g[i];
                        t.accumulate_grad(ib, std::move(ng));
                      });
}

Var mul(Var a, Var b) {
  check_same_tape(a, b, "mul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  check_same_shape(av, bv, "mul");
  Tensor out(av.shape());
  const int m = out.numel();
  for (int i = 0; i < m; ++i) out[i] = av[i] * bv[i];
  return a.tape->emit("mul", std::move(out), {a, b},
                      [ia = a.id, ib = b.id](Tape& t, const Tensor& g) {
                        const Tensor& av = t.value(Var{&t, ia});
                        const Tensor& bv = t.value(Var{&t, ib});
                        Tensor ga(g.shape()), gb(g.shape());
                        for (int i = 0; i < g.numel(); ++i) {
                          ga[i] = g[i] * bv[i];
                          gb[i] = g[i] * av[i];
                        }
                        t.accumulate_grad(ia, std::move(ga));
                        t.accumulate_grad(ib, std::move(gb));
                      });
}

Var scale(Var x, double c) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (int i = 0; i < out.numel(); ++i) out[i] = c * xv[i];
  return x.tape->emit("scale", std::move(out), {x},
                      [ix = x.id, c](Tape& t, const Tensor& g) {
                        Tensor gx(g.shape());
                        for (int i = 0; i < g.numel(); ++i) gx[i] = c * g[i];
                        t.accumulate_grad(ix, std::move(gx));
                      });
}

Var scalar_mul(Var x, Var s) {
  check_same_tape(x, s, "scalar_mul");
  check_scalar(s, "scalar_mul");
  const Tensor& xv = x.value();
  const double sv = s.value()[0];
  Tensor out(xv.shape());
  for (int i = 0; i < out.numel(); ++i) out[i] = sv * xv[i];
  return x.tape->emit("scalar_mul", std::move(out), {x, s},
                      [ix = x.id, is = s.id](Tape& t, const Tensor& g) {
                        const Tensor& xv = t.value(Var{&t, ix});
                        const double sv = t.value(Var{&t, is})[0];
                        Tensor gx(g.shape());
                        double gs = 0.0;
                        for (int i = 0; i < g.numel(); ++i) {
                          gx[i] = sv * g[i];
                          gs += g[i] * xv[i];
                        }
                        t.accumulate_grad(ix, std::move(gx));
                        t.accumulate_grad(is, Tensor::scalar(gs));
                      });
}

Var scalar_add(Var x, Var s) {
  check_same_tape(x, s, "scalar_add");
  check_scalar(s, "scalar_add");
  const Tensor& xv = x.value();
  const double sv = s.value()[0];
  Tensor out(xv.shape());
  for (int i = 0; i < out.numel(); ++i) out[i] = xv[i] + sv;
  return x.tape->emit("scalar_add", std::move(out), {x, s},
                      [ix = x.id, is = s.id](Tape& t, const Tensor& g) {
                        t.accumulate_grad(ix, g);
                        double gs = 0.0;
                        for (int i = 0; i < g.numel(); ++i) gs += g[i];
                        t.accumulate_grad(is, Tensor::scalar(gs));
                      });
}

Var leaky_relu(Var x, double slope) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (int i = 0; i < out.numel(); ++i) {
    out[i] = xv[i] >= 0.0 ? xv[i] : slope * xv[i];
  }
  return x.tape->emit("leaky_relu", std::move(out), {x},
                      [ix = x.id, slope](Tape& t, const Tensor& g) {
                        const Tensor& xv = t.value(Var{&t, ix});
                        Tensor gx(g.shape());
                        for (int i = 0; i < g.numel(); ++i) {
                          gx[i] = xv[i] >= 0.0 ? g[i] : slope * g[i];
                        }
                        t.accumulate_grad(ix, std::move(gx));
                      });
}

Var sigmoid(Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (int i = 0; i < out.numel(); ++i) {
    const double v = xv[i];
    out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                      : std::exp(v) / (1.0 + std::exp(v));
  }
  std::vector<double> saved(out.data(), out.data() + out.numel());
  return x.tape->emit("sigmoid", std::move(out), {x},
                      [ix = x.id, saved](Tape& t, const Tensor& g) {
                        Tensor gx(g.shape());
                        for (int i = 0; i < g.numel(); ++i) {
                          const double y = saved[static_cast<size_t>(i)];
                          gx[i] = g[i] * y * (1.0 - y);
                        }
                        t.accumulate_grad(ix, std::move(gx));
                      });
}

Var tanh_act(Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (int i = 0; i < out.numel(); ++i) out[i] = std::tanh(xv[i]);
  std::vector<double> saved(out.data(), out.data() + out.numel());
  return x.tape->emit("tanh", std::move(out), {x},
                      [ix = x.id, saved](Tape& t, const Tensor& g) {
                        Tensor gx(g.shape());
                        for (int i = 0; i < g.numel(); ++i) {
                          gx[i] = g[i] * (1.0 - saved[static_cast<size_t>(i)] *
                                                    saved[static_cast<size_t>(i)]);
                        }
                        t.accumulate_grad(ix, std::move(gx));
                      });
}

Var abs_val(Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (int i = 0; i < out.numel(); ++i) out[i] = std::fabs(xv[i]);
  return x.tape->emit("abs", std::move(out), {x},
                      [ix = x.id](Tape& t, const Tensor& g) {
                        const Tensor& xv = t.value(Var{&t, ix});
                        Tensor gx(g.shape());
                        for (int i = 0; i < g.numel(); ++i) {
                          const double s = xv[i] > 0.0 ? 1.0 : (xv[i] < 0.0 ? -1.0 : 0.0);
                          gx[i] = g[i] * s;
                        }
                        t.accumulate_grad(ix, std::move(gx));
                      });
}

Var sqrt_val(Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (int i = 0; i < out.numel(); ++i) {
    if (xv[i] < 0.0) throw NumericError("sqrt of a negative value");
    out[i] = std::sqrt(xv[i]);
  }
  std::vector<double> saved(out.data(), out.data() + out.numel());
  return x.tape->emit("sqrt", std::move(out), {x},
                      [ix = x.id, saved](Tape& t, const Tensor& g) {
                        Tensor gx(g.shape());
                        for (int i = 0; i < g.numel(); ++i) {
                          const double d = saved[static_cast<size_t>(i)];
                          gx[i] = g[i] * 0.5 / (d > 1e-150 ? d : 1e-150);
                        }
                        t.accumulate_grad(ix, std::move(gx));
                      });
}

Var log_guarded(Var x) {
  static constexpr double kLo = 1e-7;
  static constexpr double kHi = 1.0 - 1e-7;
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (int i = 0; i < out.numel(); ++i) {
    double v = xv[i];
    v = v < kLo ? kLo : (v > kHi ? kHi : v);
    out[i] = std::log(v);
  }
  return x.tape->emit("log_guarded", std::move(out), {x},
                      [ix = x.id](Tape& t, const Tensor& g) {
                        const Tensor& xv = t.value(Var{&t, ix});
                        Tensor gx(g.shape());
                        for (int i = 0; i < g.numel(); ++i) {
                          const double v = xv[i];
                          gx[i] = (v > kLo && v < kHi) ? g[i] / v : 0.0;
                        }
                        t.accumulate_grad(ix, std::move(gx));
                      });
}

}  // namespace wg
