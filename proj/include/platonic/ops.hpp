#pragma once

#include "platonic/tape.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace platonic {

namespace detail {

template <class S>
using MatMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class S>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <class S, class Fwd, class Grad>
Var<S> elementwise_unary(Var<S> x, Fwd fwd, Grad grad) {
  Tensor<S> out;
  out.dims = x.dims();
  out.v = fwd(x.value().v);
  int xid = x.id;
  int id = x.tape->push(std::move(out), {xid},
                        [xid, grad](Tape<S>& t, const Tensor<S>& adj, std::vector<Tensor<S>>& a) {
                          a[xid].v += grad(t.value(xid).v) * adj.v;
                        });
  return Var<S>{x.tape, id};
}

inline void check_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace detail

// ---- elementwise arithmetic ----

template <class S>
Var<S> add(Var<S> x, Var<S> y) {
  detail::check_same_shape(x.dims(), y.dims(), "add");
  Tensor<S> out;
  out.dims = x.dims();
  out.v = x.value().v + y.value().v;
  int xi = x.id, yi = y.id;
  int id = x.tape->push(std::move(out), {xi, yi},
                        [xi, yi](Tape<S>&, const Tensor<S>& adj, std::vector<Tensor<S>>& a) {
                          a[xi].v += adj.v;
                          a[yi].v += adj.v;
                        });
  return Var<S>{x.tape, id};
}

template <class S>
Var<S> sub(Var<S> x, Var<S> y) {
  detail::check_same_shape(x.dims(), y.dims(), "sub");
  Tensor<S> out;
  out.dims = x.dims();
  out.v = x.value().v - y.value().v;
  int xi = x.id, yi = y.id;
  int id = x.tape->push(std::move(out), {xi, yi},
                        [xi, yi](Tape<S>&, const Tensor<S>& adj, std::vector<Tensor<S>>& a) {
                          a[xi].v += adj.v;
                          a[yi].v -= adj.v;
                        });
  return Var<S>{x.tape, id};
}

template <class S>
Var<S> mul(Var<S> x, Var<S> y) {
  detail::check_same_shape(x.dims(), y.dims(), "mul");
  Tensor<S> out;
  out.dims = x.dims();
  out.v = x.value().v * y.value().v;
  int xi = x.id, yi = y.id;
  int id = x.tape->push(std::move(out), {xi, yi},
                        [xi, yi](Tape<S>& t, const Tensor<S>& adj, std::vector<Tensor<S>>& a) {
                          a[xi].v += t.value(yi).v * adj.v;
                          a[yi].v += t.value(xi).v * adj.v;
                        });
  return Var<S>{x.tape, id};
}

template <class S>
Var<S> scale(Var<S> x, S c) {
  return detail::elementwise_unary(
      x, [c](const auto& v) { return (v * c).eval(); },
      [c](const auto& v) {
        return Eigen::Array<S, Eigen::Dynamic, 1>::Constant(v.size(), c);
      });
}

template <class S>
Var<S> add_scalar(Var<S> x, S c) {
  return detail::elementwise_unary(
      x, [c](const auto& v) { return (v + c).eval(); },
      [](const auto& v) { return Eigen::Array<S, Eigen::Dynamic, 1>::Ones(v.size()); });
}

// c - x
template <class S>
Var<S> rsub_scalar(S c, Var<S> x) {
  return detail::elementwise_unary(
      x, [c](const auto& v) { return (c - v).eval(); },
      [](const auto& v) {
        return Eigen::Array<S, Eigen::Dynamic, 1>::Constant(v.size(), S(-1));
      });
}

template <class S>
Var<S> neg(Var<S> x) {
  return scale(x, S(-1));
}

template <class S>
Var<S> exp_op(Var<S> x) {
  return detail::elementwise_unary(
      x, [](const auto& v) { return v.exp().eval(); },
      [](const auto& v) { return v.exp().eval(); });
}

// Input must be strictly positive; pair with clamp_min at call sites.
template <class S>
Var<S> log_op(Var<S> x) {
  return detail::elementwise_unary(
      x, [](const auto& v) { return v.log().eval(); },
      [](const auto& v) { return v.inverse().eval(); });
}

template <class S>
Var<S> sigmoid(Var<S> x) {
  auto sig = [](const auto& v) { return (S(1) / (S(1) + (-v).exp())).eval(); };
  return detail::elementwise_unary(x, sig, [sig](const auto& v) {
    auto s = sig(v);
    return (s * (S(1) - s)).eval();
  });
}

// log(sigmoid(x)), evaluated without overflow on either tail.
template <class S>
Var<S> logsigmoid(Var<S> x) {
  auto fwd = [](const auto& v) {
    Eigen::Array<S, Eigen::Dynamic, 1> out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      S z = v[i];
      out[i] = z < S(0) ? z - std::log1p(std::exp(z)) : -std::log1p(std::exp(-z));
    }
    return out;
  };
  return detail::elementwise_unary(x, fwd, [](const auto& v) {
    // d/dx log sigmoid(x) = sigmoid(-x)
    return (S(1) / (S(1) + v.exp())).eval();
  });
}

template <class S>
Var<S> leaky_relu(Var<S> x, S slope) {
  return detail::elementwise_unary(
      x,
      [slope](const auto& v) {
        return (v >= S(0)).select(v, v * slope).eval();
      },
      [slope](const auto& v) {
        return (v >= S(0))
            .select(Eigen::Array<S, Eigen::Dynamic, 1>::Ones(v.size()), slope)
            .eval();
      });
}

template <class S>
Var<S> clamp(Var<S> x, S lo, S hi) {
  return detail::elementwise_unary(
      x, [lo, hi](const auto& v) { return v.min(hi).max(lo).eval(); },
      [lo, hi](const auto& v) {
        return ((v >= lo) && (v <= hi))
            .select(Eigen::Array<S, Eigen::Dynamic, 1>::Ones(v.size()), S(0))
            .eval();
      });
}

template <class S>
Var<S> clamp_min(Var<S> x, S lo) {
  return detail::elementwise_unary(
      x, [lo](const auto& v) { return v.max(lo).eval(); },
      [lo](const auto& v) {
        return (v >= lo)
            .select(Eigen::Array<S, Eigen::Dynamic, 1>::Ones(v.size()), S(0))
            .eval();
      });
}

// ---- reductions ----

template <class S>
Var<S> sum_all(Var<S> x) {
  Tensor<S> out = Tensor<S>::scalar(x.value().v.sum());
  int xi = x.id;
  int id = x.tape->push(std::move(out), {xi},
                        [xi](Tape<S>&, const Tensor<S>& adj, std::vector<Tensor<S>>& a) {
                          a[xi].v += adj.v[0];
                        });
  return Var<S>{x.tape, id};
}

template <class S>
Var<S> sum_axis(Var<S> x, int axis) {
  AxisSplit sp = split_axis(x.dims(), axis);
  Shape od = x.dims();
  od.erase(od.begin() + axis);
  if (od.empty()) od = {1};
  Tensor<S> out(od);
  const auto& xv = x.value().v;
  for (std::int64_t o = 0; o < sp.outer; ++o)
    for (std::int64_t k = 0; k < sp.n; ++k)
      for (std::int64_t i = 0; i < sp.inner; ++i)
        out.v[o * sp.inner + i] += xv[(o * sp.n + k) * sp.inner + i];
  int xi = x.id;
  int id = x.tape->push(std::move(out), {xi},
                        [xi, sp](Tape<S>&, const Tensor<S>& adj, std::vector<Tensor<S>>& a) {
                          auto& g = a[xi].v;
                          for (std::int64_t o = 0; o < sp.outer; ++o)
                            for (std::int64_t k = 0; k < sp.n; ++k)
                              for (std::int64_t i = 0; i < sp.inner; ++i)
                                g[(o * sp.n + k) * sp.inner + i] += adj.v[o * sp.inner + i];
                        });
  return Var<S>{x.tape, id};
}

// ---- scans ----

template <class S>
Var<S> cumsum(Var<S> x, int axis) {
  AxisSplit sp = split_axis(x.dims(), axis);
  Tensor<S> out(x.dims());
  const auto& xv = x.value().v;
  for (std::int64_t o = 0; o < sp.outer; ++o)
    for (std::int64_t i = 0; i < sp.inner; ++i) {
      S acc = S(0);
      for (std::int64_t k = 0; k < sp.n; ++k) {
        acc += xv[(o * sp.n + k) * sp.inner + i];
        out.v[(o * sp.n + k) * sp.inner + i] = acc;
      }
    }
  int xi = x.id;
  // backward: reversed prefix sum of adjoints
  int id = x.tape->push(std::move(out), {xi},
                        [xi, sp](Tape<S>&, const Tensor<S>& adj, std::vector<Tensor<S>>& a) {
                          auto& g = a[xi].v;
                          for (std::int64_t o = 0; o < sp.outer; ++o)
                            for (std::int64_t i = 0; i < sp.inner; ++i) {
                              S acc = S(0);
                              for (std::int64_t k = sp.n - 1; k >= 0; --k) {
                                acc += adj.v[(o * sp.n + k) * sp.inner + i];
                                g[(o * sp.n + k) * sp.inner + i] += acc;
                              }
                            }
                        });
  return Var<S>{x.tape, id};
}

// Inclusive cumulative product. The backward rule is division-free: with
// E_j the exclusive prefix product and T_j = g_j + x_{j+1} T_{j+1}, the
// input adjoint is E_j * T_j. Exact for inputs containing zeros.
template <class S>
Var<S> cumprod(Var<S> x, int axis) {
  AxisSplit sp = split_axis(x.dims(), axis);
  Tensor<S> out(x.dims());
  const auto& xv = x.value().v;
  for (std::int64_t o = 0; o < sp.outer; ++o)
    for (std::int64_t i = 0; i < sp.inner; ++i) {
      S acc = S(1);
      for (std::int64_t k = 0; k < sp.n; ++k) {
        acc *= xv[(o * sp.n + k) * sp.inner + i];
        out.v[(o * sp.n + k) * sp.inner + i] = acc;
      }
    }
  int xi = x.id;
  int id = x.tape->push(
      std::move(out), {xi},
      [xi, sp](Tape<S>& t, const Tensor<S>& adj, std::vector<Tensor<S>>& a) {
        const auto& xv = t.value(xi).v;
        auto& g = a[xi].v;
        std::vector<S> tail(sp.n);
        for (std::int64_t o = 0; o < sp.outer; ++o)
          for (std::int64_t i = 0; i < sp.inner; ++i) {
            auto at = [&](std::int64_t k) { return (o * sp.n + k) * sp.inner + i; };
            S acc = S(0);
            for (std::int64_t k = sp.n - 1; k >= 0; --k) {
              acc = adj.v[at(k)] + (k + 1 < sp.n ? xv[at(k + 1)] * acc : S(0));
              tail[k] = acc;
            }
            S prefix = S(1);
            for (std::int64_t k = 0; k < sp.n; ++k) {
              g[at(k)] += prefix * tail[k];
              prefix *= xv[at(k)];
            }
          }
      });
  return Var<S>{x.tape, id};
}

// Shift by one along `axis` toward higher index, filling the first slice.
// Linear: backward shifts the adjoint the other way.
template <class S>
Var<S> shift_one(Var<S> x, int axis, S fill) {
  AxisSplit sp = split_axis(x.dims(), axis);
  Tensor<S> out(x.dims());
  const auto& xv = x.value().v;
  for (std::int64_t o = 0; o < sp.outer; ++o)
    for (std::int64_t i = 0; i < sp.inner; ++i) {
      out.v[(o * sp.n) * sp.inner + i] = fill;
      for (std::int64_t k = 1; k < sp.n; ++k)
        out.v[(o * sp.n + k) * sp.inner + i] = xv[(o * sp.n + k - 1) * sp.inner + i];
    }
  int xi = x.id;
  int id = x.tape->push(std::move(out), {xi},
                        [xi, sp](Tape<S>&, const Tensor<S>& adj, std::vector<Tensor<S>>& a) {
                          auto& g = a[xi].v;
                          for (std::int64_t o = 0; o < sp.outer; ++o)
                            for (std::int64_t i = 0; i < sp.inner; ++i)
                              for (std::int64_t k = 1; k < sp.n; ++k)
                                g[(o * sp.n + k - 1) * sp.inner + i] +=
                                    adj.v[(o * sp.n + k) * sp.inner + i];
                        });
  return Var<S>{x.tape, id};
}

// ---- structure ----

template <class S>
Var<S> reshape(Var<S> x, Shape dims) {
  if (shape_size(dims) != x.value().size())
    throw std::invalid_argument("reshape: size mismatch");
  Tensor<S> out;
  out.dims = std::move(dims);
  out.v = x.value().v;
  int xi = x.id;
  int id = x.tape->push(std::move(out), {xi},
                        [xi](Tape<S>&, const Tensor<S>& adj, std::vector<Tensor<S>>& a) {
                          a[xi].v += adj.v;
                        });
  return Var<S>{x.tape, id};
}

// Sub-tensor at a single index along `axis` (the axis is dropped).
template <class S>
Var<S> slice_axis(Var<S> x, int axis, int index) {
  AxisSplit sp = split_axis(x.dims(), axis);
  if (index < 0 || index >= sp.n) throw std::invalid_argument("slice_axis: index out of range");
  Shape od = x.dims();
  od.erase(od.begin() + axis);
  if (od.empty()) od = {1};
  Tensor<S> out(od);
  const auto& xv = x.value().v;
  for (std::int64_t o = 0; o < sp.outer; ++o)
    for (std::int64_t i = 0; i < sp.inner; ++i)
      out.v[o * sp.inner + i] = xv[(o * sp.n + index) * sp.inner + i];
  int xi = x.id;
  int id = x.tape->push(std::move(out), {xi},
                        [xi, sp, index](Tape<S>&, const Tensor<S>& adj, std::vector<Tensor<S>>& a) {
                          auto& g = a[xi].v;
                          for (std::int64_t o = 0; o < sp.outer; ++o)
                            for (std::int64_t i = 0; i < sp.inner; ++i)
                              g[(o * sp.n + index) * sp.inner + i] += adj.v[o * sp.inner + i];
                        });
  return Var<S>{x.tape, id};
}

// Stack equally-shaped tensors along a new leading axis.
template <class S>
Var<S> stack0(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw std::invalid_argument("stack0: empty");
  Shape base = parts[0].dims();
  Shape od;
  od.push_back(static_cast<int>(parts.size()));
  od.insert(od.end(), base.begin(), base.end());
  Tensor<S> out(od);
  std::int64_t n = shape_size(base);
  std::vector<int> ids;
  for (size_t i = 0; i < parts.size(); ++i) {
    detail::check_same_shape(parts[i].dims(), base, "stack0");
    out.v.segment(i * n, n) = parts[i].value().v;
    ids.push_back(parts[i].id);
  }
  int id = parts[0].tape->push(std::move(out), ids,
                               [ids, n](Tape<S>&, const Tensor<S>& adj, std::vector<Tensor<S>>& a) {
                                 for (size_t i = 0; i < ids.size(); ++i)
                                   a[ids[i]].v += adj.v.segment(i * n, n);
                               });
  return Var<S>{parts[0].tape, id};
}

// ---- dense map ----

// y = W x + b, W: (out, in), x flattened, b: (out)
template <class S>
Var<S> dense(Var<S> w, Var<S> x, Var<S> b) {
  const int out_n = w.dims()[0];
  const int in_n = w.dims()[1];
  if (x.value().size() != in_n || b.value().size() != out_n)
    throw std::invalid_argument("dense: shape mismatch");
  detail::ConstMatMap<S> Wm(w.value().v.data(), out_n, in_n);
  Tensor<S> out({out_n});
  out.v.matrix() = Wm * x.value().v.matrix() + b.value().v.matrix();
  int wi = w.id, xi = x.id, bi = b.id;
  int id = x.tape->push(
      std::move(out), {wi, xi, bi},
      [wi, xi, bi, out_n, in_n](Tape<S>& t, const Tensor<S>& adj, std::vector<Tensor<S>>& a) {
        detail::ConstMatMap<S> Wm(t.value(wi).v.data(), out_n, in_n);
        detail::MatMap<S> Wg(a[wi].v.data(), out_n, in_n);
        a[xi].v.matrix() += Wm.transpose() * adj.v.matrix();
        Wg += adj.v.matrix() * t.value(xi).v.matrix().transpose();
        a[bi].v += adj.v;
      });
  return Var<S>{x.tape, id};
}

// ---- normalization ----

// Per-channel normalization over the spatial extent (axis 0 is channels),
// with a per-channel bias applied after the normalization so the bias is not
// cancelled by the mean subtraction: y = (x - mu_c) / sqrt(var_c + eps) + b_c.
template <class S>
Var<S> instance_norm_bias(Var<S> x, Var<S> b, S eps = S(1e-5)) {
  const Shape& xd = x.dims();
  const int nc = xd[0];
  if (b.value().size() != nc) throw std::invalid_argument("instance_norm: bias size mismatch");
  const std::int64_t m = x.value().size() / nc;
  Tensor<S> out(xd);
  Tensor<S> norm(xd);  // the pre-bias normalized values, kept for backward
  std::vector<S> rstd(nc);
  const auto& xv = x.value().v;
  for (int c = 0; c < nc; ++c) {
    auto seg = xv.segment(c * m, m);
    S mu = seg.mean();
    S var = (seg - mu).square().mean();
    S r = S(1) / std::sqrt(var + eps);
    rstd[c] = r;
    norm.v.segment(c * m, m) = (seg - mu) * r;
    out.v.segment(c * m, m) = norm.v.segment(c * m, m) + b.value().v[c];
  }
  int xi = x.id, bi = b.id;
  int id = x.tape->push(
      std::move(out), {xi, bi},
      [xi, bi, nc, m, norm, rstd](Tape<S>&, const Tensor<S>& adj, std::vector<Tensor<S>>& a) {
        for (int c = 0; c < nc; ++c) {
          auto g = adj.v.segment(c * m, m);
          auto y = norm.v.segment(c * m, m);
          a[bi].v[c] += g.sum();
          S gm = g.mean();
          S gym = (g * y).mean();
          a[xi].v.segment(c * m, m) += rstd[c] * (g - gm - y * gym);
        }
      });
  return Var<S>{x.tape, id};
}

// ---- convolution maps ----

namespace detail {

struct ConvGeom {
  int cin = 0, cout = 0, k = 0, stride = 0, pad = 0;
  Shape in_sp, out_sp;  // spatial extents, size 2 or 3
  std::int64_t patch() const {
    std::int64_t p = cin;
    for (size_t i = 0; i < in_sp.size(); ++i) p *= k;
    return p;
  }
  std::int64_t out_positions() const { return shape_size(out_sp); }
};

inline int conv_out_extent(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// cols: (cin*k^D) x P, column-major. x: (cin, spatial...) row-major.
template <class S>
void im2col(const ConvGeom& g, const S* x, Mat<S>& cols) {
  const int D = static_cast<int>(g.in_sp.size());
  cols.setZero(g.patch(), g.out_positions());
  if (D == 2) {
    const int H = g.in_sp[0], W = g.in_sp[1];
    const int OH = g.out_sp[0], OW = g.out_sp[1];
    for (int oy = 0; oy < OH; ++oy)
      for (int ox = 0; ox < OW; ++ox) {
        S* col = cols.col(oy * OW + ox).data();
        for (int c = 0; c < g.cin; ++c)
          for (int ky = 0; ky < g.k; ++ky) {
            int iy = oy * g.stride - g.pad + ky;
            for (int kx = 0; kx < g.k; ++kx) {
              int ix = ox * g.stride - g.pad + kx;
              if (iy >= 0 && iy < H && ix >= 0 && ix < W)
                col[(c * g.k + ky) * g.k + kx] = x[(c * H + iy) * W + ix];
            }
          }
      }
  } else {
    const int Dz = g.in_sp[0], H = g.in_sp[1], W = g.in_sp[2];
    const int OD = g.out_sp[0], OH = g.out_sp[1], OW = g.out_sp[2];
    for (int oz = 0; oz < OD; ++oz)
      for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox) {
          S* col = cols.col((oz * OH + oy) * OW + ox).data();
          for (int c = 0; c < g.cin; ++c)
            for (int kz = 0; kz < g.k; ++kz) {
              int iz = oz * g.stride - g.pad + kz;
              if (iz < 0 || iz >= Dz) continue;
              for (int ky = 0; ky < g.k; ++ky) {
                int iy = oy * g.stride - g.pad + ky;
                if (iy < 0 || iy >= H) continue;
                for (int kx = 0; kx < g.k; ++kx) {
                  int ix = ox * g.stride - g.pad + kx;
                  if (ix >= 0 && ix < W)
                    col[((c * g.k + kz) * g.k + ky) * g.k + kx] = x[((c * Dz + iz) * H + iy) * W + ix];
                }
              }
            }
        }
  }
}

template <class S>
void col2im(const ConvGeom& g, const Mat<S>& cols, S* x) {
  const int D = static_cast<int>(g.in_sp.size());
  if (D == 2) {
    const int H = g.in_sp[0], W = g.in_sp[1];
    const int OH = g.out_sp[0], OW = g.out_sp[1];
    for (int oy = 0; oy < OH; ++oy)
      for (int ox = 0; ox < OW; ++ox) {
        const S* col = cols.col(oy * OW + ox).data();
        for (int c = 0; c < g.cin; ++c)
          for (int ky = 0; ky < g.k; ++ky) {
            int iy = oy * g.stride - g.pad + ky;
            for (int kx = 0; kx < g.k; ++kx) {
              int ix = ox * g.stride - g.pad + kx;
              if (iy >= 0 && iy < H && ix >= 0 && ix < W)
                x[(c * H + iy) * W + ix] += col[(c * g.k + ky) * g.k + kx];
            }
          }
      }
  } else {
    const int Dz = g.in_sp[0], H = g.in_sp[1], W = g.in_sp[2];
    const int OD = g.out_sp[0], OH = g.out_sp[1], OW = g.out_sp[2];
    for (int oz = 0; oz < OD; ++oz)
      for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox) {
          const S* col = cols.col((oz * OH + oy) * OW + ox).data();
          for (int c = 0; c < g.cin; ++c)
            for (int kz = 0; kz < g.k; ++kz) {
              int iz = oz * g.stride - g.pad + kz;
              if (iz < 0 || iz >= Dz) continue;
              for (int ky = 0; ky < g.k; ++ky) {
                int iy = oy * g.stride - g.pad + ky;
                if (iy < 0 || iy >= H) continue;
                for (int kx = 0; kx < g.k; ++kx) {
                  int ix = ox * g.stride - g.pad + kx;
                  if (ix >= 0 && ix < W)
                    x[((c * Dz + iz) * H + iy) * W + ix] +=
                        col[((c * g.k + kz) * g.k + ky) * g.k + kx];
                }
              }
            }
        }
  }
}

}  // namespace detail

// x: (cin, H, W); w: (cout, cin, k, k); b: (cout). Stride/pad symmetric.
template <class S>
Var<S> conv2d(Var<S> x, Var<S> w, Var<S> b, int stride, int pad) {
  using namespace detail;
  ConvGeom g;
  g.cin = x.dims()[0];
  g.cout = w.dims()[0];
  g.k = w.dims()[2];
  g.stride = stride;
  g.pad = pad;
  g.in_sp = {x.dims()[1], x.dims()[2]};
  g.out_sp = {conv_out_extent(g.in_sp[0], g.k, stride, pad),
              conv_out_extent(g.in_sp[1], g.k, stride, pad)};
  if (w.dims()[1] != g.cin || b.value().size() != g.cout)
    throw std::invalid_argument("conv2d: shape mismatch");

  Mat<S> cols;
  im2col(g, x.value().v.data(), cols);
  Tensor<S> out({g.cout, g.out_sp[0], g.out_sp[1]});
  ConstMatMap<S> Wm(w.value().v.data(), g.cout, g.patch());
  MatMap<S> Om(out.v.data(), g.cout, g.out_positions());
  Om = Wm * cols;
  Om.colwise() += Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>(b.value().v.data(), g.cout);

  int xi = x.id, wi = w.id, bi = b.id;
  int id = x.tape->push(
      std::move(out), {xi, wi, bi},
      [xi, wi, bi, g](Tape<S>& t, const Tensor<S>& adj, std::vector<Tensor<S>>& a) {
        ConstMatMap<S> Gm(adj.v.data(), g.cout, g.out_positions());
        ConstMatMap<S> Wm(t.value(wi).v.data(), g.cout, g.patch());
        // input gradient
        Mat<S> colg = Wm.transpose() * Gm;
        col2im(g, colg, a[xi].v.data());
        // weight gradient
        Mat<S> cols;
        im2col(g, t.value(xi).v.data(), cols);
        MatMap<S> Wg(a[wi].v.data(), g.cout, g.patch());
        Wg += Gm * cols.transpose();
        // bias gradient
        a[bi].v.matrix() += Gm.rowwise().sum();
      });
  return Var<S>{x.tape, id};
}

// Transposed 3D convolution: the adjoint of a stride-s conv3d.
// x: (cin, D, H, W); w: (cin, cout, k, k, k); b: (cout).
// Output spatial extent: (in-1)*stride - 2*pad + k.
template <class S>
Var<S> conv_transpose3d(Var<S> x, Var<S> w, Var<S> b, int stride, int pad) {
  using namespace detail;
  const int cin = x.dims()[0];
  const int cout = w.dims()[1];
  const int k = w.dims()[2];
  if (w.dims()[0] != cin || b.value().size() != cout)
    throw std::invalid_argument("conv_transpose3d: shape mismatch");
  Shape osp(3);
  for (int i = 0; i < 3; ++i) osp[i] = (x.dims()[1 + i] - 1) * stride - 2 * pad + k;
  // Geometry of the underlying conv (big -> small): cin_conv = cout here.
  ConvGeom g;
  g.cin = cout;
  g.cout = cin;
  g.k = k;
  g.stride = stride;
  g.pad = pad;
  g.in_sp = osp;
  g.out_sp = {x.dims()[1], x.dims()[2], x.dims()[3]};

  Tensor<S> out({cout, osp[0], osp[1], osp[2]});
  ConstMatMap<S> Wm(w.value().v.data(), g.cout, g.patch());
  ConstMatMap<S> Xm(x.value().v.data(), cin, g.out_positions());
  Mat<S> colg = Wm.transpose() * Xm;
  col2im(g, colg, out.v.data());
  {
    MatMap<S> Om(out.v.data(), cout, shape_size(osp));
    Om.colwise() +=
        Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>(b.value().v.data(), cout);
  }

  int xi = x.id, wi = w.id, bi = b.id;
  int id = x.tape->push(
      std::move(out), {xi, wi, bi},
      [xi, wi, bi, g, cin, cout](Tape<S>& t, const Tensor<S>& adj, std::vector<Tensor<S>>& a) {
        // input gradient: forward conv of the output adjoint
        Mat<S> cols;
        im2col(g, adj.v.data(), cols);
        ConstMatMap<S> Wm(t.value(wi).v.data(), g.cout, g.patch());
        MatMap<S> Xg(a[xi].v.data(), cin, g.out_positions());
        Xg += Wm * cols;
        // weight gradient: pairs (output adjoint patch, input value)
        ConstMatMap<S> Xm(t.value(xi).v.data(), cin, g.out_positions());
        MatMap<S> Wg(a[wi].v.data(), g.cout, g.patch());
        Wg += Xm * cols.transpose();
        // bias gradient
        ConstMatMap<S> Gm(adj.v.data(), cout, shape_size(g.in_sp));
        a[bi].v.matrix() += Gm.rowwise().sum();
      });
  return Var<S>{x.tape, id};
}

}  // namespace platonic
