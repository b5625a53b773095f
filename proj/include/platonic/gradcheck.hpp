#pragma once

#include "platonic/tape.hpp"

#include <cmath>
#include <functional>

namespace platonic {

// Central-difference check of an analytic gradient.
// f builds a fresh tape from the input tensor and returns the scalar loss node;
// the returned figure is max over coordinates of
// |analytic - central| / max(1, |analytic|). Non-finite values of f are
// reported as a failed check (infinity), not a crash.
template <class S>
struct GradCheckResult {
  S max_rel_error = S(0);
  bool finite = true;
};

template <class S>
GradCheckResult<S> finite_difference_check(
    const std::function<Var<S>(Tape<S>&, Var<S>)>& f, const Tensor<S>& x, S h) {
  GradCheckResult<S> res;
  Tensor<S> analytic;
  {
    Tape<S> tape;
    Var<S> xv = make_leaf(tape, x);
    Var<S> loss = f(tape, xv);
    auto adj = tape.backward(loss.id);
    analytic = adj[xv.id];
  }
  auto eval = [&](const Tensor<S>& pt) -> S {
    Tape<S> tape;
    Var<S> xv = make_leaf(tape, pt);
    return f(tape, xv).value().v[0];
  };
  for (std::int64_t i = 0; i < x.size(); ++i) {
    Tensor<S> xp = x, xm = x;
    xp.v[i] += h;
    xm.v[i] -= h;
    S fp = eval(xp), fm = eval(xm);
    if (!std::isfinite(fp) || !std::isfinite(fm) || !std::isfinite(analytic.v[i])) {
      res.finite = false;
      res.max_rel_error = std::numeric_limits<S>::infinity();
      return res;
    }
    S numeric = (fp - fm) / (S(2) * h);
    S err = std::abs(analytic.v[i] - numeric) / std::max(S(1), std::abs(analytic.v[i]));
    res.max_rel_error = std::max(res.max_rel_error, err);
  }
  return res;
}

}  // namespace platonic
