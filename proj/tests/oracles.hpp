#pragma once

// Test-only reference implementations, written as plain scalar loops and kept
// independent of the tape-based code paths they check.

#include "platonic/render.hpp"

#include <vector>

namespace oracles {

using platonic::ImageFormation;
using platonic::Shape;
using platonic::Tensor;

// Per-pixel scalar-loop projection of a camera-space grid (nc, nz, ny, nx).
template <class S>
Tensor<S> project_reference(const Tensor<S>& v, ImageFormation mode) {
  const int nc = v.dims[0], nz = v.dims[1], ny = v.dims[2], nx = v.dims[3];
  const auto at = [&](int c, int z, int y, int x) {
    return v.v[((static_cast<std::int64_t>(c) * nz + z) * ny + y) * nx + x];
  };
  const int oc = (mode == ImageFormation::VH || mode == ImageFormation::AO) ? 1 : 3;
  Tensor<S> img(Shape{oc, ny, nx});
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      if (mode == ImageFormation::VH) {
        S s = 0;
        for (int z = 0; z < nz; ++z) s += at(0, z, y, x);
        img.v[(0 * ny + y) * nx + x] = S(1) - std::exp(-s);
      } else if (mode == ImageFormation::AO) {
        S p = 1;
        for (int z = 0; z < nz; ++z) p *= S(1) - at(0, z, y, x);
        img.v[(0 * ny + y) * nx + x] = S(1) - p;
      } else if (mode == ImageFormation::EA_PAPER) {
        for (int c = 0; c < 3; ++c) {
          S out = 0, prod = 1;
          for (int z = 0; z < nz; ++z) {
            prod *= S(1) - at(3, z, y, x);
            out += (S(1) - prod) * at(c, z, y, x);
          }
          img.v[(static_cast<std::int64_t>(c) * ny + y) * nx + x] = out;
        }
      } else {
        for (int c = 0; c < 3; ++c) {
          S out = 0, trans = 1;
          for (int z = 0; z < nz; ++z) {
            out += trans * at(3, z, y, x) * at(c, z, y, x);
            trans *= S(1) - at(3, z, y, x);
          }
          img.v[(static_cast<std::int64_t>(c) * ny + y) * nx + x] = out;
        }
      }
    }
  return img;
}

// Dense Jacobian of cumprod along a 1-D input by direct formula:
// J[k][j] = d out_k / d x_j = prod_{t<=k, t!=j} x_t for j <= k, else 0.
template <class S>
std::vector<std::vector<S>> cumprod_jacobian(const std::vector<S>& x) {
  const int n = static_cast<int>(x.size());
  std::vector<std::vector<S>> J(n, std::vector<S>(n, S(0)));
  for (int k = 0; k < n; ++k)
    for (int j = 0; j <= k; ++j) {
      S p = 1;
      for (int t = 0; t <= k; ++t)
        if (t != j) p *= x[t];
      J[k][j] = p;
    }
  return J;
}

}  // namespace oracles
