#pragma once

#include "platonic/ops.hpp"

#include <Eigen/Geometry>

#include <cstdint>
#include <random>
#include <stdexcept>

namespace platonic {

// Deterministic random source. Draws are derived from the raw engine output
// so results are bitwise reproducible across standard library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double normal() {  // Box-Muller, mean 0, stddev 1
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  std::uint64_t raw() { return eng_(); }
  std::uint64_t below(std::uint64_t n) { return eng_() % n; }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Camera position on the unit sphere, looking at the origin, orthographic,
// upright (world up = +y). The canonical view has the identity rotation.
struct ViewDirection {
  Eigen::Vector3d omega;

  explicit ViewDirection(const Eigen::Vector3d& w) : omega(w) {
    if (std::abs(omega.norm() - 1.0) > 1e-6)
      throw std::invalid_argument("ViewDirection: not a unit vector");
  }

  static ViewDirection canonical() { return ViewDirection(Eigen::Vector3d(0, 0, -1)); }

  // Azimuth about +y, elevation toward +y, both degrees; (0,0) is canonical.
  static ViewDirection from_angles_deg(double az, double el) {
    double a = az * M_PI / 180.0, e = el * M_PI / 180.0;
    return ViewDirection(
        Eigen::Vector3d(std::sin(a) * std::cos(e), std::sin(e), -std::cos(a) * std::cos(e)));
  }

  double azimuth_deg() const { return std::atan2(omega.x(), -omega.z()) * 180.0 / M_PI; }
  double elevation_deg() const {
    return std::asin(std::clamp(omega.y(), -1.0, 1.0)) * 180.0 / M_PI;
  }
};

// Uniform on the sphere by area.
inline ViewDirection sample_view(Rng& rng) {
  double y = 1.0 - 2.0 * rng.uniform();
  double phi = 2.0 * M_PI * rng.uniform();
  double r = std::sqrt(std::max(0.0, 1.0 - y * y));
  return ViewDirection(Eigen::Vector3d(r * std::cos(phi), y, r * std::sin(phi)));
}

// World-to-camera rotation: rows are the camera axes expressed in world
// coordinates, camera depth axis = -omega. Near the +-y poles the up vector
// falls back to +x so the frame stays well defined.
inline Eigen::Matrix3d rotation_from_view(const ViewDirection& view) {
  Eigen::Vector3d f = -view.omega;
  Eigen::Vector3d up = std::abs(view.omega.y()) > 1.0 - 1e-6 ? Eigen::Vector3d(1, 0, 0)
                                                             : Eigen::Vector3d(0, 1, 0);
  Eigen::Vector3d r = up.cross(f).normalized();
  Eigen::Vector3d u = f.cross(r);
  Eigen::Matrix3d R;
  R.row(0) = r;
  R.row(1) = u;
  R.row(2) = f;
  return R;
}

// n_c-channel cubic grid, dims (nc, np, np, np), axes (channel, z, y, x),
// values in [0,1].
template <class S>
struct VoxelGrid {
  int nc = 0;
  int np = 0;
  Tensor<S> data;

  VoxelGrid() = default;
  VoxelGrid(int channels, int res)
      : nc(channels), np(res), data(Shape{channels, res, res, res}) {}
  VoxelGrid(int channels, int res, Tensor<S> d) : nc(channels), np(res), data(std::move(d)) {
    if (data.dims != Shape{channels, res, res, res})
      throw std::invalid_argument("VoxelGrid: dims mismatch");
  }

  S& at(int c, int z, int y, int x) { return data.v[((c * np + z) * np + y) * np + x]; }
  S at(int c, int z, int y, int x) const { return data.v[((c * np + z) * np + y) * np + x]; }
};

// n_c-channel square raster, dims (nc, np, np), axes (channel, y, x).
template <class S>
struct Image {
  int nc = 0;
  int np = 0;
  Tensor<S> data;

  Image() = default;
  Image(int channels, int res) : nc(channels), np(res), data(Shape{channels, res, res}) {}
  Image(int channels, int res, Tensor<S> d) : nc(channels), np(res), data(std::move(d)) {
    if (data.dims != Shape{channels, res, res})
      throw std::invalid_argument("Image: dims mismatch");
  }

  S& at(int c, int y, int x) { return data.v[(c * np + y) * np + x]; }
  S at(int c, int y, int x) const { return data.v[(c * np + y) * np + x]; }
};

namespace detail {

// Shared by forward gather and adjoint scatter: visits the 8 trilinear taps
// of every output voxel. Visitor signature: (out_index, in_index, weight).
template <class S, class Visit>
void trilinear_taps(const Shape& dims, const Eigen::Matrix3d& R, Visit&& visit) {
  const int nc = dims[0], np = dims[1];
  const Eigen::Matrix3d Rt = R.transpose();
  const std::int64_t plane = static_cast<std::int64_t>(np) * np;
  const std::int64_t cube = plane * np;
  for (int z = 0; z < np; ++z)
    for (int y = 0; y < np; ++y)
      for (int x = 0; x < np; ++x) {
        // output voxel center in normalized camera coordinates [-1,1]^3
        Eigen::Vector3d pc((x + 0.5) * 2.0 / np - 1.0, (y + 0.5) * 2.0 / np - 1.0,
                           (z + 0.5) * 2.0 / np - 1.0);
        Eigen::Vector3d pw = Rt * pc;
        // back to fractional grid coordinates of the source
        double gx = (pw.x() + 1.0) * 0.5 * np - 0.5;
        double gy = (pw.y() + 1.0) * 0.5 * np - 0.5;
        double gz = (pw.z() + 1.0) * 0.5 * np - 0.5;
        int x0 = static_cast<int>(std::floor(gx));
        int y0 = static_cast<int>(std::floor(gy));
        int z0 = static_cast<int>(std::floor(gz));
        double fx = gx - x0, fy = gy - y0, fz = gz - z0;
        std::int64_t oi = (static_cast<std::int64_t>(z) * np + y) * np + x;
        for (int dz = 0; dz < 2; ++dz) {
          int zi = z0 + dz;
          if (zi < 0 || zi >= np) continue;
          double wz = dz ? fz : 1.0 - fz;
          for (int dy = 0; dy < 2; ++dy) {
            int yi = y0 + dy;
            if (yi < 0 || yi >= np) continue;
            double wy = dy ? fy : 1.0 - fy;
            for (int dx = 0; dx < 2; ++dx) {
              int xi = x0 + dx;
              if (xi < 0 || xi >= np) continue;
              double w = wz * wy * (dx ? fx : 1.0 - fx);
              if (w == 0.0) continue;
              std::int64_t ii = (static_cast<std::int64_t>(zi) * np + yi) * np + xi;
              for (int c = 0; c < nc; ++c)
                visit(c * cube + oi, c * cube + ii, static_cast<S>(w));
            }
          }
        }
      }
}

}  // namespace detail

// Plain (non-tape) rotation + trilinear resampling onto the same grid shape.
// Samples outside the cube read zero.
template <class S>
Tensor<S> resample_grid(const Tensor<S>& v, const Eigen::Matrix3d& R) {
  Tensor<S> out(v.dims);
  detail::trilinear_taps<S>(v.dims, R, [&](std::int64_t oi, std::int64_t ii, S w) {
    out.v[oi] += w * v.v[ii];
  });
  return out;
}

// Tape-registered rotate + resample; the adjoint scatters the same weights.
template <class S>
Var<S> rotate_resample_op(Var<S> v, const Eigen::Matrix3d& R) {
  Tensor<S> out = resample_grid(v.value(), R);
  int vi = v.id;
  Shape dims = v.dims();
  int id = v.tape->push(std::move(out), {vi},
                        [vi, dims, R](Tape<S>&, const Tensor<S>& adj, std::vector<Tensor<S>>& a) {
                          auto& g = a[vi].v;
                          detail::trilinear_taps<S>(dims, R,
                                                    [&](std::int64_t oi, std::int64_t ii, S w) {
                                                      g[ii] += w * adj.v[oi];
                                                    });
                        });
  return Var<S>{v.tape, id};
}

template <class S>
VoxelGrid<S> rotate_resample(const VoxelGrid<S>& v, const ViewDirection& view) {
  return VoxelGrid<S>(v.nc, v.np, resample_grid(v.data, rotation_from_view(view)));
}

}  // namespace platonic
