#pragma once

#include "platonic/render.hpp"

#include <limits>
#include <vector>

namespace platonic {

// Mean local SSIM over an 11x11 Gaussian window (sigma 1.5), constants
// K1=0.01, K2=0.03, dynamic range 1. Windows are kept fully inside the
// image; multi-channel images average per-channel SSIM.
template <class S>
S ssim(const Image<S>& a, const Image<S>& b) {
  if (a.data.dims != b.data.dims) throw std::invalid_argument("ssim: image dims mismatch");
  constexpr int W = 11;
  const int np = a.np;
  if (np < W) throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  static const std::vector<double> kernel = [] {
    std::vector<double> k(W);
    double sum = 0;
    for (int i = 0; i < W; ++i) {
      double d = i - (W - 1) / 2.0;
      k[i] = std::exp(-d * d / (2 * 1.5 * 1.5));
      sum += k[i];
    }
    for (auto& v : k) v /= sum;
    return k;
  }();
  const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;

  double total = 0;
  for (int c = 0; c < a.nc; ++c) {
    double acc = 0;
    std::int64_t count = 0;
    for (int y = 0; y + W <= np; ++y)
      for (int x = 0; x + W <= np; ++x) {
        double mu1 = 0, mu2 = 0, m11 = 0, m22 = 0, m12 = 0;
        for (int i = 0; i < W; ++i)
          for (int j = 0; j < W; ++j) {
            double w = kernel[i] * kernel[j];
            double p = a.at(c, y + i, x + j);
            double q = b.at(c, y + i, x + j);
            mu1 += w * p;
            mu2 += w * q;
            m11 += w * p * p;
            m22 += w * q * q;
            m12 += w * p * q;
          }
        double s1 = m11 - mu1 * mu1, s2 = m22 - mu2 * mu2, s12 = m12 - mu1 * mu2;
        acc += (2 * mu1 * mu2 + C1) * (2 * s12 + C2) /
               ((mu1 * mu1 + mu2 * mu2 + C1) * (s1 + s2 + C2));
        ++count;
      }
    total += acc / static_cast<double>(count);
  }
  return static_cast<S>(total / a.nc);
}

template <class S>
S dssim(const Image<S>& a, const Image<S>& b) {
  return (S(1) - ssim(a, b)) / S(2);
}

template <class S>
S rmse(const VoxelGrid<S>& a, const VoxelGrid<S>& b) {
  if (a.data.dims != b.data.dims) throw std::invalid_argument("rmse: grid dims mismatch");
  return static_cast<S>(std::sqrt((a.data.v - b.data.v).square().mean()));
}

template <class S>
S binary_iou(const Tensor<S>& a, const Tensor<S>& b, S threshold) {
  if (a.dims != b.dims) throw std::invalid_argument("iou: dims mismatch");
  std::int64_t inter = 0, uni = 0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    bool pa = a.v[i] > threshold, pb = b.v[i] > threshold;
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni == 0 ? S(1) : static_cast<S>(double(inter) / double(uni));
}

template <class S>
S iou(const VoxelGrid<S>& a, const VoxelGrid<S>& b, S threshold = S(0.5)) {
  return binary_iou(a.data, b.data, threshold);
}

// Weighted directional chamfer distance: for each occupied voxel of T, the
// minimum over occupied voxels of O of (density at O) * squared distance,
// averaged over the total voxel count n_p^3. Coordinates in voxel units.
// Density channel: the absorption channel for 4-channel grids, channel 0
// otherwise. Occupancy cutoff epsilon excludes exact-zero empty space.
// Empty O with nonempty T yields +infinity.
template <class S>
S chamfer_weighted(const VoxelGrid<S>& target_points, const VoxelGrid<S>& reference,
                   S epsilon = S(1e-3)) {
  if (target_points.np != reference.np)
    throw std::invalid_argument("chamfer: resolution mismatch");
  const int np = target_points.np;
  auto density_channel = [](const VoxelGrid<S>& g) { return g.nc == 4 ? 3 : 0; };
  struct Point {
    double x, y, z;
    double w;
  };
  auto collect = [&](const VoxelGrid<S>& g) {
    std::vector<Point> pts;
    const int c = density_channel(g);
    for (int z = 0; z < np; ++z)
      for (int y = 0; y < np; ++y)
        for (int x = 0; x < np; ++x) {
          S d = g.at(c, z, y, x);
          if (d > epsilon)
            pts.push_back(Point{double(x), double(y), double(z), static_cast<double>(d)});
        }
    return pts;
  };
  auto T = collect(target_points);
  auto O = collect(reference);
  if (T.empty()) return S(0);
  if (O.empty()) return std::numeric_limits<S>::infinity();
  double sum = 0;
  for (const auto& p : T) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : O) {
      double dx = p.x - q.x, dy = p.y - q.y, dz = p.z - q.z;
      double d = q.w * (dx * dx + dy * dy + dz * dz);
      if (d < best) best = d;
    }
    sum += best;
  }
  const double n = double(np) * np * np;
  return static_cast<S>(sum / n);
}

template <class S>
struct EvalReport {
  std::vector<S> per_view_dssim;  // 10 entries
  S mean_dssim = 0;
  S rmse = 0;
  S iou = 0;
  S chamfer = 0;
  std::uint64_t view_seed = 0;
};

// Renders both grids from 10 seeded random views and reports mean DSSIM plus
// the 3D metrics. Deterministic given the view seed.
template <class S>
EvalReport<S> evaluate(const VoxelGrid<S>& recon, const VoxelGrid<S>& truth, ImageFormation f,
                       std::uint64_t view_seed, S iou_threshold = S(0.5),
                       S chamfer_epsilon = S(1e-3)) {
  if (recon.data.dims != truth.data.dims)
    throw std::invalid_argument("evaluate: grid dims mismatch");
  EvalReport<S> report;
  report.view_seed = view_seed;
  Rng rng(view_seed);
  constexpr int kViews = 10;
  for (int i = 0; i < kViews; ++i) {
    auto view = sample_view(rng);
    auto ir = render(view, recon, f);
    auto it = render(view, truth, f);
    report.per_view_dssim.push_back(dssim(ir, it));
  }
  S sum = 0;
  for (S d : report.per_view_dssim) sum += d;
  report.mean_dssim = sum / static_cast<S>(kViews);
  report.rmse = platonic::rmse(recon, truth);
  report.iou = platonic::iou(recon, truth, iou_threshold);
  report.chamfer = chamfer_weighted(recon, truth, chamfer_epsilon);
  return report;
}

}  // namespace platonic
