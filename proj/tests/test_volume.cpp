#include "platonic/gradcheck.hpp"
#include "platonic/volume.hpp"

#include <doctest.h>

using namespace platonic;

namespace {

// Centered Gaussian blob, fully supported inside the inscribed sphere.
Tensor<double> gaussian_blob(int np, double sigma = 0.25) {
  Tensor<double> t({1, np, np, np});
  for (int z = 0; z < np; ++z)
    for (int y = 0; y < np; ++y)
      for (int x = 0; x < np; ++x) {
        double px = (x + 0.5) * 2.0 / np - 1.0;
        double py = (y + 0.5) * 2.0 / np - 1.0;
        double pz = (z + 0.5) * 2.0 / np - 1.0;
        double r2 = px * px + py * py + pz * pz;
        t.v[(static_cast<std::int64_t>(z) * np + y) * np + x] =
            r2 < 0.6 * 0.6 ? std::exp(-r2 / (2 * sigma * sigma)) : 0.0;
      }
  return t;
}

}  // namespace

TEST_CASE("uniform view sampling statistics") {
  Rng rng(2024);
  const int n = 1000000;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  int upper = 0;
  std::vector<int> bins(48, 0);  // 8 longitudes x 6 equal-area y slabs
  for (int i = 0; i < n; ++i) {
    auto v = sample_view(rng);
    mean += v.omega;
    if (v.omega.z() > 0) ++upper;
    int slab = std::min(5, static_cast<int>((v.omega.y() + 1.0) / 2.0 * 6.0));
    double phi = std::atan2(v.omega.z(), v.omega.x());
    int lon = std::min(7, static_cast<int>((phi + M_PI) / (2 * M_PI) * 8.0));
    ++bins[slab * 8 + lon];
  }
  mean /= n;
  CHECK(std::abs(mean.x()) < 0.01);
  CHECK(std::abs(mean.y()) < 0.01);
  CHECK(std::abs(mean.z()) < 0.01);
  CHECK(std::abs(upper / double(n) - 0.5) < 0.01);

  // chi-square over 48 equal-area bins, 47 dof, significance 0.01
  double expected = n / 48.0;
  double chi2 = 0;
  for (int b : bins) chi2 += (b - expected) * (b - expected) / expected;
  CHECK(chi2 < 72.443);
}

TEST_CASE("rotation from view") {
  auto I = rotation_from_view(ViewDirection::canonical());
  CHECK((I - Eigen::Matrix3d::Identity()).norm() < 1e-12);

  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    auto v = sample_view(rng);
    auto R = rotation_from_view(v);
    CHECK((R.transpose() * R - Eigen::Matrix3d::Identity()).norm() < 1e-6);
    CHECK(R.determinant() == doctest::Approx(1.0).epsilon(1e-6));
    // depth axis is -omega
    CHECK((R.row(2).transpose() + v.omega).norm() < 1e-9);
  }

  // exact pole uses the fallback up vector
  auto Rp = rotation_from_view(ViewDirection(Eigen::Vector3d(0, 1, 0)));
  CHECK((Rp.transpose() * Rp - Eigen::Matrix3d::Identity()).norm() < 1e-9);
  CHECK(Rp.determinant() == doctest::Approx(1.0));
}

TEST_CASE("view angle round trip") {
  auto v = ViewDirection::from_angles_deg(0, 0);
  CHECK((v.omega - Eigen::Vector3d(0, 0, -1)).norm() < 1e-12);
  auto w = ViewDirection::from_angles_deg(37, -21);
  CHECK(w.azimuth_deg() == doctest::Approx(37).epsilon(1e-9));
  CHECK(w.elevation_deg() == doctest::Approx(-21).epsilon(1e-9));
}

TEST_CASE("identity rotation resamples exactly") {
  Rng rng(8);
  const int np = 8;
  Tensor<double> t({2, np, np, np});
  for (std::int64_t i = 0; i < t.size(); ++i) t.v[i] = rng.uniform();
  auto out = resample_grid(t, rotation_from_view(ViewDirection::canonical()));
  for (std::int64_t i = 0; i < t.size(); ++i) CHECK(out.v[i] == t.v[i]);
}

TEST_CASE("axis-aligned 90 degree rotation is an exact index permutation") {
  const int np = 8;
  Tensor<double> t({1, np, np, np});
  auto idx = [&](int z, int y, int x) { return (static_cast<std::int64_t>(z) * np + y) * np + x; };
  t.v[idx(2, 3, 5)] = 1.0;

  // camera rotated 90 degrees about +y
  auto view = ViewDirection::from_angles_deg(90, 0);
  auto out = resample_grid(t, rotation_from_view(view));

  // closed-form permutation for this rotation: the marked voxel moves to the
  // index whose camera coordinates equal R * world coordinates
  auto R = rotation_from_view(view);
  Eigen::Vector3d pw((5 + 0.5) * 2.0 / np - 1, (3 + 0.5) * 2.0 / np - 1, (2 + 0.5) * 2.0 / np - 1);
  Eigen::Vector3d pc = R * pw;
  int ex = static_cast<int>(std::round((pc.x() + 1) * 0.5 * np - 0.5));
  int ey = static_cast<int>(std::round((pc.y() + 1) * 0.5 * np - 0.5));
  int ez = static_cast<int>(std::round((pc.z() + 1) * 0.5 * np - 0.5));
  double mass = 0;
  for (std::int64_t i = 0; i < out.size(); ++i) mass += out.v[i];
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(out.v[idx(ez, ey, ex)] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("mass preserved for interior support") {
  const int np = 16;
  auto t = gaussian_blob(np);
  double mass0 = t.v.sum();
  Rng rng(77);
  for (int i = 0; i < 5; ++i) {
    auto view = sample_view(rng);
    auto out = resample_grid(t, rotation_from_view(view));
    CHECK(std::abs(out.v.sum() - mass0) / mass0 < 0.02);
  }
}

TEST_CASE("rotate then inverse-rotate reproduces a smooth volume") {
  const int np = 16;
  auto t = gaussian_blob(np);
  auto view = ViewDirection::from_angles_deg(33, 17);
  auto R = rotation_from_view(view);
  auto fwd = resample_grid(t, R);
  auto back = resample_grid(fwd, Eigen::Matrix3d(R.transpose()));
  double mse = (back.v - t.v).square().mean();
  double psnr = 10 * std::log10(1.0 / mse);
  CHECK(psnr > 30.0);
}

TEST_CASE("values stay in [0,1]") {
  Rng rng(4);
  const int np = 8;
  Tensor<double> t({1, np, np, np});
  for (std::int64_t i = 0; i < t.size(); ++i) t.v[i] = rng.uniform();
  auto out = resample_grid(t, rotation_from_view(sample_view(rng)));
  CHECK(out.v.minCoeff() >= 0.0);
  CHECK(out.v.maxCoeff() <= 1.0);
}

TEST_CASE("resampling adjoint passes finite differences") {
  Rng rng(21);
  const int np = 5;
  Tensor<double> t({1, np, np, np});
  // keep sample points away from interpolation cell boundaries
  for (std::int64_t i = 0; i < t.size(); ++i) t.v[i] = 0.1 + 0.8 * rng.uniform();
  auto R = rotation_from_view(ViewDirection::from_angles_deg(31.7, 12.3));
  auto res = finite_difference_check<double>(
      [&](Tape<double>&, Var<double> v) {
        auto out = rotate_resample_op(v, R);
        return sum_all(mul(out, out));
      },
      t, 1e-4);
  CHECK(res.max_rel_error < 1e-3);
}
