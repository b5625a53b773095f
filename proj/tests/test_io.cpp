#include "platonic/data.hpp"
#include "platonic/io.hpp"
#include "platonic/metrics.hpp"

#include <doctest.h>

#include <filesystem>
#include <sstream>

using namespace platonic;
namespace fs = std::filesystem;

namespace {

struct TmpDir {
  fs::path path;
  explicit TmpDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TmpDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("pvox round trip and layout") {
  TmpDir tmp("pvox_test");
  Rng rng(3);
  VoxelGrid<float> g(1, 4);
  for (std::int64_t i = 0; i < g.data.size(); ++i) g.data.v[i] = float(rng.uniform());
  auto path = tmp.file("g.pvox");
  save_volume(g, path);

  // magic + version + nc + np headers, then 64 f32 values
  CHECK(fs::file_size(path) == 16 + 256);

  auto h = load_volume(path);
  CHECK(h.nc == 1);
  CHECK(h.np == 4);
  for (std::int64_t i = 0; i < g.data.size(); ++i) CHECK(h.data.v[i] == g.data.v[i]);

  VoxelGrid<float> g4(4, 8);
  g4.data.v.setRandom();
  auto path4 = tmp.file("g4.pvox");
  save_volume(g4, path4);
  auto h4 = load_volume(path4);
  CHECK(h4.nc == 4);
  CHECK(h4.np == 8);
  for (std::int64_t i = 0; i < g4.data.size(); ++i) CHECK(h4.data.v[i] == g4.data.v[i]);
}

TEST_CASE("pvox rejects bad headers") {
  TmpDir tmp("pvox_bad");
  auto bad = tmp.file("bad.pvox");
  {
    std::ofstream os(bad, std::ios::binary);
    os << "XVOXgarbagegarbage";
  }
  CHECK_THROWS_AS((void)load_volume(bad), FormatError);

  auto truncated = tmp.file("short.pvox");
  {
    VoxelGrid<float> g(1, 4);
    save_volume(g, truncated);
    fs::resize_file(truncated, 40);  // cut into the payload
  }
  CHECK_THROWS_AS((void)load_volume(truncated), IoError);

  CHECK_THROWS_AS((void)load_volume(tmp.file("missing.pvox")), IoError);
}

TEST_CASE("png round trip within quantization") {
  TmpDir tmp("png_test");
  Rng rng(9);
  for (int nc : {1, 3}) {
    Image<float> img(nc, 16);
    for (std::int64_t i = 0; i < img.data.size(); ++i) img.data.v[i] = float(rng.uniform());
    auto path = tmp.file("img" + std::to_string(nc) + ".png");
    save_image(img, path);
    auto back = load_image(path, 16, nc);
    CHECK(back.nc == nc);
    CHECK(back.np == 16);
    float max_err = (back.data.v - img.data.v).abs().maxCoeff();
    CHECK(max_err <= 1.0f / 255.0f);
  }
}

TEST_CASE("transparent pixels composite onto white") {
  TmpDir tmp("png_alpha");
  RawImage raw;
  raw.width = raw.height = 8;
  raw.channels = 4;
  raw.pixels.assign(8 * 8 * 4, 0);  // black, fully transparent
  auto path = tmp.file("alpha.png");
  png_write(raw, path);
  auto img = load_image(path, 8, 3);
  CHECK((img.data.v - 1.0f).abs().maxCoeff() < 1e-6f);
  // with channels=4 the alpha mask is preserved
  auto img4 = load_image(path, 8, 4);
  for (int i = 0; i < 64; ++i) CHECK(img4.data.v[3 * 64 + i] == 0.0f);
}

TEST_CASE("area resize averages 2x2 blocks on a power-of-two downscale") {
  Rng rng(21);
  const int w = 128;
  std::vector<float> src(w * w);
  for (auto& v : src) v = float(rng.uniform());
  auto dst = area_resize(src, w, w, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      float mean = (src[(2 * y) * w + 2 * x] + src[(2 * y) * w + 2 * x + 1] +
                    src[(2 * y + 1) * w + 2 * x] + src[(2 * y + 1) * w + 2 * x + 1]) /
                   4.0f;
      CHECK(std::abs(dst[y * 64 + x] - mean) < 1e-6f);
    }
  // identity resize is exact
  auto same = area_resize(src, w, w, w);
  for (int i = 0; i < w * w; ++i) CHECK(same[i] == doctest::Approx(src[i]).epsilon(1e-7));
}

TEST_CASE("pnet rejects bad magic") {
  TmpDir tmp("pnet_bad");
  auto bad = tmp.file("bad.pnet");
  {
    std::ofstream os(bad, std::ios::binary);
    os << "NOPE";
  }
  CHECK_THROWS_AS((void)load_checkpoint<float>(bad), FormatError);
}

TEST_CASE("config parsing") {
  std::istringstream good(R"(# a comment
np = 32
formation=ao

lambda = 100.0   # trailing comment
name = spheres
)");
  auto kv = parse_config_text(good);
  CHECK(kv.size() == 4);
  CHECK(kv["np"] == "32");
  CHECK(kv["formation"] == "ao");
  CHECK(kv["lambda"] == "100.0");
  CHECK(kv["name"] == "spheres");

  std::istringstream noeq("np 32\n");
  CHECK_THROWS_AS((void)parse_config_text(noeq), ConfigError);
  std::istringstream nokey("= 32\n");
  CHECK_THROWS_AS((void)parse_config_text(nokey), ConfigError);
  CHECK_THROWS_AS((void)parse_config_file("/nonexistent/config.txt"), IoError);
}

TEST_CASE("voxelizer basics") {
  // zero radius gives an empty grid
  ShapeRecipe empty;
  empty.id = "empty";
  ShapePrimitive p0;
  p0.size = {0, 0, 0};
  empty.prims = {p0};
  auto ge = voxelize<float>(empty, 16, 1);
  CHECK(ge.data.v.maxCoeff() == 0.0f);

  // half-radius sphere occupies close to its analytic volume
  ShapeRecipe half;
  half.id = "half";
  ShapePrimitive ph;
  ph.size = {0.5, 0, 0};
  half.prims = {ph};
  auto gh = voxelize<double>(half, 32, 1);
  double occupied = (gh.data.v > 0.5).count();
  double analytic = 4.0 / 3.0 * M_PI * 8.0 * 8.0 * 8.0;
  CHECK(occupied == doctest::Approx(analytic).epsilon(0.05));

  // shapes sticking out of the inscribed sphere are rejected
  ShapeRecipe big;
  big.id = "big";
  ShapePrimitive pb;
  pb.size = {0.8, 0, 0};
  pb.center = {0.5, 0, 0};
  big.prims = {pb};
  CHECK_THROWS_AS((void)voxelize<float>(big, 16, 1), std::invalid_argument);

  // 4-channel voxelization stores color and density
  ShapeRecipe tinted = half;
  tinted.prims[0].color = {1.0, 0.25, 0.5};
  tinted.prims[0].density = 0.75;
  auto gt = voxelize<double>(tinted, 16, 4);
  CHECK(gt.at(0, 8, 8, 8) == 1.0);
  CHECK(gt.at(1, 8, 8, 8) == 0.25);
  CHECK(gt.at(2, 8, 8, 8) == 0.5);
  CHECK(gt.at(3, 8, 8, 8) == 0.75);
}

TEST_CASE("manifest round trip") {
  TmpDir tmp("manifest_test");
  std::vector<ManifestRow> rows = {
      {"imgs/a_v0.png", "grids/a.pvox", 12.5, -30.25, "a"},
      {"imgs/b_v0.png", "grids/b.pvox", 359.0, 89.0, "b"},
  };
  auto path = tmp.file("manifest.csv");
  write_manifest(rows, path);
  auto back = read_manifest(path);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].image_path == rows[i].image_path);
    CHECK(back[i].grid_path == rows[i].grid_path);
    CHECK(back[i].azimuth_deg == rows[i].azimuth_deg);
    CHECK(back[i].elevation_deg == rows[i].elevation_deg);
    CHECK(back[i].recipe_id == rows[i].recipe_id);
  }
  CHECK_THROWS_AS((void)read_manifest(tmp.file("missing.csv")), IoError);
}

TEST_CASE("saved dataset reproduces its own renders") {
  TmpDir tmp("dataset_test");
  Rng rng(31);
  auto ds = synth_dataset<float>(sphere_family(2), 2, ImageFormation::AO, 16, rng);
  REQUIRE(ds.samples.size() == 4);

  // the stored view reproduces the stored image exactly in memory
  for (const auto& s : ds.samples) {
    auto view = ViewDirection::from_angles_deg(s.view.azimuth_deg(), s.view.elevation_deg());
    auto re = render(view, ds.grids[s.shape_index], ds.formation);
    CHECK((re.data.v - s.image.data.v).abs().maxCoeff() < 1e-6f);
  }

  // and through the files within PNG quantization
  auto rows = save_dataset(ds, tmp.file("out"));
  REQUIRE(rows.size() == 4);
  for (const auto& row : rows) {
    auto grid = load_volume(row.grid_path);
    auto img = load_image(row.image_path, 16, 1);
    auto view = ViewDirection::from_angles_deg(row.azimuth_deg, row.elevation_deg);
    auto re = render(view, grid, ImageFormation::AO);
    CHECK((re.data.v - img.data.v).abs().maxCoeff() <= 1.0f / 255.0f);
  }
  CHECK(fs::exists(tmp.file("out") + "/manifest.csv"));
}
