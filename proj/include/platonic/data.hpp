#pragma once

#include "platonic/io.hpp"
#include "platonic/render.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace platonic {

// Analytic solid primitives, voxelized by a center-of-voxel inside test.
// Coordinates are normalized cube units [-1,1]; every shape must fit inside
// the inscribed unit sphere so rotations never clip it.
struct ShapePrimitive {
  enum class Kind { Sphere, Box, Torus };
  Kind kind = Kind::Sphere;
  std::array<double, 3> center{0, 0, 0};
  // sphere: size[0] = radius; box: half extents; torus: major/minor radius,
  // axis +y
  std::array<double, 3> size{0.4, 0.4, 0.4};
  double density = 1.0;
  std::array<double, 3> color{1, 1, 1};

  double bounding_radius() const {
    double c = std::sqrt(center[0] * center[0] + center[1] * center[1] + center[2] * center[2]);
    switch (kind) {
      case Kind::Sphere: return c + size[0];
      case Kind::Box:
        return c + std::sqrt(size[0] * size[0] + size[1] * size[1] + size[2] * size[2]);
      case Kind::Torus: return c + size[0] + size[1];
    }
    return 2.0;
  }

  bool contains(double x, double y, double z) const {
    double dx = x - center[0], dy = y - center[1], dz = z - center[2];
    switch (kind) {
      case Kind::Sphere: return dx * dx + dy * dy + dz * dz < size[0] * size[0];
      case Kind::Box:
        return std::abs(dx) < size[0] && std::abs(dy) < size[1] && std::abs(dz) < size[2];
      case Kind::Torus: {
        double q = std::sqrt(dx * dx + dz * dz) - size[0];
        return q * q + dy * dy < size[1] * size[1];
      }
    }
    return false;
  }
};

// A shape is a union of primitives; later primitives win where they overlap.
struct ShapeRecipe {
  std::string id;
  std::vector<ShapePrimitive> prims;
};

template <class S>
VoxelGrid<S> voxelize(const ShapeRecipe& recipe, int np, int nc) {
  for (const auto& p : recipe.prims)
    if (p.bounding_radius() > 1.0 + 1e-9)
      throw std::invalid_argument("recipe '" + recipe.id + "' exceeds the inscribed sphere");
  VoxelGrid<S> grid(nc, np);
  for (int z = 0; z < np; ++z)
    for (int y = 0; y < np; ++y)
      for (int x = 0; x < np; ++x) {
        double px = (x + 0.5) * 2.0 / np - 1.0;
        double py = (y + 0.5) * 2.0 / np - 1.0;
        double pz = (z + 0.5) * 2.0 / np - 1.0;
        for (const auto& p : recipe.prims) {
          if (!p.contains(px, py, pz)) continue;
          if (nc == 1) {
            grid.at(0, z, y, x) = static_cast<S>(p.density);
          } else {
            for (int c = 0; c < 3; ++c) grid.at(c, z, y, x) = static_cast<S>(p.color[c]);
            grid.at(3, z, y, x) = static_cast<S>(p.density);
          }
        }
      }
  return grid;
}

template <class S>
struct SynthSample {
  int shape_index = 0;
  ViewDirection view = ViewDirection::canonical();
  Image<S> image;
};

template <class S>
struct SynthDataset {
  int np = 0;
  ImageFormation formation = ImageFormation::AO;
  std::vector<ShapeRecipe> recipes;
  std::vector<VoxelGrid<S>> grids;      // one per recipe
  std::vector<SynthSample<S>> samples;  // views_per_shape per recipe
};

// Voxelizes each recipe and renders `views_per_shape` uniformly sampled
// views with the chosen formation. Deterministic given the seed.
template <class S>
SynthDataset<S> synth_dataset(const std::vector<ShapeRecipe>& recipes, int views_per_shape,
                              ImageFormation formation, int np, Rng& rng) {
  if (recipes.empty()) throw std::invalid_argument("synth_dataset: no recipes");
  SynthDataset<S> ds;
  ds.np = np;
  ds.formation = formation;
  ds.recipes = recipes;
  const int nc = formation_channels(formation);
  for (int si = 0; si < static_cast<int>(recipes.size()); ++si) {
    ds.grids.push_back(voxelize<S>(recipes[si], np, nc));
    for (int v = 0; v < views_per_shape; ++v) {
      ViewDirection view = sample_view(rng);
      SynthSample<S> sample{si, view, render(view, ds.grids.back(), formation)};
      ds.samples.push_back(std::move(sample));
    }
  }
  return ds;
}

// Default sphere family for desk-scale runs: centered spheres, full density,
// radii spread over [0.18, 0.5].
inline std::vector<ShapeRecipe> sphere_family(int count) {
  std::vector<ShapeRecipe> recipes;
  for (int i = 0; i < count; ++i) {
    double t = count == 1 ? 0.5 : double(i) / (count - 1);
    ShapePrimitive p;
    p.kind = ShapePrimitive::Kind::Sphere;
    p.size = {0.18 + 0.32 * t, 0, 0};
    p.density = 1.0;
    ShapeRecipe r;
    r.id = "sphere" + std::to_string(i);
    r.prims = {p};
    recipes.push_back(std::move(r));
  }
  return recipes;
}

// Manifest: one comma-separated line per sample:
// image path, grid path, view azimuth (deg), view elevation (deg), recipe id.
struct ManifestRow {
  std::string image_path;
  std::string grid_path;
  double azimuth_deg = 0;
  double elevation_deg = 0;
  std::string recipe_id;
};

inline void write_manifest(const std::vector<ManifestRow>& rows, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for write: " + path);
  os.precision(17);
  for (const auto& r : rows)
    os << r.image_path << ',' << r.grid_path << ',' << r.azimuth_deg << ',' << r.elevation_deg
       << ',' << r.recipe_id << '\n';
  if (!os) throw IoError("write failed: " + path);
}

inline std::vector<ManifestRow> read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  std::vector<ManifestRow> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (int i = 0; i < 4; ++i) {
      auto comma = line.find(',', start);
      if (comma == std::string::npos) throw FormatError("bad manifest row: " + line);
      parts.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    parts.push_back(line.substr(start));
    rows.push_back(ManifestRow{parts[0], parts[1], std::stod(parts[2]), std::stod(parts[3]),
                               parts[4]});
  }
  return rows;
}

// Writes images, grids and the manifest under out_dir.
template <class S>
std::vector<ManifestRow> save_dataset(const SynthDataset<S>& ds, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<std::string> grid_paths;
  for (std::size_t si = 0; si < ds.grids.size(); ++si) {
    std::string p = (fs::path(out_dir) / (ds.recipes[si].id + ".pvox")).string();
    if constexpr (std::is_same_v<S, float>) {
      save_volume(ds.grids[si], p);
    } else {
      save_volume(VoxelGrid<float>(ds.grids[si].nc, ds.grids[si].np,
                                   ds.grids[si].data.template cast<float>()),
                  p);
    }
    grid_paths.push_back(p);
  }
  std::vector<ManifestRow> rows;
  std::vector<int> counter(ds.grids.size(), 0);
  for (const auto& s : ds.samples) {
    std::string name =
        ds.recipes[s.shape_index].id + "_v" + std::to_string(counter[s.shape_index]++) + ".png";
    std::string p = (std::filesystem::path(out_dir) / name).string();
    if constexpr (std::is_same_v<S, float>) {
      save_image(s.image, p);
    } else {
      save_image(Image<float>(s.image.nc, s.image.np, s.image.data.template cast<float>()), p);
    }
    rows.push_back(ManifestRow{p, grid_paths[s.shape_index], s.view.azimuth_deg(),
                               s.view.elevation_deg(), ds.recipes[s.shape_index].id});
  }
  write_manifest(rows, (std::filesystem::path(out_dir) / "manifest.csv").string());
  return rows;
}

}  // namespace platonic
