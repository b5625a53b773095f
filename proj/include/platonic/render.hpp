#pragma once

#include "platonic/volume.hpp"

namespace platonic {

// Image formation along the camera depth axis. EA_PAPER accumulates the
// occlusion factor including the voxel's own absorption and is not bounded
// by 1; EA_COMPOSITE is standard front-to-back compositing.
enum class ImageFormation { VH, AO, EA_PAPER, EA_COMPOSITE };

inline int formation_channels(ImageFormation f) {
  return (f == ImageFormation::VH || f == ImageFormation::AO) ? 1 : 4;
}

inline int formation_image_channels(ImageFormation f) {
  return (f == ImageFormation::VH || f == ImageFormation::AO) ? 1 : 3;
}

inline const char* formation_name(ImageFormation f) {
  switch (f) {
    case ImageFormation::VH: return "vh";
    case ImageFormation::AO: return "ao";
    case ImageFormation::EA_PAPER: return "ea-paper";
    case ImageFormation::EA_COMPOSITE: return "ea-composite";
  }
  return "?";
}

inline bool parse_formation(const std::string& s, ImageFormation& out) {
  if (s == "vh") out = ImageFormation::VH;
  else if (s == "ao") out = ImageFormation::AO;
  else if (s == "ea-paper") out = ImageFormation::EA_PAPER;
  else if (s == "ea-composite") out = ImageFormation::EA_COMPOSITE;
  else return false;
  return true;
}

struct RenderOptions {
  // Evaluate cumulative products as exp(cumsum(log .)) with inputs clamped
  // to >= 1e-7. Numerically interchangeable with the direct scan.
  bool log_domain = false;
};

namespace detail {

template <class S>
Var<S> cumprod_depth(Var<S> x, const RenderOptions& opt) {
  if (!opt.log_domain) return cumprod(x, 0);
  return exp_op(cumsum(log_op(clamp_min(x, S(1e-7))), 0));
}

template <class S>
void check_grid_channels(const Var<S>& v, ImageFormation f) {
  if (v.dims().size() != 4 || v.dims()[0] != formation_channels(f))
    throw std::invalid_argument("render: grid channels incompatible with image formation");
}

}  // namespace detail

// Visual hull: pixel = 1 - exp(-sum of densities along the ray).
// v: camera-space grid (1, nz, ny, nx) -> image (1, ny, nx).
template <class S>
Var<S> project_vh(Var<S> v) {
  detail::check_grid_channels(v, ImageFormation::VH);
  Var<S> s = sum_axis(v, 1);  // (1, ny, nx)
  return rsub_scalar(S(1), exp_op(neg(s)));
}

// Absorption-only: pixel = 1 - prod(1 - density) along the ray.
template <class S>
Var<S> project_ao(Var<S> v, const RenderOptions& opt = {}) {
  detail::check_grid_channels(v, ImageFormation::AO);
  Var<S> depth = slice_axis(v, 0, 0);  // (nz, ny, nx)
  Var<S> cp = detail::cumprod_depth(rsub_scalar(S(1), depth), opt);
  Var<S> last = slice_axis(cp, 0, v.dims()[1] - 1);  // (ny, nx)
  return reshape(rsub_scalar(S(1), last), {1, v.dims()[2], v.dims()[3]});
}

// Emission-absorption over RGB emission (channels 0..2) and scalar
// absorption (channel 3), front to back (index 0 nearest the camera).
template <class S>
Var<S> project_ea(Var<S> v, ImageFormation mode, const RenderOptions& opt = {}) {
  detail::check_grid_channels(v, mode);
  Var<S> va = slice_axis(v, 0, 3);  // (nz, ny, nx)
  Var<S> cp = detail::cumprod_depth(rsub_scalar(S(1), va), opt);
  Var<S> weight;
  if (mode == ImageFormation::EA_PAPER) {
    // occlusion factor including voxel i itself, unbounded sum
    weight = rsub_scalar(S(1), cp);
  } else {
    // transmittance of voxels strictly before i, times local opacity
    weight = mul(shift_one(cp, 0, S(1)), va);
  }
  std::vector<Var<S>> channels;
  for (int c = 0; c < 3; ++c)
    channels.push_back(sum_axis(mul(weight, slice_axis(v, 0, c)), 0));
  return stack0(channels);  // (3, ny, nx)
}

template <class S>
Var<S> project(Var<S> camera_grid, ImageFormation f, const RenderOptions& opt = {}) {
  switch (f) {
    case ImageFormation::VH: return project_vh(camera_grid);
    case ImageFormation::AO: return project_ao(camera_grid, opt);
    default: return project_ea(camera_grid, f, opt);
  }
}

// Full projection: rotate into camera space, then apply the formation model.
template <class S>
Var<S> render_op(const ViewDirection& view, Var<S> grid, ImageFormation f,
                 const RenderOptions& opt = {}) {
  return project(rotate_resample_op(grid, rotation_from_view(view)), f, opt);
}

template <class S>
Image<S> render(const ViewDirection& view, const VoxelGrid<S>& v, ImageFormation f,
                const RenderOptions& opt = {}) {
  Tape<S> tape;
  Var<S> g = make_leaf(tape, v.data);
  Var<S> img = render_op(view, g, f, opt);
  return Image<S>(formation_image_channels(f), v.np, img.value());
}

}  // namespace platonic
