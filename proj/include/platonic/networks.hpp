#pragma once

#include "platonic/ops.hpp"
#include "platonic/volume.hpp"

#include <map>
#include <string>

namespace platonic {

// DCGAN-style scaffold sized by the grid resolution: stride-2 stages between
// spatial extent 4 and n_p. base_width is the widest channel count; the
// desk-scale presets shrink it.
struct NetConfig {
  int np = 64;
  int image_channels = 1;
  int grid_channels = 1;
  int zdim = 128;
  int base_width = 512;

  int stages() const {
    int s = 0, r = np;
    while (r > 4) {
      r /= 2;
      ++s;
    }
    return s;
  }
  int enc_channels(int stage) const { return std::max(1, base_width >> (stages() - 1 - stage)); }
  int gen_channels(int stage) const {
    return stage == stages() - 1 ? grid_channels : std::max(1, base_width >> (stage + 1));
  }
};

template <class S>
struct NetworkParams {
  std::map<std::string, Tensor<S>> p;

  Tensor<S>& at(const std::string& name) { return p.at(name); }
  const Tensor<S>& at(const std::string& name) const { return p.at(name); }

  template <class T>
  NetworkParams<T> cast() const {
    NetworkParams<T> out;
    for (const auto& [k, v] : p) out.p.emplace(k, v.template cast<T>());
    return out;
  }
};

namespace detail {

template <class S>
void add_param(NetworkParams<S>& params, const std::string& name, Shape dims, Rng& rng,
               bool weight) {
  Tensor<S> t(std::move(dims));
  if (weight)
    for (std::int64_t i = 0; i < t.size(); ++i) t.v[i] = static_cast<S>(0.02 * rng.normal());
  params.p.emplace(name, std::move(t));
}

}  // namespace detail

// Weights from N(0, 0.02), biases zero. Creation order is fixed so a given
// seed always yields the same parameters.
template <class S>
NetworkParams<S> init_params(const NetConfig& cfg, Rng& rng) {
  NetworkParams<S> params;
  const int st = cfg.stages();
  auto conv_stack = [&](const std::string& prefix, int in_ch, int out_final) {
    int cin = in_ch;
    for (int i = 0; i < st; ++i) {
      int cout = cfg.enc_channels(i);
      detail::add_param(params, prefix + ".conv" + std::to_string(i) + ".w", {cout, cin, 4, 4},
                        rng, true);
      detail::add_param(params, prefix + ".conv" + std::to_string(i) + ".b", {cout}, rng, false);
      cin = cout;
    }
    detail::add_param(params, prefix + ".fc.w", {out_final, cin * 16}, rng, true);
    detail::add_param(params, prefix + ".fc.b", {out_final}, rng, false);
  };
  conv_stack("enc", cfg.image_channels, cfg.zdim);
  conv_stack("dis", cfg.image_channels, 1);

  detail::add_param(params, "gen.fc.w", {cfg.base_width * 64, cfg.zdim}, rng, true);
  detail::add_param(params, "gen.fc.b", {cfg.base_width * 64}, rng, false);
  int cin = cfg.base_width;
  for (int i = 0; i < st; ++i) {
    int cout = cfg.gen_channels(i);
    detail::add_param(params, "gen.tconv" + std::to_string(i) + ".w", {cin, cout, 4, 4, 4}, rng,
                      true);
    detail::add_param(params, "gen.tconv" + std::to_string(i) + ".b", {cout}, rng, false);
    cin = cout;
  }
  // start the generator sparse: with a dense volume every ray is opaque and
  // the per-voxel compositing gradient (the product of the other
  // transmittances) vanishes, which stalls training
  params.at("gen.tconv" + std::to_string(st - 1) + ".b").v.setConstant(S(-0.5));
  return params;
}

// Parameters staged on a tape for one evaluation; keeps the node ids so
// gradients can be read back by name.
template <class S>
struct TapedParams {
  Tape<S>* tape = nullptr;
  std::map<std::string, int> ids;

  Var<S> get(const std::string& name) const { return Var<S>{tape, ids.at(name)}; }
};

template <class S>
TapedParams<S> stage_params(Tape<S>& tape, const NetworkParams<S>& params) {
  TapedParams<S> tp;
  tp.tape = &tape;
  for (const auto& [name, tensor] : params.p) tp.ids.emplace(name, tape.leaf(tensor));
  return tp;
}

namespace detail {

// The encoder normalizes per channel between stages (the bias is applied
// after the norm so it is not cancelled); the discriminator stays plain so
// absolute image brightness remains visible to it.
template <class S>
Var<S> conv_trunk(const NetConfig& cfg, const TapedParams<S>& tp, const std::string& prefix,
                  Var<S> x, bool normalize) {
  if (x.dims() != Shape{cfg.image_channels, cfg.np, cfg.np})
    throw std::invalid_argument(prefix + ": image resolution mismatch");
  for (int i = 0; i < cfg.stages(); ++i) {
    auto w = tp.get(prefix + ".conv" + std::to_string(i) + ".w");
    auto b = tp.get(prefix + ".conv" + std::to_string(i) + ".b");
    if (normalize) {
      auto zero = make_leaf(*tp.tape, Tensor<S>::zeros({cfg.enc_channels(i)}));
      x = instance_norm_bias(conv2d(x, w, zero, 2, 1), b);
    } else {
      x = conv2d(x, w, b, 2, 1);
    }
    x = leaky_relu(x, S(0.2));
  }
  x = reshape(x, {static_cast<int>(x.value().size())});
  return dense(tp.get(prefix + ".fc.w"), x, tp.get(prefix + ".fc.b"));
}

}  // namespace detail

// E_Phi: image -> latent code.
template <class S>
Var<S> encoder_forward(const NetConfig& cfg, const TapedParams<S>& tp, Var<S> image) {
  return detail::conv_trunk(cfg, tp, "enc", image, true);
}

// D_Psi: image -> pre-sigmoid logit. Losses consume the logit; the score is
// sigmoid(logit).
template <class S>
Var<S> discriminator_forward(const NetConfig& cfg, const TapedParams<S>& tp, Var<S> image) {
  return detail::conv_trunk(cfg, tp, "dis", image, false);
}

// G_Theta: latent code -> voxel grid in [0,1] via the final sigmoid.
template <class S>
Var<S> generator_forward(const NetConfig& cfg, const TapedParams<S>& tp, Var<S> z) {
  if (z.value().size() != cfg.zdim)
    throw std::invalid_argument("generator: latent dimension mismatch");
  Var<S> x = dense(tp.get("gen.fc.w"), z, tp.get("gen.fc.b"));
  x = leaky_relu(x, S(0.2));
  x = reshape(x, {cfg.base_width, 4, 4, 4});
  for (int i = 0; i < cfg.stages(); ++i) {
    auto w = tp.get("gen.tconv" + std::to_string(i) + ".w");
    auto b = tp.get("gen.tconv" + std::to_string(i) + ".b");
    if (i + 1 < cfg.stages()) {
      auto zero = make_leaf(*tp.tape, Tensor<S>::zeros({cfg.gen_channels(i)}));
      x = leaky_relu(instance_norm_bias(conv_transpose3d(x, w, zero, 2, 1), b), S(0.2));
    } else {
      x = conv_transpose3d(x, w, b, 2, 1);
    }
  }
  // output temperature: sharpens occupancy decisions and speeds up the
  // early darkening/filling phase without touching optimizer settings
  return sigmoid(scale(x, S(4)));
}

// Convenience non-tape entry points.

template <class S>
Tensor<S> encode(const NetConfig& cfg, const NetworkParams<S>& params, const Tensor<S>& image) {
  Tape<S> tape;
  auto tp = stage_params(tape, params);
  return encoder_forward(cfg, tp, make_leaf(tape, image)).value();
}

template <class S>
VoxelGrid<S> generate(const NetConfig& cfg, const NetworkParams<S>& params, const Tensor<S>& z) {
  Tape<S> tape;
  auto tp = stage_params(tape, params);
  auto g = generator_forward(cfg, tp, make_leaf(tape, z));
  return VoxelGrid<S>(cfg.grid_channels, cfg.np, g.value());
}

template <class S>
std::pair<S, S> discriminate(const NetConfig& cfg, const NetworkParams<S>& params,
                             const Tensor<S>& image) {
  Tape<S> tape;
  auto tp = stage_params(tape, params);
  S logit = discriminator_forward(cfg, tp, make_leaf(tape, image)).value().v[0];
  S score = S(1) / (S(1) + std::exp(-logit));
  return {score, logit};
}

}  // namespace platonic
