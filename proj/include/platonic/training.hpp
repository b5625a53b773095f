#pragma once

#include "platonic/data.hpp"
#include "platonic/metrics.hpp"
#include "platonic/networks.hpp"
#include "platonic/render.hpp"

#include <chrono>
#include <functional>
#include <optional>

namespace platonic {

// Squared L2 distance between target and rendered image, summed over pixels
// and channels.
template <class S>
Var<S> reconstruction_loss_op(Var<S> target, Var<S> rendered) {
  if (target.dims() != rendered.dims())
    throw std::invalid_argument("reconstruction_loss: image dims mismatch");
  Var<S> d = sub(target, rendered);
  return sum_all(mul(d, d));
}

template <class S>
S reconstruction_loss(const Image<S>& target, const VoxelGrid<S>& v, ImageFormation f,
                      const RenderOptions& opt = {}) {
  Tape<S> tape;
  auto grid = make_leaf(tape, v.data);
  auto rendered = render_op(ViewDirection::canonical(), grid, f, opt);
  return reconstruction_loss_op(make_leaf(tape, target.data), rendered).value().v[0];
}

// log D(I_dat) + log(1 - D(I_view)), to be maximized over Psi. Takes the
// pre-sigmoid logits and evaluates through log-sigmoid so neither tail
// overflows.
template <class S>
Var<S> discriminator_loss_op(Var<S> real_logit, Var<S> fake_logit) {
  return add(logsigmoid(real_logit), logsigmoid(neg(fake_logit)));
}

// log(1 - D(I_view)), minimized over (Theta, Phi), as in the update step.
// The non-saturating swap -log D(I_view) is available behind a flag.
template <class S>
Var<S> generator_loss_op(Var<S> fake_logit, bool non_saturating = false) {
  if (non_saturating) return neg(logsigmoid(fake_logit));
  return logsigmoid(neg(fake_logit));
}

struct TrainConfig {
  int np = 64;
  ImageFormation formation = ImageFormation::AO;
  int zdim = 128;
  int base_width = 512;
  double lambda = 100.0;  // reconstruction weight
  int batch_size = 4;
  int steps = 2000;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  std::uint64_t seed = 1;
  int checkpoint_every = 500;
  int holdout_shapes = 1;
  bool non_saturating = false;
  bool log_domain = false;
  // test hooks: replace a loss with a constant to verify update isolation
  bool freeze_dis_loss = false;
  bool freeze_gen_loss = false;

  NetConfig net_config() const {
    NetConfig nc;
    nc.np = np;
    nc.image_channels = formation_image_channels(formation);
    nc.grid_channels = formation_channels(formation);
    nc.zdim = zdim;
    nc.base_width = base_width;
    return nc;
  }
};

template <class S>
struct StepReport {
  int step = 0;
  S c_dis = 0;
  S c_gen = 0;
  S c_rec = 0;
  S dis_grad_norm = 0;
  S gen_grad_norm = 0;
  double seconds = 0;
  bool diverged = false;
};

// Adaptive-moment gradient descent over a named parameter set.
template <class S>
class AdamOptimizer {
 public:
  AdamOptimizer(S lr, S beta1, S beta2, S eps = S(1e-8))
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  // direction +1 descends, -1 ascends
  void step(NetworkParams<S>& params, const std::map<std::string, Tensor<S>>& grads,
            S direction = S(1)) {
    ++t_;
    const S c1 = S(1) - std::pow(b1_, S(t_));
    const S c2 = S(1) - std::pow(b2_, S(t_));
    for (const auto& [name, g] : grads) {
      auto& p = params.at(name);
      auto mit = m_.try_emplace(name, Tensor<S>::zeros(g.dims)).first;
      auto vit = v_.try_emplace(name, Tensor<S>::zeros(g.dims)).first;
      auto& m = mit->second;
      auto& v = vit->second;
      m.v = b1_ * m.v + (S(1) - b1_) * g.v;
      v.v = b2_ * v.v + (S(1) - b2_) * g.v.square();
      p.v -= direction * lr_ * (m.v / c1) / ((v.v / c2).sqrt() + eps_);
    }
  }

 private:
  S lr_, b1_, b2_, eps_;
  int t_ = 0;
  std::map<std::string, Tensor<S>> m_, v_;
};

namespace detail {

inline bool is_discriminator_param(const std::string& name) {
  return name.rfind("dis.", 0) == 0;
}

template <class S>
void accumulate_grads(const TapedParams<S>& tp, const std::vector<Tensor<S>>& adjoints,
                      bool discriminator_side, std::map<std::string, Tensor<S>>& out) {
  for (const auto& [name, id] : tp.ids) {
    if (is_discriminator_param(name) != discriminator_side) continue;
    // nodes pruned from the reverse sweep carry an empty adjoint
    Tensor<S> g = adjoints[id].size() ? adjoints[id]
                                      : Tensor<S>::zeros(tp.tape->value(id).dims);
    auto it = out.find(name);
    if (it == out.end())
      out.emplace(name, std::move(g));
    else
      it->second.v += g.v;
  }
}

template <class S>
S grad_norm(const std::map<std::string, Tensor<S>>& grads) {
  S sq = 0;
  for (const auto& [name, g] : grads) sq += g.v.square().sum();
  return std::sqrt(sq);
}

}  // namespace detail

// One update step of the reconstruction objective over a batch:
// per element sample a view, encode, generate, render the sampled and the
// canonical view, then one ascent update of Psi on c_Dis and one descent
// update of (Theta, Phi) on c_Gen + lambda * c_Rec, batch-averaged.
template <class S>
StepReport<S> train_step(const std::vector<Tensor<S>>& batch, Rng& rng, NetworkParams<S>& params,
                         const TrainConfig& cfg, AdamOptimizer<S>& dis_opt,
                         AdamOptimizer<S>& gen_opt, int step_index = 0) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  const auto t0 = std::chrono::steady_clock::now();
  const NetConfig net = cfg.net_config();
  const RenderOptions ropt{cfg.log_domain};
  const bool clamp_render = cfg.formation == ImageFormation::EA_PAPER;

  StepReport<S> report;
  report.step = step_index;
  std::map<std::string, Tensor<S>> dis_grads, gen_grads;

  for (const auto& data_image : batch) {
    ViewDirection view = sample_view(rng);
    Tape<S> tape;
    auto tp = stage_params(tape, params);
    auto image_in = make_leaf(tape, data_image);

    auto z = encoder_forward(net, tp, image_in);
    auto grid = generator_forward(net, tp, z);
    auto rendered_view = render_op(view, grid, cfg.formation, ropt);
    auto rendered_front = render_op(ViewDirection::canonical(), grid, cfg.formation, ropt);
    if (clamp_render) {
      // keep rendered and real discriminator inputs in the same range
      rendered_view = clamp(rendered_view, S(0), S(1));
    }

    auto logit_real = discriminator_forward(net, tp, image_in);
    auto logit_fake = discriminator_forward(net, tp, rendered_view);

    auto c_dis = cfg.freeze_dis_loss
                     ? make_leaf(tape, Tensor<S>::scalar(S(0)))
                     : discriminator_loss_op(logit_real, logit_fake);
    auto c_gen = generator_loss_op(logit_fake, cfg.non_saturating);
    auto c_rec = reconstruction_loss_op(image_in, rendered_front);
    auto gen_total =
        cfg.freeze_gen_loss
            ? make_leaf(tape, Tensor<S>::scalar(S(0)))
            : add(c_gen, scale(c_rec, static_cast<S>(cfg.lambda)));

    report.c_dis += c_dis.value().v[0];
    report.c_gen += c_gen.value().v[0];
    report.c_rec += c_rec.value().v[0];

    auto dis_adj = tape.backward(c_dis.id);
    detail::accumulate_grads(tp, dis_adj, true, dis_grads);
    auto gen_adj = tape.backward(gen_total.id);
    detail::accumulate_grads(tp, gen_adj, false, gen_grads);
  }

  const S inv = S(1) / static_cast<S>(batch.size());
  report.c_dis *= inv;
  report.c_gen *= inv;
  report.c_rec *= inv;
  for (auto& [k, g] : dis_grads) g.v *= inv;
  for (auto& [k, g] : gen_grads) g.v *= inv;
  report.dis_grad_norm = detail::grad_norm(dis_grads);
  report.gen_grad_norm = detail::grad_norm(gen_grads);

  bool finite = std::isfinite(static_cast<double>(report.c_dis)) &&
                std::isfinite(static_cast<double>(report.c_gen)) &&
                std::isfinite(static_cast<double>(report.c_rec)) &&
                std::isfinite(static_cast<double>(report.dis_grad_norm)) &&
                std::isfinite(static_cast<double>(report.gen_grad_norm));
  if (!finite) {
    report.diverged = true;  // parameters untouched
    return report;
  }

  NetworkParams<S> backup = params;
  dis_opt.step(params, dis_grads, S(-1));  // ascend c_Dis
  gen_opt.step(params, gen_grads, S(1));   // descend c_Gen + lambda c_Rec
  for (const auto& [name, t] : params.p)
    if (!t.all_finite()) {
      params = backup;
      report.diverged = true;
      return report;
    }

  const auto t1 = std::chrono::steady_clock::now();
  report.seconds = std::chrono::duration<double>(t1 - t0).count();
  return report;
}

template <class S>
struct TrainResult {
  NetworkParams<S> params;
  std::vector<StepReport<S>> log;
  // held-out single-image reconstruction quality, one entry per held-out view
  std::vector<S> holdout_iou;
};

// In-memory dataset: images plus the ground-truth grid index per image.
template <class S>
struct TrainData {
  std::vector<Tensor<S>> images;
  std::vector<int> grid_index;
  std::vector<VoxelGrid<S>> grids;
};

template <class S>
TrainData<S> train_data_from_synth(const SynthDataset<S>& ds) {
  TrainData<S> td;
  for (const auto& s : ds.samples) {
    td.images.push_back(s.image.data);
    td.grid_index.push_back(s.shape_index);
  }
  td.grids = ds.grids;
  return td;
}

// Full training run. Deterministic given the seed in single-thread mode.
// Per-step callback (may be null) receives each report; checkpoints are the
// caller's business via the callback.
template <class S>
TrainResult<S> train(const TrainData<S>& data, const TrainConfig& cfg,
                     const std::function<void(const StepReport<S>&, const NetworkParams<S>&)>&
                         on_step = nullptr) {
  if (data.images.empty()) throw ConfigError("train: empty dataset");
  const NetConfig net = cfg.net_config();
  const std::int64_t want = static_cast<std::int64_t>(net.image_channels) * cfg.np * cfg.np;
  for (const auto& img : data.images)
    if (img.size() != want)
      throw ConfigError("train: dataset image channels/resolution do not match the formation");

  Rng rng(cfg.seed);
  TrainResult<S> result;
  result.params = init_params<S>(net, rng);
  AdamOptimizer<S> dis_opt(static_cast<S>(cfg.lr), static_cast<S>(cfg.beta1),
                           static_cast<S>(cfg.beta2));
  AdamOptimizer<S> gen_opt(static_cast<S>(cfg.lr), static_cast<S>(cfg.beta1),
                           static_cast<S>(cfg.beta2));

  // hold out the last `holdout_shapes` grids from training
  const int n_grids = static_cast<int>(data.grids.size());
  const int holdout_from = std::max(0, n_grids - std::max(0, cfg.holdout_shapes));
  std::vector<int> train_indices;
  for (int i = 0; i < static_cast<int>(data.images.size()); ++i)
    if (data.grid_index.empty() || data.grid_index[i] < holdout_from) train_indices.push_back(i);
  if (train_indices.empty()) throw ConfigError("train: no training samples after holdout");

  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<Tensor<S>> batch;
    for (int b = 0; b < cfg.batch_size; ++b)
      batch.push_back(data.images[train_indices[rng.below(train_indices.size())]]);
    auto report = train_step(batch, rng, result.params, cfg, dis_opt, gen_opt, step);
    if (on_step) on_step(report, result.params);
    result.log.push_back(report);
  }

  // held-out reconstruction: encode the first view of each held-out shape
  if (!data.grid_index.empty()) {
    std::vector<char> seen(n_grids, 0);
    for (std::size_t i = 0; i < data.images.size(); ++i) {
      int gi = data.grid_index[i];
      if (gi < holdout_from || seen[gi]) continue;
      seen[gi] = 1;
      auto z = encode(net, result.params, data.images[i]);
      auto recon = generate(net, result.params, z);
      result.holdout_iou.push_back(
          binary_iou(recon.data, data.grids[gi].data, static_cast<S>(0.5)));
    }
  }
  return result;
}

}  // namespace platonic
