#include "platonic/gradcheck.hpp"
#include "platonic/training.hpp"

#include <doctest.h>

using namespace platonic;

namespace {

TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.np = 8;
  cfg.formation = ImageFormation::AO;
  cfg.zdim = 6;
  cfg.base_width = 4;
  cfg.batch_size = 2;
  cfg.steps = 3;
  cfg.seed = 5;
  cfg.holdout_shapes = 0;
  return cfg;
}

template <class S>
std::vector<Tensor<S>> random_batch(const TrainConfig& cfg, Rng& rng, int n) {
  std::vector<Tensor<S>> batch;
  const NetConfig net = cfg.net_config();
  for (int i = 0; i < n; ++i) {
    Tensor<S> t({net.image_channels, cfg.np, cfg.np});
    for (std::int64_t j = 0; j < t.size(); ++j) t.v[j] = static_cast<S>(rng.uniform());
    batch.push_back(std::move(t));
  }
  return batch;
}

}  // namespace

TEST_CASE("reconstruction loss examples") {
  // rendering its own target gives zero
  Rng rng(3);
  VoxelGrid<double> v(1, 8);
  for (std::int64_t i = 0; i < v.data.size(); ++i) v.data.v[i] = rng.uniform();
  auto img = render(ViewDirection::canonical(), v, ImageFormation::AO);
  CHECK(reconstruction_loss(img, v, ImageFormation::AO) == 0.0);

  // all-zero target vs all-ones rendered 2x2 single channel
  Tape<double> tape;
  auto target = make_leaf(tape, Tensor<double>::zeros({1, 2, 2}));
  auto rendered = make_leaf(tape, Tensor<double>::full({1, 2, 2}, 1.0));
  CHECK(reconstruction_loss_op(target, rendered).value().v[0] == 4.0);

  Tape<double> t2;
  auto bad = make_leaf(t2, Tensor<double>::zeros({1, 3, 3}));
  auto good = make_leaf(t2, Tensor<double>::zeros({1, 2, 2}));
  CHECK_THROWS_AS((void)reconstruction_loss_op(bad, good), std::invalid_argument);
}

TEST_CASE("reconstruction loss gradient w.r.t. the grid") {
  Rng rng(13);
  Tensor<double> grid({1, 6, 6, 6});
  for (std::int64_t i = 0; i < grid.size(); ++i) grid.v[i] = 0.1 + 0.8 * rng.uniform();
  Tensor<double> target({1, 6, 6});
  for (std::int64_t i = 0; i < target.size(); ++i) target.v[i] = rng.uniform();
  auto res = finite_difference_check<double>(
      [&](Tape<double>& t, Var<double> v) {
        auto rendered = render_op(ViewDirection::canonical(), v, ImageFormation::AO);
        return reconstruction_loss_op(make_leaf(t, target), rendered);
      },
      grid, 1e-4);
  CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("discriminator loss") {
  auto eval = [](double lr, double lf) {
    Tape<double> t;
    return discriminator_loss_op(make_leaf(t, Tensor<double>::scalar(lr)),
                                 make_leaf(t, Tensor<double>::scalar(lf)))
        .value()
        .v[0];
  };
  CHECK(eval(0, 0) == doctest::Approx(2 * std::log(0.5)).epsilon(1e-12));
  CHECK(eval(0, 0) == doctest::Approx(-1.3863).epsilon(1e-4));
  // saturation toward the supremum 0
  CHECK(eval(30, -30) == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(eval(30, -30) > eval(0, 0));

  // agreement with the naive log(sigmoid) evaluation where it is finite
  Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    double lr = 10 * (rng.uniform() - 0.5), lf = 10 * (rng.uniform() - 0.5);
    double naive = std::log(1.0 / (1.0 + std::exp(-lr))) +
                   std::log(1.0 - 1.0 / (1.0 + std::exp(-lf)));
    CHECK(eval(lr, lf) == doctest::Approx(naive).epsilon(1e-10));
  }
}

TEST_CASE("generator loss") {
  auto eval = [](double lf, bool ns = false) {
    Tape<double> t;
    return generator_loss_op(make_leaf(t, Tensor<double>::scalar(lf)), ns).value().v[0];
  };
  CHECK(eval(0) == doctest::Approx(-0.6931).epsilon(1e-4));
  CHECK(eval(10) < eval(-10));  // decreasing in the logit
  Rng rng(19);
  for (int i = 0; i < 50; ++i) {
    double lf = 10 * (rng.uniform() - 0.5);
    double naive = std::log(1.0 - 1.0 / (1.0 + std::exp(-lf)));
    CHECK(eval(lf) == doctest::Approx(naive).epsilon(1e-10));
  }
  // non-saturating variant is -log D
  CHECK(eval(2.0, true) == doctest::Approx(-std::log(1.0 / (1.0 + std::exp(-2.0)))));
}

TEST_CASE("freezing one loss leaves the other side untouched") {
  auto cfg = tiny_train_config();
  Rng data_rng(23);
  auto batch = random_batch<double>(cfg, data_rng, 2);

  for (bool freeze_dis : {true, false}) {
    TrainConfig c = cfg;
    c.freeze_dis_loss = freeze_dis;
    c.freeze_gen_loss = !freeze_dis;
    Rng rng(99);
    auto params = init_params<double>(c.net_config(), rng);
    auto before = params;
    AdamOptimizer<double> dis_opt(c.lr, c.beta1, c.beta2);
    AdamOptimizer<double> gen_opt(c.lr, c.beta1, c.beta2);
    Rng step_rng(7);
    auto report = train_step(batch, step_rng, params, c, dis_opt, gen_opt);
    CHECK_FALSE(report.diverged);
    for (const auto& [name, t] : params.p) {
      bool is_dis = name.rfind("dis.", 0) == 0;
      double delta = (t.v - before.at(name).v).abs().maxCoeff();
      CAPTURE(name);
      if ((is_dis && freeze_dis) || (!is_dis && !freeze_dis))
        CHECK(delta == 0.0);  // frozen side must not move
      else
        CHECK(delta > 0.0);
    }
  }
}

TEST_CASE("lambda zero with a flat discriminator is a pure generator-loss step") {
  auto cfg = tiny_train_config();
  cfg.lambda = 0.0;
  cfg.batch_size = 1;
  Rng data_rng(29);
  auto batch = random_batch<double>(cfg, data_rng, 1);

  Rng rng(31);
  auto params = init_params<double>(cfg.net_config(), rng);
  // flatten the discriminator to logit 0 everywhere
  for (auto& [name, t] : params.p)
    if (name.rfind("dis.", 0) == 0) t.v.setZero();

  auto expected = params;
  {
    // manual pure generator-loss step at logit 0
    Tape<double> tape;
    auto tp = stage_params(tape, expected);
    auto z = encoder_forward(cfg.net_config(), tp, make_leaf(tape, batch[0]));
    auto grid = generator_forward(cfg.net_config(), tp, z);
    Rng view_rng(7);
    auto view = sample_view(view_rng);
    auto rendered = render_op(view, grid, cfg.formation);
    auto logit = discriminator_forward(cfg.net_config(), tp, rendered);
    auto loss = generator_loss_op(logit);
    auto adj = tape.backward(loss.id);
    std::map<std::string, Tensor<double>> grads;
    for (const auto& [name, id] : tp.ids)
      if (name.rfind("dis.", 0) != 0) grads.emplace(name, adj[id]);
    AdamOptimizer<double> opt(cfg.lr, cfg.beta1, cfg.beta2);
    opt.step(expected, grads, 1.0);
  }

  AdamOptimizer<double> dis_opt(cfg.lr, cfg.beta1, cfg.beta2);
  AdamOptimizer<double> gen_opt(cfg.lr, cfg.beta1, cfg.beta2);
  Rng step_rng(7);
  (void)train_step(batch, step_rng, params, cfg, dis_opt, gen_opt);

  for (const auto& [name, t] : params.p) {
    if (name.rfind("dis.", 0) == 0) continue;
    CAPTURE(name);
    CHECK((t.v - expected.at(name).v).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("end-to-end generator objective gradient through render and discriminate") {
  auto cfg = tiny_train_config();
  Rng rng(41);
  auto params = init_params<double>(cfg.net_config(), rng);
  Tensor<double> grid({1, 8, 8, 8});
  for (std::int64_t i = 0; i < grid.size(); ++i) grid.v[i] = 0.1 + 0.8 * rng.uniform();
  Tensor<double> target({1, 8, 8});
  for (std::int64_t i = 0; i < target.size(); ++i) target.v[i] = rng.uniform();
  auto view = ViewDirection::from_angles_deg(25, 10);

  auto res = finite_difference_check<double>(
      [&](Tape<double>& t, Var<double> v) {
        auto tp = stage_params(t, params);
        auto rendered = render_op(view, v, cfg.formation);
        auto front = render_op(ViewDirection::canonical(), v, cfg.formation);
        auto logit = discriminator_forward(cfg.net_config(), tp, rendered);
        auto gen = generator_loss_op(logit);
        auto rec = reconstruction_loss_op(make_leaf(t, target), front);
        return add(gen, scale(rec, cfg.lambda));
      },
      grid, 1e-4);
  CHECK(res.max_rel_error < 1e-3);
}

TEST_CASE("train runs deterministically and honors zero steps") {
  auto cfg = tiny_train_config();
  Rng data_rng(51);
  TrainData<double> data;
  data.images = random_batch<double>(cfg, data_rng, 6);

  TrainConfig zero = cfg;
  zero.steps = 0;
  auto r0 = train(data, zero);
  CHECK(r0.log.empty());
  Rng rng_check(zero.seed);
  auto init = init_params<double>(zero.net_config(), rng_check);
  for (const auto& [name, t] : init.p)
    CHECK((t.v - r0.params.at(name).v).abs().maxCoeff() == 0.0);

  auto r1 = train(data, cfg);
  auto r2 = train(data, cfg);
  for (const auto& [name, t] : r1.params.p)
    CHECK((t.v - r2.params.at(name).v).abs().maxCoeff() == 0.0);
}

TEST_CASE("dataset channel mismatch is a configuration error") {
  auto cfg = tiny_train_config();
  cfg.formation = ImageFormation::EA_PAPER;  // needs 3-channel images
  TrainData<double> data;
  data.images.push_back(Tensor<double>::zeros({1, 8, 8}));
  CHECK_THROWS_AS((void)train(data, cfg), ConfigError);
}

TEST_CASE("non-finite step aborts and rolls back") {
  auto cfg = tiny_train_config();
  Rng data_rng(61);
  auto batch = random_batch<double>(cfg, data_rng, 1);
  Rng rng(62);
  auto params = init_params<double>(cfg.net_config(), rng);
  params.at("enc.fc.w").v[0] = std::numeric_limits<double>::quiet_NaN();
  auto before = params;
  AdamOptimizer<double> dis_opt(cfg.lr, cfg.beta1, cfg.beta2);
  AdamOptimizer<double> gen_opt(cfg.lr, cfg.beta1, cfg.beta2);
  Rng step_rng(7);
  auto report = train_step(batch, step_rng, params, cfg, dis_opt, gen_opt);
  CHECK(report.diverged);
  for (const auto& [name, t] : params.p) {
    const auto& b = before.at(name).v;
    for (std::int64_t i = 0; i < t.size(); ++i) {
      bool same = t.v[i] == b[i] || (std::isnan(t.v[i]) && std::isnan(b[i]));
      if (!same) {
        CAPTURE(name);
        CHECK(same);
      }
    }
  }
}

TEST_CASE("overfitting a single sphere image halves the reconstruction loss") {
  TrainConfig cfg;
  cfg.np = 32;
  cfg.formation = ImageFormation::AO;
  cfg.zdim = 16;
  cfg.base_width = 32;
  cfg.batch_size = 2;
  cfg.steps = 200;
  cfg.seed = 3;
  cfg.holdout_shapes = 0;

  Rng rng(1234);
  ShapeRecipe sphere;
  sphere.id = "s";
  ShapePrimitive p;
  p.size = {0.2, 0, 0};
  sphere.prims = {p};
  auto ds = synth_dataset<float>({sphere}, 1, cfg.formation, cfg.np, rng);
  auto data = train_data_from_synth(ds);
  auto result = train(data, cfg);
  REQUIRE(result.log.size() == 200);
  float first = result.log.front().c_rec;
  float last = result.log.back().c_rec;
  CHECK(last < 0.5f * first);
}
