#include "platonic/data.hpp"
#include "platonic/gradcheck.hpp"
#include "platonic/io.hpp"
#include "platonic/metrics.hpp"
#include "platonic/training.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using namespace platonic;

namespace {

int default_threads() {
  if (const char* env = std::getenv("PLATONIC_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

void apply_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n);
#else
  (void)n;
#endif
}

ImageFormation formation_from_flag(const std::string& s) {
  ImageFormation f;
  if (!parse_formation(s, f))
    throw ConfigError("unknown formation '" + s + "' (vh | ao | ea-paper | ea-composite)");
  return f;
}

ViewDirection view_from_flag(const std::string& s) {
  auto comma = s.find(',');
  if (comma == std::string::npos) throw ConfigError("expected --view az,el in degrees: " + s);
  try {
    double az = std::stod(s.substr(0, comma));
    double el = std::stod(s.substr(comma + 1));
    if (std::abs(el) > 90.0) throw ConfigError("elevation out of [-90, 90]: " + s);
    return ViewDirection::from_angles_deg(az, el);
  } catch (const std::logic_error&) {
    throw ConfigError("bad --view value: " + s);
  }
}

// Network hyperparameters ride along in the checkpoint so reconstruct needs
// no matching flags.
constexpr const char* kMetaKey = "meta";

NetworkParams<float> attach_meta(NetworkParams<float> params, const NetConfig& net,
                                 ImageFormation f) {
  Tensor<float> meta({6});
  meta.v[0] = float(net.np);
  meta.v[1] = float(net.image_channels);
  meta.v[2] = float(net.grid_channels);
  meta.v[3] = float(net.zdim);
  meta.v[4] = float(net.base_width);
  meta.v[5] = float(static_cast<int>(f));
  params.p.insert_or_assign(kMetaKey, std::move(meta));
  return params;
}

std::pair<NetConfig, ImageFormation> detach_meta(NetworkParams<float>& params,
                                                 const std::string& path) {
  auto it = params.p.find(kMetaKey);
  if (it == params.p.end() || it->second.size() != 6)
    throw FormatError("checkpoint has no model metadata: " + path);
  NetConfig net;
  net.np = int(it->second.v[0]);
  net.image_channels = int(it->second.v[1]);
  net.grid_channels = int(it->second.v[2]);
  net.zdim = int(it->second.v[3]);
  net.base_width = int(it->second.v[4]);
  int f = int(it->second.v[5]);
  if (f < 0 || f > 3) throw FormatError("checkpoint metadata is corrupt: " + path);
  params.p.erase(it);
  return {net, static_cast<ImageFormation>(f)};
}

// ---- synth ----

int run_synth(const std::string& out_dir, int np, int shapes, int views,
              const std::string& formation_flag, std::uint64_t seed) {
  ImageFormation f = formation_from_flag(formation_flag);
  Rng rng(seed);
  auto ds = synth_dataset<float>(sphere_family(shapes), views, f, np, rng);
  auto rows = save_dataset(ds, out_dir);
  std::cout << "wrote " << rows.size() << " samples over " << shapes << " shapes to " << out_dir
            << "\n";
  return 0;
}

// ---- train ----

struct TrainCli {
  TrainConfig cfg;
  std::string data_dir;  // empty: in-memory synthetic spheres
  std::string out_dir = "train_out";
  int shapes = 20;
  int views = 50;
};

void apply_train_config_file(TrainCli& t, const std::string& path) {
  auto kv = parse_config_file(path);
  auto to_int = [&](const std::string& k, const std::string& v) {
    try {
      return std::stoi(v);
    } catch (const std::logic_error&) {
      throw ConfigError("config key '" + k + "': expected integer, got '" + v + "'");
    }
  };
  auto to_double = [&](const std::string& k, const std::string& v) {
    try {
      return std::stod(v);
    } catch (const std::logic_error&) {
      throw ConfigError("config key '" + k + "': expected number, got '" + v + "'");
    }
  };
  auto to_bool = [&](const std::string& k, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + k + "': expected true/false, got '" + v + "'");
  };
  for (const auto& [k, v] : kv) {
    if (k == "np") t.cfg.np = to_int(k, v);
    else if (k == "formation") t.cfg.formation = formation_from_flag(v);
    else if (k == "zdim") t.cfg.zdim = to_int(k, v);
    else if (k == "base_width") t.cfg.base_width = to_int(k, v);
    else if (k == "lambda") t.cfg.lambda = to_double(k, v);
    else if (k == "batch_size") t.cfg.batch_size = to_int(k, v);
    else if (k == "steps") t.cfg.steps = to_int(k, v);
    else if (k == "lr") t.cfg.lr = to_double(k, v);
    else if (k == "beta1") t.cfg.beta1 = to_double(k, v);
    else if (k == "beta2") t.cfg.beta2 = to_double(k, v);
    else if (k == "seed") t.cfg.seed = std::uint64_t(to_int(k, v));
    else if (k == "checkpoint_every") t.cfg.checkpoint_every = to_int(k, v);
    else if (k == "holdout_shapes") t.cfg.holdout_shapes = to_int(k, v);
    else if (k == "non_saturating") t.cfg.non_saturating = to_bool(k, v);
    else if (k == "log_domain") t.cfg.log_domain = to_bool(k, v);
    else if (k == "data") t.data_dir = v;
    else if (k == "out") t.out_dir = v;
    else if (k == "shapes") t.shapes = to_int(k, v);
    else if (k == "views") t.views = to_int(k, v);
    else throw ConfigError("unknown config key '" + k + "' in " + path);
  }
}

TrainData<float> load_manifest_data(const std::string& data_dir, const TrainConfig& cfg) {
  fs::path dir(data_dir);
  fs::path manifest = fs::is_directory(dir) ? dir / "manifest.csv" : dir;
  auto rows = read_manifest(manifest.string());
  if (rows.empty()) throw ConfigError("empty manifest: " + manifest.string());
  TrainData<float> data;
  std::map<std::string, int> grid_ids;
  const int channels = formation_image_channels(cfg.formation);
  for (const auto& row : rows) {
    auto [it, inserted] = grid_ids.emplace(row.grid_path, int(data.grids.size()));
    if (inserted) {
      auto g = load_volume(row.grid_path);
      if (g.nc != formation_channels(cfg.formation))
        throw ConfigError("grid channels do not match the formation: " + row.grid_path);
      data.grids.push_back(std::move(g));
    }
    data.images.push_back(load_image(row.image_path, cfg.np, channels).data);
    data.grid_index.push_back(it->second);
  }
  return data;
}

int run_train(const TrainCli& t) {
  if (t.cfg.lambda < 0) throw ConfigError("lambda must be >= 0");
  if (t.cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (t.cfg.steps < 0) throw ConfigError("steps must be >= 0");

  TrainData<float> data;
  if (!t.data_dir.empty()) {
    data = load_manifest_data(t.data_dir, t.cfg);
  } else {
    Rng rng(t.cfg.seed + 0x9e3779b97f4a7c15ull);  // dataset stream, distinct from training
    auto ds = synth_dataset<float>(sphere_family(t.shapes), t.views, t.cfg.formation, t.cfg.np,
                                   rng);
    data = train_data_from_synth(ds);
  }

  fs::create_directories(t.out_dir);
  std::ofstream log((fs::path(t.out_dir) / "log.csv").string());
  if (!log) throw IoError("cannot open step log in " + t.out_dir);
  log << "step,c_dis,c_gen,c_rec,dis_grad_norm,gen_grad_norm,seconds\n";
  log.precision(9);

  const NetConfig net = t.cfg.net_config();
  auto on_step = [&](const StepReport<float>& r, const NetworkParams<float>& params) {
    log << r.step << ',' << r.c_dis << ',' << r.c_gen << ',' << r.c_rec << ','
        << r.dis_grad_norm << ',' << r.gen_grad_norm << ',' << r.seconds
        << (r.diverged ? ",diverged" : "") << '\n';
    bool cadence = t.cfg.checkpoint_every > 0 && (r.step + 1) % t.cfg.checkpoint_every == 0;
    if (cadence)
      save_checkpoint(attach_meta(params, net, t.cfg.formation),
                      (fs::path(t.out_dir) / ("ckpt_" + std::to_string(r.step + 1) + ".pnet"))
                          .string());
    if ((r.step + 1) % 50 == 0 || r.diverged)
      std::cout << "step " << r.step + 1 << "/" << t.cfg.steps << "  c_dis " << r.c_dis
                << "  c_gen " << r.c_gen << "  c_rec " << r.c_rec
                << (r.diverged ? "  [diverged]" : "") << std::endl;
  };

  auto result = train<float>(data, t.cfg, on_step);
  save_checkpoint(attach_meta(result.params, net, t.cfg.formation),
                  (fs::path(t.out_dir) / "last.pnet").string());
  if (!result.holdout_iou.empty()) {
    std::cout << "holdout IoU:";
    for (float v : result.holdout_iou) std::cout << ' ' << v;
    std::cout << "\n";
  }
  std::cout << "final checkpoint: " << (fs::path(t.out_dir) / "last.pnet").string() << "\n";
  return 0;
}

// ---- reconstruct ----

int run_reconstruct(const std::string& ckpt, const std::string& image_path,
                    const std::string& out_path) {
  auto params = load_checkpoint<float>(ckpt);
  auto [net, formation] = detach_meta(params, ckpt);
  auto img = load_image(image_path, net.np, net.image_channels);
  auto z = encode(net, params, img.data);
  auto grid = generate(net, params, z);
  save_volume(grid, out_path);

  const double fixed_views[4][2] = {{0, 0}, {90, 0}, {180, 0}, {0, 60}};
  fs::path base(out_path);
  std::string stem = (base.parent_path() / base.stem()).string();
  for (int i = 0; i < 4; ++i) {
    auto view = ViewDirection::from_angles_deg(fixed_views[i][0], fixed_views[i][1]);
    save_image(render(view, grid, formation), stem + "_view" + std::to_string(i) + ".png");
  }
  std::cout << "wrote " << out_path << " and 4 view renders\n";
  return 0;
}

// ---- render ----

int run_render(const std::string& volume_path, const std::string& view_flag,
               const std::string& formation_flag, const std::string& out_path, bool log_domain) {
  ImageFormation f = formation_from_flag(formation_flag);
  auto grid = load_volume(volume_path);
  if (grid.nc != formation_channels(f))
    throw ConfigError("grid has " + std::to_string(grid.nc) + " channels; formation " +
                      formation_name(f) + " needs " +
                      std::to_string(formation_channels(f)));
  auto view = view_from_flag(view_flag);
  save_image(render(view, grid, f, RenderOptions{log_domain}), out_path);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

// ---- evaluate ----

int run_evaluate(const std::string& recon_path, const std::string& truth_path,
                 const std::string& formation_flag, std::uint64_t seed, double threshold,
                 double epsilon, const std::string& out_path) {
  ImageFormation f = formation_from_flag(formation_flag);
  auto recon = load_volume(recon_path);
  auto truth = load_volume(truth_path);
  auto report = evaluate(recon, truth, f, seed, float(threshold), float(epsilon));
  std::ostringstream csv;
  csv.precision(9);
  csv << "metric,value\n";
  csv << "mean_dssim," << report.mean_dssim << "\n";
  csv << "rmse," << report.rmse << "\n";
  csv << "iou," << report.iou << "\n";
  csv << "chamfer," << report.chamfer << "\n";
  for (std::size_t i = 0; i < report.per_view_dssim.size(); ++i)
    csv << "dssim_view" << i << "," << report.per_view_dssim[i] << "\n";
  std::cout << csv.str();
  if (!out_path.empty()) {
    std::ofstream os(out_path);
    if (!os) throw IoError("cannot open for write: " + out_path);
    os << csv.str();
  }
  return 0;
}

// ---- gradcheck ----

int run_gradcheck(const std::string& formation_flag, int np, std::uint64_t seed) {
  ImageFormation f = formation_from_flag(formation_flag);
  Rng rng(seed);
  const double h = 1e-4;
  bool all_ok = true;

  auto positive = [&](Shape dims) {
    Tensor<double> t(std::move(dims));
    for (std::int64_t i = 0; i < t.size(); ++i) t.v[i] = 0.05 + 0.9 * rng.uniform();
    return t;
  };
  auto signed_vals = [&](Shape dims) {
    Tensor<double> t(std::move(dims));
    for (std::int64_t i = 0; i < t.size(); ++i) t.v[i] = 2.0 * rng.uniform() - 1.0;
    return t;
  };
  auto check = [&](const std::string& name, double tol, const Tensor<double>& x, auto fn) {
    auto res = finite_difference_check<double>(
        [&](Tape<double>& t, Var<double> v) { return sum_all(fn(t, v)); }, x, h);
    bool ok = res.finite && res.max_rel_error < tol;
    all_ok = all_ok && ok;
    std::cout << name << "  max_rel_err " << res.max_rel_error << "  tol " << tol << "  "
              << (ok ? "ok" : "FAIL") << "\n";
  };

  Tensor<double> a = signed_vals({np, np});
  Tensor<double> mul_rhs = signed_vals({np, np});
  check("mul", 1e-6, a, [&](Tape<double>& t, Var<double> v) {
    return mul(v, make_leaf(t, mul_rhs));
  });
  check("sigmoid", 1e-6, a, [](Tape<double>&, Var<double> v) { return sigmoid(v); });
  check("logsigmoid", 1e-6, a, [](Tape<double>&, Var<double> v) { return logsigmoid(v); });
  check("leaky_relu", 1e-6, a,
        [](Tape<double>&, Var<double> v) { return leaky_relu(v, 0.2); });
  check("exp", 1e-6, a, [](Tape<double>&, Var<double> v) { return exp_op(v); });
  check("log", 1e-5, positive({np, np}),
        [](Tape<double>&, Var<double> v) { return log_op(v); });
  check("cumsum", 1e-6, signed_vals({2, np, np}),
        [](Tape<double>&, Var<double> v) { return cumsum(v, 1); });
  check("cumprod", 1e-5, positive({2, np, np}),
        [](Tape<double>&, Var<double> v) { return cumprod(v, 1); });
  Tensor<double> dense_in = signed_vals({6}), dense_b = signed_vals({4});
  check("dense", 1e-6, signed_vals({4, 6}), [&](Tape<double>& t, Var<double> v) {
    return dense(v, make_leaf(t, dense_in), make_leaf(t, dense_b));
  });
  Tensor<double> conv_in = signed_vals({3, 8, 8}), conv_b = signed_vals({2});
  check("conv2d", 1e-5, signed_vals({2, 3, 4, 4}), [&](Tape<double>& t, Var<double> v) {
    return conv2d(make_leaf(t, conv_in), v, make_leaf(t, conv_b), 2, 1);
  });
  Tensor<double> tconv_in = signed_vals({3, 4, 4, 4}), tconv_b = signed_vals({2});
  check("conv_transpose3d", 1e-5, signed_vals({3, 2, 4, 4, 4}),
        [&](Tape<double>& t, Var<double> v) {
          return conv_transpose3d(make_leaf(t, tconv_in), v, make_leaf(t, tconv_b), 2, 1);
        });

  const int nc = formation_channels(f);
  auto view = ViewDirection::from_angles_deg(33.0, 17.0);
  check("rotate_resample", 1e-3, positive({nc, np, np, np}),
        [&](Tape<double>&, Var<double> v) {
          return rotate_resample_op(v, rotation_from_view(view));
        });
  check(std::string("render_") + formation_name(f), 1e-4, positive({nc, np, np, np}),
        [&](Tape<double>&, Var<double> v) { return render_op(view, v, f); });
  Tensor<double> target = positive({formation_image_channels(f), np, np});
  check("reconstruction_loss", 1e-4, positive({nc, np, np, np}),
        [&](Tape<double>& t, Var<double> v) {
          return reconstruction_loss_op(make_leaf(t, target),
                                        render_op(ViewDirection::canonical(), v, f));
        });

  std::cout << (all_ok ? "all operators ok" : "gradient check FAILED") << "\n";
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"platonic: differentiable volume rendering and adversarial 3D reconstruction"};
  app.require_subcommand(1);
  int threads = default_threads();
  app.add_option("--threads", threads, "worker threads (env PLATONIC_THREADS)")
      ->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_out;
  int synth_np = 64, synth_shapes = 20, synth_views = 50;
  std::string synth_formation = "ao";
  std::uint64_t synth_seed = 1;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--np", synth_np, "grid/image resolution")->capture_default_str();
  synth->add_option("--shapes", synth_shapes, "number of shapes")->capture_default_str();
  synth->add_option("--views", synth_views, "views per shape")->capture_default_str();
  synth->add_option("--formation", synth_formation, "vh | ao | ea-paper | ea-composite")
      ->capture_default_str();
  synth->add_option("--seed", synth_seed, "random seed")->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "train the reconstruction pipeline");
  std::string train_config;
  TrainCli tc;
  std::string train_formation = "ao";
  train_cmd->add_option("--config", train_config, "key=value config file");
  auto* opt_data = train_cmd->add_option("--data", tc.data_dir,
                                         "dataset directory or manifest (default: in-memory "
                                         "synthetic spheres)");
  auto* opt_out = train_cmd->add_option("--out", tc.out_dir, "output directory")
                      ->capture_default_str();
  auto* opt_np = train_cmd->add_option("--np", tc.cfg.np, "resolution")->capture_default_str();
  auto* opt_formation =
      train_cmd->add_option("--formation", train_formation, "vh | ao | ea-paper | ea-composite")
          ->capture_default_str();
  auto* opt_steps = train_cmd->add_option("--steps", tc.cfg.steps)->capture_default_str();
  auto* opt_batch = train_cmd->add_option("--batch-size", tc.cfg.batch_size)
                        ->capture_default_str();
  auto* opt_lambda =
      train_cmd->add_option("--lambda", tc.cfg.lambda, "reconstruction weight")
          ->capture_default_str();
  auto* opt_lr = train_cmd->add_option("--lr", tc.cfg.lr)->capture_default_str();
  auto* opt_zdim = train_cmd->add_option("--zdim", tc.cfg.zdim)->capture_default_str();
  auto* opt_width = train_cmd->add_option("--base-width", tc.cfg.base_width)
                        ->capture_default_str();
  auto* opt_seed = train_cmd->add_option("--seed", tc.cfg.seed)->capture_default_str();
  auto* opt_ckpt = train_cmd->add_option("--checkpoint-every", tc.cfg.checkpoint_every)
                       ->capture_default_str();
  auto* opt_holdout = train_cmd->add_option("--holdout-shapes", tc.cfg.holdout_shapes)
                          ->capture_default_str();
  auto* opt_shapes = train_cmd->add_option("--shapes", tc.shapes, "synthetic shapes")
                         ->capture_default_str();
  auto* opt_views = train_cmd->add_option("--views", tc.views, "synthetic views per shape")
                        ->capture_default_str();
  auto* opt_nonsat = train_cmd->add_flag("--non-saturating", tc.cfg.non_saturating,
                                         "use -log D for the generator");
  auto* opt_logdom = train_cmd->add_flag("--log-domain", tc.cfg.log_domain,
                                         "log-domain cumulative products");

  // reconstruct
  auto* recon = app.add_subcommand("reconstruct", "single-image 3D reconstruction");
  std::string recon_ckpt, recon_image, recon_out;
  recon->add_option("--checkpoint", recon_ckpt, "PNET checkpoint")->required();
  recon->add_option("--image", recon_image, "input PNG")->required();
  recon->add_option("--out", recon_out, "output PVOX path")->required();

  // render
  auto* render_cmd = app.add_subcommand("render", "project a volume to an image");
  std::string render_volume, render_view = "0,0", render_formation = "ao", render_out;
  bool render_logdom = false;
  render_cmd->add_option("--volume", render_volume, "input PVOX")->required();
  render_cmd->add_option("--view", render_view, "azimuth,elevation in degrees")
      ->capture_default_str();
  render_cmd->add_option("--formation", render_formation, "vh | ao | ea-paper | ea-composite")
      ->capture_default_str();
  render_cmd->add_option("--out", render_out, "output PNG")->required();
  render_cmd->add_flag("--log-domain", render_logdom, "log-domain cumulative products");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "compare a reconstruction to ground truth");
  std::string eval_recon, eval_truth, eval_formation = "ao", eval_out;
  std::uint64_t eval_seed = 1;
  double eval_threshold = 0.5, eval_epsilon = 1e-3;
  eval_cmd->add_option("--recon", eval_recon, "reconstructed PVOX")->required();
  eval_cmd->add_option("--truth", eval_truth, "ground-truth PVOX")->required();
  eval_cmd->add_option("--formation", eval_formation, "vh | ao | ea-paper | ea-composite")
      ->capture_default_str();
  eval_cmd->add_option("--seed", eval_seed, "view-sampling seed")->capture_default_str();
  eval_cmd->add_option("--threshold", eval_threshold, "IoU occupancy threshold")
      ->capture_default_str();
  eval_cmd->add_option("--epsilon", eval_epsilon, "chamfer occupancy cutoff")
      ->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "also write the report CSV here");

  // gradcheck
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  std::string grad_formation = "ao";
  int grad_np = 8;
  std::uint64_t grad_seed = 7;
  grad_cmd->add_option("--formation", grad_formation, "vh | ao | ea-paper | ea-composite")
      ->capture_default_str();
  grad_cmd->add_option("--np", grad_np, "grid resolution")->capture_default_str();
  grad_cmd->add_option("--seed", grad_seed, "random seed")->capture_default_str();

  try {
    // lets global options like --threads appear after the subcommand too
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage problems are input failures
  }

  try {
    apply_threads(threads);
    if (*synth) return run_synth(synth_out, synth_np, synth_shapes, synth_views, synth_formation,
                                 synth_seed);
    if (*train_cmd) {
      // config file first, then explicit command-line flags override it
      TrainCli merged;
      if (!train_config.empty()) apply_train_config_file(merged, train_config);
      if (opt_data->count()) merged.data_dir = tc.data_dir;
      if (opt_out->count()) merged.out_dir = tc.out_dir;
      if (opt_np->count()) merged.cfg.np = tc.cfg.np;
      if (opt_formation->count()) merged.cfg.formation = formation_from_flag(train_formation);
      if (opt_steps->count()) merged.cfg.steps = tc.cfg.steps;
      if (opt_batch->count()) merged.cfg.batch_size = tc.cfg.batch_size;
      if (opt_lambda->count()) merged.cfg.lambda = tc.cfg.lambda;
      if (opt_lr->count()) merged.cfg.lr = tc.cfg.lr;
      if (opt_zdim->count()) merged.cfg.zdim = tc.cfg.zdim;
      if (opt_width->count()) merged.cfg.base_width = tc.cfg.base_width;
      if (opt_seed->count()) merged.cfg.seed = tc.cfg.seed;
      if (opt_ckpt->count()) merged.cfg.checkpoint_every = tc.cfg.checkpoint_every;
      if (opt_holdout->count()) merged.cfg.holdout_shapes = tc.cfg.holdout_shapes;
      if (opt_shapes->count()) merged.shapes = tc.shapes;
      if (opt_views->count()) merged.views = tc.views;
      if (opt_nonsat->count()) merged.cfg.non_saturating = tc.cfg.non_saturating;
      if (opt_logdom->count()) merged.cfg.log_domain = tc.cfg.log_domain;
      return run_train(merged);
    }
    if (*recon) return run_reconstruct(recon_ckpt, recon_image, recon_out);
    if (*render_cmd)
      return run_render(render_volume, render_view, render_formation, render_out, render_logdom);
    if (*eval_cmd)
      return run_evaluate(eval_recon, eval_truth, eval_formation, eval_seed, eval_threshold,
                          eval_epsilon, eval_out);
    if (*grad_cmd) return run_gradcheck(grad_formation, grad_np, grad_seed);
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
