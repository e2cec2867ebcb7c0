#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dlgnet/ablation.hpp"
#include "dlgnet/checks.hpp"
#include "dlgnet/complexity.hpp"
#include "dlgnet/config.hpp"
#include "dlgnet/dataset.hpp"
#include "dlgnet/double_gradcheck.hpp"
#include "dlgnet/image_io.hpp"
#include "dlgnet/kernels.hpp"
#include "dlgnet/ops.hpp"
#include "dlgnet/trainer.hpp"

namespace fs = std::filesystem;
using namespace dlg;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key=value config file");
  cmd->add_option("--set", c.sets, "override one key (key=value), repeatable");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--seed", c.seed, "seed for this subcommand");
}

RunConfig load_config(const Common& c, const char* seed_key) {
  RunConfig cfg;
  if (!c.config.empty()) cfg.load_file(c.config);
  for (const auto& s : c.sets) cfg.apply(s);
  if (c.seed && seed_key) cfg.set(seed_key, std::to_string(*c.seed));
  if (const auto threads = cfg.get_size("runtime.threads")) kernels::set_threads(int(threads));
  return cfg;
}

fs::path out_dir(const Common& c, const fs::path& fallback) {
  const fs::path dir = c.out.empty() ? fallback : fs::path(c.out);
  fs::create_directories(dir);
  return dir;
}

std::vector<LightFieldSample> load_resized(const DatasetManifest& m, bool train, std::size_t side) {
  auto samples = load_split(m, train);
  for (auto& s : samples) s = resize_sample(s, side);
  return samples;
}

SaliencyModel model_from_checkpoint(const RunConfig& cfg, const fs::path& ckpt) {
  if (!fs::exists(ckpt)) throw std::runtime_error("checkpoint not found: " + ckpt.string());
  SaliencyModel model(model_config(cfg), 0);
  load_parameters(model, decode_checkpoint(read_bytes(ckpt)));
  return model;
}

int cmd_gen_data(const Common& c) {
  const RunConfig cfg = load_config(c, "data.seed");
  const fs::path dir = out_dir(c, cfg.get("data.root"));
  const auto m = generate_dataset(dir, generate_options(cfg));
  cfg.write(dir / "config.txt");
  std::printf("wrote %zu train + %zu test samples to %s\n", m.train.size(), m.test.size(),
              dir.string().c_str());
  return 0;
}

int cmd_train(const Common& c, const std::string& data, const std::string& resume) {
  const RunConfig cfg = load_config(c, "train.seed");
  const fs::path dir = out_dir(c, "runs/train");
  cfg.write(dir / "config.txt");
  const auto manifest = read_manifest(data.empty() ? fs::path(cfg.get("data.root")) : fs::path(data));
  const TrainConfig tc = train_config(cfg);
  const auto train = load_resized(manifest, true, tc.resize);
  SaliencyModel model(model_config(cfg), tc.seed);
  Trainer trainer(model, tc);
  if (!resume.empty()) trainer.load(resume);
  const auto t0 = std::chrono::steady_clock::now();
  const auto records = trainer.run(train, tc.steps, [&](const LossRecord& r) {
    if (tc.log_interval && (r.step % tc.log_interval == 0 || r.step == tc.steps)) {
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::printf("step %6zu  lr %.2e  loss %.5f  final %.5f  (%.1fs)\n", r.step, r.lr, r.total,
                  r.final_bce, s);
      std::fflush(stdout);
    }
    if (tc.ckpt_interval && r.step % tc.ckpt_interval == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "ckpt_%06zu.dlgt", r.step);
      trainer.save(dir / name);
    }
  });
  trainer.save(dir / "checkpoint.dlgt");
  write_loss_curve(dir / "loss_curve.csv", records);
  std::printf("checkpoint: %s\n", (dir / "checkpoint.dlgt").string().c_str());
  return 0;
}

int cmd_eval(const Common& c, const std::string& data, const std::string& ckpt) {
  const RunConfig cfg = load_config(c, nullptr);
  const fs::path dir = out_dir(c, "runs/eval");
  cfg.write(dir / "config.txt");
  const SaliencyModel model = model_from_checkpoint(cfg, ckpt);
  const std::string split = cfg.get("eval.split");
  if (split != "train" && split != "test") throw ConfigError("eval.split must be train or test");
  const fs::path root = data.empty() ? fs::path(cfg.get("data.root")) : fs::path(data);
  const auto samples = load_resized(read_manifest(root), split == "train", cfg.get_size("data.resize"));
  const EvalResult r = evaluate(model, samples);
  const std::vector<std::pair<std::string, EvalResult>> rows{{root.filename().string() + "/" + split, r}};
  write_metrics_csv(dir / "metrics.csv", rows);
  std::cout << format_table(rows);
  return 0;
}

int cmd_infer(const Common& c, const std::string& sample_dir, const std::string& ckpt, bool steps_out) {
  const RunConfig cfg = load_config(c, nullptr);
  const fs::path dir = out_dir(c, "runs/infer");
  cfg.write(dir / "config.txt");
  const SaliencyModel model = model_from_checkpoint(cfg, ckpt);
  const auto sample = resize_sample(read_sample(sample_dir), cfg.get_size("data.resize"));
  const ModelOutput out = predict(model, sample);
  const std::size_t h = sample.height(), w = sample.width();
  write_pgm(dir / "saliency.pgm", reshape(out.final_map, {1, h, w}));
  std::size_t written = 1;
  if (steps_out) {
    NoGradGuard guard;
    for (std::size_t t = 0; t < out.side.size(); ++t) {
      const Tensor up = bilinear_resize(out.side[t], h, w);
      write_pgm(dir / ("out_t" + std::to_string(t + 1) + ".pgm"), reshape(up, {1, h, w}));
      ++written;
    }
  }
  std::printf("wrote %zu map(s) to %s\n", written, dir.string().c_str());
  return 0;
}

int cmd_check(const Common& c, std::size_t instances, std::size_t coords) {
  const RunConfig cfg = load_config(c, nullptr);
  const fs::path dir = out_dir(c, "runs/check");
  cfg.write(dir / "config.txt");
  const std::uint64_t seed = c.seed.value_or(0);
  OracleSuiteOptions oo;
  oo.instances = instances;
  oo.seed = seed;
  const auto oracle = run_oracle_suite(oo);
  GradSuiteOptions go;
  go.seed = seed;
  go.gradcheck.max_coords = coords;
  go.gradcheck.seed = seed;
  const auto single = run_model_gradcheck(go);
  const auto dbl = run_double_gradcheck(seed, coords);
  const bool oracle_ok = oracle.max_abs_diff <= 1e-5 && oracle.max_loop_diff <= 1e-5;
  const bool grad_ok = dbl.max_rel_error <= dbl.tolerance;
  std::printf("oracle: %zu instances, max |dlg - dense| = %.3e, max |dlg - loop| = %.3e  %s\n",
              oracle.instances, oracle.max_abs_diff, oracle.max_loop_diff, oracle_ok ? "ok" : "FAILED");
  std::printf("gradcheck f64: %zu groups, max relative error = %.3e (%s), tolerance %.0e  %s\n",
              dbl.groups, dbl.max_rel_error, dbl.worst.c_str(), dbl.tolerance,
              grad_ok ? "ok" : "FAILED");
  std::printf("gradcheck f32: %zu groups, max relative error = %.3e (%s), eps %.0e\n",
              single.entries.size(), single.max_rel_error, single.worst.c_str(), kGradcheckEps);
  for (const auto& e : single.entries)
    if (e.rel_error > kGradcheckTolerance)
      std::printf("  f32 %s: rel %.3e, |grad| %.3e\n", e.name.c_str(), e.rel_error, e.analytic_norm);
  return oracle_ok && grad_ok ? 0 : kExitFailure;
}

int cmd_bench(const Common& c) {
  const RunConfig cfg = load_config(c, nullptr);
  const fs::path dir = out_dir(c, "runs/bench");
  cfg.write(dir / "config.txt");
  AuditOptions ao;
  ao.spec = model_config(cfg).window;
  ao.repeats = cfg.get_size("bench.repeats");
  ao.seed = c.seed.value_or(0);
  const std::size_t n = cfg.get_size("bench.n"), ch = cfg.get_size("bench.c");
  std::vector<SizeSetting> sizes;
  for (std::size_t side : {16, 32, 64}) {
    sizes.push_back({n, side, side, ch});
    sizes.push_back({n, side, 2 * side, ch});
  }
  const auto rows = audit_complexity(sizes, ao);
  write_complexity_csv(dir / "complexity.csv", rows);
  bool counts = true;
  for (const auto& r : rows) counts = counts && r.counts_match;
  for (std::size_t i = 0; i + 1 < rows.size(); i += 2)
    std::printf("N=%zu H=%zu: t(%zux%zu)/t(%zux%zu) = %.3f\n", n, rows[i].size.h, rows[i + 1].size.h,
                rows[i + 1].size.w, rows[i].size.h, rows[i].size.w, rows[i + 1].ms / rows[i].ms);
  std::printf("fitted log-log slope of time vs N*HW: %.3f\n", fitted_slope(rows));
  std::printf("edge counts match closed forms: %s\n", counts ? "yes" : "NO");
  return counts ? 0 : kExitFailure;
}

int cmd_ablate(const Common& c, const std::string& data, const std::string& suite_name) {
  const RunConfig cfg = load_config(c, nullptr);
  const fs::path dir = out_dir(c, "runs/ablate");
  cfg.write(dir / "config.txt");
  std::vector<std::uint64_t> seeds;
  if (c.seed)
    seeds.push_back(*c.seed);
  else
    for (auto s : cfg.get_sizes("ablate.seeds")) seeds.push_back(s);
  const auto manifest = read_manifest(data.empty() ? fs::path(cfg.get("data.root")) : fs::path(data));
  const std::size_t side = cfg.get_size("data.resize");
  const auto train = load_resized(manifest, true, side);
  const auto test = load_resized(manifest, false, side);
  std::vector<std::string> suites;
  if (suite_name == "all")
    suites = ablation_suite_names();
  else
    suites.push_back(suite_name);
  for (const auto& name : suites) {
    AblationSuite suite;
    try {
      suite = ablation_suite(name);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const auto rows = run_ablation(suite, cfg, train, test, seeds, [](const AblationRow& r) {
      std::printf("  %-12s seed %llu  maxF %.4f  S %.4f  (%.0fs)\n", r.variant.c_str(),
                  static_cast<unsigned long long>(r.seed), r.test.max_f, r.test.s_measure, r.seconds);
      std::fflush(stdout);
    });
    write_ablation_csv(dir / ("ablation_" + name + ".csv"), name, rows);
    write_config_audit(dir / ("ablation_" + name + "_audit.txt"), rows);
    std::vector<std::pair<std::string, EvalResult>> table;
    for (const auto& r : rows) table.push_back({r.variant + " s" + std::to_string(r.seed), r.test});
    std::cout << name << "\n" << format_table(table);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual local graph light-field saliency toolkit"};
  app.require_subcommand(1);
  Common common;
  std::string data, ckpt, resume, sample, suite = "all";
  bool steps_out = false;
  std::size_t instances = 50, coords = 0;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic light-field dataset");
  add_common(gen, common);
  auto* train = app.add_subcommand("train", "train a model; writes checkpoint.dlgt and loss_curve.csv");
  add_common(train, common);
  train->add_option("--data", data, "dataset root (default data.root)");
  train->add_option("--resume", resume, "checkpoint to resume from");
  auto* eval = app.add_subcommand("eval", "score a checkpoint; writes metrics.csv");
  add_common(eval, common);
  eval->add_option("--data", data, "dataset root (default data.root)");
  eval->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  auto* infer = app.add_subcommand("infer", "predict saliency for one sample directory");
  add_common(infer, common);
  infer->add_option("--sample", sample, "sample directory")->required();
  infer->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  infer->add_flag("--steps-out", steps_out, "also write out_t<k>.pgm side maps per step");
  auto* check = app.add_subcommand("check", "dense-oracle equivalence and gradient checks");
  add_common(check, common);
  check->add_option("--instances", instances, "random oracle instances");
  check->add_option("--coords", coords, "coordinates per parameter (0 = all)");
  auto* bench = app.add_subcommand("bench", "edge-count audit and dlg_forward timing; writes complexity.csv");
  add_common(bench, common);
  auto* ablate = app.add_subcommand("ablate", "train ablation variants; writes ablation_<suite>.csv");
  add_common(ablate, common);
  ablate->add_option("--data", data, "dataset root (default data.root)");
  ablate->add_option("--suite", suite, "components, dlg_settings, recip_steps or all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(common);
    if (train->parsed()) return cmd_train(common, data, resume);
    if (eval->parsed()) return cmd_eval(common, data, ckpt);
    if (infer->parsed()) return cmd_infer(common, sample, ckpt, steps_out);
    if (check->parsed()) return cmd_check(common, instances, coords);
    if (bench->parsed()) return cmd_bench(common);
    if (ablate->parsed()) return cmd_ablate(common, data, suite);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}
