#include "dlgnet/ablation.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "dlgnet/trainer.hpp"

DLGNET_NAMESPACE_BEGIN

const std::vector<std::string>& ablation_suite_names() {
  static const std::vector<std::string> names{"components", "dlg_settings", "recip_steps"};
  return names;
}

AblationSuite ablation_suite(const std::string& name) {
  AblationSuite s;
  s.name = name;
  if (name == "components") {
    s.base = {{"model.fusion", "dlg"}, {"recip.t", "5"}, {"model.skip", "false"}};
    s.variants = {{"Enc-concat", {{"model.fusion", "concat"}}},
                  {"Enc-lstm", {{"model.fusion", "gru"}}},
                  {"Enc-DLG", {{"recip.t", "1"}}},
                  {"Enc-DLG-R", {}},
                  {"Enc-DLG-R-r", {{"model.skip", "true"}}}};
  } else if (name == "dlg_settings") {
    s.base = {{"model.fusion", "dlg"}, {"recip.t", "5"}, {"model.skip", "false"},
              {"dlg.k", "3"}, {"dlg.dilations", "1,3"}, {"dlg.use_ff", "true"}, {"dlg.use_fa", "true"}};
    s.variants = {{"k1-d1", {{"dlg.k", "1"}, {"dlg.dilations", "1"}}},
                  {"k3-d1", {{"dlg.dilations", "1"}}},
                  {"k3-d1,3", {}},
                  {"k3-d1,3,5", {{"dlg.dilations", "1,3,5"}}},
                  {"Gf-only", {{"dlg.use_fa", "false"}}},
                  {"Ga-only", {{"dlg.use_ff", "false"}}}};
  } else if (name == "recip_steps") {
    s.base = {{"model.fusion", "dlg"}, {"recip.t", "5"}, {"model.skip", "false"}};
    s.variants = {{"T=1", {{"recip.t", "1"}}}, {"T=3", {{"recip.t", "3"}}}, {"T=5", {}}};
  } else {
    throw std::invalid_argument("unknown ablation suite '" + name +
                                "' (expected components, dlg_settings or recip_steps)");
  }
  return s;
}

std::vector<AblationRow> run_ablation(const AblationSuite& suite, const RunConfig& config,
                                      const std::vector<LightFieldSample>& train,
                                      const std::vector<LightFieldSample>& test,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::function<void(const AblationRow&)>& on_row) {
  RunConfig base = config;
  for (const auto& [k, v] : suite.base) base.set(k, v);
  std::vector<AblationRow> rows;
  for (std::uint64_t seed : seeds)
    for (const auto& variant : suite.variants) {
      RunConfig cfg = base;
      for (const auto& [k, v] : variant.overrides) cfg.set(k, v);
      cfg.set("train.seed", std::to_string(seed));
      const auto t0 = std::chrono::steady_clock::now();
      SaliencyModel model(model_config(cfg), seed);
      Trainer trainer(model, train_config(cfg));
      const auto records = trainer.run(train, trainer.config().steps);
      AblationRow row;
      row.variant = variant.name;
      row.seed = seed;
      row.final_loss = records.empty() ? 0.0 : records.back().total;
      row.test = evaluate(model, test);
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      RunConfig reference = base;
      reference.set("train.seed", std::to_string(seed));
      row.diff = reference.diff(cfg);
      rows.push_back(row);
      if (on_row) on_row(rows.back());
    }
  return rows;
}

void write_ablation_csv(const std::filesystem::path& path, const std::string& suite,
                        const std::vector<AblationRow>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "suite,variant,seed,S,max_f,max_e,mae,final_loss,seconds\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,\"%s\",%llu,%.6f,%.6f,%.6f,%.6f,%.6f,%.2f\n", suite.c_str(),
                  r.variant.c_str(), static_cast<unsigned long long>(r.seed), r.test.s_measure,
                  r.test.max_f, r.test.max_e, r.test.mae, r.final_loss, r.seconds);
    os << buf;
  }
}

void write_config_audit(const std::filesystem::path& path, const std::vector<AblationRow>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  std::set<std::string> seen;
  for (const auto& r : rows) {
    if (!seen.insert(r.variant).second) continue;
    os << r.variant << ":";
    if (r.diff.empty()) os << " (base)";
    for (std::size_t i = 0; i < r.diff.size(); ++i)
      os << (i ? "; " : " ") << r.diff[i].first << "=" << r.diff[i].second;
    os << "\n";
  }
}

DLGNET_NAMESPACE_END
