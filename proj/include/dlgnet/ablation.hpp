#pragma once

#include "dlgnet/namespace.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dlgnet/config.hpp"
#include "dlgnet/metrics.hpp"
#include "dlgnet/scene.hpp"

DLGNET_NAMESPACE_BEGIN

struct AblationVariant {
  std::string name;
  std::vector<std::pair<std::string, std::string>> overrides;  // relative to the suite base
};

struct AblationSuite {
  std::string name;
  std::vector<std::pair<std::string, std::string>> base;  // applied to the run config first
  std::vector<AblationVariant> variants;                  // in table order
};

/// components, dlg_settings or recip_steps. Throws std::invalid_argument otherwise.
AblationSuite ablation_suite(const std::string& name);
const std::vector<std::string>& ablation_suite_names();

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  EvalResult test;
  double final_loss = 0;
  double seconds = 0;
  std::vector<std::pair<std::string, std::string>> diff;  // vs. the suite base
};

/// Trains every variant once per seed (train.seed = seed) and scores the test split.
std::vector<AblationRow> run_ablation(const AblationSuite& suite, const RunConfig& config,
                                      const std::vector<LightFieldSample>& train,
                                      const std::vector<LightFieldSample>& test,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::function<void(const AblationRow&)>& on_row = {});

/// suite,variant,seed,S,max_f,max_e,mae,final_loss,seconds
void write_ablation_csv(const std::filesystem::path& path, const std::string& suite,
                        const std::vector<AblationRow>& rows);
/// One line per variant: "variant: key=a -> b; ..."
void write_config_audit(const std::filesystem::path& path, const std::vector<AblationRow>& rows);

DLGNET_NAMESPACE_END
