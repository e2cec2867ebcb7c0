#include "dlgnet/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

DLGNET_NAMESPACE_BEGIN

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

template <class T, class Parse>
T parse_or_throw(const std::string& key, const std::string& text, Parse parse) {
  try {
    std::size_t used = 0;
    T v = parse(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": cannot parse '" + text + "'");
  }
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& RunConfig::defaults() {
  static const std::vector<std::pair<std::string, std::string>> table{
      {"data.root", "data"},
      {"data.count", "10"},
      {"data.n_train", "8"},
      {"data.n_test", "2"},
      {"data.height", "32"},
      {"data.width", "32"},
      {"data.slices", "4"},
      {"data.blur_gain", "4"},
      {"data.seed", "0"},
      {"data.resize", "0"},
      {"encoder.channels", "16,32,32,32"},
      {"model.c", "16"},
      {"model.c_edge", "16"},
      {"model.fusion", "dlg"},
      {"model.skip", "true"},
      {"model.init_phi_zero", "true"},
      {"model.init", "he"},
      {"dlg.k", "3"},
      {"dlg.dilations", "1,3"},
      {"dlg.use_ff", "true"},
      {"dlg.use_fa", "true"},
      {"recip.t", "5"},
      {"gru.kernel", "3"},
      {"train.steps", "2000"},
      {"train.lr", "1e-4"},
      {"train.milestones", "0.75,0.9"},
      {"train.decay", "0.1"},
      {"train.seed", "0"},
      {"train.log_interval", "50"},
      {"train.ckpt_interval", "0"},
      {"train.augment", "true"},
      {"train.min_crop", "0.8"},
      {"eval.split", "test"},
      {"bench.n", "4"},
      {"bench.c", "16"},
      {"bench.repeats", "5"},
      {"ablate.seeds", "0,1,2"},
      {"runtime.threads", "0"},
  };
  return table;
}

RunConfig::RunConfig() {
  for (const auto& [k, v] : defaults()) values_[k] = v;
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(is, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      apply(line);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = trim(value);
}

void RunConfig::apply(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::size_t RunConfig::get_size(const std::string& key) const {
  const auto& t = get(key);
  if (!t.empty() && t[0] == '-') throw ConfigError("config key " + key + " must be non-negative");
  return parse_or_throw<std::size_t>(key, t, [](const std::string& s, std::size_t* u) { return std::stoull(s, u); });
}

std::uint64_t RunConfig::get_u64(const std::string& key) const { return get_size(key); }

double RunConfig::get_double(const std::string& key) const {
  return parse_or_throw<double>(key, get(key), [](const std::string& s, std::size_t* u) { return std::stod(s, u); });
}

bool RunConfig::get_bool(const std::string& key) const {
  const auto& t = get(key);
  if (t == "true" || t == "1" || t == "on") return true;
  if (t == "false" || t == "0" || t == "off") return false;
  throw ConfigError("config key " + key + ": expected true/false, got '" + t + "'");
}

std::vector<std::size_t> RunConfig::get_sizes(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(get(key))) {
    if (!item.empty() && item[0] == '-') throw ConfigError("config key " + key + " must be non-negative");
    out.push_back(parse_or_throw<std::size_t>(key, item, [](const std::string& s, std::size_t* u) { return std::stoull(s, u); }));
  }
  return out;
}

std::vector<int> RunConfig::get_ints(const std::string& key) const {
  std::vector<int> out;
  for (const auto& item : split_list(get(key)))
    out.push_back(parse_or_throw<int>(key, item, [](const std::string& s, std::size_t* u) { return std::stoi(s, u); }));
  return out;
}

std::vector<double> RunConfig::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(get(key)))
    out.push_back(parse_or_throw<double>(key, item, [](const std::string& s, std::size_t* u) { return std::stod(s, u); }));
  return out;
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

void RunConfig::write(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << dump();
}

std::vector<std::pair<std::string, std::string>> RunConfig::diff(const RunConfig& other) const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [k, v] : values_) {
    const auto& theirs = other.values_.at(k);
    if (v != theirs) out.push_back({k, v + " -> " + theirs});
  }
  return out;
}

ModelConfig model_config(const RunConfig& cfg) {
  ModelConfig m;
  m.encoder.stage_channels = cfg.get_sizes("encoder.channels");
  m.channels = cfg.get_size("model.c");
  m.edge_channels = cfg.get_size("model.c_edge");
  m.encoder.out_channels = m.channels;
  m.window.k = int(cfg.get_size("dlg.k"));
  m.window.dilations = cfg.get_ints("dlg.dilations");
  m.steps = cfg.get_size("recip.t");
  m.gru_kernel = cfg.get_size("gru.kernel");
  try {
    m.fusion = parse_fusion(cfg.get("model.fusion"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model.fusion: ") + e.what());
  }
  m.skip = cfg.get_bool("model.skip");
  m.init_phi_zero = cfg.get_bool("model.init_phi_zero");
  try {
    m.init = parse_weight_init(cfg.get("model.init"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model.init: ") + e.what());
  }
  m.dlg.use_ff = cfg.get_bool("dlg.use_ff");
  m.dlg.use_fa = cfg.get_bool("dlg.use_fa");
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return m;
}

SceneRanges scene_ranges(const RunConfig& cfg) {
  SceneRanges r;
  r.height = cfg.get_size("data.height");
  r.width = cfg.get_size("data.width");
  r.min_slices = r.max_slices = cfg.get_size("data.slices");
  r.blur_gain = cfg.get_double("data.blur_gain");
  if (r.height < 4 || r.width < 4 || r.min_slices == 0)
    throw ConfigError("data.height/width must be >= 4 and data.slices >= 1");
  return r;
}

GenerateOptions generate_options(const RunConfig& cfg) {
  GenerateOptions g;
  g.ranges = scene_ranges(cfg);
  g.count = cfg.get_size("data.count");
  g.n_train = cfg.get_size("data.n_train");
  g.n_test = cfg.get_size("data.n_test");
  g.seed = cfg.get_u64("data.seed");
  if (g.n_train + g.n_test > g.count)
    throw ConfigError("data.n_train + data.n_test exceeds data.count");
  return g;
}

AugmentOptions augment_options(const RunConfig& cfg) {
  AugmentOptions a;
  const bool on = cfg.get_bool("train.augment");
  a.flip = a.rotate = a.crop = on;
  a.min_crop = cfg.get_double("train.min_crop");
  if (a.min_crop <= 0 || a.min_crop > 1) throw ConfigError("train.min_crop must lie in (0,1]");
  return a;
}

DLGNET_NAMESPACE_END
