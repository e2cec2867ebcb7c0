#include "dlgnet/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include "dlgnet/ops.hpp"

DLGNET_NAMESPACE_BEGIN

void TrainConfig::validate() const {
  if (steps == 0) throw std::invalid_argument("train.steps must be > 0");
  if (!(lr >= 0)) throw std::invalid_argument("train.lr must be >= 0");
  for (std::size_t i = 0; i < milestones.size(); ++i) {
    if (milestones[i] <= 0 || milestones[i] > 1)
      throw std::invalid_argument("train.milestones must lie in (0,1]");
    if (i && milestones[i] <= milestones[i - 1])
      throw std::invalid_argument("train.milestones must be ascending");
  }
  if (resize % kEncoderStride)
    throw std::invalid_argument("data.resize must be a multiple of " + std::to_string(kEncoderStride));
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.steps = cfg.get_size("train.steps");
  t.lr = cfg.get_double("train.lr");
  t.milestones = cfg.get("train.milestones").empty() ? std::vector<double>{}
                                                      : cfg.get_doubles("train.milestones");
  t.decay = cfg.get_double("train.decay");
  t.seed = cfg.get_u64("train.seed");
  t.log_interval = cfg.get_size("train.log_interval");
  t.ckpt_interval = cfg.get_size("train.ckpt_interval");
  t.augment = cfg.get_bool("train.augment");
  t.augment_options = augment_options(cfg);
  t.resize = cfg.get_size("data.resize");
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return t;
}

double learning_rate(const TrainConfig& config, std::size_t step) {
  double lr = config.lr;
  for (double m : config.milestones)
    if (double(step) >= std::floor(m * double(config.steps))) lr *= config.decay;
  return lr;
}

LightFieldSample resize_sample(const LightFieldSample& s, std::size_t side) {
  if (side == 0 || (s.height() == side && s.width() == side)) return s;
  NoGradGuard guard;
  LightFieldSample out;
  out.id = s.id;
  out.allfocus = reshape(bilinear_resize(reshape(s.allfocus, {1, 3, s.height(), s.width()}), side, side),
                         {3, side, side});
  out.slices = bilinear_resize(s.slices, side, side);
  out.gt = reshape(nearest_resize(reshape(s.gt, {1, 1, s.height(), s.width()}), side, side),
                   {1, side, side});
  return out;
}

Batch make_batch(const LightFieldSample& s) {
  const std::size_t h = s.height(), w = s.width();
  return {reshape(s.allfocus.detach(), {1, 3, h, w}), s.slices.detach(),
          reshape(s.gt.detach(), {1, 1, h, w})};
}

Trainer::Trainer(SaliencyModel& model, TrainConfig config) : model_(model), config_(std::move(config)) {
  config_.validate();
}

LossRecord Trainer::step(const std::vector<LightFieldSample>& train) {
  if (train.empty()) throw std::invalid_argument("training needs at least one sample");
  const std::size_t index = steps_done();
  SeededRng rng(mix_seed(config_.seed, index));
  LightFieldSample sample = resize_sample(train[rng.below(train.size())], config_.resize);
  if (config_.augment) sample = augment(sample, rng, config_.augment_options);
  const Batch batch = make_batch(sample);

  model_.params().zero_grad();
  const ModelOutput out = model_.forward(batch.allfocus, batch.slices);
  const LossBreakdown loss = model_.loss(out, batch.gt);
  if (loss.total.has_nonfinite())
    throw NumericError("non-finite loss at step " + std::to_string(index + 1));
  loss.total.backward();
  const double lr = learning_rate(config_, index);
  adam_.step(model_.params(), lr);
  return {index + 1, lr, loss.total.item(), loss.final_bce, loss.side_bce};
}

std::vector<LossRecord> Trainer::run(const std::vector<LightFieldSample>& train, std::size_t until,
                                     const std::function<void(const LossRecord&)>& on_record) {
  std::vector<LossRecord> records;
  while (steps_done() < until) {
    records.push_back(step(train));
    if (on_record) on_record(records.back());
  }
  return records;
}

std::vector<NamedTensor> Trainer::checkpoint() const {
  std::vector<NamedTensor> out;
  const auto& items = model_.params().items();
  for (const auto& p : items) out.push_back({p.name, p.value.detach()});
  const auto& m = adam_.first_moments();
  const auto& v = adam_.second_moments();
  for (std::size_t k = 0; k < m.size(); ++k) {
    out.push_back({"adam.m." + items[k].name, m[k].detach()});
    out.push_back({"adam.v." + items[k].name, v[k].detach()});
  }
  out.push_back({"trainer.step", Tensor({1}, {Real(steps_done())})});
  return out;
}

void load_parameters(SaliencyModel& model, const std::vector<NamedTensor>& entries) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e.value;
  for (auto& p : model.params().items()) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw FormatError("checkpoint lacks parameter " + p.name);
    if (it->second->shape() != p.value.shape())
      throw FormatError("checkpoint parameter " + p.name + " has shape " +
                        to_string(it->second->shape()) + ", model expects " + to_string(p.value.shape()));
    std::copy(it->second->data().begin(), it->second->data().end(), p.value.data().begin());
  }
}

void Trainer::restore(const std::vector<NamedTensor>& entries) {
  load_parameters(model_, entries);
  std::map<std::string, const Tensor*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e.value;
  auto step_it = by_name.find("trainer.step");
  if (step_it == by_name.end()) throw FormatError("checkpoint lacks trainer.step");
  const auto steps = std::uint64_t(step_it->second->item());
  std::vector<Tensor> m, v;
  for (const auto& p : model_.params().items()) {
    auto mi = by_name.find("adam.m." + p.name), vi = by_name.find("adam.v." + p.name);
    if (mi == by_name.end() || vi == by_name.end()) {
      if (steps > 0) throw FormatError("checkpoint lacks Adam state for " + p.name);
      continue;
    }
    m.push_back(mi->second->detach());
    v.push_back(vi->second->detach());
  }
  adam_.restore(steps, std::move(m), std::move(v));
}

void Trainer::save(const std::filesystem::path& path) const {
  write_bytes(path, encode_checkpoint(checkpoint()));
}

void Trainer::load(const std::filesystem::path& path) { restore(decode_checkpoint(read_bytes(path))); }

ModelOutput predict(const SaliencyModel& model, const LightFieldSample& sample) {
  NoGradGuard guard;
  const Batch b = make_batch(sample);
  return model.forward(b.allfocus, b.slices);
}

std::vector<SampleScores> score_samples(const SaliencyModel& model,
                                        const std::vector<LightFieldSample>& samples) {
  std::vector<SampleScores> scores;
  for (const auto& s : samples) scores.push_back(score_sample(predict(model, s).final_map, s.gt));
  return scores;
}

EvalResult evaluate(const SaliencyModel& model, const std::vector<LightFieldSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("evaluation set is empty");
  return aggregate(score_samples(model, samples));
}

double mean_final_bce(const SaliencyModel& model, const std::vector<LightFieldSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("evaluation set is empty");
  double acc = 0;
  for (const auto& s : samples) {
    const ModelOutput out = predict(model, s);
    NoGradGuard guard;
    acc += bce_loss(out.final_map, make_batch(s).gt).item();
  }
  return acc / double(samples.size());
}

void write_loss_curve(const std::filesystem::path& path, const std::vector<LossRecord>& records) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "step,lr,total,final";
  const std::size_t sides = records.empty() ? 0 : records.front().side_bce.size();
  for (std::size_t t = 1; t <= sides; ++t) os << ",side_" << t;
  os << "\n";
  char buf[64];
  for (const auto& r : records) {
    os << r.step;
    for (double v : {r.lr, r.total, r.final_bce}) {
      std::snprintf(buf, sizeof buf, ",%.9g", v);
      os << buf;
    }
    for (double v : r.side_bce) {
      std::snprintf(buf, sizeof buf, ",%.9g", v);
      os << buf;
    }
    os << "\n";
  }
}

DLGNET_NAMESPACE_END
