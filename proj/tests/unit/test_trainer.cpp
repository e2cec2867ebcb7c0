#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include <unistd.h>

#include "dlgnet/config.hpp"
#include "dlgnet/container.hpp"
#include "dlgnet/trainer.hpp"

using namespace dlg;
namespace fs = std::filesystem;

namespace {

RunConfig small_config() {
  RunConfig cfg;
  cfg.set("recip.t", "2");
  cfg.set("train.steps", "40");
  cfg.set("train.lr", "1e-3");
  return cfg;
}

std::vector<LightFieldSample> samples(std::size_t count, std::uint64_t seed = 0) {
  return generate_samples(SceneRanges{}, count, seed);
}

std::vector<std::uint8_t> snapshot(const Trainer& t) { return encode_checkpoint(t.checkpoint()); }

std::vector<std::uint8_t> parameter_bytes(const SaliencyModel& m) {
  std::vector<NamedTensor> entries;
  for (const auto& p : m.params().items()) entries.push_back({p.name, p.value});
  return encode_checkpoint(entries);
}

}  // namespace

TEST_CASE("learning rate schedule") {
  TrainConfig c;
  c.steps = 100;
  c.lr = 1e-3;
  CHECK(learning_rate(c, 0) == 1e-3);
  CHECK(learning_rate(c, 74) == 1e-3);
  CHECK(learning_rate(c, 75) == doctest::Approx(1e-4));
  CHECK(learning_rate(c, 89) == doctest::Approx(1e-4));
  CHECK(learning_rate(c, 90) == doctest::Approx(1e-5));
  c.milestones = {0.9, 0.5};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("training is deterministic") {
  const RunConfig cfg = small_config();
  const auto train = samples(4);
  SaliencyModel a(model_config(cfg), 3), b(model_config(cfg), 3);
  Trainer ta(a, train_config(cfg)), tb(b, train_config(cfg));
  const auto ra = ta.run(train, 12);
  const auto rb = tb.run(train, 12);
  CHECK(ta.steps_done() == 12);
  REQUIRE(ra.size() == rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) CHECK(ra[i].total == rb[i].total);
  CHECK(snapshot(ta) == snapshot(tb));

  const EvalResult e1 = evaluate(a, train), e2 = evaluate(a, train);
  CHECK(e1.max_f == e2.max_f);
  CHECK(e1.s_measure == e2.s_measure);
  CHECK(e1.mae == e2.mae);
  CHECK(e1.max_e == e2.max_e);

  SaliencyModel c(model_config(cfg), 4);
  Trainer tc(c, train_config(cfg));
  tc.run(train, 12);
  CHECK(snapshot(tc) != snapshot(ta));
}

TEST_CASE("zero learning rate leaves the parameters unchanged") {
  RunConfig cfg = small_config();
  cfg.set("train.lr", "0");
  SaliencyModel m(model_config(cfg), 5);
  const auto before = parameter_bytes(m);
  Trainer t(m, train_config(cfg));
  t.run(samples(3), 5);
  CHECK(parameter_bytes(m) == before);
}

TEST_CASE("checkpoint round trip reproduces further steps") {
  const RunConfig cfg = small_config();
  const auto train = samples(4, 1);
  const fs::path path = fs::temp_directory_path() / ("dlgnet_ckpt_" + std::to_string(::getpid()) + ".bin");

  SaliencyModel a(model_config(cfg), 6);
  Trainer ta(a, train_config(cfg));
  ta.run(train, 10);
  ta.save(path);
  const auto continued = ta.run(train, 20);

  SaliencyModel b(model_config(cfg), 99);
  Trainer tb(b, train_config(cfg));
  tb.load(path);
  CHECK(tb.steps_done() == 10);
  const auto resumed = tb.run(train, 20);
  REQUIRE(resumed.size() == continued.size());
  for (std::size_t i = 0; i < resumed.size(); ++i) {
    CHECK(resumed[i].step == continued[i].step);
    CHECK(resumed[i].total == continued[i].total);
  }
  CHECK(snapshot(ta) == snapshot(tb));
  fs::remove(path);

  auto entries = ta.checkpoint();
  entries.erase(entries.begin());
  SaliencyModel c(model_config(cfg), 6);
  CHECK_THROWS(load_parameters(c, entries));
}

TEST_CASE("loss decreases over the first 200 steps on one sample") {
  RunConfig cfg = small_config();
  cfg.set("train.steps", "200");
  cfg.set("train.lr", "1e-4");
  cfg.set("train.augment", "false");
  SaliencyModel m(model_config(cfg), 7);
  Trainer t(m, train_config(cfg));
  const auto records = t.run(samples(1, 2), 200);
  REQUIRE(records.size() == 200);
  std::vector<double> windows;
  for (std::size_t w = 0; w < 4; ++w) {
    double acc = 0;
    for (std::size_t i = 0; i < 50; ++i) acc += records[w * 50 + i].total;
    windows.push_back(acc / 50);
  }
  for (std::size_t w = 1; w < 4; ++w) CHECK(windows[w] <= windows[w - 1]);
  CHECK(records.back().side_bce.size() == 2);
}

TEST_CASE("a non-finite loss is reported with its step") {
  const RunConfig cfg = small_config();
  SaliencyModel m(model_config(cfg), 8);
  Trainer t(m, train_config(cfg));
  const auto train = samples(2);
  t.run(train, 2);
  auto& items = m.params().items();
  items.back().value.data()[0] = std::numeric_limits<Real>::quiet_NaN();
  try {
    t.step(train);
    FAIL("no error for a NaN loss");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find('3') != std::string::npos);
  }
}

TEST_CASE("samples with different slice counts train without padding") {
  RunConfig cfg = small_config();
  SceneRanges ranges;
  ranges.min_slices = 1;
  ranges.max_slices = 12;
  const auto mixed = generate_samples(ranges, 6, 3);
  std::size_t distinct = 0;
  for (std::size_t i = 1; i < mixed.size(); ++i) distinct += mixed[i].num_slices() != mixed[0].num_slices();
  CHECK(distinct > 0);
  SaliencyModel m(model_config(cfg), 9);
  Trainer t(m, train_config(cfg));
  const auto records = t.run(mixed, 8);
  for (const auto& r : records) CHECK(std::isfinite(r.total));
  for (const auto& s : mixed) {
    const ModelOutput out = predict(m, s);
    CHECK(out.trace.focal[0].dim(0) == s.num_slices());
    CHECK(out.final_map.shape() == Shape{1, 1, 32, 32});
  }
  CHECK(evaluate(m, mixed).samples == mixed.size());
}

TEST_CASE("loss curve file") {
  const fs::path path = fs::temp_directory_path() / ("dlgnet_curve_" + std::to_string(::getpid()) + ".csv");
  write_loss_curve(path, {{1, 1e-3, 2.0, 0.5, {0.75, 0.75}}});
  std::ifstream is(path);
  std::string header;
  std::getline(is, header);
  CHECK(header == "step,lr,total,final,side_1,side_2");
  fs::remove(path);
}
