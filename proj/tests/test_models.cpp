#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "sattn/checkpoint.hpp"
#include "sattn/errors.hpp"
#include "sattn/model.hpp"
#include "sattn/ops.hpp"
#include "sattn/spectral.hpp"
#include "sattn/train.hpp"

using namespace sattn;

namespace {

ModelConfig small_config(Architecture a, Mechanism m) {
  ModelConfig c;
  c.architecture = a;
  c.mechanism = m;
  c.C = 3;
  c.L = 24;
  c.T = 6;
  c.P = 8;
  c.S = 4;
  c.H = 2;
  c.D = 8;
  c.layers = 2;
  c.F = m == Mechanism::soatten ? 5 : 0;
  c.seed = 3;
  return c;
}

std::vector<ModelConfig> valid_small_configs() {
  std::vector<ModelConfig> out;
  for (Architecture a : {Architecture::variate, Architecture::temporal})
    for (Mechanism m : {Mechanism::conventional, Mechanism::fsatten, Mechanism::soatten}) {
      if (m == Mechanism::fsatten && a == Architecture::temporal) continue;
      out.push_back(small_config(a, m));
    }
  return out;
}

}  // namespace

TEST_CASE("patchify examples") {
  std::vector<double> x(96);
  for (std::size_t i = 0; i < 96; ++i) x[i] = static_cast<double>(i);
  const PatchSet p = patchify(x, 16, 8);
  CHECK(p.count() == 12);
  CHECK(p.length() == 16);
  CHECK(p.patches(1, 0) == 8.0);
  CHECK(p.patches(11, 0) == 88.0);
  CHECK(p.patches(11, 7) == 95.0);
  CHECK(p.patches(11, 8) == 95.0);  // end replication
  CHECK(p.patches(11, 15) == 95.0);

  const PatchSet whole = patchify(x, 96, 96);
  CHECK(whole.count() == 2);
  for (std::size_t i = 0; i < 96; ++i) CHECK(whole.patches(0, i) == x[i]);
  for (std::size_t i = 0; i < 96; ++i) CHECK(whole.patches(1, i) == 95.0);

  const std::vector<double> flat(20, 4.25);
  const Tensor flat_patches = patchify(flat, 6, 3).patches;
  for (double v : flat_patches.storage()) CHECK(v == 4.25);

  CHECK_THROWS_AS(patchify(flat, 21, 1), ConfigError);
  CHECK_THROWS_AS(patchify(flat, 4, 5), ConfigError);
  CHECK_THROWS_AS(patchify(flat, 4, 0), ConfigError);
}

TEST_CASE("patch count matches explicit window enumeration") {
  for (std::size_t L = 1; L <= 40; ++L)
    for (std::size_t P = 1; P <= L; ++P)
      for (std::size_t S = 1; S <= P; ++S) {
        std::size_t full = 0;
        for (std::size_t start = 0; start + P <= L; start += S) ++full;
        std::vector<double> x(L);
        CHECK(patchify(x, P, S).count() == full + 1);
      }
}

TEST_CASE("instance normalization") {
  std::mt19937_64 rng(1);
  SUBCASE("round trip") {
    const Tensor x = oracle::random_tensor({4, 30}, rng, -50, 80);
    const auto [xn, stats] = instance_normalize(x);
    CHECK(max_abs_diff(instance_denormalize(xn, stats), x) < 1e-9);
    for (std::size_t i = 0; i < 4; ++i) {
      double m = 0, v = 0;
      for (std::size_t t = 0; t < 30; ++t) m += xn(i, t);
      for (std::size_t t = 0; t < 30; ++t) v += xn(i, t) * xn(i, t);
      CHECK(std::abs(m / 30) < 1e-12);
      CHECK(std::abs(v / 30 - 1.0) < 1e-9);
    }
  }
  SUBCASE("already standardized input is unchanged") {
    const auto [once, s1] = instance_normalize(oracle::random_tensor({3, 40}, rng));
    const auto [twice, s2] = instance_normalize(once);
    CHECK(max_abs_diff(once, twice) < 1e-9);
  }
  SUBCASE("constant rows") {
    const Tensor x({2, 10}, 7.5);
    const auto [xn, stats] = instance_normalize(x);
    for (double v : xn.storage()) CHECK(v == 0.0);
    CHECK(instance_denormalize(xn, stats) == x);
  }
  CHECK_THROWS_AS(instance_normalize(Tensor({2, 1})), ShapeError);
}

TEST_CASE("variate embedding") {
  std::mt19937_64 rng(2);
  const Tensor x = oracle::random_tensor({3, 10}, rng), w = oracle::random_tensor({10, 4}, rng);
  CHECK(max_abs_diff(variate_embed(x, w), oracle::matmul(x, w)) < 1e-13);
  CHECK(variate_embed(x, Tensor({10, 4})) == Tensor({3, 4}));
  Tensor sel({10, 2});
  sel(0, 0) = 1.0;
  sel(4, 1) = 1.0;
  const Tensor e = variate_embed(x, sel);
  CHECK(e(2, 0) == x(2, 0));
  CHECK(e(2, 1) == x(2, 4));
  CHECK_THROWS_AS(variate_embed(x, Tensor({9, 4})), ShapeError);
}

TEST_CASE("encoder layer with zero weights passes the normalized input through") {
  ParameterStore store;
  AttentionOptions o;
  o.heads = 2;
  o.model_dim = 6;
  o.tokens = 4;
  EncoderLayer layer(store, "l", o, SeedSequence(1));
  for (Parameter* p : store.all()) {
    if (p->name.find("gamma") == std::string::npos) p->value.fill(0.0);
  }
  std::mt19937_64 rng(3);
  const Tensor h = oracle::random_tensor({4, 6}, rng, -2, 2);
  Tape tape;
  const Tensor out = layer.forward(tape, tape.constant(h), std::nullopt, 0.0, nullptr, nullptr).value();
  for (std::size_t i = 0; i < 4; ++i) {
    double m = 0, v = 0;
    for (std::size_t j = 0; j < 6; ++j) m += h(i, j);
    m /= 6;
    for (std::size_t j = 0; j < 6; ++j) v += (h(i, j) - m) * (h(i, j) - m);
    v /= 6;
    for (std::size_t j = 0; j < 6; ++j) CHECK(std::abs(out(i, j) - (h(i, j) - m) / std::sqrt(v)) < 1e-4);
  }
}

TEST_CASE("forecast shape and zero-head offset") {
  std::mt19937_64 rng(4);
  for (const ModelConfig& c : valid_small_configs()) {
    Model m(c);
    const Tensor x = oracle::random_tensor({c.C, c.L}, rng, -3, 9);
    CHECK(m.forecast(x).shape() == Shape{c.C, c.T});
    m.parameters().at("head.weight").value.fill(0.0);
    const Tensor y = m.forecast(x);
    for (std::size_t i = 0; i < c.C; ++i) {
      double mean = 0;
      for (std::size_t t = 0; t < c.L; ++t) mean += x(i, t);
      mean /= static_cast<double>(c.L);
      for (std::size_t t = 0; t < c.T; ++t) CHECK(std::abs(y(i, t) - mean) < 1e-12);
    }
    CHECK_THROWS_AS(m.forecast(Tensor({c.C, c.L + 1})), ShapeError);
  }
}

TEST_CASE("constant single-variate input with zero head predicts the constant") {
  ModelConfig c = small_config(Architecture::variate, Mechanism::fsatten);
  c.C = 1;
  Model m(c);
  m.parameters().at("head.weight").value.fill(0.0);
  const Tensor y = m.forecast(Tensor({1, c.L}, 3.25));
  for (double v : y.storage()) CHECK(v == doctest::Approx(3.25));
}

TEST_CASE("forecast shape holds over random valid configs") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    ModelConfig c;
    c.architecture = rng() % 2 ? Architecture::variate : Architecture::temporal;
    c.mechanism = static_cast<Mechanism>(rng() % 3);
    if (c.architecture == Architecture::temporal && c.mechanism == Mechanism::fsatten) c.mechanism = Mechanism::soatten;
    c.C = 1 + rng() % 4;
    c.L = 4 + rng() % 30;
    c.T = 1 + rng() % 8;
    c.P = 1 + rng() % c.L;
    c.S = 1 + rng() % c.P;
    c.H = 1 + rng() % 3;
    c.D = c.H * (1 + rng() % 3);
    c.layers = 1 + rng() % 2;
    c.F = c.mechanism == Mechanism::soatten ? 1 + rng() % 6 : 0;
    c.kernel_K = 1 + 2 * (rng() % 2);
    c.mss_enabled = rng() % 2;
    c.hcc_enabled = rng() % 2;
    c.seed = rng();
    Model m(c);
    CHECK(m.forecast(oracle::random_tensor({c.C, c.L}, rng)).shape() == Shape{c.C, c.T});
    CHECK(m.parameter_count() == expected_parameter_count(c));
  }
}

TEST_CASE("every layer reuses one spectral Q/K source per window") {
  ModelConfig c = small_config(Architecture::variate, Mechanism::fsatten);
  c.layers = 3;
  Model m(c);
  std::mt19937_64 rng(6);
  Tape tape;
  std::vector<std::size_t> ids;
  ForwardOptions fo;
  fo.qk_source_ids = &ids;
  (void)m.forward(tape, oracle::random_tensor({c.C, c.L}, rng), fo);
  REQUIRE(ids.size() == 3);
  CHECK(ids[0] == ids[1]);
  CHECK(ids[1] == ids[2]);
}

TEST_CASE("spectral Q/K source equals the amplitude matrix of the normalized window") {
  ModelConfig c = small_config(Architecture::variate, Mechanism::fsatten);
  Model m(c);
  std::mt19937_64 rng(7);
  const Tensor x = oracle::random_tensor({c.C, c.L}, rng, 2, 5);
  Tape tape;
  std::vector<std::size_t> ids;
  ForwardOptions fo;
  fo.qk_source_ids = &ids;
  (void)m.forward(tape, x, fo);
  CHECK(max_abs_diff(tape.value(ids[0]), amplitude_matrix(instance_normalize(x).first)) == 0.0);
}

TEST_CASE("MSS and dense arms differ by the documented parameter count") {
  for (Architecture a : {Architecture::variate, Architecture::temporal})
    for (Mechanism mech : {Mechanism::fsatten, Mechanism::soatten}) {
      if (a == Architecture::temporal && mech == Mechanism::fsatten) continue;
      ModelConfig mss = small_config(a, mech);
      ModelConfig dense = mss;
      dense.mss_enabled = false;
      const std::size_t F = mss.resolved_F(), N = mss.tokens();
      const long diff = static_cast<long>(Model(dense).parameter_count()) - static_cast<long>(Model(mss).parameter_count());
      CHECK(diff == static_cast<long>(mss.layers * 2 * mss.H * F) * (static_cast<long>(F) - static_cast<long>(N)));
    }
  ModelConfig hcc = small_config(Architecture::variate, Mechanism::soatten);
  ModelConfig no_hcc = hcc;
  no_hcc.hcc_enabled = false;
  CHECK(Model(hcc).parameter_count() - Model(no_hcc).parameter_count() ==
        hcc.layers * hcc.H * hcc.H * hcc.kernel_K * hcc.kernel_K);
}

TEST_CASE("HCC off equals a Dirac kernel bit for bit") {
  for (Architecture a : {Architecture::variate, Architecture::temporal}) {
    ModelConfig on = small_config(a, Mechanism::soatten);
    ModelConfig off = on;
    off.hcc_enabled = false;
    Model with(on), without(off);
    for (const auto& layer : with.layers()) layer.attention().hcc_kernel()->value = HccKernel::dirac(on.H, on.kernel_K).weights;
    std::mt19937_64 rng(8);
    for (int i = 0; i < 3; ++i) {
      const Tensor x = oracle::random_tensor({on.C, on.L}, rng);
      CHECK(with.forecast(x) == without.forecast(x));
    }
  }
}

TEST_CASE("model configuration is validated") {
  ModelConfig c = small_config(Architecture::temporal, Mechanism::fsatten);
  CHECK_THROWS_AS(Model{c}, ConfigError);
  c = small_config(Architecture::variate, Mechanism::conventional);
  c.D = 7;
  CHECK_THROWS_AS(Model{c}, ConfigError);
  c = small_config(Architecture::temporal, Mechanism::conventional);
  c.P = c.L + 1;
  CHECK_THROWS_AS(Model{c}, ConfigError);
  c = small_config(Architecture::variate, Mechanism::soatten);
  c.kernel_K = 4;
  CHECK_THROWS_AS(Model{c}, ConfigError);
  c = small_config(Architecture::variate, Mechanism::conventional);
  c.dropout = 1.0;
  CHECK_THROWS_AS(Model{c}, ConfigError);
  c = small_config(Architecture::variate, Mechanism::fsatten);
  c.F = 7;
  CHECK_THROWS_AS(Model{c}, ConfigError);
}

TEST_CASE("F defaults") {
  ModelConfig c;
  c.mechanism = Mechanism::fsatten;
  CHECK(c.resolved_F() == 49);
  c.mechanism = Mechanism::soatten;
  CHECK(c.resolved_F() == 32);
  c.F = 12;
  CHECK(c.resolved_F() == 12);
}

TEST_CASE("config text round trip and hash") {
  ModelConfig c = small_config(Architecture::temporal, Mechanism::soatten);
  c.dropout = 0.125;
  c.lr = 3e-4;
  c.hcc_enabled = false;
  const ModelConfig back = ModelConfig::from_text(c.to_text());
  CHECK(back == c);
  CHECK(back.hash() == c.hash());
  ModelConfig other = c;
  other.seed += 1;
  CHECK(other.hash() != c.hash());
  CHECK(ModelConfig::from_text("# comment\nmechanism = fsatten # trailing\nL=48\n").L == 48);
  CHECK_THROWS_AS(ModelConfig::from_text("L=12\nL=13\n"), ConfigError);
  CHECK_THROWS_AS(ModelConfig::from_text("nonsense=1\n"), ConfigError);
  CHECK_THROWS_AS(ModelConfig::from_text("L=abc\n"), ConfigError);
  CHECK_THROWS_AS(ModelConfig::from_text("just text\n"), ConfigError);
}

TEST_CASE("checkpoint round trip is lossless") {
  for (const ModelConfig& c : valid_small_configs()) {
    Model m(c);
    std::mt19937_64 rng(9);
    for (Parameter* p : m.parameters().all()) p->value = oracle::random_tensor(p->value.shape(), rng, -1e3, 1e3);
    std::stringstream ss;
    write_checkpoint(ss, m);
    const Model back = read_checkpoint(ss);
    CHECK(back.config() == c);
    const auto a = m.parameters().all();
    const auto b = back.parameters().all();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value == b[i]->value);
  }
  std::stringstream bad("not a checkpoint\n");
  CHECK_THROWS_AS(read_checkpoint(bad), FormatError);
  Model m(small_config(Architecture::variate, Mechanism::conventional));
  std::stringstream ss;
  write_checkpoint(ss, m);
  std::string text = ss.str();
  text.resize(text.size() / 2);
  std::stringstream truncated(text);
  CHECK_THROWS_AS(read_checkpoint(truncated), FormatError);
}

namespace {

PreparedData synthetic_data(const ModelConfig& c, std::size_t length = 400) {
  std::vector<std::vector<Tone>> tones;
  for (std::size_t i = 0; i < c.C; ++i) tones.push_back({Tone{2.0 + static_cast<double>(i % 2) * 3.0, 1.0, 0.5 * i}});
  SeriesDataset ds = synth_multisine(c.C, length, tones, 0.05, 4, c.L);
  ds.name = "synth";
  return prepare_data(ds, c);
}

ModelConfig train_config(Mechanism m) {
  ModelConfig c = small_config(Architecture::variate, m);
  c.layers = 1;
  c.epochs = 3;
  c.batch_size = 16;
  c.dropout = 0.1;
  c.lr = 3e-3;
  return c;
}

}  // namespace

TEST_CASE("training with lr = 0 leaves every parameter unchanged") {
  ModelConfig c = train_config(Mechanism::soatten);
  c.lr = 0.0;
  const PreparedData data = synthetic_data(c);
  Model m(c);
  std::vector<Tensor> before;
  for (const Parameter* p : m.parameters().all()) before.push_back(p->value);
  const TrainReport r = train(m, data);
  const auto after = m.parameters().all();
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(after[i]->value == before[i]);
  CHECK(r.test.mse == r.initial_test.mse);
  CHECK(r.test.mae == r.initial_test.mae);
}

TEST_CASE("training is bit-for-bit deterministic and improves the loss") {
  for (Mechanism mech : {Mechanism::conventional, Mechanism::fsatten, Mechanism::soatten}) {
    const ModelConfig c = train_config(mech);
    const PreparedData data = synthetic_data(c);
    Model a(c), b(c);
    const TrainReport ra = train(a, data), rb = train(b, data);
    CHECK(ra.epochs == rb.epochs);
    CHECK(ra.test.mse == rb.test.mse);
    CHECK(nlohmann::json(to_json(ra)).dump() == nlohmann::json(to_json(rb)).dump());
    REQUIRE(ra.best_epoch >= 1);
    CHECK(ra.epochs[ra.best_epoch - 1].train_loss < ra.epochs.front().train_loss + 1e-12);
    CHECK(ra.test.mse < ra.initial_test.mse);
    CHECK(ra.epochs.back().train_loss < ra.epochs.front().train_loss);
  }
}

TEST_CASE("training restores the best-validation parameters") {
  const ModelConfig c = train_config(Mechanism::conventional);
  const PreparedData data = synthetic_data(c);
  Model m(c);
  const TrainReport r = train(m, data);
  CHECK(split_loss(m, data, Split::val) == r.best_val_loss);
  for (const auto& e : r.epochs) CHECK(r.best_val_loss <= e.val_loss);
}

TEST_CASE("training rejects data that does not fit the config") {
  ModelConfig c = train_config(Mechanism::conventional);
  c.C = 2;
  std::vector<std::vector<Tone>> tones(3, {Tone{1.0, 1.0, 0.0}});
  const SeriesDataset ds = synth_multisine(3, 400, tones, 0.0, 1, c.L);
  CHECK_THROWS_AS(prepare_data(ds, c), ShapeError);
  c.C = 3;
  const SeriesDataset tiny = synth_multisine(3, 40, tones, 0.0, 1, c.L);
  CHECK_THROWS_AS(prepare_data(tiny, c), DataError);
}
