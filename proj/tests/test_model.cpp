#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bfkit/model.hpp"

using namespace bfkit;
using model::PhysicsFeatures;
using model::PhysicsLossConfig;
using model::PenaltyGating;

namespace {

PhysicsFeatures feat(double a_o, double a_i) {
  PhysicsFeatures f;
  f.a_bpfo = a_o;
  f.a_bpfi = a_i;
  return f;
}

PhysicsLossConfig soft_cfg(double lambda, double t_o, double t_i) {
  PhysicsLossConfig cfg;
  cfg.lambda = lambda;
  cfg.t_bpfo = t_o;
  cfg.t_bpfi = t_i;
  cfg.gating = PenaltyGating::SoftProbability;
  return cfg;
}

double total_loss(const nn::Tensor& logits, const std::vector<int>& labels,
                  const std::vector<PhysicsFeatures>& feats, const PhysicsLossConfig& cfg) {
  return model::physics_informed_loss(logits, labels, feats, cfg).total;
}

}  // namespace

TEST_CASE("physics norm tracks training maxima and clamps", "[model][physics]") {
  std::vector<PhysicsFeatures> feats = {feat(0.5, 0.1), feat(2.0, 0.4), feat(1.0, 0.8),
                                        feat(9.0, 9.0)};
  // last row excluded from the training subset
  const auto norm = model::compute_physics_norm(feats, {0, 1, 2});
  CHECK(norm.max_bpfo == 2.0);
  CHECK(norm.max_bpfi == 0.8);

  PhysicsFeatures f = feat(1.0, 0.4);
  norm.apply(f);
  CHECK(f.norm_bpfo == Catch::Approx(0.5));
  CHECK(f.norm_bpfi == Catch::Approx(0.5));

  // out-of-range inference amplitude saturates at 1
  PhysicsFeatures big = feat(5.0, 2.0);
  norm.apply(big);
  CHECK(big.norm_bpfo == 1.0);
  CHECK(big.norm_bpfi == 1.0);

  CHECK_THROWS_AS(model::compute_physics_norm(feats, {}), DataError);
}

TEST_CASE("physics norm falls back to unit scale for all-zero amplitudes", "[model][physics]") {
  std::vector<PhysicsFeatures> feats = {feat(0.0, 0.0), feat(0.0, 0.0)};
  const auto norm = model::compute_physics_norm(feats, {0, 1});
  CHECK(norm.max_bpfo == 1.0);
  CHECK(norm.max_bpfi == 1.0);
  PhysicsFeatures f = feat(0.0, 0.0);
  norm.apply(f);
  CHECK(f.norm_bpfo == 0.0);
  CHECK(f.norm_bpfi == 0.0);
}

TEST_CASE("thresholds come from each fault class's own amplitudes", "[model][physics]") {
  // outer segments carry a_bpfo {1,2,3,4}; inner segments carry a_bpfi {10,20,30};
  // healthy and cross-class amplitudes are large decoys that must be ignored.
  std::vector<PhysicsFeatures> feats = {feat(1, 99), feat(2, 99), feat(3, 99), feat(4, 99),
                                        feat(99, 10), feat(99, 20), feat(99, 30), feat(99, 99)};
  const std::vector<int> labels = {2, 2, 2, 2, 1, 1, 1, 0};
  const std::vector<std::size_t> all = {0, 1, 2, 3, 4, 5, 6, 7};

  auto [t_o, t_i] = model::compute_thresholds(feats, labels, all, 50.0);
  CHECK(t_o == Catch::Approx(2.5));
  CHECK(t_i == Catch::Approx(20.0));

  auto [t_o25, t_i25] = model::compute_thresholds(feats, labels, all, 25.0);
  CHECK(t_o25 == Catch::Approx(1.75));
  CHECK(t_i25 == Catch::Approx(15.0));

  // restricting the training subset changes the population
  auto [t_o2, t_i2] = model::compute_thresholds(feats, labels, {0, 1, 4, 5}, 50.0);
  CHECK(t_o2 == Catch::Approx(1.5));
  CHECK(t_i2 == Catch::Approx(15.0));

  // a split without one fault class cannot define that threshold
  CHECK_THROWS_AS(model::compute_thresholds(feats, labels, {0, 1, 7}, 50.0), DataError);
}

TEST_CASE("hard penalty matches the case analysis over the full grid", "[model][penalty]") {
  PhysicsLossConfig cfg = soft_cfg(1.0, 2.0, 3.0);
  cfg.gating = PenaltyGating::HardArgmax;
  const double amps_o[] = {0.5, 2.0, 3.5};  // below / at / above t_bpfo
  const double amps_i[] = {1.0, 3.0, 4.0};  // below / at / above t_bpfi
  for (int pred = 0; pred < 3; ++pred) {
    for (double a_o : amps_o) {
      for (double a_i : amps_i) {
        const auto f = feat(a_o, a_i);
        double expect = 0.0;
        if (pred == 2 && a_o < cfg.t_bpfo) expect = cfg.t_bpfo - a_o;
        if (pred == 1 && a_i < cfg.t_bpfi) expect = cfg.t_bpfi - a_i;
        CAPTURE(pred, a_o, a_i);
        CHECK(model::physics_penalty(pred, f, cfg) == Catch::Approx(expect).margin(1e-15));
      }
    }
  }
}

TEST_CASE("hard gating dispatches on argmax with ties to the lowest index", "[model][penalty]") {
  PhysicsLossConfig cfg = soft_cfg(1.0, 2.0, 3.0);
  cfg.gating = PenaltyGating::HardArgmax;
  const auto weak = feat(0.5, 1.0);  // both amplitudes sub-threshold

  CHECK(model::physics_penalty({0.1, 0.2, 0.7}, weak, cfg) == Catch::Approx(1.5));
  CHECK(model::physics_penalty({0.1, 0.7, 0.2}, weak, cfg) == Catch::Approx(2.0));
  CHECK(model::physics_penalty({0.7, 0.2, 0.1}, weak, cfg) == 0.0);
  // tie between healthy and outer resolves to healthy
  CHECK(model::physics_penalty({0.4, 0.2, 0.4}, weak, cfg) == 0.0);
  // tie between inner and outer resolves to inner
  CHECK(model::physics_penalty({0.2, 0.4, 0.4}, weak, cfg) == Catch::Approx(2.0));
}

TEST_CASE("soft penalty weights both hinges by class probability", "[model][penalty]") {
  const auto cfg = soft_cfg(1.0, 1.0, 0.5);
  // outer hinge active (1.0 - 0.25), inner inactive (0.6 >= 0.5)
  CHECK(model::physics_penalty({0.2, 0.3, 0.5}, feat(0.25, 0.6), cfg) ==
        Catch::Approx(0.5 * 0.75));
  // both hinges active
  CHECK(model::physics_penalty({0.2, 0.3, 0.5}, feat(0.25, 0.1), cfg) ==
        Catch::Approx(0.5 * 0.75 + 0.3 * 0.4));
  // amplitudes above threshold silence the penalty regardless of probabilities
  CHECK(model::physics_penalty({0.0, 0.5, 0.5}, feat(2.0, 2.0), cfg) == 0.0);
}

TEST_CASE("zero lambda reduces the loss to plain cross-entropy", "[model][loss]") {
  Rng rng(404);
  nn::Tensor logits = nn::Tensor::zeros({4, 3});
  for (auto& v : logits.data) v = rng.normal();
  const std::vector<int> labels = {0, 2, 1, 2};
  const std::vector<PhysicsFeatures> feats = {feat(0.0, 0.0), feat(0.0, 0.0), feat(0.0, 0.0),
                                              feat(0.0, 0.0)};

  auto cfg = soft_cfg(0.0, 5.0, 5.0);  // thresholds huge, hinges all active
  const auto res = model::physics_informed_loss(logits, labels, feats, cfg);
  const auto ce = nn::softmax_cross_entropy(logits, labels);
  CHECK(res.total == Catch::Approx(ce.loss).epsilon(1e-12));
  CHECK(res.cross_entropy == Catch::Approx(ce.loss).epsilon(1e-12));
  REQUIRE(res.grad.data.size() == ce.grad.data.size());
  for (std::size_t i = 0; i < ce.grad.data.size(); ++i)
    CHECK(res.grad.data[i] == Catch::Approx(ce.grad.data[i]).margin(1e-15));
}

TEST_CASE("total loss grows monotonically with lambda when penalties are active",
          "[model][loss]") {
  nn::Tensor logits{{2, 3}, {0.2, 1.4, 0.9, -0.3, 0.1, 1.1}};
  const std::vector<int> labels = {1, 2};
  const std::vector<PhysicsFeatures> feats = {feat(0.1, 0.2), feat(0.05, 0.3)};
  double prev = -1.0;
  for (double lambda : {0.0, 0.5, 1.0, 2.0}) {
    const auto res =
        model::physics_informed_loss(logits, labels, feats, soft_cfg(lambda, 1.0, 1.0));
    CHECK(res.penalty_mean > 0.0);
    CHECK(res.total == Catch::Approx(res.cross_entropy + lambda * res.penalty_mean));
    if (prev >= 0.0) CHECK(res.total > prev);
    prev = res.total;
  }
}

TEST_CASE("soft loss gradient matches central differences", "[model][loss][gradcheck]") {
  Rng rng(771);
  nn::Tensor logits = nn::Tensor::zeros({3, 3});
  for (auto& v : logits.data) v = 0.8 * rng.normal();
  const std::vector<int> labels = {2, 0, 1};
  // mixed hinge states: both active / one active / none active
  const std::vector<PhysicsFeatures> feats = {feat(0.2, 0.1), feat(0.9, 0.05), feat(3.0, 2.0)};
  const auto cfg = soft_cfg(0.7, 1.0, 0.8);

  const auto res = model::physics_informed_loss(logits, labels, feats, cfg);
  const double h = 1e-6;
  for (std::size_t i = 0; i < logits.data.size(); ++i) {
    nn::Tensor plus = logits, minus = logits;
    plus.data[i] += h;
    minus.data[i] -= h;
    const double fd =
        (total_loss(plus, labels, feats, cfg) - total_loss(minus, labels, feats, cfg)) / (2 * h);
    CAPTURE(i);
    CHECK(res.grad.data[i] == Catch::Approx(fd).margin(1e-7).epsilon(1e-5));
  }
}

TEST_CASE("hard gating contributes loss value but no gradient", "[model][loss]") {
  nn::Tensor logits{{2, 3}, {0.1, 0.9, 1.4, 1.2, -0.2, 0.3}};
  const std::vector<int> labels = {2, 0};
  const std::vector<PhysicsFeatures> feats = {feat(0.1, 0.1), feat(0.1, 0.1)};
  auto cfg = soft_cfg(2.0, 1.0, 1.0);
  cfg.gating = PenaltyGating::HardArgmax;

  const auto res = model::physics_informed_loss(logits, labels, feats, cfg);
  const auto ce = nn::softmax_cross_entropy(logits, labels);
  CHECK(res.total > ce.loss);  // sample 0 predicts outer with weak amplitude
  for (std::size_t i = 0; i < ce.grad.data.size(); ++i)
    CHECK(res.grad.data[i] == ce.grad.data[i]);
}

TEST_CASE("loss validates shapes and config", "[model][loss]") {
  nn::Tensor logits{{2, 3}, {0, 0, 0, 0, 0, 0}};
  const std::vector<int> labels = {0, 1};
  CHECK_THROWS_AS(
      model::physics_informed_loss(logits, labels, {feat(0, 0)}, soft_cfg(1, 1, 1)),
      ShapeError);
  CHECK_THROWS_AS(model::physics_informed_loss(logits, labels, {feat(0, 0), feat(0, 0)},
                                               soft_cfg(-1, 1, 1)),
                  ConfigError);
  auto bad_pct = soft_cfg(1, 1, 1);
  bad_pct.threshold_percentile = 100.0;
  CHECK_THROWS_AS(model::physics_informed_loss(logits, labels, {feat(0, 0), feat(0, 0)}, bad_pct),
                  ConfigError);
}

TEST_CASE("gating names round-trip", "[model][config]") {
  CHECK(model::gating_from_name("hard") == PenaltyGating::HardArgmax);
  CHECK(model::gating_from_name("soft") == PenaltyGating::SoftProbability);
  CHECK(std::string(model::gating_name(PenaltyGating::HardArgmax)) == "hard");
  CHECK(std::string(model::gating_name(PenaltyGating::SoftProbability)) == "soft");
  CHECK_THROWS_AS(model::gating_from_name("argmax"), ConfigError);
}

TEST_CASE("characteristic amplitudes separate fault classes on synthesized data",
          "[model][physics][slow]") {
  geometry::BearingGeometry geom{8, 6.75, 28.55, 0.0};
  geometry::OperatingCondition cond{1500.0, 0.7, 1000.0, "N15_M07_F10"};
  dsp::BandpassSpec band{1500.0, 3500.0, 4};

  dataio::SynthesisSpec spec;
  spec.geom = geom;
  spec.condition = cond;
  spec.sample_rate_hz = 8192.0;
  spec.carrier_hz = 2500.0;
  spec.snr_db = 10.0;

  const std::size_t window = 8192;
  const std::size_t n = 8;
  auto run = [&](dataio::FaultLabel label, std::uint64_t seed) {
    spec.fault_class = label;
    spec.seed = seed;
    std::vector<PhysicsFeatures> out;
    for (const auto& seg : dataio::synthesize(spec, n, window))
      out.push_back(model::extract_physics_features(seg, geom, cond, band));
    return out;
  };

  const auto healthy = run(dataio::FaultLabel::Healthy, 31);
  const auto inner = run(dataio::FaultLabel::InnerFault, 32);
  const auto outer = run(dataio::FaultLabel::OuterFault, 33);

  std::size_t outer_ok = 0, inner_ok = 0;
  for (const auto& f : outer)
    if (f.a_bpfo > f.a_bpfi) ++outer_ok;
  for (const auto& f : inner)
    if (f.a_bpfi > f.a_bpfo) ++inner_ok;
  CHECK(outer_ok >= n - 1);
  CHECK(inner_ok >= n - 1);

  // fault-class own-frequency amplitudes dominate the healthy noise floor
  double mean_healthy_o = 0, mean_outer_o = 0, mean_healthy_i = 0, mean_inner_i = 0;
  for (const auto& f : healthy) {
    mean_healthy_o += f.a_bpfo / static_cast<double>(n);
    mean_healthy_i += f.a_bpfi / static_cast<double>(n);
  }
  for (const auto& f : outer) mean_outer_o += f.a_bpfo / static_cast<double>(n);
  for (const auto& f : inner) mean_inner_i += f.a_bpfi / static_cast<double>(n);
  CHECK(mean_outer_o > 3.0 * mean_healthy_o);
  CHECK(mean_inner_i > 3.0 * mean_healthy_i);
}

TEST_CASE("all-zero vibration yields zero characteristic amplitudes", "[model][physics]") {
  geometry::BearingGeometry geom{8, 6.75, 28.55, 0.0};
  geometry::OperatingCondition cond{1500.0, 0.7, 1000.0, "idle"};
  dataio::SignalSegment seg;
  seg.vibration.assign(1024, 0.0f);
  seg.current_a.assign(1024, 0.0f);
  seg.current_b.assign(1024, 0.0f);
  seg.label = dataio::FaultLabel::Healthy;
  seg.condition = cond;
  seg.sample_rate_hz = 8192.0;
  const auto f = model::extract_physics_features(seg, geom, cond, {1500.0, 3500.0, 4});
  CHECK(f.a_bpfo == 0.0);
  CHECK(f.a_bpfi == 0.0);
}

TEST_CASE("canonical architecture string is stable and hash-sensitive", "[model][arch]") {
  const auto a = model::default_desk_arch(2048);
  CHECK(model::canonical_arch_string(a) ==
        "window=2048;"
        "signal=conv(c=8,k=16,s=2),relu,pool(4),conv(c=16,k=8,s=1),relu,pool(4),flatten,"
        "dense(32),relu;"
        "physics=dense(8),relu;"
        "head=dense(64),relu,dense(3)");
  CHECK(model::arch_hash(a) == fnv1a64(model::canonical_arch_string(a)));

  auto b = a;
  CHECK(model::arch_hash(b) == model::arch_hash(a));
  b.window_len = 4096;
  CHECK(model::arch_hash(b) != model::arch_hash(a));
  auto c = a;
  c.head.back().units = 3;  // unchanged value, same hash
  CHECK(model::arch_hash(c) == model::arch_hash(a));
  c.signal_branch[0].kernel = 15;
  CHECK(model::arch_hash(c) != model::arch_hash(a));
}

TEST_CASE("network binds branches in fixed order with expected names", "[model][net]") {
  model::MultimodalNet net(model::default_desk_arch(512), 99);
  auto& store = net.params();
  for (const char* name :
       {"current_a.0.conv.w", "current_a.3.conv.b", "current_a.7.dense.w",
        "current_b.0.conv.w", "vibration.7.dense.b", "physics.0.dense.w", "head.0.dense.w",
        "head.2.dense.b"}) {
    CAPTURE(name);
    CHECK(store.contains(name));
  }
  CHECK(net.fusion_width() == 3 * 32 + 8);

  // head output width is pinned to the number of classes
  auto bad = model::default_desk_arch(512);
  bad.head.back().units = 4;
  CHECK_THROWS_AS(model::MultimodalNet(bad, 99), ConfigError);

  auto unflat = model::default_desk_arch(512);
  unflat.signal_branch = {bad.signal_branch[0]};  // conv output is rank 2
  CHECK_THROWS_AS(model::MultimodalNet(unflat, 99), ConfigError);
}

TEST_CASE("same init seed gives identical parameters and logits", "[model][net]") {
  const auto arch = model::default_desk_arch(256);
  model::MultimodalNet n1(arch, 1234), n2(arch, 1234), n3(arch, 1235);

  bool all_equal = true, any_differs = false;
  for (const auto& [name, p] : n1.params()) {
    const auto& q = n2.params().at(name);
    const auto& r = n3.params().at(name);
    for (std::size_t i = 0; i < p.value.data.size(); ++i) {
      if (p.value.data[i] != q.value.data[i]) all_equal = false;
      if (p.value.data[i] != r.value.data[i]) any_differs = true;
    }
  }
  CHECK(all_equal);
  CHECK(any_differs);

  dataio::SignalSegment seg;
  seg.vibration.assign(256, 0.0f);
  seg.current_a.assign(256, 0.0f);
  seg.current_b.assign(256, 0.0f);
  Rng rng(5);
  for (std::size_t i = 0; i < 256; ++i) {
    seg.vibration[i] = static_cast<float>(rng.normal());
    seg.current_a[i] = static_cast<float>(rng.normal());
    seg.current_b[i] = static_cast<float>(rng.normal());
  }
  seg.label = dataio::FaultLabel::Healthy;
  seg.condition.label = "x";
  seg.sample_rate_hz = 8192.0;
  PhysicsFeatures f = feat(0.4, 0.2);
  f.norm_bpfo = 0.4;
  f.norm_bpfi = 0.2;

  const auto in = model::MultimodalNet::make_input(seg, f);
  const auto l1 = n1.forward_logits(in);
  const auto l2 = n2.forward_logits(in);
  REQUIRE(l1.shape == std::vector<std::size_t>{3});
  CHECK(l1.data == l2.data);

  const auto probs = n1.forward_probs(in);
  double sum = 0.0;
  for (double p : probs) {
    CHECK(p > 0.0);
    sum += p;
  }
  CHECK(sum == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("make_input lays out channels and physics features", "[model][net]") {
  dataio::SignalSegment seg;
  seg.vibration = {1.0f, 2.0f, 3.0f, 4.0f};
  seg.current_a = {5.0f, 6.0f, 7.0f, 8.0f};
  seg.current_b = {9.0f, 10.0f, 11.0f, 12.0f};
  seg.label = dataio::FaultLabel::InnerFault;
  seg.condition.label = "x";
  seg.sample_rate_hz = 100.0;
  PhysicsFeatures f;
  f.norm_bpfo = 0.25;
  f.norm_bpfi = 0.75;

  const auto in = model::MultimodalNet::make_input(seg, f);
  CHECK(in.current_a.shape == std::vector<std::size_t>{1, 4});
  CHECK(in.vibration.data == std::vector<double>{1, 2, 3, 4});
  CHECK(in.current_a.data == std::vector<double>{5, 6, 7, 8});
  CHECK(in.current_b.data == std::vector<double>{9, 10, 11, 12});
  CHECK(in.physics.shape == std::vector<std::size_t>{2});
  CHECK(in.physics.data == std::vector<double>{0.25, 0.75});
}

namespace {

// Tiny end-to-end architecture for finite-difference checking.
model::ArchConfig tiny_arch() {
  using K = nn::LayerSpec::Kind;
  model::ArchConfig a;
  a.window_len = 12;
  nn::LayerSpec conv;
  conv.kind = K::Conv1D;
  conv.out_channels = 2;
  conv.kernel = 3;
  conv.stride = 2;
  nn::LayerSpec relu;
  nn::LayerSpec flat;
  flat.kind = K::Flatten;
  nn::LayerSpec d3;
  d3.kind = K::Dense;
  d3.units = 3;
  a.signal_branch = {conv, relu, flat};
  a.physics_branch = {d3, relu};
  a.head = {d3};
  return a;
}

model::MultimodalNet::Input random_input(std::size_t window, std::uint64_t seed) {
  dataio::SignalSegment seg;
  seg.vibration.resize(window);
  seg.current_a.resize(window);
  seg.current_b.resize(window);
  Rng rng(seed);
  for (std::size_t i = 0; i < window; ++i) {
    seg.vibration[i] = static_cast<float>(rng.normal());
    seg.current_a[i] = static_cast<float>(rng.normal());
    seg.current_b[i] = static_cast<float>(rng.normal());
  }
  seg.label = dataio::FaultLabel::Healthy;
  seg.condition.label = "x";
  seg.sample_rate_hz = 100.0;
  PhysicsFeatures f;
  f.norm_bpfo = rng.uniform();
  f.norm_bpfi = rng.uniform();
  return model::MultimodalNet::make_input(seg, f);
}

}  // namespace

TEST_CASE("whole-network parameter gradients match central differences",
          "[model][net][gradcheck]") {
  model::MultimodalNet net(tiny_arch(), 2024);
  const auto in = random_input(12, 77);
  const std::vector<int> labels = {1};
  const std::vector<PhysicsFeatures> feats = {feat(0.2, 0.1)};
  const auto cfg = soft_cfg(0.9, 1.0, 0.7);

  auto loss_now = [&]() {
    auto logits = net.forward_logits(in);
    logits.shape = {1, 3};
    return model::physics_informed_loss(logits, labels, feats, cfg);
  };

  net.params().zero_grads();
  auto res = loss_now();
  auto g = res.grad;
  g.shape = {3};
  net.backward(g);

  const double h = 1e-6;
  for (auto& [name, p] : net.params()) {
    for (std::size_t i = 0; i < p.value.data.size(); ++i) {
      const double keep = p.value.data[i];
      p.value.data[i] = keep + h;
      const double up = loss_now().total;
      p.value.data[i] = keep - h;
      const double dn = loss_now().total;
      p.value.data[i] = keep;
      const double fd = (up - dn) / (2 * h);
      CAPTURE(name, i);
      CHECK(p.grad.data[i] == Catch::Approx(fd).margin(1e-6).epsilon(1e-4));
    }
  }
}

TEST_CASE("embedding equals the fused activation of the last forward pass", "[model][net]") {
  model::MultimodalNet net(tiny_arch(), 11);
  const auto in = random_input(12, 5);

  const auto emb = net.embed(in);
  // conv: (12-3)/2+1 = 5 frames x 2 channels = 10 per signal branch, physics dense 3
  REQUIRE(emb.size() == 3 * 10 + 3);
  CHECK(emb.size() == net.fusion_width());
  CHECK(emb == net.fused_vector().data);

  net.forward_logits(in);
  CHECK(net.fused_vector().data == emb);
}

TEST_CASE("embedding export writes one labeled row per segment", "[model][net]") {
  model::MultimodalNet net(tiny_arch(), 17);
  std::vector<model::MultimodalNet::Input> inputs = {random_input(12, 1), random_input(12, 2)};
  const std::vector<int> labels = {0, 2};
  const std::vector<std::string> conditions = {"N15_M07_F10", "N09_M07_F10"};
  const std::vector<std::size_t> ids = {4, 9};
  const std::string path = "test_embeddings.csv";

  model::export_embeddings(net, inputs, labels, conditions, ids, path);

  std::ifstream infile(path);
  REQUIRE(infile.good());
  std::string header;
  std::getline(infile, header);
  std::ostringstream want;
  want << "segment_id,label,condition";
  for (std::size_t d = 0; d < net.fusion_width(); ++d) want << ",e" << d;
  CHECK(header == want.str());

  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(infile, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  REQUIRE(rows.size() == 2);
  REQUIRE(rows[0].size() == 3 + net.fusion_width());
  CHECK(rows[0][0] == "4");
  CHECK(rows[0][1] == "Healthy");
  CHECK(rows[0][2] == "N15_M07_F10");
  CHECK(rows[1][0] == "9");
  CHECK(rows[1][1] == "OuterFault");
  CHECK(rows[1][2] == "N09_M07_F10");

  const auto emb0 = net.embed(inputs[0]);
  for (std::size_t d = 0; d < emb0.size(); ++d)
    CHECK(std::stod(rows[0][3 + d]) == Catch::Approx(emb0[d]).epsilon(1e-8).margin(1e-12));

  CHECK_THROWS_AS(model::export_embeddings(net, inputs, {0}, conditions, ids, path), ShapeError);
  std::remove(path.c_str());
}
