// JSON (de)serialization for the core domain structs plus the experiment
// configuration shared by all CLI subcommands. Field errors name the dotted
// path of the offending key.
#pragma once

#include <array>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bfkit/common.hpp"
#include "bfkit/dsp.hpp"
#include "bfkit/geometry.hpp"
#include "bfkit/model.hpp"
#include "bfkit/nn.hpp"
#include "bfkit/train.hpp"

namespace bfkit::config {

using json = nlohmann::json;

// Walks a dotted path ("model.geometry"); null when any hop is absent.
inline const json* find_path(const json& root, const std::string& path) {
  const json* cur = &root;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (!cur->is_object() || !cur->contains(key)) return nullptr;
    cur = &(*cur)[key];
    if (dot == std::string::npos) return cur;
    start = dot + 1;
  }
}

template <typename T>
T get_or(const json& root, const std::string& path, T fallback) {
  const json* node = find_path(root, path);
  if (node == nullptr) return fallback;
  try {
    return node->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: field '" + path + "' has the wrong type");
  }
}

template <typename T>
T get_required(const json& root, const std::string& path) {
  const json* node = find_path(root, path);
  if (node == nullptr) throw ConfigError("config: missing required field '" + path + "'");
  try {
    return node->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: field '" + path + "' has the wrong type");
  }
}

// ---------------------------------------------------------------------------
// Core struct converters
// ---------------------------------------------------------------------------

inline json to_json(const geometry::BearingGeometry& g) {
  return json{{"rolling_elements", g.rolling_element_count},
              {"element_diameter_mm", g.element_diameter_mm},
              {"pitch_diameter_mm", g.pitch_diameter_mm},
              {"contact_angle_rad", g.contact_angle_rad}};
}

inline geometry::BearingGeometry geometry_from_json(const json& j, const std::string& at) {
  try {
    geometry::BearingGeometry g;
    g.rolling_element_count = get_required<std::size_t>(j, "rolling_elements");
    g.element_diameter_mm = get_required<double>(j, "element_diameter_mm");
    g.pitch_diameter_mm = get_required<double>(j, "pitch_diameter_mm");
    g.contact_angle_rad = get_or<double>(j, "contact_angle_rad", 0.0);
    g.validate();
    return g;
  } catch (const ConfigError& e) {
    std::string inner = e.what();
    if (inner.rfind("config: ", 0) == 0) inner = inner.substr(8);
    throw ConfigError("config: '" + at + "': " + inner);
  }
}

inline json to_json(const geometry::OperatingCondition& c) {
  return json{{"shaft_speed_rpm", c.shaft_speed_rpm},
              {"load_torque_nm", c.load_torque_nm},
              {"radial_force_n", c.radial_force_n},
              {"label", c.label}};
}

inline geometry::OperatingCondition condition_from_json(const json& j) {
  geometry::OperatingCondition c;
  c.shaft_speed_rpm = get_required<double>(j, "shaft_speed_rpm");
  c.load_torque_nm = get_or<double>(j, "load_torque_nm", 0.7);
  c.radial_force_n = get_or<double>(j, "radial_force_n", 1000.0);
  c.label = get_or<std::string>(j, "label", "");
  return c;
}

inline json to_json(const dsp::BandpassSpec& b) {
  return json{{"low_hz", b.low_cut_hz}, {"high_hz", b.high_cut_hz}, {"order", b.order}};
}

inline dsp::BandpassSpec band_from_json(const json& j) {
  dsp::BandpassSpec b;
  b.low_cut_hz = get_required<double>(j, "low_hz");
  b.high_cut_hz = get_required<double>(j, "high_hz");
  b.order = get_or<int>(j, "order", 4);
  return b;
}

inline json to_json(const nn::LayerSpec& l) {
  using K = nn::LayerSpec::Kind;
  switch (l.kind) {
    case K::Conv1D:
      return json{{"kind", "conv"},
                  {"channels", l.out_channels},
                  {"kernel", l.kernel},
                  {"stride", l.stride}};
    case K::MaxPool1D:
      return json{{"kind", "pool"}, {"pool", l.pool}};
    case K::Dense:
      return json{{"kind", "dense"}, {"units", l.units}};
    case K::ReLU:
      return json{{"kind", "relu"}};
    case K::Flatten:
      return json{{"kind", "flatten"}};
    case K::Softmax:
      return json{{"kind", "softmax"}};
  }
  throw ConfigError("layer spec: unknown kind");
}

inline nn::LayerSpec layer_from_json(const json& j) {
  using K = nn::LayerSpec::Kind;
  const auto kind = get_required<std::string>(j, "kind");
  nn::LayerSpec l;
  if (kind == "conv") {
    l.kind = K::Conv1D;
    l.out_channels = get_required<std::size_t>(j, "channels");
    l.kernel = get_required<std::size_t>(j, "kernel");
    l.stride = get_or<std::size_t>(j, "stride", 1);
  } else if (kind == "pool") {
    l.kind = K::MaxPool1D;
    l.pool = get_required<std::size_t>(j, "pool");
  } else if (kind == "dense") {
    l.kind = K::Dense;
    l.units = get_required<std::size_t>(j, "units");
  } else if (kind == "relu") {
    l.kind = K::ReLU;
  } else if (kind == "flatten") {
    l.kind = K::Flatten;
  } else if (kind == "softmax") {
    l.kind = K::Softmax;
  } else {
    throw ConfigError("config: unknown layer kind '" + kind + "'");
  }
  return l;
}

inline json to_json(const model::ArchConfig& a) {
  auto stack = [](const std::vector<nn::LayerSpec>& specs) {
    json arr = json::array();
    for (const auto& s : specs) arr.push_back(to_json(s));
    return arr;
  };
  return json{{"window", a.window_len},
              {"signal_branch", stack(a.signal_branch)},
              {"physics_branch", stack(a.physics_branch)},
              {"head", stack(a.head)}};
}

inline model::ArchConfig arch_from_json(const json& j) {
  model::ArchConfig a;
  a.window_len = get_required<std::size_t>(j, "window");
  auto stack = [&](const char* key) {
    const json* node = find_path(j, key);
    if (node == nullptr || !node->is_array())
      throw ConfigError(std::string("config: architecture stack '") + key +
                        "' must be an array");
    std::vector<nn::LayerSpec> specs;
    for (const auto& item : *node) specs.push_back(layer_from_json(item));
    return specs;
  };
  a.signal_branch = stack("signal_branch");
  a.physics_branch = stack("physics_branch");
  a.head = stack("head");
  return a;
}

inline json to_json(const model::PhysicsLossConfig& p) {
  return json{{"lambda", p.lambda},
              {"threshold_percentile", p.threshold_percentile},
              {"t_bpfo", p.t_bpfo},
              {"t_bpfi", p.t_bpfi},
              {"gating", model::gating_name(p.gating)}};
}

inline model::PhysicsLossConfig physics_from_json(const json& j) {
  model::PhysicsLossConfig p;
  p.lambda = get_or<double>(j, "lambda", 1.0);
  p.threshold_percentile = get_or<double>(j, "threshold_percentile", 10.0);
  p.t_bpfo = get_or<double>(j, "t_bpfo", 0.0);
  p.t_bpfi = get_or<double>(j, "t_bpfi", 0.0);
  p.gating = model::gating_from_name(get_or<std::string>(j, "gating", "soft"));
  p.validate();
  return p;
}

inline json to_json(const train::Normalization& nz) {
  auto ch = [](const dataio::ChannelStats& c) {
    return json{{"mean", c.mean}, {"stddev", c.stddev}};
  };
  return json{{"vibration", ch(nz.stats.vibration)},
              {"current_a", ch(nz.stats.current_a)},
              {"current_b", ch(nz.stats.current_b)},
              {"max_bpfo", nz.norm.max_bpfo},
              {"max_bpfi", nz.norm.max_bpfi},
              {"t_bpfo", nz.t_bpfo},
              {"t_bpfi", nz.t_bpfi}};
}

inline train::Normalization normalization_from_json(const json& j) {
  train::Normalization nz;
  auto ch = [&](const char* key) {
    dataio::ChannelStats c;
    c.mean = get_required<double>(j, std::string(key) + ".mean");
    c.stddev = get_required<double>(j, std::string(key) + ".stddev");
    return c;
  };
  nz.stats.vibration = ch("vibration");
  nz.stats.current_a = ch("current_a");
  nz.stats.current_b = ch("current_b");
  nz.norm.max_bpfo = get_required<double>(j, "max_bpfo");
  nz.norm.max_bpfi = get_required<double>(j, "max_bpfi");
  nz.t_bpfo = get_required<double>(j, "t_bpfo");
  nz.t_bpfi = get_required<double>(j, "t_bpfi");
  return nz;
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

// One resolved configuration drives a whole run; defaults are the reference
// trainer settings. A frozen copy is written into every run directory.
struct RunConfig {
  // data
  std::string data_path;
  std::string target_path;  // finetune / zero-shot target corpus
  std::size_t window = 10000;
  std::size_t stride = 5000;
  std::array<double, 3> ratios = {0.6, 0.2, 0.2};
  // synthesis (generate)
  std::size_t per_class = 300;
  double sample_rate_hz = 64000.0;
  double carrier_hz = 4000.0;
  double snr_db = 10.0;
  double impact_decay_s = 0.002;
  double jitter_pct = 2.0;
  double mains_hz = 50.0;
  // model
  geometry::BearingGeometry geom{8, 6.75, 28.55, 0.0};
  geometry::OperatingCondition condition{1500.0, 0.7, 1000.0, "N15_M07_F10"};
  dsp::BandpassSpec band{1000.0, 10000.0, 4};
  model::PhysicsLossConfig physics;
  bool has_arch_override = false;
  model::ArchConfig arch_override;  // optional explicit stacks; else desk default
  // train
  train::TrainConfig trainer;
  // transfer
  std::string tl_strategy;
  std::string source_checkpoint;
  // eval
  double alpha = 0.05;
  std::size_t n_runs = 10;
  // grid search
  std::vector<double> grid_lambdas = {0.05, 0.20, 1.00};
  std::vector<double> grid_percentiles = {5.0, 10.0, 15.0};
  std::vector<double> grid_train_fracs = {0.8, 0.7, 0.6};
  std::size_t folds = 5;
  // bookkeeping
  std::uint64_t master_seed = 0;
  std::string out_root;

  model::ArchConfig resolve_arch() const {
    if (has_arch_override) return arch_override;
    return model::default_desk_arch(window);
  }
};

inline std::string default_out_root() {
  if (const char* env = std::getenv("BFKIT_OUT"); env != nullptr && *env != '\0')
    return env;
  return "runs";
}

inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  c.data_path = get_or<std::string>(j, "data.path", "");
  c.target_path = get_or<std::string>(j, "data.target_path", "");
  c.window = get_or<std::size_t>(j, "data.window", c.window);
  c.stride = get_or<std::size_t>(j, "data.stride", c.stride);
  if (const json* r = find_path(j, "data.ratios"); r != nullptr) {
    if (!r->is_array() || r->size() != 3)
      throw ConfigError("config: 'data.ratios' must be [train, validation, test]");
    for (std::size_t i = 0; i < 3; ++i) c.ratios[i] = (*r)[i].get<double>();
  }
  c.per_class = get_or<std::size_t>(j, "data.per_class", c.per_class);
  c.sample_rate_hz = get_or<double>(j, "data.sample_rate_hz", c.sample_rate_hz);
  c.carrier_hz = get_or<double>(j, "data.carrier_hz", c.carrier_hz);
  c.snr_db = get_or<double>(j, "data.snr_db", c.snr_db);
  c.impact_decay_s = get_or<double>(j, "data.impact_decay_s", c.impact_decay_s);
  c.jitter_pct = get_or<double>(j, "data.jitter_pct", c.jitter_pct);
  c.mains_hz = get_or<double>(j, "data.mains_hz", c.mains_hz);

  if (const json* g = find_path(j, "model.geometry"); g != nullptr)
    c.geom = geometry_from_json(*g, "model.geometry");
  if (const json* cc = find_path(j, "model.condition"); cc != nullptr)
    c.condition = condition_from_json(*cc);
  if (const json* b = find_path(j, "model.band"); b != nullptr) c.band = band_from_json(*b);
  if (const json* p = find_path(j, "model.loss"); p != nullptr)
    c.physics = physics_from_json(*p);
  if (const json* a = find_path(j, "model.arch"); a != nullptr) {
    c.arch_override = arch_from_json(*a);
    c.has_arch_override = true;
  }

  c.trainer.learning_rate = get_or<double>(j, "train.learning_rate", c.trainer.learning_rate);
  c.trainer.batch_size = get_or<std::size_t>(j, "train.batch_size", c.trainer.batch_size);
  c.trainer.patience = get_or<std::size_t>(j, "train.patience", c.trainer.patience);
  c.trainer.max_epochs = get_or<std::size_t>(j, "train.max_epochs", c.trainer.max_epochs);

  c.tl_strategy = get_or<std::string>(j, "tl.strategy", "");
  c.source_checkpoint = get_or<std::string>(j, "tl.source_checkpoint", "");

  c.alpha = get_or<double>(j, "eval.alpha", c.alpha);
  c.n_runs = get_or<std::size_t>(j, "eval.n_runs", c.n_runs);

  c.grid_lambdas = get_or<std::vector<double>>(j, "grid.lambdas", c.grid_lambdas);
  c.grid_percentiles = get_or<std::vector<double>>(j, "grid.percentiles", c.grid_percentiles);
  c.grid_train_fracs = get_or<std::vector<double>>(j, "grid.train_fracs", c.grid_train_fracs);
  c.folds = get_or<std::size_t>(j, "grid.folds", c.folds);

  c.master_seed = get_or<std::uint64_t>(j, "seed", c.master_seed);
  c.out_root = get_or<std::string>(j, "out_root", "");
  if (c.out_root.empty()) c.out_root = default_out_root();
  return c;
}

inline json to_json(const RunConfig& c) {
  json j;
  j["data"] = {{"path", c.data_path},
               {"target_path", c.target_path},
               {"window", c.window},
               {"stride", c.stride},
               {"ratios", c.ratios},
               {"per_class", c.per_class},
               {"sample_rate_hz", c.sample_rate_hz},
               {"carrier_hz", c.carrier_hz},
               {"snr_db", c.snr_db},
               {"impact_decay_s", c.impact_decay_s},
               {"jitter_pct", c.jitter_pct},
               {"mains_hz", c.mains_hz}};
  j["model"] = {{"geometry", to_json(c.geom)},
                {"condition", to_json(c.condition)},
                {"band", to_json(c.band)},
                {"loss", to_json(c.physics)}};
  if (c.has_arch_override) j["model"]["arch"] = to_json(c.arch_override);
  j["train"] = {{"learning_rate", c.trainer.learning_rate},
                {"batch_size", c.trainer.batch_size},
                {"patience", c.trainer.patience},
                {"max_epochs", c.trainer.max_epochs}};
  j["tl"] = {{"strategy", c.tl_strategy}, {"source_checkpoint", c.source_checkpoint}};
  j["eval"] = {{"alpha", c.alpha}, {"n_runs", c.n_runs}};
  j["grid"] = {{"lambdas", c.grid_lambdas},
               {"percentiles", c.grid_percentiles},
               {"train_fracs", c.grid_train_fracs},
               {"folds", c.folds}};
  j["seed"] = c.master_seed;
  j["out_root"] = c.out_root;
  return j;
}

inline json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("config: " + origin + ": " + e.what());
  }
}

inline RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json(parse_json_text(buf.str(), path));
}

}  // namespace bfkit::config
