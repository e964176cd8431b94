// Transfer-learning strategies as freeze-mask policies over the parameter
// store, plus the fine-tuning and zero-shot drivers.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "bfkit/bundle.hpp"
#include "bfkit/common.hpp"
#include "bfkit/model.hpp"
#include "bfkit/nn.hpp"
#include "bfkit/train.hpp"

namespace bfkit::transfer {

// tsft: freeze all conv stages, tune every dense layer.
// las:  freeze only the first conv(+pool) stage of each branch, tune the rest.
// hfr:  freeze everything outside the head, re-initialize the head.
enum class TlStrategy { TSFT, LAS, HFR };

inline const char* strategy_name(TlStrategy s) {
  switch (s) {
    case TlStrategy::TSFT: return "tsft";
    case TlStrategy::LAS: return "las";
    case TlStrategy::HFR: return "hfr";
  }
  return "?";
}

inline TlStrategy strategy_from_name(const std::string& s) {
  if (s == "tsft") return TlStrategy::TSFT;
  if (s == "las") return TlStrategy::LAS;
  if (s == "hfr") return TlStrategy::HFR;
  throw ConfigError("unknown transfer strategy '" + s + "' (want tsft|las|hfr)");
}

// Every tensor appears exactly once; realized scalar counts are kept for
// reporting.
struct FreezePlan {
  TlStrategy strategy = TlStrategy::TSFT;
  std::map<std::string, bool> trainable;
  std::size_t trainable_scalars = 0;
  std::size_t frozen_scalars = 0;

  bool reinit_head() const { return strategy == TlStrategy::HFR; }
};

namespace detail {

// "current_a.0.conv.w" -> ("current_a", 0, "conv.w")
struct ParsedName {
  std::string branch;
  std::size_t layer = 0;
  std::string rest;
};

inline ParsedName parse_param_name(const std::string& name) {
  const auto d1 = name.find('.');
  const auto d2 = name.find('.', d1 + 1);
  if (d1 == std::string::npos || d2 == std::string::npos)
    throw StateError("freeze plan: unrecognized parameter name '" + name + "'");
  ParsedName p;
  p.branch = name.substr(0, d1);
  p.layer = std::stoul(name.substr(d1 + 1, d2 - d1 - 1));
  p.rest = name.substr(d2 + 1);
  return p;
}

}  // namespace detail

inline FreezePlan build_freeze_plan(const nn::ParamStore& store, TlStrategy strategy) {
  // first conv stage per branch, for las
  std::map<std::string, std::size_t> first_conv;
  for (const auto& [name, entry] : store) {
    const auto p = detail::parse_param_name(name);
    if (p.rest.rfind("conv.", 0) == 0) {
      auto it = first_conv.find(p.branch);
      if (it == first_conv.end() || p.layer < it->second) first_conv[p.branch] = p.layer;
    }
  }

  FreezePlan plan;
  plan.strategy = strategy;
  for (const auto& [name, entry] : store) {
    const auto p = detail::parse_param_name(name);
    bool trainable = false;
    switch (strategy) {
      case TlStrategy::TSFT:
        trainable = p.rest.rfind("dense.", 0) == 0;
        break;
      case TlStrategy::LAS: {
        const auto it = first_conv.find(p.branch);
        const bool in_first_conv = it != first_conv.end() &&
                                   p.rest.rfind("conv.", 0) == 0 && p.layer == it->second;
        trainable = !in_first_conv;
        break;
      }
      case TlStrategy::HFR:
        trainable = p.branch == "head";
        break;
    }
    plan.trainable[name] = trainable;
    (trainable ? plan.trainable_scalars : plan.frozen_scalars) += entry.value.size();
  }
  return plan;
}

inline void apply_freeze_plan(nn::ParamStore& store, const FreezePlan& plan) {
  if (plan.trainable.size() != store.names().size())
    throw StateError("freeze plan does not cover the parameter store");
  for (auto& [name, entry] : store) {
    const auto it = plan.trainable.find(name);
    if (it == plan.trainable.end())
      throw StateError("freeze plan misses tensor '" + name + "'");
    entry.trainable = it->second;
  }
}

// Xavier re-draw for head weight tensors, zeros for head biases; moments of
// the re-initialized tensors are cleared. Deterministic in the seed via the
// store's sorted iteration order.
inline void reinit_head(nn::ParamStore& store, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& [name, entry] : store) {
    if (name.rfind("head.", 0) != 0) continue;
    const bool is_weight = name.size() >= 2 && name.compare(name.size() - 2, 2, ".w") == 0;
    if (is_weight)
      entry.value = nn::xavier_init(entry.value.shape, rng);
    else
      std::fill(entry.value.data.begin(), entry.value.data.end(), 0.0);
    std::fill(entry.m.data.begin(), entry.m.data.end(), 0.0);
    std::fill(entry.v.data.begin(), entry.v.data.end(), 0.0);
  }
}

// Source optimizer state is always discarded before fine-tuning.
inline void reset_optimizer_state(nn::ParamStore& store) {
  for (auto& [name, entry] : store) {
    std::fill(entry.m.data.begin(), entry.m.data.end(), 0.0);
    std::fill(entry.v.data.begin(), entry.v.data.end(), 0.0);
  }
  store.set_step(0);
}

struct FinetuneResult {
  FreezePlan plan;
  train::TrainResult training;
  train::EvalResult test_eval;
};

// Adapts the bundled model in place on target-domain splits. The caller
// prepares the datasets (and cfg.physics thresholds) against target-domain
// normalization; the strategy decides which tensors may move.
inline FinetuneResult finetune(bundle::ModelBundle& b, const train::Dataset& target_train,
                               const train::Dataset& target_val,
                               const train::Dataset& target_test, TlStrategy strategy,
                               const train::TrainConfig& cfg) {
  FinetuneResult r;
  r.plan = build_freeze_plan(b.net.params(), strategy);
  apply_freeze_plan(b.net.params(), r.plan);
  reset_optimizer_state(b.net.params());
  if (r.plan.reinit_head())
    reinit_head(b.net.params(), derive_seed(cfg.seed, 0x48656164ULL));
  r.training = train::fit(b.net, target_train, target_val, cfg);
  r.test_eval = train::evaluate(b.net, target_test, cfg.physics);
  return r;
}

// No parameter updates; dataset must be built with the source bundle's own
// normalization for the evaluation to be meaningful.
inline train::EvalResult zero_shot_eval(bundle::ModelBundle& b, const train::Dataset& ds) {
  return train::evaluate(b.net, ds, b.physics);
}

}  // namespace bfkit::transfer
