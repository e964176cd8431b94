// bfkit: command-line front end. One subcommand per pipeline stage; every run
// writes <out>/<run-id>/ with config.frozen, report.json and report.txt.
#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <bfkit/bundle.hpp>
#include <bfkit/common.hpp>
#include <bfkit/config.hpp>
#include <bfkit/dataio.hpp>
#include <bfkit/grid.hpp>
#include <bfkit/pipeline.hpp>
#include <bfkit/stats.hpp>
#include <bfkit/transfer.hpp>

namespace fs = std::filesystem;
using namespace bfkit;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_root;
  std::string run_id;
  bool force = false;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* sub, CommonOpts& c) {
  sub->add_option("--config", c.config_path, "configuration file (JSON)");
  sub->add_option("--out", c.out_root, "output root (default: $BFKIT_OUT or ./runs)");
  sub->add_option("--run-id", c.run_id, "run directory name (default: <cmd>-<utc time>)");
  sub->add_flag("--force", c.force, "allow writing into an existing run directory");
  sub->add_option("--seed", c.seed, "master seed override");
}

std::string default_run_id(const std::string& cmd) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
  return cmd + "-" + buf;
}

// File config (when given) over built-in defaults; flags win over both.
config::RunConfig resolve_config(const CLI::App* sub, const CommonOpts& c) {
  config::RunConfig cfg = c.config_path.empty()
                              ? config::config_from_json(config::json::object())
                              : config::load_config_file(c.config_path);
  if (sub->count("--seed")) cfg.master_seed = c.seed;
  if (!c.out_root.empty()) cfg.out_root = c.out_root;
  return cfg;
}

// Creates the run directory and freezes the fully resolved config into it.
fs::path open_run_dir(const std::string& cmd, const CommonOpts& c,
                      const config::RunConfig& cfg) {
  const std::string run_id = c.run_id.empty() ? default_run_id(cmd) : c.run_id;
  const auto dir = pipeline::make_run_dir(cfg.out_root, run_id, c.force);
  pipeline::write_frozen_config(dir, cfg);
  return dir;
}

config::json base_report(const std::string& cmd, const config::RunConfig& cfg) {
  config::json j;
  j["command"] = cmd;
  j["seed"] = cfg.master_seed;
  return j;
}

void finish(const fs::path& dir, const config::json& j, const std::string& txt) {
  pipeline::write_reports(dir, j, txt);
  std::cout << txt;
  std::cout << "run directory: " << dir.string() << "\n";
}

// Accuracy-per-line file for hypothesis tests; '#' starts a comment.
std::vector<double> read_value_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open value file: " + path);
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream is(line);
    double v = 0.0;
    while (is >> v) values.push_back(v);
  }
  if (values.empty()) throw DataError("no numeric values in: " + path);
  return values;
}

// Target corpus for transfer commands: explicit target path, else the data
// path, else synthesis from the config's operating condition.
std::vector<dataio::SignalSegment> target_corpus(const config::RunConfig& cfg) {
  const std::string& path = !cfg.target_path.empty() ? cfg.target_path : cfg.data_path;
  return pipeline::acquire_corpus(cfg, path);
}

std::string require_checkpoint(const config::RunConfig& cfg, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (!cfg.source_checkpoint.empty()) return cfg.source_checkpoint;
  throw ConfigError("a source checkpoint is required (--checkpoint or tl.source_checkpoint)");
}

// ---------------------------------------------------------------------------
// Subcommand bodies. Config is fully resolved by the caller.
// ---------------------------------------------------------------------------

int cmd_generate(const config::RunConfig& cfg, const CommonOpts& c) {
  const auto dir = open_run_dir("generate", c, cfg);

  const auto corpus = pipeline::synthesize_corpus(cfg);
  dataio::write_segments(corpus, (dir / "segments.bseg").string());

  config::json counts;
  for (int l = 0; l < dataio::kNumClasses; ++l) {
    std::size_t n = 0;
    for (const auto& seg : corpus)
      if (static_cast<int>(seg.label) == l) ++n;
    counts[dataio::label_name(static_cast<dataio::FaultLabel>(l))] = n;
  }
  config::json manifest;
  manifest["path"] = "segments.bseg";
  manifest["classes"] = counts;
  manifest["segments"] = corpus.size();
  manifest["window"] = cfg.window;
  manifest["sample_rate_hz"] = cfg.sample_rate_hz;
  manifest["condition"] = cfg.condition.label;
  manifest["seed"] = cfg.master_seed;
  pipeline::write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");

  auto j = base_report("generate", cfg);
  j["manifest"] = manifest;
  std::ostringstream txt;
  txt << "wrote " << corpus.size() << " segments (" << cfg.per_class << " per class), window "
      << cfg.window << " @ " << cfg.sample_rate_hz << " Hz\n";
  finish(dir, j, txt.str());
  return 0;
}

int cmd_train(const config::RunConfig& cfg, const CommonOpts& c, const std::string& resume) {
  const auto dir = open_run_dir("train", c, cfg);

  const auto out = pipeline::run_training(cfg, resume);
  bundle::save_bundle((dir / "model.ckpt").string(), out.bundle);
  pipeline::write_training_curve_csv(dir / "training_curve.csv", out.training);

  auto j = base_report("train", cfg);
  j["resumed_from"] = resume;
  j["arch_hash"] = model::arch_hash(out.bundle.arch);
  j["splits"] = {{"train", out.train_n}, {"validation", out.val_n}, {"test", out.test_n}};
  j["training"] = pipeline::training_json(out.training);
  j["loss"] = config::to_json(out.bundle.physics);
  j["test"] = pipeline::test_report_json(out.test);

  std::ostringstream txt;
  txt << "trained " << out.training.epochs_run << " epochs (best " << out.training.best_epoch
      << ", val loss " << pipeline::format_double(out.training.best_val_loss, 6) << ")\n"
      << pipeline::test_report_text(out.test);
  finish(dir, j, txt.str());
  return 0;
}

int cmd_zero_shot(const config::RunConfig& cfg, const CommonOpts& c, const std::string& ckpt) {
  const auto dir = open_run_dir("zero-shot", c, cfg);

  auto b = bundle::load_bundle(ckpt);
  const auto segments = target_corpus(cfg);
  // source-domain statistics and thresholds applied unchanged to the target
  const auto data = pipeline::prepare_data_with(cfg, segments, b.nz);
  const auto rep = pipeline::report_on(b.net, data.test_set, b.physics);

  auto j = base_report("zero-shot", cfg);
  j["checkpoint"] = ckpt;
  j["test"] = pipeline::test_report_json(rep);
  std::ostringstream txt;
  txt << "zero-shot evaluation of " << ckpt << " on " << data.test_set.size()
      << " target segments\n"
      << pipeline::test_report_text(rep);
  finish(dir, j, txt.str());
  return 0;
}

int cmd_finetune(const config::RunConfig& cfg, const CommonOpts& c, const std::string& ckpt,
                 const std::string& strategy_name) {
  if (strategy_name.empty())
    throw ConfigError("a strategy is required (--strategy or tl.strategy)");
  const auto strategy = transfer::strategy_from_name(strategy_name);
  const auto dir = open_run_dir("finetune", c, cfg);

  auto b = bundle::load_bundle(ckpt);
  const auto segments = target_corpus(cfg);

  // the source model dictates the loss; thresholds refit on the target train
  // split at the bundled percentile
  auto data_cfg = cfg;
  data_cfg.physics = b.physics;
  const auto data = pipeline::prepare_data(data_cfg, segments);
  model::PhysicsLossConfig physics = b.physics;
  physics.t_bpfo = data.nz.t_bpfo;
  physics.t_bpfi = data.nz.t_bpfi;

  train::TrainConfig tcfg = cfg.trainer;
  tcfg.seed = derive_seed(cfg.master_seed, pipeline::kSaltShuffle);
  tcfg.physics = physics;

  auto res = transfer::finetune(b, data.train_set, data.val_set, data.test_set, strategy, tcfg);
  b.nz = data.nz;
  b.physics = physics;
  bundle::save_bundle((dir / "model.ckpt").string(), b);
  pipeline::write_training_curve_csv(dir / "training_curve.csv", res.training);

  pipeline::TestReport rep{std::move(res.test_eval), {}, {}};
  rep.metrics = eval::compute_metrics(rep.eval.confusion);
  rep.auc = eval::roc_auc(rep.eval.probabilities, rep.eval.labels);

  auto j = base_report("finetune", cfg);
  j["checkpoint"] = ckpt;
  j["strategy"] = transfer::strategy_name(strategy);
  j["trainable_scalars"] = res.plan.trainable_scalars;
  j["frozen_scalars"] = res.plan.frozen_scalars;
  j["training"] = pipeline::training_json(res.training);
  j["loss"] = config::to_json(physics);
  j["test"] = pipeline::test_report_json(rep);

  std::ostringstream txt;
  txt << "finetuned (" << transfer::strategy_name(strategy) << ") from " << ckpt << ": "
      << res.plan.trainable_scalars << " trainable / " << res.plan.frozen_scalars
      << " frozen scalars, " << res.training.epochs_run << " epochs\n"
      << pipeline::test_report_text(rep);
  finish(dir, j, txt.str());
  return 0;
}

int cmd_gridsearch(const config::RunConfig& cfg, const CommonOpts& c, std::size_t jobs) {
  const auto dir = open_run_dir("gridsearch", c, cfg);

  const auto segments = pipeline::acquire_corpus(cfg, cfg.data_path);
  const auto rows = grid::ranked(grid::grid_search(cfg, segments, jobs));
  pipeline::write_text_file(dir / "grid_results.csv", grid::grid_csv(rows));

  std::size_t failed = 0;
  for (const auto& r : rows)
    if (!r.ok) ++failed;

  auto j = base_report("gridsearch", cfg);
  j["cells"] = rows.size();
  j["failed"] = failed;
  j["jobs"] = jobs;
  config::json jrows = config::json::array();
  for (const auto& r : rows) {
    config::json row;
    row["split"] = r.train_frac;
    row["lambda"] = r.lambda;
    row["threshold_pct"] = r.threshold_pct;
    row["ok"] = r.ok;
    if (r.ok) {
      row["fold"] = r.best_fold;
      row["val_acc"] = r.val_acc;
      row["test_acc"] = r.test_acc;
      row["test_f1"] = r.test_f1;
      row["auc"] = {{"healthy", r.auc[0]}, {"inner", r.auc[1]}, {"outer", r.auc[2]}};
    } else {
      row["error"] = r.error;
    }
    row["wall_s"] = r.wall_s;
    jrows.push_back(row);
  }
  j["rows"] = jrows;

  std::ostringstream txt;
  txt << rows.size() << " grid cells (" << failed << " failed), ranked by test accuracy\n";
  txt << "split  lambda  pct  fold  val_acc  test_acc  test_f1\n";
  for (const auto& r : rows) {
    if (!r.ok) {
      txt << pipeline::format_double(r.train_frac, 2) << "   cell failed: " << r.error << "\n";
      continue;
    }
    txt << pipeline::format_double(r.train_frac, 2) << "   "
        << pipeline::format_double(r.lambda, 2) << "   "
        << pipeline::format_double(r.threshold_pct, 0) << "   " << r.best_fold << "     "
        << pipeline::format_double(r.val_acc, 3) << "    "
        << pipeline::format_double(r.test_acc, 3) << "     "
        << pipeline::format_double(r.test_f1, 3) << "\n";
  }
  finish(dir, j, txt.str());
  return 0;
}

int cmd_ttest(const config::RunConfig& cfg, const CommonOpts& c, const std::string& path_a,
              const std::string& path_b) {
  const auto dir = open_run_dir("ttest", c, cfg);

  const auto a = read_value_file(path_a);
  const auto b = read_value_file(path_b);
  const auto r = stats::welch_t_test(a, b);
  const auto ci_a = stats::mean_ci(a, cfg.alpha);
  const auto ci_b = stats::mean_ci(b, cfg.alpha);

  auto j = base_report("ttest", cfg);
  j["a"] = {{"path", path_a}, {"n", a.size()}, {"mean", ci_a.mean},
            {"ci_halfwidth", ci_a.halfwidth}};
  j["b"] = {{"path", path_b}, {"n", b.size()}, {"mean", ci_b.mean},
            {"ci_halfwidth", ci_b.halfwidth}};
  j["alpha"] = cfg.alpha;
  j["t"] = r.t;
  j["dof"] = r.dof;
  j["p"] = r.p;
  j["significant_at_01"] = r.significant_at_01;

  std::ostringstream txt;
  txt << "a: n=" << a.size() << " mean=" << pipeline::format_double(ci_a.mean, 6) << " +-"
      << pipeline::format_double(ci_a.halfwidth, 6) << "\n";
  txt << "b: n=" << b.size() << " mean=" << pipeline::format_double(ci_b.mean, 6) << " +-"
      << pipeline::format_double(ci_b.halfwidth, 6) << "\n";
  txt << "t = " << pipeline::format_double(r.t, 6) << ", dof = "
      << pipeline::format_double(r.dof, 3) << ", p = " << pipeline::format_double(r.p, 9)
      << "\n";
  txt << "significant at 0.01: " << (r.significant_at_01 ? "yes" : "no") << "\n";
  finish(dir, j, txt.str());
  return 0;
}

int cmd_export_embeddings(const config::RunConfig& cfg, const CommonOpts& c,
                          const std::string& ckpt) {
  const auto dir = open_run_dir("export-embeddings", c, cfg);

  auto b = bundle::load_bundle(ckpt);
  const auto segments = pipeline::acquire_corpus(cfg, cfg.data_path);
  const auto raw_feats = train::extract_all_features(segments, b.geom, b.band);
  std::vector<std::size_t> all(segments.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto ds = train::make_dataset(segments, raw_feats, b.nz, all);

  std::vector<model::MultimodalNet::Input> inputs;
  std::vector<std::string> conditions;
  inputs.reserve(ds.size());
  conditions.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    inputs.push_back(model::MultimodalNet::make_input(ds.segments[i], ds.features[i]));
    conditions.push_back(segments[i].condition.label);
  }
  model::export_embeddings(b.net, inputs, ds.labels, conditions, ds.ids,
                           (dir / "embeddings.csv").string());

  auto j = base_report("export-embeddings", cfg);
  j["checkpoint"] = ckpt;
  j["segments"] = ds.size();
  j["width"] = b.net.fusion_width();
  std::ostringstream txt;
  txt << "exported " << ds.size() << " fused-layer vectors (width " << b.net.fusion_width()
      << ") to embeddings.csv\n";
  finish(dir, j, txt.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"physics-informed bearing-fault classification toolkit"};
  app.require_subcommand(1);

  CommonOpts gen_c, train_c, zs_c, ft_c, grid_c, tt_c, emb_c;
  std::string train_resume, zs_ckpt, ft_ckpt, ft_strategy, emb_ckpt, tt_a, tt_b;
  std::string train_data, grid_data, zs_target, ft_target, emb_data;
  std::size_t grid_jobs = 1;
  double train_lambda = 0.0;
  std::size_t train_epochs = 0;

  auto* gen = app.add_subcommand("generate", "synthesize a labelled segment corpus");
  add_common(gen, gen_c);

  auto* tr = app.add_subcommand("train", "train a model and evaluate on the test split");
  add_common(tr, train_c);
  tr->add_option("--data", train_data, "segment file to train on (default: synthesize)");
  tr->add_option("--resume", train_resume, "checkpoint to continue from");
  tr->add_option("--lambda", train_lambda, "physics penalty weight override");
  tr->add_option("--max-epochs", train_epochs, "epoch budget override");

  auto* zs = app.add_subcommand("zero-shot", "evaluate a checkpoint on a target domain");
  add_common(zs, zs_c);
  zs->add_option("--checkpoint", zs_ckpt, "source model checkpoint");
  zs->add_option("--target", zs_target, "target segment file (default: synthesize)");

  auto* ft = app.add_subcommand("finetune", "adapt a checkpoint to a target domain");
  add_common(ft, ft_c);
  ft->add_option("--checkpoint", ft_ckpt, "source model checkpoint");
  ft->add_option("--strategy", ft_strategy, "tsft | las | hfr");
  ft->add_option("--target", ft_target, "target segment file (default: synthesize)");

  auto* gr = app.add_subcommand("gridsearch", "penalty/threshold/split grid with k-fold CV");
  add_common(gr, grid_c);
  gr->add_option("--data", grid_data, "segment file (default: synthesize)");
  gr->add_option("--jobs", grid_jobs, "max parallel workers");

  auto* tt = app.add_subcommand("ttest", "Welch t-test between two accuracy files");
  add_common(tt, tt_c);
  tt->add_option("--a", tt_a, "first value file")->required();
  tt->add_option("--b", tt_b, "second value file")->required();

  auto* emb = app.add_subcommand("export-embeddings", "dump fused-layer vectors to CSV");
  add_common(emb, emb_c);
  emb->add_option("--checkpoint", emb_ckpt, "model checkpoint");
  emb->add_option("--data", emb_data, "segment file (default: synthesize)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the usage error
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      return cmd_generate(resolve_config(gen, gen_c), gen_c);
    }
    if (tr->parsed()) {
      auto cfg = resolve_config(tr, train_c);
      if (tr->count("--data")) cfg.data_path = train_data;
      if (tr->count("--lambda")) cfg.physics.lambda = train_lambda;
      if (tr->count("--max-epochs")) cfg.trainer.max_epochs = train_epochs;
      return cmd_train(cfg, train_c, train_resume);
    }
    if (zs->parsed()) {
      auto cfg = resolve_config(zs, zs_c);
      if (zs->count("--target")) cfg.target_path = zs_target;
      return cmd_zero_shot(cfg, zs_c, require_checkpoint(cfg, zs_ckpt));
    }
    if (ft->parsed()) {
      auto cfg = resolve_config(ft, ft_c);
      if (ft->count("--target")) cfg.target_path = ft_target;
      const std::string strategy = !ft_strategy.empty() ? ft_strategy : cfg.tl_strategy;
      return cmd_finetune(cfg, ft_c, require_checkpoint(cfg, ft_ckpt), strategy);
    }
    if (gr->parsed()) {
      auto cfg = resolve_config(gr, grid_c);
      if (gr->count("--data")) cfg.data_path = grid_data;
      return cmd_gridsearch(cfg, grid_c, grid_jobs);
    }
    if (tt->parsed()) {
      return cmd_ttest(resolve_config(tt, tt_c), tt_c, tt_a, tt_b);
    }
    if (emb->parsed()) {
      auto cfg = resolve_config(emb, emb_c);
      if (emb->count("--data")) cfg.data_path = emb_data;
      return cmd_export_embeddings(cfg, emb_c, require_checkpoint(cfg, emb_ckpt));
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const StateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
