// Command-line front end: synthetic data generation, supervised warmup,
// batched-group policy refinement, evaluation and gradient checking.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bgrpo/dataset.hpp"
#include "bgrpo/objective.hpp"
#include "bgrpo/policy.hpp"
#include "bgrpo/run_config.hpp"
#include "bgrpo/synthetic.hpp"
#include "bgrpo/trainer.hpp"

namespace {

using namespace bgrpo;

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& content) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << content;
}

// ---------------------------------------------------------------- gen ----

struct GenOpts {
  std::string out = ".";
  std::string name = "mixture";
  int classes = 6;
  int dim = 32;
  int per_class = 100;
  std::string counts;
  double sigma = 1.0;
  double separation = 2.3;
  std::uint64_t seed = 0;
  bool second_view_flag = false;
  double view_noise = 0.25;
  std::uint64_t view_seed = 1;
  int eval_per_class = 0;
};

std::vector<int> parse_counts(const std::string& csv) {
  std::vector<int> counts;
  std::istringstream iss(csv);
  std::string tok;
  while (std::getline(iss, tok, ',')) {
    counts.push_back(std::stoi(tok));
  }
  return counts;
}

int cmd_gen(const GenOpts& opts) {
  MixtureSpec spec;
  spec.num_classes = opts.classes;
  spec.dim = opts.dim;
  spec.per_class = opts.per_class;
  if (!opts.counts.empty()) spec.per_class_counts = parse_counts(opts.counts);
  spec.sigma = opts.sigma;
  spec.separation = opts.separation;
  spec.seed = opts.seed;
  spec.name = opts.name;
  spec.check();

  const auto dir = prepare_out_dir(opts.out);
  const Dataset train = generate(spec, 0);
  const auto train_path = dir / (spec.name + ".features");
  save_feature_file(train, train_path);
  save_mixture_spec(spec, dir / (spec.name + ".spec"));
  std::cout << "wrote " << train_path.string() << " (" << train.size()
            << " samples, dim " << train.dim << ")\n";

  if (opts.second_view_flag) {
    const Dataset view = second_view(train, opts.view_seed, opts.view_noise);
    const auto view_path = dir / (spec.name + "_view2.features");
    save_feature_file(view, view_path);
    std::cout << "wrote " << view_path.string() << " (" << view.size()
              << " samples)\n";
  }
  if (opts.eval_per_class > 0) {
    MixtureSpec eval_spec = spec;
    eval_spec.per_class_counts.clear();
    eval_spec.per_class = opts.eval_per_class;
    const Dataset eval = generate(eval_spec, 1);
    const auto eval_path = dir / (spec.name + "_eval.features");
    save_feature_file(eval, eval_path);
    std::cout << "wrote " << eval_path.string() << " (" << eval.size()
              << " samples)\n";
  }
  return 0;
}

// ------------------------------------------------------------- training ----

void save_interval_checkpoints(const RunConfig& cfg,
                               const std::filesystem::path& dir,
                               const std::string& stage, int epoch,
                               const PolicyParams& params) {
  if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
    save_checkpoint(params, dir / (stage + "_epoch" + std::to_string(epoch) +
                                   ".ckpt"));
  }
}

int cmd_train_baseline(const RunConfig& cfg, const std::string& snapshot) {
  cfg.validate_for_baseline();
  const auto dir = prepare_out_dir(cfg.out_dir);
  write_text_file(dir / "config.txt", snapshot);

  Dataset corpus = load_feature_file(cfg.train_file);
  const Dataset eval = load_feature_file(cfg.eval_file);
  Dataset train;
  if (cfg.use_full_train) {
    train = std::move(corpus);
  } else {
    train = split_half(corpus, cfg.split_fraction, cfg.split_seed).first;
  }

  const PolicyParams init = init_params(train.dim, cfg.hidden,
                                        train.num_classes, cfg.bgrpo.seed);
  auto [params, report] = train_supervised(
      init, train, eval, cfg.bgrpo,
      [&](int epoch, const PolicyParams& p) {
        save_interval_checkpoints(cfg, dir, "baseline", epoch, p);
      });

  save_checkpoint(params, dir / "baseline.ckpt");
  write_report(report, dir / "report.csv");
  const double final_f1 =
      report.epochs.empty() ? 0.0 : report.epochs.back().macro_f1;
  std::cout << "baseline checkpoint " << (dir / "baseline.ckpt").string()
            << "\n"
            << "epochs " << report.epochs.size() << " macro_f1 "
            << fmt_double(final_f1) << " best_epoch " << report.best_epoch
            << "\n";
  return 0;
}

int cmd_train_bgrpo(const RunConfig& cfg, const std::string& snapshot) {
  cfg.validate_for_bgrpo();
  const auto dir = prepare_out_dir(cfg.out_dir);
  write_text_file(dir / "config.txt", snapshot);

  const PolicyParams baseline = load_checkpoint(cfg.baseline_file);
  const Dataset eval = load_feature_file(cfg.eval_file);
  Dataset rl;
  if (!cfg.rl_file.empty()) {
    rl = load_feature_file(cfg.rl_file);
  } else {
    Dataset corpus = load_feature_file(cfg.train_file);
    rl = split_half(corpus, cfg.split_fraction, cfg.split_seed).second;
  }

  std::optional<TeacherSource> teacher;
  if (reward_needs_teacher(cfg.reward.kind)) {
    if (!cfg.teacher_file.empty()) {
      teacher = make_teacher_from_table(load_teacher_predictions(cfg.teacher_file));
    } else {
      teacher = make_teacher_from_checkpoint(
          cfg.teacher_checkpoint, load_feature_file(cfg.teacher_features),
          cfg.bgrpo.parallel);
    }
  }

  auto [params, report] = train_bgrpo(
      baseline, rl, eval, cfg.reward, teacher, cfg.bgrpo,
      [&](int epoch, const PolicyParams& p) {
        save_interval_checkpoints(cfg, dir, "bgrpo", epoch, p);
      });

  save_checkpoint(params, dir / "bgrpo.ckpt");
  write_report(report, dir / "report.csv");
  const double final_f1 =
      report.epochs.empty() ? 0.0 : report.epochs.back().macro_f1;
  std::cout << "refined checkpoint " << (dir / "bgrpo.ckpt").string() << "\n"
            << "epochs " << report.epochs.size() << " macro_f1 "
            << fmt_double(final_f1) << " best_epoch " << report.best_epoch
            << "\n";
  return 0;
}

// ---------------------------------------------------------------- eval ----

int cmd_eval(const std::string& checkpoint, const std::string& data,
             const std::string& out_file) {
  require_file(checkpoint, "checkpoint");
  require_file(data, "evaluation feature");
  const PolicyParams params = load_checkpoint(checkpoint);
  const Dataset ds = load_feature_file(data);
  const EvalMetrics m = evaluate(params, ds);

  std::cout << "macro_f1 " << fmt_double(m.macro_f1) << "\n"
            << "accuracy " << fmt_double(m.accuracy) << "\n";
  for (std::size_t c = 0; c < m.per_class_f1.size(); ++c) {
    std::cout << "f1_class_" << c << " " << fmt_double(m.per_class_f1[c])
              << "\n";
  }

  if (!out_file.empty()) {
    StageReport report;
    EpochRecord rec;
    rec.epoch = 0;
    rec.stage = "eval";
    rec.macro_f1 = m.macro_f1;
    report.note_epoch(rec);
    write_report(report, out_file);
  }
  return 0;
}

// ----------------------------------------------------------- gradcheck ----

int cmd_gradcheck(const std::string& loss, int dim, int hidden, int classes,
                  int batch, std::uint64_t seed, double h, double tol,
                  int instances) {
  std::vector<LossKind> kinds;
  if (loss == "both") {
    kinds = {LossKind::cross_entropy, LossKind::bgrpo};
  } else {
    kinds = {loss_kind_from_string(loss)};
  }
  bool all_pass = true;
  for (const LossKind kind : kinds) {
    double worst = 0.0;
    int resamples = 0;
    for (int i = 0; i < instances; ++i) {
      GradCheckSpec spec;
      spec.kind = kind;
      spec.dim = dim;
      spec.hidden = hidden;
      spec.num_classes = classes;
      spec.batch = batch;
      spec.seed = seed + static_cast<std::uint64_t>(i);
      spec.h = h;
      spec.tol = tol;
      const GradCheckReport rep = grad_check(spec);
      worst = std::max(worst, rep.max_rel_error);
      resamples += rep.resamples;
    }
    const bool pass = worst < tol;
    all_pass = all_pass && pass;
    std::cout << (kind == LossKind::cross_entropy ? "ce" : "bgrpo")
              << ": max_rel_error " << fmt_double(worst) << " over "
              << instances << " instances (" << resamples << " redraws) "
              << (pass ? "pass" : "FAIL") << "\n";
  }
  return all_pass ? 0 : 1;
}

void add_train_common(CLI::App* sub, RunConfig& cfg, bool& serial) {
  sub->add_option("--eval", cfg.eval_file, "evaluation feature file");
  sub->add_option("--out", cfg.out_dir, "run output directory");
  sub->add_option("--hidden", cfg.hidden, "hidden layer width")
      ->capture_default_str();
  sub->add_option("--lr", cfg.bgrpo.learning_rate, "learning rate")
      ->capture_default_str();
  sub->add_option("--batch", cfg.bgrpo.batch_size, "batch (group) size")
      ->capture_default_str();
  sub->add_option("--seed", cfg.bgrpo.seed, "run seed")->capture_default_str();
  sub->add_option_function<std::string>(
         "--optimizer",
         [&cfg](const std::string& s) {
           cfg.bgrpo.optimizer = optimizer_from_string(s);
         },
         "optimizer: adam | sgd")
      ->default_str("adam");
  sub->add_option("--checkpoint-every", cfg.checkpoint_every,
                  "interval checkpoints every k epochs (0 = final only)")
      ->capture_default_str();
  sub->add_flag("--serial", serial,
                "use the serial reference kernels instead of OpenMP");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "group-relative policy refinement for softmax classifiers over "
      "pre-extracted utterance features"};
  app.require_subcommand(1);

  GenOpts gen;
  auto* gen_cmd = app.add_subcommand(
      "gen", "generate a Gaussian-mixture feature corpus");
  gen_cmd->add_option("--out", gen.out, "output directory")
      ->capture_default_str();
  gen_cmd->add_option("--name", gen.name, "dataset name / file stem")
      ->capture_default_str();
  gen_cmd->add_option("--classes", gen.classes, "number of classes")
      ->capture_default_str();
  gen_cmd->add_option("--dim", gen.dim, "feature dimensionality")
      ->capture_default_str();
  gen_cmd->add_option("--per-class", gen.per_class, "samples per class")
      ->capture_default_str();
  gen_cmd->add_option("--counts", gen.counts,
                      "comma-separated per-class counts (overrides "
                      "--per-class)");
  gen_cmd->add_option("--sigma", gen.sigma, "isotropic component std")
      ->capture_default_str();
  gen_cmd->add_option("--separation", gen.separation,
                      "distance of class means from the origin")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "generator seed")
      ->capture_default_str();
  gen_cmd->add_flag("--second-view", gen.second_view_flag,
                    "also write a rotated+noisy second feature view");
  gen_cmd->add_option("--view-noise", gen.view_noise,
                      "noise std of the second view")
      ->capture_default_str();
  gen_cmd->add_option("--view-seed", gen.view_seed, "rotation seed")
      ->capture_default_str();
  gen_cmd->add_option("--eval-per-class", gen.eval_per_class,
                      "also write a fresh evaluation draw with this many "
                      "samples per class")
      ->capture_default_str();

  RunConfig base_cfg;
  bool base_serial = false;
  auto* base_cmd = app.add_subcommand(
      "train-baseline", "supervised warmup on the labeled half");
  base_cmd->set_config("--config", "", "key=value config file");
  base_cmd->add_option("--train", base_cfg.train_file,
                       "labeled training feature file");
  base_cmd->add_option("--epochs", base_cfg.bgrpo.warmup_epochs,
                       "supervised epochs")
      ->capture_default_str();
  base_cmd->add_option("--split-fraction", base_cfg.split_fraction,
                       "fraction of the corpus used as the labeled half")
      ->capture_default_str();
  base_cmd->add_option("--split-seed", base_cfg.split_seed,
                       "seed of the stratified split")
      ->capture_default_str();
  base_cmd->add_flag("--use-full-train", base_cfg.use_full_train,
                     "train on the whole corpus instead of the first half");
  add_train_common(base_cmd, base_cfg, base_serial);

  RunConfig rl_cfg;
  bool rl_serial = false;
  std::string reward_name = "r1";
  std::string advantage_name = "positive_clip";
  auto* rl_cmd = app.add_subcommand(
      "train-bgrpo", "batched-group policy refinement from a baseline");
  rl_cmd->set_config("--config", "", "key=value config file");
  rl_cmd->add_option("--baseline", rl_cfg.baseline_file,
                     "post-warmup checkpoint (also the frozen reference)");
  rl_cmd->add_option("--rl", rl_cfg.rl_file,
                     "explicit RL feature file (cross-corpus runs)");
  rl_cmd->add_option("--train", rl_cfg.train_file,
                     "corpus whose second split half becomes the RL data");
  rl_cmd->add_option("--split-fraction", rl_cfg.split_fraction,
                     "fraction of the corpus in the labeled half")
      ->capture_default_str();
  rl_cmd->add_option("--split-seed", rl_cfg.split_seed,
                     "seed of the stratified split")
      ->capture_default_str();
  rl_cmd->add_option("--epochs", rl_cfg.bgrpo.rl_epochs, "refinement epochs")
      ->capture_default_str();
  rl_cmd->add_option("--reward", reward_name,
                     "reward function: r1 | r2 | r3 | r4 | r5")
      ->capture_default_str();
  rl_cmd->add_option("--C", rl_cfg.reward.reward_score, "reward score C")
      ->capture_default_str();
  rl_cmd->add_option("--delta", rl_cfg.reward.delta,
                     "likelihood threshold of r1/r4")
      ->capture_default_str();
  rl_cmd->add_option("--theta", rl_cfg.reward.theta,
                     "KL threshold of r5 (0 = ln(classes)/2)")
      ->capture_default_str();
  rl_cmd->add_option("--penalty", rl_cfg.reward.penalty,
                     "else-branch reward value (<= 0)")
      ->capture_default_str();
  rl_cmd->add_option("--teacher", rl_cfg.teacher_file,
                     "teacher prediction table file");
  rl_cmd->add_option("--teacher-checkpoint", rl_cfg.teacher_checkpoint,
                     "teacher policy checkpoint");
  rl_cmd->add_option("--teacher-features", rl_cfg.teacher_features,
                     "feature file of the teacher's own view");
  rl_cmd->add_option("--advantage-mode", advantage_name,
                     "positive_clip | signed | none")
      ->capture_default_str();
  rl_cmd->add_option("--epsilon", rl_cfg.bgrpo.epsilon, "clip range")
      ->capture_default_str();
  rl_cmd->add_option("--beta", rl_cfg.bgrpo.beta, "KL penalty coefficient")
      ->capture_default_str();
  rl_cmd->add_option("--eps-std", rl_cfg.bgrpo.eps_std,
                     "degenerate-group std threshold")
      ->capture_default_str();
  rl_cmd->add_option("--inner-steps", rl_cfg.bgrpo.inner_steps,
                     "gradient steps per batch rollout")
      ->capture_default_str();
  rl_cmd->add_flag("--sample-actions", rl_cfg.bgrpo.sample_actions,
                   "sample actions from the old policy instead of argmax");
  add_train_common(rl_cmd, rl_cfg, rl_serial);

  std::string eval_checkpoint, eval_data, eval_out = "eval_metrics.csv";
  auto* eval_cmd =
      app.add_subcommand("eval", "evaluate a checkpoint on a labeled corpus");
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "policy checkpoint");
  eval_cmd->add_option("--data", eval_data, "labeled feature file");
  eval_cmd->add_option("--out", eval_out,
                       "metrics file (report format); empty to skip")
      ->capture_default_str();

  std::string gc_loss = "both";
  int gc_dim = 8, gc_hidden = 4, gc_classes = 6, gc_batch = 5;
  std::uint64_t gc_seed = 1;
  double gc_h = 1e-5, gc_tol = 1e-4;
  int gc_instances = 20;
  auto* gc_cmd = app.add_subcommand(
      "gradcheck", "verify analytic gradients against central differences");
  gc_cmd->add_option("--loss", gc_loss, "ce | bgrpo | both")
      ->capture_default_str();
  gc_cmd->add_option("--dim", gc_dim, "feature dim")->capture_default_str();
  gc_cmd->add_option("--hidden", gc_hidden, "hidden width")
      ->capture_default_str();
  gc_cmd->add_option("--classes", gc_classes, "class count")
      ->capture_default_str();
  gc_cmd->add_option("--batch", gc_batch, "batch size")->capture_default_str();
  gc_cmd->add_option("--seed", gc_seed, "instance seed")
      ->capture_default_str();
  gc_cmd->add_option("--fd-step", gc_h, "central difference step")
      ->capture_default_str();
  gc_cmd->add_option("--tol", gc_tol, "max relative error to pass")
      ->capture_default_str();
  gc_cmd->add_option("--instances", gc_instances, "random instances per loss")
      ->capture_default_str();

  try {
    app.parse(argc, argv);

    if (gen_cmd->parsed()) return cmd_gen(gen);
    if (base_cmd->parsed()) {
      base_cfg.bgrpo.parallel = !base_serial;
      return cmd_train_baseline(base_cfg, base_cmd->config_to_str(true, false));
    }
    if (rl_cmd->parsed()) {
      rl_cfg.bgrpo.parallel = !rl_serial;
      rl_cfg.reward.kind = reward_kind_from_string(reward_name);
      rl_cfg.bgrpo.advantage_mode = advantage_mode_from_string(advantage_name);
      return cmd_train_bgrpo(rl_cfg, rl_cmd->config_to_str(true, false));
    }
    if (eval_cmd->parsed()) return cmd_eval(eval_checkpoint, eval_data, eval_out);
    if (gc_cmd->parsed()) {
      return cmd_gradcheck(gc_loss, gc_dim, gc_hidden, gc_classes, gc_batch,
                           gc_seed, gc_h, gc_tol, gc_instances);
    }
    std::cerr << "error: no subcommand given\n";
    return 2;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
