#include "bgrpo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bgrpo/rng.hpp"

namespace bgrpo {

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Seed-space tags so warmup and refinement never share shuffles.
constexpr std::uint64_t kWarmupTag = 1;
constexpr std::uint64_t kRlTag = 2;
constexpr std::uint64_t kActionTag = 3;

}  // namespace

void StageReport::note_epoch(const EpochRecord& rec) {
  epochs.push_back(rec);
  if (best_epoch < 0 ||
      rec.macro_f1 > epochs[static_cast<std::size_t>(best_epoch)].macro_f1) {
    best_epoch = rec.epoch;
  }
}

void write_report(const StageReport& report,
                  const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write report: " + path.string());
  }
  out << "epoch,stage,loss,macro_f1,mean_reward,frac_pos_adv,"
         "frac_degenerate_batches\n";
  for (const auto& r : report.epochs) {
    out << r.epoch << ',' << r.stage << ',' << fmt_double(r.loss) << ','
        << fmt_double(r.macro_f1) << ',' << fmt_double(r.mean_reward) << ','
        << fmt_double(r.frac_pos_adv) << ','
        << fmt_double(r.frac_degenerate_batches) << '\n';
  }
  out << "# best_epoch=" << report.best_epoch << '\n';
  if (!out) {
    throw std::runtime_error("report write failed: " + path.string());
  }
}

StageReport parse_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open report: " + path.string());
  }
  StageReport report;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# best_epoch=", 0) == 0) {
      report.best_epoch = std::stoi(line.substr(13));
      continue;
    }
    if (line[0] == '#') continue;
    if (!have_header) {
      if (line.rfind("epoch,stage,", 0) != 0) {
        throw std::runtime_error("report header missing in " + path.string());
      }
      have_header = true;
      continue;
    }
    std::istringstream iss(line);
    std::string field;
    EpochRecord r;
    auto next = [&](const char* what) {
      if (!std::getline(iss, field, ',')) {
        throw std::runtime_error("report row missing field '" +
                                 std::string(what) + "' in " + path.string());
      }
      return field;
    };
    r.epoch = std::stoi(next("epoch"));
    r.stage = next("stage");
    r.loss = std::stod(next("loss"));
    r.macro_f1 = std::stod(next("macro_f1"));
    r.mean_reward = std::stod(next("mean_reward"));
    r.frac_pos_adv = std::stod(next("frac_pos_adv"));
    r.frac_degenerate_batches = std::stod(next("frac_degenerate_batches"));
    report.epochs.push_back(std::move(r));
  }
  return report;
}

EvalMetrics evaluate(const PolicyParams& params, const Dataset& dataset,
                     bool parallel) {
  dataset.validate();
  if (dataset.samples.empty()) {
    throw std::invalid_argument("evaluate: empty dataset");
  }
  if (!dataset.fully_labeled()) {
    throw std::invalid_argument("evaluate: dataset has unlabeled samples");
  }
  if (dataset.dim != params.dim) {
    throw std::invalid_argument("evaluate: dataset dim " +
                                std::to_string(dataset.dim) +
                                " does not match checkpoint dim " +
                                std::to_string(params.dim));
  }
  std::vector<int> indices(static_cast<std::size_t>(dataset.size()));
  for (int i = 0; i < dataset.size(); ++i) indices[static_cast<std::size_t>(i)] = i;
  const auto probs = forward_many(params, dataset, indices, parallel);

  const int n = params.num_classes;
  std::vector<int> preds(indices.size());
  std::vector<int> labels(indices.size());
  long correct = 0;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    preds[i] = argmax_lowest(std::span<const double>(
        probs.data() + i * static_cast<std::size_t>(n), static_cast<std::size_t>(n)));
    labels[i] = *dataset.samples[i].label;
    if (preds[i] == labels[i]) ++correct;
  }

  EvalMetrics m;
  m.macro_f1 = macro_f1(preds, labels, n);
  m.accuracy = static_cast<double>(correct) / static_cast<double>(indices.size());
  m.per_class_f1.resize(static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c) {
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (labels[i] == c && preds[i] == c) ++tp;
      if (labels[i] != c && preds[i] == c) ++fp;
      if (labels[i] == c && preds[i] != c) ++fn;
    }
    const long denom = 2 * tp + fp + fn;
    m.per_class_f1[static_cast<std::size_t>(c)] =
        denom == 0 ? 0.0
                   : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  return m;
}

TeacherSource make_teacher_from_table(TeacherPredictionTable table) {
  if (table.num_classes < 1) {
    throw std::invalid_argument("teacher table without class count");
  }
  for (const auto& [id, dist] : table.by_id) {
    check_distribution(dist.probs, 1e-6, "teacher prediction for '" + id + "'");
  }
  return TeacherSource{std::move(table)};
}

TeacherSource make_teacher_from_checkpoint(const std::filesystem::path& ckpt,
                                           const Dataset& teacher_features,
                                           bool parallel) {
  const PolicyParams teacher = load_checkpoint(ckpt);
  teacher_features.validate();
  if (teacher.dim != teacher_features.dim) {
    throw std::invalid_argument(
        "teacher checkpoint dim " + std::to_string(teacher.dim) +
        " does not match teacher feature dim " +
        std::to_string(teacher_features.dim));
  }
  std::vector<int> indices(static_cast<std::size_t>(teacher_features.size()));
  for (int i = 0; i < teacher_features.size(); ++i) {
    indices[static_cast<std::size_t>(i)] = i;
  }
  const auto probs = forward_many(teacher, teacher_features, indices, parallel);

  TeacherPredictionTable table;
  table.num_classes = teacher.num_classes;
  const auto n = static_cast<std::size_t>(teacher.num_classes);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    ProbDistribution dist;
    dist.probs.assign(probs.begin() + static_cast<long>(i * n),
                      probs.begin() + static_cast<long>((i + 1) * n));
    table.by_id.emplace(teacher_features.samples[i].id, std::move(dist));
  }
  return TeacherSource{std::move(table)};
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, AdamParams adam,
                     const PolicyParams& shape)
    : kind_(kind),
      lr_(learning_rate),
      adam_(adam),
      m_(GradientSet::zeros_like(shape)),
      v_(GradientSet::zeros_like(shape)) {}

void Optimizer::step(PolicyParams& params, const GradientSet& grads) {
  auto update_tensor = [this](std::vector<double>& w, const std::vector<double>& g,
                              std::vector<double>& m, std::vector<double>& v) {
    if (kind_ == OptimizerKind::sgd) {
      for (std::size_t j = 0; j < w.size(); ++j) w[j] -= lr_ * g[j];
      return;
    }
    const double bc1 = 1.0 - std::pow(adam_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(adam_.beta2, static_cast<double>(t_));
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = adam_.beta1 * m[j] + (1.0 - adam_.beta1) * g[j];
      v[j] = adam_.beta2 * v[j] + (1.0 - adam_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= lr_ * mhat / (std::sqrt(vhat) + adam_.eps);
    }
  };
  ++t_;
  update_tensor(params.w1, grads.w1, m_.w1, v_.w1);
  update_tensor(params.b1, grads.b1, m_.b1, v_.b1);
  update_tensor(params.w2, grads.w2, m_.w2, v_.w2);
  update_tensor(params.b2, grads.b2, m_.b2, v_.b2);
}

std::pair<PolicyParams, StageReport> train_supervised(
    const PolicyParams& init, const Dataset& train, const Dataset& eval,
    const BGRPOConfig& cfg, const EpochCallback& on_epoch) {
  cfg.check();
  check_params(init);
  train.validate();
  if (train.samples.empty()) {
    throw std::invalid_argument("train_supervised: empty dataset");
  }
  if (!train.fully_labeled()) {
    throw std::invalid_argument(
        "train_supervised: every training sample needs a label");
  }
  if (train.dim != init.dim) {
    throw std::invalid_argument("train_supervised: feature dim mismatch");
  }

  PolicyParams params = init;
  Optimizer opt(cfg.optimizer, cfg.learning_rate, cfg.adam, params);
  StageReport report;

  for (int epoch = 0; epoch < cfg.warmup_epochs; ++epoch) {
    const auto batches =
        make_batches(train, cfg.batch_size, rng::mix(cfg.seed, kWarmupTag), epoch);
    double loss_sum = 0.0;
    for (const auto& batch : batches) {
      auto [loss, grads] =
          ce_loss_and_grads(params, train, batch, cfg.parallel);
      opt.step(params, grads);
      loss_sum += loss;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.stage = "warmup";
    rec.loss = batches.empty() ? 0.0
                               : loss_sum / static_cast<double>(batches.size());
    rec.macro_f1 = evaluate(params, eval, cfg.parallel).macro_f1;
    report.note_epoch(rec);
    if (on_epoch) on_epoch(epoch, params);
  }
  return {std::move(params), std::move(report)};
}

std::pair<PolicyParams, StageReport> train_bgrpo(
    const PolicyParams& baseline, const Dataset& rl_data, const Dataset& eval,
    const RewardConfig& reward_cfg, const std::optional<TeacherSource>& teacher,
    const BGRPOConfig& cfg, const EpochCallback& on_epoch) {
  cfg.check();
  reward_cfg.check();
  check_params(baseline);
  rl_data.validate();
  if (rl_data.samples.empty()) {
    throw std::invalid_argument("train_bgrpo: empty dataset");
  }
  if (rl_data.dim != baseline.dim) {
    throw std::invalid_argument("train_bgrpo: feature dim mismatch");
  }
  if (reward_needs_teacher(reward_cfg.kind)) {
    if (!teacher) {
      throw std::invalid_argument("reward " + to_string(reward_cfg.kind) +
                                  " requires a teacher source");
    }
    if (teacher->table.num_classes != baseline.num_classes) {
      throw std::invalid_argument("teacher class count mismatch");
    }
  }

  // Gold labels of the RL corpus are invisible from here on.
  const Dataset data = strip_labels(rl_data);

  const int n = baseline.num_classes;
  const auto nz = static_cast<std::size_t>(n);

  // Reference distributions are computed once; the reference policy is
  // frozen for the whole stage.
  std::vector<int> all(static_cast<std::size_t>(data.size()));
  for (int i = 0; i < data.size(); ++i) all[static_cast<std::size_t>(i)] = i;
  const std::vector<double> ref_probs =
      forward_many(baseline, data, all, cfg.parallel);
  const std::uint64_t ref_hash = params_hash(baseline);

  // Teacher distributions pinned per sample index up front (frozen as well).
  std::vector<const ProbDistribution*> teacher_dist(
      static_cast<std::size_t>(data.size()), nullptr);
  if (teacher) {
    for (int i = 0; i < data.size(); ++i) {
      teacher_dist[static_cast<std::size_t>(i)] =
          &teacher->table.lookup(data.samples[static_cast<std::size_t>(i)].id);
    }
  }

  PolicyParams params = baseline;
  Optimizer opt(cfg.optimizer, cfg.learning_rate, cfg.adam, params);
  StageReport report;

  std::vector<double> old_probs;
  std::vector<double> rewards;
  std::vector<SampleRollout> rollouts;

  for (int epoch = 0; epoch < cfg.rl_epochs; ++epoch) {
    const auto batches =
        make_batches(data, cfg.batch_size, rng::mix(cfg.seed, kRlTag), epoch);
    double loss_sum = 0.0;
    long steps = 0;
    double reward_sum = 0.0;
    long reward_count = 0;
    long pos_adv = 0;
    long degenerate = 0;

    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& batch = batches[bi];
      const auto b = batch.size();

      // Rollout under the frozen start-of-batch policy.
      const PolicySnapshot old_snapshot = snapshot(params, SnapshotRole::old_policy);
      old_probs = forward_many(old_snapshot.params(), data, batch, cfg.parallel);

      rng::Prng action_gen(rng::mix(rng::mix(cfg.seed, kActionTag),
                                    rng::mix(static_cast<std::uint64_t>(epoch),
                                             static_cast<std::uint64_t>(bi))));
      rewards.resize(b);
      rollouts.resize(b);
      for (std::size_t k = 0; k < b; ++k) {
        const std::span<const double> dist(old_probs.data() + k * nz, nz);
        int action;
        if (cfg.sample_actions) {
          const double u = action_gen.uniform();
          double acc = 0.0;
          action = n - 1;
          for (int c = 0; c < n; ++c) {
            acc += dist[static_cast<std::size_t>(c)];
            if (u < acc) {
              action = c;
              break;
            }
          }
        } else {
          action = argmax_lowest(dist);
        }
        SampleRollout& r = rollouts[k];
        r.sample = batch[k];
        r.action = action;
        r.p_old = dist[static_cast<std::size_t>(action)];
        r.p_ref = ref_probs[static_cast<std::size_t>(batch[k]) * nz +
                            static_cast<std::size_t>(action)];

        ProbDistribution policy_dist;
        policy_dist.probs.assign(dist.begin(), dist.end());
        rewards[k] = compute_reward(policy_dist,
                                    teacher_dist[static_cast<std::size_t>(batch[k])],
                                    reward_cfg)
                         .value;
      }

      const AdvantageVector adv =
          batch_advantages(rewards, cfg.advantage_mode, cfg.eps_std);
      if (adv.degenerate) ++degenerate;
      for (std::size_t k = 0; k < b; ++k) {
        rollouts[k].advantage = adv.values[k];
        reward_sum += rewards[k];
        if (adv.values[k] > 0.0) ++pos_adv;
      }
      reward_count += static_cast<long>(b);

      for (int step = 0; step < cfg.inner_steps; ++step) {
        auto [loss, grads] = bgrpo_loss_and_grads(params, data, rollouts, cfg);
        opt.step(params, grads);
        loss_sum += loss;
        ++steps;
      }
    }

    // The reference stayed frozen: nothing may have touched the baseline.
    if (params_hash(baseline) != ref_hash) {
      throw std::logic_error(
          "reference policy changed during the refinement stage");
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.stage = "bgrpo";
    rec.loss = steps == 0 ? 0.0 : loss_sum / static_cast<double>(steps);
    rec.macro_f1 = evaluate(params, eval, cfg.parallel).macro_f1;
    rec.mean_reward =
        reward_count == 0 ? 0.0
                          : reward_sum / static_cast<double>(reward_count);
    rec.frac_pos_adv =
        reward_count == 0 ? 0.0
                          : static_cast<double>(pos_adv) /
                                static_cast<double>(reward_count);
    rec.frac_degenerate_batches =
        batches.empty() ? 0.0
                        : static_cast<double>(degenerate) /
                              static_cast<double>(batches.size());
    report.note_epoch(rec);
    if (on_epoch) on_epoch(epoch, params);
  }
  return {std::move(params), std::move(report)};
}

}  // namespace bgrpo
