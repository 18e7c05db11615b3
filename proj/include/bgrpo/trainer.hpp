#ifndef BGRPO_TRAINER_HPP_
#define BGRPO_TRAINER_HPP_

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bgrpo/dataset.hpp"
#include "bgrpo/objective.hpp"
#include "bgrpo/rewards.hpp"

namespace bgrpo {

struct EpochRecord {
  int epoch = 0;
  std::string stage;
  double loss = 0.0;
  double macro_f1 = 0.0;
  double mean_reward = 0.0;
  double frac_pos_adv = 0.0;
  double frac_degenerate_batches = 0.0;
};

struct StageReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;  // highest eval macro F1, earliest on ties

  void note_epoch(const EpochRecord& rec);
};

// Line format: epoch,stage,loss,macro_f1,mean_reward,frac_pos_adv,
// frac_degenerate_batches. '#' lines are comments; best epoch is appended
// as one.
void write_report(const StageReport& report, const std::filesystem::path& path);
StageReport parse_report(const std::filesystem::path& path);

struct EvalMetrics {
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  std::vector<double> per_class_f1;
};

// Deterministic metrics from predict + macro_f1; dataset must be labeled.
EvalMetrics evaluate(const PolicyParams& params, const Dataset& dataset,
                     bool parallel = true);

// Frozen teacher: every id the RL stage may query maps to a distribution.
struct TeacherSource {
  TeacherPredictionTable table;
};

TeacherSource make_teacher_from_table(TeacherPredictionTable table);

// Runs the checkpoint over its own feature view once; the resulting table
// never changes afterwards.
TeacherSource make_teacher_from_checkpoint(const std::filesystem::path& ckpt,
                                           const Dataset& teacher_features,
                                           bool parallel = true);

// First-order updates with persistent moment state.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, AdamParams adam,
            const PolicyParams& shape);
  void step(PolicyParams& params, const GradientSet& grads);

 private:
  OptimizerKind kind_;
  double lr_;
  AdamParams adam_;
  long t_ = 0;
  GradientSet m_, v_;
};

using EpochCallback =
    std::function<void(int epoch, const PolicyParams& params)>;

// Minibatch cross-entropy warmup. Every training sample must be labeled.
std::pair<PolicyParams, StageReport> train_supervised(
    const PolicyParams& init, const Dataset& train, const Dataset& eval,
    const BGRPOConfig& cfg, const EpochCallback& on_epoch = nullptr);

// Batched-group refinement: per batch, snapshot the old policy, roll out
// actions and rewards, normalize them into advantages and take inner-step
// updates against the frozen reference (the baseline passed in). Labels of
// `rl_data` are stripped before anything touches them.
std::pair<PolicyParams, StageReport> train_bgrpo(
    const PolicyParams& baseline, const Dataset& rl_data, const Dataset& eval,
    const RewardConfig& reward_cfg, const std::optional<TeacherSource>& teacher,
    const BGRPOConfig& cfg, const EpochCallback& on_epoch = nullptr);

}  // namespace bgrpo

#endif  // BGRPO_TRAINER_HPP_
