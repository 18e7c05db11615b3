#include "bgrpo/run_config.hpp"

#include <cstdlib>
#include <stdexcept>

namespace bgrpo {

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) {
    throw std::runtime_error("missing required " + what + " file");
  }
  if (!std::filesystem::exists(path)) {
    throw std::runtime_error(what + " file not found: " + path);
  }
}

std::filesystem::path prepare_out_dir(const std::string& out) {
  if (out.empty()) {
    throw std::runtime_error("output directory must not be empty");
  }
  std::filesystem::path dir(out);
  if (dir.is_relative()) {
    if (const char* root = std::getenv("BGRPO_OUT_ROOT")) {
      dir = std::filesystem::path(root) / dir;
    }
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create output directory " + dir.string() +
                             ": " + ec.message());
  }
  return dir;
}

void RunConfig::validate_for_baseline() const {
  require_file(train_file, "training feature");
  require_file(eval_file, "evaluation feature");
  if (!use_full_train && !(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw std::runtime_error("split fraction must lie in (0,1)");
  }
  bgrpo.check();
}

void RunConfig::validate_for_bgrpo() const {
  require_file(baseline_file, "baseline checkpoint");
  require_file(eval_file, "evaluation feature");
  if (rl_file.empty() == train_file.empty()) {
    throw std::runtime_error(
        "give exactly one of --rl (explicit corpus) or --train (second half "
        "of the split)");
  }
  if (!rl_file.empty()) {
    require_file(rl_file, "RL feature");
  } else {
    require_file(train_file, "training feature");
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
      throw std::runtime_error("split fraction must lie in (0,1)");
    }
  }
  if (reward_needs_teacher(reward.kind)) {
    const bool has_table = !teacher_file.empty();
    const bool has_ckpt =
        !teacher_checkpoint.empty() && !teacher_features.empty();
    if (!has_table && !has_ckpt) {
      throw std::runtime_error(
          "reward " + to_string(reward.kind) +
          " needs --teacher or --teacher-checkpoint with --teacher-features");
    }
    if (has_table && has_ckpt) {
      throw std::runtime_error(
          "give either --teacher or a teacher checkpoint, not both");
    }
    if (has_table) require_file(teacher_file, "teacher prediction");
    if (has_ckpt) {
      require_file(teacher_checkpoint, "teacher checkpoint");
      require_file(teacher_features, "teacher feature");
    }
  }
  reward.check();
  bgrpo.check();
}

}  // namespace bgrpo
