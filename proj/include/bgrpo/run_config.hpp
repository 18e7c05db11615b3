#ifndef BGRPO_RUN_CONFIG_HPP_
#define BGRPO_RUN_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>

#include "bgrpo/objective.hpp"
#include "bgrpo/rewards.hpp"

namespace bgrpo {

// Resolved settings of one training invocation.
struct RunConfig {
  std::string train_file;
  std::string rl_file;
  std::string eval_file;
  std::string baseline_file;
  std::string teacher_file;
  std::string teacher_checkpoint;
  std::string teacher_features;
  std::string out_dir;

  int hidden = 128;
  double split_fraction = 0.5;
  std::uint64_t split_seed = 0;
  bool use_full_train = false;
  int checkpoint_every = 0;  // 0 = final checkpoint only

  BGRPOConfig bgrpo;
  RewardConfig reward;

  void validate_for_baseline() const;
  void validate_for_bgrpo() const;
};

// Throws std::runtime_error naming `path` when the file is missing.
void require_file(const std::string& path, const std::string& what);

// Resolves `out` against the BGRPO_OUT_ROOT environment variable (applied to
// relative paths) and creates the directory tree.
std::filesystem::path prepare_out_dir(const std::string& out);

}  // namespace bgrpo

#endif  // BGRPO_RUN_CONFIG_HPP_
