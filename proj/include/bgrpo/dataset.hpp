#ifndef BGRPO_DATASET_HPP_
#define BGRPO_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bgrpo/policy.hpp"

namespace bgrpo {

// One pooled utterance feature vector with an optional gold label.
struct UtteranceSample {
  std::string id;
  std::vector<double> features;
  std::optional<int> label;
  std::string corpus;
};

struct Dataset {
  std::string name;
  int dim = 0;
  int num_classes = 6;
  std::vector<UtteranceSample> samples;

  int size() const { return static_cast<int>(samples.size()); }
  bool fully_labeled() const;
  // Shared dim, unique ids, finite features, labels < num_classes.
  void validate() const;
};

// Copy with every label removed. The refinement stage trains on these views
// so gold labels of the RL corpus cannot leak into it.
Dataset strip_labels(const Dataset& dataset);

// Text feature file:
//   # dim=<D> classes=<N> name=<string>
//   <id>\t<label or ->\t<v1> <v2> ... <vD>
// Every failure names the offending line.
Dataset load_feature_file(const std::filesystem::path& path);
void save_feature_file(const Dataset& dataset,
                       const std::filesystem::path& path);

// Deterministic split stratified by label (unlabeled samples form their own
// stratum). First part gets round(fraction * size) samples; both parts keep
// the input's sample order. Labels of the second part stay in storage.
std::pair<Dataset, Dataset> split_half(const Dataset& dataset, double fraction,
                                       std::uint64_t seed);

// Per-(seed, epoch) shuffled index batches of size `batch_size`; a trailing
// remainder of size >= 2 is kept, a singleton is dropped.
std::vector<std::vector<int>> make_batches(const Dataset& dataset,
                                           int batch_size, std::uint64_t seed,
                                           int epoch);

struct TeacherPredictionTable {
  int num_classes = 0;
  std::unordered_map<std::string, ProbDistribution> by_id;

  // Throws std::out_of_range naming the id when absent.
  const ProbDistribution& lookup(const std::string& id) const;
};

// Teacher prediction file:
//   # classes=<N>
//   <id>\t<p1> ... <pN>
// Rows whose sum is within 1e-6 of 1 are renormalized; larger deviations and
// negative entries are rejected with the row id in the message.
TeacherPredictionTable load_teacher_predictions(
    const std::filesystem::path& path);
void save_teacher_predictions(const TeacherPredictionTable& table,
                              const std::filesystem::path& path);

}  // namespace bgrpo

#endif  // BGRPO_DATASET_HPP_
