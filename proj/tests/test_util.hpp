#ifndef BGRPO_TESTS_TEST_UTIL_HPP_
#define BGRPO_TESTS_TEST_UTIL_HPP_

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bgrpo/dataset.hpp"

namespace testutil {

// Fresh per-suite scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& suite) {
  const auto dir = std::filesystem::current_path() / ("scratch_" + suite);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path write_file(const std::filesystem::path& path,
                                        const std::string& content) {
  std::ofstream out(path);
  out << content;
  return path;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small hand-built dataset: `per_class` samples for each class, features
// clustered at unit vectors scaled by `scale`.
inline bgrpo::Dataset toy_dataset(int num_classes, int dim, int per_class,
                                  double scale = 1.0,
                                  const std::string& name = "toy") {
  bgrpo::Dataset ds;
  ds.name = name;
  ds.dim = dim;
  ds.num_classes = num_classes;
  for (int c = 0; c < num_classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      bgrpo::UtteranceSample s;
      s.id = name + "_c" + std::to_string(c) + "_" + std::to_string(i);
      s.corpus = name;
      s.label = c;
      s.features.assign(static_cast<std::size_t>(dim), 0.0);
      s.features[static_cast<std::size_t>(c % dim)] =
          scale * (1.0 + 0.01 * i);
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

}  // namespace testutil

#endif  // BGRPO_TESTS_TEST_UTIL_HPP_
