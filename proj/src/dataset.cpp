#include "bgrpo/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "bgrpo/rng.hpp"

namespace bgrpo {

namespace {

[[noreturn]] void parse_fail(const std::filesystem::path& path, int line,
                             const std::string& msg) {
  throw std::runtime_error(path.string() + ":" + std::to_string(line) +
                           ": " + msg);
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

double parse_double(const std::string& tok, bool& ok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  ok = end != tok.c_str() && *end == '\0';
  return v;
}

// Extracts `key=` fields from a `# key=value ...` header line.
bool header_int(const std::string& header, const std::string& key, int& out) {
  const std::size_t pos = header.find(key + "=");
  if (pos == std::string::npos) return false;
  const std::string rest = header.substr(pos + key.size() + 1);
  bool ok = false;
  std::istringstream iss(rest);
  std::string tok;
  if (iss >> tok) {
    std::size_t idx = 0;
    try {
      out = std::stoi(tok, &idx);
      ok = idx == tok.size();
    } catch (...) {
      ok = false;
    }
  }
  return ok;
}

std::string header_name(const std::string& header) {
  const std::size_t pos = header.find("name=");
  if (pos == std::string::npos) return "";
  return header.substr(pos + 5);
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

bool Dataset::fully_labeled() const {
  return std::all_of(samples.begin(), samples.end(),
                     [](const UtteranceSample& s) { return s.label.has_value(); });
}

void Dataset::validate() const {
  if (dim < 1 || num_classes < 1) {
    throw std::invalid_argument("dataset '" + name + "': bad dimensions");
  }
  std::unordered_set<std::string> seen;
  for (const auto& s : samples) {
    if (static_cast<int>(s.features.size()) != dim) {
      throw std::invalid_argument("dataset '" + name + "': sample '" + s.id +
                                  "' has wrong feature width");
    }
    for (double v : s.features) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("dataset '" + name + "': sample '" + s.id +
                                    "' has non-finite feature");
      }
    }
    if (s.label && (*s.label < 0 || *s.label >= num_classes)) {
      throw std::invalid_argument("dataset '" + name + "': sample '" + s.id +
                                  "' label out of range");
    }
    if (!seen.insert(s.id).second) {
      throw std::invalid_argument("dataset '" + name + "': duplicate id '" +
                                  s.id + "'");
    }
  }
}

Dataset strip_labels(const Dataset& dataset) {
  Dataset out = dataset;
  for (auto& s : out.samples) s.label.reset();
  return out;
}

Dataset load_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open feature file: " + path.string());
  }
  std::string line;
  int lineno = 0;

  // Header.
  Dataset ds;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] != '#') parse_fail(path, lineno, "missing '#' header line");
    if (!header_int(line, "dim", ds.dim)) {
      parse_fail(path, lineno, "malformed header: missing dim=<D>");
    }
    if (!header_int(line, "classes", ds.num_classes)) {
      parse_fail(path, lineno, "malformed header: missing classes=<N>");
    }
    if (ds.dim < 1 || ds.num_classes < 1) {
      parse_fail(path, lineno, "malformed header: nonpositive dim or classes");
    }
    ds.name = header_name(line);
    have_header = true;
    break;
  }
  if (!have_header) {
    throw std::runtime_error(path.string() + ": empty file, no header");
  }

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3) {
      parse_fail(path, lineno,
                 "expected <id>\\t<label>\\t<features>, got " +
                     std::to_string(fields.size()) + " fields");
    }
    UtteranceSample s;
    s.id = fields[0];
    s.corpus = ds.name;
    if (s.id.empty()) parse_fail(path, lineno, "empty sample id");
    if (fields[1] != "-") {
      bool ok = false;
      const double lv = parse_double(fields[1], ok);
      const int label = static_cast<int>(lv);
      if (!ok || lv != label) parse_fail(path, lineno, "bad label field");
      if (label < 0 || label >= ds.num_classes) {
        parse_fail(path, lineno, "label " + std::to_string(label) +
                                     " out of range for classes=" +
                                     std::to_string(ds.num_classes));
      }
      s.label = label;
    }
    std::istringstream iss(fields[2]);
    std::string tok;
    while (iss >> tok) {
      bool ok = false;
      const double v = parse_double(tok, ok);
      if (!ok) parse_fail(path, lineno, "bad feature value: " + tok);
      if (!std::isfinite(v)) {
        parse_fail(path, lineno, "non-finite feature value: " + tok);
      }
      s.features.push_back(v);
    }
    if (static_cast<int>(s.features.size()) != ds.dim) {
      parse_fail(path, lineno,
                 "row has " + std::to_string(s.features.size()) +
                     " features, expected " + std::to_string(ds.dim));
    }
    ds.samples.push_back(std::move(s));
  }
  try {
    ds.validate();
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  return ds;
}

void save_feature_file(const Dataset& dataset,
                       const std::filesystem::path& path) {
  dataset.validate();
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open feature file for writing: " +
                             path.string());
  }
  out << "# dim=" << dataset.dim << " classes=" << dataset.num_classes
      << " name=" << dataset.name << '\n';
  for (const auto& s : dataset.samples) {
    out << s.id << '\t';
    if (s.label) {
      out << *s.label;
    } else {
      out << '-';
    }
    out << '\t';
    for (std::size_t k = 0; k < s.features.size(); ++k) {
      if (k) out << ' ';
      out << fmt_double(s.features[k]);
    }
    out << '\n';
  }
  if (!out) {
    throw std::runtime_error("feature file write failed: " + path.string());
  }
}

std::pair<Dataset, Dataset> split_half(const Dataset& dataset, double fraction,
                                       std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("split fraction must lie in (0,1)");
  }
  if (dataset.samples.empty()) {
    throw std::invalid_argument("cannot split an empty dataset");
  }

  // Strata keyed by label; unlabeled samples share one stratum.
  std::map<int, std::vector<int>> strata;
  for (int i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset.samples[static_cast<std::size_t>(i)];
    strata[s.label ? *s.label : -1].push_back(i);
  }
  for (auto& [key, idx] : strata) {
    rng::Prng gen(rng::mix(seed, static_cast<std::uint64_t>(key + 1)));
    gen.shuffle(idx);
  }

  const long target =
      std::lround(fraction * static_cast<double>(dataset.size()));

  // Largest-remainder apportionment of `target` across strata.
  struct Share {
    int key;
    long take;
    double remainder;
    std::size_t count;
  };
  std::vector<Share> shares;
  long assigned = 0;
  for (const auto& [key, idx] : strata) {
    const double exact = fraction * static_cast<double>(idx.size());
    const long base = static_cast<long>(std::floor(exact));
    shares.push_back({key, base, exact - static_cast<double>(base), idx.size()});
    assigned += base;
  }
  std::stable_sort(shares.begin(), shares.end(),
                   [](const Share& a, const Share& b) {
                     if (a.remainder != b.remainder) {
                       return a.remainder > b.remainder;
                     }
                     return a.key < b.key;
                   });
  long deficit = target - assigned;
  for (auto& sh : shares) {
    if (deficit <= 0) break;
    if (sh.take < static_cast<long>(sh.count)) {
      ++sh.take;
      --deficit;
    }
  }

  std::vector<bool> in_first(static_cast<std::size_t>(dataset.size()), false);
  for (const auto& sh : shares) {
    const auto& idx = strata.at(sh.key);
    for (long k = 0; k < sh.take; ++k) {
      in_first[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])] = true;
    }
  }

  Dataset first, second;
  first.name = second.name = dataset.name;
  first.dim = second.dim = dataset.dim;
  first.num_classes = second.num_classes = dataset.num_classes;
  for (int i = 0; i < dataset.size(); ++i) {
    auto& dst = in_first[static_cast<std::size_t>(i)] ? first : second;
    dst.samples.push_back(dataset.samples[static_cast<std::size_t>(i)]);
  }
  return {std::move(first), std::move(second)};
}

std::vector<std::vector<int>> make_batches(const Dataset& dataset,
                                           int batch_size, std::uint64_t seed,
                                           int epoch) {
  if (batch_size < 2) {
    throw std::invalid_argument(
        "batch size must be >= 2 (group statistics need two members)");
  }
  std::vector<int> order(static_cast<std::size_t>(dataset.size()));
  for (int i = 0; i < dataset.size(); ++i) order[static_cast<std::size_t>(i)] = i;
  rng::Prng gen(rng::mix(seed, static_cast<std::uint64_t>(epoch)));
  gen.shuffle(order);

  std::vector<std::vector<int>> batches;
  for (std::size_t start = 0; start < order.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end =
        std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    if (end - start < 2) break;  // a group of one has no usable statistics
    batches.emplace_back(order.begin() + static_cast<long>(start),
                         order.begin() + static_cast<long>(end));
  }
  return batches;
}

const ProbDistribution& TeacherPredictionTable::lookup(
    const std::string& id) const {
  const auto it = by_id.find(id);
  if (it == by_id.end()) {
    throw std::out_of_range("teacher table has no prediction for id '" + id +
                            "'");
  }
  return it->second;
}

TeacherPredictionTable load_teacher_predictions(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open teacher prediction file: " +
                             path.string());
  }
  TeacherPredictionTable table;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (!have_header) {
      if (line[0] != '#' || !header_int(line, "classes", table.num_classes) ||
          table.num_classes < 1) {
        parse_fail(path, lineno, "malformed header: expected # classes=<N>");
      }
      have_header = true;
      continue;
    }
    if (line[0] == '#') continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 2 || fields[0].empty()) {
      parse_fail(path, lineno, "expected <id>\\t<p1> ... <pN>");
    }
    const std::string& id = fields[0];
    std::vector<double> probs;
    std::istringstream iss(fields[1]);
    std::string tok;
    double sum = 0.0;
    while (iss >> tok) {
      bool ok = false;
      const double v = parse_double(tok, ok);
      if (!ok || !std::isfinite(v)) {
        parse_fail(path, lineno, "bad probability: " + tok);
      }
      if (v < 0.0) {
        parse_fail(path, lineno,
                   "negative probability for id '" + id + "': " + tok);
      }
      probs.push_back(v);
      sum += v;
    }
    if (static_cast<int>(probs.size()) != table.num_classes) {
      parse_fail(path, lineno,
                 "row for id '" + id + "' has " +
                     std::to_string(probs.size()) + " entries, expected " +
                     std::to_string(table.num_classes));
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      parse_fail(path, lineno, "row for id '" + id + "' sums to " +
                                   fmt_double(sum) + ", outside 1 +/- 1e-6");
    }
    for (double& v : probs) v /= sum;
    if (!table.by_id.emplace(id, ProbDistribution{std::move(probs)}).second) {
      parse_fail(path, lineno, "duplicate id '" + id + "'");
    }
  }
  if (!have_header) {
    throw std::runtime_error(path.string() + ": empty file, no header");
  }
  return table;
}

void save_teacher_predictions(const TeacherPredictionTable& table,
                              const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open teacher file for writing: " +
                             path.string());
  }
  out << "# classes=" << table.num_classes << '\n';
  // Sorted ids so the file is reproducible.
  std::vector<const std::string*> ids;
  ids.reserve(table.by_id.size());
  for (const auto& [id, dist] : table.by_id) ids.push_back(&id);
  std::sort(ids.begin(), ids.end(),
            [](const std::string* a, const std::string* b) { return *a < *b; });
  for (const auto* id : ids) {
    out << *id << '\t';
    const auto& probs = table.by_id.at(*id).probs;
    for (std::size_t k = 0; k < probs.size(); ++k) {
      if (k) out << ' ';
      out << fmt_double(probs[k]);
    }
    out << '\n';
  }
  if (!out) {
    throw std::runtime_error("teacher file write failed: " + path.string());
  }
}

}  // namespace bgrpo
