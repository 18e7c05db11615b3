#include "bgrpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bgrpo/rng.hpp"

namespace bgrpo {

void check_distribution(std::span<const double> p, double tol,
                        const std::string& what) {
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument(what + ": non-finite probability");
    }
    if (v < 0.0 || v > 1.0) {
      throw std::invalid_argument(what + ": probability outside [0,1]");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > tol) {
    throw std::invalid_argument(what + ": probabilities sum to " +
                                std::to_string(sum));
  }
}

void check_params(const PolicyParams& p) {
  const auto d = static_cast<std::size_t>(p.dim);
  const auto h = static_cast<std::size_t>(p.hidden);
  const auto n = static_cast<std::size_t>(p.num_classes);
  if (p.dim < 1 || p.hidden < 1 || p.num_classes < 1) {
    throw std::invalid_argument("policy params: dimensions must be positive");
  }
  if (p.w1.size() != h * d || p.b1.size() != h || p.w2.size() != n * h ||
      p.b2.size() != n) {
    throw std::invalid_argument("policy params: tensor shape mismatch");
  }
  auto all_finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(),
                       [](double x) { return std::isfinite(x); });
  };
  if (!all_finite(p.w1) || !all_finite(p.b1) || !all_finite(p.w2) ||
      !all_finite(p.b2)) {
    throw std::invalid_argument("policy params: non-finite value");
  }
}

PolicyParams init_params(int dim, int hidden, int num_classes,
                         std::uint64_t seed) {
  if (dim < 1 || hidden < 1 || num_classes < 1) {
    throw std::invalid_argument("init_params: dimensions must be positive");
  }
  PolicyParams p;
  p.dim = dim;
  p.hidden = hidden;
  p.num_classes = num_classes;
  p.w1.resize(static_cast<std::size_t>(hidden) * dim);
  p.b1.assign(static_cast<std::size_t>(hidden), 0.0);
  p.w2.resize(static_cast<std::size_t>(num_classes) * hidden);
  p.b2.assign(static_cast<std::size_t>(num_classes), 0.0);

  rng::Prng gen(seed);
  const double s1 = std::sqrt(6.0 / (dim + hidden));
  for (double& w : p.w1) w = gen.uniform(-s1, s1);
  const double s2 = std::sqrt(6.0 / (hidden + num_classes));
  for (double& w : p.w2) w = gen.uniform(-s2, s2);
  return p;
}

void forward(const PolicyParams& params, std::span<const double> features,
             std::span<double> hidden_scratch, std::span<double> logits_out,
             std::span<double> probs_out) {
  const int d = params.dim;
  const int h = params.hidden;
  const int n = params.num_classes;
  if (static_cast<int>(features.size()) != d) {
    throw std::invalid_argument("forward: feature length " +
                                std::to_string(features.size()) +
                                " does not match dim " + std::to_string(d));
  }
  if (static_cast<int>(hidden_scratch.size()) != h ||
      static_cast<int>(logits_out.size()) != n ||
      static_cast<int>(probs_out.size()) != n) {
    throw std::invalid_argument("forward: output buffer size mismatch");
  }

  for (int j = 0; j < h; ++j) {
    double acc = params.b1[static_cast<std::size_t>(j)];
    const double* row = params.w1.data() + static_cast<std::size_t>(j) * d;
    for (int k = 0; k < d; ++k) acc += row[k] * features[static_cast<std::size_t>(k)];
    hidden_scratch[static_cast<std::size_t>(j)] = acc > 0.0 ? acc : 0.0;
  }
  for (int c = 0; c < n; ++c) {
    double acc = params.b2[static_cast<std::size_t>(c)];
    const double* row = params.w2.data() + static_cast<std::size_t>(c) * h;
    for (int j = 0; j < h; ++j) acc += row[j] * hidden_scratch[static_cast<std::size_t>(j)];
    logits_out[static_cast<std::size_t>(c)] = acc;
  }
  const double zmax =
      *std::max_element(logits_out.begin(), logits_out.end());
  double sum = 0.0;
  for (int c = 0; c < n; ++c) {
    const double e = std::exp(logits_out[static_cast<std::size_t>(c)] - zmax);
    probs_out[static_cast<std::size_t>(c)] = e;
    sum += e;
  }
  const double inv = 1.0 / sum;
  for (int c = 0; c < n; ++c) probs_out[static_cast<std::size_t>(c)] *= inv;
}

ForwardResult forward(const PolicyParams& params,
                      std::span<const double> features) {
  ForwardResult r;
  std::vector<double> hidden(static_cast<std::size_t>(params.hidden));
  r.logits.resize(static_cast<std::size_t>(params.num_classes));
  r.dist.probs.resize(static_cast<std::size_t>(params.num_classes));
  forward(params, features, hidden, r.logits, r.dist.probs);
  return r;
}

int argmax_lowest(std::span<const double> values) {
  if (values.empty()) {
    throw std::invalid_argument("argmax of empty vector");
  }
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    if (values[static_cast<std::size_t>(i)] > values[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

int predict(const PolicyParams& params, std::span<const double> features) {
  return argmax_lowest(forward(params, features).dist.probs);
}

PolicySnapshot snapshot(const PolicyParams& params, SnapshotRole role) {
  check_params(params);
  return PolicySnapshot(params, role);
}

double macro_f1(std::span<const int> predictions, std::span<const int> labels,
                int num_classes) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("macro_f1: prediction/label length mismatch");
  }
  std::vector<long> tp(static_cast<std::size_t>(num_classes), 0);
  std::vector<long> fp(static_cast<std::size_t>(num_classes), 0);
  std::vector<long> fn(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    const int yhat = predictions[i];
    if (y < 0 || y >= num_classes || yhat < 0 || yhat >= num_classes) {
      throw std::invalid_argument("macro_f1: class index out of range");
    }
    if (y == yhat) {
      ++tp[static_cast<std::size_t>(y)];
    } else {
      ++fn[static_cast<std::size_t>(y)];
      ++fp[static_cast<std::size_t>(yhat)];
    }
  }
  double sum = 0.0;
  int counted = 0;
  for (int c = 0; c < num_classes; ++c) {
    const auto cz = static_cast<std::size_t>(c);
    const long support = tp[cz] + fn[cz];
    const long predicted = tp[cz] + fp[cz];
    if (support == 0 && predicted == 0) continue;  // class never appears
    const long denom = 2 * tp[cz] + fp[cz] + fn[cz];
    sum += denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp[cz]) /
                                  static_cast<double>(denom);
    ++counted;
  }
  return counted == 0 ? 0.0 : sum / counted;
}

std::uint64_t params_hash(const PolicyParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  feed(&params.dim, sizeof(params.dim));
  feed(&params.hidden, sizeof(params.hidden));
  feed(&params.num_classes, sizeof(params.num_classes));
  for (const auto* v : {&params.w1, &params.b1, &params.w2, &params.b2}) {
    feed(v->data(), v->size() * sizeof(double));
  }
  return h;
}

namespace {

constexpr const char* kCheckpointMagic = "bgrpo-checkpoint";
constexpr int kCheckpointVersion = 1;

void write_tensor(std::ostream& out, const char* name,
                  const std::vector<double>& v) {
  out << name;
  char buf[40];
  for (double x : v) {
    std::snprintf(buf, sizeof(buf), " %a", x);
    out << buf;
  }
  out << '\n';
}

std::vector<double> read_tensor(std::istream& in, const std::string& name,
                                std::size_t count) {
  std::string tag;
  in >> tag;
  if (tag != name) {
    throw std::runtime_error("checkpoint: expected tensor '" + name +
                             "', found '" + tag + "'");
  }
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::string tok;
    if (!(in >> tok)) {
      throw std::runtime_error("checkpoint: truncated tensor '" + name + "'");
    }
    char* end = nullptr;
    v[i] = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0' || !std::isfinite(v[i])) {
      throw std::runtime_error("checkpoint: bad value in tensor '" + name +
                               "': " + tok);
    }
  }
  return v;
}

}  // namespace

void save_checkpoint(const PolicyParams& params,
                     const std::filesystem::path& path) {
  check_params(params);
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open checkpoint for writing: " +
                             path.string());
  }
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "dims " << params.dim << ' ' << params.hidden << ' '
      << params.num_classes << '\n';
  write_tensor(out, "w1", params.w1);
  write_tensor(out, "b1", params.b1);
  write_tensor(out, "w2", params.w2);
  write_tensor(out, "b2", params.b2);
  if (!out) {
    throw std::runtime_error("checkpoint write failed: " + path.string());
  }
}

PolicyParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open checkpoint: " + path.string());
  }
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kCheckpointMagic) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));
  }
  std::string tag;
  PolicyParams p;
  in >> tag >> p.dim >> p.hidden >> p.num_classes;
  if (tag != "dims" || !in || p.dim < 1 || p.hidden < 1 || p.num_classes < 1) {
    throw std::runtime_error("checkpoint: bad dims line in " + path.string());
  }
  const auto d = static_cast<std::size_t>(p.dim);
  const auto h = static_cast<std::size_t>(p.hidden);
  const auto n = static_cast<std::size_t>(p.num_classes);
  p.w1 = read_tensor(in, "w1", h * d);
  p.b1 = read_tensor(in, "b1", h);
  p.w2 = read_tensor(in, "w2", n * h);
  p.b2 = read_tensor(in, "b2", n);
  check_params(p);
  return p;
}

}  // namespace bgrpo
