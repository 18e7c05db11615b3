// Times the serial reference kernels against the OpenMP ones on the same
// random instance and verifies that both produce bitwise-identical results.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <iostream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "bgrpo/kernels.hpp"
#include "bgrpo/rng.hpp"
#include "bgrpo/synthetic.hpp"

namespace {

using namespace bgrpo;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start)
      .count();
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

bool same_bits(const GradientSet& a, const GradientSet& b) {
  return same_bits(a.w1, b.w1) && same_bits(a.b1, b.b1) &&
         same_bits(a.w2, b.w2) && same_bits(a.b2, b.b2);
}

struct Row {
  const char* kernel;
  double serial_ms;
  double parallel_ms;
  bool identical;
};

void print_row(const Row& r) {
  std::printf("%-18s %10.2f ms %10.2f ms   x%5.2f   bitwise %s\n", r.kernel,
              r.serial_ms, r.parallel_ms, r.serial_ms / r.parallel_ms,
              r.identical ? "match" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  int dim = 128, hidden = 256, classes = 6, batch = 256, iters = 20;
  std::uint64_t seed = 7;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string key = argv[i];
    const long v = std::atol(argv[i + 1]);
    if (key == "--dim") dim = static_cast<int>(v);
    else if (key == "--hidden") hidden = static_cast<int>(v);
    else if (key == "--classes") classes = static_cast<int>(v);
    else if (key == "--batch") batch = static_cast<int>(v);
    else if (key == "--iters") iters = static_cast<int>(v);
    else if (key == "--seed") seed = static_cast<std::uint64_t>(v);
    else {
      std::cerr << "error: unknown flag " << key << "\n";
      return 2;
    }
  }

  MixtureSpec spec;
  spec.num_classes = classes;
  spec.dim = dim;
  spec.per_class = (batch + classes - 1) / classes;
  spec.seed = seed;
  spec.name = "bench";
  const Dataset data = generate(spec);
  const PolicyParams params = init_params(dim, hidden, classes, seed);

  std::vector<int> indices;
  for (int i = 0; i < batch && i < data.size(); ++i) indices.push_back(i);

  BGRPOConfig cfg;
  cfg.batch_size = std::max<int>(2, static_cast<int>(indices.size()));
  rng::Prng gen(seed);
  std::vector<SampleRollout> rollouts;
  for (int i : indices) {
    const auto fr = forward(params, data.samples[static_cast<std::size_t>(i)].features);
    SampleRollout r;
    r.sample = i;
    r.action = static_cast<int>(gen.uniform_int(static_cast<std::uint64_t>(classes)));
    r.p_old = fr.dist[r.action] / gen.uniform(0.7, 1.4);
    if (r.p_old > 1.0) r.p_old = 1.0;
    r.p_ref = gen.uniform(0.05, 1.0);
    r.advantage = gen.uniform(-1.5, 1.5);
    rollouts.push_back(r);
  }

#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (built without OpenMP)\n");
#endif
  std::printf("dim %d hidden %d classes %d batch %zu iters %d\n\n", dim,
              hidden, classes, indices.size(), iters);
  std::printf("%-18s %13s %13s %8s\n", "kernel", "serial", "parallel", "speedup");

  // forward
  {
    std::vector<double> probs_s, probs_p;
    auto t0 = Clock::now();
    for (int it = 0; it < iters; ++it) {
      serial::forward_many(params, data, indices, probs_s);
    }
    const double t_serial = ms_since(t0) / iters;
    t0 = Clock::now();
    for (int it = 0; it < iters; ++it) {
      parallel::forward_many(params, data, indices, probs_p);
    }
    const double t_parallel = ms_since(t0) / iters;
    print_row({"forward", t_serial, t_parallel, same_bits(probs_s, probs_p)});
  }

  // cross-entropy loss + grads
  {
    auto t0 = Clock::now();
    std::pair<double, GradientSet> out_s, out_p;
    for (int it = 0; it < iters; ++it) {
      out_s = serial::ce_loss_and_grads(params, data, indices);
    }
    const double t_serial = ms_since(t0) / iters;
    t0 = Clock::now();
    for (int it = 0; it < iters; ++it) {
      out_p = parallel::ce_loss_and_grads(params, data, indices);
    }
    const double t_parallel = ms_since(t0) / iters;
    print_row({"ce grads", t_serial, t_parallel,
               out_s.first == out_p.first && same_bits(out_s.second, out_p.second)});
  }

  // refinement loss + grads
  {
    auto t0 = Clock::now();
    std::pair<double, GradientSet> out_s, out_p;
    for (int it = 0; it < iters; ++it) {
      out_s = serial::bgrpo_loss_and_grads(params, data, rollouts, cfg);
    }
    const double t_serial = ms_since(t0) / iters;
    t0 = Clock::now();
    for (int it = 0; it < iters; ++it) {
      out_p = parallel::bgrpo_loss_and_grads(params, data, rollouts, cfg);
    }
    const double t_parallel = ms_since(t0) / iters;
    print_row({"bgrpo grads", t_serial, t_parallel,
               out_s.first == out_p.first && same_bits(out_s.second, out_p.second)});
  }
  return 0;
}
