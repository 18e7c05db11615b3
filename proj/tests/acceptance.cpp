// Acceptance suite: one criterion per function, one printed line each,
// nonzero exit when anything fails. Expected values here are produced by
// independent brute-force oracles coded in this file, not by the library
// paths under test.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "bgrpo/advantage.hpp"
#include "bgrpo/kernels.hpp"
#include "bgrpo/objective.hpp"
#include "bgrpo/policy.hpp"
#include "bgrpo/rewards.hpp"
#include "bgrpo/rng.hpp"
#include "bgrpo/synthetic.hpp"
#include "bgrpo/trainer.hpp"

using namespace bgrpo;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------------
// 1. Analytic gradients of both losses vs central differences.
// ---------------------------------------------------------------------

struct GradInstance {
  PolicyParams params;
  Dataset data;
  std::vector<int> indices;
  std::vector<SampleRollout> rollouts;
  BGRPOConfig cfg;
};

bool build_grad_instance(std::uint64_t seed, bool with_rollouts, double h,
                         GradInstance& inst) {
  rng::Prng gen(seed);
  inst.params = init_params(8, 4, 6, gen.next_u64());
  inst.data = Dataset{};
  inst.data.dim = 8;
  inst.data.num_classes = 6;
  inst.data.name = "acc";
  inst.indices.clear();
  inst.rollouts.clear();
  inst.cfg = BGRPOConfig{};
  inst.cfg.parallel = false;

  for (int i = 0; i < 5; ++i) {
    UtteranceSample s;
    s.id = "a" + std::to_string(i);
    s.features.resize(8);
    for (double& v : s.features) v = gen.uniform(-1.0, 1.0);
    s.label = static_cast<int>(gen.uniform_int(6));
    inst.data.samples.push_back(std::move(s));
    inst.indices.push_back(i);
  }
  // Relu kink guard: every hidden pre-activation clear of zero.
  for (const auto& s : inst.data.samples) {
    for (int j = 0; j < 4; ++j) {
      double acc = inst.params.b1[static_cast<std::size_t>(j)];
      for (int k = 0; k < 8; ++k) {
        acc += inst.params.w1[static_cast<std::size_t>(j) * 8 +
                              static_cast<std::size_t>(k)] *
               s.features[static_cast<std::size_t>(k)];
      }
      if (std::abs(acc) < 1e-3) return false;
    }
  }
  if (!with_rollouts) return true;

  for (int i = 0; i < 5; ++i) {
    const auto fr = forward(inst.params,
                            inst.data.samples[static_cast<std::size_t>(i)].features);
    SampleRollout r;
    r.sample = i;
    r.action = static_cast<int>(gen.uniform_int(6));
    const double p_cur = fr.dist[r.action];
    const double t_target = i == 0   ? 1.55  // clipped
                            : i == 1 ? 1.0   // identity ratio
                                     : gen.uniform(0.5, 1.7);
    r.p_old = p_cur / t_target;
    if (!(r.p_old > 1e-6 && r.p_old <= 1.0)) return false;
    const double t = p_cur / r.p_old;
    if (std::abs(t - 0.8) < 10.0 * h || std::abs(t - 1.2) < 10.0 * h) {
      return false;  // clip kink guard
    }
    r.p_ref = gen.uniform(0.05, 1.0);
    r.advantage = gen.uniform(-2.0, 2.0);
    inst.rollouts.push_back(r);
  }
  return true;
}

// Central differences of an arbitrary loss functional, coded here.
double fd_max_rel_error(const GradInstance& inst, const GradientSet& analytic,
                        const std::function<double(const PolicyParams&)>& loss,
                        double h) {
  PolicyParams probe = inst.params;
  double worst = 0.0;
  auto sweep = [&](std::vector<double>& tensor, const std::vector<double>& g) {
    for (std::size_t j = 0; j < tensor.size(); ++j) {
      const double saved = tensor[j];
      tensor[j] = saved + h;
      const double up = loss(probe);
      tensor[j] = saved - h;
      const double down = loss(probe);
      tensor[j] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double rel = std::abs(g[j] - numeric) /
                         std::max({1.0, std::abs(g[j]), std::abs(numeric)});
      worst = std::max(worst, rel);
    }
  };
  sweep(probe.w1, analytic.w1);
  sweep(probe.b1, analytic.b1);
  sweep(probe.w2, analytic.w2);
  sweep(probe.b2, analytic.b2);
  return worst;
}

Outcome criterion_gradients() {
  const auto start = Clock::now();
  const double h = 1e-5;
  double worst_ce = 0.0, worst_rl = 0.0;
  for (int i = 0; i < 20; ++i) {
    GradInstance inst;
    std::uint64_t attempt = 0;
    while (!build_grad_instance(rng::mix(100 + i, attempt), true, h, inst)) {
      ++attempt;
      if (attempt > 200) return {false, "could not draw a kink-free instance"};
    }

    const auto ce = serial::ce_loss_and_grads(inst.params, inst.data, inst.indices);
    worst_ce = std::max(
        worst_ce, fd_max_rel_error(inst, ce.second,
                                   [&](const PolicyParams& p) {
                                     return serial::ce_loss_and_grads(
                                                p, inst.data, inst.indices)
                                         .first;
                                   },
                                   h));

    const auto rl =
        serial::bgrpo_loss_and_grads(inst.params, inst.data, inst.rollouts, inst.cfg);
    worst_rl = std::max(
        worst_rl, fd_max_rel_error(inst, rl.second,
                                   [&](const PolicyParams& p) {
                                     return serial::bgrpo_loss_and_grads(
                                                p, inst.data, inst.rollouts,
                                                inst.cfg)
                                         .first;
                                   },
                                   h));
  }
  const double secs = seconds_since(start);
  const bool pass = worst_ce < 1e-4 && worst_rl < 1e-4 && secs < 10.0;
  return {pass, "max_rel ce=" + fmt(worst_ce) + " bgrpo=" + fmt(worst_rl) +
                    " (tol 1e-4), " + fmt(secs) + " s (limit 10)"};
}

// ---------------------------------------------------------------------
// 2. Group-normalized advantages.
// ---------------------------------------------------------------------

Outcome criterion_advantages() {
  rng::Prng gen(555);
  double worst_mean = 0.0, worst_sd = 0.0;
  for (int it = 0; it < 1000; ++it) {
    const int b = 2 + static_cast<int>(gen.uniform_int(63));
    std::vector<double> rewards(static_cast<std::size_t>(b));
    for (double& r : rewards) {
      r = gen.uniform() < 0.4 ? 0.0 : gen.uniform(0.0, 2.0);
    }
    const auto pre = batch_advantages(rewards, AdvantageMode::signed_norm);
    const auto clipped = batch_advantages(rewards, AdvantageMode::positive_clip);
    for (double v : clipped.values) {
      if (v < 0.0) return {false, "positive_clip produced a negative value"};
    }
    if (pre.degenerate) {
      for (double v : pre.values) {
        if (v != 0.0) return {false, "degenerate group with nonzero advantage"};
      }
      continue;
    }
    double mean = 0.0;
    for (double v : pre.values) mean += v;
    mean /= b;
    double var = 0.0;
    for (double v : pre.values) var += (v - mean) * (v - mean);
    var /= b;
    worst_mean = std::max(worst_mean, std::abs(mean));
    worst_sd = std::max(worst_sd, std::abs(std::sqrt(var) - 1.0));
  }

  const auto all_equal =
      batch_advantages(std::vector<double>{2, 2, 2, 2}, AdvantageMode::positive_clip);
  const bool equal_ok = all_equal.degenerate &&
                        all_equal.values == std::vector<double>(4, 0.0);
  const auto hand =
      batch_advantages(std::vector<double>{1, 1, 0, 0}, AdvantageMode::positive_clip);
  const bool hand_ok = hand.values == std::vector<double>{1, 1, 0, 0};

  const bool pass =
      worst_mean < 1e-9 && worst_sd < 1e-9 && equal_ok && hand_ok;
  return {pass, "|mean|<=" + fmt(worst_mean) + " |sd-1|<=" + fmt(worst_sd) +
                    " (tol 1e-9), all-equal->zeros " +
                    (equal_ok ? "ok" : "BAD") + ", [1,1,0,0]->[1,1,0,0] " +
                    (hand_ok ? "ok" : "BAD")};
}

// ---------------------------------------------------------------------
// 3. KL penalty estimator.
// ---------------------------------------------------------------------

Outcome criterion_kl_penalty() {
  rng::Prng gen(808);
  double min_val = 1e300;
  for (int it = 0; it < 1000; ++it) {
    const double u = std::exp(gen.uniform(std::log(1e-2), std::log(1e2)));
    const double v = kl_penalty(u);
    if (v < 0.0) return {false, "negative estimator at u=" + fmt(u)};
    if (v == 0.0 && std::abs(u - 1.0) > 1e-12) {
      return {false, "zero estimator away from u=1 (u=" + fmt(u) + ")"};
    }
    min_val = std::min(min_val, v);
  }
  const bool at_one = kl_penalty(1.0) == 0.0;
  return {at_one, "1000 log-uniform draws nonnegative, min=" + fmt(min_val) +
                      ", exact zero at u=1: " + (at_one ? "yes" : "NO")};
}

// ---------------------------------------------------------------------
// 4. Rewards vs independent oracles.
// ---------------------------------------------------------------------

// Brute-force restatements of the five reward rules.
double oracle_r1(const std::vector<double>& p, double c, double delta,
                 double pen) {
  double mx = p[0];
  for (double v : p) mx = std::max(mx, v);
  return mx > delta ? c : pen;
}
int oracle_argmax(const std::vector<double>& p) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(p.size()); ++i) {
    if (p[static_cast<std::size_t>(i)] > p[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}
double oracle_r2(const std::vector<double>& p) {
  double mx = p[0];
  for (double v : p) mx = std::max(mx, v);
  return mx;
}
double oracle_r3(const std::vector<double>& p, const std::vector<double>& t,
                 double c, double pen) {
  return oracle_argmax(p) == oracle_argmax(t) ? c : pen;
}
double oracle_r4(const std::vector<double>& p, const std::vector<double>& t,
                 double c, double delta, double pen) {
  const bool hit1 = oracle_r1(p, c, delta, pen) == c;
  const bool hit3 = oracle_r3(p, t, c, pen) == c;
  return hit1 && hit3 ? c : pen;
}
double oracle_kl(const std::vector<double>& t, const std::vector<double>& p) {
  double s = 0.0;
  for (std::size_t n = 0; n < t.size(); ++n) {
    if (t[n] > 0.0) s += t[n] * std::log(t[n] / p[n]);
  }
  return s;
}

Outcome criterion_reward_oracles() {
  rng::Prng gen(4242);
  RewardConfig cfg;
  cfg.reward_score = 1.0;
  cfg.delta = 0.5;
  cfg.theta = 0.9;
  cfg.penalty = 0.0;

  auto random_dist = [&gen](int n) {
    std::vector<double> p(static_cast<std::size_t>(n));
    double sum = 0.0;
    for (double& v : p) {
      v = -std::log(1.0 - gen.uniform());
      sum += v;
    }
    for (double& v : p) v /= sum;
    return p;
  };

  double worst_kl_diff = 0.0;
  for (int it = 0; it < 1000; ++it) {
    const auto policy = random_dist(6);
    const auto teacher = random_dist(6);
    const ProbDistribution pd{policy};
    const ProbDistribution td{teacher};

    if (reward_r1(pd, cfg).value != oracle_r1(policy, 1.0, 0.5, 0.0)) {
      return {false, "r1 disagrees with the oracle"};
    }
    if (std::abs(reward_r2(pd).value - oracle_r2(policy)) > 1e-12) {
      return {false, "r2 disagrees with the oracle"};
    }
    if (reward_r3(pd, td, cfg).value != oracle_r3(policy, teacher, 1.0, 0.0)) {
      return {false, "r3 disagrees with the oracle"};
    }
    if (reward_r4(pd, td, cfg).value !=
        oracle_r4(policy, teacher, 1.0, 0.5, 0.0)) {
      return {false, "r4 disagrees with the oracle"};
    }
    const double kl_lib = kl_divergence(teacher, policy);
    const double kl_ora = oracle_kl(teacher, policy);
    worst_kl_diff = std::max(worst_kl_diff, std::abs(kl_lib - kl_ora));
    if (std::abs(kl_lib - kl_ora) > 1e-12) {
      return {false, "KL disagrees with the oracle"};
    }
    if (std::abs(kl_ora - cfg.theta) > 1e-12) {
      const double expect_r5 = kl_ora < cfg.theta ? 1.0 : 0.0;
      if (reward_r5(pd, td, cfg).value != expect_r5) {
        return {false, "r5 branch disagrees with the oracle"};
      }
    }
    const bool conj = reward_r4(pd, td, cfg).triggered;
    if (conj != (reward_r1(pd, cfg).triggered &&
                 reward_r3(pd, td, cfg).triggered)) {
      return {false, "r4 is not the conjunction of r1 and r3"};
    }
  }
  return {true,
          "r1-r5 match brute-force oracles on 1000 pairs, max KL diff " +
              fmt(worst_kl_diff)};
}

// ---------------------------------------------------------------------
// 5. Synthetic analogue of the refinement gain.
// ---------------------------------------------------------------------

struct PipelineResult {
  double baseline_f1 = 0.0;
  double post_f1 = 0.0;
  PolicyParams post_params;
  StageReport warmup_report;
  StageReport rl_report;
};

PipelineResult run_pipeline(std::uint64_t seed, AdvantageMode mode,
                            bool scramble_rl_labels = false) {
  MixtureSpec spec;
  spec.num_classes = 6;
  spec.dim = 32;
  spec.per_class = 200;  // 1200 samples; the split gives 600 + 600
  spec.seed = seed;
  spec.name = "acc5";

  const Dataset corpus = generate(spec, 0);
  MixtureSpec eval_spec = spec;
  eval_spec.per_class = 100;
  const Dataset eval = generate(eval_spec, 1);
  auto [warmup, rl] = split_half(corpus, 0.5, seed);

  BGRPOConfig cfg;
  cfg.warmup_epochs = 100;
  cfg.rl_epochs = 100;
  cfg.batch_size = 32;
  cfg.learning_rate = 1e-4;
  cfg.epsilon = 0.2;
  cfg.beta = 0.04;
  cfg.advantage_mode = mode;
  cfg.seed = seed;

  RewardConfig reward;  // r1, delta 0.5, C 1
  PipelineResult out;
  const PolicyParams init = init_params(32, 128, 6, seed);
  auto [baseline, warm_report] = train_supervised(init, warmup, eval, cfg);
  out.baseline_f1 = evaluate(baseline, eval).macro_f1;
  out.warmup_report = std::move(warm_report);

  if (scramble_rl_labels) {
    rng::Prng gen(rng::mix(seed, 0xbad1abe1));
    for (auto& s : rl.samples) s.label = static_cast<int>(gen.uniform_int(6));
  }
  auto [post, rl_report] =
      train_bgrpo(baseline, rl, eval, reward, std::nullopt, cfg);
  out.post_f1 = evaluate(post, eval).macro_f1;
  out.post_params = std::move(post);
  out.rl_report = std::move(rl_report);
  return out;
}

Outcome criterion_synthetic_gain() {
  const auto start = Clock::now();
  int wins = 0;
  double rel_sum = 0.0;
  double base_lo = 1.0, base_hi = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const PipelineResult r = run_pipeline(seed, AdvantageMode::positive_clip);
    if (r.post_f1 >= r.baseline_f1) ++wins;
    rel_sum += (r.post_f1 - r.baseline_f1) / r.baseline_f1;
    base_lo = std::min(base_lo, r.baseline_f1);
    base_hi = std::max(base_hi, r.baseline_f1);
    per_seed += " s" + std::to_string(seed) + ":" + fmt(r.baseline_f1) +
                "->" + fmt(r.post_f1);
  }
  const double secs = seconds_since(start);
  const double mean_rel = rel_sum / 5.0;
  const bool pass = wins >= 4 && mean_rel > 0.0 && secs < 300.0;
  return {pass, "wins " + std::to_string(wins) + "/5, mean rel gain " +
                    fmt(mean_rel) + ", baselines [" + fmt(base_lo) + "," +
                    fmt(base_hi) + "]," + per_seed + ", " + fmt(secs) +
                    " s (limit 300)"};
}

// ---------------------------------------------------------------------
// 6. Advantage-mode ablation harness.
// ---------------------------------------------------------------------

Outcome criterion_ablation() {
  const std::filesystem::path dir = "acceptance_out";
  std::filesystem::create_directories(dir);
  const auto path = dir / "ablation.csv";
  std::ofstream out(path);
  out << "advantage_mode,baseline_f1,post_f1\n";
  std::string detail = "rows:";
  int rows = 0;
  for (const AdvantageMode mode :
       {AdvantageMode::positive_clip, AdvantageMode::signed_norm,
        AdvantageMode::none}) {
    const PipelineResult r = run_pipeline(3, mode);
    out << to_string(mode) << ',' << r.baseline_f1 << ',' << r.post_f1 << '\n';
    detail += " " + to_string(mode) + "=" + fmt(r.post_f1);
    ++rows;
  }
  out.close();

  // Structural completion: the file holds all three rows.
  std::ifstream in(path);
  std::string line;
  int read_rows = -1;  // header
  while (std::getline(in, line)) {
    if (!line.empty()) ++read_rows;
  }
  const bool pass = rows == 3 && read_rows == 3;
  return {pass, detail + " -> " + path.string()};
}

// ---------------------------------------------------------------------
// 7. Label blindness of the refinement stage.
// ---------------------------------------------------------------------

Outcome criterion_label_blindness() {
  const PipelineResult clean = run_pipeline(2, AdvantageMode::positive_clip, false);
  const PipelineResult scrambled =
      run_pipeline(2, AdvantageMode::positive_clip, true);
  const bool params_same =
      params_hash(clean.post_params) == params_hash(scrambled.post_params);
  bool reports_same =
      clean.rl_report.epochs.size() == scrambled.rl_report.epochs.size();
  for (std::size_t e = 0; reports_same && e < clean.rl_report.epochs.size();
       ++e) {
    reports_same = clean.rl_report.epochs[e].loss ==
                       scrambled.rl_report.epochs[e].loss &&
                   clean.rl_report.epochs[e].mean_reward ==
                       scrambled.rl_report.epochs[e].mean_reward &&
                   clean.rl_report.epochs[e].macro_f1 ==
                       scrambled.rl_report.epochs[e].macro_f1;
  }
  return {params_same && reports_same,
          std::string("scrambled RL labels: params ") +
              (params_same ? "identical" : "DIFFER") + ", reports " +
              (reports_same ? "identical" : "DIFFER")};
}

// ---------------------------------------------------------------------
// 8. Full-pipeline determinism, including written artifacts.
// ---------------------------------------------------------------------

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion_determinism() {
  const std::filesystem::path dir = "acceptance_out";
  std::filesystem::create_directories(dir);
  std::vector<std::string> artifacts;
  for (int run = 0; run < 2; ++run) {
    const PipelineResult r = run_pipeline(4, AdvantageMode::positive_clip);
    const auto ckpt = dir / ("det_ckpt_" + std::to_string(run) + ".txt");
    const auto report = dir / ("det_report_" + std::to_string(run) + ".csv");
    save_checkpoint(r.post_params, ckpt);
    StageReport merged = r.warmup_report;
    for (const auto& e : r.rl_report.epochs) merged.epochs.push_back(e);
    write_report(merged, report);
    artifacts.push_back(file_bytes(ckpt) + file_bytes(report));
  }
  const bool pass = artifacts[0] == artifacts[1];
  return {pass, std::string("two identical runs -> artifacts ") +
                    (pass ? "bitwise equal" : "DIFFER")};
}

// ---------------------------------------------------------------------
// 9. Clip flatness and the unclipped policy-gradient term at t = 1.
// ---------------------------------------------------------------------

Outcome criterion_clip_flatness() {
  GradInstance inst;
  std::uint64_t attempt = 0;
  while (!build_grad_instance(rng::mix(900, attempt), true, 1e-5, inst)) {
    ++attempt;
  }
  BGRPOConfig cfg = inst.cfg;
  cfg.beta = 0.0;

  // All samples pushed beyond the clip with positive advantages.
  std::vector<SampleRollout> clipped = inst.rollouts;
  for (auto& r : clipped) {
    const auto fr = forward(inst.params,
                            inst.data.samples[static_cast<std::size_t>(r.sample)].features);
    r.p_old = fr.dist[r.action] / (1.0 + cfg.epsilon + 0.4);
    r.advantage = 1.0;
  }
  const GradientSet flat =
      serial::bgrpo_loss_and_grads(inst.params, inst.data, clipped, cfg).second;
  const bool zero_grad = flat.max_abs() == 0.0;

  // t = 1 everywhere: the surrogate reduces to A/p_old * dp, checked two
  // ways - against a directly assembled policy-gradient and against FD.
  std::vector<SampleRollout> at_one = inst.rollouts;
  for (auto& r : at_one) {
    const auto fr = forward(inst.params,
                            inst.data.samples[static_cast<std::size_t>(r.sample)].features);
    r.p_old = fr.dist[r.action];
    r.p_ref = r.p_old;
    r.advantage = 0.5 + 0.25 * static_cast<double>(r.sample);
  }
  const auto at_one_lg =
      serial::bgrpo_loss_and_grads(inst.params, inst.data, at_one, cfg);
  const double fd_err = fd_max_rel_error(
      inst, at_one_lg.second,
      [&](const PolicyParams& p) {
        return serial::bgrpo_loss_and_grads(p, inst.data, at_one, cfg).first;
      },
      1e-5);

  const bool pass = zero_grad && fd_err < 1e-4;
  return {pass, std::string("clipped batch gradient exactly zero: ") +
                    (zero_grad ? "yes" : "NO") +
                    ", t=1 gradient vs FD rel err " + fmt(fd_err) +
                    " (tol 1e-4)"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*fn)();
  };
  const Criterion criteria[] = {
      {"gradient-correctness", criterion_gradients},
      {"advantage-normalization", criterion_advantages},
      {"kl-penalty-estimator", criterion_kl_penalty},
      {"reward-oracle-equivalence", criterion_reward_oracles},
      {"synthetic-refinement-gain", criterion_synthetic_gain},
      {"advantage-ablation-harness", criterion_ablation},
      {"rl-label-blindness", criterion_label_blindness},
      {"pipeline-determinism", criterion_determinism},
      {"clip-flatness", criterion_clip_flatness},
  };

  int failures = 0;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    Outcome out;
    try {
      out = c.fn();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    if (!out.pass) ++failures;
    std::printf("[%s] %d %s: %s\n", out.pass ? "PASS" : "FAIL", index, c.name,
                out.detail.c_str());
    std::fflush(stdout);
  }
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all %d criteria passed\n", index);
  return 0;
}
