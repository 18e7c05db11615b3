#ifndef BGRPO_POLICY_HPP_
#define BGRPO_POLICY_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace bgrpo {

// Per-class likelihood vector p(n|q). Entries nonnegative, sum 1.
struct ProbDistribution {
  std::vector<double> probs;

  int size() const { return static_cast<int>(probs.size()); }
  double operator[](int n) const { return probs[static_cast<std::size_t>(n)]; }
};

// Throws std::invalid_argument unless p is finite, entries in [0,1] and the
// sum is within `tol` of 1. `what` names the offending object in the message.
void check_distribution(std::span<const double> p, double tol,
                        const std::string& what);

// Weights of the two-layer softmax policy. Row-major storage:
// w1 is hidden x dim (maps dim -> hidden), w2 is num_classes x hidden.
struct PolicyParams {
  int dim = 0;
  int hidden = 0;
  int num_classes = 0;
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  std::vector<double> b2;

  std::size_t count() const {
    return w1.size() + b1.size() + w2.size() + b2.size();
  }
};

// Shape and finiteness check; throws std::invalid_argument on violation.
void check_params(const PolicyParams& p);

enum class SnapshotRole { old_policy, reference };

// Frozen deep copy of the policy at a point in time.
class PolicySnapshot {
 public:
  PolicySnapshot(PolicyParams params, SnapshotRole role)
      : params_(std::move(params)), role_(role) {}

  const PolicyParams& params() const { return params_; }
  SnapshotRole role() const { return role_; }

 private:
  PolicyParams params_;
  SnapshotRole role_;
};

// Uniform [-s, s] weights with s = sqrt(6 / (fan_in + fan_out)) per matrix,
// zero biases. Deterministic per seed.
PolicyParams init_params(int dim, int hidden, int num_classes,
                         std::uint64_t seed);

// logits = w2 * relu(w1 * x + b1) + b2; probs = softmax(logits) with
// max-subtraction. Buffer-based variant allocates nothing; `hidden_scratch`
// must hold `hidden` doubles and receives the post-relu activations.
void forward(const PolicyParams& params, std::span<const double> features,
             std::span<double> hidden_scratch, std::span<double> logits_out,
             std::span<double> probs_out);

struct ForwardResult {
  std::vector<double> logits;
  ProbDistribution dist;
};

ForwardResult forward(const PolicyParams& params,
                      std::span<const double> features);

// Index of the maximum, ties broken by lowest index.
int argmax_lowest(std::span<const double> values);

// argmax_n p(n|q) of the forward pass.
int predict(const PolicyParams& params, std::span<const double> features);

PolicySnapshot snapshot(const PolicyParams& params, SnapshotRole role);

// Unweighted mean of per-class F1. Classes absent from both predictions and
// labels are excluded from the mean; classes with true instances and no
// correct predictions contribute 0.
double macro_f1(std::span<const int> predictions, std::span<const int> labels,
                int num_classes);

// FNV-1a over the raw parameter bytes; used to assert snapshots stay frozen.
std::uint64_t params_hash(const PolicyParams& params);

// Text checkpoint, hexfloat-encoded so round-trips are bit-exact.
void save_checkpoint(const PolicyParams& params,
                     const std::filesystem::path& path);
PolicyParams load_checkpoint(const std::filesystem::path& path);

}  // namespace bgrpo

#endif  // BGRPO_POLICY_HPP_
