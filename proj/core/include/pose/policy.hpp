#pragma once

// Policy and value function approximators over flat parameter vectors.
//
// Networks are fully connected with a shared hidden activation and a linear
// output layer. Layer l (in -> out) occupies out*in weights (column-major
// out x in) followed by out biases. Gaussian policies append one
// state-independent log standard deviation per action dimension.
//
// Gradients are exact reverse-mode derivatives over this fixed primitive set:
// affine layers, tanh/relu, and the per-head log-probability, entropy and KL
// terms below. A loss is expressed as a HeadObjective that reports its value
// and its derivative with respect to the head outputs; `gradient` pulls that
// back to the parameters.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "pose/trajectory.hpp"
#include "pose/types.hpp"

namespace pose {

using Rng = std::mt19937_64;

enum class Activation { tanh, relu };
enum class HeadKind { categorical, gaussian, scalar };

struct Architecture {
  std::vector<std::size_t> layers;  // input, hidden..., output
  Activation activation = Activation::tanh;
  HeadKind head = HeadKind::categorical;

  [[nodiscard]] std::size_t input_dim() const { return layers.front(); }
  [[nodiscard]] std::size_t output_dim() const { return layers.back(); }
  [[nodiscard]] std::size_t network_params() const;
  [[nodiscard]] std::size_t param_count() const;
  void validate() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct PolicyParams {
  Architecture arch;
  Vec theta;

  void validate() const;
  [[nodiscard]] std::size_t action_dim() const { return arch.output_dim(); }
  /// Log-std entries of a gaussian policy (empty for categorical).
  [[nodiscard]] Vec log_std() const;
};

struct ValueParams {
  Architecture arch;
  Vec theta;

  void validate() const;
};

Architecture make_architecture(std::size_t input, const std::vector<std::size_t>& hidden, std::size_t output,
                               HeadKind head, Activation act = Activation::tanh);

/// Small random weights, zero biases; the policy output layer is scaled down so
/// the initial policy is near uniform / near zero-mean.
PolicyParams init_policy(const Architecture& arch, Rng& rng, double init_log_std = 0.0);
ValueParams init_value(const Architecture& arch, Rng& rng);

// -- batched network --------------------------------------------------------

/// Per-layer activations of a batched forward pass. `activations[0]` is the
/// input batch (rows are samples), the last entry the linear output.
struct ForwardCache {
  std::vector<Mat> activations;
};

Mat mlp_forward(const Architecture& arch, const Vec& theta, const Mat& inputs, ForwardCache* cache = nullptr);
/// Gradient of sum_ij d_out(i,j) * out(i,j) with respect to the network
/// parameters (length `network_params()`).
Vec mlp_backward(const Architecture& arch, const Vec& theta, const ForwardCache& cache, const Mat& d_out);
/// Directional derivative of the outputs along `direction` (network part only).
Mat mlp_jvp(const Architecture& arch, const Vec& theta, const ForwardCache& cache, const Vec& direction);

// -- action distributions ---------------------------------------------------

struct Categorical {
  Vec logits;
};
struct Gaussian {
  Vec mean;
  Vec log_std;
};
using ActionDistribution = std::variant<Categorical, Gaussian>;

ActionDistribution policy_forward(const PolicyParams& params, const Vec& obs);
double value_forward(const ValueParams& params, const Vec& obs);
Vec value_batch(const ValueParams& params, const Mat& obs);

Vec probabilities(const Categorical& dist);
double log_prob(const ActionDistribution& dist, const Action& action);
double kl_divergence(const ActionDistribution& p, const ActionDistribution& q);
double entropy(const ActionDistribution& dist);
Action sample_action(const ActionDistribution& dist, Rng& rng);
/// Most likely action: lowest-index argmax for categorical, the mean for gaussian.
Action greedy_action(const ActionDistribution& dist);

// -- batched heads and the gradient contract --------------------------------

struct ActionBatch {
  std::vector<int> indices;  // categorical
  Mat values;                // gaussian, one row per sample

  [[nodiscard]] std::size_t size() const { return indices.empty() ? static_cast<std::size_t>(values.rows()) : indices.size(); }
};

struct PolicyBatch {
  HeadKind head = HeadKind::categorical;
  Mat out;  // logits or means, one row per sample
  Vec log_std;
  ForwardCache cache;

  [[nodiscard]] std::size_t rows() const { return static_cast<std::size_t>(out.rows()); }
};

PolicyBatch evaluate_policy(const PolicyParams& params, const Mat& obs);

struct HeadGradient {
  Mat d_out;
  Vec d_log_std;

  static HeadGradient zeros_like(const PolicyBatch& b);
};

using HeadObjective = std::function<double(const PolicyBatch&, HeadGradient&)>;
using ParamObjective = std::function<double(const Vec& theta, Vec& grad)>;

struct ValueAndGradient {
  double value = 0.0;
  Vec gradient;
};

/// Pulls a head-level gradient back to the full parameter vector.
Vec backprop(const PolicyParams& params, const PolicyBatch& batch, const HeadGradient& grad);

/// Value and exact gradient of `head_objective` evaluated on `obs`, plus an
/// optional parameter-space term.
ValueAndGradient gradient(const PolicyParams& params, const Mat& obs, const HeadObjective& head_objective,
                          const ParamObjective& param_objective = nullptr);

/// Per-row log-probabilities.
Vec log_probs(const PolicyBatch& batch, const ActionBatch& actions);
/// d_out/d_log_std += sum_i w_i * d log pi(a_i | s_i).
void add_log_prob_grad(const PolicyBatch& batch, const ActionBatch& actions, const Vec& weights, HeadGradient& g);
Vec entropies(const PolicyBatch& batch);
void add_entropy_grad(const PolicyBatch& batch, const Vec& weights, HeadGradient& g);
/// Per-row KL(p || q).
Vec kl_rows(const PolicyBatch& p, const PolicyBatch& q);
/// Gradient of sum_i w_i KL(p_i || q_i) with respect to q's head.
void add_kl_grad_q(const PolicyBatch& p, const PolicyBatch& q, const Vec& weights, HeadGradient& g);

/// Stacks trajectory observations / actions row-wise.
Mat stack_observations(const Batch& batch);
ActionBatch stack_actions(const Batch& batch);

// -- checkpoints ------------------------------------------------------------

struct Checkpoint {
  PolicyParams policy;
  std::optional<ValueParams> value;
};

std::string to_string(const Architecture& arch);
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

}  // namespace pose
