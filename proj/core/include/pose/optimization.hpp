#pragma once

// Policy improvement (clipped PPO minus the soft guidance penalty) and policy
// exploration (trust-region ascent on the team diversity measure).

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pose/memory.hpp"
#include "pose/metrics.hpp"
#include "pose/policy.hpp"

namespace pose {

struct PPOConfig {
  double clip = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  std::size_t epochs = 4;
  /// 0 uses the whole batch as one minibatch.
  std::size_t minibatch_size = 64;
  double learning_rate = 3e-4;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  /// Entropy coefficient reached at the last iteration by linear annealing;
  /// unset keeps entropy_coef throughout.
  std::optional<double> entropy_final;
  /// Global gradient-norm clip per network; 0 disables clipping.
  double max_grad_norm = 0.5;

  void validate() const;
  /// Entropy coefficient at `iteration` of a run with `iterations` total.
  double entropy_at(std::size_t iteration, std::size_t iterations) const;
};

/// Lagrange multiplier for the guidance constraint and its adaptation rule.
struct PenaltyState {
  double sigma = 1.0;
  double eta = 0.1;
  double sigma_min = 0.01;
  double sigma_max = 100.0;
  /// Guidance tolerance: trajectories this close to memory are not penalized.
  double tolerance = 0.1;
  /// Subtract the batch-mean hinge before weighting log-probabilities. Same
  /// expected gradient, lower variance.
  bool baseline = false;

  void validate() const;
};

struct ExploreConfig {
  double delta_kl = 0.01;
  std::size_t cg_iters = 10;
  double cg_damping = 0.1;
  std::size_t backtrack_steps = 10;
  double backtrack_ratio = 0.8;
  double first_order_fraction = 0.3;
  double div_coeff = 0.05;

  void validate() const;
};

// -- advantages -------------------------------------------------------------

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> targets;
};

/// Generalized advantage estimation over one episode segment. `values` has one
/// more entry than `rewards` (the bootstrap value of the final next state);
/// `dones[t]` cuts the bootstrap after step t.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const bool> dones, double gamma, double lambda);

/// In-place standardization to mean 0, std 1 (left centered if std is ~0).
void normalize_advantages(Vec& adv);

/// Flattened training samples of one agent's batch.
struct SampleSet {
  Mat obs;
  ActionBatch actions;
  Vec advantages;  // normalized
  Vec targets;
  Vec old_log_probs;
  /// Hinge distance of the trajectory each sample came from.
  Vec hinge;
  std::vector<std::size_t> trajectory;
  std::size_t num_trajectories = 0;

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(obs.rows()); }
};

/// Builds samples from a batch whose steps carry rewards, values and log-probs.
/// `hinge` holds one value per trajectory (empty = all zero). Step bonuses are
/// added to rewards before advantage estimation.
SampleSet build_samples(const Batch& batch, const std::vector<double>& hinge, const PPOConfig& cfg);

// -- objectives ---------------------------------------------------------------

/// Mean over samples of min(r A, clip(r, 1-eps, 1+eps) A) with
/// r = exp(log pi - old log pi), and its gradient.
ValueAndGradient ppo_clip_objective(const PolicyParams& params, const Mat& obs, const ActionBatch& actions,
                                    const Vec& advantages, const Vec& old_log_probs, double clip);

/// Adds the clipped-objective head gradient (scaled by `scale`) and returns
/// the objective value (unscaled mean).
double add_ppo_clip_head(const PolicyBatch& batch, const ActionBatch& actions, const Vec& advantages,
                         const Vec& old_log_probs, double clip, double scale, HeadGradient& g);

struct PenaltyGradient {
  Vec gradient;
  std::vector<double> hinge;
  double mean_hinge = 0.0;
};

/// sigma * mean over trajectories of hinge(tau) * sum_t grad log pi(a_t | s_t),
/// hinge values held constant.
PenaltyGradient guidance_penalty_gradient(const Batch& batch, const GuidanceMemory& memory, double sigma,
                                          double tolerance, const PolicyParams& params, const KernelConfig& cfg);

/// The scalar whose gradient is the penalty gradient:
/// sigma * mean over trajectories of hinge(tau) * sum_t log pi(a_t | s_t).
double penalty_surrogate(const PolicyParams& params, const Batch& batch, const std::vector<double>& hinge,
                         double sigma);

/// Half mean squared error of the value network and its gradient.
ValueAndGradient value_loss(const ValueParams& params, const Mat& obs, const Vec& targets);

// -- optimizers -------------------------------------------------------------

/// Adam on a maximization problem.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void ascend(Vec& theta, const Vec& grad);
  [[nodiscard]] double learning_rate() const noexcept { return lr_; }

 private:
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  Vec m_;
  Vec v_;
  std::size_t t_ = 0;
};

/// Rescales `g` in place so its norm is at most `max_norm` (no-op for 0).
void clip_grad_norm(Vec& g, double max_norm);

struct ImprovementStats {
  double clip_objective = 0.0;
  double entropy = 0.0;
  double value_loss = 0.0;
  double penalty = 0.0;
  std::size_t minibatches = 0;
  bool finite = true;
};

/// Minibatched gradient-ascent epochs on
///   clip objective + entropy bonus - sigma * guidance penalty
/// for the policy, and on the negative value loss for the value network.
ImprovementStats policy_improvement_step(PolicyParams& policy, ValueParams& value, Adam& policy_opt,
                                         Adam& value_opt, const SampleSet& samples, double sigma,
                                         const PPOConfig& cfg, Rng& rng);

/// sigma grows by (1 + eta) while the constraint is violated and shrinks by
/// the same factor otherwise, clamped to [sigma_min, sigma_max].
PenaltyState adapt_sigma(PenaltyState state, double mean_violation);

// -- exploration --------------------------------------------------------------

struct DiversityGradient {
  Vec gradient;
  bool no_peers = false;
  /// Index into the peer list of the closest peer reference.
  std::optional<std::size_t> peer;
  /// MMD^2 of each trajectory to the chosen peer reference.
  std::vector<double> distances;
  double mean_distance = 0.0;
  /// Per-sample weight (distance - baseline) / M; the gradient equals
  /// sum_i weight_i * grad log pi(a_i | s_i).
  Vec sample_weights;
};

/// Score-function estimate of the gradient of the agent's distance to its
/// closest peer reference trajectory. Peer references are constants.
DiversityGradient diversity_gradient(const Batch& batch, std::span<const CompactTrace> batch_traces,
                                     std::span<const CompactTrace> peer_references, const PolicyParams& params,
                                     const KernelConfig& cfg);
DiversityGradient diversity_gradient(const Batch& batch, std::span<const Trajectory> peer_references,
                                     const PolicyParams& params, const KernelConfig& cfg);

/// Sampled diversity surrogate sum_i w_i * pi(a_i|s_i) / pi_ref(a_i|s_i).
double diversity_surrogate(const PolicyParams& params, const Mat& obs, const ActionBatch& actions,
                           const Vec& sample_weights, const Vec& ref_log_probs);

/// (F + damping I) v with F the Hessian at the current parameters of the mean
/// KL(pi_current(.|s) || pi(.|s)) over the batch states.
class FisherOperator {
 public:
  FisherOperator(const PolicyParams& params, const Mat& obs, double damping);

  [[nodiscard]] Vec apply(const Vec& v) const;
  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(params_.theta.size()); }

 private:
  PolicyParams params_;
  PolicyBatch batch_;
  Mat probs_;
  double damping_;
};

Vec fisher_vector_product(const PolicyParams& params, const Mat& obs, const Vec& v, double damping);

/// Mean over rows of KL(p_old(.|s) || p_new(.|s)).
double mean_kl(const PolicyParams& old_params, const PolicyParams& new_params, const Mat& obs);

struct CgResult {
  Vec x;
  std::size_t iterations = 0;
  double relative_residual = 0.0;
  std::vector<double> residual_history;
};

CgResult conjugate_gradient(const std::function<Vec(const Vec&)>& hvp, const Vec& g, std::size_t max_iters,
                            double tol = 1e-10);

struct ExploreResult {
  Vec theta;
  bool accepted = false;
  bool nonfinite = false;
  double kl = 0.0;
  double surrogate_gain = 0.0;
  double full_step = 0.0;
  std::size_t backtracks = 0;
};

/// Natural-gradient ascent on the diversity surrogate inside the KL trust
/// region with a backtracking line search. Rejected searches return the
/// input parameters unchanged.
ExploreResult exploration_step(const PolicyParams& params, const Mat& obs, const ActionBatch& actions,
                               const Vec& sample_weights, const Vec& g, const ExploreConfig& cfg);

/// Plain ascent theta + lr * div_coeff * g.
Vec first_order_exploration(const Vec& theta, const Vec& g, double div_coeff, double lr);

}  // namespace pose
