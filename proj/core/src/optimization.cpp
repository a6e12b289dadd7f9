#include "pose/optimization.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pose {

void PPOConfig::validate() const {
  if (!(clip > 0.0 && clip < 1.0)) throw InvalidArgument("ppo.clip must lie in (0, 1)");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidArgument("ppo.gamma must lie in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw InvalidArgument("ppo.gae_lambda must lie in [0, 1]");
  if (!(learning_rate > 0.0)) throw InvalidArgument("ppo.lr must be positive");
  if (epochs == 0) throw InvalidArgument("ppo.epochs must be positive");
  if (value_coef < 0.0 || entropy_coef < 0.0 || max_grad_norm < 0.0 || entropy_final.value_or(0.0) < 0.0) {
    throw InvalidArgument("ppo coefficients must be nonnegative");
  }
}

double PPOConfig::entropy_at(std::size_t iteration, std::size_t iterations) const {
  if (!entropy_final || iterations < 2) return entropy_coef;
  const double f = std::min(1.0, static_cast<double>(iteration) / static_cast<double>(iterations - 1));
  return entropy_coef + f * (*entropy_final - entropy_coef);
}

void PenaltyState::validate() const {
  if (!(sigma_min > 0.0 && sigma_max >= sigma_min)) throw InvalidArgument("penalty bounds must satisfy 0 < min <= max");
  if (!(sigma >= sigma_min && sigma <= sigma_max)) throw InvalidArgument("penalty.sigma must lie within its bounds");
  if (!(eta >= 0.0)) throw InvalidArgument("penalty.eta must be nonnegative");
  if (!(tolerance > 0.0)) throw InvalidArgument("penalty.tolerance must be positive");
}

void ExploreConfig::validate() const {
  if (!(delta_kl > 0.0)) throw InvalidArgument("explore.delta_kl must be positive");
  if (cg_iters == 0) throw InvalidArgument("explore.cg_iters must be positive");
  if (!(cg_damping > 0.0)) throw InvalidArgument("explore.cg_damping must be positive");
  if (backtrack_steps == 0) throw InvalidArgument("explore.backtrack_steps must be positive");
  if (!(backtrack_ratio > 0.0 && backtrack_ratio < 1.0)) throw InvalidArgument("explore.backtrack_ratio must lie in (0, 1)");
  if (!(first_order_fraction >= 0.0 && first_order_fraction <= 1.0)) {
    throw InvalidArgument("explore.first_order_fraction must lie in [0, 1]");
  }
  if (!(div_coeff >= 0.0)) throw InvalidArgument("explore.div_coeff must be nonnegative");
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values, std::span<const bool> dones,
                      double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1) throw InvalidArgument("compute_gae: need one more value than rewards");
  if (dones.size() != n) throw InvalidArgument("compute_gae: need one terminal flag per reward");
  GaeResult res;
  res.advantages.assign(n, 0.0);
  res.targets.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * values[t + 1] * live - values[t];
    next_adv = delta + gamma * lambda * live * next_adv;
    res.advantages[t] = next_adv;
    res.targets[t] = next_adv + values[t];
  }
  return res;
}

void normalize_advantages(Vec& adv) {
  if (adv.size() == 0) return;
  const double mean = adv.mean();
  adv.array() -= mean;
  const double sd = std::sqrt(adv.squaredNorm() / static_cast<double>(adv.size()));
  if (sd > 1e-8) adv /= sd;
}

SampleSet build_samples(const Batch& batch, const std::vector<double>& hinge, const PPOConfig& cfg) {
  if (!hinge.empty() && hinge.size() != batch.size()) throw InvalidArgument("build_samples: one hinge value per trajectory");
  SampleSet s;
  s.obs = stack_observations(batch);
  s.actions = stack_actions(batch);
  const auto n = s.obs.rows();
  s.advantages.resize(n);
  s.targets.resize(n);
  s.old_log_probs.resize(n);
  s.hinge = Vec::Zero(n);
  s.trajectory.reserve(static_cast<std::size_t>(n));
  s.num_trajectories = batch.size();
  Eigen::Index row = 0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const Trajectory& traj = batch[k];
    const std::size_t len = traj.size();
    std::vector<double> rewards(len), values(len + 1);
    std::vector<bool> dones(len, false);
    for (std::size_t t = 0; t < len; ++t) {
      rewards[t] = traj.steps[t].reward + traj.steps[t].bonus;
      values[t] = traj.steps[t].value;
    }
    values[len] = traj.truncated ? traj.bootstrap_value : 0.0;
    if (len > 0) dones[len - 1] = !traj.truncated;
    std::vector<char> done_bytes(dones.begin(), dones.end());
    const std::span<const bool> done_span(reinterpret_cast<const bool*>(done_bytes.data()), done_bytes.size());
    const GaeResult gae = compute_gae(rewards, values, done_span, cfg.gamma, cfg.gae_lambda);
    for (std::size_t t = 0; t < len; ++t, ++row) {
      s.advantages(row) = gae.advantages[t];
      s.targets(row) = gae.targets[t];
      s.old_log_probs(row) = traj.steps[t].log_prob;
      s.hinge(row) = hinge.empty() ? 0.0 : hinge[k];
      s.trajectory.push_back(k);
    }
  }
  normalize_advantages(s.advantages);
  return s;
}

double add_ppo_clip_head(const PolicyBatch& batch, const ActionBatch& actions, const Vec& advantages,
                         const Vec& old_log_probs, double clip, double scale, HeadGradient& g) {
  const Eigen::Index n = batch.out.rows();
  if (n == 0) throw InvalidArgument("ppo_clip_objective: empty batch");
  const Vec lp = log_probs(batch, actions);
  Vec weights = Vec::Zero(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ratio = std::exp(lp(i) - old_log_probs(i));
    const double a = advantages(i);
    const double unclipped = ratio * a;
    const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * a;
    if (unclipped <= clipped) {
      total += unclipped;
      weights(i) = scale * unclipped / static_cast<double>(n);
    } else {
      total += clipped;
    }
  }
  add_log_prob_grad(batch, actions, weights, g);
  return total / static_cast<double>(n);
}

ValueAndGradient ppo_clip_objective(const PolicyParams& params, const Mat& obs, const ActionBatch& actions,
                                    const Vec& advantages, const Vec& old_log_probs, double clip) {
  if (obs.rows() == 0) throw InvalidArgument("ppo_clip_objective: empty batch");
  return gradient(params, obs, [&](const PolicyBatch& b, HeadGradient& g) {
    return add_ppo_clip_head(b, actions, advantages, old_log_probs, clip, 1.0, g);
  });
}

namespace {

// Per-sample weights that spread a per-trajectory coefficient over its steps.
Vec per_sample(const Batch& batch, const std::vector<double>& per_traj, double scale) {
  std::size_t n = 0;
  for (const auto& t : batch) n += t.size();
  Vec w(static_cast<Eigen::Index>(n));
  Eigen::Index r = 0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    for (std::size_t t = 0; t < batch[k].size(); ++t) w(r++) = scale * per_traj[k];
  }
  return w;
}

}  // namespace

double penalty_surrogate(const PolicyParams& params, const Batch& batch, const std::vector<double>& hinge,
                         double sigma) {
  if (batch.empty()) return 0.0;
  const Mat obs = stack_observations(batch);
  const ActionBatch actions = stack_actions(batch);
  const Vec lp = log_probs(evaluate_policy(params, obs), actions);
  const Vec w = per_sample(batch, hinge, sigma / static_cast<double>(batch.size()));
  return w.dot(lp);
}

PenaltyGradient guidance_penalty_gradient(const Batch& batch, const GuidanceMemory& memory, double sigma,
                                          double tolerance, const PolicyParams& params, const KernelConfig& cfg) {
  PenaltyGradient res;
  res.gradient = Vec::Zero(static_cast<Eigen::Index>(params.arch.param_count()));
  res.hinge.reserve(batch.size());
  for (const auto& traj : batch) res.hinge.push_back(hinge_distance(traj, memory, tolerance, cfg));
  if (!batch.empty()) {
    res.mean_hinge = std::accumulate(res.hinge.begin(), res.hinge.end(), 0.0) / static_cast<double>(batch.size());
  }
  const bool active = sigma != 0.0 && std::any_of(res.hinge.begin(), res.hinge.end(), [](double h) { return h > 0.0; });
  if (!active) return res;
  const Mat obs = stack_observations(batch);
  const ActionBatch actions = stack_actions(batch);
  const Vec w = per_sample(batch, res.hinge, sigma / static_cast<double>(batch.size()));
  res.gradient = gradient(params, obs, [&](const PolicyBatch& b, HeadGradient& g) {
                   add_log_prob_grad(b, actions, w, g);
                   return 0.0;
                 }).gradient;
  return res;
}

ValueAndGradient value_loss(const ValueParams& params, const Mat& obs, const Vec& targets) {
  ForwardCache cache;
  const Mat v = mlp_forward(params.arch, params.theta, obs, &cache);
  const double n = static_cast<double>(obs.rows());
  const Vec diff = v.col(0) - targets;
  ValueAndGradient res;
  res.value = 0.5 * diff.squaredNorm() / n;
  const Mat d_out = diff / n;
  res.gradient = mlp_backward(params.arch, params.theta, cache, d_out);
  return res;
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(Vec::Zero(static_cast<Eigen::Index>(n))),
      v_(Vec::Zero(static_cast<Eigen::Index>(n))) {}

void Adam::ascend(Vec& theta, const Vec& grad) {
  if (grad.size() != m_.size() || theta.size() != m_.size()) throw InvalidArgument("Adam: size mismatch");
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  theta.array() += lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

void clip_grad_norm(Vec& g, double max_norm) {
  if (max_norm <= 0.0) return;
  const double norm = g.norm();
  if (norm > max_norm) g *= max_norm / norm;
}

namespace {

Mat gather_rows(const Mat& m, std::span<const std::size_t> idx) {
  Mat out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

Vec gather(const Vec& v, std::span<const std::size_t> idx) {
  Vec out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(idx[i]));
  return out;
}

ActionBatch gather_actions(const ActionBatch& a, std::span<const std::size_t> idx) {
  ActionBatch out;
  if (!a.indices.empty()) {
    out.indices.reserve(idx.size());
    for (auto i : idx) out.indices.push_back(a.indices[i]);
  } else {
    out.values = gather_rows(a.values, idx);
  }
  return out;
}

}  // namespace

ImprovementStats policy_improvement_step(PolicyParams& policy, ValueParams& value, Adam& policy_opt,
                                         Adam& value_opt, const SampleSet& samples, double sigma,
                                         const PPOConfig& cfg, Rng& rng) {
  const std::size_t n = samples.size();
  if (n == 0) throw InvalidArgument("policy_improvement_step: empty batch");
  const std::size_t mb = cfg.minibatch_size == 0 ? n : std::min(cfg.minibatch_size, n);
  const bool penalize = sigma != 0.0 && (samples.hinge.array() > 0.0).any();
  // Minibatch estimate of sigma * (1/M) sum over all samples of hinge * log pi.
  const double penalty_scale =
      sigma * static_cast<double>(n) / static_cast<double>(std::max<std::size_t>(samples.num_trajectories, 1));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  ImprovementStats stats;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += mb) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(mb, n - start));
      const Mat obs = gather_rows(samples.obs, idx);
      const ActionBatch actions = gather_actions(samples.actions, idx);
      const Vec adv = gather(samples.advantages, idx);
      const Vec old_lp = gather(samples.old_log_probs, idx);
      const double m = static_cast<double>(idx.size());

      const PolicyBatch batch = evaluate_policy(policy, obs);
      HeadGradient g = HeadGradient::zeros_like(batch);
      stats.clip_objective = add_ppo_clip_head(batch, actions, adv, old_lp, cfg.clip, 1.0, g);
      if (cfg.entropy_coef > 0.0) {
        add_entropy_grad(batch, Vec::Constant(idx.size(), cfg.entropy_coef / m), g);
        stats.entropy = entropies(batch).mean();
      }
      if (penalize) {
        const Vec hinge = gather(samples.hinge, idx);
        add_log_prob_grad(batch, actions, (-penalty_scale / m) * hinge, g);
        stats.penalty = penalty_scale * hinge.dot(log_probs(batch, actions)) / m;
      }
      Vec grad = backprop(policy, batch, g);
      if (!grad.allFinite()) {
        stats.finite = false;
        return stats;
      }
      clip_grad_norm(grad, cfg.max_grad_norm);
      policy_opt.ascend(policy.theta, grad);

      ValueAndGradient vl = value_loss(value, obs, gather(samples.targets, idx));
      stats.value_loss = vl.value;
      Vec vgrad = -cfg.value_coef * vl.gradient;
      if (!vgrad.allFinite()) {
        stats.finite = false;
        return stats;
      }
      clip_grad_norm(vgrad, cfg.max_grad_norm);
      value_opt.ascend(value.theta, vgrad);
      ++stats.minibatches;
    }
  }
  return stats;
}

PenaltyState adapt_sigma(PenaltyState state, double mean_violation) {
  if (mean_violation > 0.0) {
    state.sigma = std::min(state.sigma * (1.0 + state.eta), state.sigma_max);
  } else {
    state.sigma = std::max(state.sigma / (1.0 + state.eta), state.sigma_min);
  }
  return state;
}

DiversityGradient diversity_gradient(const Batch& batch, std::span<const CompactTrace> batch_traces,
                                     std::span<const CompactTrace> peer_references, const PolicyParams& params,
                                     const KernelConfig& cfg) {
  DiversityGradient res;
  res.gradient = Vec::Zero(static_cast<Eigen::Index>(params.arch.param_count()));
  std::size_t n = 0;
  for (const auto& t : batch) n += t.size();
  res.sample_weights = Vec::Zero(static_cast<Eigen::Index>(n));
  if (peer_references.empty()) {
    res.no_peers = true;
    return res;
  }
  if (batch.empty()) throw InvalidArgument("diversity_gradient: empty batch");
  if (batch_traces.size() != batch.size()) throw InvalidArgument("diversity_gradient: one trace per trajectory");

  const std::size_t m = batch.size();
  std::vector<double> best;
  for (std::size_t j = 0; j < peer_references.size(); ++j) {
    std::vector<double> d(m);
    for (std::size_t k = 0; k < m; ++k) d[k] = trace_distance(batch_traces[k], peer_references[j], cfg);
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(m);
    if (!res.peer || mean < res.mean_distance) {
      res.peer = j;
      res.mean_distance = mean;
      best = std::move(d);
    }
  }
  res.distances = best;
  std::vector<double> centered(m);
  for (std::size_t k = 0; k < m; ++k) centered[k] = best[k] - res.mean_distance;
  res.sample_weights = per_sample(batch, centered, 1.0 / static_cast<double>(m));
  if (res.sample_weights.cwiseAbs().maxCoeff() == 0.0) return res;
  const Mat obs = stack_observations(batch);
  const ActionBatch actions = stack_actions(batch);
  res.gradient = gradient(params, obs, [&](const PolicyBatch& b, HeadGradient& g) {
                   add_log_prob_grad(b, actions, res.sample_weights, g);
                   return 0.0;
                 }).gradient;
  return res;
}

DiversityGradient diversity_gradient(const Batch& batch, std::span<const Trajectory> peer_references,
                                     const PolicyParams& params, const KernelConfig& cfg) {
  std::vector<CompactTrace> traces;
  traces.reserve(batch.size());
  if (!peer_references.empty()) {
    for (const auto& t : batch) traces.push_back(compact_trace(t, cfg));
  }
  std::vector<CompactTrace> refs;
  for (const auto& r : peer_references) refs.push_back(compact_trace(r, cfg));
  return diversity_gradient(batch, traces, refs, params, cfg);
}

double diversity_surrogate(const PolicyParams& params, const Mat& obs, const ActionBatch& actions,
                           const Vec& sample_weights, const Vec& ref_log_probs) {
  const Vec lp = log_probs(evaluate_policy(params, obs), actions);
  return sample_weights.dot((lp - ref_log_probs).array().exp().matrix());
}

FisherOperator::FisherOperator(const PolicyParams& params, const Mat& obs, double damping)
    : params_(params), batch_(evaluate_policy(params, obs)), damping_(damping) {
  if (obs.rows() == 0) throw InvalidArgument("FisherOperator: empty batch");
  if (batch_.head == HeadKind::categorical) {
    probs_ = batch_.out;
    for (Eigen::Index i = 0; i < probs_.rows(); ++i) {
      const double mx = probs_.row(i).maxCoeff();
      probs_.row(i) = (probs_.row(i).array() - mx).exp();
      probs_.row(i) /= probs_.row(i).sum();
    }
  }
}

Vec FisherOperator::apply(const Vec& v) const {
  if (v.size() != params_.theta.size()) throw InvalidArgument("fisher_vector_product: length mismatch");
  const Mat jv = mlp_jvp(params_.arch, params_.theta, batch_.cache, v);
  const double n = static_cast<double>(jv.rows());
  Mat u(jv.rows(), jv.cols());
  if (batch_.head == HeadKind::categorical) {
    for (Eigen::Index i = 0; i < jv.rows(); ++i) {
      const double pj = probs_.row(i).dot(jv.row(i));
      u.row(i) = probs_.row(i).cwiseProduct(jv.row(i)) - pj * probs_.row(i);
    }
  } else {
    const Eigen::RowVectorXd inv_var = (-2.0 * batch_.log_std.array()).exp().matrix().transpose();
    for (Eigen::Index i = 0; i < jv.rows(); ++i) u.row(i) = jv.row(i).cwiseProduct(inv_var);
  }
  u /= n;
  Vec out = Vec::Zero(v.size());
  const auto net = static_cast<Eigen::Index>(params_.arch.network_params());
  out.head(net) = mlp_backward(params_.arch, params_.theta, batch_.cache, u);
  if (batch_.head == HeadKind::gaussian) {
    const auto d = static_cast<Eigen::Index>(params_.arch.output_dim());
    out.tail(d) = 2.0 * v.tail(d);
  }
  return out + damping_ * v;
}

Vec fisher_vector_product(const PolicyParams& params, const Mat& obs, const Vec& v, double damping) {
  return FisherOperator(params, obs, damping).apply(v);
}

double mean_kl(const PolicyParams& old_params, const PolicyParams& new_params, const Mat& obs) {
  return kl_rows(evaluate_policy(old_params, obs), evaluate_policy(new_params, obs)).mean();
}

CgResult conjugate_gradient(const std::function<Vec(const Vec&)>& hvp, const Vec& g, std::size_t max_iters,
                            double tol) {
  CgResult res;
  res.x = Vec::Zero(g.size());
  const double g_norm = g.norm();
  if (g_norm == 0.0) return res;
  Vec r = g;
  Vec p = r;
  double rr = r.squaredNorm();
  res.relative_residual = 1.0;
  for (std::size_t i = 0; i < max_iters; ++i) {
    const Vec ap = hvp(p);
    const double pap = p.dot(ap);
    if (!(pap > 0.0)) break;
    const double alpha = rr / pap;
    res.x += alpha * p;
    r -= alpha * ap;
    const double rr_new = r.squaredNorm();
    res.iterations = i + 1;
    res.relative_residual = std::sqrt(rr_new) / g_norm;
    res.residual_history.push_back(res.relative_residual);
    if (res.relative_residual <= tol) break;
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  return res;
}

ExploreResult exploration_step(const PolicyParams& params, const Mat& obs, const ActionBatch& actions,
                               const Vec& sample_weights, const Vec& g, const ExploreConfig& cfg) {
  ExploreResult res;
  res.theta = params.theta;
  if (!g.allFinite()) {
    res.nonfinite = true;
    return res;
  }
  if (g.squaredNorm() == 0.0 || obs.rows() == 0) return res;

  const FisherOperator fisher(params, obs, cfg.cg_damping);
  const CgResult cg = conjugate_gradient([&](const Vec& v) { return fisher.apply(v); }, g, cfg.cg_iters);
  const Vec& x = cg.x;
  const double xhx = x.dot(fisher.apply(x));
  if (!x.allFinite() || !std::isfinite(xhx) || !(xhx > 0.0)) {
    res.nonfinite = true;
    return res;
  }
  res.full_step = std::sqrt(2.0 * cfg.delta_kl / xhx);
  if (!std::isfinite(res.full_step)) {
    res.nonfinite = true;
    return res;
  }

  const Vec ref_lp = log_probs(evaluate_policy(params, obs), actions);
  const double base = sample_weights.sum();
  PolicyParams candidate = params;
  double step = res.full_step;
  for (std::size_t j = 0; j <= cfg.backtrack_steps; ++j, step *= cfg.backtrack_ratio) {
    candidate.theta = params.theta + step * x;
    const double kl = mean_kl(params, candidate, obs);
    const double surrogate = diversity_surrogate(candidate, obs, actions, sample_weights, ref_lp);
    if (std::isfinite(kl) && std::isfinite(surrogate) && kl <= cfg.delta_kl && surrogate >= base) {
      res.theta = candidate.theta;
      res.accepted = true;
      res.kl = kl;
      res.surrogate_gain = surrogate - base;
      res.backtracks = j;
      return res;
    }
  }
  res.backtracks = cfg.backtrack_steps;
  return res;
}

Vec first_order_exploration(const Vec& theta, const Vec& g, double div_coeff, double lr) {
  if (div_coeff == 0.0 || g.squaredNorm() == 0.0) return theta;
  return theta + (lr * div_coeff) * g;
}

}  // namespace pose
