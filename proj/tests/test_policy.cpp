#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "pose/policy.hpp"

using namespace pose;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

Mat random_obs(Rng& rng, Eigen::Index n, Eigen::Index d) {
  std::normal_distribution<double> N;
  Mat m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = N(rng);
  return m;
}

PolicyParams random_policy(Rng& rng, HeadKind head, Activation act = Activation::tanh) {
  const Architecture arch = make_architecture(3, {5, 4}, head == HeadKind::gaussian ? 2 : 4, head, act);
  PolicyParams p = init_policy(arch, rng, -0.3);
  std::normal_distribution<double> N(0.0, 0.5);
  for (Eigen::Index i = 0; i < p.theta.size(); ++i) p.theta(i) = N(rng);
  return p;
}

ActionBatch random_actions(Rng& rng, const PolicyParams& p, const Mat& obs) {
  ActionBatch a;
  if (p.arch.head == HeadKind::categorical) {
    std::uniform_int_distribution<int> U(0, static_cast<int>(p.action_dim()) - 1);
    for (Eigen::Index i = 0; i < obs.rows(); ++i) a.indices.push_back(U(rng));
  } else {
    a.values = random_obs(rng, obs.rows(), static_cast<Eigen::Index>(p.action_dim()));
  }
  return a;
}

Action row_action(const ActionBatch& a, Eigen::Index i) {
  if (!a.indices.empty()) return Action::discrete(a.indices[static_cast<std::size_t>(i)]);
  return Action::continuous(a.values.row(i).transpose());
}

}  // namespace

TEST_CASE("architecture parameter counts") {
  const Architecture a = make_architecture(2, {64, 64}, 4, HeadKind::categorical);
  CHECK(a.network_params() == 2 * 64 + 64 + 64 * 64 + 64 + 64 * 4 + 4);
  CHECK(a.param_count() == a.network_params());
  const Architecture g = make_architecture(2, {8}, 2, HeadKind::gaussian);
  CHECK(g.param_count() == g.network_params() + 2);
  CHECK_THROWS_AS(make_architecture(2, {0}, 4, HeadKind::categorical), InvalidArgument);
  CHECK_THROWS_AS(make_architecture(2, {4}, 2, HeadKind::scalar), InvalidArgument);
}

TEST_CASE("initial policy is close to uniform") {
  Rng rng(1);
  const PolicyParams p = init_policy(make_architecture(2, {16}, 4, HeadKind::categorical), rng);
  const Vec probs = probabilities(std::get<Categorical>(policy_forward(p, vec({0.3, -0.2}))));
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(probs(i) == doctest::Approx(0.25).epsilon(0.05));
  const PolicyParams g = init_policy(make_architecture(2, {16}, 2, HeadKind::gaussian), rng, -0.5);
  CHECK(g.log_std() == vec({-0.5, -0.5}));
}

TEST_CASE("log-probabilities of simple distributions") {
  CHECK(log_prob(Categorical{vec({0, 0, 0, 0})}, Action::discrete(2)) == doctest::Approx(std::log(0.25)));
  CHECK(log_prob(Categorical{vec({std::log(3.0), 0.0})}, Action::discrete(0)) == doctest::Approx(std::log(0.75)));
  CHECK(log_prob(Gaussian{vec({0}), vec({0})}, Action::continuous(vec({0}))) ==
        doctest::Approx(-0.5 * std::log(2 * M_PI)));
  // Two independent dimensions, std e^-1, offsets 1 and -2.
  const double expect = 2 * (1.0 - 0.5 * std::log(2 * M_PI)) - 0.5 * (std::exp(2.0) + 4 * std::exp(2.0));
  CHECK(log_prob(Gaussian{vec({0, 0}), vec({-1, -1})}, Action::continuous(vec({1, -2}))) ==
        doctest::Approx(expect));
  CHECK_THROWS_AS(log_prob(Categorical{vec({0, 0})}, Action::discrete(2)), InvalidArgument);
  CHECK_THROWS_AS(log_prob(Gaussian{vec({0}), vec({0})}, Action::continuous(vec({0, 1}))), InvalidArgument);
}

TEST_CASE("kl divergence and entropy closed forms") {
  // Bernoulli(0.5) vs Bernoulli(0.9).
  const double kl_bern = 0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1);
  CHECK(kl_divergence(Categorical{vec({0, 0})}, Categorical{vec({std::log(9.0), 0})}) == doctest::Approx(kl_bern));
  // N(0,1) vs N(1, e^2).
  const double kl_gauss = 1.0 + (1.0 + 1.0) / (2 * std::exp(2.0)) - 0.5;
  CHECK(kl_divergence(Gaussian{vec({0}), vec({0})}, Gaussian{vec({1}), vec({1})}) == doctest::Approx(kl_gauss));
  CHECK(kl_divergence(Categorical{vec({1, 2, 3})}, Categorical{vec({1, 2, 3})}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(kl_divergence(Categorical{vec({0})}, Gaussian{vec({0}), vec({0})}), InvalidArgument);

  CHECK(entropy(Categorical{vec({0, 0, 0, 0})}) == doctest::Approx(std::log(4.0)));
  CHECK(entropy(Gaussian{vec({3}), vec({0})}) == doctest::Approx(0.5 * std::log(2 * M_PI * M_E)));
}

TEST_CASE("batched heads agree with the per-sample oracle") {
  Rng rng(11);
  for (HeadKind head : {HeadKind::categorical, HeadKind::gaussian}) {
    const PolicyParams p = random_policy(rng, head);
    const PolicyParams q = random_policy(rng, head);
    const Mat obs = random_obs(rng, 6, 3);
    const ActionBatch acts = random_actions(rng, p, obs);
    const PolicyBatch bp = evaluate_policy(p, obs), bq = evaluate_policy(q, obs);
    const Vec lp = log_probs(bp, acts);
    const Vec kl = kl_rows(bp, bq);
    for (Eigen::Index i = 0; i < obs.rows(); ++i) {
      const Vec o = obs.row(i).transpose();
      CHECK(lp(i) == doctest::Approx(oracle::log_prob(p, o, row_action(acts, i))).epsilon(1e-12));
      CHECK(log_prob(policy_forward(p, o), row_action(acts, i)) == doctest::Approx(lp(i)).epsilon(1e-12));
      CHECK(kl(i) == doctest::Approx(oracle::kl(p, q, o)).epsilon(1e-12));
      CHECK(entropies(bp)(i) == doctest::Approx(entropy(policy_forward(p, o))).epsilon(1e-12));
    }
  }
}

TEST_CASE("gradients match finite differences") {
  Rng rng(21);
  for (HeadKind head : {HeadKind::categorical, HeadKind::gaussian}) {
    for (Activation act : {Activation::tanh, Activation::relu}) {
      const PolicyParams p = random_policy(rng, head, act);
      const PolicyParams ref = random_policy(rng, head, act);
      const Mat obs = random_obs(rng, 5, 3);
      const ActionBatch acts = random_actions(rng, p, obs);
      std::normal_distribution<double> N;
      Vec w(obs.rows());
      for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = N(rng);
      const PolicyBatch ref_batch = evaluate_policy(ref, obs);

      // Weighted log-likelihood + entropy + KL(ref || p), all at once.
      const HeadObjective obj = [&](const PolicyBatch& b, HeadGradient& g) {
        add_log_prob_grad(b, acts, w, g);
        add_entropy_grad(b, w, g);
        add_kl_grad_q(ref_batch, b, w, g);
        return w.dot(log_probs(b, acts)) + w.dot(entropies(b)) + w.dot(kl_rows(ref_batch, b));
      };
      const ValueAndGradient vg = gradient(p, obs, obj);
      auto f = [&](const Vec& th) {
        PolicyParams q = p;
        q.theta = th;
        double s = 0;
        for (Eigen::Index i = 0; i < obs.rows(); ++i) {
          const Vec o = obs.row(i).transpose();
          s += w(i) * (oracle::log_prob(q, o, row_action(acts, i)) + entropy(policy_forward(q, o)) +
                       oracle::kl(ref, q, o));
        }
        return s;
      };
      CHECK(vg.value == doctest::Approx(f(p.theta)).epsilon(1e-10));
      CHECK(oracle::rel_error(vg.gradient, oracle::fd_gradient(f, p.theta)) < 1e-6);
    }
  }
}

TEST_CASE("jacobian-vector product matches finite differences") {
  Rng rng(31);
  const PolicyParams p = random_policy(rng, HeadKind::categorical);
  const Mat obs = random_obs(rng, 4, 3);
  ForwardCache cache;
  mlp_forward(p.arch, p.theta, obs, &cache);
  std::normal_distribution<double> N;
  Vec dir(static_cast<Eigen::Index>(p.arch.network_params()));
  for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = N(rng);
  const Mat jvp = mlp_jvp(p.arch, p.theta, cache, dir);
  const double h = 1e-6;
  const Mat fd = (mlp_forward(p.arch, p.theta + h * dir, obs) - mlp_forward(p.arch, p.theta - h * dir, obs)) / (2 * h);
  CHECK((jvp - fd).norm() / fd.norm() < 1e-7);
}

TEST_CASE("value network loss gradient") {
  Rng rng(41);
  const ValueParams v = init_value(make_architecture(3, {6}, 1, HeadKind::scalar), rng);
  const Mat obs = random_obs(rng, 5, 3);
  CHECK(value_batch(v, obs)(2) == doctest::Approx(value_forward(v, obs.row(2).transpose())));
  ValueParams bad = v;
  bad.theta.conservativeResize(3);
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("categorical sampling frequencies") {
  Rng rng(51);
  const Categorical c{vec({std::log(0.1), std::log(0.2), std::log(0.3), std::log(0.4)})};
  std::vector<int> counts(4, 0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(sample_action(c, rng).index)];
  for (int k = 0; k < 4; ++k) {
    const double p = 0.1 * (k + 1);
    const double se = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(counts[static_cast<std::size_t>(k)] / static_cast<double>(n) - p) < 5 * se);
  }
  // Zero-probability classes are never drawn.
  const Categorical spike{vec({0.0, -1e300, -1e300})};
  for (int i = 0; i < 1000; ++i) CHECK(sample_action(spike, rng).index == 0);
}

TEST_CASE("gaussian sampling moments") {
  Rng rng(61);
  const Gaussian g{vec({1.0, -2.0}), vec({std::log(0.5), 0.0})};
  const int n = 100000;
  Vec sum = Vec::Zero(2), sq = Vec::Zero(2);
  for (int i = 0; i < n; ++i) {
    const Vec a = sample_action(g, rng).value;
    sum += a;
    sq += a.cwiseProduct(a);
  }
  const Vec mean = sum / n;
  CHECK(mean(0) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(mean(1) == doctest::Approx(-2.0).epsilon(0.01));
  CHECK(sq(0) / n - mean(0) * mean(0) == doctest::Approx(0.25).epsilon(0.02));
  CHECK(sq(1) / n - mean(1) * mean(1) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("greedy action breaks ties toward the lowest index") {
  CHECK(greedy_action(Categorical{vec({0, 2, 2, 1})}).index == 1);
  CHECK(greedy_action(Categorical{vec({5, 5})}).index == 0);
  CHECK(greedy_action(Gaussian{vec({0.5, -1}), vec({3, 3})}).value == vec({0.5, -1}));
}

TEST_CASE("checkpoint round trip is exact") {
  Rng rng(71);
  Checkpoint c{random_policy(rng, HeadKind::gaussian, Activation::relu),
               init_value(make_architecture(3, {4}, 1, HeadKind::scalar), rng)};
  c.policy.theta(0) = 1.0 / 3.0;
  std::stringstream ss;
  write_checkpoint(ss, c);
  const Checkpoint back = read_checkpoint(ss);
  CHECK(back.policy.arch == c.policy.arch);
  CHECK(back.policy.theta == c.policy.theta);
  REQUIRE(back.value.has_value());
  CHECK(back.value->theta == c.value->theta);

  std::stringstream no_value;
  write_checkpoint(no_value, Checkpoint{c.policy, std::nullopt});
  CHECK_FALSE(read_checkpoint(no_value).value.has_value());

  std::string text = ss.str();
  std::stringstream truncated(text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(read_checkpoint(truncated), ParseError);
  std::stringstream version("pose-checkpoint 2\n");
  CHECK_THROWS_AS(read_checkpoint(version), ParseError);
}
