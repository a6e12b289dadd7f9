#pragma once

// Reference implementations the library is checked against. They share no
// code with core/: plain loops over std::vector, no Eigen expressions beyond
// element access, and central finite differences for derivatives.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "pose/policy.hpp"
#include "pose/trajectory.hpp"

namespace oracle {

using Points = std::vector<std::vector<double>>;

inline double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

inline double median_bandwidth(const Points& x, const Points& y) {
  Points all = x;
  all.insert(all.end(), y.begin(), y.end());
  std::vector<double> d;
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j) d.push_back(std::sqrt(sqdist(all[i], all[j])));
  std::sort(d.begin(), d.end());
  const std::size_t n = d.size();
  const double m = n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
  return m > 0 ? m : 1.0;
}

// Biased MMD^2 as the literal triple double sum.
inline double mmd2(const Points& x, const Points& y, double h) {
  auto k = [h](const std::vector<double>& a, const std::vector<double>& b) {
    return std::exp(-sqdist(a, b) / (2 * h * h));
  };
  double xx = 0, yy = 0, xy = 0;
  for (const auto& a : x)
    for (const auto& b : x) xx += k(a, b);
  for (const auto& a : y)
    for (const auto& b : y) yy += k(a, b);
  for (const auto& a : x)
    for (const auto& b : y) xy += k(a, b);
  const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  return xx / (nx * nx) + yy / (ny * ny) - 2 * xy / (nx * ny);
}

inline double mmd2_median(const Points& x, const Points& y) { return mmd2(x, y, median_bandwidth(x, y)); }

inline Points positions(const pose::Trajectory& t) {
  Points p;
  for (const auto& s : t.steps) p.emplace_back(s.position.data(), s.position.data() + s.position.size());
  return p;
}

inline pose::Vec to_vec(const std::vector<double>& v) {
  pose::Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

inline std::vector<pose::Vec> to_vecs(const Points& p) {
  std::vector<pose::Vec> out;
  for (const auto& v : p) out.push_back(to_vec(v));
  return out;
}

// Central differences of f at theta.
inline pose::Vec fd_gradient(const std::function<double(const pose::Vec&)>& f, const pose::Vec& theta,
                             double step = 1e-5) {
  pose::Vec g(theta.size());
  pose::Vec t = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double keep = t(i);
    t(i) = keep + step;
    const double up = f(t);
    t(i) = keep - step;
    const double down = f(t);
    t(i) = keep;
    g(i) = (up - down) / (2 * step);
  }
  return g;
}

inline double rel_error(const pose::Vec& a, const pose::Vec& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-8});
  return (a - b).norm() / scale;
}

// Log-probability of one action computed from raw network outputs with plain loops.
inline double log_prob(const pose::PolicyParams& p, const pose::Vec& obs, const pose::Action& a) {
  pose::Mat in(1, obs.size());
  in.row(0) = obs.transpose();
  const pose::Mat out = pose::mlp_forward(p.arch, p.theta, in);
  if (p.arch.head == pose::HeadKind::categorical) {
    double mx = -1e300;
    for (Eigen::Index j = 0; j < out.cols(); ++j) mx = std::max(mx, out(0, j));
    double z = 0;
    for (Eigen::Index j = 0; j < out.cols(); ++j) z += std::exp(out(0, j) - mx);
    return out(0, a.index) - mx - std::log(z);
  }
  const auto d = static_cast<Eigen::Index>(p.arch.output_dim());
  double lp = 0;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double ls = p.theta(p.theta.size() - d + j);
    const double z = (a.value(j) - out(0, j)) / std::exp(ls);
    lp += -0.5 * z * z - ls - 0.5 * std::log(2 * M_PI);
  }
  return lp;
}

// KL(p || q) between two action distributions from raw outputs.
inline double kl(const pose::PolicyParams& p, const pose::PolicyParams& q, const pose::Vec& obs) {
  pose::Mat in(1, obs.size());
  in.row(0) = obs.transpose();
  const pose::Mat a = pose::mlp_forward(p.arch, p.theta, in);
  const pose::Mat b = pose::mlp_forward(q.arch, q.theta, in);
  if (p.arch.head == pose::HeadKind::categorical) {
    auto softmax = [](const pose::Mat& o) {
      std::vector<double> pr(static_cast<std::size_t>(o.cols()));
      double mx = -1e300, z = 0;
      for (Eigen::Index j = 0; j < o.cols(); ++j) mx = std::max(mx, o(0, j));
      for (Eigen::Index j = 0; j < o.cols(); ++j) z += pr[static_cast<std::size_t>(j)] = std::exp(o(0, j) - mx);
      for (auto& v : pr) v /= z;
      return pr;
    };
    const auto pa = softmax(a), pb = softmax(b);
    double s = 0;
    for (std::size_t j = 0; j < pa.size(); ++j) s += pa[j] * std::log(pa[j] / pb[j]);
    return s;
  }
  const auto d = static_cast<Eigen::Index>(p.arch.output_dim());
  double s = 0;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double lp = p.theta(p.theta.size() - d + j), lq = q.theta(q.theta.size() - d + j);
    const double vp = std::exp(2 * lp), vq = std::exp(2 * lq);
    s += lq - lp + (vp + (a(0, j) - b(0, j)) * (a(0, j) - b(0, j))) / (2 * vq) - 0.5;
  }
  return s;
}

// Explicit Fisher matrix: Hessian of mean_s KL(pi_theta0 || pi_theta) at theta0
// by second-order central differences.
inline pose::Mat fd_kl_hessian(const pose::PolicyParams& p0, const pose::Mat& obs, double step = 1e-4) {
  const auto n = p0.theta.size();
  auto f = [&](const pose::Vec& th) {
    pose::PolicyParams q = p0;
    q.theta = th;
    double s = 0;
    for (Eigen::Index r = 0; r < obs.rows(); ++r) s += kl(p0, q, obs.row(r).transpose());
    return s / static_cast<double>(obs.rows());
  };
  pose::Mat h(n, n);
  pose::Vec t = p0.theta;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      auto at = [&](double di, double dj) {
        pose::Vec u = t;
        u(i) += di;
        u(j) += dj;
        return f(u);
      };
      const double v = (at(step, step) - at(step, -step) - at(-step, step) + at(-step, -step)) / (4 * step * step);
      h(i, j) = h(j, i) = v;
    }
  }
  return h;
}

// Random symmetric positive definite matrix with eigenvalues in [lo, hi].
inline pose::Mat random_spd(std::size_t n, std::mt19937_64& rng, double lo = 0.5, double hi = 10.0) {
  std::normal_distribution<double> N;
  pose::Mat a(n, n);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = N(rng);
  Eigen::HouseholderQR<pose::Mat> qr(a);
  const pose::Mat q = qr.householderQ();
  std::uniform_real_distribution<double> U(lo, hi);
  pose::Vec ev(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = U(rng);
  return q * ev.asDiagonal() * q.transpose();
}

}  // namespace oracle
