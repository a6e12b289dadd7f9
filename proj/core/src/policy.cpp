#include "pose/policy.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "pose/text_io.hpp"

namespace pose {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // ln(2 pi)

using ConstMap = Eigen::Map<const Mat>;
using ConstVecMap = Eigen::Map<const Vec>;

struct LayerView {
  ConstMap w;
  ConstVecMap b;
};

LayerView layer(const Architecture& arch, const Vec& theta, std::size_t l, std::size_t& offset) {
  const auto in = static_cast<Eigen::Index>(arch.layers[l]);
  const auto out = static_cast<Eigen::Index>(arch.layers[l + 1]);
  const double* base = theta.data() + offset;
  offset += static_cast<std::size_t>(in * out + out);
  return {ConstMap(base, out, in), ConstVecMap(base + in * out, out)};
}

void activate(Activation act, Mat& z) {
  if (act == Activation::tanh) {
    z = z.array().tanh().matrix();
  } else {
    z = z.cwiseMax(0.0);
  }
}

// Derivative of the activation expressed through its output.
Mat activation_grad(Activation act, const Mat& a) {
  if (act == Activation::tanh) return (1.0 - a.array().square()).matrix();
  return (a.array() > 0.0).cast<double>().matrix();
}

Vec log_softmax(const Vec& z) {
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  return (z.array() - lse).matrix();
}

Mat softmax_rows(const Mat& z) {
  Mat p = z;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    p.row(i) = (z.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

Vec row_lse(const Mat& z) {
  Vec out(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    out(i) = m + std::log((z.row(i).array() - m).exp().sum());
  }
  return out;
}

void require_same_head(const PolicyBatch& a, const PolicyBatch& b) {
  if (a.head != b.head || a.out.rows() != b.out.rows() || a.out.cols() != b.out.cols()) {
    throw InvalidArgument("policy batches have different shapes or families");
  }
}

const char* activation_name(Activation a) { return a == Activation::tanh ? "tanh" : "relu"; }
const char* head_name(HeadKind h) {
  switch (h) {
    case HeadKind::categorical: return "categorical";
    case HeadKind::gaussian: return "gaussian";
    case HeadKind::scalar: return "scalar";
  }
  return "?";
}

}  // namespace

std::size_t Architecture::network_params() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) n += layers[l] * layers[l + 1] + layers[l + 1];
  return n;
}

std::size_t Architecture::param_count() const {
  return network_params() + (head == HeadKind::gaussian ? output_dim() : 0);
}

void Architecture::validate() const {
  if (layers.size() < 2) throw InvalidArgument("architecture needs input and output layers");
  for (auto n : layers) {
    if (n == 0) throw InvalidArgument("architecture layer sizes must be positive");
  }
  if (head == HeadKind::scalar && output_dim() != 1) throw InvalidArgument("scalar head needs one output");
  if (head == HeadKind::categorical && output_dim() < 1) throw InvalidArgument("categorical head needs outputs");
}

void PolicyParams::validate() const {
  arch.validate();
  if (arch.head == HeadKind::scalar) throw InvalidArgument("policy head must be categorical or gaussian");
  if (static_cast<std::size_t>(theta.size()) != arch.param_count()) {
    throw InvalidArgument("policy parameter vector length " + std::to_string(theta.size()) +
                          " does not match architecture (" + std::to_string(arch.param_count()) + ")");
  }
  if (arch.head == HeadKind::gaussian && !log_std().allFinite()) throw InvalidArgument("log-std entries must be finite");
}

Vec PolicyParams::log_std() const {
  if (arch.head != HeadKind::gaussian) return Vec();
  return theta.tail(static_cast<Eigen::Index>(arch.output_dim()));
}

void ValueParams::validate() const {
  arch.validate();
  if (arch.head != HeadKind::scalar) throw InvalidArgument("value network must have a scalar head");
  if (static_cast<std::size_t>(theta.size()) != arch.param_count()) {
    throw InvalidArgument("value parameter vector length does not match architecture");
  }
}

Architecture make_architecture(std::size_t input, const std::vector<std::size_t>& hidden, std::size_t output,
                               HeadKind head, Activation act) {
  Architecture a;
  a.layers.push_back(input);
  a.layers.insert(a.layers.end(), hidden.begin(), hidden.end());
  a.layers.push_back(output);
  a.activation = act;
  a.head = head;
  a.validate();
  return a;
}

namespace {

Vec init_network(const Architecture& arch, Rng& rng, double output_gain) {
  Vec theta = Vec::Zero(static_cast<Eigen::Index>(arch.param_count()));
  std::size_t offset = 0;
  const std::size_t n_layers = arch.layers.size() - 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const std::size_t in = arch.layers[l];
    const std::size_t out = arch.layers[l + 1];
    const double gain = (l + 1 == n_layers) ? output_gain : 1.0;
    std::normal_distribution<double> normal(0.0, gain / std::sqrt(static_cast<double>(in)));
    for (std::size_t k = 0; k < in * out; ++k) theta(static_cast<Eigen::Index>(offset + k)) = normal(rng);
    offset += in * out + out;
  }
  return theta;
}

}  // namespace

PolicyParams init_policy(const Architecture& arch, Rng& rng, double init_log_std) {
  PolicyParams p{arch, init_network(arch, rng, 0.01)};
  if (arch.head == HeadKind::gaussian) {
    p.theta.tail(static_cast<Eigen::Index>(arch.output_dim())).setConstant(init_log_std);
  }
  p.validate();
  return p;
}

ValueParams init_value(const Architecture& arch, Rng& rng) {
  ValueParams v{arch, init_network(arch, rng, 1.0)};
  v.validate();
  return v;
}

Mat mlp_forward(const Architecture& arch, const Vec& theta, const Mat& inputs, ForwardCache* cache) {
  if (static_cast<std::size_t>(inputs.cols()) != arch.input_dim()) {
    throw InvalidArgument("network input has dimension " + std::to_string(inputs.cols()) + ", expected " +
                          std::to_string(arch.input_dim()));
  }
  if (cache) {
    cache->activations.clear();
    cache->activations.reserve(arch.layers.size());
    cache->activations.push_back(inputs);
  }
  Mat a = inputs;
  std::size_t offset = 0;
  const std::size_t n_layers = arch.layers.size() - 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    auto [w, b] = layer(arch, theta, l, offset);
    Mat z = a * w.transpose();
    z.rowwise() += b.transpose();
    if (l + 1 < n_layers) activate(arch.activation, z);
    a = std::move(z);
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

Vec mlp_backward(const Architecture& arch, const Vec& theta, const ForwardCache& cache, const Mat& d_out) {
  const std::size_t n_layers = arch.layers.size() - 1;
  Vec grad = Vec::Zero(static_cast<Eigen::Index>(arch.network_params()));
  std::vector<std::size_t> offsets(n_layers);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    offsets[l] = offset;
    offset += arch.layers[l] * arch.layers[l + 1] + arch.layers[l + 1];
  }
  Mat dz = d_out;
  for (std::size_t l = n_layers; l-- > 0;) {
    const auto in = static_cast<Eigen::Index>(arch.layers[l]);
    const auto out = static_cast<Eigen::Index>(arch.layers[l + 1]);
    const Mat& a_prev = cache.activations[l];
    const double* base = theta.data() + offsets[l];
    ConstMap w(base, out, in);
    Eigen::Map<Mat> gw(grad.data() + offsets[l], out, in);
    Eigen::Map<Vec> gb(grad.data() + offsets[l] + in * out, out);
    gw.noalias() = dz.transpose() * a_prev;
    gb = dz.colwise().sum().transpose();
    if (l > 0) {
      Mat da = dz * w;
      dz = da.cwiseProduct(activation_grad(arch.activation, a_prev));
    }
  }
  return grad;
}

Mat mlp_jvp(const Architecture& arch, const Vec& theta, const ForwardCache& cache, const Vec& direction) {
  const std::size_t n_layers = arch.layers.size() - 1;
  const Eigen::Index n = cache.activations.front().rows();
  Mat da = Mat::Zero(n, static_cast<Eigen::Index>(arch.input_dim()));
  std::size_t offset = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto in = static_cast<Eigen::Index>(arch.layers[l]);
    const auto out = static_cast<Eigen::Index>(arch.layers[l + 1]);
    ConstMap w(theta.data() + offset, out, in);
    ConstMap dw(direction.data() + offset, out, in);
    ConstVecMap db(direction.data() + offset + in * out, out);
    offset += static_cast<std::size_t>(in * out + out);
    const Mat& a_prev = cache.activations[l];
    Mat dz = da * w.transpose() + a_prev * dw.transpose();
    dz.rowwise() += db.transpose();
    if (l + 1 < n_layers) {
      da = dz.cwiseProduct(activation_grad(arch.activation, cache.activations[l + 1]));
    } else {
      da = std::move(dz);
    }
  }
  return da;
}

ActionDistribution policy_forward(const PolicyParams& params, const Vec& obs) {
  const Mat out = mlp_forward(params.arch, params.theta, obs.transpose());
  if (params.arch.head == HeadKind::categorical) return Categorical{out.row(0).transpose()};
  return Gaussian{out.row(0).transpose(), params.log_std()};
}

double value_forward(const ValueParams& params, const Vec& obs) {
  return mlp_forward(params.arch, params.theta, obs.transpose())(0, 0);
}

Vec value_batch(const ValueParams& params, const Mat& obs) { return mlp_forward(params.arch, params.theta, obs).col(0); }

Vec probabilities(const Categorical& dist) { return log_softmax(dist.logits).array().exp().matrix(); }

double log_prob(const ActionDistribution& dist, const Action& action) {
  if (const auto* c = std::get_if<Categorical>(&dist)) {
    if (action.index < 0 || action.index >= c->logits.size()) {
      throw InvalidArgument("action index " + std::to_string(action.index) + " outside [0, " +
                            std::to_string(c->logits.size()) + ")");
    }
    return log_softmax(c->logits)(action.index);
  }
  const auto& g = std::get<Gaussian>(dist);
  if (action.value.size() != g.mean.size()) throw InvalidArgument("action dimension does not match distribution");
  const Vec z = ((action.value - g.mean).array() / g.log_std.array().exp()).matrix();
  return -0.5 * z.squaredNorm() - g.log_std.sum() - 0.5 * kLog2Pi * static_cast<double>(g.mean.size());
}

double kl_divergence(const ActionDistribution& p, const ActionDistribution& q) {
  if (p.index() != q.index()) throw InvalidArgument("kl_divergence: distribution families differ");
  if (const auto* cp = std::get_if<Categorical>(&p)) {
    const auto& cq = std::get<Categorical>(q);
    if (cp->logits.size() != cq.logits.size()) throw InvalidArgument("kl_divergence: dimension mismatch");
    const Vec lp = log_softmax(cp->logits);
    const Vec lq = log_softmax(cq.logits);
    return std::max(0.0, (lp.array().exp() * (lp - lq).array()).sum());
  }
  const auto& gp = std::get<Gaussian>(p);
  const auto& gq = std::get<Gaussian>(q);
  if (gp.mean.size() != gq.mean.size()) throw InvalidArgument("kl_divergence: dimension mismatch");
  const Eigen::ArrayXd vp = (2.0 * gp.log_std.array()).exp();
  const Eigen::ArrayXd vq = (2.0 * gq.log_std.array()).exp();
  const Eigen::ArrayXd dm = (gp.mean - gq.mean).array();
  return std::max(0.0, (gq.log_std.array() - gp.log_std.array() + (vp + dm.square()) / (2.0 * vq) - 0.5).sum());
}

double entropy(const ActionDistribution& dist) {
  if (const auto* c = std::get_if<Categorical>(&dist)) {
    const Vec lp = log_softmax(c->logits);
    return -(lp.array().exp() * lp.array()).sum();
  }
  const auto& g = std::get<Gaussian>(dist);
  return (g.log_std.array() + 0.5 * (kLog2Pi + 1.0)).sum();
}

Action sample_action(const ActionDistribution& dist, Rng& rng) {
  if (const auto* c = std::get_if<Categorical>(&dist)) {
    const Vec p = probabilities(*c);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      acc += p(i);
      if (u < acc) return Action::discrete(static_cast<int>(i));
    }
    // Rounding left u above the final cumulative sum: last class with mass.
    for (Eigen::Index i = p.size(); i-- > 0;) {
      if (p(i) > 0.0) return Action::discrete(static_cast<int>(i));
    }
    return Action::discrete(0);
  }
  const auto& g = std::get<Gaussian>(dist);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec a(g.mean.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = g.mean(i) + std::exp(g.log_std(i)) * normal(rng);
  return Action::continuous(std::move(a));
}

Action greedy_action(const ActionDistribution& dist) {
  if (const auto* c = std::get_if<Categorical>(&dist)) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < c->logits.size(); ++i) {
      if (c->logits(i) > c->logits(best)) best = i;
    }
    return Action::discrete(static_cast<int>(best));
  }
  return Action::continuous(std::get<Gaussian>(dist).mean);
}

PolicyBatch evaluate_policy(const PolicyParams& params, const Mat& obs) {
  PolicyBatch b;
  b.head = params.arch.head;
  b.out = mlp_forward(params.arch, params.theta, obs, &b.cache);
  b.log_std = params.log_std();
  return b;
}

HeadGradient HeadGradient::zeros_like(const PolicyBatch& b) {
  return {Mat::Zero(b.out.rows(), b.out.cols()), Vec::Zero(b.log_std.size())};
}

Vec backprop(const PolicyParams& params, const PolicyBatch& batch, const HeadGradient& grad) {
  Vec full = Vec::Zero(static_cast<Eigen::Index>(params.arch.param_count()));
  const auto net = static_cast<Eigen::Index>(params.arch.network_params());
  full.head(net) = mlp_backward(params.arch, params.theta, batch.cache, grad.d_out);
  if (params.arch.head == HeadKind::gaussian && grad.d_log_std.size() > 0) {
    full.tail(static_cast<Eigen::Index>(params.arch.output_dim())) = grad.d_log_std;
  }
  return full;
}

ValueAndGradient gradient(const PolicyParams& params, const Mat& obs, const HeadObjective& head_objective,
                          const ParamObjective& param_objective) {
  ValueAndGradient res;
  res.gradient = Vec::Zero(static_cast<Eigen::Index>(params.arch.param_count()));
  if (head_objective) {
    const PolicyBatch batch = evaluate_policy(params, obs);
    HeadGradient g = HeadGradient::zeros_like(batch);
    res.value += head_objective(batch, g);
    res.gradient += backprop(params, batch, g);
  }
  if (param_objective) {
    Vec g = Vec::Zero(res.gradient.size());
    res.value += param_objective(params.theta, g);
    res.gradient += g;
  }
  return res;
}

Vec log_probs(const PolicyBatch& batch, const ActionBatch& actions) {
  const Eigen::Index n = batch.out.rows();
  if (static_cast<Eigen::Index>(actions.size()) != n) throw InvalidArgument("log_probs: batch size mismatch");
  Vec out(n);
  if (batch.head == HeadKind::categorical) {
    const Vec lse = row_lse(batch.out);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int a = actions.indices[static_cast<std::size_t>(i)];
      if (a < 0 || a >= batch.out.cols()) throw InvalidArgument("log_probs: invalid action index");
      out(i) = batch.out(i, a) - lse(i);
    }
    return out;
  }
  const Eigen::ArrayXd inv_std = (-batch.log_std.array()).exp();
  const double c = -batch.log_std.sum() - 0.5 * kLog2Pi * static_cast<double>(batch.out.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::ArrayXd z = (actions.values.row(i) - batch.out.row(i)).transpose().array() * inv_std;
    out(i) = -0.5 * z.square().sum() + c;
  }
  return out;
}

void add_log_prob_grad(const PolicyBatch& batch, const ActionBatch& actions, const Vec& weights, HeadGradient& g) {
  const Eigen::Index n = batch.out.rows();
  if (batch.head == HeadKind::categorical) {
    const Mat p = softmax_rows(batch.out);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = weights(i);
      if (w == 0.0) continue;
      g.d_out.row(i) -= w * p.row(i);
      g.d_out(i, actions.indices[static_cast<std::size_t>(i)]) += w;
    }
    return;
  }
  const Eigen::ArrayXd inv_var = (-2.0 * batch.log_std.array()).exp();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = weights(i);
    if (w == 0.0) continue;
    const Eigen::ArrayXd diff = (actions.values.row(i) - batch.out.row(i)).transpose().array();
    g.d_out.row(i) += (w * diff * inv_var).matrix().transpose();
    g.d_log_std += (w * (diff.square() * inv_var - 1.0)).matrix();
  }
}

Vec entropies(const PolicyBatch& batch) {
  const Eigen::Index n = batch.out.rows();
  Vec out(n);
  if (batch.head == HeadKind::categorical) {
    const Vec lse = row_lse(batch.out);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::ArrayXd lp = batch.out.row(i).transpose().array() - lse(i);
      out(i) = -(lp.exp() * lp).sum();
    }
    return out;
  }
  out.setConstant((batch.log_std.array() + 0.5 * (kLog2Pi + 1.0)).sum());
  return out;
}

void add_entropy_grad(const PolicyBatch& batch, const Vec& weights, HeadGradient& g) {
  if (batch.head == HeadKind::categorical) {
    const Mat p = softmax_rows(batch.out);
    for (Eigen::Index i = 0; i < batch.out.rows(); ++i) {
      const double w = weights(i);
      if (w == 0.0) continue;
      const double mean_logit = p.row(i).dot(batch.out.row(i));
      g.d_out.row(i) -= w * (p.row(i).array() * (batch.out.row(i).array() - mean_logit)).matrix();
    }
    return;
  }
  g.d_log_std.array() += weights.sum();
}

Vec kl_rows(const PolicyBatch& p, const PolicyBatch& q) {
  require_same_head(p, q);
  const Eigen::Index n = p.out.rows();
  Vec out(n);
  if (p.head == HeadKind::categorical) {
    const Vec lse_p = row_lse(p.out);
    const Vec lse_q = row_lse(q.out);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::ArrayXd lp = p.out.row(i).transpose().array() - lse_p(i);
      const Eigen::ArrayXd lq = q.out.row(i).transpose().array() - lse_q(i);
      out(i) = std::max(0.0, (lp.exp() * (lp - lq)).sum());
    }
    return out;
  }
  const Eigen::ArrayXd vp = (2.0 * p.log_std.array()).exp();
  const Eigen::ArrayXd vq = (2.0 * q.log_std.array()).exp();
  const double base = (q.log_std - p.log_std).sum();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::ArrayXd dm = (p.out.row(i) - q.out.row(i)).transpose().array();
    out(i) = std::max(0.0, base + ((vp + dm.square()) / (2.0 * vq) - 0.5).sum());
  }
  return out;
}

void add_kl_grad_q(const PolicyBatch& p, const PolicyBatch& q, const Vec& weights, HeadGradient& g) {
  require_same_head(p, q);
  if (p.head == HeadKind::categorical) {
    const Mat pp = softmax_rows(p.out);
    const Mat pq = softmax_rows(q.out);
    for (Eigen::Index i = 0; i < p.out.rows(); ++i) g.d_out.row(i) += weights(i) * (pq.row(i) - pp.row(i));
    return;
  }
  const Eigen::ArrayXd vp = (2.0 * p.log_std.array()).exp();
  const Eigen::ArrayXd inv_vq = (-2.0 * q.log_std.array()).exp();
  for (Eigen::Index i = 0; i < p.out.rows(); ++i) {
    const double w = weights(i);
    const Eigen::ArrayXd dm = (q.out.row(i) - p.out.row(i)).transpose().array();
    g.d_out.row(i) += (w * dm * inv_vq).matrix().transpose();
    g.d_log_std += (w * (1.0 - (vp + dm.square()) * inv_vq)).matrix();
  }
}

Mat stack_observations(const Batch& batch) {
  std::size_t n = 0;
  for (const auto& t : batch) n += t.size();
  if (n == 0) return Mat();
  const auto dim = batch.front().steps.front().observation.size();
  Mat obs(static_cast<Eigen::Index>(n), dim);
  Eigen::Index r = 0;
  for (const auto& t : batch) {
    for (const auto& s : t.steps) obs.row(r++) = s.observation.transpose();
  }
  return obs;
}

ActionBatch stack_actions(const Batch& batch) {
  ActionBatch out;
  std::size_t n = 0;
  for (const auto& t : batch) n += t.size();
  if (n == 0) return out;
  const Action& first = batch.front().steps.front().action;
  if (first.is_discrete()) {
    out.indices.reserve(n);
    for (const auto& t : batch) {
      for (const auto& s : t.steps) out.indices.push_back(s.action.index);
    }
    return out;
  }
  out.values.resize(static_cast<Eigen::Index>(n), first.value.size());
  Eigen::Index r = 0;
  for (const auto& t : batch) {
    for (const auto& s : t.steps) out.values.row(r++) = s.action.value.transpose();
  }
  return out;
}

std::string to_string(const Architecture& arch) {
  std::ostringstream os;
  os << "layers";
  for (auto n : arch.layers) os << ' ' << n;
  os << " activation " << activation_name(arch.activation) << " head " << head_name(arch.head);
  return os.str();
}

namespace {

void write_params(std::ostream& out, const char* kind, const Architecture& arch, const Vec& theta) {
  out << kind << '\n';
  out << "layers";
  for (auto n : arch.layers) out << ' ' << n;
  out << "\nactivation " << activation_name(arch.activation) << '\n';
  out << "head " << head_name(arch.head) << '\n';
  out << "params " << theta.size() << '\n';
  for (Eigen::Index i = 0; i < theta.size(); ++i) out << text::format_double(theta(i)) << '\n';
}

struct CkptReader {
  std::istream& in;
  std::size_t line_no = 0;
  std::string line;

  bool next(std::vector<std::string_view>& tok) {
    while (std::getline(in, line)) {
      ++line_no;
      auto t = text::trim(line);
      if (t.empty() || t.front() == '#') continue;
      tok = text::split_ws(t);
      return true;
    }
    return false;
  }
  std::vector<std::string_view> expect(const char* tag) {
    std::vector<std::string_view> tok;
    if (!next(tok)) throw ParseError(std::string("checkpoint: expected '") + tag + "'", line_no + 1, 1);
    if (tok.front() != tag) throw ParseError(std::string("checkpoint: expected '") + tag + "'", line_no, 1);
    return tok;
  }
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError("checkpoint: " + msg, line_no, 1); }

  std::pair<Architecture, Vec> section() {
    Architecture arch;
    auto tok = expect("layers");
    for (std::size_t i = 1; i < tok.size(); ++i) {
      std::size_t n = 0;
      if (!text::parse_int(tok[i], n)) fail("bad layer size");
      arch.layers.push_back(n);
    }
    tok = expect("activation");
    if (tok.size() != 2) fail("activation takes one value");
    if (tok[1] == "tanh") arch.activation = Activation::tanh;
    else if (tok[1] == "relu") arch.activation = Activation::relu;
    else fail("unknown activation");
    tok = expect("head");
    if (tok.size() != 2) fail("head takes one value");
    if (tok[1] == "categorical") arch.head = HeadKind::categorical;
    else if (tok[1] == "gaussian") arch.head = HeadKind::gaussian;
    else if (tok[1] == "scalar") arch.head = HeadKind::scalar;
    else fail("unknown head");
    try {
      arch.validate();
    } catch (const InvalidArgument& e) {
      fail(e.what());
    }
    tok = expect("params");
    std::size_t n = 0;
    if (tok.size() != 2 || !text::parse_int(tok[1], n)) fail("bad parameter count");
    if (n != arch.param_count()) fail("parameter count does not match architecture");
    Vec theta(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::string_view> v;
      if (!next(v) || v.size() != 1) fail("expected one parameter per line");
      double x = 0.0;
      if (!text::parse_double(v[0], x)) fail("bad parameter value");
      theta(static_cast<Eigen::Index>(i)) = x;
    }
    return {arch, theta};
  }
};

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out << "pose-checkpoint 1\n";
  write_params(out, "policy", ckpt.policy.arch, ckpt.policy.theta);
  if (ckpt.value) write_params(out, "value", ckpt.value->arch, ckpt.value->theta);
}

Checkpoint read_checkpoint(std::istream& in) {
  CkptReader r{in, 0, {}};
  auto tok = r.expect("pose-checkpoint");
  if (tok.size() != 2 || tok[1] != "1") r.fail("unsupported version");
  r.expect("policy");
  Checkpoint ckpt;
  auto [arch, theta] = r.section();
  ckpt.policy = PolicyParams{arch, theta};
  try {
    ckpt.policy.validate();
  } catch (const InvalidArgument& e) {
    r.fail(e.what());
  }
  std::vector<std::string_view> next;
  if (r.next(next)) {
    if (next.front() != "value") r.fail("expected 'value' section");
    auto [varch, vtheta] = r.section();
    ckpt.value = ValueParams{varch, vtheta};
    try {
      ckpt.value->validate();
    } catch (const InvalidArgument& e) {
      r.fail(e.what());
    }
  }
  return ckpt;
}

}  // namespace pose
