#include "graphmpa/modeseek.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "graphmpa/error.hpp"
#include "graphmpa/quadrature.hpp"
#include "graphmpa/random.hpp"

namespace graphmpa::modeseek {

namespace {

std::vector<double> log_softmax(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - top);
  const double log_norm = top + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_norm;
  return out;
}

void check_distribution(std::span<const double> p, double tolerance, const char* what) {
  if (p.empty()) throw InputError(std::string(what) + ": empty distribution");
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x))
      throw InputError(std::string(what) + ": probabilities must be finite and non-negative");
    sum += x;
  }
  if (std::abs(sum - 1.0) > tolerance)
    throw InputError(std::string(what) + ": probabilities do not sum to 1");
}

constexpr double kLogSqrtTwoPi = 0.91893853320467274178;  // log(sqrt(2 pi))

// log p(x) and d log p / dx for an equal-variance mixture.
std::pair<double, double> mixture_log_density_slope(const GaussianMixtureTarget& t, double x) {
  double top = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(t.weights.size());
  for (std::size_t i = 0; i < t.weights.size(); ++i) {
    const double z = (x - t.means[i]) / t.std;
    terms[i] = std::log(t.weights[i]) - 0.5 * z * z;
    top = std::max(top, terms[i]);
  }
  double sum = 0.0, slope = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const double e = std::exp(terms[i] - top);
    sum += e;
    slope += e * -(x - t.means[i]) / (t.std * t.std);
  }
  return {top + std::log(sum) - kLogSqrtTwoPi - std::log(t.std), slope / sum};
}

}  // namespace

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  auto out = log_softmax(logits);
  for (double& x : out) x = std::exp(x);
  return out;
}

// ---------------------------------------------------------------------------
// Targets and closed forms

void GaussianMixtureTarget::validate() const {
  if (weights.empty() || weights.size() != means.size())
    throw InputError("mixture needs matching, non-empty weights and means");
  if (!(std > 0.0)) throw InputError("mixture std must be positive");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw InputError("mixture weights must be positive");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw InputError("mixture weights must sum to 1");
}

double GaussianMixtureTarget::log_density(double x) const {
  double top = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double z = (x - means[i]) / std;
    terms[i] = std::log(weights[i]) - 0.5 * z * z;
    top = std::max(top, terms[i]);
  }
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - top);
  return top + std::log(sum) - kLogSqrtTwoPi - std::log(std);
}

double GaussianMixtureTarget::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) m += weights[i] * means[i];
  return m;
}

CategoricalPolicy optimal_policy(const CategoricalPolicy& sft, const RewardSpec& reward) {
  if (sft.logits.empty()) throw InputError("optimal_policy: empty support");
  if (reward.rewards.size() != sft.logits.size())
    throw InputError("optimal_policy: rewards not aligned with the support");
  if (!(reward.beta > 0.0)) throw InputError("optimal_policy: beta must be positive");
  auto logits = log_softmax(sft.logits);
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += reward.rewards[i] / reward.beta;
  return CategoricalPolicy{log_softmax(logits)};
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InputError("kl_divergence: supports differ in size");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0) throw InputError("kl_divergence: negative probability");
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) throw InputError("kl_divergence: q is zero where p is positive");
    sum += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(sum, 0.0);
}

void ResponseSet::validate() const {
  if (items.empty()) throw InputError("response set is empty");
  if (model_dist.size() != items.size() || reward_dist.size() != items.size())
    throw InputError("response set distributions must cover exactly its items");
  check_distribution(model_dist, 1e-12, "model_dist");
  check_distribution(reward_dist, 1e-12, "reward_dist");
}

double ms_loss(std::span<const ResponseSet> sets) {
  if (sets.empty()) throw InputError("ms_loss: no response sets");
  double total = 0.0;
  for (const auto& s : sets) {
    s.validate();
    total += kl_divergence(s.model_dist, s.reward_dist);
  }
  return total / static_cast<double>(sets.size());
}

ResponseSet make_response_set(std::span<const double> logits, const RewardSpec& reward,
                              std::vector<std::size_t> items) {
  if (items.empty()) throw InputError("make_response_set: no items");
  if (!(reward.beta > 0.0)) throw InputError("make_response_set: beta must be positive");
  std::vector<double> z, r;
  for (auto i : items) {
    if (i >= logits.size() || i >= reward.rewards.size())
      throw InputError("make_response_set: item outside the support");
    z.push_back(logits[i]);
    r.push_back(reward.rewards[i] / reward.beta);
  }
  return ResponseSet{std::move(items), softmax(z), softmax(r)};
}

std::vector<std::vector<std::size_t>> sample_item_sets(const CategoricalPolicy& sft,
                                                       std::size_t count, std::size_t k,
                                                       std::uint64_t seed) {
  const auto probs = sft.probabilities();
  if (k == 0 || k > probs.size()) throw InputError("sample_item_sets: k out of range");
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> sets;
  sets.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    std::vector<double> remaining(probs);
    std::vector<std::size_t> items;
    for (std::size_t j = 0; j < k; ++j) {
      const double total = std::accumulate(remaining.begin(), remaining.end(), 0.0);
      double draw = rng.uniform() * total;
      std::size_t pick = remaining.size();
      for (std::size_t i = 0; i < remaining.size(); ++i) {
        if (remaining[i] <= 0.0) continue;
        pick = i;
        draw -= remaining[i];
        if (draw < 0.0) break;
      }
      items.push_back(pick);
      remaining[pick] = 0.0;
    }
    std::sort(items.begin(), items.end());
    sets.push_back(std::move(items));
  }
  return sets;
}

Objective parse_objective(const std::string& name) {
  if (name == "reverse" || name == "reverse_kl") return Objective::reverse_kl;
  if (name == "forward" || name == "forward_kl") return Objective::forward_kl;
  if (name == "ms" || name == "ms_loss") return Objective::ms_loss;
  throw InputError("unknown objective: " + name);
}

std::string to_string(Objective objective) {
  switch (objective) {
    case Objective::reverse_kl: return "reverse_kl";
    case Objective::forward_kl: return "forward_kl";
    case Objective::ms_loss: return "ms_loss";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Differentiable objectives

double DifferentiableObjective::value(std::span<const double> params) const {
  std::vector<double> scratch(param_count());
  return value_and_gradient(params, scratch);
}

void FreeLogits::logits(std::span<const double> params, std::span<double> out) const {
  std::copy(params.begin(), params.end(), out.begin());
}

void FreeLogits::backprop(std::span<const double>, std::span<const double> upstream,
                          std::span<double> gradient) const {
  for (std::size_t i = 0; i < n_; ++i) gradient[i] += upstream[i];
}

void DiscretizedGaussian::logits(std::span<const double> params, std::span<double> out) const {
  const double inv_var = std::exp(-2.0 * params[1]);
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    const double d = positions_[i] - params[0];
    out[i] = -0.5 * d * d * inv_var;
  }
}

void DiscretizedGaussian::backprop(std::span<const double> params,
                                   std::span<const double> upstream,
                                   std::span<double> gradient) const {
  const double inv_var = std::exp(-2.0 * params[1]);
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    const double d = positions_[i] - params[0];
    gradient[0] += upstream[i] * d * inv_var;
    gradient[1] += upstream[i] * d * d * inv_var;
  }
}

CategoricalObjective::CategoricalObjective(std::vector<double> target, Objective objective,
                                           std::shared_ptr<const LogitModel> model,
                                           std::vector<std::vector<std::size_t>> item_sets)
    : target_(std::move(target)),
      objective_(objective),
      model_(std::move(model)),
      item_sets_(std::move(item_sets)) {
  if (!model_) throw InputError("CategoricalObjective: no model");
  if (target_.size() != model_->support_size())
    throw InputError("CategoricalObjective: target and model supports differ");
  check_distribution(target_, 1e-9, "target");
  if (objective_ == Objective::ms_loss) {
    if (item_sets_.empty()) throw InputError("ms_loss objective needs response sets");
    for (const auto& s : item_sets_) {
      if (s.empty()) throw InputError("ms_loss objective: empty response set");
      for (auto i : s)
        if (i >= target_.size()) throw InputError("ms_loss objective: item outside the support");
    }
  }
  double total = 0.0;
  for (double t : target_) total += std::max(t, kTargetFloor);
  log_floored_.resize(target_.size());
  for (std::size_t i = 0; i < target_.size(); ++i)
    log_floored_[i] = std::log(std::max(target_[i], kTargetFloor) / total);
}

std::vector<double> CategoricalObjective::policy(std::span<const double> params) const {
  std::vector<double> z(model_->support_size());
  model_->logits(params, z);
  return softmax(z);
}

double CategoricalObjective::value_and_gradient(std::span<const double> params,
                                                std::span<double> gradient) const {
  const std::size_t n = model_->support_size();
  std::vector<double> z(n), upstream(n, 0.0);
  model_->logits(params, z);
  double loss = 0.0;

  switch (objective_) {
    case Objective::reverse_kl: {
      const auto log_pi = log_softmax(z);
      for (std::size_t i = 0; i < n; ++i) loss += std::exp(log_pi[i]) * (log_pi[i] - log_floored_[i]);
      for (std::size_t i = 0; i < n; ++i)
        upstream[i] = std::exp(log_pi[i]) * (log_pi[i] - log_floored_[i] - loss);
      break;
    }
    case Objective::forward_kl: {
      const auto log_pi = log_softmax(z);
      for (std::size_t i = 0; i < n; ++i) {
        if (target_[i] > 0.0) loss += target_[i] * (std::log(target_[i]) - log_pi[i]);
        upstream[i] = std::exp(log_pi[i]) - target_[i];
      }
      break;
    }
    case Objective::ms_loss: {
      const double scale = 1.0 / static_cast<double>(item_sets_.size());
      std::vector<double> zs, rs;
      for (const auto& set : item_sets_) {
        zs.clear();
        rs.clear();
        for (auto i : set) {
          zs.push_back(z[i]);
          rs.push_back(log_floored_[i]);
        }
        const auto log_q = log_softmax(zs);
        const auto log_p = log_softmax(rs);
        double set_loss = 0.0;
        for (std::size_t j = 0; j < set.size(); ++j)
          set_loss += std::exp(log_q[j]) * (log_q[j] - log_p[j]);
        for (std::size_t j = 0; j < set.size(); ++j)
          upstream[set[j]] += scale * std::exp(log_q[j]) * (log_q[j] - log_p[j] - set_loss);
        loss += scale * set_loss;
      }
      break;
    }
  }

  std::fill(gradient.begin(), gradient.end(), 0.0);
  model_->backprop(params, upstream, gradient);
  return loss;
}

GaussianObjective::GaussianObjective(GaussianMixtureTarget target, Objective objective,
                                     std::size_t quadrature_nodes)
    : target_(std::move(target)), objective_(objective), nodes_(quadrature_nodes) {
  target_.validate();
  if (objective_ == Objective::ms_loss)
    throw InputError("ms_loss is defined over finite response sets, not a continuous target");
}

double GaussianObjective::value_and_gradient(std::span<const double> params,
                                             std::span<double> gradient) const {
  const double mu = params[0];
  const double log_sigma = params[1];
  const double sigma = std::exp(log_sigma);
  const double inv_var = 1.0 / (sigma * sigma);

  double lo = mu, hi = mu;
  double mean_lo = target_.means.front(), mean_hi = target_.means.front();
  for (double m : target_.means) {
    lo = std::min(lo, m);
    hi = std::max(hi, m);
    mean_lo = std::min(mean_lo, m);
    mean_hi = std::max(mean_hi, m);
  }
  const double spread = 8.0 * std::max(target_.std, sigma);
  std::vector<double> xs, ws;
  GaussLegendre::rule(nodes_).mapped(lo - spread, hi + spread, xs, ws);

  // The domain moves with the parameters, so the gradient of the quadrature
  // sum also carries node-motion terms: d mid and d half per parameter.
  const double dlo_mu = mu < mean_lo ? 1.0 : 0.0;
  const double dhi_mu = mu > mean_hi ? 1.0 : 0.0;
  const double dspread_ls = sigma > target_.std ? spread : 0.0;
  const double mid = 0.5 * ((lo - spread) + (hi + spread));
  const double half = 0.5 * ((hi + spread) - (lo - spread));
  const double dmid_mu = 0.5 * (dlo_mu + dhi_mu);
  const double dhalf_mu = 0.5 * (dhi_mu - dlo_mu);
  const double dhalf_ls = dspread_ls;

  double loss = 0.0, g_mu = 0.0, g_ls = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double x = xs[i];
    const double d = x - mu;
    const double log_q = -kLogSqrtTwoPi - log_sigma - 0.5 * d * d * inv_var;
    const auto [log_p, dp_x] = mixture_log_density_slope(target_, x);
    const double dq_mu = d * inv_var;            // d log q / d mu
    const double dq_ls = d * d * inv_var - 1.0;  // d log q / d log sigma
    const double dq_x = -d * inv_var;            // d log q / d x
    double f, f_mu, f_ls, f_x;
    if (objective_ == Objective::reverse_kl) {
      const double q = std::exp(log_q);
      f = q * (log_q - log_p);
      const double factor = q * (log_q - log_p + 1.0);
      f_mu = factor * dq_mu;
      f_ls = factor * dq_ls;
      f_x = factor * dq_x - q * dp_x;
    } else {
      const double p = std::exp(log_p);
      f = p * (log_p - log_q);
      f_mu = -p * dq_mu;
      f_ls = -p * dq_ls;
      f_x = p * dp_x * (log_p - log_q + 1.0) - p * dq_x;
    }
    const double t = (x - mid) / half;
    loss += ws[i] * f;
    g_mu += ws[i] * (f_mu + f * dhalf_mu / half + f_x * (dmid_mu + t * dhalf_mu));
    g_ls += ws[i] * (f_ls + f * dhalf_ls / half + f_x * t * dhalf_ls);
  }
  gradient[0] = g_mu;
  gradient[1] = g_ls;
  return loss;
}

double grad_check(const DifferentiableObjective& objective, std::span<const double> params,
                  double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1e-2)) throw InputError("grad_check: epsilon out of range");
  const std::size_t n = objective.param_count();
  std::vector<double> analytic(n), probe(params.begin(), params.end());
  objective.value_and_gradient(params, analytic);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    probe[i] = params[i] + epsilon;
    const double up = objective.value(probe);
    probe[i] = params[i] - epsilon;
    const double down = objective.value(probe);
    probe[i] = params[i];
    const double numeric = (up - down) / (2.0 * epsilon);
    const double scale = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
  }
  return worst;
}

FitResult gradient_descent(const DifferentiableObjective& objective, std::vector<double> init,
                           std::size_t steps, double learning_rate) {
  if (steps == 0) throw InputError("gradient_descent: steps must be >= 1");
  if (!(learning_rate > 0.0)) throw InputError("gradient_descent: learning_rate must be positive");
  if (init.size() != objective.param_count())
    throw InputError("gradient_descent: wrong number of initial parameters");
  FitResult result;
  result.params = std::move(init);
  result.loss_trace.reserve(steps + 1);
  result.param_trace.reserve(steps + 1);
  std::vector<double> gradient(result.params.size());
  for (std::size_t step = 0; step <= steps; ++step) {
    const double loss = objective.value_and_gradient(result.params, gradient);
    bool finite = std::isfinite(loss);
    for (double g : gradient) finite = finite && std::isfinite(g);
    if (!finite)
      throw DivergenceError("loss diverged at step " + std::to_string(step), step);
    result.loss_trace.push_back(loss);
    result.param_trace.push_back(result.params);
    if (step == steps) break;
    for (std::size_t i = 0; i < gradient.size(); ++i) result.params[i] -= learning_rate * gradient[i];
  }
  return result;
}

FitResult fit_policy(const std::vector<double>& target, Objective objective,
                     const FitOptions& options) {
  const std::size_t n = target.size();
  if (n == 0) throw InputError("fit_policy: empty target");
  Rng rng(options.seed);
  std::vector<double> init(n);
  for (double& z : init) z = 0.5 * rng.normal();

  std::vector<std::vector<std::size_t>> sets;
  if (objective == Objective::ms_loss) {
    const CategoricalPolicy uniform{std::vector<double>(n, 0.0)};
    sets = sample_item_sets(uniform, options.set_count, std::min(options.set_size, n),
                            options.seed + 1);
  }
  const CategoricalObjective loss(target, objective, std::make_shared<FreeLogits>(n),
                                  std::move(sets));
  return gradient_descent(loss, std::move(init), options.steps, options.learning_rate);
}

FitResult fit_policy(const GaussianMixtureTarget& target, Objective objective,
                     const FitOptions& options) {
  const GaussianObjective loss(target, objective);
  Rng rng(options.seed);
  // mu starts at a draw from the target
  double pick = rng.uniform();
  std::size_t component = 0;
  while (component + 1 < target.weights.size() && pick >= target.weights[component])
    pick -= target.weights[component++];
  std::vector<double> init{target.means[component] + target.std * rng.normal(),
                           std::log(target.std)};
  return gradient_descent(loss, std::move(init), options.steps, options.learning_rate);
}

// ---------------------------------------------------------------------------
// Concentration comparison

ConcentrationTrial concentration_trial(std::uint64_t seed, const ConcentrationConfig& config) {
  const std::size_t n = config.support_size;
  if (n < 8) throw InputError("concentration_trial: support_size must be >= 8");
  Rng rng(seed);

  const auto first = static_cast<double>(rng.below(n));
  double second = first;
  while (std::abs(second - first) < 4.0) second = static_cast<double>(rng.below(n));
  const double width = rng.uniform(0.8, 1.5);
  const double h_first = rng.uniform(3.0, 4.0);
  const double h_second = h_first - rng.uniform(0.3, 1.0);

  std::vector<double> positions(n), rewards(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = static_cast<double>(i);
    positions[i] = y;
    const double a = (y - first) / width, b = (y - second) / width;
    rewards[i] = h_first * std::exp(-0.5 * a * a) + h_second * std::exp(-0.5 * b * b);
  }

  ConcentrationTrial trial;
  trial.top_item = static_cast<std::size_t>(
      std::max_element(rewards.begin(), rewards.end()) - rewards.begin());

  const CategoricalPolicy sft{std::vector<double>(n, 0.0)};
  const auto optimal = optimal_policy(sft, RewardSpec{rewards, config.beta}).probabilities();
  const auto sets = sample_item_sets(sft, config.set_count, config.set_size, seed + 1);
  const auto model = std::make_shared<DiscretizedGaussian>(positions);
  const std::vector<double> init{0.5 * static_cast<double>(n - 1),
                                 std::log(0.25 * static_cast<double>(n))};

  const auto top_log_prob = [&](const CategoricalObjective& objective) {
    const auto fit = gradient_descent(objective, init, config.steps, config.learning_rate);
    return std::log(objective.policy(fit.params)[trial.top_item]);
  };
  trial.ms_log_prob = top_log_prob(CategoricalObjective(optimal, Objective::ms_loss, model, sets));
  trial.forward_log_prob = top_log_prob(CategoricalObjective(optimal, Objective::forward_kl, model));
  return trial;
}

double interquartile_range(std::vector<double> values) {
  if (values.empty()) throw InputError("interquartile_range: no values");
  std::sort(values.begin(), values.end());
  const auto quantile = [&](double p) {
    const double h = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  return quantile(0.75) - quantile(0.25);
}

}  // namespace graphmpa::modeseek
