#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace graphmpa::modeseek {

std::vector<double> softmax(std::span<const double> logits);

/// Categorical policy over a finite response support, parameterized by logits.
struct CategoricalPolicy {
  std::vector<double> logits;

  std::size_t support_size() const noexcept { return logits.size(); }
  std::vector<double> probabilities() const { return softmax(logits); }
};

struct RewardSpec {
  std::vector<double> rewards;  // aligned with the support
  double beta = 1.0;
};

/// Equal-variance Gaussian mixture used as a continuous target.
struct GaussianMixtureTarget {
  std::vector<double> weights;
  std::vector<double> means;
  double std = 1.0;

  void validate() const;
  double log_density(double x) const;
  double mean() const;
};

/// Closed-form maximizer of E[r] - beta * KL(pi || sft):
/// pi*(y) proportional to sft(y) * exp(r(y) / beta).
CategoricalPolicy optimal_policy(const CategoricalPolicy& sft, const RewardSpec& reward);

/// sum_i p_i log(p_i / q_i). Throws InputError on length mismatch or when
/// q_i = 0 where p_i > 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// K sampled responses with the model's and the reward's distributions
/// restricted to them.
struct ResponseSet {
  std::vector<std::size_t> items;
  std::vector<double> model_dist;
  std::vector<double> reward_dist;

  void validate() const;
};

/// Mean over sets of KL(model_dist || reward_dist).
double ms_loss(std::span<const ResponseSet> sets);

/// Restricted softmax of the logits and of rewards / beta over `items`.
ResponseSet make_response_set(std::span<const double> logits, const RewardSpec& reward,
                              std::vector<std::size_t> items);

/// `count` sets of `k` distinct items drawn from `sft` without replacement.
std::vector<std::vector<std::size_t>> sample_item_sets(const CategoricalPolicy& sft,
                                                       std::size_t count, std::size_t k,
                                                       std::uint64_t seed);

enum class Objective { reverse_kl, forward_kl, ms_loss };

Objective parse_objective(const std::string& name);
std::string to_string(Objective objective);

/// A scalar loss with an analytic gradient.
class DifferentiableObjective {
 public:
  virtual ~DifferentiableObjective() = default;
  virtual std::size_t param_count() const = 0;
  virtual double value(std::span<const double> params) const;
  /// Writes d loss / d params into `gradient` and returns the loss.
  virtual double value_and_gradient(std::span<const double> params,
                                    std::span<double> gradient) const = 0;
};

/// Maps parameters to logits over a finite support.
class LogitModel {
 public:
  virtual ~LogitModel() = default;
  virtual std::size_t support_size() const = 0;
  virtual std::size_t param_count() const = 0;
  virtual void logits(std::span<const double> params, std::span<double> out) const = 0;
  /// Accumulates (d logits / d params)^T * upstream into `gradient`.
  virtual void backprop(std::span<const double> params, std::span<const double> upstream,
                        std::span<double> gradient) const = 0;
};

/// Logits are the parameters.
class FreeLogits final : public LogitModel {
 public:
  explicit FreeLogits(std::size_t n) : n_(n) {}
  std::size_t support_size() const override { return n_; }
  std::size_t param_count() const override { return n_; }
  void logits(std::span<const double> params, std::span<double> out) const override;
  void backprop(std::span<const double> params, std::span<const double> upstream,
                std::span<double> gradient) const override;

 private:
  std::size_t n_;
};

/// Unimodal family over ordered positions: logit_i = -(y_i - mu)^2 / (2 sigma^2),
/// params (mu, log sigma).
class DiscretizedGaussian final : public LogitModel {
 public:
  explicit DiscretizedGaussian(std::vector<double> positions) : positions_(std::move(positions)) {}
  std::size_t support_size() const override { return positions_.size(); }
  std::size_t param_count() const override { return 2; }
  void logits(std::span<const double> params, std::span<double> out) const override;
  void backprop(std::span<const double> params, std::span<const double> upstream,
                std::span<double> gradient) const override;

 private:
  std::vector<double> positions_;
};

/// Target probabilities below this are raised to it (then renormalized)
/// wherever the target appears inside a log, so point masses stay finite.
inline constexpr double kTargetFloor = 1e-12;

/// Categorical objectives against a target distribution.
///
/// reverse_kl: KL(pi || target); forward_kl: KL(target || pi);
/// ms_loss: mean over `item_sets` of KL(pi restricted || target restricted).
class CategoricalObjective final : public DifferentiableObjective {
 public:
  CategoricalObjective(std::vector<double> target, Objective objective,
                       std::shared_ptr<const LogitModel> model,
                       std::vector<std::vector<std::size_t>> item_sets = {});

  std::size_t param_count() const override { return model_->param_count(); }
  double value_and_gradient(std::span<const double> params,
                            std::span<double> gradient) const override;
  /// Policy probabilities over the full support.
  std::vector<double> policy(std::span<const double> params) const;

 private:
  std::vector<double> target_;
  std::vector<double> log_floored_;
  Objective objective_;
  std::shared_ptr<const LogitModel> model_;
  std::vector<std::vector<std::size_t>> item_sets_;
};

/// Single Gaussian N(mu, sigma), params (mu, log sigma), fitted to a mixture
/// by reverse or forward KL. Integrals use 401-node Gauss-Legendre on
/// [lowest mean - 8 s, highest mean + 8 s], where the means and s (the widest
/// std) include the fitted Gaussian.
class GaussianObjective final : public DifferentiableObjective {
 public:
  GaussianObjective(GaussianMixtureTarget target, Objective objective,
                    std::size_t quadrature_nodes = 401);

  std::size_t param_count() const override { return 2; }
  double value_and_gradient(std::span<const double> params,
                            std::span<double> gradient) const override;

 private:
  GaussianMixtureTarget target_;
  Objective objective_;
  std::size_t nodes_;
};

/// Largest coordinate-wise |analytic - central difference| / max(1, |analytic|, |numeric|).
double grad_check(const DifferentiableObjective& objective, std::span<const double> params,
                  double epsilon);

struct FitResult {
  std::vector<double> params;
  std::vector<double> loss_trace;                 // loss at step 0..steps
  std::vector<std::vector<double>> param_trace;   // params at step 0..steps
};

/// Plain gradient descent. Throws DivergenceError on a non-finite loss.
FitResult gradient_descent(const DifferentiableObjective& objective, std::vector<double> init,
                           std::size_t steps, double learning_rate);

struct FitOptions {
  std::size_t steps = 2000;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  /// ms_loss only: number and size of sampled response sets (uniform sft).
  std::size_t set_count = 64;
  std::size_t set_size = 4;
};

/// Fits free logits to a categorical target. Initial logits are N(0, 0.5^2)
/// draws from `seed`.
FitResult fit_policy(const std::vector<double>& target, Objective objective,
                     const FitOptions& options);

/// Fits (mu, log sigma) to a mixture. Initial mu is a sample of the target
/// drawn with `seed`; sigma starts at the target's std.
/// ms_loss is rejected: it is defined over finite response sets.
FitResult fit_policy(const GaussianMixtureTarget& target, Objective objective,
                     const FitOptions& options);

/// One instance of the concentration comparison: a two-bump reward over an
/// ordered support, a unimodal policy family, and the top-reward item's
/// log-probability after ms_loss training and after forward-KL training.
struct ConcentrationConfig {
  std::size_t support_size = 16;
  std::size_t set_count = 64;
  std::size_t set_size = 4;
  double beta = 1.0;
  std::size_t steps = 1500;
  double learning_rate = 0.2;
};

struct ConcentrationTrial {
  std::size_t top_item = 0;
  double ms_log_prob = 0.0;
  double forward_log_prob = 0.0;
};

ConcentrationTrial concentration_trial(std::uint64_t seed, const ConcentrationConfig& config);

/// Interquartile range with linear interpolation between order statistics.
double interquartile_range(std::vector<double> values);

}  // namespace graphmpa::modeseek
