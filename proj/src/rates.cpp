#include "fedq/rates.hpp"

#include <algorithm>
#include <cmath>

#include "fedq/error.hpp"

namespace fedq {
namespace {

constexpr std::int64_t kLogSpaceRange = 10000;

}  // namespace

void validate(const RateParams& p) {
  require(p.horizon >= 1, "horizon must be >= 1");
  require(p.bonus_scale > 0.0, "bonus scale c must be positive");
  require(p.log_factor > 0.0, "log factor iota must be positive");
}

void validate(const BernsteinParams& p) {
  require(p.horizon >= 1 && p.num_agents >= 1 && p.num_states >= 1 && p.num_actions >= 1,
          "Bernstein dimensions must be positive");
  require(p.bonus_scale > 0.0, "bonus scale c' must be positive");
  require(p.log_factor > 0.0, "log factor iota must be positive");
}

double eta(std::int64_t t, int horizon) {
  require(t >= 1, "eta requires t >= 1");
  return static_cast<double>(horizon + 1) / static_cast<double>(horizon + t);
}

double eta_weight(std::int64_t i, std::int64_t t, int horizon) {
  require(i >= 0 && i <= t, "eta_weight requires 0 <= i <= t");
  if (i == 0) return t == 0 ? 1.0 : 0.0;
  if (i == t) return eta(t, horizon);
  return eta(i, horizon) * eta_c(i + 1, t, horizon);
}

double eta_c(std::int64_t t1, std::int64_t t2, int horizon) {
  require(t1 >= 1 && t1 <= t2, "eta_c requires 1 <= t1 <= t2");
  if (t1 == 1) return 0.0;
  // 1 - eta_t = (t - 1) / (H + t)
  if (t2 - t1 > kLogSpaceRange) {
    double log_prod = 0.0;
    for (std::int64_t t = t1; t <= t2; ++t) {
      log_prod += std::log(static_cast<double>(t - 1) / static_cast<double>(horizon + t));
    }
    return std::exp(log_prod);
  }
  double prod = 1.0;
  for (std::int64_t t = t1; t <= t2; ++t) {
    prod *= static_cast<double>(t - 1) / static_cast<double>(horizon + t);
  }
  return prod;
}

double hoeffding_bonus(std::int64_t t, const RateParams& p) {
  require(t >= 1, "bonus requires t >= 1");
  validate(p);
  const double H = p.horizon;
  return p.bonus_scale * std::sqrt(H * H * H * p.log_factor / static_cast<double>(t));
}

double hoeffding_round_bonus(std::int64_t t_prev, std::int64_t t_new, const RateParams& p) {
  require(t_prev >= 0 && t_prev < t_new, "round bonus requires t_prev < t_new");
  // Walk backwards so the tail product prod_{i>t}(1 - eta_i) is a running factor.
  double sum = 0.0;
  double tail = 1.0;
  for (std::int64_t t = t_new; t > t_prev; --t) {
    const double rate = eta(t, p.horizon);
    sum += rate * tail * hoeffding_bonus(t, p);
    tail *= 1.0 - rate;
    if (tail == 0.0) break;
  }
  return sum;
}

double bernstein_beta(std::int64_t t, double variance, const BernsteinParams& p) {
  require(t >= 1, "Bernstein bonus requires t >= 1");
  require(variance >= 0.0, "variance estimate must be nonnegative");
  const double H = p.horizon;
  const double SA = static_cast<double>(p.num_states) * p.num_actions;
  const double iota = p.log_factor;
  const double td = static_cast<double>(t);
  const double variance_term = std::sqrt(H * iota / td * (variance + H)) +
                               iota * (std::sqrt(std::pow(H, 7) * SA) +
                                       std::sqrt(p.num_agents * SA * std::pow(H, 6))) /
                                   td;
  const double hoeffding_term = std::sqrt(H * H * H * iota / td);
  return p.bonus_scale * std::min(variance_term, hoeffding_term);
}

double bernstein_per_visit_bonus(std::int64_t t, double beta_t, double beta_prev, int horizon) {
  require(t >= 1, "per-visit bonus requires t >= 1");
  if (t == 1) return beta_t / 2.0;
  const double rate = eta(t, horizon);
  return (beta_t - (1.0 - rate) * beta_prev) / (2.0 * rate);
}

}  // namespace fedq
