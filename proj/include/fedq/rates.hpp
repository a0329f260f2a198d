#pragma once

#include <cstdint>

namespace fedq {

/// Constants of the Hoeffding bonus b_t = c * sqrt(H^3 * iota / t).
struct RateParams {
  int horizon = 1;
  double bonus_scale = 2.0;
  double log_factor = 1.0;
};

/// Constants of the variance-aware bonus; bonus_scale is c'.
struct BernsteinParams {
  int horizon = 1;
  double bonus_scale = 2.0;
  double log_factor = 1.0;
  int num_agents = 1;
  int num_states = 1;
  int num_actions = 1;
};

void validate(const RateParams& p);
void validate(const BernsteinParams& p);

/// Learning rate (H + 1) / (H + t), t >= 1.
double eta(std::int64_t t, int horizon);

/// eta_i^t = eta_i * prod_{i' = i+1}^{t} (1 - eta_{i'}), with eta_0^0 = 1 and
/// eta_0^t = 0 for t >= 1.
double eta_weight(std::int64_t i, std::int64_t t, int horizon);

/// prod_{t = t1}^{t2} (1 - eta_t) for 1 <= t1 <= t2. Zero whenever t1 = 1.
/// Long ranges are accumulated in log space.
double eta_c(std::int64_t t1, std::int64_t t2, int horizon);

double hoeffding_bonus(std::int64_t t, const RateParams& p);

/// sum_{t = t_prev+1}^{t_new} eta_t^{t_new} * b_t.
double hoeffding_round_bonus(std::int64_t t_prev, std::int64_t t_new, const RateParams& p);

/// c' * min{ sqrt(H iota / t * (W + H)) + iota (sqrt(H^7 S A) + sqrt(M S A H^6)) / t,
///           sqrt(H^3 iota / t) }
double bernstein_beta(std::int64_t t, double variance, const BernsteinParams& p);

/// Per-visit bonus b_t recovered from consecutive cumulative bonuses so that
/// beta_t = 2 * sum_{i<=t} eta_i^t b_i. beta_prev is ignored when t = 1.
double bernstein_per_visit_bonus(std::int64_t t, double beta_t, double beta_prev, int horizon);

}  // namespace fedq
