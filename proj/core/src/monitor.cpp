#include "hatsim/monitor.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace hatsim {

double ema_update(double prev, double obs, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("ema_update: alpha must be in [0,1]");
  }
  return alpha * prev + (1.0 - alpha) * obs;
}

CloudStateEstimate estimate_observe(CloudStateEstimate est, double batched_tokens,
                                    double delay_s) {
  if (delay_s <= 0.0) {
    throw std::invalid_argument("estimate_observe: delay must be positive");
  }
  // First observation initializes directly; no averaging against a prior.
  est.mu = est.has_obs ? ema_update(est.mu, batched_tokens, est.alpha)
                       : batched_tokens;
  est.has_obs = true;
  est.last_obs_tokens = batched_tokens;
  est.last_delay = delay_s;
  return est;
}

double DelayPredictor::query(int tokens) const {
  if (tokens < 0) throw std::invalid_argument("DelayPredictor::query: tokens must be >= 0");
  if (bins.empty()) return default_delay;
  int bin = tokens / bin_width;
  auto it = bins.find(bin);
  if (it != bins.end()) return it->second;
  // nearest observed bin; lower index wins a tie
  auto hi = bins.lower_bound(bin);
  if (hi == bins.end()) return std::prev(hi)->second;
  if (hi == bins.begin()) return hi->second;
  auto lo = std::prev(hi);
  long dist_lo = static_cast<long>(bin) - lo->first;
  long dist_hi = static_cast<long>(hi->first) - bin;
  return dist_lo <= dist_hi ? lo->second : hi->second;
}

DelayPredictor predictor_observe(DelayPredictor pred, int batched_tokens,
                                 double delay_s) {
  if (batched_tokens < 1) {
    throw std::invalid_argument("predictor_observe: batched_tokens must be >= 1");
  }
  if (delay_s <= 0.0) {
    throw std::invalid_argument("predictor_observe: delay must be positive");
  }
  int bin = batched_tokens / pred.bin_width;
  auto it = pred.bins.find(bin);
  if (it == pred.bins.end()) {
    pred.bins[bin] = delay_s;
  } else {
    it->second = ema_update(it->second, delay_s, pred.alpha);
  }
  return pred;
}

double predictor_query(const DelayPredictor& pred, int tokens) {
  return pred.query(tokens);
}

DeviceState device_observe(DeviceState state, double gamma_obs, double up_obs,
                           double down_obs, double alpha) {
  if (gamma_obs <= 0.0 || up_obs <= 0.0 || down_obs <= 0.0) {
    throw std::invalid_argument("device_observe: observations must be positive");
  }
  state.gamma = ema_update(state.gamma, gamma_obs, alpha);
  state.beta_up = ema_update(state.beta_up, up_obs, alpha);
  state.beta_down = ema_update(state.beta_down, down_obs, alpha);
  return state;
}

}  // namespace hatsim
