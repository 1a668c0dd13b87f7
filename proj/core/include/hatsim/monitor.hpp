#pragma once

#include <map>

namespace hatsim {

// One exponential-moving-average step: alpha * prev + (1 - alpha) * obs.
double ema_update(double prev, double obs, double alpha);

// Moving-average view of the cloud workload: batched token size and the
// latest observed batch delay.
struct CloudStateEstimate {
  double mu = 0.0;             // EMA of batched token size
  double last_obs_tokens = 0.0;
  double last_delay = 0.0;     // seconds
  double alpha = 0.8;
  bool has_obs = false;
};

CloudStateEstimate estimate_observe(CloudStateEstimate est, double batched_tokens,
                                    double delay_s);

// Binned EMA table mapping batched token size to in-cloud computation
// delay. Queries never fail: an unobserved bin answers via the nearest
// observed bin (lower index on ties), or default_delay when empty.
struct DelayPredictor {
  int bin_width = 16;          // tokens per bin
  double alpha = 0.8;
  double default_delay = 0.025;  // seconds
  std::map<int, double> bins;  // bin index -> EMA delay (seconds)

  double query(int tokens) const;
};

DelayPredictor predictor_observe(DelayPredictor pred, int batched_tokens,
                                 double delay_s);
double predictor_query(const DelayPredictor& pred, int tokens);

// EMA view of one device: draft-step delay and link bandwidths.
struct DeviceState {
  double gamma = 1e-3;      // seconds per draft step
  double beta_up = 1e6;     // bytes/s
  double beta_down = 1e6;   // bytes/s
};

DeviceState device_observe(DeviceState state, double gamma_obs, double up_obs,
                           double down_obs, double alpha);

}  // namespace hatsim
