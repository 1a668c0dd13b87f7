#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "hatsim/monitor.hpp"

namespace hatsim {

// Contiguous token ranges covering [0, prompt_len); all full-size except
// possibly the last.
struct ChunkPlan {
  int chunk_size = 0;
  std::vector<std::pair<int, int>> boundaries;  // [start, end)
};

// In-cloud delay as a function of batched token size; wraps the binned
// predictor in production and exact shapes in tests.
using DelayFn = std::function<double(int)>;

// Smallest integer X in [1, prompt_len] whose upload time covers the
// cloud-side term: X*A/beta_up >= (g(mu) + g(mu+X)) / P. Returns
// prompt_len (single chunk) when no X qualifies.
int solve_chunk_size(const DelayFn& g, double mu, double beta_up,
                     double hidden_bytes_per_token, int pipeline_len,
                     int prompt_len);

int solve_chunk_size(const DelayPredictor& pred, const CloudStateEstimate& estimate,
                     double beta_up, double hidden_bytes_per_token,
                     int pipeline_len, int prompt_len);

ChunkPlan split_prompt(int prompt_len, int chunk_size);

}  // namespace hatsim
