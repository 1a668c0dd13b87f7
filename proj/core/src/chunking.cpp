#include "hatsim/chunking.hpp"

#include <cmath>
#include <stdexcept>

namespace hatsim {

int solve_chunk_size(const DelayFn& g, double mu, double beta_up,
                     double hidden_bytes_per_token, int pipeline_len,
                     int prompt_len) {
  if (beta_up <= 0.0) throw std::invalid_argument("solve_chunk_size: beta_up must be positive");
  if (hidden_bytes_per_token <= 0.0) {
    throw std::invalid_argument("solve_chunk_size: hidden-state size must be positive");
  }
  if (pipeline_len < 1) throw std::invalid_argument("solve_chunk_size: pipeline_len must be >= 1");
  if (prompt_len < 1) throw std::invalid_argument("solve_chunk_size: prompt_len must be >= 1");

  int mu_tokens = static_cast<int>(std::max<long long>(0, std::llround(mu)));
  double wait = g(mu_tokens);
  for (int x = 1; x <= prompt_len; ++x) {
    double upload = x * hidden_bytes_per_token / beta_up;
    double cloud = (wait + g(mu_tokens + x)) / pipeline_len;
    if (upload >= cloud) return x;
  }
  return prompt_len;  // cloud too slow to cover: single chunk
}

int solve_chunk_size(const DelayPredictor& pred, const CloudStateEstimate& estimate,
                     double beta_up, double hidden_bytes_per_token,
                     int pipeline_len, int prompt_len) {
  return solve_chunk_size([&pred](int n) { return pred.query(n); }, estimate.mu,
                          beta_up, hidden_bytes_per_token, pipeline_len,
                          prompt_len);
}

ChunkPlan split_prompt(int prompt_len, int chunk_size) {
  if (prompt_len < 1) throw std::invalid_argument("split_prompt: prompt_len must be >= 1");
  if (chunk_size < 1) throw std::invalid_argument("split_prompt: chunk_size must be >= 1");
  ChunkPlan plan;
  plan.chunk_size = chunk_size;
  for (int start = 0; start < prompt_len; start += chunk_size) {
    plan.boundaries.emplace_back(start, std::min(start + chunk_size, prompt_len));
  }
  return plan;
}

}  // namespace hatsim
