#include "hatsim/distill.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hatsim {

namespace {

void validate(const DistillationInput& in) {
  std::size_t d = in.f_target.size();
  if (d == 0) throw std::invalid_argument("distillation_loss: d must be >= 1");
  if (in.f_draft.size() != d) {
    throw std::invalid_argument("distillation_loss: feature dims differ");
  }
  if (in.head.empty()) throw std::invalid_argument("distillation_loss: v must be >= 1");
  for (const auto& row : in.head) {
    if (row.size() != d) {
      throw std::invalid_argument("distillation_loss: head row dim mismatch");
    }
    for (double x : row) {
      if (!std::isfinite(x)) throw std::invalid_argument("distillation_loss: non-finite head");
    }
  }
  if (in.w_ce < 0.0) throw std::invalid_argument("distillation_loss: w_ce must be >= 0");
  for (double x : in.f_target) {
    if (!std::isfinite(x)) throw std::invalid_argument("distillation_loss: non-finite f_target");
  }
  for (double x : in.f_draft) {
    if (!std::isfinite(x)) throw std::invalid_argument("distillation_loss: non-finite f_draft");
  }
}

std::vector<double> project(const std::vector<std::vector<double>>& head,
                            const std::vector<double>& f) {
  std::vector<double> out(head.size(), 0.0);
  for (std::size_t r = 0; r < head.size(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < f.size(); ++c) acc += head[r][c] * f[c];
    out[r] = acc;
  }
  return out;
}

double smooth_l1(double x) {
  double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

double smooth_l1_deriv(double x) {
  return std::abs(x) < 1.0 ? x : (x > 0.0 ? 1.0 : -1.0);
}

}  // namespace

std::vector<double> softmax(const std::vector<double>& logits) {
  double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

double distillation_loss(const DistillationInput& in) {
  validate(in);
  std::size_t d = in.f_target.size();

  double sl = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    sl += smooth_l1(in.f_target[i] - in.f_draft[i]);
  }
  sl /= static_cast<double>(d);

  if (in.w_ce == 0.0) return sl;

  auto p = softmax(project(in.head, in.f_target));
  auto q = softmax(project(in.head, in.f_draft));
  double ce = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) ce -= p[i] * std::log(q[i]);
  return sl + in.w_ce * ce;
}

std::vector<double> distillation_loss_grad_draft(const DistillationInput& in) {
  validate(in);
  std::size_t d = in.f_target.size();
  std::vector<double> grad(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    grad[i] = -smooth_l1_deriv(in.f_target[i] - in.f_draft[i]) /
              static_cast<double>(d);
  }
  if (in.w_ce == 0.0) return grad;

  auto p = softmax(project(in.head, in.f_target));
  auto q = softmax(project(in.head, in.f_draft));
  // d(ce)/d(logits_draft) = q - p, pulled back through the head.
  for (std::size_t r = 0; r < in.head.size(); ++r) {
    double g = in.w_ce * (q[r] - p[r]);
    for (std::size_t c = 0; c < d; ++c) grad[c] += g * in.head[r][c];
  }
  return grad;
}

}  // namespace hatsim
