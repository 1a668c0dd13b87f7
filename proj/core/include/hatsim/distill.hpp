#pragma once

#include <vector>

namespace hatsim {

// Inputs to the adapter training loss: target/draft feature vectors of
// dimension d and the shared output head projecting features to v logits.
struct DistillationInput {
  std::vector<double> f_target;
  std::vector<double> f_draft;
  std::vector<std::vector<double>> head;  // v rows, each of dimension d
  double w_ce = 0.1;
};

// Numerically stable softmax of a logit vector.
std::vector<double> softmax(const std::vector<double>& logits);

// Smooth-L1 of (f_target - f_draft), elementwise with transition at 1,
// mean-reduced over d, plus w_ce times the soft-label cross-entropy
// (natural log) between head projections of the two feature vectors.
double distillation_loss(const DistillationInput& input);

// Analytic gradient of distillation_loss with respect to f_draft.
std::vector<double> distillation_loss_grad_draft(const DistillationInput& input);

}  // namespace hatsim
