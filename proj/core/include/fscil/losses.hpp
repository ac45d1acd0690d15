#pragma once

#include <cstddef>
#include <span>

#include "fscil/linalg.hpp"

namespace fscil {

inline constexpr double kProbabilityFloor = 1e-12;

/// -ln(probs[true_index]) with the probability clamped at 1e-12. Each clamp
/// bumps a process-wide counter.
double ce_loss(const Vector& probs, Eigen::Index true_index);

/// d CE / d logits = probs - onehot(true_index).
Vector ce_grad_logits(const Vector& probs, Eigen::Index true_index);

std::size_t ce_clamp_count();
void reset_ce_clamp_count();

struct InfoNceResult {
  double loss = 0.0;
  Vector grad_similarities;  // d loss / d s for every entry of the input
};

/// InfoNCE over a similarity vector in which `positive` marks the true
/// prototype and every other entry is a negative.
InfoNceResult infonce(const Vector& similarities, Eigen::Index positive, double tau);

/// Same loss from explicit vectors, using cosine similarity.
double infonce_loss(const Vector& feature, const Vector& positive, std::span<const Vector> negatives, double tau);

double total_loss(double l_cls, double l_cont, double alpha);

}  // namespace fscil
