#include "fscil/losses.hpp"

#include <atomic>
#include <cmath>
#include <string>

#include "fscil/error.hpp"
#include "fscil/rfe.hpp"

namespace fscil {

namespace {

std::atomic<std::size_t> clamp_counter{0};

void check_index(Eigen::Index index, Eigen::Index size) {
  if (index < 0 || index >= size) {
    throw ShapeError("class index " + std::to_string(index) + " out of range for " + std::to_string(size) + " classes");
  }
}

}  // namespace

double ce_loss(const Vector& probs, Eigen::Index true_index) {
  check_index(true_index, probs.size());
  double p = probs(true_index);
  if (!(p >= kProbabilityFloor)) {
    p = kProbabilityFloor;
    ++clamp_counter;
  }
  return -std::log(p);
}

Vector ce_grad_logits(const Vector& probs, Eigen::Index true_index) {
  check_index(true_index, probs.size());
  Vector g = probs;
  g(true_index) -= 1.0;
  return g;
}

std::size_t ce_clamp_count() { return clamp_counter.load(); }
void reset_ce_clamp_count() { clamp_counter = 0; }

InfoNceResult infonce(const Vector& similarities, Eigen::Index positive, double tau) {
  if (!(tau > 0.0)) throw ConfigError("InfoNCE temperature must be positive");
  if (similarities.size() < 2) throw ShapeError("InfoNCE needs at least one negative");
  check_index(positive, similarities.size());
  const Vector scaled = similarities / tau;
  const double mx = scaled.maxCoeff();
  const double log_sum = mx + std::log((scaled.array() - mx).exp().sum());
  InfoNceResult r;
  r.loss = log_sum - scaled(positive);
  r.grad_similarities = softmax(scaled);
  r.grad_similarities(positive) -= 1.0;
  r.grad_similarities /= tau;
  return r;
}

double infonce_loss(const Vector& feature, const Vector& positive, std::span<const Vector> negatives, double tau) {
  if (negatives.empty()) throw ShapeError("InfoNCE needs at least one negative");
  Vector s(static_cast<Eigen::Index>(negatives.size()) + 1);
  s(0) = cosine_logit(feature, positive);
  for (std::size_t i = 0; i < negatives.size(); ++i) s(static_cast<Eigen::Index>(i) + 1) = cosine_logit(feature, negatives[i]);
  return infonce(s, 0, tau).loss;
}

double total_loss(double l_cls, double l_cont, double alpha) { return l_cls + alpha * l_cont; }

}  // namespace fscil
