#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fscil/benchmark.hpp"
#include "fscil/dataset.hpp"
#include "fscil/encoders.hpp"
#include "fscil/heads.hpp"
#include "fscil/metrics.hpp"
#include "fscil/optimizer.hpp"
#include "fscil/rfe.hpp"
#include "fscil/run_config.hpp"

namespace fscil {

/// Frozen-encoder outputs for one rendered sample.
struct SampleFeatures {
  RowMatrix depth;  // N x C, one row per view
  Vector points;    // D3
};

/// Renderer plus the two frozen toy encoders, built once from the config.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(const RunConfig& cfg);

  SampleFeatures extract(const PointCloud& pc) const;

  /// Random rotation of the cloud and a random camera-distance multiplier,
  /// both drawn from `seed`.
  SampleFeatures extract_augmented(const PointCloud& pc, std::uint64_t seed) const;

  const DepthEncoder& depth_encoder() const { return depth_; }
  const PointEncoder& point_encoder() const { return points_; }

 private:
  SampleFeatures encode(const PointCloud& pc, const std::vector<Camera>& cameras) const;

  std::vector<Camera> cameras_;
  int point_radius_px_;
  AugmentationConfig augmentation_;
  DepthEncoder depth_;
  PointEncoder points_;
};

struct LossOptions {
  double alpha = 1.0;
  double tau = 0.1;
  bool cl_enabled = true;
  RfeTarget target = RfeTarget::global;
  bool contrastive_rcs = false;

  static LossOptions from(const RunConfig& cfg);
};

struct LossTerms {
  double cls = 0.0;
  double cont = 0.0;  // mean over augmented copies
  double total = 0.0;
};

/// Classification feature: f_d for the depth target, otherwise f_g.
const Vector& classifier_feature(const HeadsForward& fwd, RfeTarget target);

/// Cross-entropy on the clean sample plus alpha times the mean InfoNCE over
/// the augmented copies (skipped when contrastive learning is off). When
/// `grad` is non-null the gradient of the total is accumulated into it.
LossTerms sample_loss(const Heads& heads, const SampleFeatures& clean, std::span<const SampleFeatures> augmented,
                      Eigen::Index label, const RowMatrix& prototypes, const PrincipalBasis* basis,
                      const LossOptions& options, GradientBundle* grad);

/// Class logits for one sample; RCS when a basis is given, cosine otherwise.
Vector sample_logits(const Heads& heads, const SampleFeatures& features, const RowMatrix& prototypes,
                     const PrincipalBasis* basis, RfeTarget target);

/// Argmax with ties going to the lowest index.
Eigen::Index argmax_first(const Vector& v);

/// Seeded Fisher-Yates draw of min(shots, |pool|) ids without replacement.
/// Logs a warning when the pool is smaller than `shots`.
std::vector<std::string> sample_shots(const std::vector<std::string>& pool, std::size_t shots, std::uint64_t seed);

struct ExemplarMemory {
  std::map<std::string, std::vector<std::string>> by_class;

  /// Every stored id, by class name then insertion order.
  std::vector<std::string> all() const;
  std::size_t size() const;
};

struct SessionStats {
  std::size_t session = 0;
  std::size_t train_size = 0;
  std::vector<double> epoch_loss;  // mean total loss per epoch
  double train_accuracy = 0.0;
};

/// Owns the trainable heads, optimizer state, exemplar memory and principal
/// basis across the sessions of one schedule.
class Learner {
 public:
  Learner(RunConfig cfg, SessionSchedule schedule, const SampleStore& store);

  /// Trains session b. Sessions must run 1, 2, ... in order.
  SessionStats run_session(std::size_t b);

  /// One row per test sample of sessions 1..b.
  PredictionLog evaluate(std::size_t b) const;

  /// Fraction of `ids` classified correctly among the classes of sessions 1..b.
  double accuracy_on(const std::vector<std::string>& ids, std::size_t b) const;

  std::size_t completed_sessions() const { return completed_; }
  const RunConfig& config() const { return cfg_; }
  const SessionSchedule& schedule() const { return schedule_; }
  const Heads& heads() const { return heads_; }
  const OptimizerState& optimizer() const { return optimizer_; }
  const ExemplarMemory& memory() const { return memory_; }
  const std::optional<PrincipalBasis>& basis() const { return basis_; }
  const FeatureExtractor& extractor() const { return extractor_; }

  /// Fits the basis on the base-task depth features (every view of every
  /// training sample of session 1).
  const PrincipalBasis& fit_principal_basis();

  void set_basis(PrincipalBasis basis) { basis_ = std::move(basis); }

  /// Restores state from a checkpoint taken after session `completed`.
  void restore(HeadsParams params, std::size_t completed);

  /// Training ids of session b: all base training samples for b = 1,
  /// `shots` per class otherwise, followed by the current memory.
  std::vector<std::string> training_set(std::size_t b) const;

  const SampleFeatures& features(const std::string& sample_id) const;

 private:
  void ensure_cached(const std::vector<std::string>& ids) const;
  const PrincipalBasis* active_basis() const { return cfg_.rfe_enabled && basis_ ? &*basis_ : nullptr; }
  std::vector<std::string> session_shots(std::size_t b) const;
  void remember(std::size_t b);

  RunConfig cfg_;
  SessionSchedule schedule_;
  const SampleStore& store_;
  FeatureExtractor extractor_;
  Heads heads_;
  OptimizerState optimizer_;
  ExemplarMemory memory_;
  std::optional<PrincipalBasis> basis_;
  std::size_t completed_ = 0;

  mutable std::map<std::string, PointCloud> clouds_;
  mutable std::map<std::string, SampleFeatures> features_;
};

struct RunResult {
  PredictionLog log;  // sessions 1..B concatenated
  std::vector<SessionStats> sessions;
};

using SessionCallback = std::function<void(const Learner&, const SessionStats&, const PredictionLog&)>;

/// Runs every session of the schedule, evaluating after each one.
RunResult run_experiment(const RunConfig& cfg, const SessionSchedule& schedule, const SampleStore& store,
                         const SessionCallback& after_session = {});

}  // namespace fscil
