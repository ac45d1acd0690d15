#include "fscil/learner.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "fscil/error.hpp"
#include "fscil/losses.hpp"
#include "fscil/parallel.hpp"
#include "fscil/rng.hpp"

namespace fscil {

namespace {

std::vector<std::string> seeded_subset(const std::vector<std::string>& pool, std::size_t k, std::uint64_t seed) {
  std::vector<std::string> items = pool;
  SplitMix64 rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(items[i - 1], items[j]);
  }
  items.resize(std::min(k, items.size()));
  return items;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

struct ClassIndex {
  std::vector<std::string> names;
  std::unordered_map<std::string, Eigen::Index> index;

  explicit ClassIndex(std::vector<std::string> visible) : names(std::move(visible)) {
    for (std::size_t i = 0; i < names.size(); ++i) index.emplace(names[i], static_cast<Eigen::Index>(i));
  }

  Eigen::Index of(const std::string& name) const {
    const auto it = index.find(name);
    if (it == index.end()) throw ProtocolError("class '" + name + "' is not visible at this session");
    return it->second;
  }
};

}  // namespace

FeatureExtractor::FeatureExtractor(const RunConfig& cfg)
    : cameras_(default_camera_set(cfg.render_config())),
      point_radius_px_(cfg.point_radius_px),
      augmentation_(cfg.augmentation),
      depth_(cfg.feature_dim, cfg.master_seed),
      points_(cfg.point_dim, cfg.master_seed) {}

SampleFeatures FeatureExtractor::encode(const PointCloud& pc, const std::vector<Camera>& cameras) const {
  return {depth_.encode(render_views(pc, cameras, point_radius_px_)), points_.encode(pc)};
}

SampleFeatures FeatureExtractor::extract(const PointCloud& pc) const { return encode(pc, cameras_); }

SampleFeatures FeatureExtractor::extract_augmented(const PointCloud& pc, std::uint64_t seed) const {
  const auto [augmented, record] = augment(pc, seed, augmentation_);
  return encode(augmented, scale_camera_distance(cameras_, record.view_distance_scale));
}

LossOptions LossOptions::from(const RunConfig& cfg) {
  return {cfg.alpha, cfg.tau, cfg.cl_enabled, cfg.rfe_target, cfg.contrastive_rcs};
}

const Vector& classifier_feature(const HeadsForward& fwd, RfeTarget target) {
  return target == RfeTarget::depth ? fwd.fd : fwd.fg;
}

LossTerms sample_loss(const Heads& heads, const SampleFeatures& clean, std::span<const SampleFeatures> augmented,
                      Eigen::Index label, const RowMatrix& prototypes, const PrincipalBasis* basis,
                      const LossOptions& options, GradientBundle* grad) {
  LossTerms terms;
  const HeadsForward fwd = heads.forward(clean.depth, &clean.points);
  const Vector& f = classifier_feature(fwd, options.target);
  const Vector probs = softmax(logits(f, prototypes, basis));
  terms.cls = ce_loss(probs, label);

  if (grad != nullptr) {
    const Vector d_f = logits_jacobian(f, prototypes, basis).transpose() * ce_grad_logits(probs, label);
    if (options.target == RfeTarget::depth) {
      *grad += heads.backward(Vector::Zero(fwd.fg.size()), fwd, &d_f);
    } else {
      *grad += heads.backward(d_f, fwd);
    }
  }

  if (options.cl_enabled && !augmented.empty()) {
    const PrincipalBasis* contrastive_basis = options.contrastive_rcs ? basis : nullptr;
    const double weight = options.alpha / static_cast<double>(augmented.size());
    double sum = 0.0;
    for (const SampleFeatures& aug : augmented) {
      const HeadsForward fa = heads.forward(aug.depth, &aug.points);
      const InfoNceResult r = infonce(logits(fa.fg, prototypes, contrastive_basis), label, options.tau);
      sum += r.loss;
      if (grad != nullptr) {
        const Vector d_fg =
            weight * (logits_jacobian(fa.fg, prototypes, contrastive_basis).transpose() * r.grad_similarities);
        *grad += heads.backward(d_fg, fa);
      }
    }
    terms.cont = sum / static_cast<double>(augmented.size());
  }
  terms.total = options.cl_enabled ? total_loss(terms.cls, terms.cont, options.alpha) : terms.cls;
  return terms;
}

Vector sample_logits(const Heads& heads, const SampleFeatures& features, const RowMatrix& prototypes,
                     const PrincipalBasis* basis, RfeTarget target) {
  const HeadsForward fwd = heads.forward(features.depth, &features.points);
  return logits(classifier_feature(fwd, target), prototypes, basis);
}

Eigen::Index argmax_first(const Vector& v) {
  if (v.size() == 0) throw ShapeError("argmax of an empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

std::vector<std::string> sample_shots(const std::vector<std::string>& pool, std::size_t shots, std::uint64_t seed) {
  if (pool.empty()) throw DataError("cannot sample shots from an empty pool");
  if (pool.size() < shots) {
    spdlog::warn("pool holds {} samples, fewer than the {} requested shots; using all of them", pool.size(), shots);
  }
  return seeded_subset(pool, shots, seed);
}

std::vector<std::string> ExemplarMemory::all() const {
  std::vector<std::string> out;
  for (const auto& [name, ids] : by_class) out.insert(out.end(), ids.begin(), ids.end());
  return out;
}

std::size_t ExemplarMemory::size() const {
  std::size_t n = 0;
  for (const auto& [name, ids] : by_class) n += ids.size();
  return n;
}

Learner::Learner(RunConfig cfg, SessionSchedule schedule, const SampleStore& store)
    : cfg_(std::move(cfg)),
      schedule_(std::move(schedule)),
      store_(store),
      extractor_((cfg_.validate(), cfg_)),
      heads_(HeadsParams::init(cfg_.heads_dims(), derive_seed(cfg_.master_seed, "init")), cfg_.snc_enabled),
      optimizer_(OptimizerState::zeros(cfg_.heads_dims())) {
  schedule_.validate();
  for (const Session& s : schedule_.sessions) {
    for (const auto* refs : {&s.train, &s.test}) {
      for (const auto& id : *refs) {
        const std::string& cls = store_.entry(id).class_name;
        if (std::find(s.classes.begin(), s.classes.end(), cls) == s.classes.end()) {
          throw ProtocolError("sample '" + id + "' of class '" + cls + "' is listed under session " +
                              std::to_string(s.index) + ", which does not introduce that class");
        }
      }
    }
  }
}

void Learner::ensure_cached(const std::vector<std::string>& ids) const {
  std::vector<std::string> missing;
  for (const auto& id : ids) {
    if (!features_.contains(id) && std::find(missing.begin(), missing.end(), id) == missing.end()) {
      missing.push_back(id);
    }
  }
  if (missing.empty()) return;
  std::vector<PointCloud> clouds(missing.size());
  std::vector<SampleFeatures> feats(missing.size());
  parallel_for(missing.size(), [&](std::size_t i) {
    clouds[i] = store_.load(missing[i]);
    feats[i] = extractor_.extract(clouds[i]);
  });
  for (std::size_t i = 0; i < missing.size(); ++i) {
    clouds_.emplace(missing[i], std::move(clouds[i]));
    features_.emplace(missing[i], std::move(feats[i]));
  }
}

const SampleFeatures& Learner::features(const std::string& sample_id) const {
  ensure_cached({sample_id});
  return features_.at(sample_id);
}

const PrincipalBasis& Learner::fit_principal_basis() {
  const Session& base = schedule_.session(1);
  if (base.train.empty()) throw ProtocolError("the base session has no training samples to fit a basis on");
  ensure_cached(base.train);
  const Eigen::Index views = cfg_.n_views;
  RowMatrix stacked(static_cast<Eigen::Index>(base.train.size()) * views, cfg_.feature_dim);
  for (std::size_t i = 0; i < base.train.size(); ++i) {
    stacked.middleRows(static_cast<Eigen::Index>(i) * views, views) = features_.at(base.train[i]).depth;
  }
  basis_ = fit_basis(stacked, cfg_.energy_fraction);
  spdlog::info("principal basis keeps {} of {} directions at energy {}", basis_->rank(), basis_->dim(),
               cfg_.energy_fraction);
  return *basis_;
}

std::vector<std::string> Learner::session_shots(std::size_t b) const {
  const Session& s = schedule_.session(b);
  std::vector<std::string> out;
  for (const auto& cls : s.classes) {
    std::vector<std::string> pool;
    for (const auto& id : s.train) {
      if (store_.entry(id).class_name == cls) pool.push_back(id);
    }
    if (pool.empty()) throw ProtocolError("class '" + cls + "' has no training samples in session " + std::to_string(b));
    const auto picked = sample_shots(pool, static_cast<std::size_t>(cfg_.shots),
                                     derive_seed(cfg_.master_seed, "shots", {b, fnv1a64(cls)}));
    out.insert(out.end(), picked.begin(), picked.end());
  }
  return out;
}

std::vector<std::string> Learner::training_set(std::size_t b) const {
  std::vector<std::string> ids = b == 1 ? schedule_.session(1).train : session_shots(b);
  const auto remembered = memory_.all();
  ids.insert(ids.end(), remembered.begin(), remembered.end());
  return ids;
}

SessionStats Learner::run_session(std::size_t b) {
  if (b != completed_ + 1) {
    throw ProtocolError("session " + std::to_string(b) + " requested after " + std::to_string(completed_) +
                        " completed sessions");
  }
  if (b == 1 && cfg_.rfe_enabled && !basis_) fit_principal_basis();

  const ClassIndex classes(schedule_.visible_classes(b));
  const RowMatrix prototypes = PrototypeBank::build(classes.names, cfg_.feature_dim).rows;
  const std::vector<std::string> ids = training_set(b);
  if (ids.empty()) throw ProtocolError("session " + std::to_string(b) + " has no training samples");
  ensure_cached(ids);

  std::vector<Eigen::Index> labels;
  labels.reserve(ids.size());
  for (const auto& id : ids) labels.push_back(classes.of(store_.entry(id).class_name));

  const LossOptions options = LossOptions::from(cfg_);
  const PrincipalBasis* basis = active_basis();
  const int epochs = b == 1 ? cfg_.base_epochs : cfg_.inc_epochs;
  const std::size_t batch = static_cast<std::size_t>(cfg_.batch_size);
  const std::size_t n_aug = cfg_.cl_enabled ? static_cast<std::size_t>(cfg_.n_aug) : 0;
  const HeadsDims dims = cfg_.heads_dims();
  const AdamConfig adam = cfg_.adam_config();
  optimizer_ = OptimizerState::zeros(dims);

  SessionStats stats;
  stats.session = b;
  stats.train_size = ids.size();
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto e = static_cast<std::uint64_t>(epoch);
    const auto order = shuffled_indices(ids.size(), derive_seed(cfg_.master_seed, "shuffle", {b, e}));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t count = std::min(batch, order.size() - start);
      std::vector<GradientBundle> grads(count, GradientBundle::zeros(dims));
      std::vector<double> losses(count, 0.0);
      parallel_for(count, [&](std::size_t k) {
        const std::size_t i = order[start + k];
        const std::string& id = ids[i];
        std::vector<SampleFeatures> augmented;
        augmented.reserve(n_aug);
        for (std::size_t j = 0; j < n_aug; ++j) {
          const std::uint64_t seed = derive_seed(cfg_.master_seed, "aug", {b, e, fnv1a64(id), j});
          augmented.push_back(extractor_.extract_augmented(clouds_.at(id), seed));
        }
        losses[k] = sample_loss(heads_, features_.at(id), augmented, labels[i], prototypes, basis, options, &grads[k]).total;
      });
      GradientBundle total = GradientBundle::zeros(dims);
      for (std::size_t k = 0; k < count; ++k) {
        total += grads[k];
        epoch_loss += losses[k];
      }
      total *= 1.0 / static_cast<double>(count);
      heads_.update([&](HeadsParams& p) { adamw_step(p, total.params, optimizer_, adam); });
    }
    stats.epoch_loss.push_back(epoch_loss / static_cast<double>(ids.size()));
    spdlog::debug("session {} epoch {} loss {:.6f}", b, epoch + 1, stats.epoch_loss.back());
  }
  stats.train_accuracy = accuracy_on(ids, b);

  remember(b);
  completed_ = b;
  spdlog::info("session {} trained on {} samples, training accuracy {:.3f}", b, ids.size(), stats.train_accuracy);
  return stats;
}

void Learner::remember(std::size_t b) {
  // Exemplars come from this session's own new-class training samples.
  const Session& s = schedule_.session(b);
  const std::vector<std::string> fresh = b == 1 ? s.train : session_shots(b);
  for (const auto& cls : s.classes) {
    std::vector<std::string> pool;
    for (const auto& id : fresh) {
      if (store_.entry(id).class_name == cls) pool.push_back(id);
    }
    memory_.by_class[cls] = seeded_subset(pool, static_cast<std::size_t>(cfg_.memory_per_class),
                                          derive_seed(cfg_.master_seed, "memory", {b, fnv1a64(cls)}));
  }
}

double Learner::accuracy_on(const std::vector<std::string>& ids, std::size_t b) const {
  if (ids.empty()) throw DataError("accuracy over an empty sample list");
  const ClassIndex classes(schedule_.visible_classes(b));
  const RowMatrix prototypes = PrototypeBank::build(classes.names, cfg_.feature_dim).rows;
  ensure_cached(ids);
  std::vector<char> hit(ids.size(), 0);
  parallel_for(ids.size(), [&](std::size_t i) {
    const Vector l = sample_logits(heads_, features_.at(ids[i]), prototypes, active_basis(), cfg_.rfe_target);
    hit[i] = argmax_first(l) == classes.of(store_.entry(ids[i]).class_name) ? 1 : 0;
  });
  return static_cast<double>(std::count(hit.begin(), hit.end(), 1)) / static_cast<double>(ids.size());
}

PredictionLog Learner::evaluate(std::size_t b) const {
  const ClassIndex classes(schedule_.visible_classes(b));
  const RowMatrix prototypes = PrototypeBank::build(classes.names, cfg_.feature_dim).rows;
  std::vector<std::string> ids;
  for (std::size_t s = 1; s <= b; ++s) {
    const auto& test = schedule_.session(s).test;
    ids.insert(ids.end(), test.begin(), test.end());
  }
  ensure_cached(ids);
  std::vector<Eigen::Index> predicted(ids.size(), 0);
  parallel_for(ids.size(), [&](std::size_t i) {
    predicted[i] = argmax_first(sample_logits(heads_, features_.at(ids[i]), prototypes, active_basis(), cfg_.rfe_target));
  });
  PredictionLog log;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::string& truth = store_.entry(ids[i]).class_name;
    log.rows.push_back({b, ids[i], truth, classes.names[static_cast<std::size_t>(predicted[i])],
                        schedule_.intro_session(truth)});
  }
  return log;
}

void Learner::restore(HeadsParams params, std::size_t completed) {
  if (!(params.dims() == cfg_.heads_dims())) throw ShapeError("checkpoint dimensions do not match the configuration");
  if (completed < 1 || completed > schedule_.size()) throw ProtocolError("checkpoint session out of range");
  if (cfg_.rfe_enabled && !basis_) fit_principal_basis();
  heads_.replace(std::move(params));
  memory_ = {};
  for (std::size_t b = 1; b <= completed; ++b) remember(b);
  completed_ = completed;
}

RunResult run_experiment(const RunConfig& cfg, const SessionSchedule& schedule, const SampleStore& store,
                         const SessionCallback& after_session) {
  Learner learner(cfg, schedule, store);
  RunResult result;
  for (std::size_t b = 1; b <= schedule.size(); ++b) {
    result.sessions.push_back(learner.run_session(b));
    PredictionLog session_log = learner.evaluate(b);
    if (after_session) after_session(learner, result.sessions.back(), session_log);
    result.log.rows.insert(result.log.rows.end(), session_log.rows.begin(), session_log.rows.end());
  }
  return result;
}

}  // namespace fscil
