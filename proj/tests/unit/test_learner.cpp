#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "fscil/dataset.hpp"
#include "fscil/error.hpp"
#include "fscil/learner.hpp"
#include "oracles/oracles.hpp"

using namespace fscil;

namespace {

RunConfig tiny_config() {
  RunConfig c;
  c.feature_dim = 16;
  c.point_dim = 16;
  c.n_views = 3;
  c.base_epochs = 2;
  c.inc_epochs = 2;
  c.shots = 2;
  c.batch_size = 8;
  c.n_aug = 1;
  c.master_seed = 11;
  return c;
}

struct Fixture {
  SyntheticBenchmark bench;
  SampleStore store;
  SessionSchedule schedule;

  explicit Fixture(std::size_t per_session = 2) {
    SyntheticSpec spec;
    spec.n_base = 3;
    spec.n_inc = 4;
    spec.train_per_class = 4;
    spec.test_per_class = 2;
    spec.n_points = 64;
    bench = make_synthetic_benchmark(spec);
    store.add(bench.base);
    store.add(bench.inc);
    schedule = build_schedule(bench.base, bench.inc, per_session, {});
  }
};

std::vector<double> flatten(const HeadsParams& p) {
  std::vector<double> out;
  p.for_each([&](std::string_view, std::span<const double> s) { out.insert(out.end(), s.begin(), s.end()); });
  return out;
}

HeadsParams unflatten(HeadsParams p, const std::vector<double>& x) {
  std::size_t at = 0;
  p.for_each([&](std::string_view, std::span<double> s) {
    for (double& v : s) v = x[at++];
  });
  return p;
}

}  // namespace

TEST(ArgmaxFirst, TiesGoToLowestIndex) {
  Vector v(4);
  v << 0.1, 0.7, 0.7, 0.2;
  EXPECT_EQ(argmax_first(v), 1);
  EXPECT_THROW(argmax_first(Vector()), ShapeError);
}

TEST(SampleShots, SeededSubsetWithoutReplacement) {
  std::vector<std::string> pool;
  for (int i = 0; i < 10; ++i) pool.push_back("s" + std::to_string(i));
  const auto a = sample_shots(pool, 5, 3);
  EXPECT_EQ(a, sample_shots(pool, 5, 3));
  EXPECT_EQ(a.size(), 5u);
  EXPECT_EQ(std::set<std::string>(a.begin(), a.end()).size(), 5u);
  for (const auto& id : a) EXPECT_NE(std::find(pool.begin(), pool.end(), id), pool.end());
  bool differs = false;
  for (std::uint64_t s = 4; s < 20 && !differs; ++s) differs = sample_shots(pool, 5, s) != a;
  EXPECT_TRUE(differs);
  EXPECT_EQ(sample_shots(pool, 50, 1).size(), 10u);
  EXPECT_THROW(sample_shots({}, 1, 1), DataError);
}

TEST(SampleLoss, GradientMatchesFiniteDifferences) {
  Fixture f;
  RunConfig cfg = tiny_config();
  const FeatureExtractor extractor(cfg);
  const auto& ids = f.schedule.session(1).train;
  const SampleFeatures clean = extractor.extract(f.store.load(ids[0]));
  const std::vector<SampleFeatures> aug{extractor.extract_augmented(f.store.load(ids[0]), 5),
                                        extractor.extract_augmented(f.store.load(ids[0]), 6)};
  const auto names = f.schedule.visible_classes(1);
  const RowMatrix protos = PrototypeBank::build(names, cfg.feature_dim).rows;

  RowMatrix stacked(static_cast<Eigen::Index>(ids.size()) * cfg.n_views, cfg.feature_dim);
  for (std::size_t i = 0; i < ids.size(); ++i)
    stacked.middleRows(static_cast<Eigen::Index>(i) * cfg.n_views, cfg.n_views) = extractor.extract(f.store.load(ids[i])).depth;
  const PrincipalBasis basis = fit_basis(stacked, 0.95);

  for (bool cl : {false, true}) {
    for (RfeTarget target : {RfeTarget::global, RfeTarget::depth}) {
      for (const PrincipalBasis* b : std::initializer_list<const PrincipalBasis*>{nullptr, &basis}) {
        LossOptions opt;
        opt.cl_enabled = cl;
        opt.target = target;
        const HeadsParams p = HeadsParams::init(cfg.heads_dims(), 3);
        const Heads heads(p, true);
        GradientBundle g = GradientBundle::zeros(cfg.heads_dims());
        sample_loss(heads, clean, aug, 1, protos, b, opt, &g);
        const auto analytic = flatten(g.params);
        const auto numeric = oracle::central_differences(flatten(p), [&](const std::vector<double>& x) {
          return sample_loss(Heads(unflatten(p, x), true), clean, aug, 1, protos, b, opt, nullptr).total;
        }, 1e-6);
        double worst = 0.0;
        for (std::size_t i = 0; i < analytic.size(); ++i)
          worst = std::max(worst, oracle::relative_error(numeric[i], analytic[i], 1e-5));
        EXPECT_LT(worst, 1e-4) << "cl " << cl << " target " << static_cast<int>(target) << " basis " << (b != nullptr);
      }
    }
  }
}

TEST(SampleLoss, ContrastiveOffIsCrossEntropyOnly) {
  Fixture f;
  const RunConfig cfg = tiny_config();
  const FeatureExtractor extractor(cfg);
  const auto id = f.schedule.session(1).train[0];
  const SampleFeatures clean = extractor.extract(f.store.load(id));
  const std::vector<SampleFeatures> aug{extractor.extract_augmented(f.store.load(id), 1)};
  const RowMatrix protos = PrototypeBank::build(f.schedule.visible_classes(1), cfg.feature_dim).rows;
  const Heads heads(HeadsParams::init(cfg.heads_dims(), 1), true);
  LossOptions opt;
  opt.cl_enabled = false;
  const auto terms = sample_loss(heads, clean, aug, 0, protos, nullptr, opt, nullptr);
  EXPECT_EQ(terms.cont, 0.0);
  EXPECT_EQ(terms.total, terms.cls);
  const Vector l = sample_logits(heads, clean, protos, nullptr, RfeTarget::global);
  EXPECT_NEAR(terms.cls, -std::log(softmax(l)(0)), 1e-12);
}

TEST(Learner, SessionsMustRunInOrder) {
  Fixture f;
  Learner learner(tiny_config(), f.schedule, f.store);
  EXPECT_THROW(learner.run_session(2), ProtocolError);
  learner.run_session(1);
  EXPECT_THROW(learner.run_session(1), ProtocolError);
  EXPECT_THROW(learner.run_session(3), ProtocolError);
  EXPECT_EQ(learner.completed_sessions(), 1u);
}

TEST(Learner, TrainingSetsAndMemory) {
  Fixture f;
  RunConfig cfg = tiny_config();
  cfg.memory_per_class = 2;
  Learner learner(cfg, f.schedule, f.store);
  EXPECT_EQ(learner.training_set(1).size(), 12u);
  const auto s1 = learner.run_session(1);
  EXPECT_EQ(s1.train_size, 12u);
  EXPECT_EQ(s1.epoch_loss.size(), 2u);
  EXPECT_EQ(learner.memory().size(), 6u);
  for (const auto& [cls, ids] : learner.memory().by_class) {
    for (const auto& id : ids) EXPECT_EQ(f.store.entry(id).class_name, cls);
  }

  // new classes contribute `shots` each, followed by the stored exemplars
  const auto t2 = learner.training_set(2);
  ASSERT_EQ(t2.size(), 2u * 2u + 6u);
  const auto& new_classes = f.schedule.session(2).classes;
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NE(std::find(new_classes.begin(), new_classes.end(), f.store.entry(t2[i]).class_name), new_classes.end());
  }
  EXPECT_EQ(t2, learner.training_set(2));
  learner.run_session(2);
  EXPECT_EQ(learner.memory().size(), 10u);
  EXPECT_TRUE(learner.basis().has_value());
}

TEST(Learner, BasisOnlyWhenEliminatorEnabled) {
  Fixture f;
  RunConfig cfg = tiny_config();
  cfg.rfe_enabled = false;
  Learner learner(cfg, f.schedule, f.store);
  learner.run_session(1);
  EXPECT_FALSE(learner.basis().has_value());
}

TEST(Learner, EvaluateCoversVisibleTestSamples) {
  Fixture f;
  Learner learner(tiny_config(), f.schedule, f.store);
  learner.run_session(1);
  learner.run_session(2);
  const auto log = learner.evaluate(2);
  EXPECT_EQ(log.rows.size(), 5u * 2u);
  for (const auto& r : log.rows) {
    EXPECT_EQ(r.session, 2u);
    EXPECT_EQ(r.intro_session, f.schedule.intro_session(r.true_label));
    const auto visible = f.schedule.visible_classes(2);
    EXPECT_NE(std::find(visible.begin(), visible.end(), r.pred_label), visible.end());
  }
}

TEST(RunExperiment, DeterministicAcrossRuns) {
  Fixture f;
  const auto a = run_experiment(tiny_config(), f.schedule, f.store);
  const auto b = run_experiment(tiny_config(), f.schedule, f.store);
  EXPECT_EQ(prediction_log_csv(a.log), prediction_log_csv(b.log));
  ASSERT_EQ(a.sessions.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.sessions[i].epoch_loss, b.sessions[i].epoch_loss);
  EXPECT_EQ(a.log.last_session(), 3u);
  RunConfig other = tiny_config();
  other.master_seed = 12;
  EXPECT_NE(run_experiment(other, f.schedule, f.store).sessions[0].epoch_loss, a.sessions[0].epoch_loss);
}

TEST(RunExperiment, CallbackSeesEverySession) {
  Fixture f;
  std::vector<std::size_t> seen;
  run_experiment(tiny_config(), f.schedule, f.store,
                 [&](const Learner& l, const SessionStats& s, const PredictionLog& log) {
                   seen.push_back(s.session);
                   EXPECT_EQ(l.completed_sessions(), s.session);
                   EXPECT_EQ(log.last_session(), s.session);
                 });
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2, 3}));
}

TEST(Learner, RestoreReproducesTrainedState) {
  Fixture f;
  Learner a(tiny_config(), f.schedule, f.store);
  a.run_session(1);
  Learner b(tiny_config(), f.schedule, f.store);
  b.restore(a.heads().params(), 1);
  EXPECT_EQ(b.completed_sessions(), 1u);
  EXPECT_EQ(prediction_log_csv(b.evaluate(1)), prediction_log_csv(a.evaluate(1)));
  EXPECT_EQ(b.memory().all(), a.memory().all());
  EXPECT_THROW(b.restore(a.heads().params(), 9), ProtocolError);
}

TEST(FeatureExtractor, AugmentedDiffersButKeepsShape) {
  Fixture f;
  const RunConfig cfg = tiny_config();
  const FeatureExtractor extractor(cfg);
  const auto pc = f.store.load(f.schedule.session(1).train[0]);
  const auto clean = extractor.extract(pc);
  const auto a = extractor.extract_augmented(pc, 1);
  EXPECT_EQ(a.depth.rows(), clean.depth.rows());
  EXPECT_EQ(a.depth.cols(), cfg.feature_dim);
  EXPECT_EQ(a.points.size(), cfg.point_dim);
  EXPECT_NE(a.depth, clean.depth);
  EXPECT_EQ(extractor.extract_augmented(pc, 1).depth, a.depth);
}
