#include <benchmark/benchmark.h>

#include "fscil/dataset.hpp"
#include "fscil/geometry.hpp"
#include "fscil/learner.hpp"
#include "fscil/projection.hpp"
#include "fscil/rfe.hpp"
#include "fscil/rng.hpp"

using namespace fscil;

namespace {

PointCloud cloud(std::size_t n) { return normalize_unit_sphere(gen_synthetic("torus", n, 1)); }

void BM_RenderViews(benchmark::State& state) {
  const auto pc = cloud(static_cast<std::size_t>(state.range(0)));
  const auto cams = default_camera_set(6, 2.0, 32, 32);
  for (auto _ : state) benchmark::DoNotOptimize(render_views(pc, cams, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RenderViews)->Arg(256)->Arg(1024)->Arg(4096);

void BM_ExtractFeatures(benchmark::State& state) {
  const FeatureExtractor extractor(RunConfig{});
  const auto pc = cloud(1024);
  for (auto _ : state) benchmark::DoNotOptimize(extractor.extract(pc));
}
BENCHMARK(BM_ExtractFeatures);

void BM_FitBasis(benchmark::State& state) {
  SplitMix64 rng(3);
  const Eigen::Index c = state.range(0);
  RowMatrix features(10 * c, c);
  for (Eigen::Index i = 0; i < features.size(); ++i) features.data()[i] = rng.gaussian();
  for (auto _ : state) benchmark::DoNotOptimize(fit_basis(features, 0.95));
}
BENCHMARK(BM_FitBasis)->Arg(32)->Arg(128)->Arg(512);

void BM_RcsLogits(benchmark::State& state) {
  SplitMix64 rng(4);
  const Eigen::Index c = state.range(0);
  RowMatrix features(4 * c, c);
  for (Eigen::Index i = 0; i < features.size(); ++i) features.data()[i] = rng.gaussian();
  const auto basis = fit_basis(features, 0.95);
  RowMatrix protos(96, c);
  for (Eigen::Index i = 0; i < protos.size(); ++i) protos.data()[i] = rng.gaussian();
  const Vector f = features.row(0).transpose();
  for (auto _ : state) benchmark::DoNotOptimize(logits(f, protos, &basis));
}
BENCHMARK(BM_RcsLogits)->Arg(32)->Arg(512);

void BM_TrainingStep(benchmark::State& state) {
  RunConfig cfg;
  const FeatureExtractor extractor(cfg);
  const auto pc = cloud(256);
  const SampleFeatures clean = extractor.extract(pc);
  const std::vector<SampleFeatures> aug{extractor.extract_augmented(pc, 1), extractor.extract_augmented(pc, 2)};
  const RowMatrix protos = PrototypeBank::build(synthetic_class_names(16), cfg.feature_dim).rows;
  const Heads heads(HeadsParams::init(cfg.heads_dims(), 0), true);
  const LossOptions opt = LossOptions::from(cfg);
  for (auto _ : state) {
    GradientBundle g = GradientBundle::zeros(cfg.heads_dims());
    benchmark::DoNotOptimize(sample_loss(heads, clean, aug, 3, protos, nullptr, opt, &g));
  }
}
BENCHMARK(BM_TrainingStep);

}  // namespace

BENCHMARK_MAIN();
