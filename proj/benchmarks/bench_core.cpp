// Hot paths of a match at the desk-scale working size (n = 642, k = 30).

#include <benchmark/benchmark.h>

#include "fmprior/distill.hpp"
#include "fmprior/sgm.hpp"
#include "fmprior/synth.hpp"

namespace fmprior {
namespace {

struct Pair {
  TriangleMesh m1, m2;
  ShapeContext s1, s2;
};

const Pair& pair() {
  static const Pair p = [] {
    DeformConfig c;
    c.epsilon = 0.02;
    const Deformer d(make_template(c.kind, c.level), c);
    TriangleMesh m1 = d.sample(1), m2 = d.sample(2);
    ShapeContext s1 = prepare_shape(m1, 60, 16, 30), s2 = prepare_shape(m2, 60, 16, 30);
    return Pair{std::move(m1), std::move(m2), std::move(s1), std::move(s2)};
  }();
  return p;
}

void BM_Eigenbasis(benchmark::State& state) {
  const auto& m = pair().m1;
  const auto solver = state.range(0) == 0 ? EigenSolverKind::kDense : EigenSolverKind::kSubspace;
  for (auto _ : state) benchmark::DoNotOptimize(eigenbasis(m, static_cast<int>(state.range(1)), solver));
}
BENCHMARK(BM_Eigenbasis)->Args({0, 30})->Args({1, 30})->Args({1, 60})->Unit(benchmark::kMillisecond);

void BM_Zoomout(benchmark::State& state) {
  const auto& p = pair();
  const FunctionalMap C = fmap_from_p2p(identity_map(p.s1.basis.num_vertices()), p.s1.basis, p.s2.basis, p.s2.mass, 30);
  for (auto _ : state)
    benchmark::DoNotOptimize(zoomout(C, p.s1.basis, p.s2.basis, p.s2.mass, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_Zoomout)->Arg(40)->Arg(60)->Unit(benchmark::kMillisecond);

void BM_SolveFmap(benchmark::State& state) {
  const Eigen::MatrixXd A1 = Eigen::MatrixXd::Random(30, 128), A2 = Eigen::MatrixXd::Random(30, 128);
  const Mask M = Eigen::MatrixXd::Random(30, 30).cwiseAbs();
  for (auto _ : state) benchmark::DoNotOptimize(solve_fmap(A1, A2, 0.1, M));
}
BENCHMARK(BM_SolveFmap)->Unit(benchmark::kMicrosecond);

void BM_DenoiserForward(benchmark::State& state) {
  const auto d = SpectralDenoiser::initialized(DenoiserConfig{}, NoiseSchedule{}, 1);
  const auto batch = static_cast<Eigen::Index>(state.range(0));
  const Eigen::MatrixXd rows = Eigen::MatrixXd::Random(batch, 900);
  const Eigen::VectorXd sigmas = Eigen::VectorXd::Constant(batch, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(d.denoise_rows(rows, sigmas));
}
BENCHMARK(BM_DenoiserForward)->Arg(1)->Arg(100)->Unit(benchmark::kMicrosecond);

void BM_DistillMask(benchmark::State& state) {
  const auto d = SpectralDenoiser::initialized(DenoiserConfig{}, NoiseSchedule{}, 1);
  const Eigen::MatrixXd C = Eigen::MatrixXd::Identity(30, 30);
  for (auto _ : state) benchmark::DoNotOptimize(distill_mask(d, C, 1.0, 100, 3));
}
BENCHMARK(BM_DistillMask)->Unit(benchmark::kMillisecond);

// Full zero-shot loop; reported per optimization step.
void BM_MatchStep(benchmark::State& state) {
  const auto& p = pair();
  const auto d = SpectralDenoiser::initialized(DenoiserConfig{}, NoiseSchedule{}, 1);
  ZeroShotConfig c;
  c.mode = ZeroShotMode::kFull;
  c.steps = 20;
  c.mask_every = 10;
  c.eval_zoomout_target = 31;
  c.theta_init = ThetaInit::kFanIn;
  for (auto _ : state) benchmark::DoNotOptimize(zero_shot_match(p.s1, p.s2, &d, c, 1));
  state.SetItemsProcessed(state.iterations() * c.steps);
}
BENCHMARK(BM_MatchStep)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace fmprior

BENCHMARK_MAIN();
