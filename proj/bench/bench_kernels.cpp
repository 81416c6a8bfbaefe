// Serial reference vs OpenMP path of the hot kernels. Arg(0) = serial, Arg(1) = parallel.
#include <benchmark/benchmark.h>

#include "wmr/ground.hpp"
#include "wmr/smoother.hpp"
#include "wmr/synth.hpp"

namespace {

using namespace wmr;

Exec exec_of(const benchmark::State& st) { return st.range(0) ? Exec::Parallel : Exec::Serial; }

const std::vector<FramePrediction>& walk() {
  static const std::vector<FramePrediction> frames = [] {
    SyntheticScenario s;
    s.subjects = 1;
    const SynthOutput out = synth_generate(s);
    std::vector<FramePrediction> f;
    for (const auto* r : subject_records(out.truth, 0)) f.push_back(r->pred);
    return f;
  }();
  return frames;
}

void BM_ForwardKinematicsBatch(benchmark::State& st) {
  const auto& frames = walk();
  std::vector<FramePose> poses;
  std::vector<double> gamma;
  for (const auto& f : frames) {
    poses.push_back(pose_from_prediction(standard_decoder(), f));
    gamma.push_back(f.gamma_scale);
  }
  for (auto _ : st) {
    benchmark::DoNotOptimize(forward_kinematics_batch(standard_rig(), poses, gamma, exec_of(st)));
  }
}
BENCHMARK(BM_ForwardKinematicsBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_SmootherLossAndGradient(benchmark::State& st) {
  const auto& frames = walk();
  WindowProblem pb;
  pb.rig = &standard_rig();
  pb.decoder = &standard_decoder();
  pb.initial.assign(frames.begin(), frames.begin() + 60);
  const WindowVariables vars = WindowVariables::from_predictions(pb.initial);
  const SmootherConfig cfg = SmootherConfig::defaults(standard_rig());
  Eigen::VectorXd grad;
  for (auto _ : st) {
    benchmark::DoNotOptimize(loss_and_gradient(pb, vars, cfg, grad, exec_of(st)));
  }
}
BENCHMARK(BM_SmootherLossAndGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_GroundEnergy(benchmark::State& st) {
  const GroundConfig cfg;
  const GroundProblem pb = make_ground_problem(walk(), standard_rig(), standard_decoder(), cfg);
  std::vector<Vec3> grad;
  for (auto _ : st) {
    benchmark::DoNotOptimize(ground_energy(pb, pb.camera_prior, cfg, &grad, exec_of(st)));
  }
}
BENCHMARK(BM_GroundEnergy)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_SmoothTrack(benchmark::State& st) {
  std::vector<FramePrediction> frames(walk().begin(), walk().begin() + 110);
  SmootherConfig cfg = SmootherConfig::defaults(standard_rig());
  cfg.adam.iters = 20;
  for (auto _ : st) {
    benchmark::DoNotOptimize(
        smooth_track(frames, standard_rig(), standard_decoder(), cfg, nullptr, exec_of(st)));
  }
}
BENCHMARK(BM_SmoothTrack)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
