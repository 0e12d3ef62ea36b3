// Serial reference kernels against their OpenMP counterparts. On a single
// core the parallel variants only show their overhead.

#include <benchmark/benchmark.h>

#include <map>

#include "platoon/convex/lmi.hpp"
#include "platoon/sim.hpp"
#include "platoon/ucl.hpp"

using namespace platoon;
using convex::AffineMatrix;
using numerics::Matrix;
using numerics::Vector;

namespace {

// Same block layout as the fixed-gain stability check, solved once so the
// barrier is evaluated at an interior point.
struct HessianCase {
  convex::LmiProblem problem;
  Vector x;
};

const HessianCase& hessian_case(int n) {
  static std::map<int, HessianCase> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  const ucl::PlatoonSystem sys = ucl::assemble_platoon(n, 0.5, 0.25, 0.9, 100.0);
  const Matrix buk = sys.Bu * ucl::default_gains(n).stacked();
  const int nn = 3 * n;
  const double h = sys.h1;
  HessianCase c;
  auto& p = c.problem;
  const AffineMatrix pv = p.var(p.add_symmetric("P", nn)), qv = p.var(p.add_symmetric("Q", nn)),
                     zv = p.var(p.add_symmetric("Z", nn));
  const AffineMatrix pa = pv * sys.A;
  convex::SymmetricBlocks phi({nn, nn, 2 * n, nn, n});
  phi.set(0, 0, pa + pa.transpose() + (1.0 / (1.0 - sys.mu1)) * qv - (1.0 / h) * zv);
  phi.set(0, 1, pv * buk + (1.0 / h) * zv);
  phi.set(0, 2, pv * sys.Bw);
  phi.set(0, 3, Matrix(sys.A.transpose()) * zv);
  phi.set(0, 4, AffineMatrix(Matrix(sys.C.transpose())));
  phi.set(1, 1, -qv - (1.0 / h) * zv);
  phi.set(1, 3, Matrix(buk.transpose()) * zv);
  phi.set(2, 2, AffineMatrix(Matrix(-sys.gamma * sys.gamma * Matrix::Identity(2 * n, 2 * n))));
  phi.set(2, 3, Matrix(sys.Bw.transpose()) * zv);
  phi.set(3, 3, -(1.0 / h) * zv);
  phi.set(4, 4, AffineMatrix(Matrix(-Matrix::Identity(n, n))));
  p.add_constraint("Phi", phi.build(), convex::LmiSense::NegativeDefinite);
  p.add_constraint("P>0", -pv, convex::LmiSense::NegativeDefinite);
  p.add_constraint("Q>0", -qv, convex::LmiSense::NegativeDefinite);
  p.add_constraint("Z>0", -zv, convex::LmiSense::NegativeDefinite);
  c.x = convex::solve_lmi(p).x;
  return cache.emplace(n, std::move(c)).first->second;
}

void barrier_hessian(benchmark::State& state, convex::HessianKernel kernel) {
  const HessianCase& c = hessian_case(static_cast<int>(state.range(0)));
  const convex::BarrierKernel k(c.problem);
  double v = 0.0;
  Vector g;
  Matrix hess;
  for (auto _ : state) {
    if (!k.evaluate(c.x, kernel, &v, &g, &hess)) state.SkipWithError("point is not interior");
    benchmark::DoNotOptimize(hess.data());
  }
  state.counters["scalars"] = c.problem.num_scalars();
}

void BM_BarrierHessianSerial(benchmark::State& s) { barrier_hessian(s, convex::HessianKernel::Serial); }
void BM_BarrierHessianParallel(benchmark::State& s) { barrier_hessian(s, convex::HessianKernel::Parallel); }
BENCHMARK(BM_BarrierHessianSerial)->Arg(2)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BarrierHessianParallel)->Arg(2)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);

// Per-vehicle MPC fan-out inside the simulation loop: threads = 1 is the
// serial reference, 0 lets OpenMP pick.
void vehicle_solves(benchmark::State& state, int threads) {
  sim::ScenarioConfig cfg = sim::scenario_b();
  cfg.duration = 10.0;
  cfg.threads = threads;
  for (auto _ : state) {
    const sim::SimLog log = sim::run_scenario(cfg);
    benchmark::DoNotOptimize(log.records.data());
  }
}
void BM_VehicleSolvesSerial(benchmark::State& s) { vehicle_solves(s, 1); }
void BM_VehicleSolvesParallel(benchmark::State& s) { vehicle_solves(s, 0); }
BENCHMARK(BM_VehicleSolvesSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_VehicleSolvesParallel)->Unit(benchmark::kMillisecond);

void delay_traces(benchmark::State& state, bool parallel) {
  const ucl::PlatoonSystem sys = ucl::assemble_platoon(3, 0.5, 0.25, 0.9, 100.0);
  const Vector x0 = Vector::Constant(9, 0.5);
  for (auto _ : state) {
    const auto r = sim::monte_carlo_delays(sys, ucl::default_gains(3), x0, 8, 1, 0.0, 0.25, 0.9, 10.0, 2e-3, parallel);
    benchmark::DoNotOptimize(r.data());
  }
}
void BM_DelayTracesSerial(benchmark::State& s) { delay_traces(s, false); }
void BM_DelayTracesParallel(benchmark::State& s) { delay_traces(s, true); }
BENCHMARK(BM_DelayTracesSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DelayTracesParallel)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
