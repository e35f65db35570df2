#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "diffnea/dynamics.hpp"
#include "diffnea/model.hpp"
#include "diffnea/param_set.hpp"
#include "diffnea/sim.hpp"
#include "diffnea/systems.hpp"

using namespace diffnea;

namespace {

struct Fixture {
  KinematicTree tree;
  ParamSet ps;
  TreeParamLayout layout;
  RealizedTree<double> realized;
  std::vector<double> q{0.3, -1.2}, qd{0.5, 2.0}, u{0.7, 0.0};

  explicit Fixture(SystemKind kind) : tree(Plant::make(kind).tree()) {
    layout = add_tree_params(tree, ps);
    realized = realize_tree<double>(tree, ps.values(), layout);
  }
};

void BM_AbaDouble(benchmark::State& state) {
  Fixture f(static_cast<SystemKind>(state.range(0)));
  for (auto _ : state) {
    auto r = aba_forward<double>(f.realized, f.q, f.qd, f.u);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_AbaDouble)->Arg(0)->Arg(1);

void BM_RneaDouble(benchmark::State& state) {
  Fixture f(static_cast<SystemKind>(state.range(0)));
  const std::vector<double> qdd{1.0, -3.0};
  for (auto _ : state) {
    auto r = rnea_inverse<double>(f.realized, f.q, f.qd, qdd);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_RneaDouble)->Arg(0)->Arg(1);

void BM_ClosedForm(benchmark::State& state) {
  const Plant plant = Plant::make(static_cast<SystemKind>(state.range(0)));
  const std::vector<double> q{0.3, -1.2}, qd{0.5, 2.0}, u{0.7, 0.0};
  for (auto _ : state) {
    auto r = plant.accel(q, qd, u);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_ClosedForm)->Arg(0)->Arg(1);

// Realize, ABA on the tape, reverse sweep: one sample of a training step.
void BM_AbaGradient(benchmark::State& state) {
  Fixture f(static_cast<SystemKind>(state.range(0)));
  for (auto _ : state) {
    Tape::active().clear();
    const auto leaves = f.ps.bind();
    const auto rt = realize_tree<DiffScalar>(f.tree, leaves, f.layout);
    std::vector<DiffScalar> q(f.q.begin(), f.q.end()), qd(f.qd.begin(), f.qd.end()), u(f.u.begin(), f.u.end());
    const auto r = aba_forward<DiffScalar>(rt, q, qd, u);
    const DiffScalar loss = r.qdd[0] * r.qdd[0] + r.qdd[1] * r.qdd[1];
    auto g = gradient(loss, f.ps);
    benchmark::DoNotOptimize(g);
  }
}
BENCHMARK(BM_AbaGradient)->Arg(0)->Arg(1);

void BM_Rk4Step(benchmark::State& state) {
  const PlantModel model(Plant::make(static_cast<SystemKind>(state.range(0))));
  const State s{{0.3, -1.2}, {0.5, 2.0}};
  const std::vector<double> tau{0.0, 0.0};
  for (auto _ : state) {
    auto next = rk4_step(model, s, tau, kDefaultDt);
    benchmark::DoNotOptimize(next);
  }
}
BENCHMARK(BM_Rk4Step)->Arg(0)->Arg(1);

}  // namespace

BENCHMARK_MAIN();
