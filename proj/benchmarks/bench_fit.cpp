#include <benchmark/benchmark.h>

#include "scovreg/estimator.hpp"
#include "scovreg/inference.hpp"
#include "scovreg/simulate.hpp"
#include "scovreg/tuning.hpp"

using namespace scovreg;

namespace {

struct Data {
    Matrix x;
    Matrix y;
};

Data simulated(std::size_t n, std::size_t p, std::size_t q) {
    Data d;
    d.x = gen_covariates(n, q, Setting::Binary, 1);
    d.y = gen_responses(d.x, Structure::MA1, p, 2).y;
    return d;
}

void BM_CrossMoments(benchmark::State& state) {
    const auto p = static_cast<std::size_t>(state.range(0));
    const Data d = simulated(500, p, 30);
    const CenteredDesign design = center_data(d.y, d.x);
    for (auto _ : state) {
        benchmark::DoNotOptimize(cross_moments(design));
    }
}
BENCHMARK(BM_CrossMoments)->Arg(20)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_Fit(benchmark::State& state) {
    const auto p = static_cast<std::size_t>(state.range(0));
    const auto q = static_cast<std::size_t>(state.range(1));
    const Data d = simulated(500, p, q);
    const CrossMoments mom = cross_moments(center_data(d.y, d.x));
    FitConfig cfg;
    cfg.penalty = {0.05, 0.05};
    const CovariateBounds box = CovariateBounds::unit(q);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit(mom, box, cfg));
    }
}
BENCHMARK(BM_Fit)->Args({50, 30})->Args({50, 100})->Args({100, 30})->Unit(benchmark::kMillisecond);

void BM_PdAdjust(benchmark::State& state) {
    const auto p = static_cast<std::size_t>(state.range(0));
    const CoefficientStack truth = true_stack(Structure::Clique, p, 30);
    const CovariateBounds box = CovariateBounds::unit(30);
    for (auto _ : state) {
        benchmark::DoNotOptimize(pd_adjust(truth, box));
    }
}
BENCHMARK(BM_PdAdjust)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_DirectionMatrix(benchmark::State& state) {
    const auto q = static_cast<std::size_t>(state.range(0));
    const Data d = simulated(500, 2, q);
    const CenteredDesign design = center_data(d.y, d.x);
    const double mu = default_mu(500, 50, q);
    for (auto _ : state) {
        benchmark::DoNotOptimize(direction_matrix(design.x, mu));
    }
}
BENCHMARK(BM_DirectionMatrix)->Arg(30)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_CvReduced(benchmark::State& state) {
    const Data d = simulated(500, 50, 30);
    const CvGrid grid = CvGrid::reduced(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(cv_select(d.y, d.x, grid, 3));
    }
}
BENCHMARK(BM_CvReduced)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond)->Iterations(1);

} // namespace
BENCHMARK_MAIN();
