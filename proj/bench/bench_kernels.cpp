// Serial vs OpenMP kernels on batch-sized inputs. Arg = rows.

#include <benchmark/benchmark.h>

#include <random>

#include "taillight/evaluation.hpp"
#include "taillight/kernels.hpp"

using namespace taillight;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Matrix m(r, c);
    for (double& v : m.data()) v = g(rng);
    return m;
}

constexpr std::size_t kDim = 512;

template <bool Parallel>
void affine(benchmark::State& st) {
    const auto n = static_cast<std::size_t>(st.range(0));
    const Matrix w = random_matrix(kDim, kDim, 1), x = random_matrix(n, kDim, 2);
    const Vector b(kDim, 0.1);
    for (auto _ : st) {
        if constexpr (Parallel)
            benchmark::DoNotOptimize(kernels::parallel::affine_rows(w, b, x));
        else
            benchmark::DoNotOptimize(kernels::serial::affine_rows(w, b, x));
    }
}

template <bool Parallel>
void gram(benchmark::State& st) {
    const Matrix u = random_matrix(static_cast<std::size_t>(st.range(0)), kDim, 3);
    for (auto _ : st) {
        if constexpr (Parallel)
            benchmark::DoNotOptimize(kernels::parallel::gram(u));
        else
            benchmark::DoNotOptimize(kernels::serial::gram(u));
    }
}

template <bool Parallel>
void alignment(benchmark::State& st) {
    const auto n = static_cast<std::size_t>(st.range(0));
    const Matrix a = random_matrix(n, n, 4), b = random_matrix(n, n, 5);
    for (auto _ : st) {
        if constexpr (Parallel)
            benchmark::DoNotOptimize(kernels::parallel::alignment_rows(a, b, 0.1));
        else
            benchmark::DoNotOptimize(kernels::serial::alignment_rows(a, b, 0.1));
    }
}

template <bool Parallel>
void predict(benchmark::State& st) {
    const std::size_t classes = 100, layers = 6;
    LayerFeatures text;
    for (std::size_t c = 0; c < classes; ++c) text.classes.push_back(static_cast<ClassId>(c));
    for (std::size_t l = 0; l < layers; ++l) text.layers.push_back(random_matrix(classes, kDim, 10 + l));
    LayerWeights w(layers);
    for (ClassId c : text.classes) w.add_uniform(c, 0);
    const Matrix x = random_matrix(static_cast<std::size_t>(st.range(0)), kDim, 6);
    for (auto _ : st) {
        if constexpr (Parallel)
            benchmark::DoNotOptimize(parallel::predict_rows(x, text, w));
        else
            benchmark::DoNotOptimize(serial::predict_rows(x, text, w));
    }
}

}  // namespace

BENCHMARK(affine<false>)->Arg(64)->Arg(256);
BENCHMARK(affine<true>)->Arg(64)->Arg(256);
BENCHMARK(gram<false>)->Arg(64)->Arg(256);
BENCHMARK(gram<true>)->Arg(64)->Arg(256);
BENCHMARK(alignment<false>)->Arg(64)->Arg(256);
BENCHMARK(alignment<true>)->Arg(64)->Arg(256);
BENCHMARK(predict<false>)->Arg(64)->Arg(256);
BENCHMARK(predict<true>)->Arg(64)->Arg(256);

BENCHMARK_MAIN();
