// Serial reference loops against the OpenMP kernels on face-sized inputs.
// Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "camo/camouflage.hpp"
#include "camo/kernels.hpp"
#include "camo/metrics.hpp"
#include "camo/random.hpp"
#include "camo_ref/reference.hpp"

namespace {

using namespace camo;

ImageF random_image(int size, std::uint64_t seed)
{
    Rng rng(seed);
    ImageF img(size, size);
    for (double& v : img.values()) v = rng.uniform();
    return img;
}

Plane ramp_mask(int size)
{
    Plane m(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) m.at(y, x) = static_cast<double>(x + y) / (2.0 * size);
    return m;
}

void filter_ref(benchmark::State& st)
{
    const ImageF img = random_image(static_cast<int>(st.range(0)), 1);
    const Plane k = ref::gaussian_kernel_2d(static_cast<int>(st.range(1)), 2.0);
    for (auto _ : st) benchmark::DoNotOptimize(ref::convolve_2d(img, k));
}

void filter_omp(benchmark::State& st)
{
    const ImageF img = random_image(static_cast<int>(st.range(0)), 1);
    const int k = static_cast<int>(st.range(1));
    for (auto _ : st) benchmark::DoNotOptimize(gaussian_filter(img, k, 2.0));
}

void noise_ref(benchmark::State& st)
{
    const ImageF img = random_image(static_cast<int>(st.range(0)), 2);
    for (auto _ : st) benchmark::DoNotOptimize(ref::add_noise(img, 0.0, 0.05, 9));
}

void noise_omp(benchmark::State& st)
{
    const ImageF img = random_image(static_cast<int>(st.range(0)), 2);
    for (auto _ : st) benchmark::DoNotOptimize(add_gaussian_noise(img, 0.0, 0.05, 9));
}

void blend_ref(benchmark::State& st)
{
    const int n = static_cast<int>(st.range(0));
    const ImageF a = random_image(n, 3), b = random_image(n, 4);
    const Plane m = ramp_mask(n);
    for (auto _ : st) benchmark::DoNotOptimize(ref::blend(a, b, m));
}

void blend_omp(benchmark::State& st)
{
    const int n = static_cast<int>(st.range(0));
    const ImageF a = random_image(n, 3), b = random_image(n, 4);
    const Plane m = ramp_mask(n);
    ImageF out(n, n);
    for (auto _ : st) {
        kernels::blend(a, b, m, out);
        benchmark::DoNotOptimize(out.values().data());
    }
}

void ssim_ref(benchmark::State& st)
{
    const int n = static_cast<int>(st.range(0));
    const ImageF a = random_image(n, 5), b = random_image(n, 6);
    for (auto _ : st) benchmark::DoNotOptimize(ref::ssim(a, b));
}

void ssim_omp(benchmark::State& st)
{
    const int n = static_cast<int>(st.range(0));
    const ImageF a = random_image(n, 5), b = random_image(n, 6);
    for (auto _ : st) benchmark::DoNotOptimize(metrics::ssim(a, b));
}

}  // namespace

BENCHMARK(filter_ref)->Args({128, 5})->Args({128, 17})->Unit(benchmark::kMicrosecond);
BENCHMARK(filter_omp)->Args({128, 5})->Args({128, 17})->Unit(benchmark::kMicrosecond);
BENCHMARK(noise_ref)->Arg(128)->Arg(512)->Unit(benchmark::kMicrosecond);
BENCHMARK(noise_omp)->Arg(128)->Arg(512)->Unit(benchmark::kMicrosecond);
BENCHMARK(blend_ref)->Arg(128)->Arg(512)->Unit(benchmark::kMicrosecond);
BENCHMARK(blend_omp)->Arg(128)->Arg(512)->Unit(benchmark::kMicrosecond);
BENCHMARK(ssim_ref)->Arg(128)->Unit(benchmark::kMicrosecond);
BENCHMARK(ssim_omp)->Arg(128)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
