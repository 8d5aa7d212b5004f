// Timings for the serial reference kernels against the OpenMP paths, plus a
// whole-encoder forward comparison. Build and run:
//   cmake --build build --target ftlab_bench && ./build/bench/ftlab_bench

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ftlab/encoder.hpp"
#include "ftlab/kernels.hpp"
#include "ftlab/rng.hpp"
#include "ftlab/vocab.hpp"

using namespace ftlab;
using Clock = std::chrono::steady_clock;

namespace {

double time_of(int repeats, const std::function<void()>& fn) {
    fn();  // warm up
    const auto t0 = Clock::now();
    for (int r = 0; r < repeats; ++r) fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double>(t1 - t0).count() / repeats;
}

std::vector<double> random_vec(size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.next_normal();
    return v;
}

void bench_gemm() {
    std::printf("%-24s %10s %10s %8s\n", "gemm_nn", "serial", "parallel", "speedup");
    Rng rng(1);
    for (int n : {64, 128, 256, 384}) {
        const auto a = random_vec(static_cast<size_t>(n) * n, rng);
        const auto b = random_vec(static_cast<size_t>(n) * n, rng);
        std::vector<double> c(static_cast<size_t>(n) * n);
        const int repeats = n <= 128 ? 50 : 8;
        const double ts = time_of(repeats, [&] { kernels::serial::gemm_nn(n, n, n, a.data(), b.data(), c.data()); });
        kernels::set_parallel_enabled(true);
        const double tp = time_of(repeats, [&] { kernels::gemm_nn(n, n, n, a.data(), b.data(), c.data()); });
        std::printf("%4dx%-4d                %8.3fms %8.3fms %7.2fx\n", n, n, 1e3 * ts, 1e3 * tp, ts / tp);
    }
}

void bench_encoder() {
    std::printf("\n%-24s %10s %10s %8s\n", "encoder forward", "serial", "parallel", "speedup");
    Rng rng(2);
    for (int hidden : {32, 64, 128}) {
        EncoderConfig cfg;
        cfg.num_layers = 4;
        cfg.hidden = hidden;
        cfg.heads = 4;
        cfg.ff_dim = 4 * hidden;
        cfg.vocab_size = 512;
        cfg.max_seq_len = 64;
        cfg.dropout_p = 0.0;
        Rng init(3);
        const NamedTensors params = init_encoder_params(cfg, init);
        std::vector<int> ids(64), mask(64, 1);
        for (auto& id : ids) id = Vocabulary::kNumSpecials + static_cast<int>(rng.next_below(500));
        ids[0] = Vocabulary::kBos;

        kernels::set_parallel_enabled(false);
        const double ts = time_of(5, [&] { (void)encode_eval(params, cfg, ids, mask); });
        kernels::set_parallel_enabled(true);
        const double tp = time_of(5, [&] { (void)encode_eval(params, cfg, ids, mask); });
        std::printf("L=4 H=%-4d seq=64       %8.3fms %8.3fms %7.2fx\n", hidden, 1e3 * ts, 1e3 * tp, ts / tp);
    }
    kernels::set_parallel_enabled(true);
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads = %d, parallel threshold = %lld ops\n", omp_get_max_threads(),
                static_cast<long long>(kernels::kParallelMinWork));
#else
    std::printf("built without OpenMP; parallel paths run serially\n");
#endif
    bench_gemm();
    bench_encoder();
    return 0;
}
