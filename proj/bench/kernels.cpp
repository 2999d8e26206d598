// Serial reference kernels against their OpenMP counterparts.
//
//   pdh_bench --benchmark_filter=Scan
//
// Thread count follows OMP_NUM_THREADS; the *Serial variants ignore it.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <vector>

#include "pdh/evalkit.hpp"
#include "pdh/hamcode.hpp"
#include "pdh/netcore.hpp"
#include "pdh/rng.hpp"

namespace {

pdh::BitCode random_code(pdh::Rng& rng, std::size_t bits) {
    pdh::BitCode c(bits);
    for (std::size_t i = 0; i < bits; ++i) c.set(i, rng.below(2) == 1);
    return c;
}

pdh::CodeIndex random_index(std::size_t n, std::size_t bits, std::uint64_t seed = 1) {
    pdh::Rng rng(seed);
    pdh::CodeIndex idx(bits);
    idx.reserve(n);
    for (std::size_t i = 0; i < n; ++i) idx.add(random_code(rng, bits), "");
    return idx;
}

void BM_ScanSerial(benchmark::State& state) {
    const auto idx = random_index(std::size_t(state.range(0)), std::size_t(state.range(1)));
    pdh::Rng rng(2);
    const auto q = random_code(rng, idx.bits());
    std::vector<std::uint32_t> out(idx.size());
    for (auto _ : state) {
        pdh::hamming_scan(q, idx, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ScanOmp(benchmark::State& state) {
    const auto idx = random_index(std::size_t(state.range(0)), std::size_t(state.range(1)));
    pdh::Rng rng(2);
    const auto q = random_code(rng, idx.bits());
    std::vector<std::uint32_t> out(idx.size());
    for (auto _ : state) {
        pdh::hamming_scan_omp(q, idx, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

std::vector<pdh::BitCode> queries(std::size_t count, std::size_t bits) {
    pdh::Rng rng(3);
    std::vector<pdh::BitCode> q;
    for (std::size_t i = 0; i < count; ++i) q.push_back(random_code(rng, bits));
    return q;
}

void BM_RankSerial(benchmark::State& state) {
    const auto idx = random_index(std::size_t(state.range(0)), 512);
    const auto qs = queries(16, 512);
    for (auto _ : state) {
        for (const auto& q : qs) benchmark::DoNotOptimize(pdh::rank_counting(q, idx));
    }
}

void BM_RankBatch(benchmark::State& state) {
    const auto idx = random_index(std::size_t(state.range(0)), 512);
    const auto qs = queries(16, 512);
    for (auto _ : state) benchmark::DoNotOptimize(pdh::rank_batch(qs, idx));
}

// Part-sized network on a batch of strips.
void forward_at(benchmark::State& state, int threads) {
    const pdh::HashNet net(pdh::default_architecture({3, 32, 64}, 32), 42);
    pdh::Tensor batch({std::size_t(state.range(0)), 3, 32, 64});
    pdh::Rng rng(4);
    for (double& v : batch.data) v = rng.uniform();
    const int saved = omp_get_max_threads();
    omp_set_num_threads(threads);
    for (auto _ : state) benchmark::DoNotOptimize(pdh::forward(net, batch));
    omp_set_num_threads(saved);
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ForwardSerial(benchmark::State& state) { forward_at(state, 1); }
void BM_ForwardOmp(benchmark::State& state) { forward_at(state, omp_get_max_threads()); }

struct EvalCase {
    std::vector<pdh::QueryRecord> queries;
    std::vector<pdh::BitCode> query_codes;
    std::vector<pdh::GalleryRecord> gallery;
    pdh::CodeIndex gallery_codes;
};

EvalCase eval_case(std::size_t gallery_size) {
    EvalCase c;
    pdh::Rng rng(5);
    c.gallery_codes = pdh::CodeIndex(128);
    for (std::size_t i = 0; i < gallery_size; ++i) {
        c.gallery.push_back({"", int(rng.below(500)), 1 + int(rng.below(6)), false});
        c.gallery_codes.add(random_code(rng, 128), "");
    }
    for (int i = 0; i < 200; ++i) {
        c.queries.push_back({"", int(rng.below(500)), 1 + int(rng.below(6))});
        c.query_codes.push_back(random_code(rng, 128));
    }
    return c;
}

void BM_EvaluateSerial(benchmark::State& state) {
    const EvalCase c = eval_case(std::size_t(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(pdh::evaluate_serial(c.queries, c.query_codes, c.gallery, c.gallery_codes));
}

void BM_EvaluateOmp(benchmark::State& state) {
    const EvalCase c = eval_case(std::size_t(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(pdh::evaluate(c.queries, c.query_codes, c.gallery, c.gallery_codes));
}

}  // namespace

BENCHMARK(BM_ScanSerial)->Args({100000, 2048})->Args({100000, 128})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScanOmp)->Args({100000, 2048})->Args({100000, 128})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RankSerial)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RankBatch)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardSerial)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardOmp)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateSerial)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateOmp)->Arg(20000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
