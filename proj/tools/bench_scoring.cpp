// Times the serial reference evaluation loop against the OpenMP one on a
// generated benchmark and checks that both produce identical results.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mcqa/backend.hpp"
#include "mcqa/benchmark.hpp"
#include "mcqa/eval.hpp"
#include "mcqa/rng.hpp"

namespace {

mcqa::BenchmarkSet make_benchmark(int items, int choices, std::uint64_t seed) {
    mcqa::BenchmarkSet set;
    set.name = "bench";
    mcqa::Rng rng(seed);
    const int subjects = 4;
    for (int s = 0; s < subjects; ++s) {
        const std::string subject = "bench_subject_" + std::to_string(s);
        for (int d = 0; d < 5; ++d) {
            mcqa::McqItem dev;
            dev.id = subject + "/dev/" + std::to_string(d);
            dev.subject = subject;
            dev.stem = "Calibration question " + std::to_string(d) +
                       " with enough words to look like a realistic stem?";
            for (int c = 0; c < choices; ++c) {
                dev.choices.push_back("calibration answer " + std::to_string(d * choices + c));
            }
            dev.answer_index = static_cast<int>(rng.below(static_cast<std::uint64_t>(choices)));
            dev.source_split = mcqa::Split::Dev;
            set.dev_items.push_back(std::move(dev));
        }
    }
    for (int i = 0; i < items; ++i) {
        mcqa::McqItem item;
        const std::string subject = "bench_subject_" + std::to_string(i % subjects);
        item.id = subject + "/test/" + std::to_string(i);
        item.subject = subject;
        item.stem = "Benchmark question " + std::to_string(i) +
                    " about nothing in particular, padded with a sentence so the "
                    "prompt assembly does a realistic amount of string work?";
        for (int c = 0; c < choices; ++c) {
            item.choices.push_back("generated answer option " + std::to_string(i) + "-" +
                                   std::to_string(c));
        }
        item.answer_index = static_cast<int>(rng.below(static_cast<std::uint64_t>(choices)));
        set.test_items.push_back(std::move(item));
    }
    mcqa::CrossRefDetector detector;
    mcqa::validate_benchmark(set, detector);
    return set;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

bool same_results(const std::vector<mcqa::ItemResult>& a,
                  const std::vector<mcqa::ItemResult>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].item_id != b[i].item_id || a[i].chosen_position != b[i].chosen_position ||
            a[i].scored != b[i].scored || a[i].correct != b[i].correct ||
            a[i].scores.size() != b[i].scores.size()) {
            return false;
        }
        for (std::size_t c = 0; c < a[i].scores.size(); ++c) {
            if (a[i].scores[c].logprob_sum != b[i].scores[c].logprob_sum) return false;
        }
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    int items = 2000;
    int repeats = 3;
    if (argc > 1) items = std::atoi(argv[1]);
    if (argc > 2) repeats = std::atoi(argv[2]);
    if (items < 1 || repeats < 1) {
        std::fprintf(stderr, "usage: %s [items] [repeats]\n", argv[0]);
        return 1;
    }

    const mcqa::BenchmarkSet set = make_benchmark(items, 4, 7);

    mcqa::CellTask task;
    task.set = &set;
    for (const mcqa::McqItem& item : set.test_items) task.items.push_back(&item);
    task.perturbation.kind = mcqa::PerturbationKind::DerangementShuffle;
    task.options.k_shot = 5;
    task.method.kind = mcqa::ScoringMethodKind::Symbol;
    task.seed = 11;

    mcqa::SyntheticModelSpec spec;
    spec.kind = mcqa::SyntheticKind::SeededUniform;
    spec.seed = 3;
    mcqa::SyntheticProvider provider(spec);

#ifdef _OPENMP
    std::printf("items: %d, threads: %d\n", items, omp_get_max_threads());
#else
    std::printf("items: %d, OpenMP disabled in this build\n", items);
#endif

    double best_serial = 1e300;
    double best_parallel = 1e300;
    std::vector<mcqa::ItemResult> serial;
    std::vector<mcqa::ItemResult> parallel;
    for (int r = 0; r < repeats; ++r) {
        auto start = std::chrono::steady_clock::now();
        serial = mcqa::evaluate_serial(task, provider);
        const double serial_s = seconds_since(start);
        best_serial = std::min(best_serial, serial_s);

        start = std::chrono::steady_clock::now();
        parallel = mcqa::evaluate_parallel(task, provider);
        const double parallel_s = seconds_since(start);
        best_parallel = std::min(best_parallel, parallel_s);

        std::printf("round %d: serial %.3fs, parallel %.3fs\n", r + 1, serial_s, parallel_s);
    }

    if (!same_results(serial, parallel)) {
        std::printf("FAIL: serial and parallel results differ\n");
        return 1;
    }
    std::printf("results identical; best serial %.3fs, best parallel %.3fs, speedup %.2fx\n",
                best_serial, best_parallel, best_serial / best_parallel);
    return 0;
}
