// Times the OpenMP kernels against the serial reference and reports the
// end-to-end evaluation throughput at 1..N threads.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cclc/data.hpp"
#include "cclc/evaluation.hpp"
#include "cclc/kernels.hpp"
#include "cclc/model.hpp"
#include "cclc/rng.hpp"

using namespace cclc;

namespace {

double time_ms(const std::function<void()>& body, int repeats) {
  body();  // warm up
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < repeats; ++r) body();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / repeats;
}

void bench_matmul(Rng& rng) {
  std::printf("matmul (m x k x n)          serial ms   openmp ms   speedup\n");
  for (int size : {64, 128, 256, 512}) {
    Tensor a = Tensor::uniform({size, size}, rng, -1.0, 1.0);
    Tensor b = Tensor::uniform({size, size}, rng, -1.0, 1.0);
    Tensor c({size, size});
    const int repeats = size <= 128 ? 50 : 10;
    const double serial = time_ms(
        [&] { kernels::serial::matmul(a.data(), b.data(), c.data(), size, size, size, false); },
        repeats);
    const double parallel = time_ms(
        [&] { kernels::matmul(a.data(), b.data(), c.data(), size, size, size, false); }, repeats);
    std::printf("  %4d x %4d x %4d     %10.3f  %10.3f     %5.2fx\n", size, size, size, serial,
                parallel, serial / parallel);
  }
}

void bench_conv(Rng& rng) {
  std::printf("conv1d_max (c=200, f=100)   serial ms   openmp ms   speedup\n");
  for (int time : {32, 128, 512}) {
    const int channels = 200, width = 3, nfilters = 100;
    Tensor seq = Tensor::uniform({channels, time}, rng, -1.0, 1.0);
    Tensor filters = Tensor::uniform({width, channels, nfilters}, rng, -1.0, 1.0);
    std::vector<double> vals(nfilters);
    std::vector<int> pos(nfilters);
    const double serial = time_ms(
        [&] {
          kernels::serial::conv1d_max(seq.data(), channels, time, filters.data(), width, nfilters,
                                      vals.data(), pos.data());
        },
        20);
    const double parallel = time_ms(
        [&] {
          kernels::conv1d_max(seq.data(), channels, time, filters.data(), width, nfilters,
                              vals.data(), pos.data());
        },
        20);
    std::printf("  T = %4d               %10.3f  %10.3f     %5.2fx\n", time, serial, parallel,
                serial / parallel);
  }
}

std::vector<QuestionGroup> synthetic_groups(Rng& rng, int questions, int candidates) {
  std::vector<std::string> words;
  for (int i = 0; i < 50; ++i) words.push_back("w" + std::to_string(i));
  std::vector<QuestionGroup> groups;
  for (int q = 0; q < questions; ++q) {
    QuestionGroup group;
    group.question_id = "q" + std::to_string(q);
    for (int t = 0; t < 8; ++t) group.question.push_back(words[rng.index(words.size())]);
    for (int c = 0; c < candidates; ++c) {
      Candidate candidate;
      for (int t = 0; t < 12; ++t) candidate.tokens.push_back(words[rng.index(words.size())]);
      candidate.label = c == 0 ? 1 : 0;
      group.candidates.push_back(std::move(candidate));
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

void bench_evaluate(Rng& rng) {
  ModelConfig config;
  config.embed_dim = 50;
  config.proj_dim = 50;
  config.filters_per_width = 50;
  config.n_clusters = 8;
  config.k_pool = 4;
  config.dropout = 0.0;

  std::vector<QuestionGroup> groups = synthetic_groups(rng, 200, 8);
  Model model = Model::init(config, build_vocab(groups, 1), rng);

#ifdef _OPENMP
  const int max_threads = omp_get_max_threads();
#else
  const int max_threads = 1;
#endif
  std::printf("evaluate, 200 questions x 8 candidates\n");
  for (int threads = 1; threads <= max_threads; threads *= 2) {
#ifdef _OPENMP
    omp_set_num_threads(threads);
#endif
    const double ms = time_ms([&] { evaluate(model, groups); }, 3);
    std::printf("  threads = %d            %10.3f ms\n", threads, ms);
  }
#ifdef _OPENMP
  omp_set_num_threads(max_threads);
#endif
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("openmp enabled, max threads = %d\n\n", omp_get_max_threads());
#else
  std::printf("openmp disabled: parallel kernels run serially\n\n");
#endif
  Rng rng(7);
  bench_matmul(rng);
  std::printf("\n");
  bench_conv(rng);
  std::printf("\n");
  bench_evaluate(rng);
  return 0;
}
