#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include <benchmark/benchmark.h>
#include <unistd.h>

#include "cvc/censoring.hpp"
#include "cvc/moments.hpp"
#include "cvc/simulate.hpp"

namespace fs = std::filesystem;

namespace {

// One simulated file per (n, m), written on first use and removed at exit.
struct Data {
  fs::path dir;
  cvc::GenotypeSource src;
  cvc::SyntheticDecomposition syn;
  cvc::CovariateBasis basis;

  ~Data() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
};

const Data& data(std::size_t n, std::size_t m) {
  static std::map<std::pair<std::size_t, std::size_t>, std::unique_ptr<Data>> cache;
  auto& slot = cache[{n, m}];
  if (!slot) {
    slot = std::make_unique<Data>();
    slot->dir = fs::temp_directory_path() /
                ("cvc-bench-" + std::to_string(::getpid()) + "-" + std::to_string(n) + "x" + std::to_string(m));
    fs::create_directories(slot->dir);
    const auto sim = cvc::write_simulated_genotypes({.n = n, .m = m, .rho = 0.1, .seed = 1},
                                                    cvc::BedPaths::from_prefix(slot->dir / "g"));
    slot->src = cvc::assign_jackknife_blocks(
        cvc::assign_contiguous_partitions(cvc::GenotypeSource::open(sim.paths), 4), 10);
    Eigen::MatrixXd w(static_cast<Eigen::Index>(n), 3);
    w << Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)), cvc::simulate_covariates(n, 2, 2);
    slot->basis = cvc::build_basis(w);
    const Eigen::VectorXd y = cvc::simulate_covariates(n, 1, 3).col(0);
    const auto cens = cvc::calibrate_censoring(y, 0.3, 1.0, 4);
    slot->syn = cvc::build_synthetic(cens.samples,
                                     cvc::fit_censoring_cdf(cens.samples, cvc::default_cdf_cap(n)));
  }
  return *slot;
}

void BM_Decode(benchmark::State& state) {
  const auto& d = data(static_cast<std::size_t>(state.range(0)), 4096);
  Eigen::MatrixXd x;
  for (auto _ : state) {
    d.src.decode(0, 512, x);
    benchmark::DoNotOptimize(x.data());
  }
  state.SetItemsProcessed(state.iterations() * 512 * state.range(0));
}
BENCHMARK(BM_Decode)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);

void BM_Accumulate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto& d = data(n, 4096);
  const auto probes = cvc::make_probes(static_cast<Eigen::Index>(n), state.range(1), d.basis, d.syn.d, 5);
  for (auto _ : state) {
    auto arr = cvc::accumulate(d.src, d.basis, d.syn, probes);
    benchmark::DoNotOptimize(arr.frob.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Accumulate)->Args({2000, 10})->Args({4000, 10})->Args({8000, 10})->Args({4000, 40})
    ->Unit(benchmark::kMillisecond)->Complexity(benchmark::oN);

void BM_Synthetic(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Eigen::VectorXd y = cvc::simulate_covariates(n, 1, 6).col(0);
  const auto cens = cvc::calibrate_censoring(y, 0.4, 1.0, 7);
  for (auto _ : state) {
    const auto g = cvc::fit_censoring_cdf(cens.samples, cvc::default_cdf_cap(n));
    auto syn = cvc::build_synthetic(cens.samples, g);
    benchmark::DoNotOptimize(syn.y1.data());
  }
}
BENCHMARK(BM_Synthetic)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
