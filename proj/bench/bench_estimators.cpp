// Serial vs OpenMP Monte Carlo evaluation of each bound, plus per-step
// training cost (forward + backward) of each estimator.

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include <omp.h>

#include "lebound/bounds.hpp"
#include "lebound/data.hpp"
#include "lebound/train.hpp"

using h_clock = std::chrono::steady_clock;

namespace {

double seconds_since(h_clock::time_point t0) {
  return std::chrono::duration<double>(h_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t samples = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 2000;
  lebound::SyntheticConfig cfg;
  cfg.M = 50;
  cfg.N = 10;
  cfg.d_z = 2;
  cfg.seed = 7;
  const auto model = lebound::ModelInstance::synthetic_linear(lebound::generate_synthetic(cfg).dataset);

  const lebound::BoundSpec specs[] = {
      lebound::BoundSpec::vi(), lebound::BoundSpec::local_iw(10), lebound::BoundSpec::global_iw(10),
      lebound::BoundSpec::local_uha(10)};

  std::printf("threads: %d, samples: %zu, M=%zu N=%zu d_z=%zu\n", omp_get_max_threads(), samples,
              cfg.M, cfg.N, cfg.d_z);
  std::printf("%-18s %12s %12s %8s %14s\n", "bound", "serial [s]", "omp [s]", "same", "grad step [ms]");
  for (const auto& spec : specs) {
    const auto state = lebound::init_state(
        model, lebound::InitMode::std_normal,
        spec.op == lebound::OperatorKind::uha ? std::optional(spec.uha_init) : std::nullopt);

    auto t0 = h_clock::now();
    const auto serial = lebound::mc_estimates_serial(state, model, spec, samples, 1);
    const double t_serial = seconds_since(t0);
    t0 = h_clock::now();
    const auto parallel = lebound::mc_estimates(state, model, spec, samples, 1);
    const double t_parallel = seconds_since(t0);

    lebound::Tape tape;
    constexpr int kSteps = 50;
    t0 = h_clock::now();
    for (int s = 0; s < kSteps; ++s) {
      lebound::bound_estimate(state, model, spec,
                              lebound::NoiseStreams(1, lebound::Purpose::test, s), tape);
    }
    const double t_grad = seconds_since(t0) / kSteps * 1e3;

    std::printf("%-18s %12.4f %12.4f %8s %14.3f\n", spec.label().c_str(), t_serial, t_parallel,
                serial == parallel ? "yes" : "NO", t_grad);
  }
  return 0;
}
