#include <benchmark/benchmark.h>

#include "eknit/bus/bus_model.hpp"
#include "eknit/placement/placement.hpp"
#include "eknit/random.hpp"
#include "eknit/signal/link.hpp"
#include "eknit/sim/engine.hpp"
#include "eknit/sim/reference.hpp"
#include "eknit/topology/misalignment.hpp"

using namespace eknit;

static void BM_TransferBits(benchmark::State& state) {
    const bus::BusModel bus(sim::reference_layout(), sim::kReferenceHub);
    const auto& link = bus.link("l_wrist");
    Rng rng(1);
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(state.range(0)));
    for (auto& b : bits) b = rng.uniform() < 0.5;
    for (auto _ : state) benchmark::DoNotOptimize(signal::transfer_bits(bits, *link.sda, *link.scl, bus.link_config()));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TransferBits)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_BusRebuild(benchmark::State& state) {
    bus::BusModel bus(sim::reference_layout(), sim::kReferenceHub);
    bus.attach("w", "l_wrist", bus::make_imu(0x10));
    bus::LineFault f;
    f.id = "f";
    f.type = bus::FaultType::Open;
    f.channel_a = Channel::SdaP;
    f.span = {"l_sleeve", 5.0, 6.0};
    for (auto _ : state) {
        bus.inject_fault(f);
        benchmark::DoNotOptimize(bus::scan(bus));
        bus.clear_fault("f");
        benchmark::DoNotOptimize(bus::scan(bus));
    }
}
BENCHMARK(BM_BusRebuild)->Unit(benchmark::kMicrosecond);

static void BM_DisconnectedFraction(benchmark::State& state) {
    const auto layout = sim::reference_layout();
    topology::MisalignmentOptions opt;
    opt.n_seeds = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            topology::mean_disconnected_fraction(layout, sim::kReferenceHub, 0.5, layout.tolerance_mm(), opt));
    }
}
BENCHMARK(BM_DisconnectedFraction)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_PlacementStudy(benchmark::State& state) {
    const auto pos = placement::default_arm_positions();
    const auto truth = placement::reference_flexion_trace();
    for (auto _ : state) {
        benchmark::DoNotOptimize(placement::rank_placements(pos, truth, {}, static_cast<std::size_t>(state.range(0))));
    }
}
BENCHMARK(BM_PlacementStudy)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_ShakeTestScenario(benchmark::State& state) {
    const auto s = sim::shake_test_scenario();
    for (auto _ : state) benchmark::DoNotOptimize(sim::run_scenario(s));
}
BENCHMARK(BM_ShakeTestScenario)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
