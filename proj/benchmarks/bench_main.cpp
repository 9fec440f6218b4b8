#include <benchmark/benchmark.h>

#include "tracemark/ledger.hpp"
#include "tracemark/media.hpp"
#include "tracemark/nn.hpp"
#include "tracemark/phash.hpp"
#include "tracemark/random.hpp"
#include "tracemark/synth.hpp"

using namespace tracemark;

static RgbImage noise(int w, int h) { return synth::noise_image(w, h, 42); }

static void BM_PhashImage(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const RgbImage img = noise(side, side);
  for (auto _ : state) benchmark::DoNotOptimize(phash::hash_image(img));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PhashImage)->Arg(32)->Arg(128)->Arg(640);

static void BM_SelectTriggers(benchmark::State& state) {
  const auto video = synth::video(synth::Scene::kFlashcardRing, static_cast<std::size_t>(state.range(0)), 7);
  for (auto _ : state) benchmark::DoNotOptimize(media::select_triggers(video, 30, 8, "bench", 10));
}
BENCHMARK(BM_SelectTriggers)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

static void BM_DeskCnnForward(benchmark::State& state) {
  const auto model = nn::desk_cnn({1, 28, 28}, 10, 1);
  const auto data = synth::digits(1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(nn::forward(model, data.input(0)));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_DeskCnnForward);

static void BM_DeskCnnEpoch(benchmark::State& state) {
  const auto model = nn::desk_cnn({1, 28, 28}, 10, 1);
  const auto data = synth::digits(static_cast<std::size_t>(state.range(0)), 1);
  nn::TrainConfig cfg;
  cfg.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(nn::train(model, data, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DeskCnnEpoch)->Arg(512)->Unit(benchmark::kMillisecond);

static void BM_LedgerVerify(benchmark::State& state) {
  const auto path = std::filesystem::temp_directory_path() / "tracemark_bench_ledger.ndjson";
  std::filesystem::remove(path);
  std::filesystem::path head = path;
  head += ".head";
  std::filesystem::remove(head);
  {
    auto l = ledger::Ledger::open(path);
    for (int i = 0; i < state.range(0); ++i) l.append("bench", phash::PerceptualHash(mix_seed(1, i)), "r");
  }
  for (auto _ : state) benchmark::DoNotOptimize(ledger::verify_chain(path));
  std::filesystem::remove(path);
  std::filesystem::remove(head);
}
BENCHMARK(BM_LedgerVerify)->Arg(100)->Arg(1000)->Unit(benchmark::kMicrosecond);
BENCHMARK_MAIN();
