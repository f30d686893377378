#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "zoomin/geometry.hpp"
#include "zoomin/imaging.hpp"
#include "zoomin/model_io.hpp"
#include "zoomin/textmetrics.hpp"

using namespace zoomin;

namespace {

std::vector<geometry::BBox> random_boxes(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<geometry::BBox> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    int x1 = static_cast<int>(rng() % 400), y1 = static_cast<int>(rng() % 400);
    out.push_back({x1, y1, x1 + 1 + static_cast<int>(rng() % 100),
                   y1 + 1 + static_cast<int>(rng() % 100)});
  }
  return out;
}

textmetrics::TokenSequence random_tokens(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  textmetrics::TokenSequence out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back("w" + std::to_string(rng() % 40));
  return out;
}

imaging::RasterImage gradient_image(int w, int h) {
  imaging::RasterImage img;
  img.width = w;
  img.height = h;
  img.pixels.resize(static_cast<size_t>(w) * h * 3);
  for (size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = static_cast<std::uint8_t>(i * 31 % 256);
  return img;
}

void BM_IouReward(benchmark::State& state) {
  auto pred = random_boxes(static_cast<int>(state.range(0)), 1);
  auto ref = random_boxes(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(geometry::iou_reward(pred, ref));
}
BENCHMARK(BM_IouReward)->Arg(4)->Arg(32);

void BM_Bleu2(benchmark::State& state) {
  auto cand = random_tokens(static_cast<int>(state.range(0)), 1);
  auto ref = random_tokens(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(textmetrics::bleu_n(cand, ref, 2));
}
BENCHMARK(BM_Bleu2)->Arg(30)->Arg(200);

void BM_RougeL(benchmark::State& state) {
  auto cand = random_tokens(static_cast<int>(state.range(0)), 3);
  auto ref = random_tokens(static_cast<int>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(textmetrics::rouge_l(cand, ref));
}
BENCHMARK(BM_RougeL)->Arg(30)->Arg(200);

void BM_Tokenize(benchmark::State& state) {
  std::string text;
  for (int i = 0; i < 120; ++i)
    text += "The lighting, on the water-side reflections looks off. ";
  for (auto _ : state) benchmark::DoNotOptimize(textmetrics::tokenize(text));
}
BENCHMARK(BM_Tokenize);

void BM_ParseStage1(benchmark::State& state) {
  const std::string completion =
      "Some preamble about the scene. <verdict>generated</verdict>"
      "<boxes>[[10,20,110,220],[40,40,90,90],[5,5,25,25]]</boxes>"
      "<explanation>warped text on the storefront and a bent horizon line</explanation>";
  for (auto _ : state) benchmark::DoNotOptimize(model_io::parse_stage1(completion));
}
BENCHMARK(BM_ParseStage1);

void BM_ResizeBilinear(benchmark::State& state) {
  auto img = gradient_image(1024, 768);
  for (auto _ : state) benchmark::DoNotOptimize(imaging::resize_bilinear(img, 512, 512));
}
BENCHMARK(BM_ResizeBilinear);

void BM_JpegRoundTrip(benchmark::State& state) {
  auto img = gradient_image(512, 512);
  imaging::DegradationSpec spec;
  spec.kind = imaging::DegradationSpec::Kind::JpegQuality;
  spec.jpeg_quality = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(imaging::degrade(img, spec));
}
BENCHMARK(BM_JpegRoundTrip)->Arg(30)->Arg(80);

}  // namespace

BENCHMARK_MAIN();
