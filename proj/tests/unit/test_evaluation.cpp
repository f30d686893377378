#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "../support/test_support.hpp"
#include "zoomin/evaluation.hpp"

using namespace zoomin;
using namespace zoomin::evaluation;
using model_io::Verdict;
using pipeline::InferenceResult;
using pipeline::SampleRecord;

namespace {

SampleRecord make_sample(const std::string& id, Verdict label) {
  SampleRecord s;
  s.id = id;
  s.image_path = id + ".png";
  s.label = label;
  return s;
}

InferenceResult make_result(const std::string& id, Verdict v1, Verdict v2, int n_boxes = 0,
                            double latency = 0.0) {
  InferenceResult r;
  r.id = id;
  r.v1 = v1;
  r.v2 = v2;
  for (int i = 0; i < n_boxes; ++i) r.boxes.push_back({i, i, i + 5, i + 5});
  r.latency_ms_total = latency;
  r.backend_calls = 2;
  return r;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("aggregate counts corrected cases exactly") {
  // 10 samples, all labeled generated; 8 keep v1 == v2 == label, 2 flip
  // from a wrong initial verdict to the right final one.
  std::map<std::string, SampleRecord> manifest;
  std::vector<InferenceResult> results;
  for (int i = 0; i < 10; ++i) {
    std::string id = "s" + std::to_string(i);
    manifest.emplace(id, make_sample(id, Verdict::Generated));
    if (i < 8)
      results.push_back(make_result(id, Verdict::Generated, Verdict::Generated));
    else
      results.push_back(make_result(id, Verdict::Real, Verdict::Generated));
  }
  auto bundle = aggregate(results, manifest);
  CHECK(bundle.n_samples == 10);
  CHECK(bundle.n_failed == 0);
  CHECK(bundle.acc == 1.0);
  CHECK(bundle.i_acc == 0.8);
  CHECK(bundle.c_cases == 0.20);
  CHECK(bundle.c_acc == 1.0);
}

TEST_CASE("aggregate: no corrected cases leaves c_acc absent") {
  std::map<std::string, SampleRecord> manifest;
  std::vector<InferenceResult> results;
  for (int i = 0; i < 4; ++i) {
    std::string id = "s" + std::to_string(i);
    manifest.emplace(id, make_sample(id, Verdict::Real));
    results.push_back(make_result(id, Verdict::Real, Verdict::Real));
  }
  auto bundle = aggregate(results, manifest);
  CHECK(bundle.acc == 1.0);
  CHECK(bundle.i_acc == 1.0);
  CHECK(bundle.c_cases == 0.0);
  CHECK_FALSE(bundle.c_acc.has_value());
}

TEST_CASE("aggregate excludes failed samples from means but reports them") {
  std::map<std::string, SampleRecord> manifest;
  std::vector<InferenceResult> results;
  for (int i = 0; i < 3; ++i) {
    std::string id = "s" + std::to_string(i);
    manifest.emplace(id, make_sample(id, Verdict::Real));
    results.push_back(make_result(id, Verdict::Real, Verdict::Real));
  }
  InferenceResult failed;
  failed.id = "s-fail";
  failed.failed = true;
  failed.error = "stage2 parse: missing verdict";
  results.push_back(failed);  // id deliberately not in the manifest

  auto bundle = aggregate(results, manifest);
  CHECK(bundle.n_samples == 3);
  CHECK(bundle.n_failed == 1);
  CHECK(bundle.acc == 1.0);
}

TEST_CASE("aggregate text and iou metrics only cover samples with references") {
  std::map<std::string, SampleRecord> manifest;
  std::vector<InferenceResult> results;

  auto with_ref = make_sample("a", Verdict::Generated);
  with_ref.reference_explanation = "blurry text on the sign";
  with_ref.reference_boxes = std::vector<geometry::BBox>{{0, 0, 10, 10}};
  manifest.emplace("a", with_ref);
  auto ra = make_result("a", Verdict::Generated, Verdict::Generated, 0);
  ra.e2 = "blurry text on the sign";
  ra.boxes = {{0, 0, 10, 10}};
  results.push_back(ra);

  manifest.emplace("b", make_sample("b", Verdict::Real));  // no references
  results.push_back(make_result("b", Verdict::Real, Verdict::Real));

  auto bundle = aggregate(results, manifest);
  REQUIRE(bundle.bleu1.has_value());
  CHECK(*bundle.bleu1 == 1.0);
  CHECK(*bundle.bleu2 == 1.0);
  CHECK(*bundle.rouge_l == 1.0);
  REQUIRE(bundle.mean_iou.has_value());
  CHECK(*bundle.mean_iou == 1.0);
}

TEST_CASE("aggregate is exactly permutation-invariant") {
  std::mt19937_64 rng(17);
  std::map<std::string, SampleRecord> manifest;
  std::vector<InferenceResult> results;
  for (int i = 0; i < 25; ++i) {
    std::string id = "s" + std::to_string(i);
    auto s = make_sample(id, rng() % 2 ? Verdict::Real : Verdict::Generated);
    s.reference_explanation = "word" + std::to_string(rng() % 5) + " detail";
    manifest.emplace(id, s);
    auto r = make_result(id, rng() % 2 ? Verdict::Real : Verdict::Generated,
                         rng() % 2 ? Verdict::Real : Verdict::Generated,
                         static_cast<int>(rng() % 4), static_cast<double>(rng() % 100));
    r.e2 = "word" + std::to_string(rng() % 5) + " thing";
    results.push_back(r);
  }
  auto bundle = aggregate(results, manifest);
  std::shuffle(results.begin(), results.end(), rng);
  CHECK(aggregate(results, manifest) == bundle);
}

TEST_CASE("aggregate rejects ids missing from the manifest") {
  std::map<std::string, SampleRecord> manifest;
  std::vector<InferenceResult> results{make_result("ghost", Verdict::Real, Verdict::Real)};
  CHECK_THROWS_AS(aggregate(results, manifest), IdMismatch);
}

TEST_CASE("latency mean/std match a two-pass reference") {
  std::mt19937_64 rng(29);
  std::map<std::string, SampleRecord> manifest;
  std::vector<InferenceResult> results;
  std::vector<double> latencies;
  for (int i = 0; i < 40; ++i) {
    std::string id = "s" + std::to_string(i);
    manifest.emplace(id, make_sample(id, Verdict::Real));
    double lat = static_cast<double>(rng() % 10000) / 7.0;
    latencies.push_back(lat);
    results.push_back(make_result(id, Verdict::Real, Verdict::Real, 0, lat));
  }
  auto bundle = aggregate(results, manifest);
  long double sum = 0;
  for (double v : latencies) sum += v;
  long double mean = sum / latencies.size();
  long double sq = 0;
  for (double v : latencies) sq += (v - mean) * (v - mean);
  long double stddev = std::sqrt(static_cast<double>(sq / latencies.size()));
  REQUIRE(bundle.latency_mean_ms.has_value());
  CHECK(std::abs(*bundle.latency_mean_ms - static_cast<double>(mean)) <= 1e-9);
  CHECK(std::abs(*bundle.latency_std_ms - static_cast<double>(stddev)) <= 1e-9);
}

TEST_CASE("bbox_histogram") {
  std::vector<InferenceResult> results{
      make_result("a", Verdict::Real, Verdict::Real, 2),
      make_result("b", Verdict::Real, Verdict::Real, 2),
      make_result("c", Verdict::Real, Verdict::Real, 3),
  };
  auto hist = bbox_histogram(results);
  CHECK(hist.counts == std::map<int, int>{{2, 2}, {3, 1}});
  REQUIRE(hist.mean.has_value());
  CHECK(*hist.mean == 7.0 / 3.0);

  auto empty = bbox_histogram(std::vector<InferenceResult>{});
  CHECK(empty.counts.empty());
  CHECK_FALSE(empty.mean.has_value());
}

TEST_CASE("a 25-record fixture with 81 boxes reports mean 3.24 exactly") {
  std::vector<InferenceResult> results;
  int total = 0;
  for (int i = 0; i < 25; ++i) {
    int n = i < 19 ? 3 : 4;  // 19*3 + 6*4 = 81
    total += n;
    results.push_back(make_result("s" + std::to_string(i), Verdict::Real, Verdict::Real, n));
  }
  REQUIRE(total == 81);
  auto hist = bbox_histogram(results);
  CHECK(*hist.mean == 3.24);
}

TEST_CASE("accuracy_by_bbox_count buckets and its weighted mean identity") {
  std::map<std::string, SampleRecord> manifest;
  std::vector<InferenceResult> results;
  auto add = [&](const std::string& id, int boxes, bool correct) {
    manifest.emplace(id, make_sample(id, Verdict::Generated));
    results.push_back(make_result(id, Verdict::Generated,
                                  correct ? Verdict::Generated : Verdict::Real, boxes));
  };
  add("a", 2, true);
  add("b", 2, true);
  add("c", 2, false);
  add("d", 1, true);

  auto by_count = accuracy_by_bbox_count(results, manifest);
  REQUIRE(by_count.size() == 2);
  CHECK(by_count.at(2) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(by_count.at(1) == 1.0);

  auto hist = bbox_histogram(results);
  double weighted = 0;
  int n = 0;
  for (const auto& [count, samples] : hist.counts) {
    weighted += by_count.at(count) * samples;
    n += samples;
  }
  auto bundle = aggregate(results, manifest);
  CHECK(weighted / n == doctest::Approx(*bundle.acc).epsilon(1e-12));
}

TEST_CASE("keyword_frequency counts tokens and honors stopwords") {
  std::vector<InferenceResult> results(2);
  results[0].e2 = "blurry text";
  results[1].e2 = "blurry edge";
  auto freq = keyword_frequency(results);
  CHECK(freq == std::map<std::string, std::int64_t>{{"blurry", 2}, {"text", 1}, {"edge", 1}});

  results[0].e2 = "the the the";
  results[1].e2 = "";
  CHECK(keyword_frequency(results).empty());

  std::set<std::string> custom{"blurry"};
  results[0].e2 = "blurry text";
  results[1].e2 = "blurry edge";
  auto filtered = keyword_frequency(results, custom);
  CHECK(filtered.count("blurry") == 0);
  CHECK(filtered.at("text") == 1);
}

TEST_CASE("emit_report is deterministic and handles absent values") {
  test_support::TempDir dir;
  EvalReport report;
  report.header = nlohmann::json{{"config_hash", "abc"}, {"seed", 7}};
  report.mode_label = "zoomin";
  report.bundle.n_samples = 3;
  report.bundle.acc = 1.0;
  report.bundle.i_acc = 1.0;
  report.bundle.c_cases = 0.0;  // c_acc stays absent
  report.bbox_histogram = {{2, 2}, {3, 1}};
  report.mean_boxes = 7.0 / 3.0;
  report.acc_by_bbox_count = {{2, 1.0}, {3, 1.0}};
  report.keyword_frequencies = {{"blurry", 2}, {"text", 1}};

  emit_report(report, dir.file("out1"), true, true);
  emit_report(report, dir.file("out2"), true, true);

  auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  for (const char* name :
       {"report.json", "report.csv", "bbox_histogram.csv", "acc_by_bbox_count.csv",
        "keywords.csv"}) {
    CHECK(slurp(dir.file("out1") + "/" + name) == slurp(dir.file("out2") + "/" + name));
  }

  auto report_json = nlohmann::json::parse(slurp(dir.file("out1") + "/report.json"));
  CHECK(report_json["bundle"]["c_acc"].is_null());
  CHECK(report_json["bbox_histogram"]["2"] == 2);

  auto csv = slurp(dir.file("out1") + "/report.csv");
  CHECK(csv.find(",,") != std::string::npos);  // absent metric -> empty cell

  auto hist_csv = slurp(dir.file("out1") + "/bbox_histogram.csv");
  CHECK(hist_csv.find("2,2\n") != std::string::npos);
  CHECK(hist_csv.find("3,1\n") != std::string::npos);

  render_charts(report, dir.file("charts"));
  CHECK(std::filesystem::exists(dir.file("charts") + "/bbox_histogram.png"));
  CHECK(std::filesystem::exists(dir.file("charts") + "/acc_by_bbox_count.png"));
}

TEST_CASE("robustness suite with a pixel-blind mock is invariant across degradations") {
  test_support::TempDir dir;
  const std::string image_path = dir.file("img.png");
  imaging::save_file(test_support::make_test_image(64, 64), image_path);

  std::vector<pipeline::ManifestEntry> entries;
  for (int i = 0; i < 4; ++i) {
    pipeline::ManifestEntry e;
    e.line_no = i + 1;
    SampleRecord s;
    s.id = "s" + std::to_string(i);
    s.image_path = image_path;
    s.label = Verdict::Generated;
    e.sample = s;
    entries.push_back(e);
  }

  backend::BackendConfig cfg;
  cfg.type = "mock";
  backend::MockScript script{
      {"*:1",
       {"<verdict>generated</verdict><boxes>[[4,4,20,20]]</boxes>"
        "<explanation>pixel blind</explanation>"}},
      {"*:2", {"<verdict>generated</verdict><explanation>still blind</explanation>"}},
  };
  backend::MockBackend mock(cfg, script);

  std::vector<imaging::DegradationSpec> degradations;
  for (const char* token : {"jpeg:80", "jpeg:30", "crop:0.8", "down:0.5"})
    degradations.push_back(*imaging::DegradationSpec::parse(token, 7));

  pipeline::PipelineConfig pcfg;
  pcfg.concurrency = 4;
  auto outcome = robustness_suite(entries, degradations, mock, pcfg);

  REQUIRE(outcome.order.size() == 5);
  CHECK(outcome.order[0] == "clean");
  const MetricBundle& baseline = outcome.bundles.at("clean");
  for (const auto& label : outcome.order) CHECK(outcome.bundles.at(label) == baseline);
  CHECK(baseline.n_samples == 4);
  CHECK(*baseline.acc == 1.0);
}

}  // TEST_SUITE
