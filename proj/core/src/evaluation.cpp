#include "zoomin/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "zoomin/textmetrics.hpp"
#include "zoomin/util.hpp"

namespace zoomin::evaluation {

using nlohmann::json;
using pipeline::InferenceResult;
using pipeline::SampleRecord;

namespace {

json opt_to_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

// Scored results in canonical (sorted-id) order so every floating-point sum
// is independent of input permutation.
std::vector<const InferenceResult*> scored_in_canonical_order(
    std::span<const InferenceResult> results) {
  std::vector<const InferenceResult*> scored;
  scored.reserve(results.size());
  for (const auto& r : results)
    if (!r.failed) scored.push_back(&r);
  std::sort(scored.begin(), scored.end(),
            [](const InferenceResult* a, const InferenceResult* b) { return a->id < b->id; });
  return scored;
}

const SampleRecord& manifest_lookup(const std::map<std::string, SampleRecord>& manifest,
                                    const std::string& id) {
  auto it = manifest.find(id);
  if (it == manifest.end())
    throw IdMismatch("result id '" + id + "' does not appear in the manifest");
  return it->second;
}

}  // namespace

json bundle_to_json(const MetricBundle& b) {
  json j;
  j["acc"] = opt_to_json(b.acc);
  j["i_acc"] = opt_to_json(b.i_acc);
  j["c_cases"] = opt_to_json(b.c_cases);
  j["c_acc"] = opt_to_json(b.c_acc);
  j["bleu1"] = opt_to_json(b.bleu1);
  j["bleu2"] = opt_to_json(b.bleu2);
  j["rouge_l"] = opt_to_json(b.rouge_l);
  j["mean_iou"] = opt_to_json(b.mean_iou);
  j["n_samples"] = b.n_samples;
  j["n_failed"] = b.n_failed;
  j["latency_mean_ms"] = opt_to_json(b.latency_mean_ms);
  j["latency_std_ms"] = opt_to_json(b.latency_std_ms);
  return j;
}

MetricBundle aggregate(std::span<const InferenceResult> results,
                       const std::map<std::string, SampleRecord>& manifest) {
  MetricBundle out;
  for (const auto& r : results)
    if (r.failed) ++out.n_failed;

  auto scored = scored_in_canonical_order(results);
  out.n_samples = static_cast<int>(scored.size());
  if (scored.empty()) return out;

  int correct_final = 0, correct_initial = 0, corrected = 0, corrected_correct = 0;
  double bleu1_sum = 0, bleu2_sum = 0, rouge_sum = 0;
  int text_n = 0;
  double iou_sum = 0;
  int iou_n = 0;
  double latency_sum = 0;

  for (const InferenceResult* r : scored) {
    const SampleRecord& sample = manifest_lookup(manifest, r->id);
    const bool final_ok = r->v2 && *r->v2 == sample.label;
    const bool initial_ok = r->v1 && *r->v1 == sample.label;
    const bool flipped = r->v1 && r->v2 && *r->v1 != *r->v2;
    correct_final += final_ok ? 1 : 0;
    correct_initial += initial_ok ? 1 : 0;
    if (flipped) {
      ++corrected;
      corrected_correct += final_ok ? 1 : 0;
    }
    if (sample.reference_explanation) {
      auto cand = textmetrics::tokenize(r->e2);
      auto ref = textmetrics::tokenize(*sample.reference_explanation);
      bleu1_sum += textmetrics::bleu_n(cand, ref, 1);
      bleu2_sum += textmetrics::bleu_n(cand, ref, 2);
      rouge_sum += textmetrics::rouge_l(cand, ref);
      ++text_n;
    }
    if (sample.reference_boxes) {
      iou_sum += geometry::iou_reward(r->boxes, *sample.reference_boxes);
      ++iou_n;
    }
    latency_sum += r->latency_ms_total;
  }

  const double n = static_cast<double>(scored.size());
  out.acc = correct_final / n;
  out.i_acc = correct_initial / n;
  out.c_cases = corrected / n;
  if (corrected > 0) out.c_acc = static_cast<double>(corrected_correct) / corrected;
  if (text_n > 0) {
    out.bleu1 = bleu1_sum / text_n;
    out.bleu2 = bleu2_sum / text_n;
    out.rouge_l = rouge_sum / text_n;
  }
  if (iou_n > 0) out.mean_iou = iou_sum / iou_n;

  const double mean = latency_sum / n;
  double sq = 0;
  for (const InferenceResult* r : scored) {
    const double d = r->latency_ms_total - mean;
    sq += d * d;
  }
  out.latency_mean_ms = mean;
  out.latency_std_ms = std::sqrt(sq / n);
  return out;
}

BBoxHistogram bbox_histogram(std::span<const InferenceResult> results) {
  BBoxHistogram out;
  std::int64_t total_boxes = 0;
  int scored = 0;
  for (const auto& r : results) {
    if (r.failed) continue;
    ++out.counts[static_cast<int>(r.boxes.size())];
    total_boxes += static_cast<std::int64_t>(r.boxes.size());
    ++scored;
  }
  if (scored > 0)
    out.mean = static_cast<double>(total_boxes) / static_cast<double>(scored);
  return out;
}

std::map<int, double> accuracy_by_bbox_count(
    std::span<const InferenceResult> results,
    const std::map<std::string, SampleRecord>& manifest) {
  std::map<int, std::pair<int, int>> buckets;  // count -> {n, correct}
  for (const auto* r : scored_in_canonical_order(results)) {
    const SampleRecord& sample = manifest_lookup(manifest, r->id);
    auto& [bucket_n, bucket_correct] = buckets[static_cast<int>(r->boxes.size())];
    ++bucket_n;
    if (r->v2 && *r->v2 == sample.label) ++bucket_correct;
  }
  std::map<int, double> out;
  for (const auto& [count, stats] : buckets)
    out[count] = static_cast<double>(stats.second) / static_cast<double>(stats.first);
  return out;
}

const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> kStopwords{
      "a",    "an",  "and",  "are", "as",   "at",   "be",   "been", "by",   "for",
      "from", "had", "has",  "have", "in",  "is",   "it",   "its",  "no",   "not",
      "of",   "on",  "or",   "that", "the", "this", "these", "those", "to",  "was",
      "were", "with",
  };
  return kStopwords;
}

std::map<std::string, std::int64_t> keyword_frequency(
    std::span<const InferenceResult> results, const std::set<std::string>& stopwords) {
  std::map<std::string, std::int64_t> out;
  for (const auto& r : results) {
    if (r.failed) continue;
    for (auto& tok : textmetrics::tokenize(r.e2)) {
      if (stopwords.count(tok)) continue;
      ++out[tok];
    }
  }
  return out;
}

RobustnessOutcome robustness_suite(std::span<const pipeline::ManifestEntry> entries,
                                   std::span<const imaging::DegradationSpec> degradations,
                                   backend::Backend& be,
                                   const pipeline::PipelineConfig& cfg) {
  RobustnessOutcome out;
  out.order.push_back("clean");
  std::vector<std::optional<imaging::DegradationSpec>> specs{std::nullopt};
  for (const auto& spec : degradations) {
    spec.validate();
    std::string label = spec.label();
    int suffix = 2;
    while (std::find(out.order.begin(), out.order.end(), label) != out.order.end())
      label = spec.label() + "#" + std::to_string(suffix++);
    out.order.push_back(label);
    specs.push_back(spec);
  }

  // One thread per run; the shared gate keeps total in-flight samples at
  // cfg.concurrency across all runs.
  util::Semaphore gate(std::max(1, cfg.concurrency));
  std::vector<std::vector<InferenceResult>> run_results(specs.size());
  std::vector<std::thread> threads;
  threads.reserve(specs.size());
  for (size_t i = 0; i < specs.size(); ++i) {
    threads.emplace_back([&, i] {
      pipeline::PipelineConfig run_cfg = cfg;
      run_cfg.degradation = specs[i];
      run_results[i] = pipeline::run_batch(entries, be, run_cfg, &gate);
    });
  }
  for (auto& t : threads) t.join();

  auto manifest = pipeline::samples_by_id(entries);
  for (size_t i = 0; i < specs.size(); ++i) {
    const std::string& label = out.order[i];
    out.bundles[label] = aggregate(run_results[i], manifest);
    out.results[label] = std::move(run_results[i]);
  }
  return out;
}

// ---- report emission ----

namespace {

std::string csv_cell(const std::optional<double>& v) {
  return v ? util::format_double(*v) : std::string{};
}

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << body;
  if (!out) throw std::runtime_error("short write: " + path);
}

std::string bundle_csv_row(const std::string& mode, const std::string& degradation,
                           const MetricBundle& b) {
  std::string row;
  row += mode + "," + degradation + ",";
  row += std::to_string(b.n_samples) + "," + std::to_string(b.n_failed) + ",";
  row += csv_cell(b.acc) + "," + csv_cell(b.i_acc) + "," + csv_cell(b.c_cases) + "," +
         csv_cell(b.c_acc) + ",";
  row += csv_cell(b.bleu1) + "," + csv_cell(b.bleu2) + "," + csv_cell(b.rouge_l) + "," +
         csv_cell(b.mean_iou) + ",";
  row += csv_cell(b.latency_mean_ms) + "," + csv_cell(b.latency_std_ms) + "\n";
  return row;
}

}  // namespace

void emit_report(const EvalReport& report, const std::string& out_dir, bool write_json,
                 bool write_csv, int keyword_top_k) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string header_comment = "# " + report.header.dump() + "\n";

  if (write_json) {
    json j;
    j["schema"] = 1;
    j["header"] = report.header;
    j["mode"] = report.mode_label;
    j["bundle"] = bundle_to_json(report.bundle);
    json per = json::object();
    for (const auto& [label, bundle] : report.per_degradation)
      per[label] = bundle_to_json(bundle);
    j["per_degradation"] = per;
    json hist = json::object();
    for (const auto& [count, samples] : report.bbox_histogram)
      hist[std::to_string(count)] = samples;
    j["bbox_histogram"] = hist;
    j["mean_boxes"] = opt_to_json(report.mean_boxes);
    json acc = json::object();
    for (const auto& [count, value] : report.acc_by_bbox_count)
      acc[std::to_string(count)] = value;
    j["acc_by_bbox_count"] = acc;
    json kw = json::object();
    for (const auto& [token, count] : report.keyword_frequencies) kw[token] = count;
    j["keyword_frequencies"] = kw;
    write_text_file((fs::path(out_dir) / "report.json").string(), j.dump(2) + "\n");
  }

  if (!write_csv) return;

  std::string csv = header_comment;
  csv += "mode,degradation,n_samples,n_failed,acc,i_acc,c_cases,c_acc,bleu1,bleu2,"
         "rouge_l,mean_iou,latency_mean_ms,latency_std_ms\n";
  if (report.per_degradation.empty()) {
    csv += bundle_csv_row(report.mode_label, "", report.bundle);
  } else {
    for (const auto& [label, bundle] : report.per_degradation)
      csv += bundle_csv_row(report.mode_label, label, bundle);
  }
  write_text_file((fs::path(out_dir) / "report.csv").string(), csv);

  std::string hist = header_comment;
  hist += "count,samples\n";
  for (const auto& [count, samples] : report.bbox_histogram)
    hist += std::to_string(count) + "," + std::to_string(samples) + "\n";
  write_text_file((fs::path(out_dir) / "bbox_histogram.csv").string(), hist);

  std::string acc = header_comment;
  acc += "count,accuracy\n";
  for (const auto& [count, value] : report.acc_by_bbox_count)
    acc += std::to_string(count) + "," + util::format_double(value) + "\n";
  write_text_file((fs::path(out_dir) / "acc_by_bbox_count.csv").string(), acc);

  std::vector<std::pair<std::string, std::int64_t>> keywords(
      report.keyword_frequencies.begin(), report.keyword_frequencies.end());
  std::sort(keywords.begin(), keywords.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (keyword_top_k > 0 && keywords.size() > static_cast<size_t>(keyword_top_k))
    keywords.resize(static_cast<size_t>(keyword_top_k));
  std::string kw = header_comment;
  kw += "token,count\n";
  for (const auto& [token, count] : keywords)
    kw += token + "," + std::to_string(count) + "\n";
  write_text_file((fs::path(out_dir) / "keywords.csv").string(), kw);
}

// ---- charts ----

namespace {

// 3x5 glyphs for digits plus '.', '-', '%'.
const std::map<char, std::array<std::uint8_t, 5>>& glyphs() {
  static const std::map<char, std::array<std::uint8_t, 5>> kGlyphs{
      {'0', {0b111, 0b101, 0b101, 0b101, 0b111}},
      {'1', {0b010, 0b110, 0b010, 0b010, 0b111}},
      {'2', {0b111, 0b001, 0b111, 0b100, 0b111}},
      {'3', {0b111, 0b001, 0b111, 0b001, 0b111}},
      {'4', {0b101, 0b101, 0b111, 0b001, 0b001}},
      {'5', {0b111, 0b100, 0b111, 0b001, 0b111}},
      {'6', {0b111, 0b100, 0b111, 0b101, 0b111}},
      {'7', {0b111, 0b001, 0b010, 0b010, 0b010}},
      {'8', {0b111, 0b101, 0b111, 0b101, 0b111}},
      {'9', {0b111, 0b101, 0b111, 0b001, 0b111}},
      {'.', {0b000, 0b000, 0b000, 0b000, 0b010}},
      {'-', {0b000, 0b000, 0b111, 0b000, 0b000}},
      {'%', {0b101, 0b001, 0b010, 0b100, 0b101}},
  };
  return kGlyphs;
}

void draw_text(imaging::RasterImage& img, int x, int y, const std::string& text, int scale,
               std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  int cx = x;
  for (char c : text) {
    auto it = glyphs().find(c);
    if (it != glyphs().end()) {
      for (int row = 0; row < 5; ++row) {
        for (int col = 0; col < 3; ++col) {
          if (!(it->second[row] & (1 << (2 - col)))) continue;
          for (int dy = 0; dy < scale; ++dy) {
            for (int dx = 0; dx < scale; ++dx) {
              int px = cx + col * scale + dx;
              int py = y + row * scale + dy;
              if (px < 0 || py < 0 || px >= img.width || py >= img.height) continue;
              std::uint8_t* p = img.at(px, py);
              p[0] = r;
              p[1] = g;
              p[2] = b;
            }
          }
        }
      }
    }
    cx += 4 * scale;
  }
}

void fill_rect(imaging::RasterImage& img, int x1, int y1, int x2, int y2, std::uint8_t r,
               std::uint8_t g, std::uint8_t b) {
  auto clamped = geometry::clamp_box({x1, y1, x2, y2}, img.dims());
  if (!clamped) return;
  for (int y = clamped->y1; y < clamped->y2; ++y) {
    for (int x = clamped->x1; x < clamped->x2; ++x) {
      std::uint8_t* p = img.at(x, y);
      p[0] = r;
      p[1] = g;
      p[2] = b;
    }
  }
}

void bar_chart(const std::map<int, double>& values, double max_value,
               const std::string& value_format_suffix, const std::string& path) {
  const int width = 640, height = 400, margin = 40;
  imaging::RasterImage img = imaging::RasterImage::blank(width, height, 255, 255, 255);
  fill_rect(img, margin, height - margin, width - margin, height - margin + 2, 40, 40, 40);
  fill_rect(img, margin - 2, margin, margin, height - margin, 40, 40, 40);
  if (!values.empty() && max_value > 0) {
    const int plot_w = width - 2 * margin;
    const int plot_h = height - 2 * margin;
    const int n = static_cast<int>(values.size());
    const int slot = plot_w / n;
    const int bar_w = std::max(4, slot * 7 / 10);
    int i = 0;
    for (const auto& [key, value] : values) {
      const int x0 = margin + i * slot + (slot - bar_w) / 2;
      const int bar_h = static_cast<int>(std::lround(plot_h * (value / max_value)));
      fill_rect(img, x0, height - margin - bar_h, x0 + bar_w, height - margin, 70, 110, 200);
      draw_text(img, x0, height - margin + 6, std::to_string(key), 2, 40, 40, 40);
      std::string label = util::format_double(value) + value_format_suffix;
      if (label.size() > 6) label.resize(6);
      draw_text(img, x0, height - margin - bar_h - 14, label, 1, 40, 40, 40);
      ++i;
    }
  }
  imaging::save_file(img, path);
}

}  // namespace

void render_charts(const EvalReport& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::map<int, double> hist;
  double max_count = 0;
  for (const auto& [count, samples] : report.bbox_histogram) {
    hist[count] = samples;
    max_count = std::max(max_count, static_cast<double>(samples));
  }
  bar_chart(hist, max_count, "", (fs::path(out_dir) / "bbox_histogram.png").string());
  bar_chart(report.acc_by_bbox_count, 1.0, "",
            (fs::path(out_dir) / "acc_by_bbox_count.png").string());
}

}  // namespace zoomin::evaluation
