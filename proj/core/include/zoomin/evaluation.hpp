#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "zoomin/pipeline.hpp"

namespace zoomin::evaluation {

struct IdMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Aggregate metrics over one run. n_samples counts scored (non-failed)
/// results; failed results are excluded from every mean and counted in
/// n_failed. Ratio fields are absent when their denominator is zero
/// (no samples, no corrected cases, no references).
struct MetricBundle {
  std::optional<double> acc;      // mean[v2 == label]
  std::optional<double> i_acc;    // mean[v1 == label]
  std::optional<double> c_cases;  // mean[v1 != v2]
  std::optional<double> c_acc;    // mean[v2 == label | v1 != v2]
  std::optional<double> bleu1;
  std::optional<double> bleu2;
  std::optional<double> rouge_l;
  std::optional<double> mean_iou;
  int n_samples = 0;
  int n_failed = 0;
  std::optional<double> latency_mean_ms;
  std::optional<double> latency_std_ms;  // population standard deviation

  friend bool operator==(const MetricBundle&, const MetricBundle&) = default;
};

nlohmann::json bundle_to_json(const MetricBundle& b);

struct EvalReport {
  nlohmann::json header;  // run header (config hash, seed, mode, tool version)
  std::string mode_label = "zoomin";
  MetricBundle bundle;
  /// Robustness runs: "clean" baseline plus one bundle per degradation label.
  std::map<std::string, MetricBundle> per_degradation;
  std::map<int, int> bbox_histogram;  // |boxes| -> scored samples
  std::optional<double> mean_boxes;
  std::map<int, double> acc_by_bbox_count;
  std::map<std::string, std::int64_t> keyword_frequencies;
};

/// Exactly permutation-invariant over `results` (canonical id order inside).
/// Throws IdMismatch when a scored result id is not in the manifest.
MetricBundle aggregate(std::span<const pipeline::InferenceResult> results,
                       const std::map<std::string, pipeline::SampleRecord>& manifest);

struct BBoxHistogram {
  std::map<int, int> counts;
  std::optional<double> mean;
};
BBoxHistogram bbox_histogram(std::span<const pipeline::InferenceResult> results);

std::map<int, double> accuracy_by_bbox_count(
    std::span<const pipeline::InferenceResult> results,
    const std::map<std::string, pipeline::SampleRecord>& manifest);

const std::set<std::string>& default_stopwords();
std::map<std::string, std::int64_t> keyword_frequency(
    std::span<const pipeline::InferenceResult> results,
    const std::set<std::string>& stopwords = default_stopwords());

struct RobustnessOutcome {
  /// "clean" plus one entry per degradation label, insertion order recorded.
  std::vector<std::string> order;
  std::map<std::string, std::vector<pipeline::InferenceResult>> results;
  std::map<std::string, MetricBundle> bundles;
};

/// Runs the clean baseline plus every degradation; degradation runs execute
/// in parallel while a shared gate keeps total in-flight samples at
/// cfg.concurrency. Per-degradation failures stay isolated in their bundle.
RobustnessOutcome robustness_suite(std::span<const pipeline::ManifestEntry> entries,
                                   std::span<const imaging::DegradationSpec> degradations,
                                   backend::Backend& be, const pipeline::PipelineConfig& cfg);

/// report.json and/or report.csv (+ bbox_histogram.csv, acc_by_bbox_count.csv,
/// keywords.csv); deterministic bytes for identical reports.
void emit_report(const EvalReport& report, const std::string& out_dir,
                 bool write_json, bool write_csv, int keyword_top_k = 50);

/// Bar charts for the histogram and accuracy-by-count analyses.
void render_charts(const EvalReport& report, const std::string& out_dir);

}  // namespace zoomin::evaluation
