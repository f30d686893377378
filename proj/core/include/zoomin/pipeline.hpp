#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "zoomin/backend.hpp"
#include "zoomin/geometry.hpp"
#include "zoomin/imaging.hpp"
#include "zoomin/model_io.hpp"
#include "zoomin/util.hpp"

namespace zoomin::pipeline {

/// Dataset manifest row. Crops are derived at inference time, never stored.
struct SampleRecord {
  std::string id;
  std::string image_path;
  model_io::Verdict label = model_io::Verdict::Real;
  std::optional<std::string> reference_explanation;
  std::optional<std::vector<geometry::BBox>> reference_boxes;
  std::optional<std::string> source;
};

struct ManifestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One JSONL manifest line: either a sample or a per-line error.
struct ManifestEntry {
  int line_no = 0;
  std::optional<SampleRecord> sample;
  std::string error;
};

SampleRecord sample_from_json(const nlohmann::json& j);
nlohmann::json sample_to_json(const SampleRecord& s);

/// Reads a JSONL manifest; unreadable file throws ManifestError, malformed
/// lines become error entries so a batch can keep going.
std::vector<ManifestEntry> load_manifest(const std::string& path);
std::map<std::string, SampleRecord> samples_by_id(std::span<const ManifestEntry> entries);

enum class Mode { ZoomIn, OneTurnE, OneTurnEG, VerdictOnly, RandomCrop };

std::string_view mode_to_string(Mode m);
std::optional<Mode> mode_from_string(std::string_view s);

struct InferenceResult {
  std::string id;
  Mode mode = Mode::ZoomIn;
  std::optional<model_io::Verdict> v1;
  std::optional<model_io::Verdict> v2;  // equals v1 in one-turn modes
  std::vector<geometry::BBox> boxes;
  std::string e1;
  std::string e2;
  std::string raw1;
  std::string raw2;
  double latency_ms_total = 0.0;
  int backend_calls = 0;
  bool failed = false;
  std::string error;
};

nlohmann::json result_to_json(const InferenceResult& r);
InferenceResult result_from_json(const nlohmann::json& j);

struct PromptSet {
  backend::PromptTemplate query1;
  backend::PromptTemplate query2;
  backend::PromptTemplate one_turn_e;
  backend::PromptTemplate one_turn_eg;
  backend::PromptTemplate verdict_only;
  backend::PromptTemplate annotate_explain;
  backend::PromptTemplate annotate_ground;
  backend::PromptTemplate judge;

  static PromptSet defaults();
  /// Replaces template text by name ("query1", "annotate_ground", ...).
  void apply_overrides(const std::map<std::string, std::string>& by_name);
  /// Checks every placeholder the pipeline depends on exists.
  void validate() const;
};

struct PipelineConfig {
  Mode mode = Mode::ZoomIn;
  std::optional<int> max_boxes;  // keep only the n largest Stage-1 boxes
  std::uint64_t seed = 0;
  double random_crop_fraction = 0.8;  // RandomCrop mode, per dimension
  int random_crop_count = 2;
  int concurrency = 1;
  /// Applied to the decoded image before any prompt is built.
  std::optional<imaging::DegradationSpec> degradation;
  PromptSet prompts = PromptSet::defaults();
};

/// The n largest boxes by area; survivor order preserved, ties broken by
/// earlier position.
std::vector<geometry::BBox> limit_boxes(std::span<const geometry::BBox> boxes, int n);

/// Two-stage protocol: Stage 1 proposes verdict/boxes/explanation on the full
/// image; Stage 2 re-queries with the image plus crops of the surviving boxes
/// (with the image alone when no box survives). Parse failures mark the
/// result failed; backend/decode errors propagate.
InferenceResult run_zoomin(const SampleRecord& sample, backend::Backend& be,
                           const PipelineConfig& cfg);

/// Single-call ablations; v2 := v1 and e2 := e1 by construction.
InferenceResult run_one_turn(const SampleRecord& sample, Mode mode,
                             backend::Backend& be, const PipelineConfig& cfg);

/// Like run_zoomin, but Stage-1 boxes are discarded and replaced with seeded
/// random boxes before Stage 2.
InferenceResult run_random_crop(const SampleRecord& sample, backend::Backend& be,
                                const PipelineConfig& cfg);

/// Dispatches on cfg.mode.
InferenceResult run_sample(const SampleRecord& sample, backend::Backend& be,
                           const PipelineConfig& cfg);

struct AnnotationRecord {
  std::string id;
  model_io::Verdict label = model_io::Verdict::Real;
  std::string explanation;
  std::vector<geometry::BBox> boxes;
  int filtered_boxes_removed = 0;
  bool grounding_warning = false;  // grounder output had no parsable boxes
  bool failed = false;
  std::string error;
};

nlohmann::json annotation_to_json(const AnnotationRecord& r);
AnnotationRecord annotation_from_json(const nlohmann::json& j);

/// Returns true when the box should be removed (e.g. it merely outlines the
/// primary object). Consulted for boxes that already pass the area rule.
using JudgeHook = std::function<bool(const SampleRecord& sample,
                                     const imaging::RasterImage& image,
                                     const geometry::BBox& box)>;

struct AnnotateConfig {
  double purify_threshold = 0.5;
  double explainer_temperature = 0.7;
  JudgeHook judge;  // optional
  PromptSet prompts = PromptSet::defaults();
};

/// Explanation generation (label-conditioned) then spatial grounding; boxes
/// clamped, area-purified and optionally judge-filtered.
AnnotationRecord annotate_sample(const SampleRecord& sample, backend::Backend& explainer,
                                 backend::Backend& grounder, const AnnotateConfig& cfg);

/// Bounded sample-level parallelism; output order always equals entry order;
/// per-sample failures (including manifest error lines) become failed results.
/// `shared_gate` optionally bounds in-flight samples across several batches.
std::vector<InferenceResult> run_batch(std::span<const ManifestEntry> entries,
                                       backend::Backend& be, const PipelineConfig& cfg,
                                       util::Semaphore* shared_gate = nullptr);

std::vector<AnnotationRecord> annotate_batch(std::span<const ManifestEntry> entries,
                                             backend::Backend& explainer,
                                             backend::Backend& grounder,
                                             const AnnotateConfig& cfg, int concurrency);

/// JSONL with a leading header object.
void write_results_jsonl(const std::string& path, const nlohmann::json& header,
                         std::span<const InferenceResult> results);
struct LoadedResults {
  nlohmann::json header;
  std::vector<InferenceResult> results;
};
LoadedResults load_results_jsonl(const std::string& path);

void write_annotations_jsonl(const std::string& path, const nlohmann::json& header,
                             std::span<const AnnotationRecord> records);

}  // namespace zoomin::pipeline
