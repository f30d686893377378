// zoomin — two-stage AI-image forensics pipelines behind one binary.
// Subcommands: infer, annotate, evaluate, robustness, degrade, reward-serve,
// reward-score, render-boxes. Exit codes: 0 success, 1 partial failures,
// 2 config/usage errors.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "zoomin/backend.hpp"
#include "zoomin/config.hpp"
#include "zoomin/evaluation.hpp"
#include "zoomin/imaging.hpp"
#include "zoomin/model_io.hpp"
#include "zoomin/pipeline.hpp"
#include "zoomin/reward_server.hpp"
#include "zoomin/rewards.hpp"
#include "zoomin/util.hpp"
#include "zoomin/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace zoomin;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonRunOpts {
  std::string config_path;
  std::string backend_name = "mock";
  std::string script_path;
  std::string manifest_path;
  std::string prompts_path;
  std::uint64_t seed = 0;
  int concurrency = 1;
};

void add_common_run_opts(CLI::App* cmd, CommonRunOpts& opts, bool with_backend = true) {
  cmd->add_option("--config", opts.config_path, "Backends config file (zoomin.toml or .json)");
  if (with_backend)
    cmd->add_option("--backend", opts.backend_name, "Named backend (or 'mock' with --script)");
  cmd->add_option("--script", opts.script_path,
                  "Mock completions script JSON; forces the backend into mock mode");
  cmd->add_option("--manifest", opts.manifest_path, "Input manifest JSONL")->required();
  cmd->add_option("--prompts", opts.prompts_path, "JSON file of prompt template overrides");
  cmd->add_option("--seed", opts.seed, "Seed for every random choice in the run");
  cmd->add_option("--concurrency", opts.concurrency, "Max samples in flight")
      ->check(CLI::PositiveNumber);
}

backend::BackendConfig resolve_backend_config(const CommonRunOpts& opts,
                                              const std::string& name) {
  std::map<std::string, backend::BackendConfig> backends;
  if (!opts.config_path.empty()) backends = config::load_backends(opts.config_path);
  backend::BackendConfig cfg;
  auto it = backends.find(name);
  if (it != backends.end()) {
    cfg = it->second;
  } else if (name == "mock") {
    cfg.name = "mock";
    cfg.type = "mock";
  } else {
    throw UsageError("backend '" + name + "' is not defined" +
                     (opts.config_path.empty() ? " (no --config given)"
                                               : " in " + opts.config_path));
  }
  if (!opts.script_path.empty()) {
    cfg.type = "mock";
    cfg.script_path = opts.script_path;
  }
  if (cfg.type == "mock" && cfg.script_path.empty())
    throw UsageError("mock backend '" + name + "' needs --script or a script= config key");
  return cfg;
}

std::unique_ptr<backend::Backend> resolve_backend(const CommonRunOpts& opts,
                                                  const std::string& name) {
  return backend::make_backend(resolve_backend_config(opts, name));
}

pipeline::PromptSet load_prompts(const std::string& path) {
  pipeline::PromptSet prompts = pipeline::PromptSet::defaults();
  if (path.empty()) return prompts;
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open prompts file: " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw UsageError("prompts file must be a JSON object of name -> template text");
  std::map<std::string, std::string> overrides;
  for (const auto& [name, value] : j.items()) {
    if (!value.is_string()) throw UsageError("prompt '" + name + "' must be a string");
    overrides[name] = value.get<std::string>();
  }
  prompts.apply_overrides(overrides);
  return prompts;
}

json run_header(const std::string& kind, const std::string& mode_label, std::uint64_t seed,
                const json& effective_config) {
  json header;
  header["schema"] = 1;
  header["kind"] = kind;
  header["tool_version"] = kToolVersion;
  header["mode"] = mode_label;
  header["seed"] = seed;
  header["config_hash"] = util::fnv1a64_hex(effective_config.dump());
  header["timestamp"] = util::iso8601_utc_now();
  return header;
}

int count_failed(std::span<const pipeline::InferenceResult> results) {
  int n = 0;
  for (const auto& r : results)
    if (r.failed) ++n;
  return n;
}

std::string sanitize_label(const std::string& label) {
  std::string out = label;
  for (char& c : out)
    if (c == ':' || c == '/' || c == '#') c = '-';
  return out;
}

std::vector<imaging::DegradationSpec> parse_degradations(const std::string& csv,
                                                         std::uint64_t seed) {
  std::vector<imaging::DegradationSpec> specs;
  for (const auto& token : util::split(csv, ',')) {
    auto trimmed = util::trim(token);
    if (trimmed.empty()) continue;
    auto spec = imaging::DegradationSpec::parse(trimmed, seed);
    if (!spec)
      throw UsageError("bad degradation '" + std::string(trimmed) +
                       "' (expected jpeg:Q, crop:F, or down:F)");
    specs.push_back(*spec);
  }
  if (specs.empty()) throw UsageError("no degradations given");
  return specs;
}

// ---- infer ----

struct InferOpts {
  CommonRunOpts common;
  std::string mode = "zoomin";
  std::string out_path = "results.jsonl";
  int max_boxes = 0;  // 0 = unlimited
  double crop_fraction = 0.8;
  int crop_count = 2;
};

int cmd_infer(const InferOpts& opts) {
  auto mode = pipeline::mode_from_string(opts.mode);
  if (!mode) throw UsageError("unknown --mode '" + opts.mode + "'");

  pipeline::PipelineConfig cfg;
  cfg.mode = *mode;
  if (opts.max_boxes > 0) cfg.max_boxes = opts.max_boxes;
  cfg.seed = opts.common.seed;
  cfg.random_crop_fraction = opts.crop_fraction;
  cfg.random_crop_count = opts.crop_count;
  cfg.concurrency = opts.common.concurrency;
  cfg.prompts = load_prompts(opts.common.prompts_path);

  auto backend_cfg = resolve_backend_config(opts.common, opts.common.backend_name);
  auto be = backend::make_backend(backend_cfg);
  auto entries = pipeline::load_manifest(opts.common.manifest_path);
  auto results = pipeline::run_batch(entries, *be, cfg);

  json effective{{"command", "infer"},
                 {"mode", opts.mode},
                 {"backend", backend_cfg.name},
                 {"backend_type", backend_cfg.type},
                 {"model", backend_cfg.model},
                 {"max_boxes", opts.max_boxes},
                 {"seed", opts.common.seed},
                 {"concurrency", opts.common.concurrency},
                 {"crop_fraction", opts.crop_fraction},
                 {"crop_count", opts.crop_count}};
  pipeline::write_results_jsonl(
      opts.out_path, run_header("inference", opts.mode, opts.common.seed, effective), results);

  const int failed = count_failed(results);
  std::cout << "wrote " << results.size() << " results (" << failed << " failed) to "
            << opts.out_path << "\n";
  return failed > 0 ? 1 : 0;
}

// ---- annotate ----

struct AnnotateOpts {
  CommonRunOpts common;
  std::string explainer;
  std::string grounder;
  std::string judge;
  std::string out_path = "annotations.jsonl";
  double purify_threshold = 0.5;
  double explainer_temperature = 0.7;
};

int cmd_annotate(const AnnotateOpts& opts) {
  auto explainer = resolve_backend(opts.common, opts.explainer);
  auto grounder = resolve_backend(opts.common, opts.grounder);

  pipeline::AnnotateConfig acfg;
  acfg.purify_threshold = opts.purify_threshold;
  acfg.explainer_temperature = opts.explainer_temperature;
  acfg.prompts = load_prompts(opts.common.prompts_path);

  std::unique_ptr<backend::Backend> judge;
  if (!opts.judge.empty()) {
    judge = resolve_backend(opts.common, opts.judge);
    backend::PromptTemplate judge_tpl = acfg.prompts.judge;
    backend::Backend* judge_ptr = judge.get();
    acfg.judge = [judge_tpl, judge_ptr](const pipeline::SampleRecord& sample,
                                        const imaging::RasterImage& img,
                                        const geometry::BBox& box) {
      backend::PromptVars vars;
      backend::ImagePart part;
      part.bytes = imaging::encode_png(img);
      part.width = img.width;
      part.height = img.height;
      vars.image = part;
      vars.text["box"] = "[" + std::to_string(box.x1) + "," + std::to_string(box.y1) + "," +
                         std::to_string(box.x2) + "," + std::to_string(box.y2) + "]";
      backend::ChatRequest req;
      req.messages = backend::render_prompt(judge_tpl, vars);
      req.sample_id = sample.id;
      req.stage = 3;  // judge calls are scripted under <id>:3
      auto resp = judge_ptr->complete(req);
      auto answer = util::to_lower_ascii(util::trim(resp.text));
      return answer.rfind("yes", 0) == 0;
    };
  }

  auto entries = pipeline::load_manifest(opts.common.manifest_path);
  auto records =
      pipeline::annotate_batch(entries, *explainer, *grounder, acfg, opts.common.concurrency);

  json effective{{"command", "annotate"},
                 {"explainer", opts.explainer},
                 {"grounder", opts.grounder},
                 {"judge", opts.judge},
                 {"purify_threshold", opts.purify_threshold},
                 {"seed", opts.common.seed},
                 {"concurrency", opts.common.concurrency}};
  pipeline::write_annotations_jsonl(
      opts.out_path, run_header("annotation", "annotate", opts.common.seed, effective), records);

  int failed = 0;
  std::int64_t boxes = 0;
  for (const auto& r : records) {
    if (r.failed) ++failed;
    boxes += static_cast<std::int64_t>(r.boxes.size());
  }
  std::cout << "wrote " << records.size() << " annotations (" << failed << " failed, " << boxes
            << " boxes) to " << opts.out_path << "\n";
  return failed > 0 ? 1 : 0;
}

// ---- evaluate ----

struct EvaluateOpts {
  std::string results_path;
  std::string manifest_path;
  std::string out_dir = "report";
  std::string formats = "json,csv";
  std::string stopwords_path;
  int top_k = 50;
  bool charts = false;
};

evaluation::EvalReport build_report(
    const std::string& mode_label, const json& header,
    std::span<const pipeline::InferenceResult> results,
    const std::map<std::string, pipeline::SampleRecord>& manifest,
    const std::set<std::string>& stopwords) {
  evaluation::EvalReport report;
  report.header = header;
  report.mode_label = mode_label;
  report.bundle = evaluation::aggregate(results, manifest);
  auto hist = evaluation::bbox_histogram(results);
  report.bbox_histogram = hist.counts;
  report.mean_boxes = hist.mean;
  report.acc_by_bbox_count = evaluation::accuracy_by_bbox_count(results, manifest);
  report.keyword_frequencies = evaluation::keyword_frequency(results, stopwords);
  return report;
}

std::set<std::string> load_stopwords(const std::string& path) {
  if (path.empty()) return evaluation::default_stopwords();
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open stopwords file: " + path);
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    auto w = util::trim(line);
    if (!w.empty()) words.insert(std::string(w));
  }
  return words;
}

void print_bundle(const std::string& label, const evaluation::MetricBundle& b) {
  auto cell = [](const std::optional<double>& v) {
    return v ? util::format_double(*v) : std::string("-");
  };
  std::cout << "  " << label << ": n=" << b.n_samples << " failed=" << b.n_failed
            << " acc=" << cell(b.acc) << " i_acc=" << cell(b.i_acc)
            << " c_cases=" << cell(b.c_cases) << " c_acc=" << cell(b.c_acc)
            << " bleu1=" << cell(b.bleu1) << " bleu2=" << cell(b.bleu2)
            << " rouge_l=" << cell(b.rouge_l) << " iou=" << cell(b.mean_iou) << "\n";
}

int cmd_evaluate(const EvaluateOpts& opts) {
  auto loaded = pipeline::load_results_jsonl(opts.results_path);
  auto entries = pipeline::load_manifest(opts.manifest_path);
  auto manifest = pipeline::samples_by_id(entries);

  std::string mode_label = "zoomin";
  if (loaded.header.is_object() && loaded.header.contains("mode") &&
      loaded.header["mode"].is_string())
    mode_label = loaded.header["mode"].get<std::string>();
  std::uint64_t seed = 0;
  if (loaded.header.is_object() && loaded.header.contains("seed") &&
      loaded.header["seed"].is_number_unsigned())
    seed = loaded.header["seed"].get<std::uint64_t>();

  json effective{{"command", "evaluate"},
                 {"results", opts.results_path},
                 {"manifest", opts.manifest_path},
                 {"top_k", opts.top_k},
                 {"source_config_hash",
                  loaded.header.is_object() ? loaded.header.value("config_hash", "") : ""}};
  auto header = run_header("report", mode_label, seed, effective);
  auto report = build_report(mode_label, header, loaded.results, manifest,
                             load_stopwords(opts.stopwords_path));

  const bool json_out = opts.formats.find("json") != std::string::npos;
  const bool csv_out = opts.formats.find("csv") != std::string::npos;
  if (!json_out && !csv_out) throw UsageError("--format must include json and/or csv");
  evaluation::emit_report(report, opts.out_dir, json_out, csv_out, opts.top_k);
  if (opts.charts) evaluation::render_charts(report, opts.out_dir);

  std::cout << "report for " << report.bundle.n_samples << " samples -> " << opts.out_dir << "\n";
  print_bundle(mode_label, report.bundle);
  return 0;
}

// ---- robustness ----

struct RobustnessOpts {
  CommonRunOpts common;
  std::string mode = "zoomin";
  std::string degradations = "jpeg:80,jpeg:30,crop:0.8,down:0.5";
  std::string out_dir = "robustness";
  std::string formats = "json,csv";
  int max_boxes = 0;
};

int cmd_robustness(const RobustnessOpts& opts) {
  auto mode = pipeline::mode_from_string(opts.mode);
  if (!mode) throw UsageError("unknown --mode '" + opts.mode + "'");
  auto specs = parse_degradations(opts.degradations, opts.common.seed);

  pipeline::PipelineConfig cfg;
  cfg.mode = *mode;
  if (opts.max_boxes > 0) cfg.max_boxes = opts.max_boxes;
  cfg.seed = opts.common.seed;
  cfg.concurrency = opts.common.concurrency;
  cfg.prompts = load_prompts(opts.common.prompts_path);

  auto backend_cfg = resolve_backend_config(opts.common, opts.common.backend_name);
  auto be = backend::make_backend(backend_cfg);
  auto entries = pipeline::load_manifest(opts.common.manifest_path);
  auto outcome = evaluation::robustness_suite(entries, specs, *be, cfg);

  json effective{{"command", "robustness"},     {"mode", opts.mode},
                 {"backend", backend_cfg.name}, {"degradations", opts.degradations},
                 {"seed", opts.common.seed},    {"concurrency", opts.common.concurrency}};
  auto header = run_header("robustness", opts.mode, opts.common.seed, effective);

  fs::create_directories(opts.out_dir);
  int failed = 0;
  for (const auto& label : outcome.order) {
    const auto& results = outcome.results.at(label);
    failed += count_failed(results);
    pipeline::write_results_jsonl(
        (fs::path(opts.out_dir) / ("results_" + sanitize_label(label) + ".jsonl")).string(),
        header, results);
  }

  auto manifest = pipeline::samples_by_id(entries);
  auto report = build_report(opts.mode, header, outcome.results.at("clean"), manifest,
                             evaluation::default_stopwords());
  report.per_degradation = outcome.bundles;
  const bool json_out = opts.formats.find("json") != std::string::npos;
  const bool csv_out = opts.formats.find("csv") != std::string::npos;
  evaluation::emit_report(report, opts.out_dir, json_out, csv_out);

  std::cout << "robustness over " << outcome.order.size() << " runs -> " << opts.out_dir << "\n";
  for (const auto& label : outcome.order) print_bundle(label, outcome.bundles.at(label));
  return failed > 0 ? 1 : 0;
}

// ---- degrade ----

struct DegradeOpts {
  std::string input_dir;
  std::string output_dir;
  std::string spec_token;
  std::uint64_t seed = 0;
};

int cmd_degrade(const DegradeOpts& opts) {
  auto spec = imaging::DegradationSpec::parse(opts.spec_token, opts.seed);
  if (!spec) throw UsageError("bad --spec '" + opts.spec_token + "'");
  if (!fs::is_directory(opts.input_dir))
    throw UsageError("--input must be a directory: " + opts.input_dir);
  fs::create_directories(opts.output_dir);

  std::vector<fs::path> inputs;
  for (const auto& entry : fs::directory_iterator(opts.input_dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = util::to_lower_ascii(entry.path().extension().string());
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") inputs.push_back(entry.path());
  }
  std::sort(inputs.begin(), inputs.end());

  int failed = 0;
  for (const auto& path : inputs) {
    try {
      auto img = imaging::degrade(imaging::load_file(path.string()), *spec);
      fs::path out = fs::path(opts.output_dir) / path.filename();
      if (spec->kind == imaging::DegradationSpec::Kind::JpegQuality) {
        out.replace_extension(".jpg");
        imaging::save_file(img, out.string(), spec->jpeg_quality);
      } else {
        out.replace_extension(".png");
        imaging::save_file(img, out.string());
      }
    } catch (const std::exception& e) {
      std::cerr << "degrade failed for " << path << ": " << e.what() << "\n";
      ++failed;
    }
  }
  std::cout << "degraded " << (inputs.size() - failed) << "/" << inputs.size() << " images ("
            << spec->label() << ") -> " << opts.output_dir << "\n";
  return failed > 0 ? 1 : 0;
}

// ---- reward service ----

struct ServeOpts {
  std::string bind = "0.0.0.0";
  int port = 8080;
};

int cmd_reward_serve(const ServeOpts& opts) {
  rewards::RewardServer server;
  if (!server.start(opts.bind, opts.port))
    throw UsageError("cannot bind " + opts.bind + ":" + std::to_string(opts.port));
  std::cout << "reward service listening on " << opts.bind << ":" << server.port()
            << " (POST /v1/reward/stage1, /v1/reward/stage2; GET /healthz)\n";
  server.wait();
  return 0;
}

struct RewardScoreOpts {
  std::string input_path;
  std::string output_path = "reward_scores.jsonl";
};

int cmd_reward_score(const RewardScoreOpts& opts) {
  std::ifstream in(opts.input_path);
  if (!in) throw UsageError("cannot open input: " + opts.input_path);
  std::ofstream out(opts.output_path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot open output: " + opts.output_path);

  json effective{{"command", "reward-score"}, {"input", opts.input_path}};
  out << run_header("reward-scores", "reward-score", 0, effective).dump() << "\n";

  std::string line;
  int line_no = 0, failed = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    json result;
    try {
      if (j.is_discarded()) throw std::invalid_argument("not valid JSON");
      const int stage = j.value("stage", 0);
      if (stage == 1)
        result = rewards::breakdown_to_json(
            rewards::score_stage1(rewards::stage1_request_from_json(j)));
      else if (stage == 2)
        result = rewards::breakdown_to_json(
            rewards::score_stage2(rewards::stage2_request_from_json(j)));
      else
        throw std::invalid_argument("line needs \"stage\": 1 or 2");
    } catch (const std::exception& e) {
      result = json{{"error", std::string(e.what()) + " (line " + std::to_string(line_no) + ")"}};
      ++failed;
    }
    out << result.dump() << "\n";
  }
  std::cout << "scored " << (line_no - failed) << "/" << line_no << " lines -> "
            << opts.output_path << "\n";
  return failed > 0 ? 1 : 0;
}

// ---- render-boxes ----

struct RenderOpts {
  std::string manifest_path;
  std::string results_path;
  std::string out_dir = "overlays";
  int thickness = 2;
};

int cmd_render_boxes(const RenderOpts& opts) {
  auto entries = pipeline::load_manifest(opts.manifest_path);
  std::map<std::string, pipeline::InferenceResult> by_id;
  if (!opts.results_path.empty()) {
    for (auto& r : pipeline::load_results_jsonl(opts.results_path).results)
      by_id.emplace(r.id, std::move(r));
  }
  fs::create_directories(opts.out_dir);

  int failed = 0, drawn = 0;
  for (const auto& entry : entries) {
    if (!entry.sample) continue;
    const auto& sample = *entry.sample;
    try {
      auto img = imaging::load_file(sample.image_path);
      if (sample.reference_boxes)
        for (const auto& b : *sample.reference_boxes)
          imaging::draw_box(img, b, 40, 200, 40, opts.thickness);
      auto it = by_id.find(sample.id);
      if (it != by_id.end())
        for (const auto& b : it->second.boxes)
          imaging::draw_box(img, b, 230, 40, 40, opts.thickness);
      imaging::save_file(img, (fs::path(opts.out_dir) / (sample.id + ".png")).string());
      ++drawn;
    } catch (const std::exception& e) {
      std::cerr << "render failed for " << sample.id << ": " << e.what() << "\n";
      ++failed;
    }
  }
  std::cout << "rendered " << drawn << " overlays -> " << opts.out_dir
            << " (reference boxes green, predicted red)\n";
  return failed > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zoomin: two-stage AI-generated-image detection pipelines"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  InferOpts infer_opts;
  auto* infer = app.add_subcommand("infer", "Run detection over a manifest");
  add_common_run_opts(infer, infer_opts.common);
  infer->add_option("--mode", infer_opts.mode,
                    "zoomin|one-turn-e|one-turn-eg|verdict-only|random-crop");
  infer->add_option("--out", infer_opts.out_path, "Results JSONL path");
  infer->add_option("--max-boxes", infer_opts.max_boxes, "Keep only the N largest stage-1 boxes");
  infer->add_option("--crop-fraction", infer_opts.crop_fraction,
                    "Random-crop mode: box side fraction");
  infer->add_option("--crop-count", infer_opts.crop_count, "Random-crop mode: boxes per image");

  AnnotateOpts annotate_opts;
  auto* annotate = app.add_subcommand("annotate", "Build explanation+box annotations");
  add_common_run_opts(annotate, annotate_opts.common, /*with_backend=*/false);
  annotate->add_option("--explainer", annotate_opts.explainer, "Explanation backend name")
      ->required();
  annotate->add_option("--grounder", annotate_opts.grounder, "Grounding backend name")
      ->required();
  annotate->add_option("--judge", annotate_opts.judge,
                       "Optional backend that vetoes object-outline boxes");
  annotate->add_option("--out", annotate_opts.out_path, "Annotations JSONL path");
  annotate->add_option("--purify-threshold", annotate_opts.purify_threshold,
                       "Drop boxes covering more than this image fraction");
  annotate->add_option("--explainer-temperature", annotate_opts.explainer_temperature,
                       "Sampling temperature for the explanation backend");

  EvaluateOpts eval_opts;
  auto* evaluate = app.add_subcommand("evaluate", "Aggregate metrics from a results file");
  evaluate->add_option("--results", eval_opts.results_path, "Results JSONL")->required();
  evaluate->add_option("--manifest", eval_opts.manifest_path, "Manifest JSONL")->required();
  evaluate->add_option("--out-dir", eval_opts.out_dir, "Report directory");
  evaluate->add_option("--format", eval_opts.formats, "json,csv");
  evaluate->add_option("--stopwords", eval_opts.stopwords_path,
                       "Newline-separated stopword list for keyword counts");
  evaluate->add_option("--top-k", eval_opts.top_k, "Keywords kept in keywords.csv");
  evaluate->add_flag("--charts", eval_opts.charts, "Also render PNG charts");

  RobustnessOpts robust_opts;
  auto* robustness = app.add_subcommand("robustness", "Degradation sweep + per-run metrics");
  add_common_run_opts(robustness, robust_opts.common);
  robustness->add_option("--mode", robust_opts.mode, "Pipeline mode");
  robustness->add_option("--degradations", robust_opts.degradations,
                         "Comma list: jpeg:80,jpeg:30,crop:0.8,down:0.5");
  robustness->add_option("--out-dir", robust_opts.out_dir, "Output directory");
  robustness->add_option("--format", robust_opts.formats, "json,csv");
  robustness->add_option("--max-boxes", robust_opts.max_boxes,
                         "Keep only the N largest stage-1 boxes");

  DegradeOpts degrade_opts;
  auto* degrade = app.add_subcommand("degrade", "Apply one degradation to an image directory");
  degrade->add_option("--input", degrade_opts.input_dir, "Input image directory")->required();
  degrade->add_option("--output", degrade_opts.output_dir, "Output directory")->required();
  degrade->add_option("--spec", degrade_opts.spec_token, "jpeg:Q | crop:F | down:F")->required();
  degrade->add_option("--seed", degrade_opts.seed, "Seed for crop offsets");

  ServeOpts serve_opts;
  auto* serve = app.add_subcommand("reward-serve", "Serve GRPO reward scoring over HTTP");
  serve->add_option("--bind", serve_opts.bind, "Bind address");
  serve->add_option("--port", serve_opts.port, "Port (0 = ephemeral)");

  RewardScoreOpts score_opts;
  auto* score = app.add_subcommand("reward-score", "Score a JSONL file of reward requests");
  score->add_option("--input", score_opts.input_path, "Requests JSONL (each line has stage:1|2)")
      ->required();
  score->add_option("--out", score_opts.output_path, "Breakdowns JSONL path");

  RenderOpts render_opts;
  auto* render = app.add_subcommand("render-boxes", "Write PNG overlays of boxes");
  render->add_option("--manifest", render_opts.manifest_path, "Manifest JSONL")->required();
  render->add_option("--results", render_opts.results_path, "Optional results JSONL");
  render->add_option("--out-dir", render_opts.out_dir, "Overlay directory");
  render->add_option("--thickness", render_opts.thickness, "Outline thickness in pixels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints usage help
    return 2;
  }

  try {
    if (infer->parsed()) return cmd_infer(infer_opts);
    if (annotate->parsed()) return cmd_annotate(annotate_opts);
    if (evaluate->parsed()) return cmd_evaluate(eval_opts);
    if (robustness->parsed()) return cmd_robustness(robust_opts);
    if (degrade->parsed()) return cmd_degrade(degrade_opts);
    if (serve->parsed()) return cmd_reward_serve(serve_opts);
    if (score->parsed()) return cmd_reward_score(score_opts);
    if (render->parsed()) return cmd_render_boxes(render_opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
