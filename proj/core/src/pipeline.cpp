#include "zoomin/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <thread>

namespace zoomin::pipeline {

using nlohmann::json;

// ---- manifest ----

namespace {

std::vector<geometry::BBox> boxes_from_json(const json& arr, const std::string& what) {
  if (!arr.is_array()) throw std::invalid_argument(what + " must be an array");
  std::vector<geometry::BBox> out;
  out.reserve(arr.size());
  for (const auto& e : arr) {
    if (!e.is_array() || e.size() != 4)
      throw std::invalid_argument(what + " entries must be [x1,y1,x2,y2]");
    for (const auto& v : e)
      if (!v.is_number()) throw std::invalid_argument(what + " coordinates must be numbers");
    out.push_back(geometry::BBox{e[0].get<int>(), e[1].get<int>(), e[2].get<int>(),
                                 e[3].get<int>()});
  }
  return out;
}

json boxes_to_json(std::span<const geometry::BBox> boxes) {
  json arr = json::array();
  for (const auto& b : boxes) arr.push_back({b.x1, b.y1, b.x2, b.y2});
  return arr;
}

model_io::Verdict verdict_field(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string())
    throw std::invalid_argument(std::string("missing or non-string \"") + key + "\"");
  auto v = model_io::verdict_from_string(j[key].get<std::string>());
  if (!v) throw std::invalid_argument(std::string("\"") + key + "\" must be real|generated");
  return *v;
}

}  // namespace

SampleRecord sample_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("sample must be a JSON object");
  SampleRecord s;
  if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty())
    throw std::invalid_argument("sample needs a non-empty string \"id\"");
  s.id = j["id"].get<std::string>();
  if (!j.contains("image") || !j["image"].is_string())
    throw std::invalid_argument("sample needs a string \"image\" path");
  s.image_path = j["image"].get<std::string>();
  s.label = verdict_field(j, "label");
  if (j.contains("explanation")) {
    if (!j["explanation"].is_string())
      throw std::invalid_argument("\"explanation\" must be a string");
    s.reference_explanation = j["explanation"].get<std::string>();
  }
  if (j.contains("boxes")) s.reference_boxes = boxes_from_json(j["boxes"], "\"boxes\"");
  if (j.contains("source")) {
    if (!j["source"].is_string()) throw std::invalid_argument("\"source\" must be a string");
    s.source = j["source"].get<std::string>();
  }
  return s;
}

json sample_to_json(const SampleRecord& s) {
  json j;
  j["id"] = s.id;
  j["image"] = s.image_path;
  j["label"] = std::string(model_io::to_string(s.label));
  if (s.reference_explanation) j["explanation"] = *s.reference_explanation;
  if (s.reference_boxes) j["boxes"] = boxes_to_json(*s.reference_boxes);
  if (s.source) j["source"] = *s.source;
  return j;
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest: " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    ManifestEntry entry;
    entry.line_no = line_no;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      entry.error = "not valid JSON";
    } else {
      try {
        entry.sample = sample_from_json(j);
      } catch (const std::exception& e) {
        entry.error = e.what();
      }
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::map<std::string, SampleRecord> samples_by_id(std::span<const ManifestEntry> entries) {
  std::map<std::string, SampleRecord> out;
  for (const auto& e : entries)
    if (e.sample) out.emplace(e.sample->id, *e.sample);
  return out;
}

// ---- modes ----

std::string_view mode_to_string(Mode m) {
  switch (m) {
    case Mode::ZoomIn: return "zoomin";
    case Mode::OneTurnE: return "one-turn-e";
    case Mode::OneTurnEG: return "one-turn-eg";
    case Mode::VerdictOnly: return "verdict-only";
    case Mode::RandomCrop: return "random-crop";
  }
  return "?";
}

std::optional<Mode> mode_from_string(std::string_view s) {
  if (s == "zoomin") return Mode::ZoomIn;
  if (s == "one-turn-e") return Mode::OneTurnE;
  if (s == "one-turn-eg") return Mode::OneTurnEG;
  if (s == "verdict-only") return Mode::VerdictOnly;
  if (s == "random-crop") return Mode::RandomCrop;
  return std::nullopt;
}

// ---- results ----

json result_to_json(const InferenceResult& r) {
  json j;
  j["id"] = r.id;
  j["mode"] = std::string(mode_to_string(r.mode));
  j["failed"] = r.failed;
  if (!r.error.empty()) j["error"] = r.error;
  if (r.v1) j["v1"] = std::string(model_io::to_string(*r.v1));
  if (r.v2) j["v2"] = std::string(model_io::to_string(*r.v2));
  j["boxes"] = boxes_to_json(r.boxes);
  j["e1"] = r.e1;
  j["e2"] = r.e2;
  j["raw1"] = r.raw1;
  j["raw2"] = r.raw2;
  j["latency_ms_total"] = r.latency_ms_total;
  j["backend_calls"] = r.backend_calls;
  return j;
}

InferenceResult result_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("result must be a JSON object");
  InferenceResult r;
  r.id = j.value("id", std::string{});
  if (auto m = mode_from_string(j.value("mode", std::string{"zoomin"}))) r.mode = *m;
  r.failed = j.value("failed", false);
  r.error = j.value("error", std::string{});
  if (j.contains("v1")) r.v1 = verdict_field(j, "v1");
  if (j.contains("v2")) r.v2 = verdict_field(j, "v2");
  if (j.contains("boxes")) r.boxes = boxes_from_json(j["boxes"], "\"boxes\"");
  r.e1 = j.value("e1", std::string{});
  r.e2 = j.value("e2", std::string{});
  r.raw1 = j.value("raw1", std::string{});
  r.raw2 = j.value("raw2", std::string{});
  r.latency_ms_total = j.value("latency_ms_total", 0.0);
  r.backend_calls = j.value("backend_calls", 0);
  return r;
}

// ---- prompts ----

PromptSet PromptSet::defaults() {
  PromptSet p;
  p.query1.name = "query1";
  p.query1.text =
      "You are an image forensics analyst. Examine the attached image for signs of "
      "synthetic origin.\n{image}\nDecide whether the image is real or generated, flag "
      "the regions that deserve a closer look as pixel rectangles, and explain your "
      "reasoning.\nAnswer exactly in this form:\n"
      "<verdict>real or generated</verdict><boxes>[[x1,y1,x2,y2],...]</boxes>"
      "<explanation>your reasoning</explanation>\n"
      "Use <boxes>[]</boxes> when nothing stands out.";

  p.query2.name = "query2";
  p.query2.text =
      "Here is the image you analyzed, followed by magnified crops of the regions you "
      "flagged.\n{image}\n{crops}\nCompare the global view against the crops and settle "
      "on a final verdict.\nAnswer exactly in this form:\n"
      "<verdict>real or generated</verdict><explanation>your final reasoning, grounded "
      "in the crops</explanation>";

  p.one_turn_e.name = "one_turn_e";
  p.one_turn_e.text =
      "You are an image forensics analyst.\n{image}\nDecide whether the image is real or "
      "generated and explain why.\nAnswer exactly in this form:\n"
      "<verdict>real or generated</verdict><explanation>your reasoning</explanation>";

  p.one_turn_eg.name = "one_turn_eg";
  p.one_turn_eg.text =
      "You are an image forensics analyst.\n{image}\nDecide whether the image is real or "
      "generated, flag suspicious regions as pixel rectangles, and explain why.\n"
      "Answer exactly in this form:\n"
      "<verdict>real or generated</verdict><boxes>[[x1,y1,x2,y2],...]</boxes>"
      "<explanation>your reasoning</explanation>";

  p.verdict_only.name = "verdict_only";
  p.verdict_only.text =
      "{image}\nIs this image real or generated? Answer exactly in this form: "
      "<verdict>real or generated</verdict>";

  p.annotate_explain.name = "annotate_explain";
  p.annotate_explain.text =
      "This image is known to be {label_hint}.\n{image}\nDescribe the concrete visual "
      "evidence a forensic reviewer would cite for that conclusion: the depicted objects "
      "and their arrangement, perspective, lighting and shadows, textures, and any text "
      "or logos. Keep every observation specific to this image.";

  p.annotate_ground.name = "annotate_ground";
  p.annotate_ground.text =
      "{image}\nLocate each region referenced by the analysis below and return pixel "
      "bounding boxes as a JSON array of objects, each carrying a \"bbox_2d\" field "
      "holding [x1, y1, x2, y2] and a short \"label\".\nAnalysis: {explanation}";

  p.judge.name = "judge";
  p.judge.text =
      "{image}\nConsider the rectangle {box} in pixel coordinates. Does it simply "
      "outline the primary object of the image rather than a specific flawed detail? "
      "Answer yes or no.";
  return p;
}

void PromptSet::apply_overrides(const std::map<std::string, std::string>& by_name) {
  std::map<std::string, backend::PromptTemplate*> slots{
      {"query1", &query1},
      {"query2", &query2},
      {"one_turn_e", &one_turn_e},
      {"one_turn_eg", &one_turn_eg},
      {"verdict_only", &verdict_only},
      {"annotate_explain", &annotate_explain},
      {"annotate_ground", &annotate_ground},
      {"judge", &judge},
  };
  for (const auto& [name, text] : by_name) {
    auto it = slots.find(name);
    if (it == slots.end()) throw std::invalid_argument("unknown prompt name: " + name);
    it->second->text = text;
  }
  validate();
}

namespace {

void require_placeholder(const backend::PromptTemplate& tpl, std::string_view name) {
  for (const auto& ph : tpl.placeholders())
    if (ph == name) return;
  throw std::invalid_argument("template '" + tpl.name + "' must reference {" +
                              std::string(name) + "}");
}

}  // namespace

void PromptSet::validate() const {
  require_placeholder(query1, "image");
  require_placeholder(query2, "image");
  require_placeholder(query2, "crops");
  require_placeholder(one_turn_e, "image");
  require_placeholder(one_turn_eg, "image");
  require_placeholder(verdict_only, "image");
  require_placeholder(annotate_explain, "image");
  require_placeholder(annotate_explain, "label_hint");
  require_placeholder(annotate_ground, "image");
  require_placeholder(annotate_ground, "explanation");
  require_placeholder(judge, "image");
  require_placeholder(judge, "box");
}

// ---- inference ----

std::vector<geometry::BBox> limit_boxes(std::span<const geometry::BBox> boxes, int n) {
  if (n < 1) throw std::invalid_argument("limit_boxes: n must be >= 1");
  if (static_cast<size_t>(n) >= boxes.size())
    return {boxes.begin(), boxes.end()};
  std::vector<size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return boxes[a].area() > boxes[b].area();
  });
  order.resize(static_cast<size_t>(n));
  std::sort(order.begin(), order.end());
  std::vector<geometry::BBox> out;
  out.reserve(order.size());
  for (size_t i : order) out.push_back(boxes[i]);
  return out;
}

namespace {

backend::ImagePart png_part(const imaging::RasterImage& img) {
  backend::ImagePart part;
  part.media_type = "image/png";
  part.bytes = imaging::encode_png(img);
  part.width = img.width;
  part.height = img.height;
  return part;
}

imaging::RasterImage load_input_image(const SampleRecord& sample,
                                      const PipelineConfig& cfg) {
  imaging::RasterImage img = imaging::load_file(sample.image_path);
  if (cfg.degradation) img = imaging::degrade(img, *cfg.degradation);
  return img;
}

std::vector<geometry::BBox> clamp_and_drop(std::span<const geometry::BBox> raw,
                                           const geometry::ImageDims& dims) {
  std::vector<geometry::BBox> out;
  out.reserve(raw.size());
  for (const auto& b : raw)
    if (auto c = geometry::clamp_box(b, dims)) out.push_back(*c);
  return out;
}

std::uint64_t sample_seed(const PipelineConfig& cfg, const std::string& id) {
  return cfg.seed * 0x9E3779B97F4A7C15ull ^ util::fnv1a64(id);
}

std::vector<geometry::BBox> random_boxes(const SampleRecord& sample,
                                         const geometry::ImageDims& dims,
                                         const PipelineConfig& cfg) {
  const int bw = std::max(1, static_cast<int>(std::floor(dims.width * cfg.random_crop_fraction)));
  const int bh = std::max(1, static_cast<int>(std::floor(dims.height * cfg.random_crop_fraction)));
  std::mt19937_64 eng(sample_seed(cfg, sample.id));
  std::vector<geometry::BBox> out;
  out.reserve(static_cast<size_t>(std::max(0, cfg.random_crop_count)));
  for (int i = 0; i < cfg.random_crop_count; ++i) {
    int ox = dims.width > bw ? static_cast<int>(eng() % (dims.width - bw + 1)) : 0;
    int oy = dims.height > bh ? static_cast<int>(eng() % (dims.height - bh + 1)) : 0;
    out.push_back({ox, oy, ox + bw, oy + bh});
  }
  return out;
}

}  // namespace

InferenceResult run_zoomin(const SampleRecord& sample, backend::Backend& be,
                           const PipelineConfig& cfg) {
  const bool random = cfg.mode == Mode::RandomCrop;
  InferenceResult res;
  res.id = sample.id;
  res.mode = random ? Mode::RandomCrop : Mode::ZoomIn;

  imaging::RasterImage img = load_input_image(sample, cfg);
  backend::ImagePart image_part = png_part(img);

  backend::PromptVars vars1;
  vars1.image = image_part;
  backend::ChatRequest req1;
  req1.messages = backend::render_prompt(cfg.prompts.query1, vars1);
  req1.temperature = be.config().temperature;
  req1.max_tokens = be.config().max_tokens;
  req1.sample_id = sample.id;
  req1.stage = 1;
  backend::ChatResponse resp1 = be.complete(req1);
  res.raw1 = resp1.text;
  res.latency_ms_total += resp1.latency_ms;
  ++res.backend_calls;

  auto p1 = model_io::parse_stage1(resp1.text);
  if (!p1) {
    res.failed = true;
    res.error = "stage1 parse: missing verdict";
    return res;
  }
  res.v1 = p1->verdict;
  res.e1 = p1->explanation;

  std::vector<geometry::BBox> boxes = clamp_and_drop(p1->boxes, img.dims());
  if (cfg.max_boxes) boxes = limit_boxes(boxes, *cfg.max_boxes);
  if (random) boxes = random_boxes(sample, img.dims(), cfg);
  res.boxes = boxes;

  backend::PromptVars vars2;
  vars2.image = image_part;
  for (const auto& b : boxes) vars2.crops.push_back(png_part(imaging::crop(img, b)));
  backend::ChatRequest req2;
  req2.messages = backend::render_prompt(cfg.prompts.query2, vars2);
  req2.temperature = be.config().temperature;
  req2.max_tokens = be.config().max_tokens;
  req2.sample_id = sample.id;
  req2.stage = 2;
  backend::ChatResponse resp2 = be.complete(req2);
  res.raw2 = resp2.text;
  res.latency_ms_total += resp2.latency_ms;
  ++res.backend_calls;

  auto p2 = model_io::parse_stage2(resp2.text);
  if (!p2) {
    res.failed = true;
    res.error = "stage2 parse: missing verdict";
    return res;
  }
  res.v2 = p2->verdict;
  res.e2 = p2->explanation;
  return res;
}

InferenceResult run_one_turn(const SampleRecord& sample, Mode mode, backend::Backend& be,
                             const PipelineConfig& cfg) {
  const backend::PromptTemplate* tpl = nullptr;
  switch (mode) {
    case Mode::OneTurnE: tpl = &cfg.prompts.one_turn_e; break;
    case Mode::OneTurnEG: tpl = &cfg.prompts.one_turn_eg; break;
    case Mode::VerdictOnly: tpl = &cfg.prompts.verdict_only; break;
    default:
      throw std::invalid_argument("run_one_turn expects a one-turn mode");
  }

  InferenceResult res;
  res.id = sample.id;
  res.mode = mode;

  imaging::RasterImage img = load_input_image(sample, cfg);
  backend::PromptVars vars;
  vars.image = png_part(img);
  backend::ChatRequest req;
  req.messages = backend::render_prompt(*tpl, vars);
  req.temperature = be.config().temperature;
  req.max_tokens = be.config().max_tokens;
  req.sample_id = sample.id;
  req.stage = 1;
  backend::ChatResponse resp = be.complete(req);
  res.raw1 = resp.text;
  res.latency_ms_total = resp.latency_ms;
  res.backend_calls = 1;

  if (mode == Mode::OneTurnEG) {
    auto p = model_io::parse_stage1(resp.text);
    if (!p) {
      res.failed = true;
      res.error = "parse: missing verdict";
      return res;
    }
    res.v1 = p->verdict;
    res.e1 = p->explanation;
    std::vector<geometry::BBox> boxes = clamp_and_drop(p->boxes, img.dims());
    if (cfg.max_boxes) boxes = limit_boxes(boxes, *cfg.max_boxes);
    res.boxes = std::move(boxes);
  } else if (mode == Mode::OneTurnE) {
    auto p = model_io::parse_stage2(resp.text);
    if (!p) {
      res.failed = true;
      res.error = "parse: missing verdict";
      return res;
    }
    res.v1 = p->verdict;
    res.e1 = p->explanation;
  } else {  // VerdictOnly
    auto v = model_io::extract_verdict(resp.text);
    if (!v) {
      res.failed = true;
      res.error = "parse: missing verdict";
      return res;
    }
    res.v1 = *v;
  }
  res.v2 = res.v1;
  res.e2 = res.e1;
  return res;
}

InferenceResult run_random_crop(const SampleRecord& sample, backend::Backend& be,
                                const PipelineConfig& cfg) {
  PipelineConfig c = cfg;
  c.mode = Mode::RandomCrop;
  return run_zoomin(sample, be, c);
}

InferenceResult run_sample(const SampleRecord& sample, backend::Backend& be,
                           const PipelineConfig& cfg) {
  switch (cfg.mode) {
    case Mode::ZoomIn: return run_zoomin(sample, be, cfg);
    case Mode::RandomCrop: return run_random_crop(sample, be, cfg);
    case Mode::OneTurnE:
    case Mode::OneTurnEG:
    case Mode::VerdictOnly: return run_one_turn(sample, cfg.mode, be, cfg);
  }
  throw std::invalid_argument("unknown mode");
}

// ---- annotation ----

json annotation_to_json(const AnnotationRecord& r) {
  json j;
  j["id"] = r.id;
  j["label"] = std::string(model_io::to_string(r.label));
  j["explanation"] = r.explanation;
  j["boxes"] = boxes_to_json(r.boxes);
  j["filtered_boxes_removed"] = r.filtered_boxes_removed;
  j["grounding_warning"] = r.grounding_warning;
  j["failed"] = r.failed;
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

AnnotationRecord annotation_from_json(const json& j) {
  AnnotationRecord r;
  r.id = j.value("id", std::string{});
  if (j.contains("label")) r.label = verdict_field(j, "label");
  r.explanation = j.value("explanation", std::string{});
  if (j.contains("boxes")) r.boxes = boxes_from_json(j["boxes"], "\"boxes\"");
  r.filtered_boxes_removed = j.value("filtered_boxes_removed", 0);
  r.grounding_warning = j.value("grounding_warning", false);
  r.failed = j.value("failed", false);
  r.error = j.value("error", std::string{});
  return r;
}

AnnotationRecord annotate_sample(const SampleRecord& sample, backend::Backend& explainer,
                                 backend::Backend& grounder, const AnnotateConfig& cfg) {
  AnnotationRecord rec;
  rec.id = sample.id;
  rec.label = sample.label;

  imaging::RasterImage img = imaging::load_file(sample.image_path);
  backend::ImagePart image_part = png_part(img);

  // The explainer sees the known label; the grounder never does.
  backend::PromptVars evars;
  evars.image = image_part;
  evars.text["label_hint"] = std::string(model_io::to_string(sample.label));
  backend::ChatRequest ereq;
  ereq.messages = backend::render_prompt(cfg.prompts.annotate_explain, evars);
  ereq.temperature = cfg.explainer_temperature;
  ereq.max_tokens = explainer.config().max_tokens;
  ereq.sample_id = sample.id;
  ereq.stage = 1;
  backend::ChatResponse eresp = explainer.complete(ereq);
  rec.explanation = std::string(util::trim(eresp.text));

  backend::PromptVars gvars;
  gvars.image = image_part;
  gvars.text["explanation"] = rec.explanation;
  backend::ChatRequest greq;
  greq.messages = backend::render_prompt(cfg.prompts.annotate_ground, gvars);
  greq.temperature = 0.0;
  greq.max_tokens = grounder.config().max_tokens;
  greq.sample_id = sample.id;
  greq.stage = 2;
  backend::ChatResponse gresp = grounder.complete(greq);

  model_io::BoxExtraction extraction = model_io::extract_boxes(gresp.text);
  rec.grounding_warning = !extraction.block_found || extraction.malformed;

  std::vector<geometry::BBox> boxes = clamp_and_drop(extraction.boxes, img.dims());
  std::vector<geometry::BBox> kept =
      geometry::purify(boxes, img.dims(), cfg.purify_threshold);
  if (cfg.judge) {
    std::vector<geometry::BBox> passed;
    passed.reserve(kept.size());
    for (const auto& b : kept)
      if (!cfg.judge(sample, img, b)) passed.push_back(b);
    kept = std::move(passed);
  }
  rec.filtered_boxes_removed =
      static_cast<int>(extraction.boxes.size()) - static_cast<int>(kept.size());
  rec.boxes = std::move(kept);
  return rec;
}

// ---- batches ----

namespace {

template <typename Result, typename Fn>
std::vector<Result> parallel_ordered(size_t n, int concurrency, Fn&& fn) {
  std::vector<Result> results(n);
  if (n == 0) return results;
  const int workers = std::max(1, std::min<int>(concurrency, static_cast<int>(n)));
  std::atomic<size_t> next{0};
  auto work = [&] {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= n) return;
      results[i] = fn(i);
    }
  };
  if (workers == 1) {
    work();
    return results;
  }
  std::vector<std::thread> threads;
  threads.reserve(static_cast<size_t>(workers));
  for (int k = 0; k < workers; ++k) threads.emplace_back(work);
  for (auto& t : threads) t.join();
  return results;
}

}  // namespace

std::vector<InferenceResult> run_batch(std::span<const ManifestEntry> entries,
                                       backend::Backend& be, const PipelineConfig& cfg,
                                       util::Semaphore* shared_gate) {
  return parallel_ordered<InferenceResult>(
      entries.size(), cfg.concurrency, [&](size_t i) -> InferenceResult {
        const ManifestEntry& entry = entries[i];
        if (!entry.sample) {
          InferenceResult r;
          r.mode = cfg.mode;
          r.failed = true;
          r.error = "manifest line " + std::to_string(entry.line_no) + ": " + entry.error;
          return r;
        }
        std::optional<util::SemaphoreTicket> ticket;
        if (shared_gate) ticket.emplace(*shared_gate);
        try {
          return run_sample(*entry.sample, be, cfg);
        } catch (const std::exception& e) {
          InferenceResult r;
          r.id = entry.sample->id;
          r.mode = cfg.mode;
          r.failed = true;
          r.error = e.what();
          return r;
        }
      });
}

std::vector<AnnotationRecord> annotate_batch(std::span<const ManifestEntry> entries,
                                             backend::Backend& explainer,
                                             backend::Backend& grounder,
                                             const AnnotateConfig& cfg, int concurrency) {
  return parallel_ordered<AnnotationRecord>(
      entries.size(), concurrency, [&](size_t i) -> AnnotationRecord {
        const ManifestEntry& entry = entries[i];
        if (!entry.sample) {
          AnnotationRecord r;
          r.failed = true;
          r.error = "manifest line " + std::to_string(entry.line_no) + ": " + entry.error;
          return r;
        }
        try {
          return annotate_sample(*entry.sample, explainer, grounder, cfg);
        } catch (const std::exception& e) {
          AnnotationRecord r;
          r.id = entry.sample->id;
          r.label = entry.sample->label;
          r.failed = true;
          r.error = e.what();
          return r;
        }
      });
}

// ---- JSONL IO ----

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  return out;
}

}  // namespace

void write_results_jsonl(const std::string& path, const json& header,
                         std::span<const InferenceResult> results) {
  auto out = open_out(path);
  out << header.dump() << "\n";
  for (const auto& r : results) out << result_to_json(r).dump() << "\n";
  if (!out) throw std::runtime_error("short write: " + path);
}

LoadedResults load_results_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open results file: " + path);
  LoadedResults out;
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": not valid JSON");
    if (!saw_header && j.is_object() && j.contains("schema") && !j.contains("id")) {
      out.header = j;
      saw_header = true;
      continue;
    }
    out.results.push_back(result_from_json(j));
  }
  return out;
}

void write_annotations_jsonl(const std::string& path, const json& header,
                             std::span<const AnnotationRecord> records) {
  auto out = open_out(path);
  out << header.dump() << "\n";
  for (const auto& r : records) out << annotation_to_json(r).dump() << "\n";
  if (!out) throw std::runtime_error("short write: " + path);
}

}  // namespace zoomin::pipeline
