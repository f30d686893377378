#include "zoomin/rewards.hpp"

#include "zoomin/textmetrics.hpp"

namespace zoomin::rewards {

using nlohmann::json;

namespace {

RewardBreakdown finalize(std::map<std::string, double> components,
                         const std::map<std::string, double>& requested_weights) {
  RewardBreakdown out;
  out.components = std::move(components);
  for (const auto& [name, value] : out.components) {
    auto it = requested_weights.find(name);
    const double w = it != requested_weights.end() ? it->second : 1.0;
    out.weights[name] = w;
    out.total += w * value;
  }
  return out;
}

std::vector<geometry::BBox> clamp_predicted(const std::vector<geometry::BBox>& raw,
                                            const geometry::ImageDims& dims) {
  std::vector<geometry::BBox> out;
  out.reserve(raw.size());
  for (const auto& b : raw)
    if (auto c = geometry::clamp_box(b, dims)) out.push_back(*c);
  return out;
}

}  // namespace

json breakdown_to_json(const RewardBreakdown& b) {
  json j;
  j["components"] = b.components;
  j["weights"] = b.weights;
  j["total"] = b.total;
  return j;
}

RewardBreakdown score_stage1(const Stage1Request& req) {
  std::map<std::string, double> components;
  components["format"] = static_cast<double>(model_io::format_reward(req.completion));

  auto extraction = model_io::extract_boxes(req.completion);
  auto predicted = clamp_predicted(extraction.boxes, req.dims);
  components["iou"] = geometry::iou_reward(predicted, req.reference_boxes);

  if (req.dual_verdict && req.label) {
    auto v = model_io::extract_verdict(req.completion);
    components["classification"] = (v && *v == *req.label) ? 1.0 : 0.0;
  }
  return finalize(std::move(components), req.weights);
}

RewardBreakdown score_stage2(const Stage2Request& req) {
  std::map<std::string, double> components;
  auto v = model_io::extract_verdict(req.completion);
  components["classification"] = (v && *v == req.label) ? 1.0 : 0.0;

  auto candidate = textmetrics::tokenize(model_io::extract_explanation(req.completion));
  auto reference = textmetrics::tokenize(req.reference_explanation);
  components["bleu"] = textmetrics::bleu_n(candidate, reference, 2);
  return finalize(std::move(components), req.weights);
}

namespace {

std::map<std::string, double> weights_from_json(const json& j) {
  std::map<std::string, double> out;
  if (!j.contains("weights")) return out;
  if (!j["weights"].is_object())
    throw std::invalid_argument("\"weights\" must be an object of name -> number");
  for (const auto& [name, value] : j["weights"].items()) {
    if (!value.is_number())
      throw std::invalid_argument("weight \"" + name + "\" must be a number");
    out[name] = value.get<double>();
  }
  return out;
}

std::string completion_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("request must be a JSON object");
  if (!j.contains("completion") || !j["completion"].is_string())
    throw std::invalid_argument("request needs a string \"completion\"");
  return j["completion"].get<std::string>();
}

model_io::Verdict label_from_json(const json& j) {
  if (!j.contains("label") || !j["label"].is_string())
    throw std::invalid_argument("request needs \"label\": \"real\"|\"generated\"");
  auto v = model_io::verdict_from_string(j["label"].get<std::string>());
  if (!v) throw std::invalid_argument("\"label\" must be real|generated");
  return *v;
}

}  // namespace

Stage1Request stage1_request_from_json(const json& j) {
  Stage1Request req;
  req.completion = completion_from_json(j);
  if (!j.contains("reference_boxes") || !j["reference_boxes"].is_array())
    throw std::invalid_argument("request needs \"reference_boxes\": [[x1,y1,x2,y2],...]");
  for (const auto& e : j["reference_boxes"]) {
    if (!e.is_array() || e.size() != 4)
      throw std::invalid_argument("\"reference_boxes\" entries must be [x1,y1,x2,y2]");
    for (const auto& v : e)
      if (!v.is_number())
        throw std::invalid_argument("\"reference_boxes\" coordinates must be numbers");
    req.reference_boxes.push_back(
        geometry::BBox{e[0].get<int>(), e[1].get<int>(), e[2].get<int>(), e[3].get<int>()});
  }
  if (!j.contains("image_dims") || !j["image_dims"].is_array() ||
      j["image_dims"].size() != 2 || !j["image_dims"][0].is_number_integer() ||
      !j["image_dims"][1].is_number_integer())
    throw std::invalid_argument("request needs \"image_dims\": [width, height]");
  req.dims = {j["image_dims"][0].get<int>(), j["image_dims"][1].get<int>()};
  if (req.dims.width < 1 || req.dims.height < 1)
    throw std::invalid_argument("\"image_dims\" must be positive");
  req.weights = weights_from_json(j);
  if (j.contains("dual_verdict")) {
    if (!j["dual_verdict"].is_boolean())
      throw std::invalid_argument("\"dual_verdict\" must be a boolean");
    req.dual_verdict = j["dual_verdict"].get<bool>();
  }
  if (req.dual_verdict) req.label = label_from_json(j);
  return req;
}

Stage2Request stage2_request_from_json(const json& j) {
  Stage2Request req;
  req.completion = completion_from_json(j);
  req.label = label_from_json(j);
  if (!j.contains("reference_explanation") || !j["reference_explanation"].is_string())
    throw std::invalid_argument("request needs a string \"reference_explanation\"");
  req.reference_explanation = j["reference_explanation"].get<std::string>();
  req.weights = weights_from_json(j);
  return req;
}

}  // namespace zoomin::rewards
