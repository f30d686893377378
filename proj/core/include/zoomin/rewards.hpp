#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "zoomin/geometry.hpp"
#include "zoomin/model_io.hpp"

namespace zoomin::rewards {

/// Per-stage reward components with their weights; total is exactly the
/// weighted sum. Components always land in [0,1].
struct RewardBreakdown {
  std::map<std::string, double> components;
  std::map<std::string, double> weights;
  double total = 0.0;
};

nlohmann::json breakdown_to_json(const RewardBreakdown& b);

struct Stage1Request {
  std::string completion;
  std::vector<geometry::BBox> reference_boxes;
  geometry::ImageDims dims{0, 0};
  std::map<std::string, double> weights;  // missing names default to 1.0
  /// Opt-in ablation: adds a "classification" component scored against label.
  bool dual_verdict = false;
  std::optional<model_io::Verdict> label;
};

struct Stage2Request {
  std::string completion;
  model_io::Verdict label = model_io::Verdict::Real;
  std::string reference_explanation;
  std::map<std::string, double> weights;
};

/// Components: "format" (verdict tag well-formed) and "iou" (mean best-match
/// overlap of the parsed-and-clamped boxes against the references). Total
/// function over arbitrary completion text.
RewardBreakdown score_stage1(const Stage1Request& req);

/// Components: "classification" (parsed verdict equals label; 0 when the
/// verdict is missing) and "bleu" (BLEU-2 of the extracted explanation
/// against the reference).
RewardBreakdown score_stage2(const Stage2Request& req);

/// Throw std::invalid_argument with a request-shape message (HTTP 400).
Stage1Request stage1_request_from_json(const nlohmann::json& j);
Stage2Request stage2_request_from_json(const nlohmann::json& j);

}  // namespace zoomin::rewards
