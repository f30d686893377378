#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "zoomin/geometry.hpp"

namespace zoomin::model_io {

enum class Verdict { Real, Generated };

std::string_view to_string(Verdict v);
/// Case-insensitive, trims surrounding whitespace; nullopt on anything else.
std::optional<Verdict> verdict_from_string(std::string_view s);

struct StageOneParse {
  Verdict verdict = Verdict::Real;
  std::vector<geometry::BBox> boxes;
  std::string explanation;
  /// A <boxes> block was present but was not a JSON list of 4-number arrays;
  /// boxes were treated as empty.
  bool malformed_boxes = false;

  friend bool operator==(const StageOneParse&, const StageOneParse&) = default;
};

struct StageTwoParse {
  Verdict verdict = Verdict::Real;
  std::string explanation;

  friend bool operator==(const StageTwoParse&, const StageTwoParse&) = default;
};

/// Grammar: docs/format.md. nullopt <=> no well-formed verdict tag.
std::optional<StageOneParse> parse_stage1(std::string_view completion);
std::optional<StageTwoParse> parse_stage2(std::string_view completion);

// Standalone extractors (total functions), used by the reward scorers.
std::optional<Verdict> extract_verdict(std::string_view text);

struct BoxExtraction {
  std::vector<geometry::BBox> boxes;
  bool malformed = false;    // <boxes> present but unusable
  bool block_found = false;  // some box block (tag or JSON array) was recognized
};
/// Reads the first <boxes>...</boxes> block, or failing that the first JSON
/// array of objects carrying a 4-number "bbox_2d" field.
BoxExtraction extract_boxes(std::string_view text);

/// First <explanation>...</explanation> body verbatim; without the tag pair,
/// the completion minus verdict/box spans, trimmed.
std::string extract_explanation(std::string_view text);

/// 1 iff the completion carries a well-formed verdict tag.
int format_reward(std::string_view completion);

struct MissingAnnotation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Canonical tagged completion for SFT targets; parse_stage1/parse_stage2
/// round-trip it losslessly. Stage 1 needs boxes and explanation, stage 2
/// needs the explanation. Throws MissingAnnotation otherwise.
std::string serialize_target(Verdict label,
                             const std::optional<std::vector<geometry::BBox>>& boxes,
                             const std::optional<std::string>& explanation,
                             int stage);

}  // namespace zoomin::model_io
