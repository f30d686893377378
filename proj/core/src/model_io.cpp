#include "zoomin/model_io.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "zoomin/util.hpp"

namespace zoomin::model_io {

using nlohmann::json;

std::string_view to_string(Verdict v) {
  return v == Verdict::Real ? "real" : "generated";
}

std::optional<Verdict> verdict_from_string(std::string_view s) {
  std::string_view t = util::trim(s);
  if (util::iequals_ascii(t, "real")) return Verdict::Real;
  if (util::iequals_ascii(t, "generated")) return Verdict::Generated;
  return std::nullopt;
}

namespace {

size_t ifind(std::string_view haystack, std::string_view needle, size_t from) {
  if (needle.empty() || from > haystack.size()) return std::string_view::npos;
  const size_t last = haystack.size() >= needle.size()
                          ? haystack.size() - needle.size()
                          : std::string_view::npos;
  for (size_t i = from; i <= last && last != std::string_view::npos; ++i) {
    if (util::iequals_ascii(haystack.substr(i, needle.size()), needle)) return i;
  }
  return std::string_view::npos;
}

struct TagBlock {
  size_t begin = 0;       // index of '<'
  size_t body_begin = 0;  // first char after the open tag
  size_t body_end = 0;    // index of "</"
  size_t end = 0;         // one past the close tag
};

std::optional<TagBlock> find_tag_block(std::string_view text, std::string_view tag,
                                       size_t from) {
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  size_t ob = ifind(text, open, from);
  if (ob == std::string_view::npos) return std::nullopt;
  size_t cb = ifind(text, close, ob + open.size());
  if (cb == std::string_view::npos) return std::nullopt;
  return TagBlock{ob, ob + open.size(), cb, cb + close.size()};
}

struct Span {
  size_t begin = 0;
  size_t end = 0;
};

struct VerdictHit {
  Verdict verdict;
  Span span;
};

// First verdict tag whose content is a valid verdict wins; tags with invalid
// content are skipped so they cannot shadow a later well-formed one.
std::optional<VerdictHit> find_verdict(std::string_view text) {
  size_t pos = 0;
  while (true) {
    auto block = find_tag_block(text, "verdict", pos);
    if (!block) return std::nullopt;
    auto v = verdict_from_string(text.substr(block->body_begin,
                                             block->body_end - block->body_begin));
    if (v) return VerdictHit{*v, {block->begin, block->end}};
    pos = block->begin + 1;
  }
}

std::optional<geometry::BBox> box_from_json_array(const json& arr) {
  if (!arr.is_array() || arr.size() != 4) return std::nullopt;
  int c[4];
  for (size_t i = 0; i < 4; ++i) {
    if (!arr[i].is_number()) return std::nullopt;
    c[i] = static_cast<int>(std::llround(arr[i].get<double>()));
  }
  return geometry::BBox{c[0], c[1], c[2], c[3]};
}

// Parses the canonical <boxes> body: a JSON list of 4-number arrays.
std::optional<std::vector<geometry::BBox>> parse_box_list(std::string_view body) {
  json j = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_array()) return std::nullopt;
  std::vector<geometry::BBox> out;
  out.reserve(j.size());
  for (const auto& e : j) {
    auto b = box_from_json_array(e);
    if (!b) return std::nullopt;
    out.push_back(*b);
  }
  return out;
}

// Locates the balanced JSON array starting at text[open] ('['), honoring
// string literals and escapes. Returns one past the closing bracket.
std::optional<size_t> balanced_array_end(std::string_view text, size_t open) {
  int depth = 0;
  bool in_string = false;
  for (size_t i = open; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (c == '\\')
        ++i;
      else if (c == '"')
        in_string = false;
      continue;
    }
    if (c == '"')
      in_string = true;
    else if (c == '[' || c == '{')
      ++depth;
    else if (c == ']' || c == '}') {
      --depth;
      if (depth == 0) return i + 1;
    }
  }
  return std::nullopt;
}

struct BoxScan {
  BoxExtraction extraction;
  std::optional<Span> span;
};

// Canonical <boxes> block first; otherwise the first JSON array carrying
// "bbox_2d" objects (the grounding-model style), or a bare empty array.
BoxScan scan_boxes(std::string_view text) {
  BoxScan out;
  if (auto block = find_tag_block(text, "boxes", 0)) {
    out.span = Span{block->begin, block->end};
    out.extraction.block_found = true;
    auto body = text.substr(block->body_begin, block->body_end - block->body_begin);
    if (auto boxes = parse_box_list(body)) {
      out.extraction.boxes = std::move(*boxes);
    } else {
      out.extraction.malformed = true;
    }
    return out;
  }

  size_t pos = 0;
  while ((pos = text.find('[', pos)) != std::string_view::npos) {
    auto end = balanced_array_end(text, pos);
    if (!end) {
      ++pos;
      continue;
    }
    json j = json::parse(text.substr(pos, *end - pos), nullptr, false);
    if (!j.is_discarded() && j.is_array()) {
      if (j.empty()) {
        out.span = Span{pos, *end};
        out.extraction.block_found = true;
        return out;
      }
      std::vector<geometry::BBox> boxes;
      for (const auto& e : j) {
        if (!e.is_object() || !e.contains("bbox_2d")) continue;
        if (auto b = box_from_json_array(e["bbox_2d"])) boxes.push_back(*b);
      }
      if (!boxes.empty()) {
        out.extraction.boxes = std::move(boxes);
        out.span = Span{pos, *end};
        out.extraction.block_found = true;
        return out;
      }
    }
    ++pos;
  }
  return out;
}

std::string remove_spans(std::string_view text, std::vector<Span> spans) {
  std::sort(spans.begin(), spans.end(),
            [](const Span& a, const Span& b) { return a.begin < b.begin; });
  std::string out;
  size_t cursor = 0;
  for (const Span& s : spans) {
    if (s.begin > cursor) out.append(text.substr(cursor, s.begin - cursor));
    cursor = std::max(cursor, s.end);
  }
  if (cursor < text.size()) out.append(text.substr(cursor));
  return std::string(util::trim(out));
}

std::string explanation_or_residual(std::string_view text,
                                    const std::optional<Span>& verdict_span,
                                    const std::optional<Span>& box_span) {
  if (auto block = find_tag_block(text, "explanation", 0)) {
    return std::string(
        text.substr(block->body_begin, block->body_end - block->body_begin));
  }
  std::vector<Span> spans;
  if (verdict_span) spans.push_back(*verdict_span);
  if (box_span) spans.push_back(*box_span);
  return remove_spans(text, std::move(spans));
}

constexpr std::string_view kReservedTags[] = {
    "<verdict>", "</verdict>", "<boxes>", "</boxes>", "<explanation>", "</explanation>",
};

void check_no_reserved_tags(const std::string& explanation) {
  for (std::string_view tag : kReservedTags) {
    if (ifind(explanation, tag, 0) != std::string_view::npos)
      throw std::invalid_argument("explanation contains reserved tag " + std::string(tag));
  }
}

}  // namespace

std::optional<Verdict> extract_verdict(std::string_view text) {
  auto hit = find_verdict(text);
  if (!hit) return std::nullopt;
  return hit->verdict;
}

BoxExtraction extract_boxes(std::string_view text) {
  return scan_boxes(text).extraction;
}

std::string extract_explanation(std::string_view text) {
  auto verdict = find_verdict(text);
  auto boxes = scan_boxes(text);
  std::optional<Span> vspan;
  if (verdict) vspan = verdict->span;
  return explanation_or_residual(text, vspan, boxes.span);
}

std::optional<StageOneParse> parse_stage1(std::string_view completion) {
  auto verdict = find_verdict(completion);
  if (!verdict) return std::nullopt;
  auto boxes = scan_boxes(completion);
  StageOneParse out;
  out.verdict = verdict->verdict;
  out.boxes = std::move(boxes.extraction.boxes);
  out.malformed_boxes = boxes.extraction.malformed;
  out.explanation = explanation_or_residual(completion, verdict->span, boxes.span);
  return out;
}

std::optional<StageTwoParse> parse_stage2(std::string_view completion) {
  auto verdict = find_verdict(completion);
  if (!verdict) return std::nullopt;
  auto boxes = scan_boxes(completion);  // ignored, but excluded from residual text
  StageTwoParse out;
  out.verdict = verdict->verdict;
  out.explanation = explanation_or_residual(completion, verdict->span, boxes.span);
  return out;
}

int format_reward(std::string_view completion) {
  return extract_verdict(completion) ? 1 : 0;
}

std::string serialize_target(Verdict label,
                             const std::optional<std::vector<geometry::BBox>>& boxes,
                             const std::optional<std::string>& explanation,
                             int stage) {
  if (stage != 1 && stage != 2)
    throw std::invalid_argument("stage must be 1 or 2");
  if (!explanation)
    throw MissingAnnotation("reference explanation required for stage targets");
  if (stage == 1 && !boxes)
    throw MissingAnnotation("reference boxes required for stage-1 targets");
  check_no_reserved_tags(*explanation);

  std::string out = "<verdict>";
  out += to_string(label);
  out += "</verdict>";
  if (stage == 1) {
    json arr = json::array();
    for (const auto& b : *boxes) arr.push_back({b.x1, b.y1, b.x2, b.y2});
    out += "<boxes>";
    out += arr.dump();
    out += "</boxes>";
  }
  out += "<explanation>";
  out += *explanation;
  out += "</explanation>";
  return out;
}

}  // namespace zoomin::model_io
