#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "zoomin/model_io.hpp"

namespace zoomin::textmetrics {

/// Normalized word tokens: no whitespace inside a token, deterministic.
using TokenSequence = std::vector<std::string>;

/// NFC-normalize, lowercase (root locale), split on Unicode whitespace, strip
/// leading/trailing punctuation per token (interior hyphens/apostrophes kept).
/// Invalid UTF-8 bytes are substituted, never rejected.
TokenSequence tokenize(std::string_view text);

/// Uniform-weight BLEU-n: clipped k-gram precisions for k=1..n, geometric
/// mean, brevity penalty exp(1 - r/c) when c < r. Each precision is floored
/// at 1e-9 so the score stays total; empty candidate scores 0.
double bleu_n(const TokenSequence& candidate, const TokenSequence& reference, int n);

/// Sequence-level LCS F1 (beta = 1); 0 when either side is empty.
double rouge_l(const TokenSequence& candidate, const TokenSequence& reference);

/// 1 iff predicted equals label.
int classification_reward(model_io::Verdict predicted, model_io::Verdict label);

}  // namespace zoomin::textmetrics
