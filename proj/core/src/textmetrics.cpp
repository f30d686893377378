#include "zoomin/textmetrics.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>

#include <unicode/uchar.h>
#include <unicode/unorm2.h>
#include <unicode/ustring.h>
#include <unicode/utf16.h>

namespace zoomin::textmetrics {

namespace {

constexpr double kPrecisionFloor = 1e-9;

std::u16string utf8_to_utf16(std::string_view text) {
  std::u16string out;
  if (text.empty()) return out;
  out.resize(text.size());  // UTF-16 units never exceed UTF-8 bytes
  UErrorCode err = U_ZERO_ERROR;
  int32_t written = 0;
  u_strFromUTF8WithSub(out.data(), static_cast<int32_t>(out.size()), &written,
                       text.data(), static_cast<int32_t>(text.size()), 0xFFFD,
                       nullptr, &err);
  if (U_FAILURE(err)) return {};
  out.resize(static_cast<size_t>(written));
  return out;
}

std::u16string nfc(const std::u16string& in) {
  UErrorCode err = U_ZERO_ERROR;
  const UNormalizer2* norm = unorm2_getNFCInstance(&err);
  if (U_FAILURE(err)) return in;
  std::u16string out;
  out.resize(in.size() + 16);
  int32_t written = unorm2_normalize(norm, in.data(), static_cast<int32_t>(in.size()),
                                     out.data(), static_cast<int32_t>(out.size()), &err);
  if (err == U_BUFFER_OVERFLOW_ERROR) {
    err = U_ZERO_ERROR;
    out.resize(static_cast<size_t>(written));
    written = unorm2_normalize(norm, in.data(), static_cast<int32_t>(in.size()),
                               out.data(), static_cast<int32_t>(out.size()), &err);
  }
  if (U_FAILURE(err)) return in;
  out.resize(static_cast<size_t>(written));
  return out;
}

std::u16string lowercase(const std::u16string& in) {
  UErrorCode err = U_ZERO_ERROR;
  std::u16string out;
  out.resize(in.size() + 16);
  int32_t written = u_strToLower(out.data(), static_cast<int32_t>(out.size()),
                                 in.data(), static_cast<int32_t>(in.size()), "", &err);
  if (err == U_BUFFER_OVERFLOW_ERROR) {
    err = U_ZERO_ERROR;
    out.resize(static_cast<size_t>(written));
    written = u_strToLower(out.data(), static_cast<int32_t>(out.size()), in.data(),
                           static_cast<int32_t>(in.size()), "", &err);
  }
  if (U_FAILURE(err)) return in;
  out.resize(static_cast<size_t>(written));
  return out;
}

void append_utf8(std::string& out, UChar32 cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

}  // namespace

TokenSequence tokenize(std::string_view text) {
  const std::u16string normalized = lowercase(nfc(utf8_to_utf16(text)));

  std::vector<std::vector<UChar32>> raw;
  std::vector<UChar32> current;
  int32_t i = 0;
  const int32_t n = static_cast<int32_t>(normalized.size());
  while (i < n) {
    UChar32 cp;
    U16_NEXT(normalized.data(), i, n, cp);
    if (u_isUWhiteSpace(cp)) {
      if (!current.empty()) raw.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(cp);
    }
  }
  if (!current.empty()) raw.push_back(std::move(current));

  TokenSequence tokens;
  tokens.reserve(raw.size());
  for (auto& cps : raw) {
    size_t b = 0, e = cps.size();
    while (b < e && u_ispunct(cps[b])) ++b;
    while (e > b && u_ispunct(cps[e - 1])) --e;
    if (b == e) continue;
    std::string tok;
    for (size_t k = b; k < e; ++k) append_utf8(tok, cps[k]);
    tokens.push_back(std::move(tok));
  }
  return tokens;
}

double bleu_n(const TokenSequence& candidate, const TokenSequence& reference, int n) {
  if (n < 1) throw std::invalid_argument("bleu_n: n must be >= 1");
  if (candidate.empty()) return 0.0;

  const size_t c = candidate.size();
  const size_t r = reference.size();
  const double bp = c >= r ? 1.0
                           : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));

  auto gram_at = [](const TokenSequence& seq, size_t pos, int k) {
    std::string g;
    for (int j = 0; j < k; ++j) {
      if (j) g.push_back('\n');  // tokens never contain whitespace
      g += seq[pos + j];
    }
    return g;
  };

  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    const size_t ku = static_cast<size_t>(k);
    std::int64_t total = c >= ku ? static_cast<std::int64_t>(c - ku + 1) : 0;
    std::int64_t clipped = 0;
    if (total > 0 && r >= ku) {
      std::unordered_map<std::string, std::int64_t> ref_counts;
      for (size_t pos = 0; pos + ku <= r; ++pos) ++ref_counts[gram_at(reference, pos, k)];
      std::unordered_map<std::string, std::int64_t> cand_counts;
      for (size_t pos = 0; pos + ku <= c; ++pos) ++cand_counts[gram_at(candidate, pos, k)];
      for (const auto& [gram, count] : cand_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) clipped += std::min(count, it->second);
      }
    }
    double pk = total > 0 ? static_cast<double>(clipped) / static_cast<double>(total) : 0.0;
    pk = std::max(pk, kPrecisionFloor);
    log_sum += std::log(pk);
  }
  return bp * std::exp(log_sum / n);
}

double rouge_l(const TokenSequence& candidate, const TokenSequence& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const size_t n = candidate.size();
  const size_t m = reference.size();
  std::vector<std::int32_t> prev(m + 1, 0), cur(m + 1, 0);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      if (candidate[i - 1] == reference[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const double lcs = prev[m];
  if (lcs == 0.0) return 0.0;
  const double precision = lcs / static_cast<double>(n);
  const double recall = lcs / static_cast<double>(m);
  return 2.0 * precision * recall / (precision + recall);
}

int classification_reward(model_io::Verdict predicted, model_io::Verdict label) {
  return predicted == label ? 1 : 0;
}

}  // namespace zoomin::textmetrics
