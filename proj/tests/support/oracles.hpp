#pragma once

// Independent reference implementations used to check the library. They are
// written from the metric definitions with plain loops and no shared code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using Tokens = std::vector<std::string>;

inline std::vector<Tokens> grams_of(const Tokens& s, std::size_t n) {
  std::vector<Tokens> out;
  if (n == 0 || s.size() < n) return out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) out.emplace_back(s.begin() + i, s.begin() + i + n);
  return out;
}

inline std::size_t occurrences(const std::vector<Tokens>& grams, const Tokens& g) {
  std::size_t c = 0;
  for (const auto& x : grams)
    if (x == g) ++c;
  return c;
}

/// Sum over distinct candidate n-grams of min(count in cand, count in ref).
inline std::size_t clipped_matches(const Tokens& cand, const Tokens& ref, std::size_t n) {
  const auto cg = grams_of(cand, n);
  const auto rg = grams_of(ref, n);
  std::vector<Tokens> seen;
  std::size_t total = 0;
  for (const auto& g : cg) {
    if (std::find(seen.begin(), seen.end(), g) != seen.end()) continue;
    seen.push_back(g);
    total += std::min(occurrences(cg, g), occurrences(rg, g));
  }
  return total;
}

inline double precision(const Tokens& cand, const Tokens& ref, std::size_t n) {
  const auto denom = grams_of(cand, n).size();
  return denom == 0 ? 0.0 : static_cast<double>(clipped_matches(cand, ref, n)) / static_cast<double>(denom);
}

/// Returns -1 when the reference has no n-grams.
inline double rouge_n(const Tokens& cand, const Tokens& ref, std::size_t n) {
  const auto denom = grams_of(ref, n).size();
  if (denom == 0) return -1.0;
  return static_cast<double>(clipped_matches(cand, ref, n)) / static_cast<double>(denom);
}

inline double unigram_f1(const Tokens& cand, const Tokens& ref) {
  const double m = static_cast<double>(clipped_matches(cand, ref, 1));
  const double p = cand.empty() ? 0.0 : m / static_cast<double>(cand.size());
  const double r = ref.empty() ? 0.0 : m / static_cast<double>(ref.size());
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

/// Length of the longest common subsequence, by enumerating every
/// subsequence of `a` and testing it against `b`. Exponential; keep a short.
inline std::size_t lcs_exhaustive(const Tokens& a, const Tokens& b) {
  std::size_t best = 0;
  const std::size_t subsets = std::size_t{1} << a.size();
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    Tokens sub;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (mask & (std::size_t{1} << i)) sub.push_back(a[i]);
    if (sub.size() <= best) continue;
    std::size_t j = 0;
    for (const auto& t : b)
      if (j < sub.size() && sub[j] == t) ++j;
    if (j == sub.size()) best = sub.size();
  }
  return best;
}

inline Tokens random_tokens(std::mt19937_64& rng, std::size_t max_len, int vocab, std::size_t min_len = 0) {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<int> word(0, vocab - 1);
  Tokens t(len(rng));
  for (auto& s : t) s = "w" + std::to_string(word(rng));
  return t;
}

/// Plain left-to-right mean.
inline double mean(const std::vector<double>& xs) {
  long double s = 0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : static_cast<double>(s / xs.size());
}

}  // namespace oracle
