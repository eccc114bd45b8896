#include "racetrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace racetrack {

NGramProfile ngram_profile(const TokenSequence& seq, std::size_t n) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "n-gram order must be at least 1");
  NGramProfile p;
  p.n = n;
  if (seq.size() < n) return p;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    NGram g(seq.tokens.begin() + static_cast<std::ptrdiff_t>(i),
            seq.tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
    ++p.counts[std::move(g)];
    ++p.total;
  }
  return p;
}

std::size_t clipped_overlap(const NGramProfile& a, const NGramProfile& b) {
  std::size_t overlap = 0;
  for (const auto& [gram, count] : a.counts) {
    if (auto it = b.counts.find(gram); it != b.counts.end()) overlap += std::min(count, it->second);
  }
  return overlap;
}

void BleuConfig::validate() const {
  if (max_n < 1) throw Error(ErrorCode::InvalidArgument, "BLEU order must be at least 1");
  if (weights.empty()) return;
  if (weights.size() != max_n)
    throw Error(ErrorCode::InvalidArgument, "BLEU needs one weight per n-gram order");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw Error(ErrorCode::InvalidArgument, "BLEU weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::InvalidArgument, "BLEU weights must sum to 1");
}

std::vector<double> BleuConfig::effective_weights() const {
  if (!weights.empty()) return weights;
  return std::vector<double>(max_n, 1.0 / static_cast<double>(max_n));
}

IdfTable IdfTable::parse(std::istream& in) {
  IdfTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error(ErrorCode::ParseError, "idf line " + std::to_string(line_no) + " has no tab");
    double w = 0.0;
    try {
      std::size_t used = 0;
      w = std::stod(line.substr(tab + 1), &used);
      if (used != line.size() - tab - 1) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError, "idf line " + std::to_string(line_no) + " has a bad weight");
    }
    if (!std::isfinite(w) || w < 0.0)
      throw Error(ErrorCode::ParseError,
                  "idf line " + std::to_string(line_no) + " weight must be finite and >= 0");
    table.set(line.substr(0, tab), w);
  }
  return table;
}

IdfTable IdfTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open idf table " + path);
  return parse(in);
}

void IdfTable::set(std::string token, double weight) {
  if (!std::isfinite(weight) || weight < 0.0)
    throw Error(ErrorCode::InvalidArgument, "idf weight must be finite and >= 0");
  weights_[std::move(token)] = weight;
}

double IdfTable::weight(const std::string& token) const {
  if (auto it = weights_.find(token); it != weights_.end()) return it->second;
  return default_weight_;
}

void IdfTable::set_default_weight(double w) {
  if (!std::isfinite(w) || w < 0.0)
    throw Error(ErrorCode::InvalidArgument, "idf weight must be finite and >= 0");
  default_weight_ = w;
}

// ---------------------------------------------------------------------------

double ngram_precision(const TokenSequence& candidate, const TokenSequence& reference, std::size_t n) {
  const auto cand = ngram_profile(candidate, n);
  if (cand.total == 0) return 0.0;
  const auto ref = ngram_profile(reference, n);
  return static_cast<double>(clipped_overlap(cand, ref)) / static_cast<double>(cand.total);
}

double brevity_penalty(std::size_t lc, std::size_t lr, BrevityPenaltyMode mode) {
  if (lc > lr) return 1.0;
  if (lc == 0) return 0.0;
  const auto c = static_cast<double>(lc);
  const auto r = static_cast<double>(lr);
  if (mode == BrevityPenaltyMode::PaperVerbatim) return std::exp((1.0 - r) / c);
  return std::exp(1.0 - r / c);
}

BleuBreakdown bleu_breakdown(const TokenSequence& candidate, const TokenSequence& reference,
                             const BleuConfig& config) {
  config.validate();
  const auto weights = config.effective_weights();
  BleuBreakdown b;
  b.brevity_penalty = brevity_penalty(candidate.size(), reference.size(), config.bp_mode);
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 1; n <= config.max_n; ++n) {
    const double p = ngram_precision(candidate, reference, n);
    b.precisions.push_back(p);
    if (weights[n - 1] == 0.0) continue;
    if (p == 0.0) zero = true;
    else log_sum += weights[n - 1] * std::log(p);
  }
  b.score = zero ? 0.0 : b.brevity_penalty * std::exp(log_sum);
  return b;
}

double bleu_n(const TokenSequence& candidate, const TokenSequence& reference, const BleuConfig& config) {
  return bleu_breakdown(candidate, reference, config).score;
}

double unigram_f1(const TokenSequence& candidate, const TokenSequence& reference) {
  const auto cand = ngram_profile(candidate, 1);
  const auto ref = ngram_profile(reference, 1);
  const auto overlap = static_cast<double>(clipped_overlap(cand, ref));
  const double p = cand.total ? overlap / static_cast<double>(cand.total) : 0.0;
  const double r = ref.total ? overlap / static_cast<double>(ref.total) : 0.0;
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

double rouge_n(const TokenSequence& candidate, const TokenSequence& reference, std::size_t n) {
  const auto ref = ngram_profile(reference, n);
  if (ref.total == 0)
    throw Error(ErrorCode::ReferenceTooShort,
                "reference has no " + std::to_string(n) + "-grams");
  const auto cand = ngram_profile(candidate, n);
  return static_cast<double>(clipped_overlap(cand, ref)) / static_cast<double>(ref.total);
}

std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b) {
  // Two-row DP over b.
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a.tokens[i - 1] == b.tokens[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const TokenSequence& candidate, const TokenSequence& reference,
               const RougeLConfig& config) {
  if (candidate.empty() || reference.empty())
    throw Error(ErrorCode::EmptyInput, "Rouge-L needs non-empty candidate and reference");
  if (!(config.beta > 0.0)) throw Error(ErrorCode::InvalidArgument, "Rouge-L beta must be positive");
  const auto lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(candidate.size());
  const double r = lcs / static_cast<double>(reference.size());
  const double b2 = config.beta * config.beta;
  return (1.0 + b2) * r * p / (r + b2 * p);
}

// ---------------------------------------------------------------------------

namespace {

double weighted_mean_of_maxima(const std::vector<double>& maxima, std::span<const double> weights) {
  double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  double acc = 0.0;
  if (wsum > 0.0) {
    for (std::size_t i = 0; i < maxima.size(); ++i) acc += weights[i] * maxima[i];
    return acc / wsum;
  }
  // All weights zero: fall back to a plain mean.
  for (double m : maxima) acc += m;
  return acc / static_cast<double>(maxima.size());
}

}  // namespace

BertScore bertscore_from_similarity(const std::vector<std::vector<double>>& similarity,
                                    std::span<const double> reference_weights,
                                    std::span<const double> candidate_weights) {
  const auto rows = similarity.size();
  if (rows == 0 || similarity.front().empty())
    throw Error(ErrorCode::EmptyInput, "Bert-Score needs non-empty candidate and reference");
  const auto cols = similarity.front().size();
  for (const auto& row : similarity)
    if (row.size() != cols) throw Error(ErrorCode::DimensionMismatch, "ragged similarity matrix");
  if (reference_weights.size() != rows || candidate_weights.size() != cols)
    throw Error(ErrorCode::DimensionMismatch, "weights do not match the similarity matrix");

  std::vector<double> row_max(rows), col_max(cols, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < rows; ++i) {
    row_max[i] = *std::max_element(similarity[i].begin(), similarity[i].end());
    for (std::size_t j = 0; j < cols; ++j) col_max[j] = std::max(col_max[j], similarity[i][j]);
  }
  BertScore s;
  s.recall = weighted_mean_of_maxima(row_max, reference_weights);
  s.precision = weighted_mean_of_maxima(col_max, candidate_weights);
  s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

BertScore bertscore(const TokenSequence& candidate, const TokenSequence& reference,
                    Embedder& embedder, const IdfTable& idf) {
  if (candidate.empty() || reference.empty())
    throw Error(ErrorCode::EmptyInput, "Bert-Score needs non-empty candidate and reference");

  std::unordered_map<std::string, EmbeddingVector> cache;
  auto vec = [&](const std::string& token) -> const EmbeddingVector& {
    auto it = cache.find(token);
    if (it == cache.end()) it = cache.emplace(token, embedder.embed(token)).first;
    return it->second;
  };

  std::vector<std::vector<double>> sim(reference.size(), std::vector<double>(candidate.size()));
  for (std::size_t i = 0; i < reference.size(); ++i)
    for (std::size_t j = 0; j < candidate.size(); ++j)
      sim[i][j] = cosine_similarity(vec(reference.tokens[i]), vec(candidate.tokens[j]));

  auto weights_for = [&](const TokenSequence& seq) {
    std::vector<double> w;
    w.reserve(seq.size());
    for (const auto& t : seq.tokens) w.push_back(idf.empty() ? 1.0 : idf.weight(t));
    return w;
  };
  const auto rw = weights_for(reference);
  const auto cw = weights_for(candidate);
  return bertscore_from_similarity(sim, rw, cw);
}

double bertscore_f1(const TokenSequence& candidate, const TokenSequence& reference,
                    Embedder& embedder, const IdfTable& idf) {
  return bertscore(candidate, reference, embedder, idf).f1;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension())
    throw Error(ErrorCode::DimensionMismatch, "cannot compare embeddings of dimension " +
                                                  std::to_string(a.dimension()) + " and " +
                                                  std::to_string(b.dimension()));
  double dot = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.dimension(); ++i) {
    dot += a.components[i] * b.components[i];
    aa += a.components[i] * a.components[i];
    bb += b.components[i] * b.components[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(aa * bb), -1.0, 1.0);
}

std::vector<double> default_histogram_edges() {
  std::vector<double> edges;
  for (int i = 0; i <= 10; ++i) edges.push_back(static_cast<double>(i) / 10.0);
  return edges;
}

SimilarityHistogram histogram_of(std::vector<double> scores, const std::vector<double>& edges) {
  if (scores.empty()) throw Error(ErrorCode::EmptyInput, "no similarity scores to bin");
  if (edges.size() < 2) throw Error(ErrorCode::InvalidArgument, "histogram needs at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1]))
      throw Error(ErrorCode::InvalidArgument, "histogram edges must be strictly increasing");
  if (edges.front() > 0.0 || edges.back() < 1.0)
    throw Error(ErrorCode::InvalidArgument, "histogram edges must cover [0,1]");

  SimilarityHistogram h;
  h.edges = edges;
  h.counts.assign(edges.size() - 1, 0);
  double sum = 0.0;
  for (double s : scores) {
    sum += s;
    // First edge strictly greater than s; the bin is the one just before it.
    const auto it = std::upper_bound(edges.begin(), edges.end(), s);
    auto bin = static_cast<std::ptrdiff_t>(it - edges.begin()) - 1;
    bin = std::clamp<std::ptrdiff_t>(bin, 0, static_cast<std::ptrdiff_t>(h.counts.size()) - 1);
    ++h.counts[static_cast<std::size_t>(bin)];
  }
  h.mean = sum / static_cast<double>(scores.size());
  h.scores = std::move(scores);
  return h;
}

SimilarityHistogram similarity_histogram(
    const std::vector<std::pair<std::string, std::string>>& pairs, Embedder& embedder,
    const std::vector<double>& edges) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyInput, "no text pairs to compare");
  std::vector<double> scores;
  scores.reserve(pairs.size());
  for (const auto& [a, b] : pairs) scores.push_back(cosine_similarity(embedder.embed(a), embedder.embed(b)));
  return histogram_of(std::move(scores), edges);
}

// ---------------------------------------------------------------------------

MetricReport evaluate_pair(std::string_view candidate, std::string_view reference,
                           const MetricConfig& config, Embedder& token_embedder) {
  const auto cand = tokenize(candidate, config.scheme);
  const auto ref = tokenize(reference, config.scheme);
  auto rouge_or_zero = [&](std::size_t n) {
    return ref.size() < n ? 0.0 : rouge_n(cand, ref, n);
  };
  BleuConfig bleu4 = config.bleu;
  bleu4.max_n = 4;
  if (bleu4.weights.size() != 4) bleu4.weights.clear();

  MetricReport r;
  r.bleu4 = bleu_n(cand, ref, bleu4);
  r.f1 = unigram_f1(cand, ref);
  r.rouge_1 = rouge_or_zero(1);
  r.rouge_2 = rouge_or_zero(2);
  r.rouge_l = cand.empty() || ref.empty() ? 0.0 : rouge_l(cand, ref, config.rouge_l);
  r.bert_score = cand.empty() || ref.empty() ? 0.0 : bertscore_f1(cand, ref, token_embedder, config.idf);
  return r;
}

MetricReport corpus_mean(std::span<const MetricReport> reports) {
  if (reports.empty()) throw Error(ErrorCode::EmptyInput, "no reports to average");
  MetricReport m;
  for (const auto& r : reports) {
    m.bleu4 += r.bleu4;
    m.f1 += r.f1;
    m.rouge_l += r.rouge_l;
    m.rouge_1 += r.rouge_1;
    m.rouge_2 += r.rouge_2;
    m.bert_score += r.bert_score;
  }
  const auto n = static_cast<double>(reports.size());
  m.bleu4 /= n;
  m.f1 /= n;
  m.rouge_l /= n;
  m.rouge_1 /= n;
  m.rouge_2 /= n;
  m.bert_score /= n;
  return m;
}

}  // namespace racetrack
