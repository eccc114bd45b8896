#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "racetrack/backends.hpp"
#include "racetrack/core.hpp"

namespace racetrack {

using NGram = std::vector<std::string>;

/// Multiset of the n-grams of one sequence.
struct NGramProfile {
  std::size_t n = 1;
  std::map<NGram, std::size_t> counts;
  std::size_t total = 0;  // number of n-gram positions
};

NGramProfile ngram_profile(const TokenSequence& seq, std::size_t n);

/// Sum over n-grams of min(count in a, count in b).
std::size_t clipped_overlap(const NGramProfile& a, const NGramProfile& b);

enum class BrevityPenaltyMode {
  PaperVerbatim,  // exp((1 - lr) / lc)
  Standard,       // exp(1 - lr / lc)
};

struct BleuConfig {
  std::size_t max_n = 4;
  std::vector<double> weights;  // empty means uniform 1/max_n
  BrevityPenaltyMode bp_mode = BrevityPenaltyMode::Standard;

  /// Throws InvalidArgument unless max_n >= 1 and the weights (if given) are
  /// max_n non-negative values summing to 1.
  void validate() const;
  std::vector<double> effective_weights() const;
};

struct RougeLConfig {
  double beta = 1.2;
};

/// token -> idf weight; tokens not in the table get default_weight.
class IdfTable {
 public:
  IdfTable() = default;

  /// One "token<TAB>weight" per line; blank lines are skipped.
  static IdfTable parse(std::istream& in);
  static IdfTable load(const std::string& path);

  void set(std::string token, double weight);
  double weight(const std::string& token) const;
  bool empty() const noexcept { return weights_.empty(); }
  double default_weight() const noexcept { return default_weight_; }
  void set_default_weight(double w);

 private:
  std::unordered_map<std::string, double> weights_;
  double default_weight_ = 1.0;
};

/// Clipped matches over candidate n-gram count; 0 when the candidate has no
/// n-grams.
double ngram_precision(const TokenSequence& candidate, const TokenSequence& reference, std::size_t n);

/// 1 when lc > lr; 0 when lc == 0; otherwise the mode's exponential.
double brevity_penalty(std::size_t lc, std::size_t lr, BrevityPenaltyMode mode);

struct BleuBreakdown {
  std::vector<double> precisions;  // p_1 .. p_N
  double brevity_penalty = 0.0;
  double score = 0.0;
};

/// BP * exp(sum W_n log p_n). Unsmoothed: any p_n == 0 gives 0.
BleuBreakdown bleu_breakdown(const TokenSequence& candidate, const TokenSequence& reference,
                             const BleuConfig& config = {});
double bleu_n(const TokenSequence& candidate, const TokenSequence& reference,
              const BleuConfig& config = {});

double unigram_f1(const TokenSequence& candidate, const TokenSequence& reference);

/// Clipped matches over reference n-gram count. ReferenceTooShort when the
/// reference has no n-grams.
double rouge_n(const TokenSequence& candidate, const TokenSequence& reference, std::size_t n);

std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b);

/// (1 + b^2) r p / (r + b^2 p) over the LCS. EmptyInput when either side is
/// empty.
double rouge_l(const TokenSequence& candidate, const TokenSequence& reference,
               const RougeLConfig& config = {});

struct BertScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Greedy matching over a precomputed similarity matrix with rows indexed by
/// reference tokens and columns by candidate tokens. Recall averages row
/// maxima weighted by reference_weights; precision averages column maxima
/// weighted by candidate_weights.
BertScore bertscore_from_similarity(const std::vector<std::vector<double>>& similarity,
                                    std::span<const double> reference_weights,
                                    std::span<const double> candidate_weights);

/// Embeds every token with `embedder` and scores by cosine similarity.
/// Uniform weights when `idf` is empty.
BertScore bertscore(const TokenSequence& candidate, const TokenSequence& reference,
                    Embedder& embedder, const IdfTable& idf = {});
double bertscore_f1(const TokenSequence& candidate, const TokenSequence& reference,
                    Embedder& embedder, const IdfTable& idf = {});

/// 0 when either vector is all zero. DimensionMismatch on unequal sizes.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

std::vector<double> default_histogram_edges();

struct SimilarityHistogram {
  std::vector<double> edges;
  std::vector<std::size_t> counts;  // counts[i] covers [edges[i], edges[i+1])
  std::vector<double> scores;
  double mean = 0.0;
};

/// Bins scores; a score on an interior edge falls in the upper bin, the final
/// edge is inclusive and out-of-range scores are clamped to the end bins.
SimilarityHistogram histogram_of(std::vector<double> scores,
                                 const std::vector<double>& edges = default_histogram_edges());

/// Cosine similarity of each embedded pair, binned.
SimilarityHistogram similarity_histogram(
    const std::vector<std::pair<std::string, std::string>>& pairs, Embedder& embedder,
    const std::vector<double>& edges = default_histogram_edges());

struct MetricReport {
  double bleu4 = 0.0;
  double f1 = 0.0;
  double rouge_l = 0.0;
  double rouge_1 = 0.0;
  double rouge_2 = 0.0;
  double bert_score = 0.0;

  bool operator==(const MetricReport&) const = default;
};

struct MetricConfig {
  TokenScheme scheme = TokenScheme::CharCJKWordLatin;
  BleuConfig bleu;
  RougeLConfig rouge_l;
  IdfTable idf;
};

/// All report metrics for one candidate/reference pair. Rouge-n for a
/// reference shorter than n scores 0 instead of failing.
MetricReport evaluate_pair(std::string_view candidate, std::string_view reference,
                           const MetricConfig& config, Embedder& token_embedder);

/// Arithmetic mean of each field. EmptyInput for an empty list.
MetricReport corpus_mean(std::span<const MetricReport> reports);

}  // namespace racetrack
