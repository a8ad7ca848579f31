#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "miaudit/data_model.hpp"

namespace miaudit {

// ---------------------------------------------------------------------------
// Mode-A → Mode-B conversion
// ---------------------------------------------------------------------------

// Rényi entropy of order α in nats for a log-probability vector:
// H_α = ln(Σ pᵢ^α)/(1−α), and the Shannon entropy −Σ pᵢ ln pᵢ at α = 1.
double renyi_entropy(std::span<const double> logprobs, double alpha);

// Requires logsumexp(logprobs) within 1e-6 of 0 (kNormalization otherwise)
// and realized_index < V (kIndex otherwise).
TokenStat summarize_distribution(std::span<const double> logprobs,
                                 std::optional<std::size_t> realized_index,
                                 std::span<const double> alphas);

// ---------------------------------------------------------------------------
// Scores (higher = more member-like)
// ---------------------------------------------------------------------------

enum class MethodFamily { kPerplexity, kMinK, kMaxRenyi };

struct MethodDescriptor {
  MethodFamily family = MethodFamily::kPerplexity;
  double k_percent = 0.0;
  double alpha = 0.0;

  bool needs_logp() const { return family != MethodFamily::kMaxRenyi; }
  friend bool operator==(const MethodDescriptor&, const MethodDescriptor&) = default;
};

// Grammar: `ppl`, `mink:K`, `renyi:aA:kK`.
MethodDescriptor parse_method(std::string_view text);
std::string to_string(const MethodDescriptor& m);
// Table-style label, e.g. "Min-10%" or "Max Rényi 0% (α=0.5)".
std::string display_name(const MethodDescriptor& m);

// The ten attack configurations evaluated by default.
std::vector<MethodDescriptor> default_methods();

// Number of tokens kept by a K% selection: max(1, floor(T·k/100)).
std::size_t selection_count(std::size_t tokens, double k_percent);

double perplexity_score(std::span<const TokenStat> tokens);
double min_k_score(std::span<const TokenStat> tokens, double k_percent);
// `alpha_index` indexes TokenStat::entropies.
double max_renyi_score(std::span<const TokenStat> tokens, std::size_t alpha_index,
                       double k_percent);

// Score one token list; looks α up in `alphas`.
double score(const MethodDescriptor& method, std::span<const TokenStat> tokens,
             std::span<const double> alphas);

int decide(double score, double threshold);

// ---------------------------------------------------------------------------
// Grid evaluation
// ---------------------------------------------------------------------------

struct GridCell {
  bool applicable = false;
  double auroc = 0.0;
  double tpr05 = 0.0;
};

struct AttackGrid {
  std::vector<MethodDescriptor> methods;
  std::vector<SliceId> slices;
  std::vector<std::vector<GridCell>> cells;  // [method][slice]

  const GridCell& at(std::size_t m, std::size_t s) const { return cells[m][s]; }
  std::size_t inapplicable_count() const;
};

AttackGrid evaluate_grid(const TokenRecordSet& records, std::span<const MethodDescriptor> methods,
                         std::span<const SliceId> slices, std::size_t threads = 1);

}  // namespace miaudit
