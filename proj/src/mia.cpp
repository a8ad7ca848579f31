#include "miaudit/mia.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

#include "miaudit/error.hpp"
#include "miaudit/metrics.hpp"
#include "miaudit/parallel.hpp"

namespace miaudit {

namespace {

constexpr double kNormalizationTol = 1e-6;

double logsumexp(std::span<const double> v, double scale = 1.0) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, scale * x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(scale * x - m);
  return m + std::log(s);
}

double parse_number(std::string_view text, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw Error(ErrorKind::kConfig, "bad " + std::string(what) + " '" + std::string(text) + "'");
  }
  return v;
}

std::string format_k(double k) {
  if (k == std::floor(k)) return std::to_string(static_cast<long long>(k));
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, k);
  return std::string(buf, ptr);
}

void require_nonempty(std::span<const TokenStat> tokens) {
  if (tokens.empty()) throw Error(ErrorKind::kValidation, "score: empty token list");
}

// Realized-token log-probabilities sorted ascending. Summing in sorted order
// makes every score independent of token order.
std::vector<double> sorted_logps(std::span<const TokenStat> tokens) {
  require_nonempty(tokens);
  std::vector<double> v;
  v.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (!t.logp) {
      throw Error(ErrorKind::kInapplicable,
                  "method needs realized-token log-probabilities, absent in this slice");
    }
    v.push_back(*t.logp);
  }
  std::stable_sort(v.begin(), v.end());
  return v;
}

double mean_of_prefix(const std::vector<double>& v, std::size_t m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) s += v[i];
  return s / static_cast<double>(m);
}

}  // namespace

double renyi_entropy(std::span<const double> logprobs, double alpha) {
  if (!(alpha > 0.0)) throw Error(ErrorKind::kConfig, "renyi_entropy: alpha must be > 0");
  if (logprobs.empty()) throw Error(ErrorKind::kValidation, "renyi_entropy: empty distribution");
  const double lse = logsumexp(logprobs);
  double h;
  if (alpha == 1.0) {
    h = 0.0;
    for (double lp : logprobs) {
      const double l = lp - lse;
      if (std::isfinite(l)) h -= std::exp(l) * l;
    }
  } else {
    // Σ pᵢ^α = exp(logsumexp(α·(ℓᵢ − lse)))
    const double la = logsumexp(logprobs, alpha) - alpha * lse;
    h = la / (1.0 - alpha);
  }
  return std::max(h, 0.0);
}

TokenStat summarize_distribution(std::span<const double> logprobs,
                                 std::optional<std::size_t> realized_index,
                                 std::span<const double> alphas) {
  if (logprobs.empty()) throw Error(ErrorKind::kValidation, "summarize: empty distribution");
  for (double lp : logprobs) {
    if (std::isnan(lp) || lp == std::numeric_limits<double>::infinity()) {
      throw Error(ErrorKind::kNormalization, "summarize: NaN or +inf log-probability");
    }
  }
  const double lse = logsumexp(logprobs);
  if (!(std::abs(lse) <= kNormalizationTol)) {
    throw Error(ErrorKind::kNormalization,
                "summarize: log-probabilities not normalized (logsumexp = " +
                    std::to_string(lse) + ")");
  }
  TokenStat stat;
  if (realized_index) {
    if (*realized_index >= logprobs.size()) {
      throw Error(ErrorKind::kIndex, "summarize: realized index " +
                                         std::to_string(*realized_index) + " out of range for V=" +
                                         std::to_string(logprobs.size()));
    }
    stat.logp = std::min(logprobs[*realized_index], 0.0);
  }
  stat.entropies.reserve(alphas.size());
  for (double a : alphas) stat.entropies.push_back(renyi_entropy(logprobs, a));
  return stat;
}

MethodDescriptor parse_method(std::string_view text) {
  MethodDescriptor m;
  if (text == "ppl") return m;
  if (text.starts_with("mink:")) {
    m.family = MethodFamily::kMinK;
    m.k_percent = parse_number(text.substr(5), "K percent");
  } else if (text.starts_with("renyi:a")) {
    const auto rest = text.substr(7);
    const auto colon = rest.find(":k");
    if (colon == std::string_view::npos) {
      throw Error(ErrorKind::kConfig, "method '" + std::string(text) + "': expected renyi:aA:kK");
    }
    m.family = MethodFamily::kMaxRenyi;
    m.alpha = parse_number(rest.substr(0, colon), "alpha");
    m.k_percent = parse_number(rest.substr(colon + 2), "K percent");
    if (!(m.alpha > 0.0)) throw Error(ErrorKind::kConfig, "method alpha must be > 0");
  } else {
    throw Error(ErrorKind::kConfig, "unknown method '" + std::string(text) +
                                        "' (expected ppl, mink:K, renyi:aA:kK)");
  }
  if (m.k_percent < 0.0 || m.k_percent > 100.0) {
    throw Error(ErrorKind::kConfig, "method '" + std::string(text) + "': K must lie in [0, 100]");
  }
  return m;
}

std::string to_string(const MethodDescriptor& m) {
  switch (m.family) {
    case MethodFamily::kPerplexity: return "ppl";
    case MethodFamily::kMinK: return "mink:" + format_k(m.k_percent);
    case MethodFamily::kMaxRenyi:
      return "renyi:a" + format_alpha(m.alpha) + ":k" + format_k(m.k_percent);
  }
  return "?";
}

std::string display_name(const MethodDescriptor& m) {
  switch (m.family) {
    case MethodFamily::kPerplexity: return "Perplexity";
    case MethodFamily::kMinK: return "Min-" + format_k(m.k_percent) + "%";
    case MethodFamily::kMaxRenyi:
      return "Max Rényi " + format_k(m.k_percent) + "% (α=" + format_alpha(m.alpha) + ")";
  }
  return "?";
}

std::vector<MethodDescriptor> default_methods() {
  std::vector<MethodDescriptor> out{{MethodFamily::kPerplexity, 0.0, 0.0}};
  for (double k : {0.0, 10.0, 20.0}) out.push_back({MethodFamily::kMinK, k, 0.0});
  for (double a : {0.5, 1.0})
    for (double k : {0.0, 10.0, 100.0}) out.push_back({MethodFamily::kMaxRenyi, k, a});
  return out;
}

std::size_t selection_count(std::size_t tokens, double k_percent) {
  const double raw = std::floor(static_cast<double>(tokens) * k_percent / 100.0);
  const auto m = static_cast<std::size_t>(std::max(raw, 0.0));
  return std::clamp<std::size_t>(m, 1, std::max<std::size_t>(tokens, 1));
}

double perplexity_score(std::span<const TokenStat> tokens) {
  const auto v = sorted_logps(tokens);
  return -std::exp(-mean_of_prefix(v, v.size()));
}

double min_k_score(std::span<const TokenStat> tokens, double k_percent) {
  if (k_percent < 0.0 || k_percent > 100.0) {
    throw Error(ErrorKind::kConfig, "min_k_score: K must lie in [0, 100]");
  }
  const auto v = sorted_logps(tokens);
  return mean_of_prefix(v, selection_count(v.size(), k_percent));
}

double max_renyi_score(std::span<const TokenStat> tokens, std::size_t alpha_index,
                       double k_percent) {
  require_nonempty(tokens);
  if (k_percent < 0.0 || k_percent > 100.0) {
    throw Error(ErrorKind::kConfig, "max_renyi_score: K must lie in [0, 100]");
  }
  std::vector<double> h;
  h.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (alpha_index >= t.entropies.size()) {
      throw Error(ErrorKind::kConfig, "max_renyi_score: token lacks the requested alpha");
    }
    h.push_back(t.entropies[alpha_index]);
  }
  std::stable_sort(h.begin(), h.end(), std::greater<>());
  return -mean_of_prefix(h, selection_count(h.size(), k_percent));
}

double score(const MethodDescriptor& method, std::span<const TokenStat> tokens,
             std::span<const double> alphas) {
  switch (method.family) {
    case MethodFamily::kPerplexity: return perplexity_score(tokens);
    case MethodFamily::kMinK: return min_k_score(tokens, method.k_percent);
    case MethodFamily::kMaxRenyi: {
      const auto it = std::find(alphas.begin(), alphas.end(), method.alpha);
      if (it == alphas.end()) {
        throw Error(ErrorKind::kConfig,
                    "alpha " + format_alpha(method.alpha) + " not present in token records");
      }
      return max_renyi_score(tokens, static_cast<std::size_t>(it - alphas.begin()),
                             method.k_percent);
    }
  }
  return 0.0;
}

int decide(double score, double threshold) { return score >= threshold ? 1 : 0; }

std::size_t AttackGrid::inapplicable_count() const {
  std::size_t n = 0;
  for (const auto& row : cells)
    for (const auto& c : row) n += !c.applicable;
  return n;
}

AttackGrid evaluate_grid(const TokenRecordSet& records, std::span<const MethodDescriptor> methods,
                         std::span<const SliceId> slices, std::size_t threads) {
  if (methods.empty()) throw Error(ErrorKind::kConfig, "evaluate_grid: empty method list");
  if (slices.empty()) throw Error(ErrorKind::kConfig, "evaluate_grid: empty slice list");
  for (const auto& m : methods) {
    if (m.family == MethodFamily::kMaxRenyi && !records.alpha_index(m.alpha)) {
      throw Error(ErrorKind::kConfig, "method " + to_string(m) + ": alpha " +
                                          format_alpha(m.alpha) + " not present in records");
    }
  }

  std::vector<int> labels;
  labels.reserve(records.samples.size());
  for (const auto& s : records.samples) labels.push_back(s.label);

  std::vector<std::vector<TokenList>> sliced;
  std::vector<bool> has_logp;
  for (SliceId s : slices) {
    sliced.push_back(slice(records, s));
    bool all = true;
    for (const auto& list : sliced.back())
      for (const auto& t : list) all = all && t.logp.has_value();
    has_logp.push_back(all);
  }

  AttackGrid grid;
  grid.methods.assign(methods.begin(), methods.end());
  grid.slices.assign(slices.begin(), slices.end());
  grid.cells.assign(methods.size(), std::vector<GridCell>(slices.size()));

  parallel_for(methods.size() * slices.size(), threads, [&](std::size_t idx) {
    const std::size_t mi = idx / slices.size();
    const std::size_t si = idx % slices.size();
    const MethodDescriptor& method = methods[mi];
    GridCell& cell = grid.cells[mi][si];
    if (method.needs_logp() && !has_logp[si]) {
      cell.applicable = false;
      return;
    }
    ScoredLabels sl;
    sl.labels = labels;
    sl.scores.reserve(labels.size());
    for (const auto& list : sliced[si]) sl.scores.push_back(score(method, list, records.alphas));
    cell.applicable = true;
    cell.auroc = auroc(sl);
    cell.tpr05 = tpr_at_fpr(sl, 0.05);
  });
  return grid;
}

}  // namespace miaudit
