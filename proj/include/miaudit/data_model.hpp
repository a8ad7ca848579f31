#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "miaudit/linalg.hpp"

namespace miaudit {

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

inline constexpr int kMember = 1;
inline constexpr int kNonMember = 0;

/// A labeled set of embedding vectors. Vectors are held in double precision;
/// the on-disk emb1 format stores f32.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  // Validates the invariants (lengths, labels in {0,1}, unique ids, finite
  // values) and throws Error{kValidation} with the matching FormatCode.
  EmbeddingSet(std::vector<std::string> ids, std::vector<int> labels, Matrix vectors);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return vectors_.cols(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  const Matrix& vectors() const noexcept { return vectors_; }

  std::size_t count(int label) const;
  // Rows with the given label, in stored order.
  Matrix rows_with_label(int label) const;
  // Copy with every vector scaled to unit L2 norm.
  EmbeddingSet l2_normalized() const;
  // Throws kValidation unless each class has at least `min_per_class` rows.
  void require_both_classes(std::size_t min_per_class) const;

  static EmbeddingSet concat(const EmbeddingSet& members, const EmbeddingSet& nonmembers);

 private:
  std::vector<std::string> ids_;
  std::vector<int> labels_;
  Matrix vectors_;
};

enum class EmbeddingFormat { kEmb1, kCsv };

EmbeddingFormat embedding_format_from_path(const std::filesystem::path& path);

EmbeddingSet read_emb1(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_emb1(const EmbeddingSet& set);

EmbeddingSet read_embeddings_csv(std::istream& in);
void write_embeddings_csv(std::ostream& out, const EmbeddingSet& set);

EmbeddingSet read_embeddings(const std::filesystem::path& path, EmbeddingFormat format);
EmbeddingSet read_embeddings(const std::filesystem::path& path);
void write_embeddings(const std::filesystem::path& path, const EmbeddingSet& set,
                      EmbeddingFormat format);

// Two-file mode: every row of `members` gets label 1, every row of
// `nonmembers` label 0, regardless of labels stored in the files.
EmbeddingSet read_embedding_pair(const std::filesystem::path& members,
                                 const std::filesystem::path& nonmembers);

// ---------------------------------------------------------------------------
// Token statistics
// ---------------------------------------------------------------------------

enum class RegionId : std::uint8_t { kImg = 0, kInst = 1, kDesp = 2 };
inline constexpr std::array<RegionId, 3> kAllRegions = {RegionId::kImg, RegionId::kInst,
                                                        RegionId::kDesp};

std::string_view to_string(RegionId region);
std::optional<RegionId> parse_region(std::string_view name);

struct TokenStat {
  std::optional<double> logp;  // log-probability of the realized token (nats)
  std::vector<double> entropies;  // H_α in nats, parallel to TokenRecordSet::alphas

  friend bool operator==(const TokenStat&, const TokenStat&) = default;
};

using TokenList = std::vector<TokenStat>;

struct TokenSample {
  std::string id;
  int label = 0;
  std::array<std::optional<TokenList>, 3> regions;

  const std::optional<TokenList>& region(RegionId r) const {
    return regions[static_cast<std::size_t>(r)];
  }
  std::optional<TokenList>& region(RegionId r) { return regions[static_cast<std::size_t>(r)]; }
};

struct TokenRecordSet {
  std::vector<double> alphas;  // sorted ascending
  std::vector<TokenSample> samples;

  // Index of α in `alphas`, or nullopt.
  std::optional<std::size_t> alpha_index(double alpha) const;
  // Throws kValidation on any broken invariant.
  void validate() const;
};

// Canonical decimal spelling of an α key: shortest round-trip form, always
// with a decimal point ("0.5", "1.0", "2.0").
std::string format_alpha(double alpha);

TokenRecordSet read_token_records(std::istream& in);
TokenRecordSet read_token_records(const std::filesystem::path& path);
void write_token_records(std::ostream& out, const TokenRecordSet& records);
void write_token_records(const std::filesystem::path& path, const TokenRecordSet& records);

// ---------------------------------------------------------------------------
// Slices
// ---------------------------------------------------------------------------

enum class SliceId : std::uint8_t { kImg, kInst, kDesp, kInstDesp };
inline constexpr std::array<SliceId, 4> kAllSlices = {SliceId::kImg, SliceId::kInst,
                                                      SliceId::kDesp, SliceId::kInstDesp};

std::string_view to_string(SliceId slice);
SliceId parse_slice(std::string_view name);
std::vector<RegionId> slice_regions(SliceId slice);

// Per-sample token lists for the slice, in sample order. inst+desp is the
// inst tokens followed by the desp tokens.
std::vector<TokenList> slice(const TokenRecordSet& records, SliceId spec);

}  // namespace miaudit
