#include "miaudit/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "miaudit/error.hpp"

namespace miaudit {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::array<char, 4> kEmb1Magic = {'E', 'M', 'B', '1'};
constexpr std::uint8_t kEmb1Version = 1;
constexpr std::uint8_t kEmb1DtypeF32 = 1;
constexpr std::size_t kEmb1HeaderSize = 16;

[[noreturn]] void format_error(FormatCode code, const std::string& message) {
  throw Error(ErrorKind::kFormat, message, code);
}

[[noreturn]] void validation_error(FormatCode code, const std::string& message) {
  throw Error(ErrorKind::kValidation, message, code);
}

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  const auto* p = reinterpret_cast<const unsigned char*>(s.data());
  while (i < s.size()) {
    const unsigned char c = p[i];
    std::size_t len;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      if ((p[i + k] & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (p[i + k] & 0x3F);
    }
    // Overlong encodings, surrogates and out-of-range code points.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  std::uint8_t u8() { return bytes_[pos_++]; }
  std::uint16_t u16() {
    const std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int k = 3; k >= 0; --k) v = (v << 8) | bytes_[pos_ + k];
    pos_ += 4;
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float f;
    std::memcpy(&f, &bits, sizeof f);
    return f;
  }
  std::string_view str(std::size_t n) {
    std::string_view s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>((v >> (8 * k)) & 0xFF));
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::string float_to_string(float f) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, f);
  return std::string(buf, ptr);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string sample_context(std::size_t line_no, const std::string& id) {
  std::string s = "line " + std::to_string(line_no);
  if (!id.empty()) s += " (sample '" + id + "')";
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// EmbeddingSet
// ---------------------------------------------------------------------------

EmbeddingSet::EmbeddingSet(std::vector<std::string> ids, std::vector<int> labels,
                           Matrix vectors)
    : ids_(std::move(ids)), labels_(std::move(labels)), vectors_(std::move(vectors)) {
  if (ids_.size() != labels_.size() || ids_.size() != vectors_.rows()) {
    validation_error(FormatCode::kDimensionMismatch,
                     "EmbeddingSet: ids/labels/vectors length mismatch");
  }
  std::unordered_set<std::string_view> seen;
  seen.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (labels_[i] != 0 && labels_[i] != 1) {
      validation_error(FormatCode::kBadLabel, "EmbeddingSet: sample '" + ids_[i] +
                                                  "' has label " + std::to_string(labels_[i]));
    }
    if (!seen.insert(ids_[i]).second) {
      validation_error(FormatCode::kDuplicateId, "EmbeddingSet: duplicate id '" + ids_[i] + "'");
    }
    for (double x : vectors_.row(i)) {
      if (!std::isfinite(x)) {
        validation_error(FormatCode::kNonFinite,
                         "EmbeddingSet: sample '" + ids_[i] + "' has a non-finite value");
      }
    }
  }
}

std::size_t EmbeddingSet::count(int label) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

Matrix EmbeddingSet::rows_with_label(int label) const {
  Matrix out(count(label), dim());
  std::size_t r = 0;
  for (std::size_t i = 0; i < size(); ++i) {
    if (labels_[i] != label) continue;
    std::ranges::copy(vectors_.row(i), out.row(r).begin());
    ++r;
  }
  return out;
}

EmbeddingSet EmbeddingSet::l2_normalized() const {
  Matrix v(size(), dim());
  for (std::size_t i = 0; i < size(); ++i) {
    try {
      const Vector u = l2_normalize(vectors_.row(i));
      std::ranges::copy(u, v.row(i).begin());
    } catch (const Error& e) {
      throw Error(e.kind(), "sample '" + ids_[i] + "': " + e.what());
    }
  }
  return EmbeddingSet(ids_, labels_, std::move(v));
}

void EmbeddingSet::require_both_classes(std::size_t min_per_class) const {
  const std::size_t n1 = count(kMember);
  const std::size_t n0 = count(kNonMember);
  if (n1 < min_per_class || n0 < min_per_class) {
    throw Error(ErrorKind::kValidation,
                "need at least " + std::to_string(min_per_class) +
                    " samples per class, got members=" + std::to_string(n1) +
                    " nonmembers=" + std::to_string(n0));
  }
}

EmbeddingSet EmbeddingSet::concat(const EmbeddingSet& members, const EmbeddingSet& nonmembers) {
  if (members.size() > 0 && nonmembers.size() > 0 && members.dim() != nonmembers.dim()) {
    validation_error(FormatCode::kDimensionMismatch,
                     "member dim " + std::to_string(members.dim()) + " != nonmember dim " +
                         std::to_string(nonmembers.dim()));
  }
  const std::size_t d = members.size() > 0 ? members.dim() : nonmembers.dim();
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<double> data;
  data.reserve((members.size() + nonmembers.size()) * d);
  for (const auto* part : {&members, &nonmembers}) {
    const int label = part == &members ? kMember : kNonMember;
    for (std::size_t i = 0; i < part->size(); ++i) {
      ids.push_back(part->ids()[i]);
      labels.push_back(label);
      auto r = part->vectors().row(i);
      data.insert(data.end(), r.begin(), r.end());
    }
  }
  const std::size_t n = ids.size();
  return EmbeddingSet(std::move(ids), std::move(labels), Matrix(n, d, std::move(data)));
}

// ---------------------------------------------------------------------------
// emb1
// ---------------------------------------------------------------------------

EmbeddingSet read_emb1(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (bytes.size() >= 4 && !std::equal(kEmb1Magic.begin(), kEmb1Magic.end(), bytes.begin())) {
    format_error(FormatCode::kBadMagic, "emb1: bad magic at byte 0");
  }
  if (bytes.size() < kEmb1HeaderSize) {
    format_error(FormatCode::kTruncatedHeader, "emb1: header truncated at byte " +
                                                   std::to_string(bytes.size()) + " (need " +
                                                   std::to_string(kEmb1HeaderSize) + ")");
  }
  r.str(4);
  if (const auto v = r.u8(); v != kEmb1Version) {
    format_error(FormatCode::kBadVersion,
                 "emb1: unsupported version " + std::to_string(v) + " at byte 4");
  }
  if (const auto t = r.u8(); t != kEmb1DtypeF32) {
    format_error(FormatCode::kBadDtype, "emb1: unsupported dtype " + std::to_string(t) +
                                            " at byte 5");
  }
  if (const auto z = r.u16(); z != 0) {
    format_error(FormatCode::kBadReserved, "emb1: reserved field nonzero at byte 6");
  }
  const std::uint64_t n = r.u32();
  const std::uint64_t d = r.u32();
  if (d == 0 && n > 0) format_error(FormatCode::kBadHeader, "emb1: dimension 0 at byte 12");

  const std::uint64_t payload = n * d * 4 + n;
  if (payload > r.remaining()) {
    format_error(FormatCode::kTruncatedPayload,
                 "emb1: payload truncated: need " + std::to_string(payload) +
                     " bytes of vectors+labels after byte 16, have " +
                     std::to_string(r.remaining()));
  }
  std::vector<double> data(n * d);
  for (std::uint64_t i = 0; i < n * d; ++i) {
    const std::size_t at = r.offset();
    const float f = r.f32();
    if (!std::isfinite(f)) {
      format_error(FormatCode::kNonFinite, "emb1: non-finite value at byte " + std::to_string(at));
    }
    data[i] = static_cast<double>(f);
  }
  std::vector<int> labels(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::size_t at = r.offset();
    const auto l = r.u8();
    if (l > 1) {
      format_error(FormatCode::kBadLabel,
                   "emb1: label " + std::to_string(l) + " at byte " + std::to_string(at));
    }
    labels[i] = l;
  }
  std::vector<std::string> ids(n);
  std::unordered_set<std::string_view> seen;
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::size_t at = r.offset();
    if (r.remaining() < 2) {
      format_error(FormatCode::kTruncatedPayload, "emb1: id table truncated at byte " +
                                                      std::to_string(at));
    }
    const std::size_t len = r.u16();
    if (r.remaining() < len) {
      format_error(FormatCode::kTruncatedPayload, "emb1: id " + std::to_string(i) +
                                                      " truncated at byte " + std::to_string(at));
    }
    const std::string_view id = r.str(len);
    if (!valid_utf8(id)) {
      format_error(FormatCode::kBadUtf8, "emb1: id at byte " + std::to_string(at) +
                                             " is not valid UTF-8");
    }
    if (!seen.insert(id).second) {
      format_error(FormatCode::kDuplicateId, "emb1: duplicate id '" + std::string(id) +
                                                 "' at byte " + std::to_string(at));
    }
    ids[i] = std::string(id);
  }
  if (r.remaining() != 0) {
    format_error(FormatCode::kTrailingBytes,
                 "emb1: " + std::to_string(r.remaining()) + " trailing bytes at byte " +
                     std::to_string(r.offset()));
  }
  return EmbeddingSet(std::move(ids), std::move(labels),
                      Matrix(static_cast<std::size_t>(n), static_cast<std::size_t>(d),
                             std::move(data)));
}

std::vector<std::uint8_t> write_emb1(const EmbeddingSet& set) {
  std::vector<std::uint8_t> out;
  const std::size_t n = set.size();
  const std::size_t d = set.dim();
  out.reserve(kEmb1HeaderSize + n * d * 4 + n * 12);
  out.insert(out.end(), kEmb1Magic.begin(), kEmb1Magic.end());
  out.push_back(kEmb1Version);
  out.push_back(kEmb1DtypeF32);
  put_u16(out, 0);
  put_u32(out, static_cast<std::uint32_t>(n));
  put_u32(out, static_cast<std::uint32_t>(d));
  for (double x : set.vectors().data()) {
    const float f = static_cast<float>(x);
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    put_u32(out, bits);
  }
  for (int l : set.labels()) out.push_back(static_cast<std::uint8_t>(l));
  for (const auto& id : set.ids()) {
    if (id.size() > 0xFFFF) throw Error(ErrorKind::kValidation, "emb1: id longer than 65535 bytes");
    put_u16(out, static_cast<std::uint16_t>(id.size()));
    out.insert(out.end(), id.begin(), id.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

EmbeddingSet read_embeddings_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) format_error(FormatCode::kBadHeader, "csv: empty file");
  ++line_no;
  const auto header = split_csv_line(trim(line));
  std::size_t first_feature = 0;
  bool has_id = false;
  if (!header.empty() && trim(header[0]) == "id") {
    has_id = true;
    if (header.size() < 2 || trim(header[1]) != "label")
      format_error(FormatCode::kBadHeader, "csv line 1: expected 'id,label,f0,...'");
    first_feature = 2;
  } else if (!header.empty() && trim(header[0]) == "label") {
    first_feature = 1;
  } else {
    format_error(FormatCode::kBadHeader, "csv line 1: expected 'label,f0,...' header");
  }
  const std::size_t d = header.size() - first_feature;
  if (d == 0) format_error(FormatCode::kBadHeader, "csv line 1: no feature columns");
  for (std::size_t j = 0; j < d; ++j) {
    if (trim(header[first_feature + j]) != "f" + std::to_string(j)) {
      format_error(FormatCode::kBadHeader, "csv line 1: column " +
                                               std::to_string(first_feature + j + 1) +
                                               " should be f" + std::to_string(j));
    }
  }

  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<double> data;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = trim(line);
    if (row.empty()) continue;
    const auto fields = split_csv_line(row);
    const std::string where = "csv line " + std::to_string(line_no);
    if (fields.size() != header.size()) {
      format_error(FormatCode::kDimensionMismatch,
                   where + ": expected " + std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    std::string id = has_id ? std::string(trim(fields[0]))
                            : std::to_string(ids.size());
    if (has_id && !valid_utf8(id)) format_error(FormatCode::kBadUtf8, where + ": id not UTF-8");
    if (!seen.insert(id).second) {
      format_error(FormatCode::kDuplicateId, where + ": duplicate id '" + id + "'");
    }
    const std::string_view lab = trim(fields[has_id ? 1 : 0]);
    if (lab != "0" && lab != "1") {
      format_error(FormatCode::kBadLabel, where + ": label must be 0 or 1, got '" +
                                              std::string(lab) + "'");
    }
    labels.push_back(lab == "1" ? 1 : 0);
    for (std::size_t j = 0; j < d; ++j) {
      const std::string_view tok = trim(fields[first_feature + j]);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        format_error(FormatCode::kBadNumber, where + ": cannot parse '" + std::string(tok) + "'");
      }
      const float f = static_cast<float>(v);
      if (!std::isfinite(v) || !std::isfinite(f)) {
        format_error(FormatCode::kNonFinite, where + ": non-finite value in column f" +
                                                 std::to_string(j));
      }
      data.push_back(static_cast<double>(f));
    }
    ids.push_back(std::move(id));
  }
  const std::size_t n = ids.size();
  return EmbeddingSet(std::move(ids), std::move(labels), Matrix(n, d, std::move(data)));
}

void write_embeddings_csv(std::ostream& out, const EmbeddingSet& set) {
  out << "id,label";
  for (std::size_t j = 0; j < set.dim(); ++j) out << ",f" << j;
  out << '\n';
  for (std::size_t i = 0; i < set.size(); ++i) {
    out << set.ids()[i] << ',' << set.labels()[i];
    for (double x : set.vectors().row(i)) out << ',' << float_to_string(static_cast<float>(x));
    out << '\n';
  }
}

EmbeddingFormat embedding_format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? EmbeddingFormat::kCsv : EmbeddingFormat::kEmb1;
}

EmbeddingSet read_embeddings(const std::filesystem::path& path, EmbeddingFormat format) {
  if (format == EmbeddingFormat::kEmb1) {
    const auto bytes = read_file_bytes(path);
    try {
      return read_emb1(bytes);
    } catch (const Error& e) {
      throw Error(e.kind(), path.string() + ": " + e.what(), e.code());
    }
  }
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  try {
    return read_embeddings_csv(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what(), e.code());
  }
}

EmbeddingSet read_embeddings(const std::filesystem::path& path) {
  return read_embeddings(path, embedding_format_from_path(path));
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingSet& set,
                      EmbeddingFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  if (format == EmbeddingFormat::kEmb1) {
    const auto bytes = write_emb1(set);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  } else {
    write_embeddings_csv(out, set);
  }
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

EmbeddingSet read_embedding_pair(const std::filesystem::path& members,
                                 const std::filesystem::path& nonmembers) {
  return EmbeddingSet::concat(read_embeddings(members), read_embeddings(nonmembers));
}

// ---------------------------------------------------------------------------
// Token records
// ---------------------------------------------------------------------------

std::string_view to_string(RegionId region) {
  switch (region) {
    case RegionId::kImg: return "img";
    case RegionId::kInst: return "inst";
    case RegionId::kDesp: return "desp";
  }
  return "?";
}

std::optional<RegionId> parse_region(std::string_view name) {
  for (RegionId r : kAllRegions)
    if (to_string(r) == name) return r;
  return std::nullopt;
}

std::string format_alpha(double alpha) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, alpha);
  std::string s(buf, ptr);
  if (s.find_first_of(".eE") == std::string::npos && s.find("inf") == std::string::npos &&
      s.find("nan") == std::string::npos) {
    s += ".0";
  }
  return s;
}

std::optional<std::size_t> TokenRecordSet::alpha_index(double alpha) const {
  for (std::size_t i = 0; i < alphas.size(); ++i)
    if (alphas[i] == alpha) return i;
  return std::nullopt;
}

void TokenRecordSet::validate() const {
  if (!std::is_sorted(alphas.begin(), alphas.end()) ||
      std::adjacent_find(alphas.begin(), alphas.end()) != alphas.end()) {
    throw Error(ErrorKind::kValidation, "token records: alphas must be sorted and distinct");
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& s : samples) {
    if (!seen.insert(s.id).second) {
      validation_error(FormatCode::kDuplicateId, "token records: duplicate id '" + s.id + "'");
    }
    if (s.label != 0 && s.label != 1) {
      validation_error(FormatCode::kBadLabel, "sample '" + s.id + "': label must be 0 or 1");
    }
    bool any = false;
    for (RegionId r : kAllRegions) {
      const auto& toks = s.region(r);
      if (!toks) continue;
      any = true;
      if (toks->empty()) {
        validation_error(FormatCode::kEmptyRegion, "sample '" + s.id + "': region " +
                                                       std::string(to_string(r)) + " is empty");
      }
      for (const auto& t : *toks) {
        if (t.entropies.size() != alphas.size()) {
          validation_error(FormatCode::kMissingAlpha,
                           "sample '" + s.id + "': token carries " +
                               std::to_string(t.entropies.size()) + " entropies, expected " +
                               std::to_string(alphas.size()));
        }
        if (t.logp) {
          if (!std::isfinite(*t.logp)) {
            validation_error(FormatCode::kNonFinite, "sample '" + s.id + "': non-finite logp");
          }
          if (*t.logp > 0.0) {
            validation_error(FormatCode::kPositiveLogp,
                             "sample '" + s.id + "': logp " + std::to_string(*t.logp) + " > 0");
          }
        } else if (r != RegionId::kImg) {
          validation_error(FormatCode::kMissingLogp, "sample '" + s.id +
                                                         "': null logp outside img region (" +
                                                         std::string(to_string(r)) + ")");
        }
        for (double h : t.entropies) {
          if (!std::isfinite(h)) {
            validation_error(FormatCode::kNonFinite, "sample '" + s.id + "': non-finite entropy");
          }
          if (h < 0.0) {
            validation_error(FormatCode::kNegativeEntropy,
                             "sample '" + s.id + "': negative entropy");
          }
        }
      }
    }
    if (!any) {
      validation_error(FormatCode::kEmptyRegion, "sample '" + s.id + "' has no regions");
    }
  }
}

TokenRecordSet read_token_records(std::istream& in) {
  TokenRecordSet records;
  std::optional<std::vector<std::pair<double, std::string>>> alpha_keys;  // sorted by value
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      format_error(FormatCode::kBadJson, "line " + std::to_string(line_no) + ": " + e.what());
    }
    TokenSample sample;
    auto where = [&] { return sample_context(line_no, sample.id); };
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string()) {
      format_error(FormatCode::kBadJson, where() + ": missing string field 'id'");
    }
    sample.id = obj["id"].get<std::string>();
    if (!obj.contains("label") || !obj["label"].is_number_integer()) {
      format_error(FormatCode::kBadLabel, where() + ": missing integer field 'label'");
    }
    sample.label = obj["label"].get<int>();
    if (sample.label != 0 && sample.label != 1) {
      format_error(FormatCode::kBadLabel, where() + ": label must be 0 or 1");
    }
    if (!obj.contains("regions") || !obj["regions"].is_object()) {
      format_error(FormatCode::kBadJson, where() + ": missing object field 'regions'");
    }
    for (const auto& [name, tokens] : obj["regions"].items()) {
      const auto region = parse_region(name);
      if (!region) {
        format_error(FormatCode::kUnknownRegion, where() + ": unknown region '" + name + "'");
      }
      if (!tokens.is_array()) {
        format_error(FormatCode::kBadJson, where() + ": region '" + name + "' is not an array");
      }
      TokenList list;
      list.reserve(tokens.size());
      for (const auto& tok : tokens) {
        if (!tok.is_object() || !tok.contains("H") || !tok["H"].is_object()) {
          format_error(FormatCode::kMissingAlpha, where() + ": token without 'H' object");
        }
        std::vector<std::pair<double, std::string>> keys;
        for (const auto& [key, value] : tok["H"].items()) {
          double a = 0.0;
          auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), a);
          if (ec != std::errc() || ptr != key.data() + key.size() || !(a > 0.0)) {
            format_error(FormatCode::kMissingAlpha, where() + ": bad alpha key '" + key + "'");
          }
          keys.emplace_back(a, key);
        }
        std::ranges::sort(keys);
        if (!alpha_keys) {
          alpha_keys = keys;
          for (const auto& k : keys) records.alphas.push_back(k.first);
          if (std::adjacent_find(records.alphas.begin(), records.alphas.end()) !=
              records.alphas.end()) {
            format_error(FormatCode::kMissingAlpha, where() + ": repeated alpha value");
          }
        } else {
          bool same = keys.size() == alpha_keys->size();
          for (std::size_t k = 0; same && k < keys.size(); ++k)
            same = keys[k].first == (*alpha_keys)[k].first;
          if (!same) {
            format_error(FormatCode::kMissingAlpha,
                         where() + ": alpha key set differs from the first token's set");
          }
        }
        TokenStat stat;
        for (const auto& k : keys) {
          const auto& v = tok["H"][k.second];
          if (!v.is_number()) {
            format_error(FormatCode::kBadNumber, where() + ": entropy for alpha " + k.second +
                                                     " is not a number");
          }
          stat.entropies.push_back(v.get<double>());
        }
        if (tok.contains("logp") && !tok["logp"].is_null()) {
          if (!tok["logp"].is_number()) {
            format_error(FormatCode::kBadNumber, where() + ": logp is not a number");
          }
          stat.logp = tok["logp"].get<double>();
        }
        list.push_back(std::move(stat));
      }
      sample.region(*region) = std::move(list);
    }
    records.samples.push_back(std::move(sample));
    // Validate incrementally so errors name the offending line.
    try {
      TokenRecordSet one{records.alphas, {records.samples.back()}};
      one.validate();
    } catch (const Error& e) {
      throw Error(e.kind(), "line " + std::to_string(line_no) + ": " + e.what(), e.code());
    }
  }
  records.validate();
  return records;
}

TokenRecordSet read_token_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  try {
    return read_token_records(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what(), e.code());
  }
}

void write_token_records(std::ostream& out, const TokenRecordSet& records) {
  std::vector<std::string> keys;
  for (double a : records.alphas) keys.push_back(format_alpha(a));
  for (const auto& s : records.samples) {
    ordered_json obj;
    obj["id"] = s.id;
    obj["label"] = s.label;
    ordered_json regions = ordered_json::object();
    for (RegionId r : kAllRegions) {
      const auto& toks = s.region(r);
      if (!toks) continue;
      ordered_json arr = ordered_json::array();
      for (const auto& t : *toks) {
        ordered_json tok;
        tok["logp"] = t.logp ? ordered_json(*t.logp) : ordered_json(nullptr);
        ordered_json h = ordered_json::object();
        for (std::size_t k = 0; k < keys.size(); ++k) h[keys[k]] = t.entropies[k];
        tok["H"] = std::move(h);
        arr.push_back(std::move(tok));
      }
      regions[std::string(to_string(r))] = std::move(arr);
    }
    obj["regions"] = std::move(regions);
    out << obj.dump() << '\n';
  }
}

void write_token_records(const std::filesystem::path& path, const TokenRecordSet& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  write_token_records(out, records);
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Slices
// ---------------------------------------------------------------------------

std::string_view to_string(SliceId slice) {
  switch (slice) {
    case SliceId::kImg: return "img";
    case SliceId::kInst: return "inst";
    case SliceId::kDesp: return "desp";
    case SliceId::kInstDesp: return "inst+desp";
  }
  return "?";
}

SliceId parse_slice(std::string_view name) {
  for (SliceId s : kAllSlices)
    if (to_string(s) == name) return s;
  throw Error(ErrorKind::kConfig, "unknown slice '" + std::string(name) +
                                      "' (expected img|inst|desp|inst+desp)");
}

std::vector<RegionId> slice_regions(SliceId slice) {
  switch (slice) {
    case SliceId::kImg: return {RegionId::kImg};
    case SliceId::kInst: return {RegionId::kInst};
    case SliceId::kDesp: return {RegionId::kDesp};
    case SliceId::kInstDesp: return {RegionId::kInst, RegionId::kDesp};
  }
  return {};
}

std::vector<TokenList> slice(const TokenRecordSet& records, SliceId spec) {
  const auto regions = slice_regions(spec);
  std::vector<std::string> missing;
  std::vector<TokenList> out;
  out.reserve(records.samples.size());
  for (const auto& s : records.samples) {
    TokenList list;
    bool ok = true;
    for (RegionId r : regions) {
      const auto& toks = s.region(r);
      if (!toks) {
        ok = false;
        break;
      }
      list.insert(list.end(), toks->begin(), toks->end());
    }
    if (!ok) {
      missing.push_back(s.id);
      continue;
    }
    out.push_back(std::move(list));
  }
  if (!missing.empty()) {
    std::string ids;
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) {
      if (i) ids += ", ";
      ids += missing[i];
    }
    if (missing.size() > 10) ids += ", ... (" + std::to_string(missing.size()) + " total)";
    throw Error(ErrorKind::kSlice, "slice " + std::string(to_string(spec)) +
                                       ": region missing in samples: " + ids);
  }
  return out;
}

}  // namespace miaudit
