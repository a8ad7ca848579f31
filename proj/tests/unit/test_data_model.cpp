#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "../support/corrupt_emb1.hpp"
#include "doctest.h"
#include "miaudit/data_model.hpp"
#include "miaudit/error.hpp"
#include "miaudit/rng.hpp"

using namespace miaudit;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("miaudit_dm_" + name);
}

template <class Fn>
Error capture(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected miaudit::Error");
  return Error(ErrorKind::kValidation, "unreachable");
}

TokenRecordSet read_jsonl(const std::string& text) {
  std::istringstream in(text);
  return read_token_records(in);
}

}  // namespace

TEST_CASE("EmbeddingSet invariants") {
  const EmbeddingSet e = testing::tiny_set();
  CHECK(e.size() == 3);
  CHECK(e.dim() == 2);
  CHECK(e.count(kMember) == 2);
  CHECK(e.count(kNonMember) == 1);
  CHECK(capture([] { EmbeddingSet({"a", "a"}, {0, 1}, Matrix(2, 1)); }).code() ==
        FormatCode::kDuplicateId);
  CHECK(capture([] { EmbeddingSet({"a", "b"}, {0, 3}, Matrix(2, 1)); }).code() ==
        FormatCode::kBadLabel);
  CHECK(capture([] {
          EmbeddingSet({"a", "b"}, {0, 1}, Matrix{{1.0}, {std::nan("")}});
        }).code() == FormatCode::kNonFinite);
  CHECK(capture([] { EmbeddingSet({"a"}, {0, 1}, Matrix(1, 1)); }).kind() ==
        ErrorKind::kValidation);
}

TEST_CASE("emb1 reads the two-sample fixture") {
  const EmbeddingSet e({"m", "n"}, {1, 0}, Matrix{{1, 0}, {0, 1}});
  const auto bytes = write_emb1(e);
  CHECK(bytes.size() == 16 + 2 * 2 * 4 + 2 + 2 * 3);
  CHECK(bytes[0] == 'E');
  CHECK(bytes[3] == '1');
  const EmbeddingSet back = read_emb1(bytes);
  CHECK(back.ids() == e.ids());
  CHECK(back.labels() == e.labels());
  CHECK(back.vectors() == e.vectors());
}

TEST_CASE("emb1 round-trip is byte-identical") {
  RngStream rng(5, 0);
  std::vector<std::string> ids;
  std::vector<int> labels;
  Matrix x(40, 9);
  for (std::size_t i = 0; i < 40; ++i) {
    ids.push_back("sample/é" + std::to_string(i));
    labels.push_back(static_cast<int>(i % 2));
  }
  for (double& v : x.data()) v = static_cast<float>(rng.normal());
  const auto bytes = write_emb1(EmbeddingSet(ids, labels, x));
  CHECK(write_emb1(read_emb1(bytes)) == bytes);
}

TEST_CASE("corrupted emb1 corpus: every file rejected with a distinct code") {
  std::set<FormatCode> seen;
  for (const auto& c : testing::corrupt_emb1_corpus()) {
    CAPTURE(c.name);
    const Error e = capture([&] { read_emb1(c.bytes); });
    CHECK(e.code() == c.expected);
    CHECK(e.is_input_error());
    CHECK(std::string(e.what()).find("byte") != std::string::npos);
    seen.insert(e.code());
  }
  CHECK(seen.size() == 10);
}

TEST_CASE("emb1 rejects invalid UTF-8 ids") {
  auto bytes = write_emb1(testing::tiny_set());
  bytes[bytes.size() - 1] = 0xFF;
  CHECK(capture([&] { read_emb1(bytes); }).code() == FormatCode::kBadUtf8);
}

TEST_CASE("csv reader") {
  SUBCASE("label-only header") {
    std::istringstream in("label,f0,f1\n1,1.0,0.0\n0,0.0,1.0\n");
    const EmbeddingSet e = read_embeddings_csv(in);
    CHECK(e.size() == 2);
    CHECK(e.labels() == std::vector<int>{1, 0});
    CHECK(e.vectors() == Matrix{{1, 0}, {0, 1}});
    CHECK(e.ids() == std::vector<std::string>{"0", "1"});
  }
  SUBCASE("with id column") {
    std::istringstream in("id,label,f0\nx,1,0.25\ny,0,-3\n");
    const EmbeddingSet e = read_embeddings_csv(in);
    CHECK(e.ids() == std::vector<std::string>{"x", "y"});
    CHECK(e.vectors()(0, 0) == 0.25);
  }
  SUBCASE("errors name the line") {
    std::istringstream bad("label,f0,f1\n1,1.0\n");
    const Error e = capture([&] { read_embeddings_csv(bad); });
    CHECK(e.code() == FormatCode::kDimensionMismatch);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    std::istringstream nonfinite("label,f0\n1,nan\n");
    CHECK(capture([&] { read_embeddings_csv(nonfinite); }).code() == FormatCode::kNonFinite);
    std::istringstream label("label,f0\n2,1\n");
    CHECK(capture([&] { read_embeddings_csv(label); }).code() == FormatCode::kBadLabel);
  }
  SUBCASE("round-trip within f32") {
    RngStream rng(6, 0);
    Matrix x(10, 3);
    for (double& v : x.data()) v = rng.normal();
    std::vector<std::string> ids;
    for (int i = 0; i < 10; ++i) ids.push_back("r" + std::to_string(i));
    const EmbeddingSet e(ids, {0, 1, 0, 1, 0, 1, 0, 1, 0, 1}, x);
    std::stringstream buf;
    write_embeddings_csv(buf, e);
    const EmbeddingSet back = read_embeddings_csv(buf);
    for (std::size_t i = 0; i < x.data().size(); ++i) {
      CHECK(back.vectors().data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-6));
    }
    CHECK(back.ids() == ids);
  }
}

TEST_CASE("file helpers and two-file mode") {
  const auto m = temp_path("members.emb1");
  const auto n = temp_path("nonmembers.csv");
  write_embeddings(m, testing::tiny_set(), EmbeddingFormat::kEmb1);
  const EmbeddingSet other({"z", "w"}, {1, 1}, Matrix{{2, 2}, {3, 3}});
  write_embeddings(n, other, EmbeddingFormat::kCsv);
  CHECK(embedding_format_from_path(n) == EmbeddingFormat::kCsv);
  CHECK(embedding_format_from_path(m) == EmbeddingFormat::kEmb1);
  const EmbeddingSet pair = read_embedding_pair(m, n);
  CHECK(pair.size() == 5);
  CHECK(pair.count(kMember) == 3);
  CHECK(pair.count(kNonMember) == 2);
  CHECK(capture([] { read_embeddings(temp_path("does_not_exist.emb1")); }).kind() ==
        ErrorKind::kIo);
  fs::remove(m);
  fs::remove(n);
}

TEST_CASE("token records: parse, accept null img logp, reject null inst logp") {
  const TokenRecordSet r = read_jsonl(
      R"({"id":"s1","label":1,"regions":{"desp":[{"logp":-0.5,"H":{"0.5":1.2,"1.0":1.0}},{"logp":-2,"H":{"1.0":0.5,"0.5":0.7}}]}})"
      "\n");
  REQUIRE(r.samples.size() == 1);
  CHECK(r.alphas == std::vector<double>{0.5, 1.0});
  const auto& desp = *r.samples[0].region(RegionId::kDesp);
  CHECK(desp.size() == 2);
  CHECK(*desp[0].logp == -0.5);
  CHECK(desp[1].entropies == std::vector<double>{0.7, 0.5});

  CHECK_NOTHROW(read_jsonl(
      R"({"id":"s","label":0,"regions":{"img":[{"logp":null,"H":{"1.0":0.1}}]}})"));
  CHECK_NOTHROW(read_jsonl(R"({"id":"s","label":0,"regions":{"img":[{"H":{"1.0":0.1}}]}})"));

  const Error inst = capture([] {
    read_jsonl(R"({"id":"bad-one","label":0,"regions":{"inst":[{"logp":null,"H":{"1.0":0.1}}]}})");
  });
  CHECK(inst.code() == FormatCode::kMissingLogp);
  CHECK(std::string(inst.what()).find("bad-one") != std::string::npos);

  CHECK(capture([] {
          read_jsonl(R"({"id":"p","label":0,"regions":{"inst":[{"logp":0.5,"H":{"1.0":0.1}}]}})");
        }).code() == FormatCode::kPositiveLogp);
  CHECK(capture([] {
          read_jsonl(
              R"({"id":"p","label":0,"regions":{"inst":[{"logp":-1,"H":{"1.0":0.1}},{"logp":-1,"H":{"0.5":0.1}}]}})");
        }).code() == FormatCode::kMissingAlpha);
  CHECK(capture([] {
          read_jsonl(R"({"id":"p","label":0,"regions":{"audio":[{"logp":-1,"H":{"1.0":0.1}}]}})");
        }).code() == FormatCode::kUnknownRegion);
  CHECK(capture([] { read_jsonl("{not json"); }).code() == FormatCode::kBadJson);
}

TEST_CASE("token records write/read round-trip") {
  const std::string line =
      R"({"id":"s1","label":1,"regions":{"img":[{"logp":null,"H":{"0.5":1.5,"1.0":1.25}}],"inst":[{"logp":-0.125,"H":{"0.5":0.5,"1.0":0.25}}]}})";
  const TokenRecordSet r = read_jsonl(line + "\n");
  std::ostringstream out;
  write_token_records(out, r);
  CHECK(out.str() == line + "\n");
  CHECK(format_alpha(1.0) == "1.0");
  CHECK(format_alpha(0.5) == "0.5");
  CHECK(format_alpha(2.0) == "2.0");
}

TEST_CASE("slices") {
  TokenRecordSet r;
  r.alphas = {1.0};
  auto tok = [](double lp) { return TokenStat{lp, {0.0}}; };
  TokenSample s;
  s.id = "s";
  s.label = 1;
  s.region(RegionId::kInst) = TokenList{tok(-1), tok(-2)};
  s.region(RegionId::kDesp) = TokenList{tok(-3)};
  r.samples.push_back(s);

  const auto both = slice(r, SliceId::kInstDesp);
  REQUIRE(both.size() == 1);
  CHECK(both[0] == TokenList{tok(-1), tok(-2), tok(-3)});
  CHECK(slice(r, SliceId::kDesp)[0] == *s.region(RegionId::kDesp));

  const Error e = capture([&] { slice(r, SliceId::kImg); });
  CHECK(e.kind() == ErrorKind::kSlice);
  CHECK(std::string(e.what()).ends_with("samples: s"));

  CHECK(parse_slice("inst+desp") == SliceId::kInstDesp);
  CHECK(to_string(SliceId::kInstDesp) == "inst+desp");
  CHECK(capture([] { parse_slice("foo"); }).kind() == ErrorKind::kConfig);
}
