#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "generators.hpp"
#include "histofilter/error.hpp"
#include "histofilter/feature_io.hpp"

using namespace histofilter;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::UsageError;
}

// Byte-level FV01 builder, written from the format description only.
struct Fv01 {
  std::string bytes;
  void u16(std::uint16_t v) {
    bytes.push_back(static_cast<char>(v & 0xFF));
    bytes.push_back(static_cast<char>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) bytes.push_back(static_cast<char>((v >> s) & 0xFF));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void id(const std::string& s) {
    u16(static_cast<std::uint16_t>(s.size()));
    bytes += s;
  }
};

std::string fixture_2x3() {
  Fv01 b;
  b.bytes = "FV01";
  b.u32(2);
  b.u32(3);
  b.id("a");
  for (float v : {0.5f, -1.0f, 2.0f}) b.f32(v);
  b.id("bb");
  for (float v : {0.25f, 3.0f, -0.125f}) b.f32(v);
  return b.bytes;
}

void write_bytes(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

}  // namespace

TEST_CASE("FV01: golden fixture decodes to exact values and re-encodes to the same bytes") {
  const auto m = decode_features(fixture_2x3());
  REQUIRE(m.size() == 2);
  REQUIRE(m.dim() == 3);
  CHECK(m.sample_ids() == std::vector<std::string>{"a", "bb"});
  CHECK(m.rows()(0, 0) == 0.5);
  CHECK(m.rows()(0, 1) == -1.0);
  CHECK(m.rows()(0, 2) == 2.0);
  CHECK(m.rows()(1, 0) == 0.25);
  CHECK(m.rows()(1, 1) == 3.0);
  CHECK(m.rows()(1, 2) == -0.125);
  CHECK(encode_features(m) == fixture_2x3());
}

TEST_CASE("FV01: empty matrix") {
  const auto e = FeatureMatrix::empty(7);
  Fv01 b;
  b.bytes = "FV01";
  b.u32(0);
  b.u32(7);
  CHECK(encode_features(e) == b.bytes);
  const auto back = decode_features(b.bytes);
  CHECK(back.size() == 0);
  CHECK(back.dim() == 7);
}

TEST_CASE("FV01: 2048-dim file as written by an external extractor") {
  Fv01 b;
  b.bytes = "FV01";
  b.u32(3);
  b.u32(2048);
  for (int r = 0; r < 3; ++r) {
    b.id("img_y0_x" + std::to_string(r));
    for (int k = 0; k < 2048; ++k) b.f32(static_cast<float>(r * 2048 + k) / 4096.0f);
  }
  gen::TempDir dir("fv");
  write_bytes(dir / "deep.fv", b.bytes);
  const auto m = read_features(dir / "deep.fv");
  CHECK(m.dim() == 2048);
  CHECK(m.size() == 3);
  CHECK(m.rows()(2, 2047) == static_cast<double>(static_cast<float>(2 * 2048 + 2047) / 4096.0f));
}

TEST_CASE("FV01: malformed inputs") {
  auto bad = fixture_2x3();
  bad[0] = 'X';
  bad[1] = 'X';
  CHECK(code_of([&] { decode_features(bad); }) == ErrorCode::BadMagic);
  const auto good = fixture_2x3();
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, std::size_t{13}, good.size() - 1})
    CHECK(code_of([&] { decode_features(good.substr(0, cut)); }) == ErrorCode::Truncated);
  CHECK(code_of([&] { decode_features(good + "x"); }) == ErrorCode::Truncated);

  Fv01 dup;
  dup.bytes = "FV01";
  dup.u32(2);
  dup.u32(1);
  dup.id("same");
  dup.f32(1);
  dup.id("same");
  dup.f32(2);
  CHECK(code_of([&] { decode_features(dup.bytes); }) == ErrorCode::DuplicateSampleId);

  Fv01 nan;
  nan.bytes = "FV01";
  nan.u32(1);
  nan.u32(1);
  nan.id("n");
  nan.f32(std::nanf(""));
  CHECK(code_of([&] { decode_features(nan.bytes); }) == ErrorCode::NonFinite);

  // huge header counts must not allocate before the size check
  Fv01 huge;
  huge.bytes = "FV01";
  huge.u32(0xFFFFFFFFu);
  huge.u32(0xFFFFFFFFu);
  CHECK(code_of([&] { decode_features(huge.bytes); }) == ErrorCode::Truncated);
}

TEST_CASE("FeatureMatrix invariants") {
  RowMatrix r(2, 2);
  r << 1, 2, 3, std::numeric_limits<double>::infinity();
  CHECK(code_of([&] { FeatureMatrix({"a", "b"}, r); }) == ErrorCode::NonFinite);
  r(1, 1) = 0;
  CHECK(code_of([&] { FeatureMatrix({"a", "a"}, r); }) == ErrorCode::DuplicateSampleId);
  CHECK(code_of([&] { FeatureMatrix({"a"}, r); }) == ErrorCode::DimMismatch);
  RowMatrix big(1, 1);
  big << 1e300;
  const FeatureMatrix m({"x"}, big);
  CHECK(code_of([&] { encode_features(m); }) == ErrorCode::NonFinite);
}

TEST_CASE("property: round trip to f32 precision and deterministic bytes") {
  auto rng = make_rng(400);
  gen::TempDir dir("fv");
  for (int trial = 0; trial < 20; ++trial) {
    const int n = gen::uniform_int(rng, 0, 200);
    const int d = gen::uniform_int(rng, 1, 300);
    const FeatureMatrix m(gen::ids(static_cast<std::size_t>(n), "row_"), gen::matrix(rng, n, d, 10.0));
    write_features(m, dir / "m.fv");
    const auto back = read_features(dir / "m.fv");
    REQUIRE(back.size() == m.size());
    CHECK(back.sample_ids() == m.sample_ids());
    for (Eigen::Index i = 0; i < m.rows().size(); ++i)
      REQUIRE(back.rows().data()[i] == static_cast<double>(static_cast<float>(m.rows().data()[i])));
    CHECK(encode_features(m) == encode_features(m));
    CHECK(encode_features(back) == encode_features(m));
  }
}

TEST_CASE("round trip at 10^4 x 2048") {
  auto rng = make_rng(401);
  gen::TempDir dir("fv");
  const FeatureMatrix m(gen::ids(10000), gen::matrix(rng, 10000, 2048));
  write_features(m, dir / "big.fv");
  CHECK(std::filesystem::file_size(dir / "big.fv") == encode_features(m).size());
  const auto back = read_features(dir / "big.fv");
  const RowMatrix expected = m.rows().cast<float>().cast<double>();
  CHECK(back.rows() == expected);
}

TEST_CASE("CSV mirror") {
  gen::TempDir dir("fv");
  auto rng = make_rng(402);
  const FeatureMatrix m(gen::ids(17), gen::matrix(rng, 17, 5));
  write_features_csv(m, dir / "m.csv");
  std::ifstream in(dir / "m.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "sample_id,v0,v1,v2,v3,v4");
  const auto back = read_features_csv(dir / "m.csv");
  CHECK(back.sample_ids() == m.sample_ids());
  CHECK(back.rows() == m.rows());

  write_bytes(dir / "bad.csv", "sample_id,v0,v1\na,1,2\nb,1\n");
  CHECK(code_of([&] { read_features_csv(dir / "bad.csv"); }) == ErrorCode::MalformedRow);
  write_bytes(dir / "nan.csv", "sample_id,v0\na,abc\n");
  CHECK(code_of([&] { read_features_csv(dir / "nan.csv"); }) == ErrorCode::MalformedRow);
  write_bytes(dir / "noid.csv", "id,v0\na,1\n");
  CHECK(code_of([&] { read_features_csv(dir / "noid.csv"); }) == ErrorCode::MissingColumn);
}

TEST_CASE("join_rows: total join or a listed orphan error") {
  std::vector<SampleRecord> recs;
  for (const char* id : {"b", "a", "c"}) {
    SampleRecord r;
    r.sample_id = r.image_id = id;
    r.class_label = "Tumor";
    recs.push_back(r);
  }
  const auto manifest = DatasetManifest::make(recs, DatasetKind::tissue_source);
  RowMatrix x = RowMatrix::Zero(4, 2);
  const FeatureMatrix f({"a", "b", "c", "extra"}, x);
  CHECK(join_rows(manifest, f) == std::vector<std::size_t>{1, 0, 2});
  const FeatureMatrix partial({"a", "zzz"}, RowMatrix::Zero(2, 2));
  try {
    join_rows(manifest, partial);
    FAIL("expected JoinOrphans");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::JoinOrphans);
    const std::string what = e.what();
    CHECK(what.find('b') != std::string::npos);
    CHECK(what.find('c') != std::string::npos);
  }
}

TEST_CASE("select keeps the given order") {
  RowMatrix x(3, 1);
  x << 10, 20, 30;
  const FeatureMatrix f({"p", "q", "r"}, x);
  const std::vector<std::size_t> idx = {2, 0};
  const auto s = f.select(idx);
  CHECK(s.sample_ids() == std::vector<std::string>{"r", "p"});
  CHECK(s.rows()(0, 0) == 30);
  CHECK(s.index_of("p") == std::size_t{1});
  CHECK(!s.index_of("q"));
}
