#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "generators.hpp"
#include "histofilter/error.hpp"
#include "histofilter/imaging.hpp"

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

// Minimal PNG writer with stored (uncompressed) deflate blocks, independent
// of the codec under test.
std::uint32_t crc32(const std::vector<std::uint8_t>& data, std::size_t from) {
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::size_t i = from; i < data.size(); ++i) {
    c ^= data[i];
    for (int k = 0; k < 8; ++k) c = (c & 1u) ? (0xEDB88320u ^ (c >> 1)) : (c >> 1);
  }
  return c ^ 0xFFFFFFFFu;
}

void put32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  for (int s = 24; s >= 0; s -= 8) v.push_back(static_cast<std::uint8_t>(x >> s));
}

void chunk(std::vector<std::uint8_t>& out, const char* type, const std::vector<std::uint8_t>& body) {
  put32(out, static_cast<std::uint32_t>(body.size()));
  std::vector<std::uint8_t> c(type, type + 4);
  c.insert(c.end(), body.begin(), body.end());
  out.insert(out.end(), c.begin(), c.end());
  put32(out, crc32(c, 0));
}

/// samples: row-major, `channels` per pixel, each `bit_depth` wide (8 or 16).
std::vector<std::uint8_t> make_png(int w, int h, int channels, int bit_depth, const std::vector<std::uint16_t>& samples) {
  std::vector<std::uint8_t> raw;
  std::size_t k = 0;
  for (int y = 0; y < h; ++y) {
    raw.push_back(0);  // filter: none
    for (int i = 0; i < w * channels; ++i, ++k) {
      if (bit_depth == 16) raw.push_back(static_cast<std::uint8_t>(samples[k] >> 8));
      raw.push_back(static_cast<std::uint8_t>(samples[k] & 0xFF));
    }
  }
  std::vector<std::uint8_t> z = {0x78, 0x01, 0x01};
  const auto len = static_cast<std::uint16_t>(raw.size());
  z.push_back(static_cast<std::uint8_t>(len & 0xFF));
  z.push_back(static_cast<std::uint8_t>(len >> 8));
  z.push_back(static_cast<std::uint8_t>(~len & 0xFF));
  z.push_back(static_cast<std::uint8_t>((~len >> 8) & 0xFF));
  z.insert(z.end(), raw.begin(), raw.end());
  std::uint32_t a = 1, b = 0;
  for (auto byte : raw) {
    a = (a + byte) % 65521u;
    b = (b + a) % 65521u;
  }
  put32(z, (b << 16) | a);

  std::vector<std::uint8_t> png = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  std::vector<std::uint8_t> ihdr;
  put32(ihdr, static_cast<std::uint32_t>(w));
  put32(ihdr, static_cast<std::uint32_t>(h));
  ihdr.push_back(static_cast<std::uint8_t>(bit_depth));
  ihdr.push_back(channels == 1 ? 0 : channels == 3 ? 2 : 6);
  ihdr.insert(ihdr.end(), {0, 0, 0});
  chunk(png, "IHDR", ihdr);
  chunk(png, "IDAT", z);
  chunk(png, "IEND", {});
  return png;
}

bool window_contains(PixelPoint origin, int size, int x, int y) {
  return x >= origin.x && x < origin.x + size && y >= origin.y && y < origin.y + size;
}

}  // namespace

TEST_CASE("compute_grid: 700x460 at 150") {
  const auto g = compute_grid(700, 460, 150);
  CHECK(g.x_positions == std::vector<int>{0, 138, 275, 413, 550});
  CHECK(g.y_positions == std::vector<int>{0, 155, 310});
  CHECK(g.count() == 15);
}

TEST_CASE("compute_grid: exact fit and two adjacent tiles") {
  const auto one = compute_grid(150, 150, 150);
  CHECK(one.x_positions == std::vector<int>{0});
  CHECK(one.y_positions == std::vector<int>{0});
  const auto two = compute_grid(300, 150, 150);
  CHECK(two.x_positions == std::vector<int>{0, 150});
  CHECK(two.y_positions == std::vector<int>{0});
}

TEST_CASE("compute_grid: overlap and gap geometry of 700x460") {
  const auto g = compute_grid(700, 460, 150);
  for (std::size_t i = 1; i < g.x_positions.size(); ++i) {
    const int overlap = g.x_positions[i - 1] + 150 - g.x_positions[i];
    CHECK((overlap == 12 || overlap == 13));
  }
  CHECK(g.x_positions.back() + 150 == 700);
  for (std::size_t i = 1; i < g.y_positions.size(); ++i) CHECK(g.y_positions[i] - (g.y_positions[i - 1] + 150) == 5);
  CHECK(g.y_positions.back() + 150 == 460);
}

TEST_CASE("compute_grid: errors") {
  CHECK(code_of([] { compute_grid(100, 460, 150); }) == ErrorCode::PatchTooLarge);
  CHECK(code_of([] { compute_grid(700, 149, 150); }) == ErrorCode::PatchTooLarge);
}

TEST_CASE("property: grid positions, count and anchoring") {
  auto rng = make_rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const int p = gen::uniform_int(rng, 1, 200);
    const int w = gen::uniform_int(rng, p, 2000);
    const int h = gen::uniform_int(rng, p, 2000);
    const auto g = compute_grid(w, h, p);
    const auto expect_n = [&](int dim) {
      return std::max<long>(1, std::lround(static_cast<double>(dim) / p));
    };
    REQUIRE(static_cast<long>(g.x_positions.size()) == expect_n(w));
    REQUIRE(static_cast<long>(g.y_positions.size()) == expect_n(h));
    for (const auto& [axis, dim] : {std::pair{&g.x_positions, w}, std::pair{&g.y_positions, h}}) {
      CHECK(axis->front() == 0);
      CHECK(std::is_sorted(axis->begin(), axis->end()));
      for (int v : *axis) CHECK((v >= 0 && v <= dim - p));
      if (axis->size() > 1) CHECK(axis->back() == dim - p);
    }
  }
}

TEST_CASE("extract_patches: 15 crops of 150, row-major, pixel exact") {
  auto rng = make_rng(3);
  const auto img = gen::image(rng, 700, 460);
  const auto g = compute_grid(700, 460, 150);
  const auto patches = extract_patches(img, g);
  REQUIRE(patches.size() == 15);
  std::size_t k = 0;
  for (int y : g.y_positions)
    for (int x : g.x_positions) {
      const auto& p = patches[k++];
      CHECK(p.origin == PixelPoint{x, y});
      REQUIRE(p.image.width() == 150);
      REQUIRE(p.image.height() == 150);
      bool same = true;
      for (int yy = 0; yy < 150 && same; ++yy)
        for (int xx = 0; xx < 150 && same; ++xx)
          for (int c = 0; c < 3; ++c) same = same && p.image.at(xx, yy, c) == img.at(x + xx, y + yy, c);
      CHECK(same);
    }
}

TEST_CASE("extract_patches: constant image gives constant patches") {
  RgbImage img(700, 460);
  for (int y = 0; y < 460; ++y)
    for (int x = 0; x < 700; ++x) img.set(x, y, 12, 200, 77);
  for (const auto& p : extract_patches(img, compute_grid(700, 460, 150)))
    for (int y = 0; y < 150; ++y)
      for (int x = 0; x < 150; ++x) {
        REQUIRE(p.image.at(x, y, 0) == 12);
        REQUIRE(p.image.at(x, y, 1) == 200);
        REQUIRE(p.image.at(x, y, 2) == 77);
      }
}

TEST_CASE("extract_patches: single red pixel shows in exactly its windows") {
  RgbImage img(700, 460);
  img.set(413, 310, 255, 0, 0);
  const auto patches = extract_patches(img, compute_grid(700, 460, 150));
  int shown = 0;
  for (const auto& p : patches) {
    bool red = false;
    for (int y = 0; y < 150; ++y)
      for (int x = 0; x < 150; ++x) red = red || p.image.at(x, y, 0) == 255;
    CHECK(red == window_contains(p.origin, 150, 413, 310));
    shown += red;
  }
  CHECK(shown == 2);  // x windows 275 and 413, y window 310
}

TEST_CASE("extract_patches: origins rebuild the grid") {
  RgbImage img(523, 311);
  const auto g = compute_grid(523, 311, 100);
  const auto patches = extract_patches(img, g);
  std::vector<int> xs, ys;
  for (const auto& p : patches) {
    xs.push_back(p.origin.x);
    ys.push_back(p.origin.y);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  CHECK(xs == g.x_positions);
  CHECK(ys == g.y_positions);
}

TEST_CASE("extract_patches: GridMismatch for a foreign grid") {
  RgbImage img(200, 200);
  CHECK(code_of([&] { extract_patches(img, compute_grid(700, 460, 150)); }) == ErrorCode::GridMismatch);
}

TEST_CASE("decode: 2x2 RGB PNG fixture") {
  const std::vector<std::uint16_t> px = {255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 20, 30};
  const auto png = make_png(2, 2, 3, 8, px);
  const auto img = decode_image_bytes(png);
  REQUIRE(img.width() == 2);
  REQUIRE(img.height() == 2);
  std::size_t k = 0;
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x)
      for (int c = 0; c < 3; ++c) CHECK(img.at(x, y, c) == px[k++]);
}

TEST_CASE("decode: grayscale replicates, alpha is dropped") {
  const auto gray = decode_image_bytes(make_png(2, 1, 1, 8, {7, 250}));
  CHECK(gray.at(0, 0, 0) == 7);
  CHECK(gray.at(0, 0, 2) == 7);
  CHECK(gray.at(1, 0, 1) == 250);
  const auto rgba = decode_image_bytes(make_png(1, 1, 4, 8, {1, 2, 3, 0}));
  CHECK(rgba.at(0, 0, 0) == 1);
  CHECK(rgba.at(0, 0, 1) == 2);
  CHECK(rgba.at(0, 0, 2) == 3);
}

TEST_CASE("decode: 16-bit samples are rescaled to 8 bit") {
  const std::vector<std::uint16_t> px = {0, 65535, 257, 32768, 1000, 65279};
  const auto img = decode_image_bytes(make_png(2, 1, 3, 16, px));
  for (std::size_t i = 0; i < px.size(); ++i) {
    const auto expected = static_cast<int>(std::lround(px[i] * 255.0 / 65535.0));
    CHECK(img.at(static_cast<int>(i / 3), 0, static_cast<int>(i % 3)) == expected);
  }
}

TEST_CASE("decode: write_png round trip") {
  gen::TempDir dir("img");
  auto rng = make_rng(5);
  const auto img = gen::image(rng, 37, 23);
  write_png(img, dir / "a.png");
  CHECK(decode_image(dir / "a.png") == img);
}

TEST_CASE("decode: errors") {
  gen::TempDir dir("img");
  { std::ofstream(dir / "empty.png"); }
  CHECK(code_of([&] { decode_image(dir / "empty.png"); }) == ErrorCode::CorruptFile);
  CHECK(code_of([&] { decode_image(dir / "absent.png"); }) == ErrorCode::CorruptFile);
  const std::string text = "this is not an image at all";
  CHECK(code_of([&] {
          decode_image_bytes(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
        }) == ErrorCode::UnsupportedFormat);
  auto png = make_png(2, 2, 3, 8, std::vector<std::uint16_t>(12, 9));
  png.resize(30);  // keep the signature, lose the data
  CHECK(code_of([&] { decode_image_bytes(png); }) == ErrorCode::CorruptFile);
}

TEST_CASE("patch_name and expand_to_patches") {
  CHECK(patch_name("img7", PixelPoint{138, 310}) == "img7_y310_x138");
  SampleRecord whole;
  whole.sample_id = "img";
  whole.image_id = "img";
  whole.patient_id = "P1";
  whole.magnification = Magnification::x100;
  whole.class_label = "adenosis";
  whole.binary_label = BinaryLabel::benign;
  whole.source_path = "img.png";
  SampleRecord patch = whole;
  patch.sample_id = "other_y0_x0";
  patch.image_id = "other";
  patch.patch_origin = PixelPoint{0, 0};
  const auto m = DatasetManifest::make({whole, patch}, DatasetKind::tumor_target);
  const auto out = expand_to_patches(m, 150, [](const SampleRecord&) { return std::pair{700, 460}; });
  REQUIRE(out.size() == 16);
  CHECK(out.records()[0].sample_id == "img_y0_x0");
  CHECK(out.records()[14].sample_id == "img_y310_x550");
  for (std::size_t i = 0; i < 15; ++i) {
    CHECK(out.records()[i].patient_id == "P1");
    CHECK(out.records()[i].image_id == "img");
    CHECK(out.records()[i].binary_label == BinaryLabel::benign);
  }
  CHECK(out.records()[15].sample_id == "other_y0_x0");
}
