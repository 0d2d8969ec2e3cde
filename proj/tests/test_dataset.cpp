#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "selfseg/dataset.hpp"
#include "selfseg/error.hpp"

using namespace selfseg;
namespace fs = std::filesystem;

namespace {

void write_raw(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

std::string pgm16(int w, int h, int maxval, std::uint16_t fill) {
  std::string s = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n" + std::to_string(maxval) + "\n";
  for (int i = 0; i < w * h; ++i) {
    s.push_back(static_cast<char>(fill >> 8));
    s.push_back(static_cast<char>(fill & 0xFF));
  }
  return s;
}

std::string pgm8(int w, int h, std::uint8_t fill) {
  return "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n" + std::string(w * h, static_cast<char>(fill));
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("load_image normalizes by the declared maxval") {
    const auto dir = oracle::temp_dir("load_image");
    write_raw(dir / "full.pgm", pgm16(8, 8, 65535, 65535));
    CHECK(load_image(dir / "full.pgm")(3, 4) == 1.0);

    write_raw(dir / "zero.pgm", pgm8(8, 8, 0));
    CHECK(load_image(dir / "zero.pgm")(0, 0) == 0.0);

    write_raw(dir / "quarter.pgm", pgm16(8, 8, 65535, 16384));
    const double v = load_image(dir / "quarter.pgm")(7, 7);
    CHECK(v == 16384.0 / 65535.0);
    CHECK(v == doctest::Approx(0.2500038147).epsilon(1e-9));
  }

  TEST_CASE("load_image rejects malformed input") {
    const auto dir = oracle::temp_dir("load_image_bad");
    write_raw(dir / "p2.pgm", "P2\n8 8\n255\n");
    write_raw(dir / "small.pgm", pgm8(4, 8, 1));
    write_raw(dir / "short.pgm", "P5\n8 8\n255\nabc");
    write_raw(dir / "junk.pgm", "P5\nx 8\n255\n");
    auto kind_of = [](const fs::path& p) {
      try {
        load_image(p);
      } catch (const Error& e) {
        return e.kind();
      }
      return Error::Kind::Invalid;
    };
    CHECK(kind_of(dir / "p2.pgm") == Error::Kind::Format);
    CHECK(kind_of(dir / "small.pgm") == Error::Kind::Dimension);
    CHECK(kind_of(dir / "short.pgm") == Error::Kind::Format);
    CHECK(kind_of(dir / "junk.pgm") == Error::Kind::Format);
  }

  TEST_CASE("header comments are skipped") {
    const auto dir = oracle::temp_dir("comments");
    write_raw(dir / "c.pgm", "P5\n# made by hand\n8 8\n# depth\n255\n" + std::string(64, '\x80'));
    CHECK(load_image(dir / "c.pgm")(0, 0) == 128.0 / 255.0);
  }

  TEST_CASE("normalization is monotone in the raw value") {
    const auto dir = oracle::temp_dir("monotone");
    double prev = -1.0;
    for (std::uint16_t raw : {0, 1, 2, 255, 256, 16384, 40000, 65534, 65535}) {
      write_raw(dir / "m.pgm", pgm16(8, 8, 65535, raw));
      const double v = load_image(dir / "m.pgm")(0, 0);
      CHECK(v > prev);
      prev = v;
    }
  }

  TEST_CASE("save_labelmap writes raw codes") {
    const auto dir = oracle::temp_dir("labelmap_bytes");
    std::vector<std::uint8_t> codes(64, 0);
    codes[0] = 0;
    codes[1] = 1;
    codes[2] = 2;
    codes[3] = 255;
    const LabelMap m(8, 8, codes);
    save_labelmap(m, dir / "l.pgm");
    const std::string bytes = oracle::read_file(dir / "l.pgm");
    const std::string header = "P5\n8 8\n255\n";
    REQUIRE(bytes.size() == header.size() + 64);
    CHECK(bytes.substr(0, header.size()) == header);
    CHECK(static_cast<unsigned char>(bytes[header.size() + 0]) == 0x00);
    CHECK(static_cast<unsigned char>(bytes[header.size() + 1]) == 0x01);
    CHECK(static_cast<unsigned char>(bytes[header.size() + 2]) == 0x02);
    CHECK(static_cast<unsigned char>(bytes[header.size() + 3]) == 0xFF);
  }

  TEST_CASE("label maps and images round-trip bit-exactly") {
    const auto dir = oracle::temp_dir("roundtrip");
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
      const int w = rng.between(8, 20), h = rng.between(8, 20);
      std::vector<std::uint8_t> codes(static_cast<std::size_t>(w) * h);
      const std::uint8_t valid[] = {0, 1, 2, 255};
      for (auto& c : codes) c = valid[rng.below(4)];
      const LabelMap m(w, h, codes);
      save_labelmap(m, dir / "m.pgm");
      CHECK(load_labelmap(dir / "m.pgm") == m);

      // 16-bit images: any k/65535 value survives save/load unchanged.
      std::vector<double> values(static_cast<std::size_t>(w) * h);
      for (auto& v : values) v = static_cast<double>(rng.below(65536)) / 65535.0;
      const Image img(w, h, values);
      save_image(img, dir / "i.pgm");
      CHECK(load_image(dir / "i.pgm") == img);

      // 8-bit raw payloads survive read/write.
      PgmData p8{w, h, 255, {}};
      for (int i = 0; i < w * h; ++i) p8.samples.push_back(static_cast<std::uint16_t>(rng.below(256)));
      write_pgm(p8, dir / "p8.pgm");
      const PgmData back = read_pgm(dir / "p8.pgm");
      CHECK(back.samples == p8.samples);
      CHECK(back.maxval == 255);
    }
  }

  TEST_CASE("invalid label codes are rejected before writing") {
    CHECK_THROWS_AS(LabelMap(8, 8, std::vector<std::uint8_t>(64, 7)), Error);
    const auto dir = oracle::temp_dir("bad_code");
    PgmData p{8, 8, 255, std::vector<std::uint16_t>(64, 7)};
    write_pgm(p, dir / "seven.pgm");
    CHECK_THROWS_AS(load_labelmap(dir / "seven.pgm"), Error);
  }

  TEST_CASE("unwritable path is an I/O error") {
    try {
      save_labelmap(LabelMap(8, 8), "/nonexistent_dir/x.pgm");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == Error::Kind::Io);
    }
  }

  TEST_CASE("manifest parsing") {
    const Manifest a = parse_manifest("train,a.pgm\n");
    REQUIRE(a.entries.size() == 1);
    CHECK(a.entries[0].split == Split::Train);
    CHECK(a.entries[0].image == "a.pgm");
    CHECK_FALSE(a.entries[0].mask);
    CHECK_FALSE(a.entries[0].ground_truth);

    const Manifest b = parse_manifest("train,a.pgm\ntest,b.pgm,b_mask.pgm,b_gt.pgm\n");
    REQUIRE(b.entries.size() == 2);
    CHECK(b.entries[1].split == Split::Test);
    CHECK(*b.entries[1].mask == "b_mask.pgm");
    CHECK(*b.entries[1].ground_truth == "b_gt.pgm");

    const Manifest c = parse_manifest("# comment\n\ntrain,a.pgm,,a_gt.pgm\n", "/data");
    CHECK(c.entries[0].image == fs::path("/data/a.pgm"));
    CHECK_FALSE(c.entries[0].mask);
    CHECK(*c.entries[0].ground_truth == fs::path("/data/a_gt.pgm"));
  }

  TEST_CASE("manifest errors") {
    auto kind_of = [](const std::string& text) {
      try {
        parse_manifest(text);
      } catch (const Error& e) {
        return e.kind();
      }
      return Error::Kind::Invalid;
    };
    CHECK(kind_of("train,a.pgm\ntrain,a.pgm\n") == Error::Kind::Manifest);
    CHECK(kind_of("train,a.pgm\nvalidate,b.pgm\n") == Error::Kind::Manifest);
    CHECK(kind_of("test,b.pgm\n") == Error::Kind::Manifest);
    CHECK(kind_of("train\n") == Error::Kind::Manifest);
  }

  TEST_CASE("manifest save/load preserves entries") {
    const auto dir = oracle::temp_dir("manifest_io");
    Manifest m;
    m.entries.push_back({Split::Train, "a.pgm", std::nullopt, std::nullopt});
    m.entries.push_back({Split::Test, "b.pgm", "b_mask.pgm", "b_gt.pgm"});
    m.entries.push_back({Split::Train, "c.pgm", std::nullopt, "c_gt.pgm"});
    save_manifest(m, dir / "manifest.txt");
    const Manifest back = load_manifest(dir / "manifest.txt");
    REQUIRE(back.entries.size() == 3);
    CHECK(back.entries[1].image == dir / "b.pgm");
    CHECK(*back.entries[1].mask == dir / "b_mask.pgm");
    CHECK_FALSE(back.entries[2].mask);
    CHECK(*back.entries[2].ground_truth == dir / "c_gt.pgm");
  }

  TEST_CASE("image invariants") {
    CHECK_THROWS_AS(Image(7, 8), Error);
    CHECK_THROWS_AS(Image(8, 8, std::vector<double>(64, 1.5)), Error);
    CHECK_THROWS_AS(Image(8, 8, std::vector<double>(63, 0.5)), Error);
  }
}
