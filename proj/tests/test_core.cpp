#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "doctest.h"
#include "mtmerlin/byte_io.hpp"
#include "mtmerlin/config.hpp"
#include "mtmerlin/error.hpp"
#include "mtmerlin/fft.hpp"
#include "mtmerlin/parallel.hpp"
#include "mtmerlin/raster_io.hpp"
#include "mtmerlin/rng.hpp"
#include "mtmerlin/slcs_io.hpp"
#include "mtmerlin/stack.hpp"
#include "test_support.hpp"

using namespace mtmerlin;

namespace {

ComplexStack random_stack(int T, int H, int W, std::uint64_t seed, Layout layout = Layout::DateMajor,
                          DType dtype = DType::F64) {
  ComplexStack s(T, H, W, layout, dtype);
  RngHandle g(seed);
  for (auto& v : s.data()) v = {g.normal(), g.normal()};
  s.quantize();
  return s;
}

// Direct O(N^2) unitary DFT.
ComplexPlane naive_dft2(const ComplexPlane& x, double sign) {
  ComplexPlane out(x.H, x.W);
  const double scale = 1.0 / std::sqrt(static_cast<double>(x.H) * x.W);
  for (int ky = 0; ky < x.H; ++ky) {
    for (int kx = 0; kx < x.W; ++kx) {
      cplx acc{};
      for (int y = 0; y < x.H; ++y) {
        for (int xx = 0; xx < x.W; ++xx) {
          const double ph = sign * 2.0 * std::numbers::pi * (static_cast<double>(ky) * y / x.H +
                                                             static_cast<double>(kx) * xx / x.W);
          acc += x(y, xx) * std::polar(1.0, ph);
        }
      }
      out(ky, kx) = acc * scale;
    }
  }
  return out;
}

double max_abs_diff(const ComplexPlane& a, const ComplexPlane& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace

TEST_CASE("philox4x32-10 known answers") {
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == std::array<std::uint32_t, 4>{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        std::array<std::uint32_t, 4>{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        std::array<std::uint32_t, 4>{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("rng streams are reproducible and distinct") {
  RngHandle a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  std::vector<std::uint64_t> sa, sb, sc, sd;
  for (int i = 0; i < 64; ++i) {
    sa.push_back(a.next_u64());
    sb.push_back(b.next_u64());
    sc.push_back(c.next_u64());
    sd.push_back(d.next_u64());
  }
  CHECK(sa == sb);
  CHECK(sa != sc);
  CHECK(sa != sd);
  CHECK(RngHandle(42).split(1).seed() == RngHandle(42).split(1).seed());
  CHECK(RngHandle(42).split(1).seed() != RngHandle(42).split(2).seed());
}

TEST_CASE("rng draws do not depend on thread count") {
  const int n = 1000;
  auto draw = [&](int threads) {
    std::vector<double> out(n);
    parallel_for(n, threads, [&](int i) { out[i] = RngHandle(9, static_cast<std::uint64_t>(i)).normal(); });
    return out;
  };
  CHECK(draw(1) == draw(4));
}

TEST_CASE("uniform, normal and below statistics") {
  RngHandle g(1234);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  double umin = 1, umax = 0;
  for (int i = 0; i < n; ++i) {
    const double u = g.uniform();
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    su += u;
    const double z = g.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(umin > 0.0);
  CHECK(umax < 1.0);
  // 4-sigma CLT bounds.
  CHECK(std::abs(su / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::abs(sn / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(sn2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[g.below(7)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 4.0 * std::sqrt(10000.0 * 6.0 / 7.0));
  CHECK(g.below(1) == 0);
}

TEST_CASE("permute_layout index map") {
  SUBCASE("T=2, H=1, W=2 by hand") {
    ComplexStack s(2, 1, 2);
    s.data()[0] = {1, 1};  // z11
    s.data()[1] = {1, 2};  // z12
    s.data()[2] = {2, 1};  // z21
    s.data()[3] = {2, 2};  // z22
    const ComplexStack p = permute_layout(s, Layout::PixelMajor);
    CHECK(p.layout() == Layout::PixelMajor);
    const std::vector<cplx> expect = {{1, 1}, {2, 1}, {1, 2}, {2, 2}};
    CHECK(std::vector<cplx>(p.data().begin(), p.data().end()) == expect);
  }
  SUBCASE("T=1 is the identity on data") {
    const ComplexStack s = random_stack(1, 3, 4, 5);
    const ComplexStack p = permute_layout(s, Layout::PixelMajor);
    CHECK(std::equal(s.data().begin(), s.data().end(), p.data().begin()));
  }
  SUBCASE("single pixel keeps order") {
    const ComplexStack s = random_stack(2, 1, 1, 6);
    const ComplexStack p = permute_layout(s, Layout::PixelMajor);
    CHECK(std::equal(s.data().begin(), s.data().end(), p.data().begin()));
  }
  SUBCASE("round trip is bit exact") {
    const ComplexStack s = random_stack(3, 5, 7, 8);
    const ComplexStack back = permute_layout(permute_layout(s, Layout::PixelMajor), Layout::DateMajor);
    CHECK(back == s);
    for (int t = 0; t < 3; ++t) {
      for (int k = 0; k < 35; ++k) CHECK(permute_layout(s, Layout::PixelMajor).at(t, k) == s.at(t, k));
    }
  }
}

TEST_CASE("split and merge real/imaginary") {
  ComplexPlane p(1, 2);
  p.data = {{1, 2}, {0, 0}};
  auto [re, im] = split_reim(p);
  CHECK(re.data == std::vector<double>{1, 0});
  CHECK(im.data == std::vector<double>{2, 0});
  const ComplexPlane r = testing::random_plane(6, 5, 3);
  auto [a, b] = split_reim(r);
  CHECK(merge_reim(a, b).data == r.data);
  CHECK_THROWS_AS(merge_reim(RealImage(2, 2), RealImage(2, 3)), Error);
}

TEST_CASE("f32 stacks hold float-representable samples") {
  ComplexStack s = random_stack(2, 3, 3, 11, Layout::DateMajor, DType::F32);
  for (const cplx& v : s.data()) {
    CHECK(static_cast<double>(static_cast<float>(v.real())) == v.real());
    CHECK(static_cast<double>(static_cast<float>(v.imag())) == v.imag());
  }
}

TEST_CASE("unitary DFT") {
  SUBCASE("zeros stay zero") {
    const ComplexPlane z(4, 6);
    for (const cplx& v : dft2_forward(z).data) CHECK(v == cplx{});
  }
  SUBCASE("impulse maps to constant 1/4 on 4x4") {
    ComplexPlane d(4, 4);
    d(0, 0) = 1.0;
    for (const cplx& v : dft2_forward(d).data) CHECK(std::abs(v - cplx(0.25, 0)) < 1e-15);
  }
  SUBCASE("matches direct DFT, odd and even sizes") {
    for (auto [H, W] : {std::pair{4, 6}, std::pair{5, 3}, std::pair{7, 8}}) {
      const ComplexPlane x = testing::random_plane(H, W, 17 + H);
      CHECK(max_abs_diff(dft2_forward(x), naive_dft2(x, -1.0)) < 1e-12);
      CHECK(max_abs_diff(dft2_inverse(x), naive_dft2(x, +1.0)) < 1e-12);
    }
  }
  SUBCASE("Parseval and round trip") {
    const ComplexPlane x = testing::random_plane(32, 24, 99);
    const ComplexPlane X = dft2_forward(x);
    double ex = 0, eX = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      ex += std::norm(x.data[i]);
      eX += std::norm(X.data[i]);
    }
    CHECK(std::abs(ex - eX) / ex < 1e-12);
    CHECK(max_abs_diff(dft2_inverse(X), x) < 1e-12);
  }
  SUBCASE("1D transform agrees with the 2D one on a row") {
    const ComplexPlane x = testing::random_plane(1, 10, 5);
    const auto X = dft1_forward(x.data);
    const ComplexPlane X2 = dft2_forward(x);
    for (int k = 0; k < 10; ++k) CHECK(std::abs(X[k] - X2.data[k]) < 1e-13);
    const auto back = dft1_inverse(X);
    for (int k = 0; k < 10; ++k) CHECK(std::abs(back[k] - x.data[k]) < 1e-13);
  }
  CHECK(bin_frequency(0, 8) == 0.0);
  CHECK(bin_frequency(3, 8) == 0.375);
  CHECK(bin_frequency(4, 8) == -0.5);
  CHECK(bin_frequency(7, 8) == -0.125);
  CHECK(bin_frequency(2, 5) == doctest::Approx(0.4));
  CHECK(bin_frequency(3, 5) == doctest::Approx(-0.4));
}

TEST_CASE("SLCS header layout") {
  ComplexStack s(2, 3, 4, Layout::PixelMajor, DType::F32);
  s.at(1, 2, 3) = {1.5, -2.0};
  std::ostringstream os;
  write_slcs(os, s);
  const std::string bytes = os.str();
  REQUIRE(bytes.size() == kSlcsHeaderSize + 2 * 3 * 4 * 2 * 4);
  const unsigned char magic[6] = {0x53, 0x4C, 0x43, 0x53, 0x01, 0x00};
  CHECK(std::memcmp(bytes.data(), magic, 6) == 0);
  auto u32_at = [&](std::size_t off) {
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + off, 4);
    return v;
  };
  CHECK(u32_at(6) == 2);
  CHECK(u32_at(10) == 3);
  CHECK(u32_at(14) == 4);
  CHECK(static_cast<unsigned char>(bytes[18]) == 0);
  CHECK(static_cast<unsigned char>(bytes[19]) == 1);
  for (int i = 20; i < 26; ++i) CHECK(bytes[i] == 0);
  // Pixel-major: the last sample is (t=1, pixel 11).
  float last[2];
  std::memcpy(last, bytes.data() + bytes.size() - 8, 8);
  CHECK(last[0] == 1.5f);
  CHECK(last[1] == -2.0f);
}

TEST_CASE("SLCS round trip is byte identical") {
  for (DType dt : {DType::F32, DType::F64}) {
    for (Layout lay : {Layout::DateMajor, Layout::PixelMajor}) {
      const ComplexStack s = random_stack(3, 5, 4, 21, lay, dt);
      std::ostringstream a;
      write_slcs(a, s);
      std::istringstream in(a.str());
      const ComplexStack r = read_slcs(in);
      CHECK(r == s);
      std::ostringstream b;
      write_slcs(b, r);
      CHECK(a.str() == b.str());
    }
  }
}

TEST_CASE("SLCS reader rejects malformed input") {
  std::ostringstream os;
  write_slcs(os, random_stack(1, 2, 2, 3));
  const std::string good = os.str();
  auto read = [](const std::string& s) {
    std::istringstream in(s);
    return read_slcs(in);
  };
  std::string bad = good;
  bad[0] = 'X';
  CHECK_THROWS_AS(read(bad), Error);
  bad = good;
  bad[22] = 1;
  CHECK_THROWS_AS(read(bad), Error);
  bad = good;
  bad[18] = 7;
  CHECK_THROWS_AS(read(bad), Error);
  CHECK_THROWS_AS(read(good.substr(0, good.size() - 3)), Error);
  try {
    read(good.substr(0, 10));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Format);
  }
}

TEST_CASE("real maps pack into SLCS with zero imaginary parts") {
  std::vector<RealImage> maps = {testing::random_image(3, 4, 1), testing::random_image(3, 4, 2)};
  const ComplexStack s = pack_real_maps(maps);
  for (const cplx& v : s.data()) CHECK(v.imag() == 0.0);
  const auto back = unpack_real_maps(s);
  REQUIRE(back.size() == 2);
  CHECK(back[0].data == maps[0].data);
  CHECK(back[1].data == maps[1].data);
}

TEST_CASE("config parsing and diagnostics") {
  const Config c = Config::parse("# comment\nsize = 64\nname = demo  # trailing\nratio=0.5\nlist = 1, 2,3\nflag = on\n",
                                 "test.cfg");
  CHECK(c.get_int("size", 0) == 64);
  CHECK(c.get_string("name", "") == "demo");
  CHECK(c.get_double("ratio", 0) == 0.5);
  CHECK(c.get_ints("list", {}) == std::vector<int>{1, 2, 3});
  CHECK(c.get_bool("flag", false));
  CHECK(c.get_int("missing", 7) == 7);
  CHECK_NOTHROW(c.reject_unknown());

  const Config u = Config::parse("a = 1\nb = 2\n", "x.cfg");
  u.get_int("a", 0);
  try {
    u.reject_unknown();
    FAIL("unknown key accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
    CHECK(std::string(e.what()).find("x.cfg:2") != std::string::npos);
    CHECK(std::string(e.what()).find("'b'") != std::string::npos);
  }
  const Config bad = Config::parse("n = twelve\n", "y.cfg");
  CHECK_THROWS_WITH_AS(bad.get_int("n", 0), doctest::Contains("y.cfg:1"), Error);
  CHECK_THROWS_AS(Config::parse("no equals sign\n"), Error);
  CHECK_THROWS_AS(Config::parse("a = 1\na = 2\n"), Error);
}

TEST_CASE("config hash is canonical and override-sensitive") {
  Config a = Config::parse("x = 1\ny = 2\n");
  const Config b = Config::parse("# reordered\ny=2\n\nx =  1\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
  const std::string before = a.hash();
  a.apply_override("x=3");
  CHECK(a.hash() != before);
  CHECK(a.get_int("x", 0) == 3);
  CHECK_THROWS_AS(a.apply_override("novalue"), Error);
  // FNV-1a 64 reference values.
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("PGM16 writer") {
  testing::TempDir dir("pgm");
  RealImage img(2, 3);
  img.data = {0.0, 0.5, 1.0, -1.0, 2.0, 0.25};
  write_pgm16(dir / "a.pgm", img, 0.0, 1.0, {"config_hash=abc"});
  const Pgm16 p = read_pgm16(dir / "a.pgm");
  CHECK(p.W == 3);
  CHECK(p.H == 2);
  CHECK(p.comments == std::vector<std::string>{"config_hash=abc"});
  CHECK(p.samples == std::vector<std::uint16_t>{0, 32768, 65535, 0, 65535, 16384});
  const std::string raw = testing::slurp(dir / "a.pgm");
  // Big-endian: 32768 is 0x80 0x00.
  const std::size_t data_start = raw.size() - 12;
  CHECK(static_cast<unsigned char>(raw[data_start + 2]) == 0x80);
  CHECK(static_cast<unsigned char>(raw[data_start + 3]) == 0x00);
  CHECK_THROWS_AS(write_pgm16(dir / "b.pgm", img, 1.0, 1.0), Error);
}
