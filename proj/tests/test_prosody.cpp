#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "lprobe/error.hpp"
#include "lprobe/prosody.hpp"
#include "lprobe/rng.hpp"
#include "synth.hpp"

using namespace lprobe;
namespace fs = std::filesystem;

namespace {

const std::vector<double> kScales{10, 20, 40, 80, 160, 320};  // widths in frames

AlignmentTier even_words(std::size_t count, double dur) {
  AlignmentTier t{Tier::Word, {}};
  for (std::size_t i = 0; i < count; ++i) t.segments.push_back({"w" + std::to_string(i), i * dur, (i + 1) * dur});
  return t;
}

std::uint32_t argmax(const std::vector<WordProsody>& rows, bool prominence) {
  std::uint32_t best = 0;
  for (std::uint32_t i = 1; i < rows.size(); ++i) {
    const double a = prominence ? rows[i].prominence : rows[i].boundary;
    const double b = prominence ? rows[best].prominence : rows[best].boundary;
    if (a > b) best = i;
  }
  return best;
}

void put(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("mexican hat kernel") {
  CHECK(mexican_hat(0.0) == doctest::Approx(2.0 / (std::sqrt(3.0) * std::pow(M_PI, 0.25))));
  CHECK(mexican_hat(1.0) == doctest::Approx(0.0));
  CHECK(mexican_hat(2.0) < 0.0);
  for (double s : {1.3, 5.0, 40.0}) {
    const auto k = mexican_hat_kernel(s);
    CHECK(k.size() == 2 * static_cast<std::size_t>(std::ceil(5 * s)) + 1);
    double sum = 0.0;
    for (double v : k) sum += v;
    CHECK(std::abs(sum) < 1e-12);
  }
  CHECK_THROWS_AS(mexican_hat_kernel(0.0), Error);
}

TEST_CASE("impulse response reproduces the scaled wavelet") {
  std::vector<double> x(401, 0.0);
  x[200] = 1.0;
  const auto plane = cwt(x, std::vector<double>{4.0, 8.0, 16.0});
  for (std::size_t si = 0; si < 3; ++si) {
    const double s = plane.scales_frames[si];
    for (std::size_t b = 150; b <= 250; b += 5) {
      const double expected = mexican_hat((200.0 - static_cast<double>(b)) / s) / std::sqrt(s);
      CHECK(std::abs(plane.coefficients[si][b] - expected) < 1e-5);  // zero-sum offset
    }
  }
}

TEST_CASE("cwt is linear, shift-equivariant and blind to constants") {
  SplitMix64 rng(31);
  std::vector<double> x(300), y(300);
  for (auto& v : x) v = rng.normal();
  for (auto& v : y) v = rng.normal();
  std::vector<double> z(300);
  for (std::size_t i = 0; i < 300; ++i) z[i] = 2.5 * x[i] - 0.7 * y[i];
  const auto px = cwt(x, kScales), py = cwt(y, kScales), pz = cwt(z, kScales);
  double worst = 0.0;
  for (std::size_t s = 0; s < kScales.size(); ++s) {
    for (std::size_t b = 0; b < 300; ++b) {
      worst = std::max(worst, std::abs(pz.coefficients[s][b] - (2.5 * px.coefficients[s][b] - 0.7 * py.coefficients[s][b])));
    }
  }
  CHECK(worst < 1e-9);

  // Compact bump shifted by 37 frames; the widest kernel (+-1600 taps) never
  // reaches a reflected copy.
  const std::size_t n = 6000;
  std::vector<double> a(n, 0.0), b(n, 0.0);
  for (int i = -50; i <= 50; ++i) a[static_cast<std::size_t>(3000 + i)] = std::exp(-i * i / 300.0) + 0.1 * rng.normal();
  for (std::size_t i = 0; i + 37 < n; ++i) b[i + 37] = a[i];
  const auto pa = cwt(a, kScales), pb = cwt(b, kScales);
  worst = 0.0;
  for (std::size_t s = 0; s < kScales.size(); ++s) {
    for (std::size_t t = 0; t + 37 < n; ++t) worst = std::max(worst, std::abs(pb.coefficients[s][t + 37] - pa.coefficients[s][t]));
  }
  CHECK(worst < 1e-9);

  const std::vector<double> c(500, 3.0);
  const auto pc = cwt(c, kScales);
  for (const auto& row : pc.coefficients) {
    for (double v : row) CHECK(std::abs(v) < 1e-9);
  }
}

TEST_CASE("sinusoid response peaks at the predicted scale") {
  const double period = 40.0;
  std::vector<double> x(3000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2 * M_PI * static_cast<double>(i) / period);
  std::vector<double> scales;
  for (double s = 5.0; s <= 20.0; s += 0.05) scales.push_back(s);
  const auto plane = cwt(x, scales);
  double best = -1.0, best_s = 0.0;
  for (std::size_t si = 0; si < scales.size(); ++si) {
    double amp = 0.0;
    for (std::size_t t = 1300; t < 1700; ++t) amp = std::max(amp, std::abs(plane.coefficients[si][t]));
    if (amp > best) {
      best = amp;
      best_s = scales[si];
    }
  }
  CHECK(best_s == doctest::Approx(std::sqrt(2.5) * period / (2 * M_PI)).epsilon(0.02));
}

TEST_CASE("constant prosody gives zero scores") {
  const auto words = even_words(10, 0.3);
  ProsodyTrack t{std::vector<float>(300, 110.0f), std::vector<float>(300, 0.5f)};
  const auto rows = label_utterance(t, words, 0.01, "u", {});
  REQUIRE(rows.size() == 10);
  for (const auto& r : rows) {
    CHECK(std::abs(r.prominence) < 1e-9);
    CHECK(std::abs(r.boundary) < 1e-9);
    CHECK(r.utt_id == "u");
  }
}

TEST_CASE("component normalization") {
  const auto words = even_words(5, 0.2);
  ProsodyTrack t;
  SplitMix64 rng(32);
  for (int i = 0; i < 100; ++i) {
    t.f0_hz.push_back(i % 10 < 3 ? 0.0f : static_cast<float>(100 + 20 * rng.uniform()));
    t.energy.push_back(static_cast<float>(rng.uniform()));
  }
  const auto c = normalize_components(t, words, 0.01);
  for (const auto* comp : {&c.f0_norm, &c.energy_norm}) {
    double m = 0, v = 0;
    for (double x : *comp) m += x;
    m /= 100;
    for (double x : *comp) v += (x - m) * (x - m);
    CHECK(std::abs(m) < 1e-9);
    CHECK(v / 100 == doctest::Approx(1.0));
  }
  // Equal-length words: the duration component is flat.
  for (double x : c.duration_norm) CHECK(x == 0.0);
  // Unvoiced frames interpolate log F0 between their voiced neighbours.
  const ProsodyTrack gap{{100.0f, 0.0f, 0.0f, 400.0f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f},
                         std::vector<float>(10, 1.0f)};
  const auto g = normalize_components(gap, even_words(1, 0.1), 0.01);
  CHECK(g.f0_norm[1] - g.f0_norm[0] == doctest::Approx((g.f0_norm[3] - g.f0_norm[0]) / 3));
  CHECK(g.f0_norm[9] == doctest::Approx(g.f0_norm[3]));

  const ProsodyTrack unvoiced{std::vector<float>(50, 0.0f), std::vector<float>(50, 1.0f)};
  const auto u = normalize_components(unvoiced, even_words(2, 0.25), 0.01);
  CHECK(u.weights[0] == 0.0);
  CHECK(u.weights[1] + u.weights[2] == doctest::Approx(1.0));
  CHECK(u.warnings.size() == 1);
}

TEST_CASE("planted prominence and boundary are found") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto p = testing::planted_prominence_utterance(seed);
    const auto rp = label_utterance(p.track, p.words, 0.01, "u");
    CHECK(argmax(rp, true) == p.planted_word);
    const auto b = testing::planted_boundary_utterance(seed);
    const auto rb = label_utterance(b.track, b.words, 0.01, "u");
    CHECK(argmax(rb, false) == b.planted_word);
  }
}

TEST_CASE("label files: round trip and import validation") {
  const fs::path dir = testing::fresh_dir("prosody_labels");
  std::map<std::string, AlignmentTier> tiers{{"u1", even_words(3, 0.2)}, {"u2", even_words(2, 0.2)}};
  tiers["u1"].segments[1].label = "Hello";
  std::vector<WordProsody> rows{{"u1", 0, "w0", 0.5, 0.1}, {"u1", 1, "hello", 1.25, 0.0}, {"u1", 2, "w2", 0, 2}};
  write_labels(rows, dir / "a.tsv");
  CHECK(read_labels(dir / "a.tsv") == rows);
  CHECK(import_labels(dir / "a.tsv", tiers).size() == 3);  // case-insensitive match

  auto expect = [&](const std::string& text, const std::string& needle) {
    put(dir / "b.tsv", text);
    try {
      import_labels(dir / "b.tsv", tiers);
      FAIL("expected failure for " << needle);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Validation);
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect("u9\t0\tw0\t1\t1\n", "u9");
  expect("u1\t0\tw0\t1\t1\nu1\t1\thello\t1\t1\n", "2 label rows but 3 words");
  expect("u2\t0\tw0\t1\t1\nu2\t1\tcat\t1\t1\n", "'cat' but the alignment says 'w1'");
  expect("u2\t0\tw0\t1\t1\nu2\t1\tw1\tx\t1\n", "malformed number");

  const auto m = to_target_map(rows);
  CHECK(m.at({"u1", 1}).prominence == 1.25);
}

TEST_CASE("spearman rank correlation") {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{10, 20, 25, 100, 1000};
  CHECK(spearman(a, b) == doctest::Approx(1.0));
  const std::vector<double> r{5, 4, 3, 2, 1};
  CHECK(spearman(a, r) == doctest::Approx(-1.0));
  const std::vector<double> t1{1, 2, 2, 3}, t2{1, 2, 3, 4};
  CHECK(spearman(t1, t2) == doctest::Approx(4.5 / std::sqrt(22.5)));
  CHECK_THROWS_AS(spearman(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), Error);
}
