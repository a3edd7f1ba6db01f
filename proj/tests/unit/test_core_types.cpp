#include <catch_amalgamated.hpp>

#include "csync/core_types.hpp"
#include "csync/transforms.hpp"

using namespace csync;
using Catch::Approx;

TEST_CASE("wrap_angle maps into (-pi, pi]", "[core]") {
  CHECK(wrap_angle(kPi) == Approx(kPi));
  CHECK(wrap_angle(-kPi) == Approx(kPi));
  CHECK(wrap_angle(3 * kPi / 2) == Approx(-kPi / 2));
  CHECK(wrap_angle(-7.0) == Approx(-7.0 + kTwoPi));
  for (double a = -20.0; a < 20.0; a += 0.37) {
    const double w = wrap_angle(a);
    CHECK(w > -kPi);
    CHECK(w <= kPi);
    CHECK(std::remainder(w - a, kTwoPi) == Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("clarke of a balanced set has amplitude one", "[core]") {
  // a = cos(x), b = cos(x - 120), c = cos(x + 120)  ->  alpha = cos(x), beta = sin(x)
  for (double x = 0.0; x < kTwoPi; x += 0.1) {
    const AbcSample s{std::cos(x), std::cos(x - 2 * kPi / 3), std::cos(x + 2 * kPi / 3)};
    const AlphaBeta ab = clarke(s);
    CHECK(ab.alpha == Approx(std::cos(x)).margin(1e-12));
    CHECK(ab.beta == Approx(std::sin(x)).margin(1e-12));
    const AbcSample back = inverse_clarke(ab);
    CHECK(back.a == Approx(s.a).margin(1e-12));
    CHECK(back.b == Approx(s.b).margin(1e-12));
    CHECK(back.c == Approx(s.c).margin(1e-12));
  }
}

TEST_CASE("park aligns d with the rotating vector", "[core]") {
  const double theta = 0.7;
  const DqFrame dq = park(std::cos(theta + 0.2), std::sin(theta + 0.2), theta);
  CHECK(dq.d == Approx(std::cos(0.2)));
  CHECK(dq.q == Approx(std::sin(0.2)));
  const AlphaBeta ab = inverse_park(dq, theta);
  CHECK(ab.alpha == Approx(std::cos(theta + 0.2)));
  CHECK(ab.beta == Approx(std::sin(theta + 0.2)));
}

TEST_CASE("fortescue separates sequences", "[core]") {
  const Phasor a = std::polar(1.0, 2 * kPi / 3);
  const Phasor vp{0.9, 0.2}, vn{0.05, -0.03}, v0{0.01, 0.0};
  // phase a = v0 + vp + vn, phase b = v0 + a^2 vp + a vn, phase c = v0 + a vp + a^2 vn
  const PhaseTriple ph{v0 + vp + vn, v0 + a * a * vp + a * vn, v0 + a * vp + a * a * vn};
  const SequenceSet seq = fortescue(ph);
  CHECK(std::abs(seq.pos - vp) < 1e-12);
  CHECK(std::abs(seq.neg - vn) < 1e-12);
  CHECK(std::abs(seq.zero - v0) < 1e-12);
  const PhaseTriple back = inverse_fortescue(seq);
  CHECK(std::abs(back.a - ph.a) < 1e-12);
  CHECK(std::abs(back.b - ph.b) < 1e-12);
  CHECK(std::abs(back.c - ph.c) < 1e-12);
}

TEST_CASE("synth_abc produces cosine waveforms", "[core]") {
  const SequenceSet seq{std::polar(1.0, 0.3), std::polar(0.1, -0.5), {}};
  const double theta = 1.1;
  const AbcSample s = synth_abc(seq, theta, 0.25);
  const double a = std::cos(theta + 0.3) + 0.1 * std::cos(theta - 0.5);
  const double b = std::cos(theta + 0.3 - 2 * kPi / 3) + 0.1 * std::cos(theta - 0.5 + 2 * kPi / 3);
  const double c = std::cos(theta + 0.3 + 2 * kPi / 3) + 0.1 * std::cos(theta - 0.5 - 2 * kPi / 3);
  CHECK(s.a == Approx(a).margin(1e-12));
  CHECK(s.b == Approx(b).margin(1e-12));
  CHECK(s.c == Approx(c).margin(1e-12));
  CHECK(s.t == 0.25);
}

TEST_CASE("per-unit base", "[core]") {
  PerUnitBase b;
  CHECK(b.valid());
  CHECK(b.omega_base() == Approx(2 * kPi * 60));
  b.s_base = 0.0;
  CHECK_FALSE(b.valid());
}
