#include "csync/transforms.hpp"

namespace csync {

namespace {

const double kInvSqrt3 = 1.0 / std::sqrt(3.0);
const Phasor kA = std::polar(1.0, kTwoPi / 3.0);
const Phasor kA2 = kA * kA;

}  // namespace

AlphaBeta clarke(const AbcSample& abc) {
  return {(2.0 / 3.0) * (abc.a - 0.5 * abc.b - 0.5 * abc.c), kInvSqrt3 * (abc.b - abc.c)};
}

AbcSample inverse_clarke(AlphaBeta ab, double t) {
  const double half_sqrt3 = 0.5 * std::sqrt(3.0);
  return {ab.alpha, -0.5 * ab.alpha + half_sqrt3 * ab.beta, -0.5 * ab.alpha - half_sqrt3 * ab.beta, t};
}

DqFrame park(double alpha, double beta, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {alpha * c + beta * s, -alpha * s + beta * c};
}

AlphaBeta inverse_park(DqFrame dq, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {dq.d * c - dq.q * s, dq.d * s + dq.q * c};
}

SequenceSet fortescue(const PhaseTriple& p) {
  return {(p.a + kA * p.b + kA2 * p.c) / 3.0, (p.a + kA2 * p.b + kA * p.c) / 3.0,
          (p.a + p.b + p.c) / 3.0};
}

PhaseTriple inverse_fortescue(const SequenceSet& s) {
  return {s.zero + s.pos + s.neg, s.zero + kA2 * s.pos + kA * s.neg, s.zero + kA * s.pos + kA2 * s.neg};
}

AbcSample synth_abc(const SequenceSet& seq, double theta, double t) {
  const PhaseTriple ph = inverse_fortescue(seq);
  const Phasor rot = std::polar(1.0, theta);
  return {(ph.a * rot).real(), (ph.b * rot).real(), (ph.c * rot).real(), t};
}

}  // namespace csync
