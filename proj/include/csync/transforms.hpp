#pragma once

#include "csync/core_types.hpp"

namespace csync {

// Amplitude-invariant Clarke transform:
//   alpha = 2/3 (a - b/2 - c/2),  beta = (b - c) / sqrt(3)
AlphaBeta clarke(const AbcSample& abc);
AbcSample inverse_clarke(AlphaBeta ab, double t = 0.0);

// Rotation into the synchronous frame:
//   d =  alpha cos(theta) + beta sin(theta)
//   q = -alpha sin(theta) + beta cos(theta)
DqFrame park(double alpha, double beta, double theta);
AlphaBeta inverse_park(DqFrame dq, double theta);

/// Symmetrical components with operator a = 1∠120°.
SequenceSet fortescue(const PhaseTriple& phases);
PhaseTriple inverse_fortescue(const SequenceSet& seq);

/// Instantaneous phase values: each phase phasor rotated by theta, real part.
AbcSample synth_abc(const SequenceSet& seq, double theta, double t = 0.0);

}  // namespace csync
