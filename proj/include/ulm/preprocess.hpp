#pragma once

// IQ cine-loop conditioning: SVD clutter filter, PSF correlation maps and
// block assembly. A CorrelationBlock is the network input chi.

#include <vector>

#include "ulm/acoustics.hpp"
#include "ulm/common.hpp"

namespace ulm {

using IQBlock = ComplexBlock;
using CorrelationBlock = ComplexBlock;

// Zeroes the `cutoff` largest singular components of the (space x time)
// Casorati matrix. cutoff == 0 returns the block untouched.
IQBlock svd_clutter_filter(const IQBlock& block, int cutoff);

// Singular values of the Casorati matrix, nonincreasing.
std::vector<double> casorati_singular_values(const IQBlock& block);

inline constexpr double kCorrelationNormFloor = 1e-12;

// chi(p) = <patch(p), psf> / max(||patch(p)||, floor); zero-padded borders.
ComplexFrame correlation_map(const ComplexFrame& frame, const PSFPatch& psf);

// Copies frames [t0, t0 + nt) restricted to the spatial window starting at
// (z0, x0) into a (t, z, x) block.
CorrelationBlock assemble_block(const std::vector<ComplexFrame>& frames, int t0, int nt, int z0, int x0, int nz,
                                int nx);

}  // namespace ulm
