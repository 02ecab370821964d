#pragma once

#include <cstddef>
#include <span>

#include "bisim/types.hpp"

namespace bisim {

/// Unnormalized complex DFTs of arbitrary length backed by cached FFTW plans.
/// forward: X[k] = Σ x[n] e^{-j2πkn/N}; inverse: x[n] = Σ X[k] e^{+j2πkn/N}.
/// Safe to call concurrently.
void fft_forward(std::span<const Complex> in, std::span<Complex> out);
void fft_inverse(std::span<const Complex> in, std::span<Complex> out);

/// Moves the zero-frequency bin from index 0 to index n/2 (n even) or (n-1)/2.
void fftshift(std::span<Complex> data);

}  // namespace bisim
