#pragma once

// Thin RAII layer over FFTW. Plans are created once per shape under a global lock (FFTW's
// planner is not thread safe) and executed through the new-array interface, which is. All
// buffers come from fftw_malloc so every execution sees the alignment the plan was made for,
// which keeps results bit-identical no matter which thread runs them.

#include <complex>
#include <cstddef>
#include <memory>

namespace vpl::fft {

struct FftwDeleter {
  void operator()(void* p) const noexcept;
};

template <typename T>
using AlignedPtr = std::unique_ptr<T[], FftwDeleter>;

AlignedPtr<std::complex<double>> alloc_complex(std::size_t n);
AlignedPtr<double> alloc_real(std::size_t n);

/// In-place forward 2-D DFT (sign -1, unnormalized) of a row-major rows x cols array.
void forward_2d(std::complex<double>* data, int rows, int cols);

/// Row-major real -> half spectrum, out has rows x (cols / 2 + 1) entries.
void forward_real_2d(double* in, std::complex<double>* out, int rows, int cols);

/// Half spectrum -> real, unnormalized (result scaled by rows * cols). Destroys `in`.
void inverse_real_2d(std::complex<double>* in, double* out, int rows, int cols);

/// Smallest size >= n whose only prime factors are 2, 3 and 5.
int fast_size(int n);

/// In-place forward DFTs of `howmany` contiguous length-n vectors.
void forward_many(std::complex<double>* data, int howmany, int n);

}  // namespace vpl::fft
