#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace tdoaloc {

using Complex = std::complex<double>;

/// Real-to-complex / complex-to-real FFT of a fixed length, backed by FFTW.
///
/// Plans are created once and executed through FFTW's new-array interface,
/// so a single instance may be shared by any number of threads. Use
/// `RealFft::get(n)` to obtain the process-wide instance for a length.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();

  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  static const RealFft& get(std::size_t n);

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  // X(k) = sum_n x[n] e^{-i 2 pi k n / N}, k = 0..N/2.
  void forward(std::span<const double> in, std::span<Complex> out) const;

  // x[n] = sum_{k=0}^{N-1} X(k) e^{+i 2 pi k n / N} with the upper half
  // implied by Hermitian symmetry. Unnormalized.
  void inverse(std::span<const Complex> in, std::span<double> out) const;

 private:
  std::size_t n_;
  void* forward_plan_;
  void* inverse_plan_;
};

}  // namespace tdoaloc
