#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <new>
#include <tuple>

namespace vpl::fft {

namespace {

enum class Kind { kForwardComplex, kForwardReal, kInverseReal, kForwardMany };

class PlanRegistry {
 public:
  static PlanRegistry& instance() {
    static PlanRegistry registry;
    return registry;
  }

  fftw_plan get(Kind kind, int rows, int cols) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(kind, rows, cols);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;

    const std::size_t real_count = static_cast<std::size_t>(rows) * cols;
    const std::size_t half_count = static_cast<std::size_t>(rows) * (cols / 2 + 1);
    fftw_plan plan = nullptr;
    switch (kind) {
      case Kind::kForwardComplex: {
        auto buf = alloc_complex(real_count);
        auto* p = reinterpret_cast<fftw_complex*>(buf.get());
        plan = fftw_plan_dft_2d(rows, cols, p, p, FFTW_FORWARD, FFTW_ESTIMATE);
        break;
      }
      case Kind::kForwardReal: {
        auto in = alloc_real(real_count);
        auto out = alloc_complex(half_count);
        plan = fftw_plan_dft_r2c_2d(rows, cols, in.get(), reinterpret_cast<fftw_complex*>(out.get()), FFTW_ESTIMATE);
        break;
      }
      case Kind::kForwardMany: {
        // rows = howmany, cols = n
        auto buf = alloc_complex(real_count);
        auto* p = reinterpret_cast<fftw_complex*>(buf.get());
        const int len[] = {cols};
        plan = fftw_plan_many_dft(1, len, rows, p, nullptr, 1, cols, p, nullptr, 1, cols, FFTW_FORWARD, FFTW_ESTIMATE);
        break;
      }
      case Kind::kInverseReal: {
        auto in = alloc_complex(half_count);
        auto out = alloc_real(real_count);
        plan = fftw_plan_dft_c2r_2d(rows, cols, reinterpret_cast<fftw_complex*>(in.get()), out.get(), FFTW_ESTIMATE);
        break;
      }
    }
    if (plan == nullptr) throw std::bad_alloc();
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanRegistry() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<Kind, int, int>, fftw_plan> plans_;
};

}  // namespace

void FftwDeleter::operator()(void* p) const noexcept { fftw_free(p); }

AlignedPtr<std::complex<double>> alloc_complex(std::size_t n) {
  auto* raw = static_cast<std::complex<double>*>(fftw_malloc(sizeof(std::complex<double>) * (n == 0 ? 1 : n)));
  if (raw == nullptr) throw std::bad_alloc();
  return AlignedPtr<std::complex<double>>(raw);
}

AlignedPtr<double> alloc_real(std::size_t n) {
  auto* raw = static_cast<double*>(fftw_malloc(sizeof(double) * (n == 0 ? 1 : n)));
  if (raw == nullptr) throw std::bad_alloc();
  return AlignedPtr<double>(raw);
}

void forward_2d(std::complex<double>* data, int rows, int cols) {
  fftw_plan plan = PlanRegistry::instance().get(Kind::kForwardComplex, rows, cols);
  auto* p = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(plan, p, p);
}

void forward_real_2d(double* in, std::complex<double>* out, int rows, int cols) {
  fftw_plan plan = PlanRegistry::instance().get(Kind::kForwardReal, rows, cols);
  fftw_execute_dft_r2c(plan, in, reinterpret_cast<fftw_complex*>(out));
}

void inverse_real_2d(std::complex<double>* in, double* out, int rows, int cols) {
  fftw_plan plan = PlanRegistry::instance().get(Kind::kInverseReal, rows, cols);
  fftw_execute_dft_c2r(plan, reinterpret_cast<fftw_complex*>(in), out);
}

void forward_many(std::complex<double>* data, int howmany, int n) {
  fftw_plan plan = PlanRegistry::instance().get(Kind::kForwardMany, howmany, n);
  auto* p = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(plan, p, p);
}

int fast_size(int n) {
  for (int m = n < 1 ? 1 : n;; ++m) {
    int r = m;
    for (int p : {2, 3, 5}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

}  // namespace vpl::fft
