#pragma once

// Thin RAII layer over FFTW's real transforms. Plan creation is not
// thread-safe in FFTW, so it is serialized; execution is.

#include <complex>
#include <cstring>
#include <memory>
#include <mutex>
#include <vector>

#include <fftw3.h>

namespace thinshell::fft {

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

/// sum_i x_i exp(-2 pi i k i / M) for k = 0..M/2.
inline std::vector<std::complex<double>> real_forward(const std::vector<double>& x) {
  const int m = static_cast<int>(x.size());
  std::unique_ptr<double, FftwFree> in(fftw_alloc_real(x.size()));
  std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(x.size() / 2 + 1));
  Plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan.reset(fftw_plan_dft_r2c_1d(m, in.get(), out.get(), FFTW_ESTIMATE));
  }
  std::memcpy(in.get(), x.data(), x.size() * sizeof(double));
  fftw_execute(plan.get());
  std::vector<std::complex<double>> res(x.size() / 2 + 1);
  for (std::size_t k = 0; k < res.size(); ++k) res[k] = {out.get()[k][0], out.get()[k][1]};
  return res;
}

/// Real sequence sum_k X_k exp(+2 pi i k j / M) over the full Hermitian
/// spectrum, given its first M/2 + 1 entries. Unnormalized.
inline std::vector<double> hermitian_to_real(const std::vector<std::complex<double>>& half,
                                             std::size_t m) {
  std::unique_ptr<fftw_complex, FftwFree> in(fftw_alloc_complex(m / 2 + 1));
  std::unique_ptr<double, FftwFree> out(fftw_alloc_real(m));
  Plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan.reset(fftw_plan_dft_c2r_1d(static_cast<int>(m), in.get(), out.get(), FFTW_ESTIMATE));
  }
  for (std::size_t k = 0; k < m / 2 + 1; ++k) {
    in.get()[k][0] = half[k].real();
    in.get()[k][1] = half[k].imag();
  }
  fftw_execute(plan.get());
  return std::vector<double>(out.get(), out.get() + m);
}

}  // namespace thinshell::fft
