#include "bisim/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <mutex>
#include <utility>

#include "bisim/errors.hpp"

namespace bisim {
namespace {

// FFTW's planner is not thread-safe; execution of an existing plan on new
// arrays is. Plans live for the process lifetime.
class PlanCache {
 public:
  fftw_plan get(std::size_t n, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(n, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    auto* in = fftw_alloc_complex(n);
    auto* out = fftw_alloc_complex(n);
    // ESTIMATE keeps plan selection independent of timing, so transforms are
    // reproducible run to run. UNALIGNED allows execution on caller buffers.
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), in, out, sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    if (plan == nullptr) throw NumericalError("FFTW failed to create a plan");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache instance;
  return instance;
}

void execute(std::span<const Complex> in, std::span<Complex> out, int sign) {
  if (in.size() != out.size()) throw UsageError("fft: input and output sizes differ");
  if (in.empty()) return;
  fftw_plan plan = cache().get(in.size(), sign);
  if (in.data() == out.data()) {
    ComplexVector tmp(in.begin(), in.end());
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(tmp.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
    return;
  }
  // FFTW does not modify the input of an out-of-place complex transform.
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in.data())),
                   reinterpret_cast<fftw_complex*>(out.data()));
}

}  // namespace

void fft_forward(std::span<const Complex> in, std::span<Complex> out) {
  execute(in, out, FFTW_FORWARD);
}

void fft_inverse(std::span<const Complex> in, std::span<Complex> out) {
  execute(in, out, FFTW_BACKWARD);
}

void fftshift(std::span<Complex> data) {
  std::rotate(data.begin(), data.begin() + static_cast<std::ptrdiff_t>((data.size() + 1) / 2),
              data.end());
}

}  // namespace bisim
