#include "tpsf/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

namespace tpsf::fft {

namespace {

// FFTW planning is not thread-safe, execution with the new-array interface is.
// Plans are created once per (size, direction) with FFTW_UNALIGNED so that any
// std::vector storage can be passed to fftw_execute_dft.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(int n, int sign) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_pair(n, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<Complex> scratch(static_cast<std::size_t>(n) * n);
    auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft_2d(n, n, p, p, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan == nullptr) throw NumericalError("FFTW failed to create a plan");
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<int, int>, fftw_plan> plans_;
};

void run(ComplexGrid& g, int sign) {
  if (g.side() == 0) return;
  fftw_plan plan = PlanCache::instance().get(g.side(), sign);
  auto* p = reinterpret_cast<fftw_complex*>(g.storage().data());
  fftw_execute_dft(plan, p, p);
}

}  // namespace

void forward(ComplexGrid& g) { run(g, FFTW_FORWARD); }
void inverse(ComplexGrid& g) { run(g, FFTW_BACKWARD); }

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace tpsf::fft
