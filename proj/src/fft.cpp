#include "pseudolat/fft.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <utility>

#include <fftw3.h>

#include "pseudolat/errors.hpp"

namespace pseudolat::fft {

namespace {

// FFTW planning is not thread-safe but executing a plan on new arrays is. Plans are created once
// per (size, direction) under a lock and never destroyed.
fftw_plan plan_for(int n, int sign) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, fftw_plan> plans;
  thread_local std::map<std::pair<int, int>, fftw_plan> local;
  const auto key = std::make_pair(n, sign);
  if (auto it = local.find(key); it != local.end()) return it->second;

  std::lock_guard<std::mutex> lock(mu);
  auto it = plans.find(key);
  if (it == plans.end()) {
    auto* in = fftw_alloc_complex(static_cast<std::size_t>(n));
    auto* out = fftw_alloc_complex(static_cast<std::size_t>(n));
    fftw_plan p = fftw_plan_dft_1d(n, in, out, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    it = plans.emplace(key, p).first;
  }
  local.emplace(key, it->second);
  return it->second;
}

void run(std::span<const cd> in, std::span<cd> out, int sign) {
  if (in.size() != out.size() || in.empty()) throw InvalidArgument("fft: size mismatch");
  const int n = static_cast<int>(in.size());
  // FFTW's new-array execute does not modify the input of an out-of-place transform.
  auto* src = reinterpret_cast<fftw_complex*>(const_cast<cd*>(in.data()));
  auto* dst = reinterpret_cast<fftw_complex*>(out.data());
  fftw_execute_dft(plan_for(n, sign), src, dst);
  const double s = 1.0 / std::sqrt(static_cast<double>(n));
  for (auto& v : out) v *= s;
}

}  // namespace

void forward(std::span<const cd> in, std::span<cd> out) { run(in, out, FFTW_FORWARD); }
void inverse(std::span<const cd> in, std::span<cd> out) { run(in, out, FFTW_BACKWARD); }

}  // namespace pseudolat::fft
