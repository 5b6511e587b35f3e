// Times the serial reference kernels against their OpenMP counterparts and
// cross-checks that both produce bit-identical outputs.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "skt/kernels.hpp"
#include "skt/rng.hpp"

namespace k = skt::kernels;
using Clock = std::chrono::steady_clock;

namespace {

struct Timing {
  double serial_ms = 0.0;
  double omp_ms = 0.0;
  bool identical = true;
};

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::vector<double> rand_vec(skt::Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void report(const char* name, const Timing& t, double gflop = 0.0) {
  const double speedup = t.omp_ms > 0.0 ? t.serial_ms / t.omp_ms : 0.0;
  std::printf("%-22s serial %8.2f ms   omp %8.2f ms   speedup %5.2fx", name,
              t.serial_ms, t.omp_ms, speedup);
  if (gflop > 0.0) {
    std::printf("   (%5.2f / %5.2f GFLOP/s)", gflop / t.serial_ms,
                gflop / t.omp_ms);
  }
  std::printf("   %s\n", t.identical ? "bit-identical" : "MISMATCH");
}

Timing bench_matmul(int m, int kk, int n, int reps) {
  skt::Rng rng(1);
  const auto a = rand_vec(rng, static_cast<std::size_t>(m) * kk);
  const auto b = rand_vec(rng, static_cast<std::size_t>(kk) * n);
  std::vector<double> c1(static_cast<std::size_t>(m) * n), c2 = c1;

  Timing t;
  auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) k::serial::matmul(c1.data(), a.data(), b.data(), m, kk, n);
  t.serial_ms = ms_since(t0) / reps;
  t0 = Clock::now();
  for (int r = 0; r < reps; ++r) k::omp::matmul(c2.data(), a.data(), b.data(), m, kk, n);
  t.omp_ms = ms_since(t0) / reps;
  t.identical = bit_equal(c1, c2);
  return t;
}

Timing bench_sdpa(int B, int L, int d, int heads, int reps, bool backward) {
  skt::Rng rng(2);
  const std::size_t rows = static_cast<std::size_t>(B) * L;
  const auto qp = rand_vec(rng, rows * d);
  const auto kp = rand_vec(rng, rows * d);
  const auto vp = rand_vec(rng, rows * d);
  const auto dout = rand_vec(rng, rows * d);
  std::vector<int> limits(rows);
  std::vector<std::uint8_t> valid(rows, 1);
  for (int b = 0; b < B; ++b) {
    for (int t = 0; t < L; ++t) limits[static_cast<std::size_t>(b) * L + t] = t;
  }
  const std::size_t psize = static_cast<std::size_t>(B) * heads * L * L;
  std::vector<double> probs1(psize), probs2(psize);
  std::vector<double> out1(rows * d), out2(rows * d);
  k::SdpaArgs args{qp.data(),    kp.data(), vp.data(), limits.data(),
                   valid.data(), nullptr,   1.0,       B,
                   L,            d,         heads};

  Timing t;
  if (!backward) {
    auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) k::serial::sdpa_forward(out1.data(), probs1.data(), args);
    t.serial_ms = ms_since(t0) / reps;
    t0 = Clock::now();
    for (int r = 0; r < reps; ++r) k::omp::sdpa_forward(out2.data(), probs2.data(), args);
    t.omp_ms = ms_since(t0) / reps;
    t.identical = bit_equal(out1, out2) && bit_equal(probs1, probs2);
    return t;
  }

  k::serial::sdpa_forward(out1.data(), probs1.data(), args);
  std::vector<double> dq1(rows * d), dk1(rows * d), dv1(rows * d);
  std::vector<double> dq2(rows * d), dk2(rows * d), dv2(rows * d);
  auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) {
    std::fill(dq1.begin(), dq1.end(), 0.0);
    std::fill(dk1.begin(), dk1.end(), 0.0);
    std::fill(dv1.begin(), dv1.end(), 0.0);
    k::serial::sdpa_backward(dq1.data(), dk1.data(), dv1.data(), dout.data(),
                             probs1.data(), args);
  }
  t.serial_ms = ms_since(t0) / reps;
  t0 = Clock::now();
  for (int r = 0; r < reps; ++r) {
    std::fill(dq2.begin(), dq2.end(), 0.0);
    std::fill(dk2.begin(), dk2.end(), 0.0);
    std::fill(dv2.begin(), dv2.end(), 0.0);
    k::omp::sdpa_backward(dq2.data(), dk2.data(), dv2.data(), dout.data(),
                          probs1.data(), args);
  }
  t.omp_ms = ms_since(t0) / reps;
  t.identical = bit_equal(dq1, dq2) && bit_equal(dk1, dk2) && bit_equal(dv1, dv2);
  return t;
}

Timing bench_elementwise(std::size_t n, int reps) {
  skt::Rng rng(3);
  const auto a = rand_vec(rng, n);
  const auto b = rand_vec(rng, n);
  std::vector<double> r1(n), r2(n);
  Timing t;
  auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) {
    k::serial::mul(r1.data(), a.data(), b.data(), n);
    k::serial::sigmoid(r1.data(), r1.data(), n);
  }
  t.serial_ms = ms_since(t0) / reps;
  t0 = Clock::now();
  for (int r = 0; r < reps; ++r) {
    k::omp::mul(r2.data(), a.data(), b.data(), n);
    k::omp::sigmoid(r2.data(), r2.data(), n);
  }
  t.omp_ms = ms_since(t0) / reps;
  t.identical = bit_equal(r1, r2);
  return t;
}

Timing bench_layernorm(int rows, int d, int reps) {
  skt::Rng rng(4);
  const auto x = rand_vec(rng, static_cast<std::size_t>(rows) * d);
  std::vector<double> o1(x.size()), o2(x.size()), xh(x.size());
  std::vector<double> is(static_cast<std::size_t>(rows));
  Timing t;
  auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) {
    k::serial::layernorm_forward(o1.data(), xh.data(), is.data(), x.data(), rows, d);
  }
  t.serial_ms = ms_since(t0) / reps;
  t0 = Clock::now();
  for (int r = 0; r < reps; ++r) {
    k::omp::layernorm_forward(o2.data(), xh.data(), is.data(), x.data(), rows, d);
  }
  t.omp_ms = ms_since(t0) / reps;
  t.identical = bit_equal(o1, o2);
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  int reps = 5;
  if (argc > 1) reps = std::max(1, std::atoi(argv[1]));

  std::printf("kernel benchmark: serial reference vs OpenMP (%d reps)\n", reps);
  std::printf("openmp compiled: %s, max threads: %d\n\n",
              k::openmp_compiled() ? "yes" : "no", k::max_threads());

  {
    const int m = 512, kk = 512, n = 512;
    const double gflop = 2.0 * m * kk * n / 1e6;  // per ms
    report("matmul 512^3", bench_matmul(m, kk, n, reps), gflop);
  }
  {
    const int m = 12800, kk = 64, n = 64;
    const double gflop = 2.0 * static_cast<double>(m) * kk * n / 1e6;
    report("matmul 12800x64x64", bench_matmul(m, kk, n, reps), gflop);
  }
  report("sdpa fwd B8 L200 d64", bench_sdpa(8, 200, 64, 4, reps, false));
  report("sdpa bwd B8 L200 d64", bench_sdpa(8, 200, 64, 4, reps, true));
  report("mul+sigmoid 10M", bench_elementwise(10'000'000, reps));
  report("layernorm 20k x 64", bench_layernorm(20'000, 64, reps));
  return 0;
}
