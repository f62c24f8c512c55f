// Compares the serial reference path with the OpenMP path on the sampling
// workloads and verifies that both produce identical statistics.

#include <chrono>
#include <cstdio>
#include <string>

#include "calmkit/corpus.hpp"
#include "calmkit/multiplier.hpp"
#include "calmkit/perturbation.hpp"
#include "calmkit/report.hpp"
#include "calmkit/stability.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

using namespace calmkit;

namespace {

double time_of(const std::function<void()>& fn) {
  auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool same(const RatioStats& a, const RatioStats& b) {
  if (a.per_radius.size() != b.per_radius.size()) return false;
  for (size_t i = 0; i < a.per_radius.size(); ++i) {
    if (a.per_radius[i].max_ratio != b.per_radius[i].max_ratio) return false;
    if (a.per_radius[i].p99 != b.per_radius[i].p99) return false;
    if (a.per_radius[i].p90 != b.per_radius[i].p90) return false;
    if (a.per_radius[i].samples != b.per_radius[i].samples) return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  int samples = argc > 1 ? std::atoi(argv[1]) : 40000;

#if defined(_OPENMP)
  std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
  std::printf("openmp: not compiled in (both lanes run serially)\n");
#endif
  std::printf("samples per radius: %d\n\n", samples);
  std::printf("%-28s %10s %10s %8s %s\n", "workload", "serial[s]", "openmp[s]", "speedup",
               "identical");

  ParsedProblem pp = parse_problem_json(corpus::problem_json("p4"), "p4");
  const NamedPoint& np = pp.point("degenerate");
  KKTPoint pt = validate_kkt_point(pp.program, np.x, np.lambda);
  MultiplierSetRef ref = make_multiplier_ref(pp.program, pt);

  ProbeConfig serial_cfg;
  serial_cfg.samples = samples;
  serial_cfg.seed = 7;
  serial_cfg.exec = Exec::Serial;
  ProbeConfig omp_cfg = serial_cfg;
  omp_cfg.exec = Exec::OpenMP;

  int exit_code = 0;
  auto bench_probe = [&](const std::string& name, auto&& probe) {
    RatioStats rs_serial, rs_omp;
    double ts = time_of([&] { rs_serial = probe(serial_cfg); });
    double to = time_of([&] { rs_omp = probe(omp_cfg); });
    bool ok = same(rs_serial, rs_omp);
    if (!ok) exit_code = 1;
    std::printf("%-28s %10.3f %10.3f %7.2fx %s\n", name.c_str(), ts, to, ts / to,
                ok ? "yes" : "NO");
  };

  bench_probe("error_bound_probe(p4)",
              [&](const ProbeConfig& c) { return error_bound_probe(ref, c); });
  bench_probe("strong_calmness_probe(p4)",
              [&](const ProbeConfig& c) { return strong_calmness_probe(ref, c); });
  bench_probe("pseudo_isolated_probe(p4)",
              [&](const ProbeConfig& c) { return pseudo_isolated_probe(ref, c); });
  bench_probe("calmness_probe_M(p4)",
              [&](const ProbeConfig& c) { return calmness_probe_M(ref, c); });
  bench_probe("subregularity_probe(p4)",
              [&](const ProbeConfig& c) { return subregularity_probe(pp.program, pt.x, c); });

  {
    EngineConfig es;
    es.seed = 7;
    es.exec = Exec::Serial;
    es.starts = 256;
    EngineConfig eo = es;
    eo.exec = Exec::OpenMP;
    StabilityVerdict vs, vo;
    double ts = time_of([&] { vs = noncriticality_test(pp.program, pt, es); });
    double to = time_of([&] { vo = noncriticality_test(pp.program, pt, eo); });
    bool ok = vs.status == vo.status && vs.residual == vo.residual;
    if (!ok) exit_code = 1;
    std::printf("%-28s %10.3f %10.3f %7.2fx %s\n", "noncriticality multistart", ts, to,
                ts / to, ok ? "yes" : "NO");
  }
  return exit_code;
}
