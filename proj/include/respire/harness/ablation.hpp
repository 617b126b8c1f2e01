#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "respire/harness/episode.hpp"

namespace respire::harness {

enum class Variant { Van, VanR, VanH, Full };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::Van: return "Van";
    case Variant::VanR: return "Van+R";
    case Variant::VanH: return "Van+H";
    case Variant::Full: return "Full";
  }
  return "?";
}

inline std::optional<Variant> parse_variant(const std::string& s) {
  for (Variant v : {Variant::Van, Variant::VanR, Variant::VanH, Variant::Full}) {
    if (s == to_string(v)) return v;
  }
  return std::nullopt;
}

inline AblationFlags flags_of(Variant v) {
  return {v == Variant::VanH || v == Variant::Full, v == Variant::VanR || v == Variant::Full};
}

inline Variant variant_of(const AblationFlags& f) {
  if (f.hierarchy) return f.recycling ? Variant::Full : Variant::VanH;
  return f.recycling ? Variant::VanR : Variant::Van;
}

inline const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v{Variant::Van, Variant::VanR, Variant::VanH, Variant::Full};
  return v;
}

struct AblationRecord {
  Variant variant = Variant::Full;
  int trial = 0;
  std::uint64_t seed = 0;
  EpisodeMetrics metrics;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  if (xs.empty()) return out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

/// Search time counts a never-found episode at the episode cap.
inline double search_steps(const EpisodeMetrics& m, int cap) {
  return m.steps_to_find ? static_cast<double>(*m.steps_to_find) : static_cast<double>(cap);
}

struct VariantSummary {
  Variant variant = Variant::Full;
  std::size_t trials = 0;
  std::size_t found = 0;
  MeanStd steps_to_find;
  MeanStd plan_time_s;          // per-episode mean cycle time
  MeanStd rollouts_per_cycle;
  MeanStd rollouts;             // per-episode totals
  double reuses = 0.0;          // mean per episode
};

struct AblationResult {
  std::vector<AblationRecord> records;  // variant-major, then trial
  std::vector<VariantSummary> summaries;
};

inline std::vector<VariantSummary> summarize(const std::vector<AblationRecord>& records,
                                             const std::vector<Variant>& variants, int cap) {
  std::vector<VariantSummary> out;
  for (Variant v : variants) {
    VariantSummary s;
    s.variant = v;
    std::vector<double> steps, times, rpc, ro;
    double reuses = 0.0;
    for (const auto& r : records) {
      if (r.variant != v) continue;
      ++s.trials;
      s.found += r.metrics.steps_to_find ? 1 : 0;
      steps.push_back(search_steps(r.metrics, cap));
      times.push_back(r.metrics.mean_plan_time());
      rpc.push_back(r.metrics.rollouts_per_cycle());
      ro.push_back(static_cast<double>(r.metrics.rollouts));
      reuses += static_cast<double>(r.metrics.reuses);
    }
    s.steps_to_find = mean_std(steps);
    s.plan_time_s = mean_std(times);
    s.rollouts_per_cycle = mean_std(rpc);
    s.rollouts = mean_std(ro);
    s.reuses = s.trials ? reuses / static_cast<double>(s.trials) : 0.0;
    out.push_back(s);
  }
  return out;
}

/// Runs every variant for `trials` episodes with seeds base.seed + t, so all
/// variants see the same ground truth per trial. Episodes may run on
/// `threads` workers; the records do not depend on the thread count.
inline AblationResult run_ablation(const ScenarioConfig& base, const std::vector<Variant>& variants,
                                   int trials, unsigned threads = 1, bool reference = false) {
  if (trials < 1) throw DomainError("trials must be >= 1");
  AblationResult res;
  for (Variant v : variants) {
    for (int t = 0; t < trials; ++t) {
      res.records.push_back({v, t, base.seed + static_cast<std::uint64_t>(t), {}});
    }
  }
  auto run_one = [&](std::size_t i) {
    AblationRecord& r = res.records[i];
    ScenarioConfig cfg = base;
    cfg.seed = r.seed;
    EpisodeOptions opt;
    opt.flags = flags_of(r.variant);
    opt.reference = reference;
    r.metrics = run_episode(cfg, opt).metrics;
  };
  const std::size_t n = res.records.size();
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < n; i = next++) run_one(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  res.summaries = summarize(res.records, variants, base.steps);
  return res;
}

}  // namespace respire::harness
