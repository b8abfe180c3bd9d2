#include "bftdc/sim/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <random>
#include <thread>

#include "bftdc/sim/simulator.hpp"

namespace bftdc::sim {
namespace {

// Small portable helpers over the raw generator.
struct Draw {
  std::mt19937_64 rng;

  std::uint64_t below(std::uint64_t n) { return rng() % n; }
  std::uint64_t between(std::uint64_t lo, std::uint64_t hi) { return lo + below(hi - lo + 1); }
  bool chance(std::uint64_t percent) { return below(100) < percent; }

  std::vector<PrincipalId> replica_subset(std::uint32_t n) {
    std::vector<PrincipalId> out;
    for (std::uint32_t i = 0; i < n; ++i) {
      if (chance(50)) out.push_back(PrincipalId::replica(ReplicaId{i}));
    }
    return out;
  }
};

}  // namespace

SimConfig randomize(const SimConfig& base, std::uint64_t seed, const CampaignOptions& opt) {
  Draw d{std::mt19937_64(seed * 0x9E3779B97F4A7C15ull + 0x5EED)};
  SimConfig c = base;
  c.seed = seed;
  c.faults.clear();
  c.behaviour.clear();
  c.participants = static_cast<std::uint32_t>(d.between(opt.participants_min, opt.participants_max));
  c.net.delay_min = 1;
  c.net.delay_max = d.between(1, 4);
  c.net.drop_probability = 0.0;
  if (opt.network_drops) {
    static constexpr double kDrops[] = {0.0, 0.0, 0.01, 0.03};
    c.net.drop_probability = kDrops[d.below(4)];
  }
  const std::uint32_t n = c.mode == Mode::Bftdc ? c.replica_total() : 1;
  const std::uint32_t f = c.mode == Mode::Bftdc ? c.f : 1;

  if (opt.replica_faults) {
    std::vector<std::uint32_t> order(n);
    for (std::uint32_t i = 0; i < n; ++i) order[i] = i;
    // Bias towards the view-0 primary, the replica that can do the most harm.
    if (!d.chance(60)) std::swap(order[0], order[d.below(n)]);
    auto faulty = static_cast<std::uint32_t>(d.between(0, f));
    for (std::uint32_t k = 0; k < faulty; ++k) {
      std::swap(order[k], order[k + d.below(n - k)]);
      auto target = PrincipalId::replica(ReplicaId{order[k]});
      FaultSpec fs;
      fs.target = target;
      auto menu = c.mode == Mode::Bftdc ? 7u : 3u;
      switch (d.below(menu)) {
        case 0:
          fs.kind = FaultKind::EquivocateDecision;
          for (std::uint32_t p = 0; p < c.participants; ++p) {
            if (d.chance(50)) fs.subset.push_back(PrincipalId::participant(ParticipantId{p}));
          }
          if (d.chance(50)) std::swap(fs.outcome_a, fs.outcome_b);
          break;
        case 1:
          fs.kind = FaultKind::DropDecisionTo;
          for (std::uint32_t p = 0; p < c.participants; ++p) {
            if (d.chance(50)) fs.subset.push_back(PrincipalId::participant(ParticipantId{p}));
          }
          break;
        case 2:
          fs.kind = FaultKind::CrashAt;
          fs.at = d.between(0, 80);
          break;
        case 3: fs.kind = FaultKind::MutePrimary; break;
        case 4:
          fs.kind = FaultKind::EquivocatePrePrepare;
          fs.subset = d.replica_subset(n);
          if (d.chance(50)) std::swap(fs.outcome_a, fs.outcome_b);
          break;
        case 5: fs.kind = FaultKind::StaleRecordReplay; break;
        default:
          // Two behaviours at once: mute in its own view, lie about decisions.
          fs.kind = FaultKind::MutePrimary;
          c.faults.push_back(fs);
          fs.kind = FaultKind::EquivocateDecision;
          for (std::uint32_t p = 0; p < c.participants; ++p) {
            if (d.chance(50)) fs.subset.push_back(PrincipalId::participant(ParticipantId{p}));
          }
          break;
      }
      c.faults.push_back(fs);
    }
  }

  if (opt.participant_faults) {
    for (std::uint32_t p = 0; p < c.participants; ++p) {
      auto who = PrincipalId::participant(ParticipantId{p});
      auto roll = d.below(100);
      if (roll < 12) {
        FaultSpec fs;
        fs.target = who;
        fs.kind = FaultKind::ConflictingVotes;
        fs.subset = d.replica_subset(n);
        if (d.chance(50)) std::swap(fs.vote_a, fs.vote_b);
        c.faults.push_back(fs);
      } else if (roll < 20) {
        FaultSpec fs;
        fs.target = who;
        fs.kind = FaultKind::CrashAt;
        fs.at = d.between(0, 40);  // before or after voting
        c.faults.push_back(fs);
      } else if (roll < 26) {
        c.behaviour[p].willing = false;
      } else if (roll < 30) {
        auto& b = c.behaviour[p];
        b.unilateral_abort = d.chance(50) ? UnilateralAbort::Immediate : UnilateralAbort::AfterDelay;
        b.abort_delay = d.between(0, 20);
      }
    }
  }
  validate(c);
  return c;
}

CampaignReport run_campaign(const SimConfig& base, std::uint64_t first_seed, std::uint64_t count,
                            const CampaignOptions& options, unsigned threads) {
  CampaignReport report;
  report.runs.resize(count);
  std::atomic<std::uint64_t> next{0};
  auto worker = [&] {
    for (auto i = next++; i < count; i = next++) {
      auto cfg = randomize(base, first_seed + i, options);
      auto result = run(cfg);
      auto& out = report.runs[i];
      out.seed = first_seed + i;
      out.quiescent = result.quiescent;
      out.violations = check_all(result.trace);
      out.metrics = measure(result.trace);
    }
  };
  threads = std::max(1u, threads);
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (const auto& r : report.runs) {
    if (!r.violations.empty()) ++report.violating_runs;
    if (!r.quiescent) ++report.non_quiescent_runs;
    for (const auto& v : r.violations) {
      if (v.claim >= 1 && v.claim <= 3) ++report.claim_violations[v.claim];
    }
  }
  return report;
}

}  // namespace bftdc::sim
