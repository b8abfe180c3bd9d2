#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bftdc/sim/checkers.hpp"
#include "bftdc/sim/config.hpp"
#include "bftdc/sim/metrics.hpp"

namespace bftdc::sim {

struct CampaignOptions {
  std::uint32_t participants_min = 2;
  std::uint32_t participants_max = 10;
  // Draw Byzantine faults for the coordinator replicas.
  bool replica_faults = true;
  bool participant_faults = true;
  bool network_drops = true;
};

// A config derived from `base` with seed `seed` and randomly placed faults
// drawn from the menu: mute or equivocating primary, stale-record replay,
// decision drops or equivocation, replica crash, conflicting-vote and
// crashing participants, unwilling and unilaterally aborting participants.
// At most f replicas are faulty. Deterministic in (base, seed).
SimConfig randomize(const SimConfig& base, std::uint64_t seed, const CampaignOptions& options);

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool quiescent = false;
  std::vector<Violation> violations;
  Metrics metrics;
};

struct CampaignReport {
  std::vector<SeedOutcome> runs;  // in seed order
  std::uint64_t violating_runs = 0;
  std::uint64_t non_quiescent_runs = 0;
  std::uint64_t claim_violations[4] = {0, 0, 0, 0};
};

// Runs seeds first_seed .. first_seed + count - 1 across `threads` workers.
// The report does not depend on the thread count.
CampaignReport run_campaign(const SimConfig& base, std::uint64_t first_seed, std::uint64_t count,
                            const CampaignOptions& options, unsigned threads);

}  // namespace bftdc::sim
