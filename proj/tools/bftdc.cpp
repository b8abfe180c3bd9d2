// bftdc: run, check, campaign and bench front end for the simulator.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "bftdc/sim/campaign.hpp"
#include "bftdc/sim/checkers.hpp"
#include "bftdc/sim/metrics.hpp"
#include "bftdc/sim/scenario.hpp"
#include "bftdc/sim/simulator.hpp"

using namespace bftdc::sim;

namespace {

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kNotQuiescent = 2;
constexpr int kViolations = 3;

std::string opt_time(const std::optional<bftdc::SimTime>& t) {
  return t ? std::to_string(*t) : "-";
}

void print_summary(std::ostream& out, const SimConfig& cfg, const Metrics& m) {
  out << "scenario: " << (cfg.name.empty() ? "(unnamed)" : cfg.name) << "\n";
  out << "mode: " << to_string(cfg.mode) << "  f: " << cfg.f << "  participants: "
      << cfg.participants << "  seed: " << cfg.seed << "\n";
  out << "quiescent: " << (m.quiescent ? "yes" : "no") << "  end_time: " << m.end_time << "\n";
  out << "outcome=" << m.outcome.value_or("none") << " views=" << m.views
      << " commit_latency=" << opt_time(m.commit_latency)
      << " agreement_latency=" << opt_time(m.agreement_latency)
      << " end_to_end=" << opt_time(m.end_to_end) << "\n";
  out << "messages: " << m.total_messages << "\n";
  for (const auto& [kind, n] : m.messages) {
    out << "  " << kind << " " << n;
    auto first = m.first_round.find(kind);
    if (first != m.first_round.end() && first->second != n) {
      out << " (first round " << first->second << ")";
    }
    out << "\n";
  }
}

void print_violations(std::ostream& out, const std::vector<Violation>& vs) {
  for (const auto& v : vs) {
    out << "claim " << v.claim << " violation at seq " << v.seq << ": " << v.message << "\n";
  }
}

std::optional<SimConfig> load(const std::string& path, std::optional<std::uint64_t> seed,
                              const std::string& mode) {
  try {
    auto cfg = load_scenario(path);
    if (seed) cfg.seed = *seed;
    if (!mode.empty()) {
      auto m = parse_mode(mode);
      if (!m) throw ScenarioError("--mode: expected bftdc or plain2pc");
      if (*m != cfg.mode) cfg = cfg.as_mode(*m);
    }
    validate(cfg);
    return cfg;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return std::nullopt;
  }
}

int cmd_run(const std::string& config, std::optional<std::uint64_t> seed,
            const std::string& trace_path, const std::string& mode, bool expect_violations) {
  auto cfg = load(config, seed, mode);
  if (!cfg) return kError;
  auto result = run(*cfg);
  if (!trace_path.empty()) {
    std::ofstream out(trace_path, std::ios::binary);
    if (!out) {
      std::cerr << "cannot write " << trace_path << "\n";
      return kError;
    }
    write_trace(out, result.trace);
  }
  auto metrics = measure(result.trace);
  print_summary(std::cout, *cfg, metrics);
  auto violations = check_all(result.trace);
  std::cout << "violations: " << violations.size() << "\n";
  print_violations(std::cout, violations);
  if (expect_violations) return violations.empty() ? kViolations : kOk;
  if (!violations.empty()) return kViolations;
  return result.quiescent ? kOk : kNotQuiescent;
}

int cmd_check(const std::string& trace_path, bool expect_violations) {
  std::ifstream in(trace_path, std::ios::binary);
  if (!in) {
    std::cerr << "cannot read " << trace_path << "\n";
    return kError;
  }
  Trace trace;
  try {
    trace = parse_trace(in);
  } catch (const TraceParseError& e) {
    std::cerr << "trace error: " << e.what() << "\n";
    return kError;
  }
  auto c1 = check_claim1(trace);
  auto c2 = check_claim2(trace);
  auto c3 = check_claim3(trace);
  std::cout << "claim1: " << c1.size() << " violations\n";
  std::cout << "claim2: " << c2.size() << " violations\n";
  std::cout << "claim3: " << c3.size() << " violations\n";
  print_violations(std::cout, c1);
  print_violations(std::cout, c2);
  print_violations(std::cout, c3);
  bool any = !c1.empty() || !c2.empty() || !c3.empty();
  if (expect_violations) return any ? kOk : kViolations;
  return any ? kViolations : kOk;
}

int cmd_campaign(const std::string& config, std::uint64_t seeds, std::uint64_t first_seed,
                 const std::string& mode, bool expect_violations, unsigned threads) {
  auto cfg = load(config, std::nullopt, mode);
  if (!cfg) return kError;
  CampaignOptions options;
  auto report = run_campaign(*cfg, first_seed, seeds, options, threads);

  std::vector<bftdc::SimTime> latencies;
  std::uint64_t views = 0;
  for (const auto& r : report.runs) {
    if (r.metrics.commit_latency) latencies.push_back(*r.metrics.commit_latency);
    views += r.metrics.views > 0 ? 1 : 0;
  }
  std::sort(latencies.begin(), latencies.end());
  auto pct = [&](double q) -> std::string {
    if (latencies.empty()) return "-";
    auto idx = static_cast<std::size_t>(q * static_cast<double>(latencies.size() - 1));
    return std::to_string(latencies[idx]);
  };
  std::cout << "campaign: " << seeds << " runs, mode " << to_string(cfg->mode) << ", seeds "
            << first_seed << ".." << first_seed + seeds - 1 << "\n";
  std::cout << "violating runs: " << report.violating_runs << " (claim1 "
            << report.claim_violations[1] << ", claim2 " << report.claim_violations[2]
            << ", claim3 " << report.claim_violations[3] << ")\n";
  std::cout << "non-quiescent runs: " << report.non_quiescent_runs << "\n";
  std::cout << "runs with a view change: " << views << "\n";
  std::cout << "commit latency p50/p90/p99/max: " << pct(0.5) << "/" << pct(0.9) << "/"
            << pct(0.99) << "/" << pct(1.0) << "\n";
  std::uint64_t shown = 0;
  for (const auto& r : report.runs) {
    if (r.violations.empty() && r.quiescent) continue;
    if (shown++ == 10) {
      std::cout << "...\n";
      break;
    }
    std::cout << "failing seed " << r.seed << (r.quiescent ? "" : " (non-quiescent)") << "\n";
    print_violations(std::cout, r.violations);
  }
  bool failed = report.violating_runs > 0;
  if (expect_violations) return failed ? kOk : kViolations;
  if (failed) return kViolations;
  return report.non_quiescent_runs > 0 ? kNotQuiescent : kOk;
}

int cmd_bench(const std::string& config) {
  auto base = load(config, std::nullopt, "");
  if (!base) return kError;
  std::cout << "# Structural analogue only: simulated time units on a fixed-delay network,\n"
               "# not wall-clock latency of any real deployment.\n";
  auto delta = base->net.delay_min;
  std::cout << "# delay=" << delta << " f=" << (base->mode == Mode::Bftdc ? base->f : 1)
            << " seed=" << base->seed << "\n";
  std::cout << "participants,bftdc_commit,plain_commit,delta,bftdc_agreement,"
               "agreement_share,bftdc_messages,plain_messages,message_ratio\n";
  SimConfig cfg = *base;
  if (cfg.mode != Mode::Bftdc) cfg = cfg.as_mode(Mode::Bftdc);
  if (cfg.f == 0) cfg.f = 1;
  cfg.faults.clear();
  cfg.behaviour.clear();
  cfg.net.delay_max = cfg.net.delay_min;
  cfg.net.drop_probability = 0.0;
  for (std::uint32_t p = 2; p <= 10; ++p) {
    cfg.participants = p;
    auto plain_cfg = cfg.as_mode(Mode::Plain2pc);
    auto b = measure(run(cfg).trace);
    auto q = measure(run(plain_cfg).trace);
    auto first_total = [](const Metrics& m) {
      std::uint64_t n = 0;
      for (const auto& [k, v] : m.first_round) n += v;
      return n;
    };
    auto bm = first_total(b);
    auto qm = first_total(q);
    auto bc = b.commit_latency.value_or(0);
    auto qc = q.commit_latency.value_or(0);
    auto ag = b.agreement_latency.value_or(0);
    std::printf("%u,%llu,%llu,%lld,%llu,%.3f,%llu,%llu,%.3f\n", p,
                static_cast<unsigned long long>(bc), static_cast<unsigned long long>(qc),
                static_cast<long long>(bc) - static_cast<long long>(qc),
                static_cast<unsigned long long>(ag),
                bc ? static_cast<double>(ag) / static_cast<double>(bc) : 0.0,
                static_cast<unsigned long long>(bm), static_cast<unsigned long long>(qm),
                qm ? static_cast<double>(bm) / static_cast<double>(qm) : 0.0);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Byzantine fault tolerant distributed commit: simulator and checkers"};
  app.require_subcommand(1);

  std::string config, trace_path, mode;
  std::optional<std::uint64_t> seed;
  std::uint64_t seeds = 100, first_seed = 1;
  bool expect = false;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());

  auto* run_cmd = app.add_subcommand("run", "run one scenario and print metrics");
  run_cmd->add_option("--config", config, "scenario file")->required();
  run_cmd->add_option("--seed", seed, "override the scenario seed");
  run_cmd->add_option("--trace", trace_path, "write the trace here");
  run_cmd->add_option("--mode", mode, "bftdc or plain2pc");
  run_cmd->add_flag("--expect-violations", expect, "succeed only if violations are found");

  auto* check_cmd = app.add_subcommand("check", "check a trace against claims 1-3");
  check_cmd->add_option("--trace,trace", trace_path, "trace file")->required();
  check_cmd->add_flag("--expect-violations", expect, "succeed only if violations are found");

  auto* campaign_cmd = app.add_subcommand("campaign", "randomized fault campaign");
  campaign_cmd->add_option("--config", config, "template scenario")->required();
  campaign_cmd->add_option("--seeds", seeds, "number of runs");
  campaign_cmd->add_option("--seed", first_seed, "first seed");
  campaign_cmd->add_option("--mode", mode, "bftdc or plain2pc");
  campaign_cmd->add_option("--threads", threads, "worker threads");
  campaign_cmd->add_flag("--expect-violations", expect, "succeed only if violations are found");

  auto* bench_cmd = app.add_subcommand("bench", "bftdc vs plain 2PC over 2-10 participants");
  bench_cmd->add_option("--config", config, "scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kError;
  }

  if (*run_cmd) return cmd_run(config, seed, trace_path, mode, expect);
  if (*check_cmd) return cmd_check(trace_path, expect);
  if (*campaign_cmd) return cmd_campaign(config, seeds, first_seed, mode, expect, threads);
  if (*bench_cmd) return cmd_bench(config);
  return kError;
}
