#include "bftdc/sim/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace bftdc::sim {
namespace {

[[noreturn]] void fail(const YAML::Node& node, const std::string& field, const std::string& what) {
  std::string where = "line " + std::to_string(node.Mark().line + 1);
  throw ScenarioError(where + ", field '" + field + "': " + what);
}

void only_fields(const YAML::Node& map, const std::string& context,
                 const std::set<std::string>& allowed) {
  if (!map.IsMap()) fail(map, context, "expected a mapping");
  for (const auto& kv : map) {
    auto key = kv.first.as<std::string>();
    if (!allowed.contains(key)) {
      fail(kv.first, context.empty() ? key : context + "." + key, "unknown field");
    }
  }
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& field) {
  if (!node.IsScalar()) fail(node, field, "expected a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(node, field, "cannot read '" + node.Scalar() + "'");
  }
}

template <typename T>
void read(const YAML::Node& map, const std::string& key, const std::string& field, T& out) {
  if (auto node = map[key]) out = scalar<T>(node, field);
}

PrincipalId principal(const YAML::Node& node, const std::string& field) {
  auto text = scalar<std::string>(node, field);
  auto p = parse_principal(text);
  if (!p) fail(node, field, "not a principal id (expected r<N>, p<N> or i0): " + text);
  return *p;
}

Outcome outcome(const YAML::Node& node, const std::string& field) {
  auto text = scalar<std::string>(node, field);
  auto o = parse_outcome(text);
  if (!o) fail(node, field, "expected Commit or Abort, got " + text);
  return *o;
}

Vote vote(const YAML::Node& node, const std::string& field) {
  auto text = scalar<std::string>(node, field);
  auto v = parse_vote(text);
  if (!v) fail(node, field, "expected Prepared or Aborted, got " + text);
  return *v;
}

FaultSpec fault(const YAML::Node& node, std::size_t index) {
  std::string ctx = "faults[" + std::to_string(index) + "]";
  only_fields(node, ctx,
              {"target", "behavior", "at", "subset", "outcome_a", "outcome_b", "vote_a",
               "vote_b"});
  FaultSpec f;
  if (!node["target"]) fail(node, ctx + ".target", "missing");
  if (!node["behavior"]) fail(node, ctx + ".behavior", "missing");
  f.target = principal(node["target"], ctx + ".target");
  auto name = scalar<std::string>(node["behavior"], ctx + ".behavior");
  auto kind = parse_fault_kind(name);
  if (!kind) fail(node["behavior"], ctx + ".behavior", "unknown behavior " + name);
  f.kind = *kind;
  read(node, "at", ctx + ".at", f.at);
  if (auto s = node["subset"]) {
    if (!s.IsSequence()) fail(s, ctx + ".subset", "expected a list");
    for (const auto& p : s) f.subset.push_back(principal(p, ctx + ".subset"));
  }
  if (auto n = node["outcome_a"]) f.outcome_a = outcome(n, ctx + ".outcome_a");
  if (auto n = node["outcome_b"]) f.outcome_b = outcome(n, ctx + ".outcome_b");
  if (auto n = node["vote_a"]) f.vote_a = vote(n, ctx + ".vote_a");
  if (auto n = node["vote_b"]) f.vote_b = vote(n, ctx + ".vote_b");
  return f;
}

}  // namespace

SimConfig parse_scenario(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ScenarioError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) throw ScenarioError("line 1: scenario must be a mapping");
  only_fields(root, "",
              {"name", "description", "mode", "f", "replicas", "participants", "transactions",
               "seed", "net", "timeouts", "faults", "behaviour", "max_events", "max_time"});
  SimConfig c;
  read(root, "name", "name", c.name);
  read(root, "description", "description", c.description);
  if (auto m = root["mode"]) {
    auto text_mode = scalar<std::string>(m, "mode");
    auto mode = parse_mode(text_mode);
    if (!mode) fail(m, "mode", "expected bftdc or plain2pc, got " + text_mode);
    c.mode = *mode;
    if (c.mode == Mode::Plain2pc) c.f = 0;
  }
  read(root, "f", "f", c.f);
  if (auto r = root["replicas"]) c.replicas = scalar<std::uint32_t>(r, "replicas");
  read(root, "participants", "participants", c.participants);
  read(root, "transactions", "transactions", c.transactions);
  read(root, "seed", "seed", c.seed);
  read(root, "max_events", "max_events", c.max_events);
  read(root, "max_time", "max_time", c.max_time);
  if (auto net = root["net"]) {
    only_fields(net, "net", {"delay_min", "delay_max", "drop_probability"});
    read(net, "delay_min", "net.delay_min", c.net.delay_min);
    read(net, "delay_max", "net.delay_max", c.net.delay_max);
    read(net, "drop_probability", "net.drop_probability", c.net.drop_probability);
  }
  if (auto to = root["timeouts"]) {
    only_fields(to, "timeouts",
                {"prepare", "agreement_base", "decision_retransmit", "registration", "reply"});
    read(to, "prepare", "timeouts.prepare", c.timeouts.prepare);
    read(to, "agreement_base", "timeouts.agreement_base", c.timeouts.agreement_base);
    read(to, "decision_retransmit", "timeouts.decision_retransmit",
         c.timeouts.decision_retransmit);
    read(to, "registration", "timeouts.registration", c.timeouts.registration);
    read(to, "reply", "timeouts.reply", c.timeouts.reply);
  }
  if (auto faults = root["faults"]) {
    if (!faults.IsSequence()) fail(faults, "faults", "expected a list");
    for (std::size_t i = 0; i < faults.size(); ++i) c.faults.push_back(fault(faults[i], i));
  }
  if (auto behaviour = root["behaviour"]) {
    if (!behaviour.IsSequence()) fail(behaviour, "behaviour", "expected a list");
    for (std::size_t i = 0; i < behaviour.size(); ++i) {
      const auto& node = behaviour[i];
      std::string ctx = "behaviour[" + std::to_string(i) + "]";
      only_fields(node, ctx, {"participant", "willing", "unilateral_abort", "abort_delay"});
      if (!node["participant"]) fail(node, ctx + ".participant", "missing");
      auto p = principal(node["participant"], ctx + ".participant");
      if (!p.is_participant()) fail(node["participant"], ctx + ".participant", "not a participant");
      ParticipantBehaviour b;
      read(node, "willing", ctx + ".willing", b.willing);
      read(node, "abort_delay", ctx + ".abort_delay", b.abort_delay);
      if (auto ua = node["unilateral_abort"]) {
        auto v = scalar<std::string>(ua, ctx + ".unilateral_abort");
        if (v == "never") {
          b.unilateral_abort = UnilateralAbort::Never;
        } else if (v == "immediate") {
          b.unilateral_abort = UnilateralAbort::Immediate;
        } else if (v == "after_delay") {
          b.unilateral_abort = UnilateralAbort::AfterDelay;
        } else {
          fail(ua, ctx + ".unilateral_abort", "expected never, immediate or after_delay");
        }
      }
      c.behaviour[p.index] = b;
    }
  }
  try {
    validate(c);
  } catch (const ConfigError& e) {
    // Messages lead with the field they concern; point at its line.
    std::string what = e.what();
    auto head = what.substr(0, what.find_first_of(":.[ "));
    if (auto node = root[head]) fail(node, head, what);
    throw ScenarioError(what);
  }
  return c;
}

SimConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace bftdc::sim
