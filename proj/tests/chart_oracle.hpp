#pragma once

#include "escroom/statechart.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace testsupport {

// Independent explicit-state model of the game machine: lifecycle phase,
// one solved bit per puzzle, one step index per sequence.
struct ChartSpec {
  struct Puzzle {
    std::string name, room;
  };
  struct Sequence {
    std::string name;
    std::vector<std::string> steps;
  };
  std::vector<std::string> rooms;
  std::vector<Puzzle> puzzles;
  std::vector<Sequence> sequences;

  std::string markup() const {
    std::string out = "<a-scene>\n";
    for (const auto& r : rooms) out += "<a-entity id=\"" + r + "\" game-state=\"type:room; name:" + r + "\"></a-entity>\n";
    for (const auto& p : puzzles)
      out += "<a-entity id=\"" + p.name + "\" game-state=\"type:puzzle; name:" + p.name + "; room:" + p.room +
             "\"></a-entity>\n";
    for (const auto& s : sequences) {
      std::string steps;
      for (const auto& st : s.steps) steps += (steps.empty() ? "" : ",") + st;
      out += "<a-entity game-state=\"type:sequence; name:" + s.name + "; steps:" + steps + "\"></a-entity>\n";
    }
    return out + "</a-scene>\n";
  }

  std::vector<std::string> events() const {
    std::vector<std::string> out{"loaded", "time-expired", "bogus"};
    for (const auto& p : puzzles) out.push_back("solved:" + p.name);
    for (const auto& s : sequences) out.push_back("next:" + s.name);
    return out;
  }
};

struct ModelState {
  enum Phase { Initializing, Running, Failed, Escaped } phase = Initializing;
  std::vector<bool> solved;
  std::vector<int> step;

  auto operator<=>(const ModelState&) const = default;
};

inline ModelState model_initial(const ChartSpec& spec) {
  ModelState s;
  s.solved.assign(spec.puzzles.size(), false);
  s.step.assign(spec.sequences.size(), 0);
  return s;
}

inline ModelState model_step(const ChartSpec& spec, ModelState s, const std::string& event) {
  auto reset = [&](ModelState::Phase phase) {
    ModelState r = model_initial(spec);
    r.phase = phase;
    return r;
  };
  switch (s.phase) {
    case ModelState::Initializing:
      if (event == "loaded") return reset(ModelState::Running);
      if (event == "time-expired") return reset(ModelState::Failed);
      return s;
    case ModelState::Running:
      if (event == "time-expired") return reset(ModelState::Failed);
      for (std::size_t i = 0; i < spec.puzzles.size(); ++i)
        if (event == "solved:" + spec.puzzles[i].name) s.solved[i] = true;
      for (std::size_t i = 0; i < spec.sequences.size(); ++i)
        if (event == "next:" + spec.sequences[i].name &&
            s.step[i] + 1 < static_cast<int>(spec.sequences[i].steps.size()))
          ++s.step[i];
      if (!spec.puzzles.empty() && std::all_of(s.solved.begin(), s.solved.end(), [](bool b) { return b; }))
        return reset(ModelState::Escaped);
      return s;
    default: return s;
  }
}

inline std::set<std::string> model_paths(const ChartSpec& spec, const ModelState& s) {
  switch (s.phase) {
    case ModelState::Initializing: return {"initializing"};
    case ModelState::Failed: return {"failed"};
    case ModelState::Escaped: return {"escaped"};
    case ModelState::Running: break;
  }
  std::set<std::string> out{"running"};
  for (const auto& r : spec.rooms) out.insert("running." + r);
  for (std::size_t i = 0; i < spec.puzzles.size(); ++i) {
    std::string p = "running." + spec.puzzles[i].room + "." + spec.puzzles[i].name;
    out.insert(p);
    out.insert(p + (s.solved[i] ? ".solved" : ".unsolved"));
  }
  for (std::size_t i = 0; i < spec.sequences.size(); ++i) {
    std::string q = "running." + spec.sequences[i].name;
    out.insert(q);
    out.insert(q + "." + spec.sequences[i].steps[static_cast<std::size_t>(s.step[i])]);
  }
  return out;
}

inline std::set<ModelState> model_reachable(const ChartSpec& spec) {
  std::set<ModelState> seen{model_initial(spec)};
  std::vector<ModelState> frontier{model_initial(spec)};
  while (!frontier.empty()) {
    ModelState s = frontier.back();
    frontier.pop_back();
    for (const auto& e : spec.events()) {
      ModelState t = model_step(spec, s, e);
      if (seen.insert(t).second) frontier.push_back(t);
    }
  }
  return seen;
}

// 1-3 rooms, up to `max_puzzles` puzzles spread over them, optionally one sequence.
inline ChartSpec random_chart(std::mt19937& rng, int max_puzzles) {
  ChartSpec spec;
  int rooms = static_cast<int>(rng() % 3) + 1;
  for (int r = 0; r < rooms; ++r) spec.rooms.push_back("room" + std::to_string(r + 1));
  int puzzles = static_cast<int>(rng() % static_cast<unsigned>(max_puzzles + 1));
  for (int p = 0; p < puzzles; ++p)
    spec.puzzles.push_back({"puzzle" + std::to_string(p + 1), spec.rooms[rng() % spec.rooms.size()]});
  if (rng() % 2) spec.sequences.push_back({"debriefing", {"debriefingIntro", "debriefingPlay", "debriefingEnd"}});
  return spec;
}

// Structural validity of a configuration against the chart: ancestor-closed,
// exactly one active child per active compound, all children per active parallel.
inline std::string config_defect(const escroom::StateChart& chart, const escroom::StateConfiguration& config) {
  using escroom::StateKind;
  for (const auto& path : config.active_paths) {
    auto id = chart.find(path);
    if (!id) return "unknown path " + path;
    for (auto dot = path.rfind('.'); dot != std::string::npos; dot = path.rfind('.', dot - 1)) {
      if (!config.contains(path.substr(0, dot))) return "missing ancestor of " + path;
      if (dot == 0) break;
    }
    const auto& node = chart.node(*id);
    int active_children = 0;
    for (int c : node.children) active_children += config.contains(chart.node(c).path) ? 1 : 0;
    if (node.kind == StateKind::Compound && active_children != 1) return "compound " + path + " has " + std::to_string(active_children);
    if (node.kind == StateKind::Parallel && active_children != static_cast<int>(node.children.size()))
      return "parallel " + path + " incomplete";
  }
  int top = 0;
  for (int c : chart.root().children) top += config.contains(chart.node(c).path) ? 1 : 0;
  if (top != 1) return "root has " + std::to_string(top) + " active children";
  return {};
}

}  // namespace testsupport
