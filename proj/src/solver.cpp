#include "escroom/error.hpp"
#include "escroom/runtime.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <queue>
#include <set>

namespace escroom {

namespace {

/// Plan distance within which a puzzle counts as reachable from the mesh.
constexpr double kInteractRadius = 2.0;

struct Node {
  StateConfiguration config;
  Vec3 point;
  int parent = -1;
  std::vector<ScriptAction> actions;  // edge from parent
  int depth = 0;
};

}  // namespace

std::string SolvabilityResult::to_json() const {
  nlohmann::ordered_json j;
  j["solvable"] = solvable;
  j["witness"] = nlohmann::ordered_json::parse(witness.to_json());
  j["explored"] = explored;
  j["depth"] = depth;
  j["exhausted"] = exhausted;
  j["unsolved_puzzles"] = unsolved_puzzles;
  return j.dump(2);
}

SolvabilityResult check_solvable(const World& world, int max_depth) {
  if (!world.spawn()) throw Error(Errc::MissingSpawn, "no entity carries simple-navmesh-constraint");
  for (const PuzzleInfo& p : world.puzzles()) {
    if (!p.position) throw Error(Errc::PuzzleWithoutPosition, p.entity.empty() ? p.name : p.entity);
  }
  const StateChart& chart = world.chart();

  std::map<std::vector<bool>, NavMesh> meshes;
  auto mesh_for = [&](const StateConfiguration& config) -> const NavMesh& {
    auto states = world.blocker_states(config);
    auto it = meshes.find(states);
    if (it != meshes.end()) return it->second;
    NavMesh m = world.mesh();
    for (std::size_t i = 0; i < states.size(); ++i) m.set_blocker(m.blocker_ids()[i], states[i]);
    return meshes.emplace(states, std::move(m)).first->second;
  };
  // Same snap the runtime applies when a blocker closes under the player.
  auto settle = [](const NavMesh& mesh, const Vec3& p) -> std::optional<std::pair<int, Vec3>> {
    if (auto poly = mesh.locate(p, kSnapTolerance)) return std::pair{*poly, p};
    return mesh.closest_point(p);
  };

  std::map<std::string, const PuzzleInfo*> by_event;
  for (const PuzzleInfo& p : world.puzzles()) by_event[p.event] = &p;
  std::vector<std::string> events;
  for (const std::string& e : chart.trigger_events()) {
    if (e != kLoadedEvent && e != kTimeExpiredEvent) events.push_back(e);
  }

  SolvabilityResult out;
  std::vector<Node> nodes;
  std::set<std::pair<std::string, int>> seen;
  std::set<std::string> solved;
  std::queue<int> frontier;
  auto push = [&](Node n) -> bool {
    const NavMesh& mesh = mesh_for(n.config);
    auto at = settle(mesh, n.point);
    int region = at ? mesh.polygons()[static_cast<std::size_t>(at->first)].region : -1;
    if (at) n.point = at->second;
    if (!seen.insert({n.config.to_string(), region}).second) return false;
    for (const std::string& path : n.config.active_paths) solved.insert(path);
    nodes.push_back(std::move(n));
    frontier.push(static_cast<int>(nodes.size()) - 1);
    return true;
  };

  StateConfiguration start = dispatch(chart, initial_configuration(chart), GameEvent{std::string(kLoadedEvent), {}}).config;
  push({start, *world.spawn(), -1, {}, 0});
  int goal = -1;
  bool truncated = false;
  while (!frontier.empty() && goal < 0) {
    int id = frontier.front();
    frontier.pop();
    Node cur = nodes[static_cast<std::size_t>(id)];
    if (cur.config.contains("escaped")) {
      goal = id;
      break;
    }
    out.depth = std::max(out.depth, cur.depth);
    if (cur.depth >= max_depth) {
      truncated = true;
      continue;
    }
    const NavMesh& mesh = mesh_for(cur.config);
    for (const std::string& e : events) {
      DispatchResult r = dispatch(chart, cur.config, GameEvent{e, {}});
      if (!r.updated) continue;
      Node next{r.config, cur.point, id, {}, cur.depth + 1};
      auto puzzle = by_event.find(e);
      if (puzzle != by_event.end()) {
        const Vec3& target = *puzzle->second->position;
        auto approach = mesh.closest_point(target);
        if (!approach || (plan(approach->second) - plan(target)).norm() > kInteractRadius) continue;
        std::optional<std::vector<Vec3>> path;
        try {
          path = find_path(mesh, cur.point, approach->second);
        } catch (const Error&) {
        }
        if (!path) continue;
        next.point = approach->second;
        next.actions.push_back({ScriptAction::Kind::MoveTo, puzzle->second->entity, 0});
      }
      next.actions.push_back({ScriptAction::Kind::Emit, e, 0});
      push(std::move(next));
    }
  }

  out.explored = nodes.size();
  out.solvable = goal >= 0;
  if (out.solvable) {
    std::vector<int> chain;
    for (int id = goal; id >= 0; id = nodes[static_cast<std::size_t>(id)].parent) chain.push_back(id);
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      const auto& acts = nodes[static_cast<std::size_t>(*it)].actions;
      out.witness.actions.insert(out.witness.actions.end(), acts.begin(), acts.end());
    }
    out.depth = nodes[static_cast<std::size_t>(goal)].depth;
  }
  out.exhausted = !out.solvable && !truncated;
  for (int id : out.solvable ? std::vector<int>{} : chart.puzzles()) {
    const StateNode& n = chart.node(id);
    if (!solved.count(chart.node(n.children.back()).path)) out.unsolved_puzzles.push_back(n.name);
  }
  return out;
}

}  // namespace escroom
