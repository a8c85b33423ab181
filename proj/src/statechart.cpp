#include "escroom/error.hpp"
#include "escroom/statechart.hpp"

#include <algorithm>
#include <deque>

namespace escroom {

namespace {

constexpr int kRoot = 0;
constexpr int kInitializing = 1;
constexpr int kRunning = 2;
constexpr int kFailed = 3;
constexpr int kEscaped = 4;

using ActiveSet = std::set<int>;

ActiveSet to_ids(const StateChart& chart, const StateConfiguration& config) {
  ActiveSet ids{kRoot};
  for (const auto& path : config.active_paths) {
    if (auto id = chart.find(path)) ids.insert(*id);
  }
  return ids;
}

StateConfiguration to_config(const StateChart& chart, const ActiveSet& ids) {
  StateConfiguration config;
  for (int id : ids) {
    if (id != kRoot) config.active_paths.insert(chart.node(id).path);
  }
  return config;
}

bool is_descendant(const StateChart& chart, int node, int ancestor) {
  for (int p = chart.node(node).parent; p != -1; p = chart.node(p).parent) {
    if (p == ancestor) return true;
  }
  return false;
}

bool guard_holds(const StateChart& chart, const ActiveSet& active, Guard guard) {
  switch (guard) {
    case Guard::None: return true;
    case Guard::AllPuzzlesSolved: {
      auto puzzles = chart.puzzles();
      if (puzzles.empty()) return false;
      return std::all_of(puzzles.begin(), puzzles.end(), [&](int p) {
        const StateNode& n = chart.node(p);
        return active.count(n.children.back()) != 0;  // `solved` is the last child
      });
    }
  }
  return false;
}

// Least common compound ancestor that properly contains both nodes.
int transition_domain(const StateChart& chart, int source, int target) {
  for (int a = chart.node(source).parent; a != -1; a = chart.node(a).parent) {
    const StateNode& n = chart.node(a);
    if (n.kind != StateKind::Compound) continue;
    if (a == target || is_descendant(chart, target, a)) return a;
  }
  return kRoot;
}

struct Selected {
  int source;
  const Transition* transition;
};

std::vector<Selected> select_transitions(const StateChart& chart, const ActiveSet& active,
                                         const std::string* event) {
  std::vector<Selected> out;
  for (int id : active) {
    const StateNode& n = chart.node(id);
    bool atomic = n.kind == StateKind::Atomic || n.kind == StateKind::Final ||
                  (n.kind != StateKind::Atomic && n.children.empty());
    if (!atomic) continue;
    for (int s = id; s != -1; s = chart.node(s).parent) {
      const Transition* found = nullptr;
      for (const auto& t : chart.node(s).transitions) {
        bool name_ok = event ? t.event == *event : t.event.empty();
        if (name_ok && guard_holds(chart, active, t.guard)) {
          found = &t;
          break;
        }
      }
      if (found) {
        bool dup = std::any_of(out.begin(), out.end(), [&](const Selected& x) { return x.transition == found; });
        if (!dup) out.push_back({s, found});
        break;
      }
    }
  }
  // conflicting transitions: keep the first whose domain does not overlap
  std::vector<Selected> filtered;
  std::vector<int> domains;
  for (const auto& sel : out) {
    int d = transition_domain(chart, sel.source, sel.transition->target);
    bool conflict = std::any_of(domains.begin(), domains.end(), [&](int other) {
      return other == d || is_descendant(chart, d, other) || is_descendant(chart, other, d);
    });
    if (conflict) continue;
    domains.push_back(d);
    filtered.push_back(sel);
  }
  return filtered;
}

void enter_default(const StateChart& chart, int id, ActiveSet& active, std::vector<std::string>& emits) {
  const StateNode& n = chart.node(id);
  if (!active.insert(id).second) return;
  emits.insert(emits.end(), n.entry_emits.begin(), n.entry_emits.end());
  if (n.children.empty()) return;
  if (n.kind == StateKind::Parallel) {
    for (int c : n.children) enter_default(chart, c, active, emits);
  } else {
    enter_default(chart, n.children.front(), active, emits);
  }
}

void microstep(const StateChart& chart, const std::vector<Selected>& transitions, ActiveSet& active,
               std::vector<std::string>& emits) {
  for (const auto& sel : transitions) {
    int target = sel.transition->target;
    int domain = transition_domain(chart, sel.source, target);

    // exit active descendants of the domain, deepest first
    std::vector<int> exiting;
    for (int id : active) {
      if (is_descendant(chart, id, domain)) exiting.push_back(id);
    }
    std::sort(exiting.begin(), exiting.end(), std::greater<>());
    for (int id : exiting) {
      const StateNode& n = chart.node(id);
      emits.insert(emits.end(), n.exit_emits.begin(), n.exit_emits.end());
      active.erase(id);
    }

    // enter the chain from below the domain down to the target
    std::vector<int> chain;
    for (int s = target; s != domain && s != -1; s = chart.node(s).parent) chain.push_back(s);
    std::reverse(chain.begin(), chain.end());
    for (std::size_t i = 0; i < chain.size(); ++i) {
      int id = chain[i];
      if (i + 1 == chain.size()) {
        enter_default(chart, id, active, emits);
        break;
      }
      const StateNode& n = chart.node(id);
      if (active.insert(id).second) emits.insert(emits.end(), n.entry_emits.begin(), n.entry_emits.end());
      if (n.kind == StateKind::Parallel) {
        for (int c : n.children) {
          if (c != chain[i + 1]) enter_default(chart, c, active, emits);
        }
      }
    }
  }
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

std::optional<int> StateChart::find(std::string_view path) const {
  auto it = by_path_.find(path);
  if (it == by_path_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> StateChart::puzzles() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].role == StateRole::Puzzle) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> StateChart::rooms() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].role == StateRole::Room) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> StateChart::sequences() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].role == StateRole::Sequence) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<std::string> StateChart::trigger_events() const {
  std::set<std::string> names;
  for (const auto& n : nodes_) {
    for (const auto& t : n.transitions) {
      if (!t.event.empty()) names.insert(t.event);
    }
  }
  return {names.begin(), names.end()};
}

StateChartBuilder::StateChartBuilder() {
  add_node(-1, "root", StateKind::Compound, StateRole::Root);
  add_node(kRoot, "initializing", StateKind::Atomic, StateRole::Lifecycle);
  add_node(kRoot, "running", StateKind::Parallel, StateRole::Lifecycle);
  add_node(kRoot, "failed", StateKind::Final, StateRole::Lifecycle);
  add_node(kRoot, "escaped", StateKind::Final, StateRole::Lifecycle);
  auto& nodes = chart_.nodes_;
  nodes[kInitializing].transitions.push_back({std::string(kLoadedEvent), kRunning});
  nodes[kInitializing].transitions.push_back({std::string(kTimeExpiredEvent), kFailed});
  nodes[kRunning].transitions.push_back({std::string(kTimeExpiredEvent), kFailed});
  nodes[kFailed].entry_emits.push_back("failed");
  nodes[kEscaped].entry_emits.push_back("escaped");
}

int StateChartBuilder::add_node(int parent, std::string name, StateKind kind, StateRole role) {
  auto& nodes = chart_.nodes_;
  StateNode n;
  n.name = std::move(name);
  n.kind = kind;
  n.role = role;
  n.parent = parent;
  if (parent > kRoot) {
    n.path = nodes[static_cast<std::size_t>(parent)].path + "." + n.name;
  } else if (parent == kRoot) {
    n.path = n.name;
  }
  int id = static_cast<int>(nodes.size());
  if (parent >= 0) {
    for (int sibling : nodes[static_cast<std::size_t>(parent)].children) {
      if (nodes[static_cast<std::size_t>(sibling)].name == n.name) {
        throw Error(Errc::DuplicateStateName, n.path);
      }
    }
    nodes[static_cast<std::size_t>(parent)].children.push_back(id);
  }
  if (parent >= 0) chart_.by_path_.emplace(n.path, id);
  nodes.push_back(std::move(n));
  return id;
}

void StateChartBuilder::check_name(const std::string& name) const {
  if (name.empty() || name.find('.') != std::string::npos || name.find('/') != std::string::npos ||
      name.find(':') != std::string::npos) {
    throw Error(Errc::InvalidStateName, "'" + name + "'");
  }
}

int StateChartBuilder::add_room(const std::string& name, std::optional<std::size_t> source) {
  check_name(name);
  // rooms start atomic and become parallel once they hold puzzles
  int id = add_node(kRunning, name, StateKind::Atomic, StateRole::Room);
  chart_.nodes_[static_cast<std::size_t>(id)].source_entity = source;
  return id;
}

int StateChartBuilder::add_puzzle(const std::string& name, const std::string& room,
                                  std::optional<std::size_t> source) {
  check_name(name);
  auto room_id = chart_.find("running." + room);
  if (!room_id || chart_.node(*room_id).role != StateRole::Room) {
    throw Error(Errc::UnknownRoom, "puzzle " + name + " references room '" + room + "'");
  }
  if (!puzzle_names_.insert(name).second) throw Error(Errc::DuplicateStateName, name);
  auto& nodes = chart_.nodes_;
  nodes[static_cast<std::size_t>(*room_id)].kind = StateKind::Parallel;
  int puzzle = add_node(*room_id, name, StateKind::Compound, StateRole::Puzzle);
  nodes[static_cast<std::size_t>(puzzle)].source_entity = source;
  int unsolved = add_node(puzzle, "unsolved", StateKind::Atomic, StateRole::PuzzlePhase);
  int solved = add_node(puzzle, "solved", StateKind::Final, StateRole::PuzzlePhase);
  nodes[static_cast<std::size_t>(unsolved)].transitions.push_back({"solved:" + name, solved});
  nodes[static_cast<std::size_t>(solved)].entry_emits.push_back("puzzle-solved:" + name);
  return puzzle;
}

int StateChartBuilder::add_sequence(const std::string& name, const std::vector<std::string>& steps,
                                    std::optional<std::size_t> source) {
  check_name(name);
  if (steps.empty()) throw Error(Errc::InvalidStateName, "sequence " + name + " declares no steps");
  int seq = add_node(kRunning, name, StateKind::Compound, StateRole::Sequence);
  chart_.nodes_[static_cast<std::size_t>(seq)].source_entity = source;
  std::vector<int> ids;
  for (const auto& step : steps) {
    check_name(step);
    ids.push_back(add_node(seq, step, StateKind::Atomic, StateRole::SequenceStep));
  }
  for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
    chart_.nodes_[static_cast<std::size_t>(ids[i])].transitions.push_back({"next:" + name, ids[i + 1]});
  }
  return seq;
}

StateChart StateChartBuilder::finish() {
  if (!puzzle_names_.empty()) {
    chart_.nodes_[kRunning].transitions.push_back({"", kEscaped, Guard::AllPuzzlesSolved});
  }
  return std::move(chart_);
}

StateChart build_statechart(const SceneDocument& doc) {
  struct Decl {
    const Entity* entity;
    std::string type;
    std::string name;
    const ComponentMap* map;
  };
  std::vector<Decl> decls;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const Entity* e = doc.by_index(i);
    const Component* c = e->component("game-state");
    if (!c) continue;
    std::string where = e->id ? *e->id : "<" + e->tag + "> at line " + std::to_string(e->line);
    auto type = c->map.get_string("type");
    if (!type || type->empty()) throw Error(Errc::MissingType, where, e->line);
    std::string name = c->map.get_string("name").value_or(e->id.value_or(""));
    decls.push_back({e, *type, name, &c->map});
  }

  StateChartBuilder builder;
  for (const auto& d : decls) {
    try {
      if (d.type == "room") {
        builder.add_room(d.name, d.entity->index);
      } else if (d.type == "sequence") {
        builder.add_sequence(d.name, d.map->get_list("steps").value_or(StringList{}), d.entity->index);
      } else if (d.type != "puzzle") {
        throw Error(Errc::MissingType, "unsupported game-state type '" + d.type + "'");
      }
    } catch (const Error& err) {
      throw Error(err.code(), err.detail(), d.entity->line);
    }
  }
  for (const auto& d : decls) {
    if (d.type != "puzzle") continue;
    std::string room = d.map->get_string("room").value_or("");
    if (room.empty()) {
      // fall back to the nearest enclosing room entity
      for (const Entity* p = doc.parent_of(*d.entity); p; p = doc.parent_of(*p)) {
        const Component* pc = p->component("game-state");
        if (pc && pc->map.get_string("type") == "room") {
          room = pc->map.get_string("name").value_or(p->id.value_or(""));
          break;
        }
      }
    }
    try {
      builder.add_puzzle(d.name, room, d.entity->index);
    } catch (const Error& err) {
      throw Error(err.code(), err.detail(), d.entity->line);
    }
  }
  return builder.finish();
}

std::string StateConfiguration::to_string() const {
  return join(std::vector<std::string>(active_paths.begin(), active_paths.end()), ',');
}

StateConfiguration initial_configuration(const StateChart& chart) {
  ActiveSet active;
  std::vector<std::string> emits;
  enter_default(chart, kRoot, active, emits);
  return to_config(chart, active);
}

ComponentMap updated_payload(const StateConfiguration& config) {
  ComponentMap payload;
  payload.set("states", StringList(config.active_paths.begin(), config.active_paths.end()));
  return payload;
}

DispatchResult dispatch(const StateChart& chart, const StateConfiguration& config, const GameEvent& event) {
  ActiveSet active = to_ids(chart, config);
  const ActiveSet before = active;
  DispatchResult result;

  std::deque<GameEvent> queue{event};
  while (!queue.empty()) {
    GameEvent current = std::move(queue.front());
    queue.pop_front();
    if (current.name.empty()) continue;

    std::vector<std::string> emits;
    auto selected = select_transitions(chart, active, &current.name);
    if (!selected.empty()) microstep(chart, selected, active, emits);
    // eventless transitions until quiescent
    for (int guard = 0; guard < 64; ++guard) {
      auto eventless = select_transitions(chart, active, nullptr);
      if (eventless.empty()) break;
      microstep(chart, eventless, active, emits);
    }
    for (auto& name : emits) {
      result.emitted.push_back({name, std::nullopt});
      queue.push_back({std::move(name), std::nullopt});
    }
  }

  result.config = to_config(chart, active);
  result.updated = active != before;
  if (result.updated) {
    result.emitted.push_back({std::string(kGameStateUpdated), updated_payload(result.config)});
  }
  return result;
}

bool state_matches(const StateConfiguration& config, std::string_view path) {
  if (path.empty()) return !config.active_paths.empty();
  for (const auto& active : config.active_paths) {
    if (active == path) return true;
    if (active.size() > path.size() && active.compare(0, path.size(), path) == 0 && active[path.size()] == '.') {
      return true;
    }
  }
  return false;
}

VisibilityChange visibility_for(const StateConfiguration& config, const ComponentMap& hide_spec) {
  auto state = hide_spec.get_string("state");
  if (!state || state->empty()) throw Error(Errc::MissingStateKey, "hide-in-state requires 'state'");
  bool show_otherwise = hide_spec.get_bool("showOtherwise").value_or(false);
  bool matches = state_matches(config, *state);
  if (matches) return VisibilityChange::Hide;
  return show_otherwise ? VisibilityChange::Show : VisibilityChange::NoChange;
}

GameStateMachine::GameStateMachine(std::shared_ptr<const StateChart> chart)
    : chart_(std::move(chart)), config_(initial_configuration(*chart_)) {}

DispatchResult GameStateMachine::dispatch(const GameEvent& event) {
  if (delivering_) {
    pending_.push_back(event);
    return {config_, {}, false};
  }
  DispatchResult result = escroom::dispatch(*chart_, config_, event);
  config_ = result.config;

  delivering_ = true;
  auto snapshot = listeners_->entries;
  for (const auto& emitted : result.emitted) {
    for (const auto& [id, listener] : snapshot) {
      bool still_subscribed = std::any_of(listeners_->entries.begin(), listeners_->entries.end(),
                                          [id = id](const auto& e) { return e.first == id; });
      if (still_subscribed) listener(emitted);
    }
  }
  delivering_ = false;

  while (!pending_.empty()) {
    GameEvent next = std::move(pending_.front());
    pending_.erase(pending_.begin());
    dispatch(next);
  }
  return result;
}

Subscription GameStateMachine::subscribe(Listener listener) {
  int id = listeners_->next_id++;
  listeners_->entries.emplace_back(id, std::move(listener));
  return Subscription(listeners_, id);
}

Subscription::Subscription(Subscription&& other) noexcept : table_(std::move(other.table_)), id_(other.id_) {
  other.id_ = -1;
}

Subscription& Subscription::operator=(Subscription&& other) noexcept {
  if (this != &other) {
    unsubscribe();
    table_ = std::move(other.table_);
    id_ = other.id_;
    other.id_ = -1;
  }
  return *this;
}

void Subscription::unsubscribe() {
  if (auto table = table_.lock()) {
    std::erase_if(table->entries, [this](const auto& e) { return e.first == id_; });
  }
  table_.reset();
  id_ = -1;
}

}  // namespace escroom
