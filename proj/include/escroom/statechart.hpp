#pragma once

#include "escroom/markup.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace escroom {

/// Inbound bus event name carrying a GameEvent.
inline constexpr std::string_view kGameStateEvent = "game-state-event";
/// Outbound bus event name emitted once per configuration change.
inline constexpr std::string_view kGameStateUpdated = "game-state-updated";

inline constexpr std::string_view kLoadedEvent = "loaded";
inline constexpr std::string_view kTimeExpiredEvent = "time-expired";

enum class StateKind { Atomic, Compound, Parallel, Final };

enum class StateRole { Root, Lifecycle, Room, Puzzle, PuzzlePhase, Sequence, SequenceStep };

/// Internal conditions for eventless transitions. Authors cannot write guards.
enum class Guard { None, AllPuzzlesSolved };

struct Transition {
  std::string event;  // empty for eventless transitions
  int target = -1;
  Guard guard = Guard::None;
};

struct StateNode {
  std::string name;
  std::string path;  // dot-joined names below the root; empty for the root
  StateKind kind = StateKind::Atomic;
  StateRole role = StateRole::Lifecycle;
  int parent = -1;
  std::vector<int> children;
  std::vector<Transition> transitions;
  std::vector<std::string> entry_emits;
  std::vector<std::string> exit_emits;
  std::optional<std::size_t> source_entity;  // document index of the declaring entity
};

class StateChart {
 public:
  const StateNode& root() const { return nodes_.front(); }
  const StateNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const std::vector<StateNode>& nodes() const { return nodes_; }
  std::optional<int> find(std::string_view path) const;
  bool has_path(std::string_view path) const { return find(path).has_value(); }

  std::vector<int> puzzles() const;
  std::vector<int> rooms() const;
  std::vector<int> sequences() const;
  /// Every event name that triggers some transition, sorted.
  std::vector<std::string> trigger_events() const;

 private:
  friend class StateChartBuilder;
  std::vector<StateNode> nodes_;
  std::map<std::string, int, std::less<>> by_path_;
};

/// Incremental construction; `build_statechart` drives it from a document.
class StateChartBuilder {
 public:
  StateChartBuilder();
  int add_room(const std::string& name, std::optional<std::size_t> source = {});
  int add_puzzle(const std::string& name, const std::string& room, std::optional<std::size_t> source = {});
  int add_sequence(const std::string& name, const std::vector<std::string>& steps,
                   std::optional<std::size_t> source = {});
  StateChart finish();

 private:
  int add_node(int parent, std::string name, StateKind kind, StateRole role);
  void check_name(const std::string& name) const;

  StateChart chart_;
  std::set<std::string> puzzle_names_;
};

StateChart build_statechart(const SceneDocument& doc);

/// Ancestor-closed set of active dot-paths.
struct StateConfiguration {
  std::set<std::string> active_paths;

  bool contains(std::string_view path) const { return active_paths.count(std::string(path)) != 0; }
  bool operator==(const StateConfiguration&) const = default;
  std::string to_string() const;
};

StateConfiguration initial_configuration(const StateChart& chart);

struct GameEvent {
  std::string name;
  std::optional<ComponentMap> payload;

  bool operator==(const GameEvent& other) const { return name == other.name && payload == other.payload; }
};

struct DispatchResult {
  StateConfiguration config;
  std::vector<GameEvent> emitted;
  bool updated = false;
};

/// Run-to-completion processing of one external event. Internal emits are
/// queued behind it; a single `game-state-updated` closes a changing dispatch.
DispatchResult dispatch(const StateChart& chart, const StateConfiguration& config, const GameEvent& event);

/// True when `path` is active or a `.`-boundary prefix of an active path.
bool state_matches(const StateConfiguration& config, std::string_view path);

enum class VisibilityChange { Show, Hide, NoChange };

/// Evaluates a `hide-in-state` component against a configuration.
VisibilityChange visibility_for(const StateConfiguration& config, const ComponentMap& hide_spec);

/// Payload listing active paths, attached to `game-state-updated`.
ComponentMap updated_payload(const StateConfiguration& config);

class Subscription;

/// Owns a configuration and broadcasts emitted events to listeners.
class GameStateMachine {
 public:
  using Listener = std::function<void(const GameEvent&)>;

  explicit GameStateMachine(std::shared_ptr<const StateChart> chart);

  const StateChart& chart() const { return *chart_; }
  const StateConfiguration& configuration() const { return config_; }
  void reset(StateConfiguration config) { config_ = std::move(config); }

  /// Events dispatched from inside a listener are queued and processed after
  /// the current dispatch finishes delivering; such calls return an empty result.
  DispatchResult dispatch(const GameEvent& event);

  [[nodiscard]] Subscription subscribe(Listener listener);

 private:
  friend class Subscription;
  struct Listeners {
    std::vector<std::pair<int, Listener>> entries;
    int next_id = 0;
  };

  std::shared_ptr<const StateChart> chart_;
  StateConfiguration config_;
  std::shared_ptr<Listeners> listeners_ = std::make_shared<Listeners>();
  bool delivering_ = false;
  std::vector<GameEvent> pending_;
};

class Subscription {
 public:
  Subscription() = default;
  Subscription(const Subscription&) = delete;
  Subscription& operator=(const Subscription&) = delete;
  Subscription(Subscription&& other) noexcept;
  Subscription& operator=(Subscription&& other) noexcept;
  ~Subscription() { unsubscribe(); }

  void unsubscribe();

 private:
  friend class GameStateMachine;
  Subscription(std::weak_ptr<GameStateMachine::Listeners> table, int id) : table_(std::move(table)), id_(id) {}

  std::weak_ptr<GameStateMachine::Listeners> table_;
  int id_ = -1;
};

}  // namespace escroom
