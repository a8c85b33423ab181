#pragma once

#include "escroom/geometry.hpp"
#include "escroom/gltf.hpp"
#include "escroom/markup.hpp"
#include "escroom/navmesh.hpp"
#include "escroom/panel.hpp"
#include "escroom/statechart.hpp"

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace escroom {

struct AssembleOptions {
  /// Rotate model assets from z-up to y-up before extracting triangles.
  bool z_up = false;
  /// Defaults; a `navmesh-settings` component in the scene overrides them.
  AgentParams agent;
  BakeSettings bake;
};

enum class BindingKind { HideInState, Blocker, Custom };

std::string_view to_string(BindingKind kind) noexcept;

/// Ties an entity to the state configuration. Blockers list their opening
/// paths under `open`; the blocker is active unless every path matches.
struct StateBinding {
  BindingKind kind = BindingKind::Custom;
  std::string subject;  // entity locator
  std::string predicate;
  ComponentMap params;
  int line = 0;

  /// Every state path the binding refers to.
  std::vector<std::string> paths() const;
};

struct PanelInstance {
  std::string locator;
  PanelLayout layout;
  Pose pose;
};

struct Player {
  Vec3 position = Vec3::Zero();
  double yaw_deg = 0;
};

struct PuzzleInfo {
  std::string name;
  std::string room;
  std::string entity;  // locator of the declaring entity
  std::string event;   // solving event
  std::optional<Vec3> position;
};

struct Input {
  enum class Kind { Move, Pointer, Emit };

  Kind kind = Kind::Emit;
  Vec3 delta = Vec3::Zero();
  Ray ray;
  PointerAction action = PointerAction::Hover;
  std::string event;

  static Input move(const Vec3& delta) { return {Kind::Move, delta, {}, PointerAction::Hover, {}}; }
  static Input pointer(const Ray& ray, PointerAction action) { return {Kind::Pointer, Vec3::Zero(), ray, action, {}}; }
  static Input emit(std::string name) { return {Kind::Emit, Vec3::Zero(), {}, PointerAction::Hover, std::move(name)}; }
};

struct Toggle {
  std::string subject;
  bool on = false;

  bool operator==(const Toggle&) const = default;
};

struct FrameReport {
  std::uint64_t step = 0;
  double time = 0;  // after the step
  double dt = 0;
  std::vector<std::string> entered;
  std::vector<std::string> exited;
  std::vector<BusEvent> events;  // processing order
  std::vector<Toggle> visibility;
  std::vector<Toggle> blockers;  // on = blocking
  std::vector<Toggle> custom;
  std::vector<SlotUpdate> slots;
  std::vector<std::string> errors;
  bool moved = false;
  Player player;

  /// Nothing changed during the step.
  bool empty() const;
  std::string to_json() const;
  /// FNV-1a 64 over `to_json()`.
  std::uint64_t hash() const;
};

/// Scene name used as the target of game-state bus events.
inline constexpr std::string_view kSceneTarget = "scene";

class World {
 public:
  using Listener = std::function<void(const BusEvent&)>;

  const SceneDocument& doc() const { return *doc_; }
  const std::filesystem::path& scene_path() const { return scene_path_; }
  const StateChart& chart() const { return *chart_; }
  const StateConfiguration& config() const { return config_; }
  const NavMesh& mesh() const { return mesh_; }
  const std::map<std::string, Asset>& assets() const { return assets_; }
  const std::map<std::string, PanelInstance>& panels() const { return panels_; }
  const ClockState& clock() const { return clock_; }
  const Player& player() const { return player_; }
  const std::optional<Vec3>& spawn() const { return spawn_; }
  const std::vector<StateBinding>& bindings() const { return bindings_; }
  const std::vector<PuzzleInfo>& puzzles() const { return puzzles_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const std::map<std::string, bool>& visibility() const { return visibility_; }
  bool visible(std::string_view locator) const;
  bool custom_active(std::string_view locator) const;
  double time() const { return time_; }
  std::uint64_t steps() const { return steps_; }

  /// World transform of an entity, composed from `position`, `rotation`
  /// (degrees) and `scale` components of it and its ancestors.
  Transform entity_transform(const Entity& e) const;

  /// Blocker activity implied by a configuration, in `mesh().blocker_ids()` order.
  std::vector<bool> blocker_states(const StateConfiguration& config) const;

  /// Listeners see every bus event as it is drained.
  void add_listener(Listener listener) { listeners_.push_back(std::move(listener)); }

  /// Throws InvalidArgument when dt is negative or not finite.
  FrameReport step(double dt, std::span<const Input> inputs = {});

 private:
  friend World assemble_world_source(std::string_view, const std::filesystem::path&, const AssembleOptions&,
                                     const std::filesystem::path&);

  void apply_bindings(FrameReport* report);

  std::shared_ptr<const SceneDocument> doc_;
  std::filesystem::path scene_path_;
  std::shared_ptr<const StateChart> chart_;
  StateConfiguration config_;
  NavMesh mesh_;
  std::map<std::string, Asset> assets_;
  std::map<std::string, PanelInstance> panels_;
  ClockState clock_;
  Player player_;
  std::optional<Vec3> spawn_;
  std::vector<StateBinding> bindings_;
  std::vector<PuzzleInfo> puzzles_;
  std::vector<std::string> warnings_;
  std::map<std::string, bool> visibility_;
  std::map<std::string, bool> custom_;
  std::deque<BusEvent> bus_;
  std::optional<PointerTracker> pointer_;
  std::vector<Listener> listeners_;
  double time_ = 0;
  std::uint64_t steps_ = 0;
};

/// Reads the scene and every referenced asset. Errors carry `file:line`.
World assemble_world(const std::filesystem::path& scene_path, const AssembleOptions& options = {});
/// Same pipeline on in-memory markup; assets resolve against `base_dir`.
/// `scene_path` only names the source in errors.
World assemble_world_source(std::string_view source, const std::filesystem::path& base_dir,
                            const AssembleOptions& options = {}, const std::filesystem::path& scene_path = {});

struct ScriptAction {
  enum class Kind { MoveTo, Emit, Wait };

  Kind kind = Kind::Wait;
  std::string target;  // entity id for MoveTo, event name for Emit
  double seconds = 0;

  bool operator==(const ScriptAction&) const = default;
};

struct SolutionScript {
  std::vector<ScriptAction> actions;

  /// `{"actions": [{"move_to": id} | {"emit": name} | {"wait": seconds}]}`.
  /// Throws InvalidScript.
  static SolutionScript from_json(std::string_view text);
  std::string to_json() const;
  /// Throws InvalidScript for move_to targets missing from the document.
  void validate(const SceneDocument& doc) const;

  bool operator==(const SolutionScript&) const = default;
};

struct SimulateOptions {
  double dt = 0.1;
  double walk_speed = 1.4;  // m/s
};

struct SimulationResult {
  bool escaped = false;
  bool failed = false;
  std::optional<double> escape_time;
  double end_time = 0;
  std::uint64_t steps = 0;
  std::vector<std::string> final_state;
  std::vector<std::uint64_t> frame_hashes;
  std::vector<FrameReport> frames;  // non-empty frames only
  std::vector<std::string> errors;

  /// FNV-1a 64 over the frame hashes.
  std::uint64_t trace_hash() const;
  std::string to_json() const;
};

/// Emits "loaded", then plays the script: move_to walks the navmesh path to the
/// entity at `walk_speed`, emit is a zero-length step, wait advances the clock.
/// Stops early once a final state is reached.
SimulationResult simulate(World& world, const SolutionScript& script, const SimulateOptions& options = {});

struct SolvabilityResult {
  bool solvable = false;
  SolutionScript witness;
  std::size_t explored = 0;  // distinct (configuration, region) nodes
  int depth = 0;             // deepest level expanded
  /// No escape and the search ran out of nodes before max_depth.
  bool exhausted = false;
  std::vector<std::string> unsolved_puzzles;  // never solved in any explored node

  std::string to_json() const;
};

/// Breadth-first search over (configuration, player region). Puzzle events
/// need a navmesh path to the puzzle under the blockers of the configuration;
/// other trigger events are free. One level = one event.
/// Throws MissingSpawn, PuzzleWithoutPosition.
SolvabilityResult check_solvable(const World& world, int max_depth = 64);

}  // namespace escroom
