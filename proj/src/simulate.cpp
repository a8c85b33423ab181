#include "escroom/error.hpp"
#include "escroom/runtime.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>

namespace escroom {

namespace {

using ordered_json = nlohmann::ordered_json;

bool terminal(const StateConfiguration& c) { return c.contains("escaped") || c.contains("failed"); }

// Point at arc length `s` along a polyline.
Vec3 along(const std::vector<Vec3>& path, double s) {
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    double len = (path[i + 1] - path[i]).norm();
    if (s <= len && len > 0) return path[i] + (path[i + 1] - path[i]) * (s / len);
    s -= len;
  }
  return path.back();
}

}  // namespace

SolutionScript SolutionScript::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidScript, std::string("not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("actions") || !j["actions"].is_array()) {
    throw Error(Errc::InvalidScript, "expected an object with an \"actions\" array");
  }
  SolutionScript script;
  std::size_t index = 0;
  for (const auto& a : j["actions"]) {
    std::string at = "action " + std::to_string(index++);
    if (!a.is_object() || a.size() != 1) throw Error(Errc::InvalidScript, at + ": expected a single-key object");
    const std::string& key = a.begin().key();
    const auto& value = a.begin().value();
    if (key == "move_to" && value.is_string() && !value.get<std::string>().empty()) {
      script.actions.push_back({ScriptAction::Kind::MoveTo, value.get<std::string>(), 0});
    } else if (key == "emit" && value.is_string() && !value.get<std::string>().empty()) {
      script.actions.push_back({ScriptAction::Kind::Emit, value.get<std::string>(), 0});
    } else if (key == "wait" && value.is_number() && value.get<double>() >= 0 && std::isfinite(value.get<double>())) {
      script.actions.push_back({ScriptAction::Kind::Wait, {}, value.get<double>()});
    } else {
      throw Error(Errc::InvalidScript, at + ": unsupported " + key + " action");
    }
  }
  return script;
}

std::string SolutionScript::to_json() const {
  ordered_json list = ordered_json::array();
  for (const ScriptAction& a : actions) {
    switch (a.kind) {
      case ScriptAction::Kind::MoveTo: list.push_back({{"move_to", a.target}}); break;
      case ScriptAction::Kind::Emit: list.push_back({{"emit", a.target}}); break;
      case ScriptAction::Kind::Wait: list.push_back({{"wait", a.seconds}}); break;
    }
  }
  return ordered_json{{"actions", list}}.dump(2);
}

void SolutionScript::validate(const SceneDocument& doc) const {
  for (const ScriptAction& a : actions) {
    if (a.kind == ScriptAction::Kind::MoveTo && !doc.find_by_locator(a.target)) {
      throw Error(Errc::InvalidScript, "move_to target '" + a.target + "' is not in the scene");
    }
  }
}

std::uint64_t SimulationResult::trace_hash() const {
  std::uint64_t h = 14695981039346656037ull;
  for (std::uint64_t f : frame_hashes) {
    for (int i = 0; i < 8; ++i) {
      h ^= (f >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  }
  return h;
}

std::string SimulationResult::to_json() const {
  ordered_json j;
  j["escaped"] = escaped;
  j["failed"] = failed;
  j["escape_time"] = escape_time ? ordered_json(*escape_time) : ordered_json(nullptr);
  j["end_time"] = end_time;
  j["steps"] = steps;
  j["final_state"] = final_state;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(trace_hash()));
  j["trace_hash"] = buf;
  j["errors"] = errors;
  ordered_json frames_json = ordered_json::array();
  for (const FrameReport& f : frames) frames_json.push_back(ordered_json::parse(f.to_json()));
  j["frames"] = frames_json;
  return j.dump(2);
}

SimulationResult simulate(World& world, const SolutionScript& script, const SimulateOptions& options) {
  if (!(options.dt > 0) || !(options.walk_speed > 0)) {
    throw Error(Errc::InvalidArgument, "simulation dt and walk speed must be positive");
  }
  script.validate(world.doc());
  SimulationResult out;
  auto record = [&](const FrameReport& r) {
    out.frame_hashes.push_back(r.hash());
    if (!r.empty()) out.frames.push_back(r);
    for (const auto& e : r.errors) out.errors.push_back("t=" + std::to_string(r.time) + ": " + e);
    if (!out.escape_time && world.config().contains("escaped")) out.escape_time = r.time;
  };
  Input loaded = Input::emit(std::string(kLoadedEvent));
  record(world.step(0, std::span(&loaded, 1)));

  for (const ScriptAction& a : script.actions) {
    if (terminal(world.config())) break;
    switch (a.kind) {
      case ScriptAction::Kind::Emit: {
        Input in = Input::emit(a.target);
        record(world.step(0, std::span(&in, 1)));
        break;
      }
      case ScriptAction::Kind::Wait: {
        auto n = static_cast<long long>(std::ceil(a.seconds / options.dt - 1e-9));
        for (long long i = 0; i < n && !terminal(world.config()); ++i) record(world.step(options.dt));
        break;
      }
      case ScriptAction::Kind::MoveTo: {
        const NavMesh& mesh = world.mesh();
        Vec3 target = world.entity_transform(*world.doc().find_by_locator(a.target)).translation();
        auto goal = mesh.closest_point(target);
        Vec3 from = world.player().position;
        if (!mesh.locate(from, kSnapTolerance)) {
          if (auto snap = mesh.closest_point(from)) from = snap->second;
        }
        std::optional<std::vector<Vec3>> path;
        if (goal) {
          try {
            path = find_path(mesh, from, goal->second);
          } catch (const Error&) {
          }
        }
        if (!path) {
          out.errors.push_back("t=" + std::to_string(world.time()) + ": no path to " + a.target);
          break;
        }
        double total = path_length(*path);
        double stride = options.walk_speed * options.dt;
        auto n = static_cast<long long>(std::ceil(total / stride - 1e-9));
        for (long long i = 1; i <= n && !terminal(world.config()); ++i) {
          Vec3 next = along(*path, std::min(total, static_cast<double>(i) * stride));
          Input in = Input::move(next - world.player().position);
          record(world.step(options.dt, std::span(&in, 1)));
        }
        break;
      }
    }
  }
  out.escaped = out.escape_time.has_value();
  out.failed = world.config().contains("failed");
  out.end_time = world.time();
  out.steps = world.steps();
  out.final_state.assign(world.config().active_paths.begin(), world.config().active_paths.end());
  return out;
}

}  // namespace escroom
