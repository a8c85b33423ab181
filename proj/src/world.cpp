#include "escroom/error.hpp"
#include "escroom/runtime.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace escroom {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string where(const std::string& file, int line) {
  return line > 0 ? file + ":" + std::to_string(line) : file;
}

// Re-throws module errors with the scene file prefixed.
template <typename F>
auto in_file(const std::string& file, F&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), where(file, e.line()) + ": " + e.detail(), e.line());
  }
}

double number_attr(const Entity& e, std::string_view name, double fallback) {
  const Component* c = e.component(name);
  if (!c) return fallback;
  std::string s = trim(c->raw);
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw Error(Errc::MalformedAttribute, std::string(name) + "=\"" + c->raw + "\" is not a number", e.line);
  }
  return v;
}

Vec3 vec3_attr(const Entity& e, std::string_view name, const Vec3& fallback) {
  const Component* c = e.component(name);
  if (!c) return fallback;
  auto v = parse_vec3(c->raw);
  if (!v) throw Error(Errc::MalformedAttribute, std::string(name) + "=\"" + c->raw + "\" is not three numbers", e.line);
  return *v;
}

Transform local_transform(const Entity& e) {
  Transform t = Transform::Identity();
  t.translate(vec3_attr(e, "position", Vec3::Zero()));
  t.rotate(rotation_from_degrees(vec3_attr(e, "rotation", Vec3::Zero())));
  t.scale(vec3_attr(e, "scale", Vec3::Ones()));
  return t;
}

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Vec2& p : pts) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lo = k + 1; i-- > 0;) {
    while (k >= lo && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

struct Primitive {
  std::string kind;
  double width = 1, height = 1, depth = 1;
};

std::optional<Primitive> geometry_of(const Entity& e) {
  const Component* c = e.component("geometry");
  if (!c) return std::nullopt;
  Primitive p;
  p.kind = c->map.get_string("primitive").value_or("box");
  if (p.kind != "box" && p.kind != "plane") {
    throw Error(Errc::MalformedAttribute, "unsupported geometry primitive '" + p.kind + "'", e.line);
  }
  p.width = c->map.get_number("width").value_or(1);
  p.height = c->map.get_number("height").value_or(1);
  p.depth = c->map.get_number("depth").value_or(1);
  return p;
}

// Local-space corners; planes lie in x/y facing +z like their A-Frame counterpart.
std::vector<Vec3> primitive_corners(const Primitive& p) {
  double w = p.width / 2, h = p.height / 2, d = p.depth / 2;
  if (p.kind == "plane") return {{-w, -h, 0}, {w, -h, 0}, {w, h, 0}, {-w, h, 0}};
  std::vector<Vec3> out;
  for (int i = 0; i < 8; ++i) out.push_back({i & 1 ? w : -w, i & 2 ? h : -h, i & 4 ? d : -d});
  return out;
}

std::vector<Triangle> primitive_triangles(const Primitive& p, const Transform& world) {
  auto c = primitive_corners(p);
  std::vector<std::array<int, 3>> idx;
  if (p.kind == "plane") {
    idx = {{0, 1, 2}, {0, 2, 3}};
  } else {
    // corner bit 0 = +x, bit 1 = +y, bit 2 = +z; outward counter-clockwise faces
    idx = {{2, 6, 7}, {2, 7, 3},   // +y
           {0, 1, 5}, {0, 5, 4},   // -y
           {1, 3, 7}, {1, 7, 5},   // +x
           {0, 4, 6}, {0, 6, 2},   // -x
           {4, 5, 7}, {4, 7, 6},   // +z
           {0, 2, 3}, {0, 3, 1}};  // -z
  }
  std::vector<Triangle> out;
  for (const auto& t : idx) out.push_back({{world * c[t[0]], world * c[t[1]], world * c[t[2]]}});
  return out;
}

std::vector<Vec2> footprint_of(const Entity& e, const Transform& world) {
  if (const Component* c = e.component("footprint")) {
    auto list = c->map.get_list("points");
    if (!list) throw Error(Errc::MalformedAttribute, "footprint needs a points list", e.line);
    std::vector<Vec2> out;
    for (const std::string& item : *list) {
      std::istringstream ss(item);
      double x = 0, z = 0;
      std::string rest;
      if (!(ss >> x >> z) || (ss >> rest)) {
        throw Error(Errc::MalformedAttribute, "footprint point '" + item + "' is not 'x z'", e.line);
      }
      out.push_back(plan(world * Vec3(x, 0, z)));
    }
    if (out.size() < 3) throw Error(Errc::MalformedAttribute, "footprint needs at least 3 points", e.line);
    if (signed_area(out) < 0) std::reverse(out.begin(), out.end());
    return out;
  }
  if (auto g = geometry_of(e)) {
    std::vector<Vec2> pts;
    for (const Vec3& c : primitive_corners(*g)) pts.push_back(plan(world * c));
    auto hull = convex_hull(std::move(pts));
    if (hull.size() < 3) throw Error(Errc::MalformedAttribute, "geometry has no plan-view area", e.line);
    return hull;
  }
  throw Error(Errc::MalformedAttribute, "<" + e.tag + "> needs a footprint or geometry component", e.line);
}

std::optional<std::string> model_ref(const Entity& e) {
  if (e.tag == "a-gltf-model") {
    if (const Component* c = e.component("src")) return trim(c->raw);
  }
  if (const Component* c = e.component("gltf-model")) return trim(c->raw);
  return std::nullopt;
}

void apply_settings(const Entity& e, AgentParams& agent, BakeSettings& bake) {
  const ComponentMap& m = e.component("navmesh-settings")->map;
  agent.radius = m.get_number("radius").value_or(agent.radius);
  agent.height = m.get_number("height").value_or(agent.height);
  agent.max_climb = m.get_number("climb").value_or(agent.max_climb);
  agent.max_slope_deg = m.get_number("slope").value_or(agent.max_slope_deg);
  bake.cell_size = m.get_number("cell-size").value_or(bake.cell_size);
  bake.cell_height = m.get_number("cell-height").value_or(bake.cell_height);
  bake.min_island_area = m.get_number("min-island-area").value_or(bake.min_island_area);
}

ordered_json parse_json_attr(const Entity& e, std::string_view name) {
  const Component* c = e.component(name);
  if (!c) return ordered_json::object();
  try {
    return ordered_json::parse(c->raw);
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::MalformedAttribute, std::string(name) + " is not valid JSON", e.line);
  }
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

void fnv(std::uint64_t& h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
}

constexpr std::uint64_t kFnvBasis = 14695981039346656037ull;

}  // namespace

std::string_view to_string(BindingKind kind) noexcept {
  switch (kind) {
    case BindingKind::HideInState: return "hide-in-state";
    case BindingKind::Blocker: return "blocker";
    case BindingKind::Custom: return "custom";
  }
  return "?";
}

std::vector<std::string> StateBinding::paths() const {
  if (kind != BindingKind::Blocker) return {predicate};
  if (auto list = params.get_list("open")) return *list;
  if (auto s = params.get_string("open")) return {*s};
  return {};
}

bool FrameReport::empty() const {
  return entered.empty() && exited.empty() && events.empty() && visibility.empty() && blockers.empty() &&
         custom.empty() && slots.empty() && errors.empty() && !moved;
}

std::string FrameReport::to_json() const {
  auto toggles = [](const std::vector<Toggle>& v) {
    ordered_json a = ordered_json::array();
    for (const auto& t : v) a.push_back({{"subject", t.subject}, {"on", t.on}});
    return a;
  };
  ordered_json j;
  j["step"] = step;
  j["time"] = time;
  j["dt"] = dt;
  j["entered"] = entered;
  j["exited"] = exited;
  ordered_json ev = ordered_json::array();
  for (const auto& e : events) ev.push_back({{"type", e.type}, {"target", e.target}, {"detail", e.detail}});
  j["events"] = ev;
  j["visibility"] = toggles(visibility);
  j["blockers"] = toggles(blockers);
  j["custom"] = toggles(custom);
  ordered_json sl = ordered_json::array();
  for (const auto& s : slots) sl.push_back({{"slot", s.slot}, {"text", s.text}});
  j["slots"] = sl;
  j["errors"] = errors;
  j["moved"] = moved;
  j["player"] = {{"position", {player.position.x(), player.position.y(), player.position.z()}},
                 {"yaw", player.yaw_deg}};
  return j.dump();
}

std::uint64_t FrameReport::hash() const {
  std::uint64_t h = kFnvBasis;
  fnv(h, to_json());
  return h;
}

bool World::visible(std::string_view locator) const {
  auto it = visibility_.find(std::string(locator));
  return it == visibility_.end() || it->second;
}

bool World::custom_active(std::string_view locator) const {
  auto it = custom_.find(std::string(locator));
  return it != custom_.end() && it->second;
}

Transform World::entity_transform(const Entity& e) const {
  Transform t = local_transform(e);
  for (const Entity* p = doc_->parent_of(e); p; p = doc_->parent_of(*p)) t = local_transform(*p) * t;
  return t;
}

std::vector<bool> World::blocker_states(const StateConfiguration& config) const {
  std::vector<bool> out;
  for (const std::string& id : mesh_.blocker_ids()) {
    bool active = true;
    for (const StateBinding& b : bindings_) {
      if (b.kind != BindingKind::Blocker || b.subject != id) continue;
      auto paths = b.paths();
      if (!paths.empty()) {
        active = !std::all_of(paths.begin(), paths.end(),
                              [&](const std::string& p) { return state_matches(config, p); });
      }
    }
    out.push_back(active);
  }
  return out;
}

void World::apply_bindings(FrameReport* report) {
  for (const StateBinding& b : bindings_) {
    switch (b.kind) {
      case BindingKind::HideInState: {
        VisibilityChange change = visibility_for(config_, b.params);
        if (change == VisibilityChange::NoChange) break;
        bool show = change == VisibilityChange::Show;
        bool& cur = visibility_[b.subject];
        if (cur != show) {
          cur = show;
          if (report) report->visibility.push_back({b.subject, show});
        }
        break;
      }
      case BindingKind::Custom: {
        bool on = state_matches(config_, b.predicate);
        bool& cur = custom_[b.subject];
        if (cur != on) {
          cur = on;
          if (report) report->custom.push_back({b.subject, on});
        }
        break;
      }
      case BindingKind::Blocker: break;
    }
  }
  auto states = blocker_states(config_);
  const auto& ids = mesh_.blocker_ids();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (mesh_.blocker_active(ids[i]) == states[i]) continue;
    mesh_.set_blocker(ids[i], states[i]);
    if (report) report->blockers.push_back({ids[i], states[i]});
  }
}

FrameReport World::step(double dt, std::span<const Input> inputs) {
  if (!(dt >= 0) || !std::isfinite(dt)) throw Error(Errc::InvalidArgument, "step dt must be finite and >= 0");
  FrameReport report;
  report.step = ++steps_;
  report.dt = dt;
  StateConfiguration before = config_;
  Vec3 start = player_.position;

  // (1) inputs
  std::vector<Vec3> moves;
  for (const Input& in : inputs) {
    switch (in.kind) {
      case Input::Kind::Emit:
        if (in.event.empty()) {
          report.errors.push_back("emit with an empty event name");
        } else {
          bus_.push_back({std::string(kGameStateEvent), std::string(kSceneTarget), in.event});
        }
        break;
      case Input::Kind::Move:
        if (!in.delta.allFinite()) {
          report.errors.push_back("move delta is not finite");
        } else if (!spawn_) {
          report.errors.push_back("move ignored: scene has no player rig");
        } else {
          moves.push_back(in.delta);
        }
        break;
      case Input::Kind::Pointer: {
        if (!in.ray.origin.allFinite() || !in.ray.direction.allFinite() || in.ray.direction.norm() < 1e-12) {
          report.errors.push_back("pointer ray is degenerate");
          break;
        }
        std::optional<PanelHit> best;
        double best_dist = 0;
        for (const auto& [loc, panel] : panels_) {
          if (!visible(loc)) continue;
          auto hit = hit_test(panel.layout, panel.pose, in.ray);
          if (!hit) continue;
          double d = (panel_to_world(panel.layout, panel.pose, hit->point) - in.ray.origin).norm();
          if (!best || d < best_dist) {
            best = hit;
            best_dist = d;
          }
        }
        for (BusEvent& e : pointer_->dispatch(best, in.action)) bus_.push_back(std::move(e));
        break;
      }
    }
  }

  // (2) clock; expiry goes ahead of everything queued this step
  ClockTick tick = clock_tick(clock_, dt);
  clock_ = tick.clock;
  report.slots = tick.slots;
  for (auto it = tick.events.rbegin(); it != tick.events.rend(); ++it) {
    bus_.push_front({std::string(kGameStateEvent), std::string(kSceneTarget), it->name});
  }

  // (3) drain
  while (!bus_.empty()) {
    BusEvent e = std::move(bus_.front());
    bus_.pop_front();
    report.events.push_back(e);
    for (const auto& l : listeners_) l(e);
    if (e.type != kGameStateEvent) continue;
    DispatchResult r = dispatch(*chart_, config_, GameEvent{e.detail, std::nullopt});
    config_ = std::move(r.config);
    for (const GameEvent& out : r.emitted) {
      if (out.name == kGameStateUpdated) {
        std::vector<std::string> paths(config_.active_paths.begin(), config_.active_paths.end());
        bus_.push_back({std::string(kGameStateUpdated), std::string(kSceneTarget), join(paths, ",")});
      } else {
        bus_.push_back({"state-emit", std::string(kSceneTarget), out.name});
      }
    }
  }

  // (4) bindings
  apply_bindings(&report);
  if (config_.contains("escaped") || config_.contains("failed")) clock_.running = false;

  // (5) movement
  for (const Vec3& delta : moves) {
    if (!mesh_.locate(player_.position, kSnapTolerance)) {
      auto snap = mesh_.closest_point(player_.position);
      if (!snap) {
        report.errors.push_back("move ignored: no active navmesh");
        continue;
      }
      player_.position = snap->second;
      report.errors.push_back("player was off the active navmesh and was snapped back");
    }
    player_.position = constrain_move(mesh_, player_.position, player_.position + delta);
    if (delta.x() != 0 || delta.z() != 0) {
      player_.yaw_deg = std::atan2(-delta.x(), -delta.z()) * 180 / std::numbers::pi;
    }
  }

  std::set_difference(config_.active_paths.begin(), config_.active_paths.end(), before.active_paths.begin(),
                      before.active_paths.end(), std::back_inserter(report.entered));
  std::set_difference(before.active_paths.begin(), before.active_paths.end(), config_.active_paths.begin(),
                      config_.active_paths.end(), std::back_inserter(report.exited));
  time_ += dt;
  report.time = time_;
  report.moved = player_.position != start;
  report.player = player_;
  return report;
}

World assemble_world(const std::filesystem::path& scene_path, const AssembleOptions& options) {
  return assemble_world_source(read_text(scene_path), scene_path.parent_path(), options, scene_path);
}

World assemble_world_source(std::string_view source, const std::filesystem::path& base_dir,
                            const AssembleOptions& options, const std::filesystem::path& scene_path) {
  World w;
  w.scene_path_ = scene_path.empty() ? base_dir / "<scene>" : scene_path;
  const std::string file = w.scene_path_.filename().string();
  return in_file(file, [&]() -> World {
    w.doc_ = std::make_shared<const SceneDocument>(parse_scene(source));
    const SceneDocument& doc = *w.doc_;
    std::vector<const Entity*> elements;
    for (std::size_t i = 1; i < doc.size(); ++i) {
      const Entity* e = doc.by_index(i);
      if (!e->is_text()) elements.push_back(e);
    }

    // assets
    std::map<std::filesystem::path, Asset> loaded;
    for (const Entity* e : elements) {
      auto ref = model_ref(*e);
      if (!ref) continue;
      std::string path = *ref;
      if (path.starts_with("#")) {
        const Entity* item = doc.find_by_id(path.substr(1));
        const Component* src = item ? item->component("src") : nullptr;
        if (!src) throw Error(Errc::MissingAsset, "no asset item with id '" + path.substr(1) + "'", e->line);
        path = trim(src->raw);
      }
      std::filesystem::path full = base_dir / path;
      auto it = loaded.find(full);
      if (it == loaded.end()) {
        if (!std::filesystem::exists(full)) {
          throw Error(Errc::MissingAsset, "asset file " + full.string() + " not found", e->line);
        }
        try {
          it = loaded.emplace(full, load_gltf(full)).first;
        } catch (const Error& err) {
          throw Error(err.code(), full.filename().string() + ": " + err.detail(), e->line);
        }
      }
      Asset asset = it->second;
      if (const Component* hide = e->component("gltf-hide")) {
        for (const std::string& warn : apply_gltf_hide(asset, hide->map)) {
          w.warnings_.push_back(where(file, e->line) + ": " + warn);
        }
      }
      w.assets_.emplace(e->locator(), std::move(asset));
    }

    // navmesh sources
    const Entity* rig = nullptr;
    for (const Entity* e : elements) {
      if (e->component("simple-navmesh-constraint")) {
        rig = e;
        break;
      }
    }
    Selector source_sel = Selector::cls("navmesh");
    Selector hole_sel = Selector::cls("navmesh-hole");
    if (rig) {
      const ComponentMap& m = rig->component("simple-navmesh-constraint")->map;
      source_sel = m.get_selector("navmesh").value_or(source_sel);
      hole_sel = m.get_selector("exclude").value_or(hole_sel);
    }
    std::vector<Triangle> tris;
    for (const Entity* e : query_select(doc, source_sel)) {
      Transform world = w.entity_transform(*e);
      auto asset = w.assets_.find(e->locator());
      if (asset != w.assets_.end()) {
        Transform t = options.z_up ? Transform(world * z_up_to_y_up()) : world;
        auto part = extract_triangles(asset->second, std::nullopt, t);
        tris.insert(tris.end(), part.begin(), part.end());
      } else if (auto g = geometry_of(*e)) {
        auto part = primitive_triangles(*g, world);
        tris.insert(tris.end(), part.begin(), part.end());
      } else {
        w.warnings_.push_back(where(file, e->line) + ": navmesh source " + e->locator() + " has no geometry");
      }
    }
    if (tris.empty()) {
      throw Error(Errc::NoWalkableSurface, "no triangles in navmesh sources matching " + source_sel.to_string());
    }

    AgentParams agent = options.agent;
    BakeSettings bake = options.bake;
    for (const Entity* e : elements) {
      if (e->component("navmesh-settings")) {
        apply_settings(*e, agent, bake);
        break;
      }
    }

    std::vector<BlockerFootprint> blockers;
    for (const Entity* e : elements) {
      if (!e->component("navmesh-blocker")) continue;
      blockers.push_back({e->locator(), footprint_of(*e, w.entity_transform(*e))});
    }
    BakeResult baked = bake_navmesh(tris, agent, bake, blockers);
    for (auto& warn : baked.warnings) w.warnings_.push_back("navmesh: " + warn);
    std::vector<Hole> holes;
    for (const Entity* e : query_select(doc, hole_sel)) {
      holes.push_back({footprint_of(*e, w.entity_transform(*e)), e->locator()});
    }
    w.mesh_ = holes.empty() ? std::move(baked.mesh) : carve_holes(baked.mesh, holes);

    // statechart
    w.chart_ = std::make_shared<const StateChart>(build_statechart(doc));
    const StateChart& chart = *w.chart_;
    for (int id : chart.puzzles()) {
      const StateNode& n = chart.node(id);
      PuzzleInfo p;
      p.name = n.name;
      p.room = chart.node(n.parent).name;
      p.event = chart.node(n.children.front()).transitions.front().event;
      if (n.source_entity) {
        const Entity* e = doc.by_index(*n.source_entity);
        p.entity = e->locator();
        if (e->component("position")) p.position = w.entity_transform(*e).translation();
      }
      w.puzzles_.push_back(std::move(p));
    }

    // panels and clock
    StyleMap styles = StyleMap::defaults();
    for (const Entity* e : elements) {
      if (const Component* c = e->component("style-map")) {
        styles = StyleMap::from_json(read_text(base_dir / trim(c->raw)));
        break;
      }
    }
    const Entity* clock_panel = nullptr;
    for (const Entity* e : elements) {
      bool watch = e->tag == "esc-watch";
      if (!watch && e->tag != "esc-html-panel") continue;
      PanelInstance panel;
      panel.locator = e->locator();
      double width = number_attr(*e, "width", watch ? 0.1 : 1.0);
      double ppm = number_attr(*e, "px-per-meter", watch ? 2000 : 500);
      panel.layout = layout_panel(*e, width, ppm, styles);
      Transform t = w.entity_transform(*e);
      ordered_json settings = parse_json_attr(*e, "settings");
      if (settings.contains("parentSelector")) {
        Selector sel = Selector::parse(settings["parentSelector"].get<std::string>());
        const Entity* parent = query_select_first(doc, sel);
        if (!parent) {
          throw Error(Errc::InvalidSelector, "parentSelector " + sel.to_string() + " matches nothing", e->line);
        }
        t = w.entity_transform(*parent) * local_transform(*e);
      }
      panel.pose = Pose::from_transform(t);
      ordered_json comps = parse_json_attr(*e, "components");
      bool clock = e->component("game-clock") || (comps.contains("game-clock") && comps["game-clock"] == true);
      if (clock && !clock_panel) clock_panel = e;
      w.panels_.emplace(panel.locator, std::move(panel));
    }
    if (clock_panel) {
      if (auto c = clock_from_panel(*clock_panel)) {
        w.clock_ = *c;
      } else {
        w.warnings_.push_back(where(file, clock_panel->line) + ": clock panel has no .minutes/.seconds slots");
      }
    } else {
      w.clock_.running = false;
    }

    // bindings
    std::vector<std::string> unknown;
    for (const Entity* e : elements) {
      auto add = [&](BindingKind kind, const Component& c, std::string predicate) {
        StateBinding b{kind, e->locator(), std::move(predicate), c.map, e->line};
        for (const std::string& p : b.paths()) {
          if (!chart.has_path(p)) unknown.push_back(p + " (" + where(file, e->line) + ")");
        }
        w.bindings_.push_back(std::move(b));
      };
      if (const Component* c = e->component("hide-in-state")) {
        auto state = c->map.get_string("state");
        if (!state) throw Error(Errc::MissingStateKey, "hide-in-state needs a state key", e->line);
        add(BindingKind::HideInState, *c, *state);
      }
      if (const Component* c = e->component("navmesh-blocker")) {
        StateBinding probe{BindingKind::Blocker, {}, {}, c->map, 0};
        auto paths = probe.paths();
        add(BindingKind::Blocker, *c, paths.empty() ? std::string() : paths.front());
      }
      if (const Component* c = e->component("state-binding")) {
        auto state = c->map.get_string("state");
        if (!state) throw Error(Errc::MissingStateKey, "state-binding needs a state key", e->line);
        add(BindingKind::Custom, *c, *state);
      }
    }
    if (!unknown.empty()) throw Error(Errc::UnknownStatePath, "bindings name unknown state paths: " + join(unknown, ", "));

    for (const Entity* e : elements) w.visibility_[e->locator()] = true;
    w.config_ = initial_configuration(chart);
    w.apply_bindings(nullptr);
    w.pointer_.emplace(doc);

    if (rig) {
      Vec3 spawn = w.entity_transform(*rig).translation();
      if (!w.mesh_.locate(spawn, kSnapTolerance)) {
        auto snap = w.mesh_.closest_point(spawn);
        if (!snap) throw Error(Errc::MissingSpawn, "no active navmesh to place the player on", rig->line);
        if ((snap->second - spawn).norm() > kSnapTolerance) {
          std::ostringstream msg;
          msg << where(file, rig->line) << ": spawn moved " << (snap->second - spawn).norm()
              << " m onto the navmesh";
          w.warnings_.push_back(msg.str());
        }
        spawn = snap->second;
      }
      w.spawn_ = spawn;
      w.player_.position = spawn;
    }
    return std::move(w);
  });
}

}  // namespace escroom
