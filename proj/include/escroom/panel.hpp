#pragma once

#include "escroom/geometry.hpp"
#include "escroom/markup.hpp"
#include "escroom/statechart.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace escroom {

/// Fixed text metrics, in multiples of the font size.
inline constexpr double kGlyphAdvance = 0.6;
inline constexpr double kLineHeight = 1.2;

struct TextStyle {
  std::optional<double> font_size_px;
  std::optional<double> padding_px;
  std::optional<std::string> color;
};

/// Class-driven styles. Tag defaults apply first, then every class of the
/// element in lexicographic order; later entries override earlier ones.
class StyleMap {
 public:
  static StyleMap defaults();
  /// `{class: {font_size_px, padding_px, color}}`, merged over the defaults.
  static StyleMap from_json(std::string_view text);

  void set(const std::string& cls, const TextStyle& style);
  const TextStyle* find(std::string_view cls) const;
  const std::map<std::string, TextStyle, std::less<>>& classes() const { return classes_; }

 private:
  std::map<std::string, TextStyle, std::less<>> classes_;
};

/// Panel-local rectangle in meters, origin top-left, y down.
struct Rect {
  double x = 0, y = 0, w = 0, h = 0;

  bool contains(const Vec2& p) const { return p.x() >= x && p.x() <= x + w && p.y() >= y && p.y() <= y + h; }
  Vec2 center() const { return {x + w / 2, y + h / 2}; }
};

struct TextRun {
  std::string text;
  double font_size = 0;  // meters
  Vec2 position = Vec2::Zero();  // top-left of the run
  double width = 0;
  std::string color;
};

struct LayoutBox {
  const Entity* source = nullptr;
  std::string locator;
  std::string tag;
  Rect rect;
  std::vector<TextRun> text_runs;
  std::vector<LayoutBox> children;
};

struct PanelLayout {
  double width = 0;
  double height = 0;
  double px_per_meter = 0;
  LayoutBox root;

  const LayoutBox* find(std::string_view locator) const;
  std::vector<const LayoutBox*> leaves() const;
  /// Stable serialization; identical layouts give identical bytes.
  std::string to_json() const;
};

/// Lays out the children of a panel element. Blocks (div, p, h1-h3) stack
/// vertically; inline elements (span, a, button) are placed whole on a line
/// and wrap to the next line when they do not fit.
PanelLayout layout_panel(const Entity& panel, double width, double px_per_meter,
                         const StyleMap& styles = StyleMap::defaults());

/// Panel-local point to world space. The pose is the panel centre; the panel
/// spans the pose's local x/y plane and faces +z.
Vec3 panel_to_world(const PanelLayout& layout, const Pose& pose, const Vec2& local);

struct PanelHit {
  const Entity* entity = nullptr;
  std::string locator;
  Vec2 point = Vec2::Zero();
};

std::optional<PanelHit> hit_test(const PanelLayout& layout, const Pose& panel_pose, const Ray& ray);

/// Event on the world bus. `target` is an entity locator; `detail` carries the
/// game event name, href or state list depending on `type`.
struct BusEvent {
  std::string type;
  std::string target;
  std::string detail;

  bool operator==(const BusEvent&) const = default;
};

enum class PointerAction { Hover, Click };

/// Turns hit-test results into DOM-style events. Hover with no hit leaves
/// the previously hovered entity.
class PointerTracker {
 public:
  explicit PointerTracker(const SceneDocument& doc) : doc_(&doc) {}

  std::vector<BusEvent> dispatch(const std::optional<PanelHit>& hit, PointerAction action);
  const std::string& hovered() const { return hovered_; }

 private:
  const SceneDocument* doc_;
  std::string hovered_;
};

struct ClockState {
  double duration = 3600;
  double remaining = 3600;
  bool running = true;
  bool expired = false;
  std::string minute_slot;  // locators of the slot elements
  std::string second_slot;
  std::string minute_text = "60";  // text currently displayed
  std::string second_text = "00";

  std::string display() const { return minute_text + ":" + second_text; }
};

struct SlotUpdate {
  std::string slot;
  std::string text;

  bool operator==(const SlotUpdate&) const = default;
};

struct ClockTick {
  ClockState clock;
  std::vector<SlotUpdate> slots;  // only slots whose text changed
  std::vector<GameEvent> events;
};

/// `MM:SS` of floor(seconds); minutes keep at least two digits.
std::string format_mmss(double seconds);

ClockTick clock_tick(const ClockState& clock, double dt);

/// Reads the starting time from `.minutes` / `.seconds` elements below `panel`.
std::optional<ClockState> clock_from_panel(const Entity& panel);

}  // namespace escroom
