#include "escroom/error.hpp"
#include "escroom/panel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

namespace escroom {

namespace {

constexpr std::array kBlockTags = {"div", "p", "h1", "h2", "h3"};
constexpr std::array kInlineTags = {"span", "a", "button"};

template <std::size_t N>
bool contains(const std::array<const char*, N>& set, std::string_view tag) {
  return std::any_of(set.begin(), set.end(), [&](const char* t) { return tag == t; });
}

std::size_t glyphs(std::string_view s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
}

// Byte offset of the n-th code point.
std::size_t glyph_offset(std::string_view s, std::size_t n) {
  std::size_t i = 0;
  for (std::size_t seen = 0; i < s.size(); ++i) {
    if ((s[i] & 0xC0) != 0x80) {
      if (seen == n) return i;
      ++seen;
    }
  }
  return s.size();
}

struct Resolved {
  double font_size;  // meters
  double padding;
  std::string color;
};

struct Context {
  const StyleMap& styles;
  double ppm;
};

Resolved resolve(const Entity& e, const Resolved& parent, const Context& ctx) {
  Resolved r{parent.font_size, 0.0, parent.color};
  if (e.tag == "h1") r.font_size = 32 / ctx.ppm;
  if (e.tag == "h2") r.font_size = 24 / ctx.ppm;
  if (e.tag == "h3") r.font_size = 20 / ctx.ppm;
  if (e.tag == "p") r.font_size = 16 / ctx.ppm;
  if (e.tag == "button") {
    r.font_size = 16 / ctx.ppm;
    r.padding = 6 / ctx.ppm;
  }
  for (const auto& cls : e.classes) {
    const TextStyle* s = ctx.styles.find(cls);
    if (!s) continue;
    if (s->font_size_px) r.font_size = *s->font_size_px / ctx.ppm;
    if (s->padding_px) r.padding = *s->padding_px / ctx.ppm;
    if (s->color) r.color = *s->color;
  }
  return r;
}

void translate(LayoutBox& box, double dx, double dy) {
  box.rect.x += dx;
  box.rect.y += dy;
  for (auto& run : box.text_runs) run.position += Vec2(dx, dy);
  for (auto& c : box.children) translate(c, dx, dy);
}

struct Item {
  bool is_box = false;
  std::string word;
  LayoutBox box;
  double w = 0, h = 0;
  double space = 0;  // width of the gap before this item, 0 when none
};

struct Extent {
  double height = 0;
  double used = 0;
};

LayoutBox layout_element(const Entity& e, double avail, const Resolved& parent, bool shrink, const Context& ctx);

// Lays out `parent`'s children into `box` inside the content rect starting at (x0, y0).
Extent layout_children(const Entity& parent, LayoutBox& box, double x0, double y0, double width, const Resolved& r,
                       const Context& ctx) {
  double y = y0;
  double used = 0;
  std::vector<Item> items;
  const double adv = kGlyphAdvance * r.font_size;

  auto flush = [&] {
    std::vector<std::pair<Item*, double>> line;
    double cur = 0;
    auto finish = [&] {
      if (line.empty()) return;
      double lh = 0;
      for (auto& [item, x] : line) lh = std::max(lh, item->h);
      TextRun* run = nullptr;
      for (auto& [item, x] : line) {
        if (item->is_box) {
          translate(item->box, x0 + x, y);
          box.children.push_back(std::move(item->box));
          run = nullptr;
          continue;
        }
        if (run) {
          if (item->space > 0) run->text += ' ';
          run->text += item->word;
          run->width = x + item->w - (run->position.x() - x0);
        } else {
          box.text_runs.push_back({item->word, r.font_size, Vec2(x0 + x, y), item->w, r.color});
          run = &box.text_runs.back();
        }
      }
      used = std::max(used, cur);
      y += lh;
      line.clear();
      cur = 0;
    };
    for (auto& item : items) {
      double gap = line.empty() ? 0 : item.space;
      if (!line.empty() && cur + gap + item.w > width + 1e-9) {
        finish();
        gap = 0;
      }
      line.emplace_back(&item, cur + gap);
      cur += gap + item.w;
    }
    finish();
    items.clear();
  };

  bool pending_space = false;
  for (const Entity& child : parent.children) {
    if (child.is_text()) {
      const std::string& text = *child.text;
      std::size_t i = 0;
      bool space = pending_space || (!text.empty() && text.front() == ' ');
      while (i < text.size()) {
        while (i < text.size() && text[i] == ' ') ++i;
        std::size_t s = i;
        while (i < text.size() && text[i] != ' ') ++i;
        if (i == s) break;
        std::string word = text.substr(s, i - s);
        // words wider than the line are broken at glyph boundaries
        const auto per_line = static_cast<std::size_t>(std::floor(width / adv + 1e-9));
        bool first = true;
        while (!word.empty()) {
          std::size_t cut = glyph_offset(word, per_line);
          std::string piece = word.substr(0, cut);
          word.erase(0, cut);
          Item item;
          item.word = piece;
          item.w = static_cast<double>(glyphs(piece)) * adv;
          item.h = kLineHeight * r.font_size;
          item.space = first && space && !items.empty() ? adv : 0;
          items.push_back(std::move(item));
          first = false;
        }
        space = true;
      }
      pending_space = !text.empty() && text.back() == ' ';
    } else if (contains(kInlineTags, child.tag)) {
      Item item;
      item.is_box = true;
      item.box = layout_element(child, width, r, true, ctx);
      item.w = item.box.rect.w;
      item.h = item.box.rect.h;
      item.space = pending_space && !items.empty() ? adv : 0;
      items.push_back(std::move(item));
      pending_space = false;
    } else if (contains(kBlockTags, child.tag)) {
      flush();
      LayoutBox b = layout_element(child, width, r, false, ctx);
      translate(b, x0, y);
      y += b.rect.h;
      used = std::max(used, b.rect.w);
      box.children.push_back(std::move(b));
      pending_space = false;
    } else {
      throw Error(Errc::UnsupportedElement, "<" + child.tag + "> in panel", child.line);
    }
  }
  flush();
  return {y - y0, used};
}

LayoutBox layout_element(const Entity& e, double avail, const Resolved& parent, bool shrink, const Context& ctx) {
  Resolved r = resolve(e, parent, ctx);
  double inner = avail - 2 * r.padding;
  if (inner < kGlyphAdvance * r.font_size - 1e-12) {
    throw Error(Errc::PanelTooNarrow, "<" + e.tag + "> needs at least one glyph per line", e.line);
  }
  LayoutBox box;
  box.source = &e;
  box.locator = e.locator();
  box.tag = e.tag;
  Extent ext = layout_children(e, box, r.padding, r.padding, inner, r, ctx);
  double w = shrink ? std::min(avail, ext.used + 2 * r.padding) : avail;
  box.rect = {0, 0, w, ext.height + 2 * r.padding};
  return box;
}

const LayoutBox* find_box(const LayoutBox& box, std::string_view locator) {
  if (box.locator == locator) return &box;
  for (const auto& c : box.children) {
    if (const LayoutBox* f = find_box(c, locator)) return f;
  }
  return nullptr;
}

void collect_leaves(const LayoutBox& box, std::vector<const LayoutBox*>& out) {
  if (box.children.empty()) out.push_back(&box);
  for (const auto& c : box.children) collect_leaves(c, out);
}

nlohmann::ordered_json box_json(const LayoutBox& box) {
  nlohmann::ordered_json j;
  j["locator"] = box.locator;
  j["tag"] = box.tag;
  j["rect"] = {box.rect.x, box.rect.y, box.rect.w, box.rect.h};
  j["runs"] = nlohmann::ordered_json::array();
  for (const auto& run : box.text_runs) {
    j["runs"].push_back({{"text", run.text},
                         {"font_size", run.font_size},
                         {"x", run.position.x()},
                         {"y", run.position.y()},
                         {"width", run.width},
                         {"color", run.color}});
  }
  j["children"] = nlohmann::ordered_json::array();
  for (const auto& c : box.children) j["children"].push_back(box_json(c));
  return j;
}

const LayoutBox* deepest(const LayoutBox& box, const Vec2& p) {
  for (const auto& c : box.children) {
    if (c.rect.w <= 0 || c.rect.h <= 0 || !c.rect.contains(p)) continue;
    return deepest(c, p);
  }
  return &box;
}

const Entity* find_class(const Entity& e, std::string_view cls) {
  if (!e.is_text() && e.has_class(cls)) return &e;
  for (const auto& c : e.children) {
    if (const Entity* f = find_class(c, cls)) return f;
  }
  return nullptr;
}

std::string trimmed(std::string s) {
  auto b = s.find_first_not_of(' ');
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(' ') - b + 1);
}

}  // namespace

StyleMap StyleMap::defaults() {
  StyleMap m;
  m.set("btn", {std::nullopt, 8.0, std::nullopt});
  m.set("btn-primary", {std::nullopt, std::nullopt, "#0d6efd"});
  m.set("time_header", {12.0, std::nullopt, std::nullopt});
  m.set("time", {28.0, std::nullopt, std::nullopt});
  return m;
}

StyleMap StyleMap::from_json(std::string_view text) {
  StyleMap m = defaults();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("style map: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::InvalidArgument, "style map must be an object");
  for (const auto& [cls, v] : j.items()) {
    if (!v.is_object()) throw Error(Errc::InvalidArgument, "style for '" + cls + "' must be an object");
    TextStyle s;
    try {
      if (v.contains("font_size_px")) s.font_size_px = v["font_size_px"].get<double>();
      if (v.contains("padding_px")) s.padding_px = v["padding_px"].get<double>();
      if (v.contains("color")) s.color = v["color"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::InvalidArgument, "style for '" + cls + "': " + e.what());
    }
    if ((s.font_size_px && *s.font_size_px <= 0) || (s.padding_px && *s.padding_px < 0)) {
      throw Error(Errc::InvalidArgument, "style for '" + cls + "' has a non-positive size");
    }
    m.set(cls, s);
  }
  return m;
}

void StyleMap::set(const std::string& cls, const TextStyle& style) {
  TextStyle& s = classes_[cls];
  if (style.font_size_px) s.font_size_px = style.font_size_px;
  if (style.padding_px) s.padding_px = style.padding_px;
  if (style.color) s.color = style.color;
}

const TextStyle* StyleMap::find(std::string_view cls) const {
  auto it = classes_.find(cls);
  return it == classes_.end() ? nullptr : &it->second;
}

const LayoutBox* PanelLayout::find(std::string_view locator) const { return find_box(root, locator); }

std::vector<const LayoutBox*> PanelLayout::leaves() const {
  std::vector<const LayoutBox*> out;
  collect_leaves(root, out);
  return out;
}

std::string PanelLayout::to_json() const {
  nlohmann::ordered_json j;
  j["width"] = width;
  j["height"] = height;
  j["px_per_meter"] = px_per_meter;
  j["root"] = box_json(root);
  return j.dump();
}

PanelLayout layout_panel(const Entity& panel, double width, double px_per_meter, const StyleMap& styles) {
  if (!(width > 0) || !(px_per_meter > 0)) {
    throw Error(Errc::InvalidArgument, "panel width and px_per_meter must be positive", panel.line);
  }
  Context ctx{styles, px_per_meter};
  Resolved base{16 / px_per_meter, 0.0, "#000000"};
  Resolved r = resolve(panel, base, ctx);
  PanelLayout layout;
  layout.width = width;
  layout.px_per_meter = px_per_meter;
  layout.root.source = &panel;
  layout.root.locator = panel.locator();
  layout.root.tag = panel.tag;
  double inner = width - 2 * r.padding;
  if (inner < kGlyphAdvance * r.font_size) throw Error(Errc::PanelTooNarrow, "panel narrower than one glyph", panel.line);
  Extent ext = layout_children(panel, layout.root, r.padding, r.padding, inner, r, ctx);
  layout.height = ext.height > 0 ? ext.height + 2 * r.padding : 0.0;
  layout.root.rect = {0, 0, width, layout.height};
  return layout;
}

Vec3 panel_to_world(const PanelLayout& layout, const Pose& pose, const Vec2& local) {
  return pose.to_transform() * Vec3(local.x() - layout.width / 2, layout.height / 2 - local.y(), 0.0);
}

std::optional<PanelHit> hit_test(const PanelLayout& layout, const Pose& panel_pose, const Ray& ray) {
  const Transform t = panel_pose.to_transform();
  const Vec3 normal = (t.linear() * Vec3::UnitZ()).normalized();
  const double denom = normal.dot(ray.direction);
  if (std::abs(denom) < 1e-12) return std::nullopt;
  const double dist = normal.dot(t.translation() - ray.origin) / denom;
  if (dist < 0) return std::nullopt;
  const Vec3 local = t.inverse() * (ray.origin + ray.direction * dist);
  const Vec2 p(local.x() + layout.width / 2, layout.height / 2 - local.y());
  constexpr double eps = 1e-9;
  if (p.x() < -eps || p.y() < -eps || p.x() > layout.width + eps || p.y() > layout.height + eps) return std::nullopt;
  const LayoutBox* box = deepest(layout.root, p);
  return PanelHit{box->source, box->locator, p};
}

std::vector<BusEvent> PointerTracker::dispatch(const std::optional<PanelHit>& hit, PointerAction action) {
  std::vector<BusEvent> out;
  if (action == PointerAction::Hover) {
    std::string next = hit ? hit->locator : std::string();
    if (next == hovered_) return out;
    if (!hovered_.empty()) out.push_back({"mouseleave", hovered_, ""});
    if (!next.empty()) out.push_back({"mouseenter", next, ""});
    hovered_ = next;
    return out;
  }
  if (!hit) return out;
  out.push_back({"click", hit->locator, ""});
  for (const Entity* e = hit->entity; e; e = doc_->parent_of(*e)) {
    if (e->tag != "a") continue;
    if (const Component* href = e->component("href")) out.push_back({"navigate", e->locator(), href->raw});
    break;
  }
  return out;
}

std::string format_mmss(double seconds) {
  const auto total = static_cast<long long>(std::floor(std::max(0.0, seconds) + 1e-9));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld", total / 60, total % 60);
  return buf;
}

ClockTick clock_tick(const ClockState& clock, double dt) {
  if (!(dt >= 0) || !std::isfinite(dt)) throw Error(Errc::InvalidArgument, "clock dt must be finite and >= 0");
  ClockTick out{clock, {}, {}};
  if (!clock.running) return out;
  ClockState& c = out.clock;
  c.remaining = std::max(0.0, clock.remaining - dt);
  if (c.remaining <= 0 && !clock.expired) {
    c.expired = true;
    c.running = false;
    out.events.push_back({std::string(kTimeExpiredEvent), std::nullopt});
  }
  std::string text = format_mmss(c.remaining);
  std::string mm = text.substr(0, text.find(':'));
  std::string ss = text.substr(text.find(':') + 1);
  if (mm != c.minute_text) {
    c.minute_text = mm;
    out.slots.push_back({c.minute_slot, mm});
  }
  if (ss != c.second_text) {
    c.second_text = ss;
    out.slots.push_back({c.second_slot, ss});
  }
  return out;
}

std::optional<ClockState> clock_from_panel(const Entity& panel) {
  const Entity* minutes = find_class(panel, "minutes");
  const Entity* seconds = find_class(panel, "seconds");
  if (!minutes || !seconds) return std::nullopt;
  ClockState c;
  c.minute_text = trimmed(minutes->text_content());
  c.second_text = trimmed(seconds->text_content());
  c.minute_slot = minutes->locator();
  c.second_slot = seconds->locator();
  auto number = [&](const std::string& s, const Entity& where) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) {
      throw Error(Errc::InvalidArgument, "watch slot text '" + s + "' is not a number", where.line);
    }
    return std::stod(s);
  };
  c.duration = number(c.minute_text, *minutes) * 60 + number(c.second_text, *seconds);
  c.remaining = c.duration;
  return c;
}

}  // namespace escroom
