#include "escroom/error.hpp"
#include "escroom/markup.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace escroom {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  char c = s.front();
  if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '.')) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

Value parse_value(std::string_view s) {
  if (s.find(',') != std::string_view::npos) {
    StringList items;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = s.find(',', start);
      items.emplace_back(trim(s.substr(start, comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return items;
  }
  if (s == "true") return true;
  if (s == "false") return false;
  if (auto n = parse_number(s)) return *n;
  if (s.size() > 1 && (s.front() == '#' || s.front() == '.') &&
      std::none_of(s.begin(), s.end(), is_space)) {
    return Selector::parse(s);
  }
  return std::string(s);
}

std::string number_to_string(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

Selector Selector::parse(std::string_view text) {
  text = trim(text);
  Selector sel;
  if (!text.empty() && text.front() == '#') {
    sel.kind = Kind::Id;
    text.remove_prefix(1);
  } else if (!text.empty() && text.front() == '.') {
    sel.kind = Kind::Class;
    text.remove_prefix(1);
  }
  if (text.empty()) throw Error(Errc::InvalidSelector, "empty selector name");
  sel.name = std::string(text);
  return sel;
}

std::string Selector::to_string() const {
  switch (kind) {
    case Kind::Id: return "#" + name;
    case Kind::Class: return "." + name;
    case Kind::Tag: return name;
  }
  return name;
}

std::string value_to_string(const Value& value) {
  struct Visitor {
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(const Selector& s) const { return s.to_string(); }
    std::string operator()(double d) const { return number_to_string(d); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(const StringList& l) const {
      std::string out;
      for (std::size_t i = 0; i < l.size(); ++i) {
        if (i) out += ',';
        out += l[i];
      }
      return out;
    }
  };
  return std::visit(Visitor{}, value);
}

ComponentMap::ComponentMap(std::initializer_list<Entry> entries) {
  for (const auto& [k, v] : entries) set(k, v);
}

const Value* ComponentMap::find(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return &v;
  }
  return nullptr;
}

void ComponentMap::set(std::string key, Value value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::move(key), std::move(value));
}

std::optional<std::string> ComponentMap::get_string(std::string_view key) const {
  const Value* v = find(key);
  if (!v) return std::nullopt;
  return value_to_string(*v);
}

std::optional<double> ComponentMap::get_number(std::string_view key) const {
  const Value* v = find(key);
  if (!v) return std::nullopt;
  if (const double* d = std::get_if<double>(v)) return *d;
  return std::nullopt;
}

std::optional<bool> ComponentMap::get_bool(std::string_view key) const {
  const Value* v = find(key);
  if (!v) return std::nullopt;
  if (const bool* b = std::get_if<bool>(v)) return *b;
  return std::nullopt;
}

std::optional<Selector> ComponentMap::get_selector(std::string_view key) const {
  const Value* v = find(key);
  if (!v) return std::nullopt;
  if (const Selector* s = std::get_if<Selector>(v)) return *s;
  if (const std::string* s = std::get_if<std::string>(v)) {
    if (!s->empty()) return Selector::parse(*s);
  }
  return std::nullopt;
}

std::optional<StringList> ComponentMap::get_list(std::string_view key) const {
  const Value* v = find(key);
  if (!v) return std::nullopt;
  if (const StringList* l = std::get_if<StringList>(v)) return *l;
  return StringList{value_to_string(*v)};
}

ComponentMap parse_component_map(std::string_view raw) {
  struct Clause {
    std::string_view text;
    std::size_t offset;
  };
  std::vector<Clause> clauses;
  std::size_t start = 0;
  while (start <= raw.size()) {
    std::size_t semi = raw.find(';', start);
    std::size_t end = semi == std::string_view::npos ? raw.size() : semi;
    std::string_view clause = raw.substr(start, end - start);
    if (!trim(clause).empty()) clauses.push_back({clause, start});
    if (semi == std::string_view::npos) break;
    start = semi + 1;
  }

  ComponentMap map;
  if (clauses.size() == 1 && clauses[0].text.find(':') == std::string_view::npos) {
    map.set("", parse_value(trim(clauses[0].text)));
    return map;
  }
  for (const Clause& c : clauses) {
    std::size_t colon = c.text.find(':');
    if (colon == std::string_view::npos) {
      // bare flag inside a multi-clause map
      map.set(std::string(trim(c.text)), true);
      continue;
    }
    std::string_view key = trim(c.text.substr(0, colon));
    if (key.empty()) {
      throw Error(Errc::EmptyKey, "clause at position " + std::to_string(c.offset + colon));
    }
    map.set(std::string(key), parse_value(trim(c.text.substr(colon + 1))));
  }
  return map;
}

std::string serialize_component_map(const ComponentMap& map) {
  if (map.size() == 1 && map.entries().front().first.empty()) {
    return value_to_string(map.entries().front().second);
  }
  std::string out;
  for (const auto& [k, v] : map) {
    if (!out.empty()) out += "; ";
    out += k;
    out += ": ";
    out += value_to_string(v);
  }
  return out;
}

}  // namespace escroom
