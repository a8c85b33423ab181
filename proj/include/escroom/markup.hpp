#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace escroom {

/// DOM-style single selector: `#id`, `.class` or a bare tag name.
struct Selector {
  enum class Kind { Id, Class, Tag };

  Kind kind = Kind::Tag;
  std::string name;

  static Selector parse(std::string_view text);
  static Selector id(std::string name) { return {Kind::Id, std::move(name)}; }
  static Selector cls(std::string name) { return {Kind::Class, std::move(name)}; }
  static Selector tag(std::string name) { return {Kind::Tag, std::move(name)}; }

  std::string to_string() const;
  bool operator==(const Selector&) const = default;
};

using StringList = std::vector<std::string>;
using Value = std::variant<std::string, Selector, double, bool, StringList>;

std::string value_to_string(const Value& value);

/// Ordered key/value map parsed from a component attribute such as
/// `type:puzzle; name:puzzle1; room:room1`.
class ComponentMap {
 public:
  using Entry = std::pair<std::string, Value>;

  ComponentMap() = default;
  ComponentMap(std::initializer_list<Entry> entries);

  const Value* find(std::string_view key) const;
  bool contains(std::string_view key) const { return find(key) != nullptr; }

  /// Replaces the value in place when the key exists, appends otherwise.
  void set(std::string key, Value value);

  std::optional<std::string> get_string(std::string_view key) const;
  std::optional<double> get_number(std::string_view key) const;
  std::optional<bool> get_bool(std::string_view key) const;
  std::optional<Selector> get_selector(std::string_view key) const;
  /// Lists, or a single string promoted to a one-element list.
  std::optional<StringList> get_list(std::string_view key) const;

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  bool operator==(const ComponentMap&) const = default;

 private:
  std::vector<Entry> entries_;
};

ComponentMap parse_component_map(std::string_view raw);
std::string serialize_component_map(const ComponentMap& map);

/// One authored attribute. `raw` keeps the decoded attribute text so that
/// unknown components survive serialization verbatim.
struct Component {
  std::string name;
  std::string raw;
  ComponentMap map;
};

struct Entity {
  std::string tag;  // "#text" for text runs, "#document" for the document root
  std::optional<std::string> id;
  std::set<std::string> classes;
  std::vector<Component> components;
  std::vector<Entity> children;
  std::optional<std::string> text;
  int line = 0;
  std::size_t index = 0;  // document (pre-)order, root = 0

  bool is_text() const { return tag == "#text"; }
  bool has_class(std::string_view name) const;
  const Component* component(std::string_view name) const;
  bool matches(const Selector& sel) const;
  /// Concatenated text of all descendant text runs.
  std::string text_content() const;
  /// Event target name: the id when present, `@<index>` otherwise.
  std::string locator() const;
};

/// Structural equality: everything except source line numbers.
bool same_tree(const Entity& a, const Entity& b);

class SceneDocument {
 public:
  const Entity& root() const { return *root_; }
  const Entity* find_by_id(std::string_view id) const;
  const std::map<std::string, const Entity*, std::less<>>& entities_by_id() const { return by_id_; }
  const Entity* parent_of(const Entity& e) const;
  const Entity* by_index(std::size_t index) const;
  std::size_t size() const { return order_.size(); }

  /// Resolves an `@<index>` or id locator.
  const Entity* find_by_locator(std::string_view locator) const;

 private:
  friend SceneDocument parse_scene(std::string_view source);
  explicit SceneDocument(Entity root);

  std::shared_ptr<const Entity> root_;
  std::map<std::string, const Entity*, std::less<>> by_id_;
  std::vector<const Entity*> order_;
  std::vector<const Entity*> parents_;
};

/// Strict XML-style parse. The returned root is a synthetic `#document`
/// entity whose children are the top-level elements.
SceneDocument parse_scene(std::string_view source);
std::string serialize_scene(const SceneDocument& doc);

std::vector<const Entity*> query_select(const SceneDocument& doc, const Selector& sel);
const Entity* query_select_first(const SceneDocument& doc, const Selector& sel);

}  // namespace escroom
