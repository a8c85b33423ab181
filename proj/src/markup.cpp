#include "escroom/error.hpp"
#include "escroom/markup.hpp"

#include <algorithm>
#include <array>
#include <functional>

namespace escroom {

namespace {

constexpr std::array kVoidTags = {"area", "base", "br", "col", "embed", "hr", "img", "input",
                                  "link", "meta", "param", "source", "track", "wbr"};
constexpr std::array kRawTextTags = {"script", "style"};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == ':' || c == '.' ||
         static_cast<unsigned char>(c) >= 0x80;
}

bool is_attr_name_char(char c) {
  return !is_space(c) && c != '/' && c != '>' && c != '=' && c != '"' && c != '\'' && c != '<';
}

template <std::size_t N>
bool contains(const std::array<const char*, N>& set, std::string_view s) {
  return std::any_of(set.begin(), set.end(), [&](const char* t) { return s == t; });
}

void append_utf8(std::string& out, unsigned cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

std::string decode_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out += s[i];
      continue;
    }
    std::size_t semi = s.find(';', i);
    if (semi == std::string_view::npos || semi - i > 10) {
      out += s[i];
      continue;
    }
    std::string_view name = s.substr(i + 1, semi - i - 1);
    if (name == "amp") out += '&';
    else if (name == "lt") out += '<';
    else if (name == "gt") out += '>';
    else if (name == "quot") out += '"';
    else if (name == "apos") out += '\'';
    else if (name.size() > 1 && name[0] == '#') {
      unsigned cp = 0;
      bool hex = name[1] == 'x' || name[1] == 'X';
      std::string digits(name.substr(hex ? 2 : 1));
      try {
        cp = static_cast<unsigned>(std::stoul(digits, nullptr, hex ? 16 : 10));
      } catch (const std::exception&) {
        out += s[i];
        continue;
      }
      append_utf8(out, cp);
    } else {
      out += s[i];
      continue;
    }
    i = semi;
  }
  return out;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  bool in_space = false;
  for (char c : s) {
    if (is_space(c)) {
      if (!in_space) out += ' ';
      in_space = true;
    } else {
      out += c;
      in_space = false;
    }
  }
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Entity parse() {
    Entity doc;
    doc.tag = "#document";
    doc.line = 1;
    std::vector<Entity*> stack{&doc};
    std::vector<std::string> ids;

    while (pos_ < src_.size()) {
      if (src_[pos_] != '<') {
        std::size_t next = src_.find('<', pos_);
        if (next == std::string_view::npos) next = src_.size();
        add_text(*stack.back(), src_.substr(pos_, next - pos_), line_);
        advance_to(next);
        continue;
      }
      if (starts_with("<!--")) {
        std::size_t end = src_.find("-->", pos_ + 4);
        if (end == std::string_view::npos) throw Error(Errc::UnbalancedTag, "unterminated comment", line_);
        advance_to(end + 3);
        continue;
      }
      if (starts_with("<![CDATA[")) {
        std::size_t end = src_.find("]]>", pos_);
        if (end == std::string_view::npos) throw Error(Errc::UnbalancedTag, "unterminated CDATA", line_);
        int line = line_;
        std::string_view body = src_.substr(pos_ + 9, end - pos_ - 9);
        add_raw_text(*stack.back(), std::string(body), line);
        advance_to(end + 3);
        continue;
      }
      if (starts_with("<!") || starts_with("<?")) {
        std::size_t end = src_.find('>', pos_);
        if (end == std::string_view::npos) throw Error(Errc::UnbalancedTag, "unterminated declaration", line_);
        advance_to(end + 1);
        continue;
      }
      if (starts_with("</")) {
        int line = line_;
        advance(2);
        std::string name = read_name();
        skip_space();
        if (pos_ >= src_.size() || src_[pos_] != '>') {
          throw Error(Errc::UnbalancedTag, "malformed closing tag </" + name, line);
        }
        advance(1);
        if (stack.size() == 1 || stack.back()->tag != name) {
          std::string expected = stack.size() == 1 ? "no open element" : "</" + stack.back()->tag + ">";
          throw Error(Errc::UnbalancedTag, "unexpected </" + name + ">, expected " + expected, line);
        }
        stack.pop_back();
        continue;
      }

      // start tag
      int line = line_;
      advance(1);
      Entity e;
      e.line = line;
      e.tag = read_name();
      if (e.tag.empty()) throw Error(Errc::UnbalancedTag, "expected tag name after '<'", line);
      bool self_closing = read_attributes(e);
      if (e.id) {
        if (std::find(ids.begin(), ids.end(), *e.id) != ids.end()) {
          throw Error(Errc::DuplicateId, *e.id, line);
        }
        ids.push_back(*e.id);
      }
      Entity& parent = *stack.back();
      parent.children.push_back(std::move(e));
      Entity& added = parent.children.back();
      if (self_closing || contains(kVoidTags, added.tag)) continue;
      if (contains(kRawTextTags, added.tag)) {
        std::string close = "</" + added.tag;
        std::size_t end = src_.find(close, pos_);
        if (end == std::string_view::npos) throw Error(Errc::UnbalancedTag, "unclosed <" + added.tag + ">", line);
        add_raw_text(added, std::string(src_.substr(pos_, end - pos_)), line_);
        advance_to(end + close.size());
        skip_space();
        if (pos_ >= src_.size() || src_[pos_] != '>') throw Error(Errc::UnbalancedTag, "malformed " + close, line_);
        advance(1);
        continue;
      }
      stack.push_back(&added);
    }
    if (stack.size() > 1) {
      throw Error(Errc::UnbalancedTag, "unclosed <" + stack.back()->tag + ">", stack.back()->line);
    }
    return doc;
  }

 private:
  bool starts_with(std::string_view s) const { return src_.substr(pos_, s.size()) == s; }

  void advance(std::size_t n) { advance_to(pos_ + n); }

  void advance_to(std::size_t target) {
    target = std::min(target, src_.size());
    for (; pos_ < target; ++pos_) {
      if (src_[pos_] == '\n') ++line_;
    }
  }

  void skip_space() {
    while (pos_ < src_.size() && is_space(src_[pos_])) advance(1);
  }

  std::string read_name() {
    std::size_t start = pos_;
    while (pos_ < src_.size() && is_name_char(src_[pos_])) ++pos_;
    return std::string(src_.substr(start, pos_ - start));
  }

  // Returns true for `/>`.
  bool read_attributes(Entity& e) {
    std::vector<std::string> seen;
    while (true) {
      skip_space();
      if (pos_ >= src_.size()) throw Error(Errc::MalformedAttribute, "unterminated <" + e.tag, e.line);
      char c = src_[pos_];
      if (c == '>') {
        advance(1);
        return false;
      }
      if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
        advance(2);
        return true;
      }
      int line = line_;
      std::size_t start = pos_;
      while (pos_ < src_.size() && is_attr_name_char(src_[pos_])) ++pos_;
      std::string name(src_.substr(start, pos_ - start));
      if (name.empty()) {
        throw Error(Errc::MalformedAttribute, std::string("unexpected '") + c + "' in <" + e.tag + ">", line);
      }
      std::string value;
      skip_space();
      if (pos_ < src_.size() && src_[pos_] == '=') {
        advance(1);
        skip_space();
        if (pos_ >= src_.size()) throw Error(Errc::MalformedAttribute, "missing value for " + name, line);
        char q = src_[pos_];
        if (q == '"' || q == '\'') {
          std::size_t end = src_.find(q, pos_ + 1);
          if (end == std::string_view::npos) {
            throw Error(Errc::MalformedAttribute, "unterminated value for " + name, line);
          }
          std::string_view body = src_.substr(pos_ + 1, end - pos_ - 1);
          if (body.find('<') != std::string_view::npos && body.find('\n') != std::string_view::npos &&
              body.find('>') != std::string_view::npos) {
            // a quote left open swallowed markup
            throw Error(Errc::MalformedAttribute, "unterminated value for " + name, line);
          }
          value = decode_entities(body);
          advance_to(end + 1);
        } else {
          std::size_t vstart = pos_;
          while (pos_ < src_.size() && !is_space(src_[pos_]) && src_[pos_] != '>' && src_[pos_] != '<' &&
                 src_[pos_] != '"' && src_[pos_] != '\'' && src_[pos_] != '`') {
            ++pos_;
          }
          if (pos_ == vstart) throw Error(Errc::MalformedAttribute, "missing value for " + name, line);
          value = decode_entities(src_.substr(vstart, pos_ - vstart));
        }
      }
      if (std::find(seen.begin(), seen.end(), name) != seen.end()) {
        throw Error(Errc::MalformedAttribute, "duplicate attribute " + name, line);
      }
      seen.push_back(name);

      if (name == "id") {
        if (value.empty()) throw Error(Errc::MalformedAttribute, "empty id", line);
        e.id = value;
      } else if (name == "class") {
        std::size_t i = 0;
        while (i < value.size()) {
          while (i < value.size() && is_space(value[i])) ++i;
          std::size_t s = i;
          while (i < value.size() && !is_space(value[i])) ++i;
          if (i > s) e.classes.insert(value.substr(s, i - s));
        }
      } else {
        ComponentMap map;
        try {
          map = parse_component_map(value);
        } catch (const Error& err) {
          throw Error(Errc::MalformedAttribute, name + ": " + err.what(), line);
        }
        e.components.push_back({name, value, std::move(map)});
      }
    }
  }

  static void add_text(Entity& parent, std::string_view raw, int line) {
    std::string text = collapse_whitespace(decode_entities(raw));
    if (text.empty() || text == " ") return;
    Entity t;
    t.tag = "#text";
    t.text = std::move(text);
    t.line = line;
    parent.children.push_back(std::move(t));
  }

  static void add_raw_text(Entity& parent, std::string text, int line) {
    if (std::all_of(text.begin(), text.end(), is_space)) return;
    Entity t;
    t.tag = "#text";
    t.text = collapse_whitespace(text);
    t.line = line;
    parent.children.push_back(std::move(t));
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

std::string escape_text(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string escape_attr(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void serialize_entity(const Entity& e, std::string& out, int depth) {
  if (e.is_text()) {
    out += escape_text(e.text.value_or(""));
    return;
  }
  const bool has_text = std::any_of(e.children.begin(), e.children.end(), [](const Entity& c) { return c.is_text(); });
  out += '<';
  out += e.tag;
  if (e.id) out += " id=\"" + escape_attr(*e.id) + "\"";
  if (!e.classes.empty()) {
    out += " class=\"";
    bool first = true;
    for (const auto& c : e.classes) {
      if (!first) out += ' ';
      out += escape_attr(c);
      first = false;
    }
    out += '"';
  }
  for (const auto& c : e.components) out += " " + c.name + "=\"" + escape_attr(c.raw) + "\"";
  out += '>';
  for (const auto& child : e.children) {
    if (!has_text) {
      out += '\n';
      out.append(static_cast<std::size_t>(depth + 1) * 2, ' ');
    }
    serialize_entity(child, out, depth + 1);
  }
  if (!has_text && !e.children.empty()) {
    out += '\n';
    out.append(static_cast<std::size_t>(depth) * 2, ' ');
  }
  out += "</" + e.tag + ">";
}

void collect_text(const Entity& e, std::string& out) {
  if (e.is_text()) {
    out += e.text.value_or("");
    return;
  }
  for (const auto& c : e.children) collect_text(c, out);
}

}  // namespace

bool Entity::has_class(std::string_view name) const {
  return classes.find(std::string(name)) != classes.end();
}

const Component* Entity::component(std::string_view name) const {
  for (const auto& c : components) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

bool Entity::matches(const Selector& sel) const {
  switch (sel.kind) {
    case Selector::Kind::Id: return id && *id == sel.name;
    case Selector::Kind::Class: return has_class(sel.name);
    case Selector::Kind::Tag: return tag == sel.name;
  }
  return false;
}

std::string Entity::text_content() const {
  std::string out;
  collect_text(*this, out);
  return out;
}

std::string Entity::locator() const { return id ? *id : "@" + std::to_string(index); }

bool same_tree(const Entity& a, const Entity& b) {
  if (a.tag != b.tag || a.id != b.id || a.classes != b.classes || a.text != b.text ||
      a.components.size() != b.components.size() || a.children.size() != b.children.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.components.size(); ++i) {
    const auto& ca = a.components[i];
    const auto& cb = b.components[i];
    if (ca.name != cb.name || ca.raw != cb.raw || !(ca.map == cb.map)) return false;
  }
  for (std::size_t i = 0; i < a.children.size(); ++i) {
    if (!same_tree(a.children[i], b.children[i])) return false;
  }
  return true;
}

SceneDocument::SceneDocument(Entity root) {
  std::size_t next = 0;
  std::function<void(Entity&)> number = [&](Entity& e) {
    e.index = next++;
    for (auto& c : e.children) number(c);
  };
  number(root);
  root_ = std::make_shared<const Entity>(std::move(root));

  order_.resize(next, nullptr);
  parents_.resize(next, nullptr);
  std::function<void(const Entity&, const Entity*)> index = [&](const Entity& e, const Entity* parent) {
    order_[e.index] = &e;
    parents_[e.index] = parent;
    if (e.id) by_id_.emplace(*e.id, &e);
    for (const auto& c : e.children) index(c, &e);
  };
  index(*root_, nullptr);
}

const Entity* SceneDocument::find_by_id(std::string_view id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : it->second;
}

const Entity* SceneDocument::parent_of(const Entity& e) const {
  return e.index < parents_.size() && order_[e.index] == &e ? parents_[e.index] : nullptr;
}

const Entity* SceneDocument::by_index(std::size_t index) const {
  return index < order_.size() ? order_[index] : nullptr;
}

const Entity* SceneDocument::find_by_locator(std::string_view locator) const {
  if (!locator.empty() && locator.front() == '@') {
    try {
      return by_index(std::stoul(std::string(locator.substr(1))));
    } catch (const std::exception&) {
      return nullptr;
    }
  }
  return find_by_id(locator);
}

SceneDocument parse_scene(std::string_view source) { return SceneDocument(Parser(source).parse()); }

std::string serialize_scene(const SceneDocument& doc) {
  std::string out;
  for (const auto& child : doc.root().children) {
    serialize_entity(child, out, 0);
    out += '\n';
  }
  return out;
}

std::vector<const Entity*> query_select(const SceneDocument& doc, const Selector& sel) {
  std::vector<const Entity*> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const Entity* e = doc.by_index(i);
    if (e->matches(sel)) out.push_back(e);
  }
  return out;
}

const Entity* query_select_first(const SceneDocument& doc, const Selector& sel) {
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const Entity* e = doc.by_index(i);
    if (e->matches(sel)) return e;
  }
  return nullptr;
}

}  // namespace escroom
