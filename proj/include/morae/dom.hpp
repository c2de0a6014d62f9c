#pragma once

// Snapshot parsing and DOM distillation.
//
// A capture driver hands us the page as a tree of RawDomNode (tag, ordered
// attributes, own text, a precomputed visibility flag). `simplify` reduces it
// to the flat list of interactive elements the model actually reasons over,
// and `serialize_prompt_view` renders that list under a character budget.
//
// Retention rules:
//   * an invisible node removes its whole subtree;
//   * a visible node is interactive iff it carries a non-empty role,
//     aria-label or name attribute, or its tag is a native control
//     (button, a, input, select, textarea, option);
//   * interactive nodes with no role, label, name or text are dropped as empty;
//   * a non-interactive node with exactly one visible child is merged into
//     that child, which inherits its text;
//   * text equal to an ancestor's text (or to their concatenation) is
//     redundant and ignored.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"

#include "morae/errors.hpp"
#include "morae/text.hpp"

namespace morae {

using Json = nlohmann::ordered_json;

struct Bounds {
  double x = 0, y = 0, width = 0, height = 0;
  bool operator==(const Bounds&) const = default;
};

struct RawDomNode {
  std::string tag;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::optional<std::string> text;
  bool visible = true;
  std::optional<Bounds> bounds;
  std::vector<RawDomNode> children;

  const std::string* attribute(std::string_view name) const {
    for (const auto& [k, v] : attributes)
      if (k == name) return &v;
    return nullptr;
  }

  bool operator==(const RawDomNode&) const = default;
};

struct InteractiveElement {
  int id = 0;
  std::string tag;
  std::optional<std::string> role;
  std::optional<std::string> ariaLabel;
  std::optional<std::string> name;
  std::optional<std::string> text;
  // Current value of form controls, when the capture recorded one.
  std::optional<std::string> value;
  std::vector<std::size_t> sourcePath;

  // aria-label wins over name; used wherever a single human label is needed.
  std::string label() const {
    if (ariaLabel && !ariaLabel->empty()) return *ariaLabel;
    if (name && !name->empty()) return *name;
    return {};
  }
  std::string display_name() const {
    auto l = label();
    if (!l.empty()) return l;
    return text.value_or("");
  }

  bool operator==(const InteractiveElement&) const = default;
};

struct SimplifiedDom {
  std::vector<InteractiveElement> elements;
  std::string sourceDigest;
  std::size_t prunedCount = 0;

  const InteractiveElement* find(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= elements.size()) return nullptr;
    return &elements[static_cast<std::size_t>(id)];
  }
};

namespace dom_detail {

inline constexpr std::size_t kMaxDepth = 512;

inline std::string key_path(const std::string& base, std::string_view key) {
  return base + "." + std::string(key);
}

inline std::string node_id_of(const Json& j) {
  const auto it = j.find("nodeId");
  if (it == j.end()) return {};
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  return {};
}

inline RawDomNode parse_node(const Json& j, const std::string& path,
                             std::vector<std::string>& ancestors,
                             std::unordered_set<std::string>& seen) {
  if (ancestors.size() > kMaxDepth)
    throw StructureError("snapshot nesting exceeds " + std::to_string(kMaxDepth) +
                         " levels at " + path);
  if (!j.is_object()) throw ParseError(path, "expected object");

  RawDomNode node;

  auto tag = j.find("tag");
  if (tag == j.end()) throw ParseError(key_path(path, "tag"), "missing required field");
  if (!tag->is_string()) throw ParseError(key_path(path, "tag"), "expected string");
  node.tag = tag->get<std::string>();

  if (auto a = j.find("attributes"); a != j.end() && !a->is_null()) {
    if (!a->is_object()) throw ParseError(key_path(path, "attributes"), "expected object");
    for (auto it = a->begin(); it != a->end(); ++it) {
      if (!it.value().is_string())
        throw ParseError(key_path(path, "attributes") + "." + it.key(), "expected string");
      node.attributes.emplace_back(it.key(), it.value().get<std::string>());
    }
  }

  if (auto t = j.find("text"); t != j.end() && !t->is_null()) {
    if (!t->is_string()) throw ParseError(key_path(path, "text"), "expected string");
    node.text = t->get<std::string>();
  }

  auto vis = j.find("visible");
  if (vis == j.end()) throw ParseError(key_path(path, "visible"), "missing required field");
  if (!vis->is_boolean()) throw ParseError(key_path(path, "visible"), "expected bool");
  node.visible = vis->get<bool>();

  if (auto b = j.find("bounds"); b != j.end() && !b->is_null()) {
    const auto bpath = key_path(path, "bounds");
    if (!b->is_object()) throw ParseError(bpath, "expected object");
    auto num = [&](const char* k) {
      auto f = b->find(k);
      if (f == b->end() || !f->is_number()) throw ParseError(key_path(bpath, k), "expected number");
      return f->get<double>();
    };
    Bounds r{num("x"), num("y"), num("w"), num("h")};
    if (r.width < 0) throw ParseError(key_path(bpath, "w"), "negative width");
    if (r.height < 0) throw ParseError(key_path(bpath, "h"), "negative height");
    node.bounds = r;
  }

  const auto id = node_id_of(j);
  if (!id.empty()) {
    for (const auto& a : ancestors)
      if (a == id) throw StructureError("cyclic reference to node " + id + " at " + path);
    if (!seen.insert(id).second)
      throw StructureError("node " + id + " appears twice (shared reference) at " + path);
    ancestors.push_back(id);
  } else {
    ancestors.emplace_back();
  }

  if (auto c = j.find("children"); c != j.end() && !c->is_null()) {
    const auto cpath = key_path(path, "children");
    if (!c->is_array()) throw ParseError(cpath, "expected array");
    node.children.reserve(c->size());
    for (std::size_t i = 0; i < c->size(); ++i)
      node.children.push_back(
          parse_node((*c)[i], cpath + "[" + std::to_string(i) + "]", ancestors, seen));
  }
  ancestors.pop_back();
  return node;
}

}  // namespace dom_detail

inline RawDomNode parse_snapshot_json(const Json& payload) {
  std::vector<std::string> ancestors;
  std::unordered_set<std::string> seen;
  return dom_detail::parse_node(payload, "$", ancestors, seen);
}

inline RawDomNode parse_snapshot(std::string_view payload) {
  Json j;
  try {
    j = Json::parse(payload);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("$", e.what());
  }
  return parse_snapshot_json(j);
}

inline Json to_json(const RawDomNode& n) {
  Json j;
  j["tag"] = n.tag;
  Json attrs = Json::object();
  for (const auto& [k, v] : n.attributes) attrs[k] = v;
  j["attributes"] = std::move(attrs);
  if (n.text) j["text"] = *n.text;
  j["visible"] = n.visible;
  if (n.bounds)
    j["bounds"] = {{"x", n.bounds->x}, {"y", n.bounds->y}, {"w", n.bounds->width}, {"h", n.bounds->height}};
  Json kids = Json::array();
  for (const auto& c : n.children) kids.push_back(to_json(c));
  j["children"] = std::move(kids);
  return j;
}

inline std::size_t node_count(const RawDomNode& n) {
  std::size_t total = 1;
  for (const auto& c : n.children) total += node_count(c);
  return total;
}

inline const RawDomNode* resolve_path(const RawDomNode& root, const std::vector<std::size_t>& path) {
  const RawDomNode* cur = &root;
  for (auto i : path) {
    if (i >= cur->children.size()) return nullptr;
    cur = &cur->children[i];
  }
  return cur;
}

inline std::string content_digest(const RawDomNode& root) {
  return text::hex64(text::fnv1a(to_json(root).dump()));
}

inline bool is_native_control(std::string_view tag) {
  const auto t = text::lower(tag);
  return t == "button" || t == "a" || t == "input" || t == "select" || t == "textarea" ||
         t == "option";
}

namespace dom_detail {

inline std::optional<std::string> nonempty_attr(const RawDomNode& n, std::string_view name) {
  if (const auto* v = n.attribute(name)) {
    auto t = text::normalize_ws(*v);
    if (!t.empty()) return t;
  }
  return std::nullopt;
}

inline bool is_interactive(const RawDomNode& n) {
  return nonempty_attr(n, "role") || nonempty_attr(n, "aria-label") || nonempty_attr(n, "name") ||
         is_native_control(n.tag);
}

inline std::size_t visible_child_count(const RawDomNode& n) {
  std::size_t k = 0;
  for (const auto& c : n.children) k += c.visible ? 1 : 0;
  return k;
}

// Appends `piece` unless it is empty or already the tail of `acc`.
inline void append_text(std::string& acc, const std::string& piece) {
  if (piece.empty()) return;
  if (!acc.empty()) {
    if (acc == piece) return;
    if (acc.size() > piece.size() && acc.compare(acc.size() - piece.size(), piece.size(), piece) == 0 &&
        acc[acc.size() - piece.size() - 1] == ' ')
      return;
    acc.push_back(' ');
  }
  acc += piece;
}

class Distiller {
 public:
  SimplifiedDom run(const RawDomNode& root) {
    out_.sourceDigest = content_digest(root);
    std::vector<std::size_t> path;
    std::vector<std::string> ancestors;
    visit(root, path, ancestors, "", false);
    return std::move(out_);
  }

 private:
  static bool redundant(const std::string& own, const std::vector<std::string>& ancestors) {
    if (own.empty()) return true;
    std::string accumulated;
    for (const auto& a : ancestors) {
      if (a == own) return true;
      append_text(accumulated, a);
    }
    return !accumulated.empty() && accumulated == own;
  }

  // Text of visible non-interactive descendants, stopping at nested controls.
  static void collect_text(const RawDomNode& n, std::vector<std::string>& ancestors, std::string& acc) {
    for (const auto& c : n.children) {
      if (!c.visible || is_interactive(c)) continue;
      auto own = text::normalize_ws(c.text.value_or(""));
      if (!redundant(own, ancestors)) append_text(acc, own);
      ancestors.push_back(own);
      collect_text(c, ancestors, acc);
      ancestors.pop_back();
    }
  }

  void visit(const RawDomNode& n, std::vector<std::size_t>& path, std::vector<std::string>& ancestors,
             const std::string& inherited, bool insideControl) {
    if (!n.visible) {
      out_.prunedCount += node_count(n);
      return;
    }
    auto own = text::normalize_ws(n.text.value_or(""));
    if (redundant(own, ancestors)) own.clear();

    const bool interactive = is_interactive(n);
    std::string passDown;

    if (interactive) {
      std::string txt = inherited;
      append_text(txt, own);
      ancestors.push_back(own);
      collect_text(n, ancestors, txt);
      ancestors.pop_back();

      InteractiveElement e;
      e.tag = text::lower(n.tag);
      e.role = nonempty_attr(n, "role");
      e.ariaLabel = nonempty_attr(n, "aria-label");
      e.name = nonempty_attr(n, "name");
      if (!txt.empty()) e.text = txt;
      if (const auto* v = n.attribute("value")) e.value = *v;
      e.sourcePath = path;
      if (e.role || e.ariaLabel || e.name || e.text) {
        e.id = static_cast<int>(out_.elements.size());
        out_.elements.push_back(std::move(e));
      } else {
        ++out_.prunedCount;
      }
    } else {
      ++out_.prunedCount;
      // Single-child merge: the only visible child absorbs this node's text.
      if (!insideControl && visible_child_count(n) == 1) {
        passDown = inherited;
        append_text(passDown, own);
      }
    }

    ancestors.push_back(own);
    const bool childInside = insideControl || interactive;
    for (std::size_t i = 0; i < n.children.size(); ++i) {
      path.push_back(i);
      visit(n.children[i], path, ancestors, interactive ? std::string{} : passDown, childInside);
      path.pop_back();
    }
    ancestors.pop_back();
  }

  SimplifiedDom out_;
};

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace dom_detail

inline SimplifiedDom simplify(const RawDomNode& root) { return dom_detail::Distiller{}.run(root); }

inline std::string render_element_line(const InteractiveElement& e) {
  using dom_detail::quote;
  std::string line = "[" + std::to_string(e.id) + "] " + e.tag;
  if (e.role) line += " role=" + quote(*e.role);
  if (auto l = e.label(); !l.empty()) line += " label=" + quote(l);
  if (e.text) line += " text=" + quote(*e.text);
  if (e.value && !e.value->empty()) line += " value=" + quote(*e.value);
  return line;
}

inline constexpr std::size_t kMinPromptBudget = 64;

// Renders one line per element; drops trailing elements behind an
// `…(+N elided)` marker when the budget (in code points) would be exceeded.
inline std::string serialize_prompt_view(const SimplifiedDom& dom, std::size_t budget) {
  if (budget < kMinPromptBudget)
    throw ConfigError("prompt budget must be at least " + std::to_string(kMinPromptBudget) +
                      " characters, got " + std::to_string(budget));
  const auto n = dom.elements.size();
  std::vector<std::string> lines;
  lines.reserve(n);
  std::size_t total = 0;
  for (const auto& e : dom.elements) {
    lines.push_back(render_element_line(e));
    total += text::utf8_length(lines.back()) + (lines.size() > 1 ? 1 : 0);
  }
  if (total <= budget) return text::join(lines, "\n");

  auto marker = [](std::size_t elided) { return "…(+" + std::to_string(elided) + " elided)"; };
  std::size_t used = 0;
  std::size_t keep = 0;
  for (; keep < n; ++keep) {
    const auto add = text::utf8_length(lines[keep]) + (keep ? 1 : 0);
    const auto tail = 1 + text::utf8_length(marker(n - keep - 1));
    if (used + add + tail > budget) break;
    used += add;
  }
  std::string out;
  for (std::size_t i = 0; i < keep; ++i) {
    out += lines[i];
    out += '\n';
  }
  out += marker(n - keep);
  return out;
}

inline Json to_json(const InteractiveElement& e) {
  Json j;
  j["id"] = e.id;
  j["tag"] = e.tag;
  if (e.role) j["role"] = *e.role;
  if (e.ariaLabel) j["ariaLabel"] = *e.ariaLabel;
  if (e.name) j["name"] = *e.name;
  if (e.text) j["text"] = *e.text;
  if (e.value) j["value"] = *e.value;
  j["sourcePath"] = e.sourcePath;
  return j;
}

inline Json to_json(const SimplifiedDom& d) {
  Json els = Json::array();
  for (const auto& e : d.elements) els.push_back(to_json(e));
  return {{"elements", std::move(els)}, {"sourceDigest", d.sourceDigest}, {"prunedCount", d.prunedCount}};
}

inline SimplifiedDom simplified_from_json(const Json& j) {
  SimplifiedDom d;
  auto opt = [](const Json& o, const char* k) -> std::optional<std::string> {
    if (auto it = o.find(k); it != o.end() && it->is_string()) return it->get<std::string>();
    return std::nullopt;
  };
  for (const auto& e : j.at("elements")) {
    InteractiveElement el;
    el.id = e.at("id").get<int>();
    el.tag = e.at("tag").get<std::string>();
    el.role = opt(e, "role");
    el.ariaLabel = opt(e, "ariaLabel");
    el.name = opt(e, "name");
    el.text = opt(e, "text");
    el.value = opt(e, "value");
    el.sourcePath = e.value("sourcePath", std::vector<std::size_t>{});
    d.elements.push_back(std::move(el));
  }
  d.sourceDigest = j.value("sourceDigest", "");
  d.prunedCount = j.value("prunedCount", std::size_t{0});
  return d;
}

}  // namespace morae
