#include <fstream>
#include <sstream>

#include <catch_amalgamated.hpp>

#include "morae/dom.hpp"
#include "support/dom_gen.hpp"

using namespace morae;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RawDomNode target_search() { return parse_snapshot(read_file(std::string(MORAE_DATA_DIR) + "/fixtures/target_search.json")); }

RawDomNode leaf(std::string tag, std::vector<std::pair<std::string, std::string>> attrs = {},
                std::optional<std::string> text = std::nullopt, bool visible = true) {
  RawDomNode n;
  n.tag = std::move(tag);
  n.attributes = std::move(attrs);
  n.text = std::move(text);
  n.visible = visible;
  return n;
}

}  // namespace

TEST_CASE("minimal snapshot parses to a childless root", "[dom][parse]") {
  auto root = parse_snapshot(R"({"tag":"body","visible":true,"children":[]})");
  CHECK(root.tag == "body");
  CHECK(root.visible);
  CHECK(root.children.empty());
}

TEST_CASE("bundled search fixture has 214 raw nodes", "[dom][parse]") {
  // Frozen from tests/oracles/dom_oracle.py (independent recursive walk).
  CHECK(node_count(target_search()) == 214);
}

TEST_CASE("schema violations name the offending path", "[dom][parse]") {
  SECTION("missing tag") {
    try {
      parse_snapshot(R"({"tag":"body","visible":true,"children":[{"visible":true}]})");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.path() == "$.children[0].tag");
    }
  }
  SECTION("attribute value of the wrong type") {
    try {
      parse_snapshot(R"({"tag":"body","visible":true,"attributes":{"x":1}})");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.path() == "$.attributes.x");
    }
  }
  SECTION("negative bounds") {
    CHECK_THROWS_AS(
        parse_snapshot(R"({"tag":"div","visible":true,"bounds":{"x":0,"y":0,"w":-1,"h":2}})"), ParseError);
  }
  SECTION("not JSON at all") { CHECK_THROWS_AS(parse_snapshot("{"), ParseError); }
}

TEST_CASE("repeated node ids are structure errors", "[dom][parse]") {
  CHECK_THROWS_AS(parse_snapshot(R"({"tag":"body","nodeId":1,"visible":true,
      "children":[{"tag":"div","nodeId":2,"visible":true,"children":[{"tag":"body","nodeId":1,"visible":true}]}]})"),
                  StructureError);
  CHECK_THROWS_AS(parse_snapshot(R"({"tag":"body","visible":true,
      "children":[{"tag":"a","nodeId":"x","visible":true},{"tag":"a","nodeId":"x","visible":true}]})"),
                  StructureError);
}

TEST_CASE("attribute order survives parsing and serialization", "[dom][parse]") {
  auto root = parse_snapshot(R"({"tag":"input","visible":true,"attributes":{"z":"1","a":"2","m":"3"}})");
  REQUIRE(root.attributes.size() == 3);
  CHECK(root.attributes[0].first == "z");
  CHECK(root.attributes[1].first == "a");
  CHECK(root.attributes[2].first == "m");
  CHECK(parse_snapshot(to_json(root).dump()) == root);
}

TEST_CASE("a body of invisible children simplifies to nothing", "[dom][simplify]") {
  RawDomNode body = leaf("body");
  body.children.push_back(leaf("button", {{"aria-label", "Buy"}}, "Buy", false));
  body.children.push_back(leaf("div", {}, "hello", false));
  auto d = simplify(body);
  CHECK(d.elements.empty());
  CHECK(d.prunedCount == 3);
}

TEST_CASE("labelled button is retained as element 0", "[dom][simplify]") {
  RawDomNode body = leaf("body");
  body.children.push_back(leaf("button", {{"aria-label", "Add to cart"}}));
  auto d = simplify(body);
  REQUIRE(d.elements.size() == 1);
  CHECK(d.elements[0].id == 0);
  CHECK(d.elements[0].tag == "button");
  CHECK(d.elements[0].ariaLabel == "Add to cart");
  CHECK(serialize_prompt_view(d, 1000) == R"([0] button label="Add to cart")");
}

TEST_CASE("search fixture keeps the 17 interactive elements", "[dom][simplify]") {
  auto root = target_search();
  auto d = simplify(root);
  // Count and paths frozen from tests/oracles/dom_oracle.py.
  REQUIRE(d.elements.size() == 17);
  CHECK(d.elements[0].sourcePath == std::vector<std::size_t>{1, 0});
  CHECK(d.elements[7].tag == "select");
  CHECK(d.elements[7].sourcePath == std::vector<std::size_t>{3, 2, 1});
  CHECK(d.elements[16].sourcePath == std::vector<std::size_t>{3, 3, 2, 2});

  CHECK(d.elements[11].text == "LaCroix Lime Sparkling Water 8pk");
  CHECK(d.elements[12].ariaLabel == "Add LaCroix Lime Sparkling Water 8pk to cart");
  CHECK(d.elements[12].text == "Add to cart");
  CHECK(d.elements[2].value == "sparkling water");
  CHECK(d.sourceDigest == content_digest(root));
  CHECK(d.prunedCount + d.elements.size() == node_count(root));
}

TEST_CASE("single-child merge passes text into the child", "[dom][simplify]") {
  RawDomNode wrapper = leaf("div", {}, "Quantity");
  wrapper.children.push_back(leaf("input", {{"name", "qty"}}));
  RawDomNode body = leaf("body");
  body.children.push_back(wrapper);
  body.children.push_back(leaf("a", {}, "Help"));
  auto d = simplify(body);
  REQUIRE(d.elements.size() == 2);
  CHECK(d.elements[0].text == "Quantity");
  CHECK(d.elements[1].text == "Help");
}

TEST_CASE("interactive parents do not merge into children", "[dom][simplify]") {
  RawDomNode parent = leaf("div", {{"role", "group"}}, "Shipping");
  parent.children.push_back(leaf("button", {{"aria-label", "Standard"}}));
  RawDomNode body = leaf("body");
  body.children.push_back(parent);
  auto d = simplify(body);
  REQUIRE(d.elements.size() == 2);
  CHECK(d.elements[0].text == "Shipping");
  CHECK_FALSE(d.elements[1].text.has_value());
}

TEST_CASE("redundant and whitespace text is dropped", "[dom][simplify]") {
  RawDomNode card = leaf("div", {}, "Lime");
  card.children.push_back(leaf("span", {}, "Sale", false));
  RawDomNode link = leaf("a", {}, "Lime");
  card.children.push_back(link);
  RawDomNode body = leaf("body", {}, "\n ");
  body.children.push_back(card);
  auto d = simplify(body);
  REQUIRE(d.elements.size() == 1);
  CHECK(d.elements[0].text == "Lime");
}

TEST_CASE("unlabelled empty controls are removed", "[dom][simplify]") {
  RawDomNode body = leaf("body");
  body.children.push_back(leaf("input"));
  body.children.push_back(leaf("button", {{"role", "  "}}));
  CHECK(simplify(body).elements.empty());
}

TEST_CASE("prompt view respects its budget", "[dom][serialize]") {
  auto d = simplify(target_search());
  SECTION("empty list renders as empty string") { CHECK(serialize_prompt_view(SimplifiedDom{}, 64).empty()); }
  SECTION("budget below the minimum is a configuration error") {
    CHECK_THROWS_AS(serialize_prompt_view(d, 63), ConfigError);
  }
  SECTION("17 elements under 300 characters") {
    auto view = serialize_prompt_view(d, 300);
    CHECK(text::utf8_length(view) <= 300);
    auto marker = view.substr(view.rfind('\n') + 1);
    CHECK(marker.rfind("…(+", 0) == 0);
    CHECK(marker.ends_with(" elided)"));
    // Kept lines are a prefix of the full rendering.
    auto full = serialize_prompt_view(d, 100000);
    auto kept = view.substr(0, view.rfind('\n'));
    CHECK(full.rfind(kept, 0) == 0);
    const auto keptLines = static_cast<std::size_t>(std::count(kept.begin(), kept.end(), '\n') + 1);
    CHECK(marker == "…(+" + std::to_string(17 - keptLines) + " elided)");
  }
  SECTION("every budget yields output within the budget") {
    for (std::size_t b = 64; b < 1500; b += 7) CHECK(text::utf8_length(serialize_prompt_view(d, b)) <= b);
  }
}

TEST_CASE("distillation properties on generated trees", "[dom][property]") {
  for (std::uint32_t seed = 1; seed <= 200; ++seed) {
    testing::DomGenerator gen(seed);
    auto tree = gen.tree();
    auto d = simplify(tree);
    INFO("seed " << seed);
    for (std::size_t i = 0; i < d.elements.size(); ++i) {
      CHECK(d.elements[i].id == static_cast<int>(i));
      CHECK(testing::path_fully_visible(tree, d.elements[i].sourcePath));
    }
    CHECK(testing::element_keys(simplify(testing::flatten(d))) == testing::element_keys(d));
  }
}
