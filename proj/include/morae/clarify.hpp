#pragma once

// Clarification forms: what the user sees when the agent stops to ask.
//
// The model proposes the fields; this module turns that proposal into a form
// that is safe to render for a screen reader (unique keys, labels, header
// levels, distinct option values), checks responses against it and merges
// accepted answers into the step context.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <random>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "morae/context.hpp"
#include "morae/decision.hpp"
#include "morae/errors.hpp"
#include "morae/gateway.hpp"
#include "morae/prompts.hpp"
#include "morae/text.hpp"

namespace morae {

enum class FieldKind { Radio, Dropdown, Text, Number, Date };

inline std::string_view to_string(FieldKind k) {
  switch (k) {
    case FieldKind::Radio: return "radio";
    case FieldKind::Dropdown: return "dropdown";
    case FieldKind::Text: return "text";
    case FieldKind::Number: return "number";
    case FieldKind::Date: return "date";
  }
  return "?";
}

inline std::optional<FieldKind> field_kind_from(std::string_view s) {
  const auto k = text::lower(text::trim(s));
  if (k == "radio") return FieldKind::Radio;
  if (k == "dropdown" || k == "select") return FieldKind::Dropdown;
  if (k == "text") return FieldKind::Text;
  if (k == "number") return FieldKind::Number;
  if (k == "date") return FieldKind::Date;
  return std::nullopt;
}

inline bool has_options(FieldKind k) { return k == FieldKind::Radio || k == FieldKind::Dropdown; }

// Radio groups longer than this become dropdowns.
inline constexpr std::size_t kMaxRadioOptions = 7;

struct FormOption {
  std::string value;
  std::string label;
  std::string detail;
  bool operator==(const FormOption&) const = default;
};

struct FormField {
  std::string key;
  std::string label;
  int headerLevel = 2;
  FieldKind kind = FieldKind::Text;
  std::vector<FormOption> options;
  bool required = true;
  std::optional<std::string> defaultValue;
  bool operator==(const FormField&) const = default;
};

struct DefaultDisclosure {
  std::string fieldKey;
  std::string defaultValue;
  std::string explanation;
  bool operator==(const DefaultDisclosure&) const = default;
};

struct ClarificationForm {
  std::string formId;
  std::string title;
  std::vector<FormField> fields;
  std::vector<DefaultDisclosure> defaultsDisclosure;
  bool operator==(const ClarificationForm&) const = default;

  const FormField* field(std::string_view key) const {
    for (const auto& f : fields)
      if (f.key == key) return &f;
    return nullptr;
  }
};

// Throws StructureError when a form breaks the rendering invariants.
inline void check_form(const ClarificationForm& form) {
  if (form.formId.empty()) throw StructureError("form has no id");
  std::set<std::string> keys;
  for (const auto& f : form.fields) {
    if (f.key.empty()) throw StructureError("form field without a key");
    if (!keys.insert(f.key).second) throw StructureError("duplicate field key '" + f.key + "'");
    if (text::trim(f.label).empty()) throw StructureError("field '" + f.key + "' has no label");
    if (f.headerLevel < 2 || f.headerLevel > 4) throw StructureError("field '" + f.key + "' header level out of 2..4");
    if (has_options(f.kind)) {
      if (f.options.empty()) throw StructureError("choice field '" + f.key + "' has no options");
      std::set<std::string> values;
      for (const auto& o : f.options) {
        if (!values.insert(o.value).second)
          throw StructureError("field '" + f.key + "' repeats option value '" + o.value + "'");
        if (text::trim(o.label).empty()) throw StructureError("field '" + f.key + "' has an unlabeled option");
      }
    } else if (!f.options.empty()) {
      throw StructureError("field '" + f.key + "' of kind " + std::string(to_string(f.kind)) + " cannot have options");
    }
  }
}

// ---------------------------------------------------------------------------
// JSON schema shared with the operator panel

inline Json to_json(const ClarificationForm& form) {
  Json j;
  j["formId"] = form.formId;
  j["title"] = form.title;
  j["fields"] = Json::array();
  for (const auto& f : form.fields) {
    Json fj;
    fj["key"] = f.key;
    fj["label"] = f.label;
    fj["headerLevel"] = f.headerLevel;
    fj["kind"] = std::string(to_string(f.kind));
    fj["options"] = Json::array();
    for (const auto& o : f.options) fj["options"].push_back({{"value", o.value}, {"label", o.label}, {"detail", o.detail}});
    fj["required"] = f.required;
    fj["default"] = f.defaultValue ? Json(*f.defaultValue) : Json(nullptr);
    j["fields"].push_back(std::move(fj));
  }
  j["defaultsDisclosure"] = Json::array();
  for (const auto& d : form.defaultsDisclosure)
    j["defaultsDisclosure"].push_back(
        {{"fieldKey", d.fieldKey}, {"defaultValue", d.defaultValue}, {"explanation", d.explanation}});
  return j;
}

namespace clarify_detail {

inline std::string str(const Json& j, const char* key, const std::string& path, bool required = true) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    if (required) throw ParseError(path + "." + key, "missing");
    return {};
  }
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number() || it->is_boolean()) return it->dump();
  throw ParseError(path + "." + key, "expected a string");
}

}  // namespace clarify_detail

inline ClarificationForm form_from_json(const Json& j) {
  using clarify_detail::str;
  if (!j.is_object()) throw ParseError("$", "form must be an object");
  ClarificationForm form;
  form.formId = str(j, "formId", "$");
  form.title = str(j, "title", "$", false);
  if (!j.contains("fields") || !j["fields"].is_array()) throw ParseError("$.fields", "expected an array");
  for (std::size_t i = 0; i < j["fields"].size(); ++i) {
    const auto& fj = j["fields"][i];
    const auto path = "$.fields[" + std::to_string(i) + "]";
    if (!fj.is_object()) throw ParseError(path, "expected an object");
    FormField f;
    f.key = str(fj, "key", path);
    f.label = str(fj, "label", path);
    auto kind = field_kind_from(str(fj, "kind", path));
    if (!kind) throw ParseError(path + ".kind", "unknown field kind");
    f.kind = *kind;
    if (auto h = fj.find("headerLevel"); h != fj.end()) {
      if (!h->is_number_integer()) throw ParseError(path + ".headerLevel", "expected an integer");
      f.headerLevel = h->get<int>();
    }
    if (auto r = fj.find("required"); r != fj.end() && r->is_boolean()) f.required = r->get<bool>();
    if (auto d = fj.find("default"); d != fj.end() && !d->is_null()) f.defaultValue = str(fj, "default", path);
    if (auto o = fj.find("options"); o != fj.end() && o->is_array()) {
      for (std::size_t k = 0; k < o->size(); ++k) {
        const auto opath = path + ".options[" + std::to_string(k) + "]";
        f.options.push_back({str((*o)[k], "value", opath), str((*o)[k], "label", opath), str((*o)[k], "detail", opath, false)});
      }
    }
    form.fields.push_back(std::move(f));
  }
  if (auto d = j.find("defaultsDisclosure"); d != j.end() && d->is_array()) {
    for (std::size_t k = 0; k < d->size(); ++k) {
      const auto dpath = "$.defaultsDisclosure[" + std::to_string(k) + "]";
      form.defaultsDisclosure.push_back(
          {str((*d)[k], "fieldKey", dpath), str((*d)[k], "defaultValue", dpath), str((*d)[k], "explanation", dpath, false)});
    }
  }
  try {
    check_form(form);
  } catch (const StructureError& e) {
    throw ParseError("$", e.what());
  }
  return form;
}

// ---------------------------------------------------------------------------
// Defaults the page filled in

namespace clarify_detail {

inline bool input_like(const InteractiveElement& e) {
  return e.tag == "input" || e.tag == "select" || e.tag == "textarea" ||
         (e.role && (*e.role == "textbox" || *e.role == "combobox" || *e.role == "spinbutton" || *e.role == "listbox"));
}

// Lower-case identifier built from a label: "Travel class" -> "travel_class".
inline std::string slug(std::string_view s) {
  std::string out;
  bool gap = false;
  for (unsigned char c : s) {
    if (std::isalnum(c)) {
      if (gap && !out.empty()) out.push_back('_');
      out.push_back(static_cast<char>(std::tolower(c)));
      gap = false;
    } else {
      gap = true;
    }
  }
  return out.empty() ? "field" : out;
}

}  // namespace clarify_detail

inline std::string element_field_key(const InteractiveElement& e) {
  if (e.name && !text::trim(*e.name).empty()) return clarify_detail::slug(*e.name);
  if (e.ariaLabel && !text::trim(*e.ariaLabel).empty()) return clarify_detail::slug(*e.ariaLabel);
  return "element_" + std::to_string(e.id);
}

// Pre-filled inputs the plan is about to touch.
inline std::vector<DefaultDisclosure> disclose_defaults(const SimplifiedDom& observation, const ActionPlan& plan) {
  std::set<int> touched;
  for (const auto* list : {&plan.critical, &plan.nonCritical})
    for (const auto& a : *list)
      if (a.targetId) touched.insert(*a.targetId);
  std::vector<DefaultDisclosure> out;
  for (const auto& e : observation.elements) {
    if (!clarify_detail::input_like(e) || !e.value || text::trim(*e.value).empty() || !touched.count(e.id)) continue;
    const auto name = e.display_name().empty() ? element_field_key(e) : e.display_name();
    out.push_back({element_field_key(e), *e.value,
                   "The page already has \"" + *e.value + "\" for " + name +
                       ". The agent keeps this value unless you choose another one."});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Building a form from the model's proposal

inline std::string new_form_id() {
  static std::atomic<std::uint64_t> counter{0};
  static const std::uint64_t salt = std::random_device{}();
  const auto n = counter.fetch_add(1) + 1;
  return "form-" + text::hex64(text::fnv1a(std::to_string(salt) + ":" + std::to_string(now_ms()) + ":" +
                                           std::to_string(n)))
                       .substr(0, 12) +
         "-" + std::to_string(n);
}

namespace clarify_detail {

// The first JSON object in a model reply (bare, fenced, or inside <Form>).
inline Json extract_object(const std::string& raw) {
  std::string body = gateway_detail::first_block(raw, "Form").value_or(raw);
  const auto open = body.find('{');
  const auto close = body.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open)
    throw ProtocolError("clarification reply has no JSON object", raw);
  try {
    return Json::parse(body.substr(open, close - open + 1));
  } catch (const Json::parse_error& e) {
    throw ProtocolError(std::string("clarification reply is not valid JSON: ") + e.what(), raw);
  }
}

// Plain-text description of an element, leaving out what is already the
// option's own label.
inline std::string option_detail(const InteractiveElement& e, const std::string& shown) {
  std::vector<std::string> parts;
  const auto label = e.label();
  const auto txt = e.text.value_or("");
  if (!label.empty() && label != shown) parts.push_back(label);
  if (!txt.empty() && txt != label && txt != shown) parts.push_back(txt);
  if (e.value && !e.value->empty()) parts.push_back("value: " + *e.value);
  return text::join(parts, "; ");
}

inline std::string unique(std::string base, std::set<std::string>& taken) {
  if (taken.insert(base).second) return base;
  for (int n = 2;; ++n) {
    auto candidate = base + "_" + std::to_string(n);
    if (taken.insert(candidate).second) return candidate;
  }
}

}  // namespace clarify_detail

// Shapes a model-proposed form into a valid one. `ctx` supplies the page
// elements behind `optionElements`.
inline ClarificationForm normalize_form(const Json& proposal, const StepContext& ctx, const std::string& raw = {}) {
  using namespace clarify_detail;
  if (!proposal.is_object()) throw ProtocolError("clarification proposal is not an object", raw);
  ClarificationForm form;
  form.formId = new_form_id();
  form.title = proposal.value("title", std::string("The agent needs your choice"));
  if (text::trim(form.title).empty()) form.title = "The agent needs your choice";
  auto fields = proposal.find("fields");
  if (fields == proposal.end() || !fields->is_array() || fields->empty())
    throw ProtocolError("clarification proposal lists no fields", raw);

  std::set<std::string> keys;
  for (const auto& fj : *fields) {
    if (!fj.is_object()) throw ProtocolError("clarification field is not an object", raw);
    FormField f;
    const auto label = fj.contains("label") && fj["label"].is_string() ? fj["label"].get<std::string>() : "";
    const auto key = fj.contains("key") && fj["key"].is_string() ? fj["key"].get<std::string>() : "";
    f.label = text::normalize_ws(label.empty() ? key : label);
    if (f.label.empty()) throw ProtocolError("clarification field has neither key nor label", raw);
    f.key = unique(slug(key.empty() ? label : key), keys);
    auto kind = field_kind_from(fj.value("kind", std::string("text")));
    if (!kind) throw ProtocolError("unknown field kind in clarification proposal", raw);
    f.kind = *kind;
    f.headerLevel = std::clamp(fj.value("headerLevel", 2), 2, 4);
    f.required = fj.value("required", true);
    if (auto d = fj.find("default"); d != fj.end() && !d->is_null())
      f.defaultValue = d->is_string() ? d->get<std::string>() : d->dump();

    std::set<std::string> values;
    auto add_option = [&](std::string value, std::string optLabel, std::string detail) {
      if (optLabel.empty()) optLabel = value;
      if (value.empty()) value = slug(optLabel);
      f.options.push_back({unique(std::move(value), values), text::normalize_ws(optLabel), std::move(detail)});
    };
    if (auto opts = fj.find("options"); opts != fj.end() && opts->is_array()) {
      for (const auto& o : *opts) {
        if (o.is_string()) {
          add_option(o.get<std::string>(), o.get<std::string>(), "");
        } else if (o.is_object()) {
          add_option(o.value("value", std::string()), o.value("label", std::string()), o.value("detail", std::string()));
        }
      }
    }
    if (auto ids = fj.find("optionElements"); ids != fj.end() && ids->is_array()) {
      // Either bare ids or {"id": n, "detail": "..."} when the model saw
      // distinguishing details outside the element itself.
      for (const auto& ref : *ids) {
        const Json& id = ref.is_object() && ref.contains("id") ? ref["id"] : ref;
        if (!id.is_number_integer()) throw ProtocolError("optionElements must hold element ids", raw);
        const auto* el = ctx.observation.dom.find(id.get<int>());
        if (!el) throw ProtocolError("optionElements names missing element " + id.dump(), raw);
        auto name = el->text && !el->text->empty() ? *el->text : el->display_name();
        auto detail = option_detail(*el, name);
        if (ref.is_object() && ref.contains("detail") && ref["detail"].is_string()) {
          const auto extra = text::normalize_ws(ref["detail"].get<std::string>());
          if (!extra.empty()) detail = detail.empty() ? extra : detail + "; " + extra;
        }
        add_option(slug(name), name, detail);
      }
    }
    if (has_options(f.kind) && f.options.empty()) throw ProtocolError("choice field '" + f.key + "' has no options", raw);
    if (!has_options(f.kind)) f.options.clear();
    if (f.kind == FieldKind::Radio && f.options.size() > kMaxRadioOptions) f.kind = FieldKind::Dropdown;
    if (f.defaultValue && has_options(f.kind) &&
        std::none_of(f.options.begin(), f.options.end(), [&](const FormOption& o) { return o.value == *f.defaultValue; }))
      f.defaultValue.reset();
    form.fields.push_back(std::move(f));
  }
  check_form(form);
  return form;
}

// Asks the model which decisions are open and builds the form for them.
inline ClarificationForm build_form(const AmbiguityAssessment& assessment, const StepContext& ctx, ModelClient& gateway,
                                    const ActionPlan& plan = {}, const PromptOptions& opts = {}) {
  if (!assessment.ambiguous) throw UsageError("build_form needs an ambiguous assessment");
  std::vector<VerificationQuestion> open;
  for (const auto& q : assessment.questions)
    if (q.answer == Answer::Yes) open.push_back(q);
  auto disclosures = disclose_defaults(ctx.observation.dom, plan);
  std::string defaults;
  for (const auto& d : disclosures) defaults += "- " + d.fieldKey + ": " + d.defaultValue + "\n";
  auto req = build_prompt("clarification-form", ctx,
                          {{"questions", open.empty() ? "(none)\n" : render_questions(open)},
                           {"defaults", defaults.empty() ? "(none)\n" : defaults}},
                          opts);
  const auto raw = gateway.complete(req);
  auto form = normalize_form(clarify_detail::extract_object(raw), ctx, raw);
  form.defaultsDisclosure = std::move(disclosures);
  return form;
}

// ---------------------------------------------------------------------------
// Responses

namespace clarify_detail {

inline bool is_number(const std::string& s) {
  static const std::regex re(R"(^\s*[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?\s*$)");
  return std::regex_match(s, re);
}

// ISO calendar date, YYYY-MM-DD, with a real day of month.
inline bool is_date(const std::string& s) {
  static const std::regex re(R"(^(\d{4})-(\d{2})-(\d{2})$)");
  std::smatch m;
  if (!std::regex_match(s, m, re)) return false;
  const int y = std::stoi(m[1]), mo = std::stoi(m[2]), d = std::stoi(m[3]);
  if (mo < 1 || mo > 12 || d < 1) return false;
  static const int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  return d <= days[mo - 1] + (mo == 2 && leap ? 1 : 0);
}

}  // namespace clarify_detail

// Throws StaleFormError or ValidationError when `response` does not fit `form`.
inline void validate_response(const ClarificationForm& form, const ClarificationResponse& response) {
  if (response.formId != form.formId)
    throw StaleFormError("response is for form '" + response.formId + "', pending form is '" + form.formId + "'");
  std::set<std::string> seen;
  for (const auto& [key, value] : response.answers) {
    const auto* f = form.field(key);
    if (!f) throw ValidationError(key, "no field '" + key + "' on this form");
    if (!seen.insert(key).second) throw ValidationError(key, "field answered twice");
    if (has_options(f->kind)) {
      if (std::none_of(f->options.begin(), f->options.end(), [&](const FormOption& o) { return o.value == value; }))
        throw ValidationError(key, "'" + value + "' is not one of the offered options");
    } else if (f->kind == FieldKind::Number && !clarify_detail::is_number(value)) {
      throw ValidationError(key, "'" + value + "' is not a number");
    } else if (f->kind == FieldKind::Date && !clarify_detail::is_date(value)) {
      throw ValidationError(key, "'" + value + "' is not a date (YYYY-MM-DD)");
    }
  }
  if (response.escape) return;
  for (const auto& f : form.fields)
    if (f.required && !response.answer(f.key)) throw ValidationError(f.key, "required field '" + f.key + "' is missing");
}

// Validates and merges. An escape response keeps the user's explicit answers
// and fills the remaining fields from the form defaults.
inline StepContext apply_response(const StepContext& ctx, const ClarificationForm& form, ClarificationResponse response) {
  validate_response(form, response);
  if (response.escape) {
    for (const auto& f : form.fields)
      if (!response.answer(f.key) && f.defaultValue) response.answers.emplace_back(f.key, *f.defaultValue);
  }
  if (response.submittedAt == 0) response.submittedAt = now_ms();
  StepContext next = ctx;
  next.clarifications.push_back(std::move(response));
  return next;
}

inline Json to_json(const ClarificationResponse& r) {
  Json answers = Json::object();
  for (const auto& [k, v] : r.answers) answers[k] = v;
  return {{"formId", r.formId}, {"answers", answers}, {"submittedAt", r.submittedAt}, {"escape", r.escape}};
}

inline ClarificationResponse response_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("$", "response must be an object");
  ClarificationResponse r;
  r.formId = clarify_detail::str(j, "formId", "$");
  if (auto a = j.find("answers"); a != j.end() && !a->is_null()) {
    if (!a->is_object()) throw ParseError("$.answers", "expected an object");
    for (const auto& [k, v] : a->items()) {
      if (v.is_string()) r.answers.emplace_back(k, v.get<std::string>());
      else if (v.is_number() || v.is_boolean()) r.answers.emplace_back(k, v.dump());
      else throw ParseError("$.answers." + k, "expected a string");
    }
  }
  if (auto t = j.find("submittedAt"); t != j.end() && t->is_number_integer()) r.submittedAt = t->get<std::int64_t>();
  if (auto e = j.find("escape"); e != j.end() && e->is_boolean()) r.escape = e->get<bool>();
  return r;
}

}  // namespace morae
