#include "proper/prompts.hpp"

#include <algorithm>

#include "prompt_bodies.hpp"

namespace proper {

namespace {

struct Entry {
  TemplateId id;
  std::string_view label;
  const char* const* body;
  std::vector<std::string_view> placeholders;
};

const std::vector<Entry>& entries() {
  using namespace detail;
  static const std::vector<Entry> table = {
      {TemplateId::DgaCode, "DGA-Code", &kDgaCode, {"<INSERT_PERSONA>", "<INSERT_USER_QUERY>"}},
      {TemplateId::DgaPwab, "DGA-PWAB", &kDgaPWAB, {"{user_query}"}},
      {TemplateId::DgaMd, "DGA-MD", &kDgaMD, {"{patient_query}"}},
      {TemplateId::RgaCode, "RGA-Code", &kRgaCode, {"<user_query>", "<system_output>", "<missed_aspects>"}},
      {TemplateId::RgaMd, "RGA-MD", &kRgaMD, {"<user_query>", "<system_output>", "<missed_aspects>"}},
      {TemplateId::RgaPwab, "RGA-PWAB", &kRgaPWAB, {"<user_query>", "<system_output>", "<missed_aspects>"}},
      {TemplateId::CotExtract, "CoT-Extract", &kCotExtract, {"<INSERT_USER_QUERY>", "<INSERT_EXISTING_RESPONSE>"}},
      {TemplateId::CotRefine, "CoT-Refine", &kCotRefine, {"<user_query>", "<system_output>", "<missed_aspects>"}},
      {TemplateId::Judge,
       "Judge",
       &kJudge,
       {"<INSERT USER QUERY HERE>", "<INSERT RESPONSE A HERE>", "<INSERT RESPONSE B HERE>"}},
      {TemplateId::AnnotateCode, "Annotate-Code", &kAnnotateCode, {}},
      {TemplateId::AnnotateMd, "Annotate-MD", &kAnnotateMD, {}},
      {TemplateId::AnnotatePwab, "Annotate-PWAB", &kAnnotatePWAB, {}},
      {TemplateId::ElicitL1, "Elicit-L1", &kElicitL1, {"<problem description>"}},
      {TemplateId::ElicitL2, "Elicit-L2", &kElicitL2, {"<problem description>"}},
      {TemplateId::ElicitL3, "Elicit-L3", &kElicitL3, {"<problem description>"}},
  };
  return table;
}

const Entry& entry(TemplateId id) {
  for (const auto& e : entries()) {
    if (e.id == id) return e;
  }
  fail(ErrorCode::InvalidInput, "unknown template id");
}

}  // namespace

std::string_view to_string(TemplateId id) { return entry(id).label; }

TemplateId template_id_from_string(std::string_view s) {
  for (const auto& e : entries()) {
    if (e.label == s) return e.id;
  }
  fail(ErrorCode::InvalidInput, "unknown template '" + std::string(s) + "'");
}

const std::vector<TemplateId>& all_template_ids() {
  static const std::vector<TemplateId> ids = [] {
    std::vector<TemplateId> out;
    for (const auto& e : entries()) out.push_back(e.id);
    return out;
  }();
  return ids;
}

const PromptTemplate& prompt_template(TemplateId id) {
  static const std::vector<PromptTemplate> templates = [] {
    std::vector<PromptTemplate> out;
    for (const auto& e : entries()) out.push_back({e.id, std::string_view(*e.body), e.placeholders});
    return out;
  }();
  for (const auto& t : templates) {
    if (t.id == id) return t;
  }
  fail(ErrorCode::InvalidInput, "unknown template id");
}

std::string render(TemplateId id, const PromptValues& values) {
  const auto& tpl = prompt_template(id);
  for (const auto& [token, _] : values) {
    if (std::find(tpl.placeholders.begin(), tpl.placeholders.end(), token) == tpl.placeholders.end()) {
      fail(ErrorCode::InvalidInput,
           "template " + std::string(to_string(id)) + " has no placeholder " + token);
    }
  }
  for (auto token : tpl.placeholders) {
    if (values.find(token) == values.end()) {
      fail(ErrorCode::InvalidInput,
           "template " + std::string(to_string(id)) + " needs a value for " + std::string(token));
    }
  }

  const std::string_view body = tpl.body;
  std::string out;
  out.reserve(body.size());
  std::size_t pos = 0;
  while (pos < body.size()) {
    bool replaced = false;
    for (auto token : tpl.placeholders) {
      if (body.compare(pos, token.size(), token) == 0) {
        out += values.find(token)->second;
        pos += token.size();
        replaced = true;
        break;
      }
    }
    if (!replaced) out += body[pos++];
  }
  return out;
}

TemplateId dga_template(Domain d) {
  switch (d) {
    case Domain::Coding: return TemplateId::DgaCode;
    case Domain::Medical: return TemplateId::DgaMd;
    case Domain::Recommendation: return TemplateId::DgaPwab;
  }
  fail(ErrorCode::InvalidInput, "unknown domain");
}

TemplateId rga_template(Domain d) {
  switch (d) {
    case Domain::Coding: return TemplateId::RgaCode;
    case Domain::Medical: return TemplateId::RgaMd;
    case Domain::Recommendation: return TemplateId::RgaPwab;
  }
  fail(ErrorCode::InvalidInput, "unknown domain");
}

TemplateId annotate_template(Domain d) {
  switch (d) {
    case Domain::Coding: return TemplateId::AnnotateCode;
    case Domain::Medical: return TemplateId::AnnotateMd;
    case Domain::Recommendation: return TemplateId::AnnotatePwab;
  }
  fail(ErrorCode::InvalidInput, "unknown domain");
}

TemplateId elicit_template(int level) {
  switch (level) {
    case 1: return TemplateId::ElicitL1;
    case 2: return TemplateId::ElicitL2;
    case 3: return TemplateId::ElicitL3;
    default: fail(ErrorCode::InvalidInput, "elicitation level must be 1, 2 or 3");
  }
}

}  // namespace proper
