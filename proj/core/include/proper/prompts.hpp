#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "proper/dimensions.hpp"

namespace proper {

enum class TemplateId {
  DgaCode,
  DgaPwab,
  DgaMd,
  RgaCode,
  RgaMd,
  RgaPwab,
  CotExtract,
  CotRefine,
  Judge,
  AnnotateCode,
  AnnotateMd,
  AnnotatePwab,
  ElicitL1,
  ElicitL2,
  ElicitL3,
};

// "DGA-Code", "RGA-MD", "CoT-Extract", "Elicit-L2", ...
std::string_view to_string(TemplateId id);
TemplateId template_id_from_string(std::string_view s);
const std::vector<TemplateId>& all_template_ids();

struct PromptTemplate {
  TemplateId id;
  std::string_view body;
  // Placeholder tokens exactly as they appear in the body.
  std::vector<std::string_view> placeholders;
};

const PromptTemplate& prompt_template(TemplateId id);

// Placeholder token -> substituted text.
using PromptValues = std::map<std::string, std::string, std::less<>>;

// Substitutes every placeholder in one left-to-right pass; substituted text is
// never rescanned. Throws InvalidInput when a placeholder has no value or a
// value names a token the template does not contain.
std::string render(TemplateId id, const PromptValues& values);

TemplateId dga_template(Domain d);
TemplateId rga_template(Domain d);
TemplateId annotate_template(Domain d);
// level in 1..3
TemplateId elicit_template(int level);

}  // namespace proper
