#include "scripted_provider.hpp"

#include <algorithm>

#include "proper/text.hpp"
#include "proper/wire_format.hpp"

namespace proper::testing {

namespace {

using Vocab = std::vector<std::pair<std::string, std::string>>;

std::string first_words(std::string_view s, std::size_t n) {
  const auto w = text::words(s);
  std::string out;
  for (std::size_t i = 0; i < std::min(n, w.size()); ++i) out += (i ? " " : "") + std::string(w[i]);
  return out;
}

Domain domain_of(TemplateId id) {
  switch (id) {
    case TemplateId::DgaCode:
    case TemplateId::RgaCode:
    case TemplateId::AnnotateCode:
    case TemplateId::ElicitL1:
    case TemplateId::ElicitL2:
    case TemplateId::ElicitL3: return Domain::Coding;
    case TemplateId::DgaPwab:
    case TemplateId::RgaPwab:
    case TemplateId::AnnotatePwab: return Domain::Recommendation;
    default: return Domain::Medical;
  }
}

struct Picks {
  std::size_t addressed;
  std::size_t unmet;
  std::vector<std::size_t> missed;
};

Picks pick(Domain d, std::uint64_t h) {
  const auto& v = vocabulary(d);
  const auto n = v.size();
  Picks p;
  p.addressed = h % n;
  p.unmet = (p.addressed + 1 + (h >> 8) % (n - 1)) % n;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < n; ++i) {
    if (i != p.addressed && i != p.unmet) rest.push_back(i);
  }
  std::sort(rest.begin(), rest.end(), [h](std::size_t a, std::size_t b) {
    const auto ka = text::fnv1a64(std::to_string(h) + ":" + std::to_string(a));
    const auto kb = text::fnv1a64(std::to_string(h) + ":" + std::to_string(b));
    return ka != kb ? ka < kb : a < b;
  });
  const std::size_t count = d == Domain::Recommendation ? 10 + (h >> 16) % 3 : 3 + (h >> 16) % 4;
  rest.resize(std::min(count, rest.size()));
  p.missed = rest;
  return p;
}

Dimension vocab_dim(Domain d, std::size_t i, Origin origin) {
  const auto& [name, value] = vocabulary(d)[i];
  std::optional<std::string> why;
  if (i % 3 != 0) why = "Matters here: " + value;
  return Dimension::make(name, value, why, origin);
}

std::vector<TokenLogprob> tokenize(const std::string& s) {
  std::vector<TokenLogprob> out;
  for (std::size_t i = 0; i < s.size(); i += 3) {
    auto tok = s.substr(i, 3);
    const auto h = text::fnv1a64(tok + "#" + std::to_string(i));
    out.push_back({tok, -static_cast<double>(h % 2001) / 1000.0});
  }
  return out;
}

int judge_score(const std::string& response) {
  return static_cast<int>(std::min<std::size_t>(5, 1 + text::words(response).size() / 25));
}

std::string revise(const std::string& r0, const std::string& missed) {
  std::string out = "===START===\n" + r0 + "\n\n";
  if (missed == "(none)") return out + "No further points apply.\n===END===";
  out += "Additional points:";
  std::size_t start = 0;
  while (start < missed.size()) {
    auto end = missed.find('\n', start);
    if (end == std::string::npos) end = missed.size();
    const auto line = missed.substr(start, end - start);
    const auto tag_end = line.find("] ");
    out += "\n- " + (tag_end == std::string::npos ? line : line.substr(tag_end + 2));
    start = end + 1;
  }
  return out + "\n===END===";
}

// Query text quoted inside annotation inputs.
std::string annotated_query(const std::string& tail) {
  for (const char* label : {"(1) User query:\n", "(1) User medical query:\n", "(2) User query:\n"}) {
    const auto p = tail.find(label);
    if (p == std::string::npos) continue;
    const auto begin = p + std::string(label).size();
    const auto end = tail.find("\n\n(", begin);
    return tail.substr(begin, end == std::string::npos ? std::string::npos : end - begin);
  }
  return tail;
}

}  // namespace

const Vocab& vocabulary(Domain d) {
  static const Vocab medical = {
      {"Symptom duration", "how long the symptoms have lasted"},
      {"Medication history", "current prescriptions and supplements"},
      {"Allergy status", "known drug or food allergies"},
      {"Red-flag symptoms", "signs that need urgent care"},
      {"Age group", "patient age bracket"},
      {"Pregnancy status", "whether pregnancy is possible"},
      {"Chronic conditions", "existing long-term illnesses"},
      {"Follow-up timing", "when to see a clinician again"},
      {"Lifestyle factors", "sleep, diet and exercise habits"},
      {"Dosage safety", "maximum safe daily dose"},
      {"Diagnostic tests", "labs or imaging worth ordering"},
      {"Mental health impact", "stress or mood effects"},
      {"Family history", "relatives with similar conditions"},
      {"Home remedies", "safe self-care measures"},
  };
  static const Vocab coding = {
      {"Input constraints", "maximum n and value ranges"},
      {"Edge cases", "empty input and single element"},
      {"Time complexity", "target big-O bound"},
      {"Memory limit", "peak memory budget"},
      {"Language version", "Python 3 specifics"},
      {"I/O format", "reading from standard input"},
      {"Overflow handling", "large integer arithmetic"},
      {"Test strategy", "brute-force cross-checks"},
      {"Algorithm choice", "greedy versus dynamic programming"},
      {"Code readability", "naming and structure"},
      {"Recursion depth", "stack limits in deep recursion"},
      {"Precision", "floating point tolerance"},
      {"Multiple test cases", "resetting state between cases"},
      {"Explanation depth", "step-by-step reasoning"},
  };
  static const Vocab recommendation = {
      {"Budget", "price ceiling"},
      {"Brand preference", "favored manufacturers"},
      {"Size fit", "dimensions and sizing"},
      {"Material", "fabric or build quality"},
      {"Use case", "intended activity"},
      {"Delivery speed", "shipping time"},
      {"Review sentiment", "what buyers praise"},
      {"Compatibility", "works with owned devices"},
      {"Warranty", "coverage length"},
      {"Sustainability", "eco-friendly sourcing"},
      {"Color options", "available finishes"},
      {"Gift suitability", "packaging and returns"},
      {"Maintenance", "cleaning and care"},
      {"Accessibility", "ease of use"},
      {"Bundle deals", "discounted combinations"},
  };
  switch (d) {
    case Domain::Coding: return coding;
    case Domain::Recommendation: return recommendation;
    case Domain::Medical: return medical;
  }
  return medical;
}

std::optional<TemplateMatch> match_template(const std::string& prompt) {
  std::optional<TemplateMatch> best;
  std::size_t best_chars = 0;
  for (auto id : all_template_ids()) {
    const auto& tpl = prompt_template(id);
    const std::string_view body = tpl.body;
    // Split the body into literal runs and placeholder tokens.
    std::vector<std::string> literals;
    std::vector<std::string> holes;
    std::size_t pos = 0;
    for (;;) {
      std::size_t next = std::string_view::npos;
      std::string_view token;
      for (auto ph : tpl.placeholders) {
        const auto p = body.find(ph, pos);
        if (p < next) {
          next = p;
          token = ph;
        }
      }
      if (next == std::string_view::npos) {
        literals.emplace_back(body.substr(pos));
        break;
      }
      literals.emplace_back(body.substr(pos, next - pos));
      holes.emplace_back(token);
      pos = next + token.size();
    }
    if (!prompt.starts_with(literals.front())) continue;
    TemplateMatch m{id, {}, {}};
    std::size_t cursor = literals.front().size();
    bool ok = true;
    for (std::size_t i = 0; i < holes.size(); ++i) {
      const auto& lit = literals[i + 1];
      const auto p = lit.empty() ? prompt.size() : prompt.find(lit, cursor);
      if (p == std::string::npos) {
        ok = false;
        break;
      }
      m.slots.emplace(holes[i], prompt.substr(cursor, p - cursor));
      cursor = p + lit.size();
    }
    if (!ok) continue;
    m.tail = prompt.substr(std::min(cursor, prompt.size()));
    std::size_t chars = 0;
    for (const auto& l : literals) chars += l.size();
    if (chars > best_chars) {
      best_chars = chars;
      best = std::move(m);
    }
  }
  return best;
}

std::string core_query(const std::string& block) {
  for (const char* label : {"Current query: ", "User query: "}) {
    const auto p = block.rfind(label);
    if (p != std::string::npos) return block.substr(p + std::string(label).size());
  }
  return block;
}

ChatResponse ScriptedProvider::complete(const ChatRequest& req) {
  req.validate();
  {
    std::lock_guard lock(mutex_);
    requests_.push_back(req);
  }
  ChatResponse resp;
  resp.provider_meta = {{"provider", "scripted"}};
  const auto& last = req.messages.back().content;

  // Baseline: a system line followed by the conversation.
  if (req.messages.front().role == Role::System) {
    const auto& sys = req.messages.front().content;
    const auto q = core_query(last);
    if (q.find("#offline") != std::string::npos) fail(ErrorCode::Transport, "scripted provider offline");
    std::string tail = "Start with the standard first-line approach and adjust to your situation.";
    if (sys.find("coding") != std::string::npos) tail = "A straightforward implementation reads the input and loops once.";
    if (sys.find("shopping") != std::string::npos) tail = "The suggested product is a popular, well-rated option.";
    resp.text = "Thanks for the question. Regarding " + first_words(q, 12) + ": here is a first answer. " + tail;
    return resp;
  }

  const auto m = match_template(last);
  if (!m) {
    resp.text = "I am not sure how to help with that.";
    return resp;
  }
  switch (m->id) {
    case TemplateId::DgaCode:
    case TemplateId::DgaMd:
    case TemplateId::DgaPwab: {
      const auto d = domain_of(m->id);
      const auto& block = m->slots.begin()->first == "<INSERT_PERSONA>" ? m->slots.at("<INSERT_USER_QUERY>")
                                                                        : m->slots.begin()->second;
      const auto q = core_query(block);
      if (q.find("#offline") != std::string::npos) fail(ErrorCode::Transport, "scripted provider offline");
      const auto p = pick(d, text::fnv1a64(q));
      DimensionPayload payload;
      payload.explicit_dims.push_back(vocab_dim(d, p.addressed, Origin::UserExplicit));
      payload.explicit_dims.push_back(vocab_dim(d, p.unmet, Origin::UserExplicit));
      for (auto i : p.missed) payload.missed.push_back(vocab_dim(d, i, Origin::Implicit));
      resp.text = format_dimension_output(payload);
      if (q.find("#malformed") != std::string::npos) {
        resp.text = resp.text.substr(0, resp.text.find(kEndJsonMarker));
      }
      if (req.want_logprobs && logprobs_) resp.token_logprobs = tokenize(resp.text);
      if (req.want_logprobs && !logprobs_) resp.logprobs_unavailable = true;
      return resp;
    }
    case TemplateId::AnnotateCode:
    case TemplateId::AnnotateMd:
    case TemplateId::AnnotatePwab:
    case TemplateId::CotExtract: {
      const bool cot = m->id == TemplateId::CotExtract;
      const auto q = core_query(cot ? m->slots.at("<INSERT_USER_QUERY>") : annotated_query(m->tail));
      Domain d = domain_of(m->id);
      if (cot && m->slots.at("<INSERT_USER_QUERY>").find("User persona:") != std::string::npos) {
        d = Domain::Recommendation;
      }
      const auto p = pick(d, text::fnv1a64(q));
      AspectPayload payload;
      payload.user_aspects.push_back(vocab_dim(d, p.addressed, Origin::UserExplicit));
      payload.user_aspects.push_back(vocab_dim(d, p.unmet, Origin::UserExplicit));
      payload.solution_aspects.push_back(vocab_dim(d, p.addressed, Origin::SystemExplicit));
      if (!p.missed.empty()) payload.solution_aspects.push_back(vocab_dim(d, p.missed.front(), Origin::SystemExplicit));
      resp.text = format_aspect_json(payload);
      return resp;
    }
    case TemplateId::RgaCode:
    case TemplateId::RgaMd:
    case TemplateId::RgaPwab:
    case TemplateId::CotRefine:
      resp.text = revise(m->slots.at("<system_output>"), m->slots.at("<missed_aspects>"));
      return resp;
    case TemplateId::ElicitL1:
    case TemplateId::ElicitL2:
    case TemplateId::ElicitL3: {
      const int level = m->id == TemplateId::ElicitL1 ? 1 : m->id == TemplateId::ElicitL2 ? 2 : 3;
      resp.text = "Level " + std::to_string(level) + " request: I need help with this task. " +
                  first_words(m->slots.at("<problem description>"), 15) +
                  (level == 3 ? " Please include a complexity analysis." : "");
      return resp;
    }
    case TemplateId::Judge: {
      JudgeVerdict v;
      v.score_a = judge_score(m->slots.at("<INSERT RESPONSE A HERE>"));
      v.score_b = judge_score(m->slots.at("<INSERT RESPONSE B HERE>"));
      v.justification_a = "Covers " + std::to_string(text::words(m->slots.at("<INSERT RESPONSE A HERE>")).size()) +
                          " words of guidance.";
      v.justification_b = "Covers " + std::to_string(text::words(m->slots.at("<INSERT RESPONSE B HERE>")).size()) +
                          " words of guidance.";
      resp.text = format_judge_json(v);
      return resp;
    }
  }
  resp.text = "Unhandled template.";
  return resp;
}

std::size_t ScriptedProvider::calls() const {
  std::lock_guard lock(mutex_);
  return requests_.size();
}

std::vector<ChatRequest> ScriptedProvider::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

ChatResponse RecordingProvider::complete(const ChatRequest& req) {
  {
    std::lock_guard lock(mutex_);
    requests_.push_back(req);
  }
  return inner_->complete(req);
}

std::vector<ChatRequest> RecordingProvider::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

}  // namespace proper::testing
