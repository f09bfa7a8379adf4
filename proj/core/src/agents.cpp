#include "proper/agents.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <set>

#include "proper/prompts.hpp"
#include "proper/text.hpp"

namespace proper {

std::string_view to_string(ConfidenceMode m) { return m == ConfidenceMode::MeanToken ? "mean" : "sum"; }

ConfidenceMode confidence_mode_from_string(std::string_view s) {
  if (s == "mean") return ConfidenceMode::MeanToken;
  if (s == "sum") return ConfidenceMode::SumToken;
  fail(ErrorCode::Configuration, "unknown confidence mode '" + std::string(s) + "'");
}

std::string_view to_string(AblationVariant v) {
  switch (v) {
    case AblationVariant::None: return "proper";
    case AblationVariant::NoDga: return "no_dga";
    case AblationVariant::NoReranker: return "no_reranker";
    case AblationVariant::NoRga: return "no_rga";
  }
  return "proper";
}

AblationVariant ablation_from_string(std::string_view s) {
  if (s == "proper" || s == "none") return AblationVariant::None;
  if (s == "no_dga") return AblationVariant::NoDga;
  if (s == "no_reranker") return AblationVariant::NoReranker;
  if (s == "no_rga") return AblationVariant::NoRga;
  fail(ErrorCode::Configuration, "unknown ablation variant '" + std::string(s) + "'");
}

void AgentConfig::validate() const {
  for (const auto* id : {&models.baseline, &models.dga, &models.rga, &models.judge, &models.annotate}) {
    if (text::is_blank(*id)) fail(ErrorCode::Configuration, "every model id must be set");
  }
  for (double t : {temperatures.baseline, temperatures.dga, temperatures.annotate, temperatures.rga,
                   temperatures.judge}) {
    if (!(t >= 0.0)) fail(ErrorCode::Configuration, "temperatures must be >= 0");
  }
  if (max_tokens <= 0) fail(ErrorCode::Configuration, "max_tokens must be positive");
  if (!(match_threshold > 0.0 && match_threshold <= 1.0)) {
    fail(ErrorCode::Configuration, "match threshold must lie in (0, 1]");
  }
  if (!(dedupe_threshold > 0.0 && dedupe_threshold <= 1.0)) {
    fail(ErrorCode::Configuration, "dedupe threshold must lie in (0, 1]");
  }
  if (repair_retries < 0) fail(ErrorCode::Configuration, "repair_retries must be >= 0");
  rerank.validate();
}

std::string query_block(const InteractionState& s, bool with_persona) {
  std::string out;
  if (with_persona && s.persona && !s.persona->empty()) {
    out += "User persona: " + format_persona(*s.persona) + "\n";
  }
  if (s.history.empty()) return out.empty() ? s.query : out + "User query: " + s.query;
  out += "Previous turns:\n";
  for (const auto& t : s.history) {
    out += (t.role == Role::User ? "User: " : "Assistant: ") + t.text + "\n";
  }
  out += "Current query: " + s.query;
  return out;
}

std::string format_missed_aspects(const std::vector<Dimension>& dims) {
  if (dims.empty()) return "(none)";
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const auto& d = dims[i];
    const char* tag = d.origin() == Origin::UserExplicit     ? "explicit"
                      : d.origin() == Origin::SystemExplicit ? "system"
                                                             : "implicit";
    if (i > 0) out += "\n";
    out += std::to_string(i + 1) + ". [" + tag + "] " + d.name() + " — " + d.value();
    if (d.justification()) out += " (" + *d.justification() + ")";
  }
  return out;
}

int count_new_questions(std::string_view revised, std::string_view original) {
  int count = 0;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < revised.size(); ++i) {
    const char c = revised[i];
    if (c != '.' && c != '!' && c != '?' && c != '\n') continue;
    if (c == '?') {
      const auto sentence = text::trim(revised.substr(begin, i + 1 - begin));
      if (!sentence.empty() && original.find(sentence) == std::string_view::npos) ++count;
    }
    begin = i + 1;
  }
  return count;
}

std::vector<std::optional<double>> span_confidences(const std::vector<Dimension>& implicit,
                                                    const std::vector<TokenLogprob>& tokens,
                                                    ConfidenceMode mode) {
  std::string joined;
  std::vector<std::size_t> starts;
  starts.reserve(tokens.size());
  for (const auto& t : tokens) {
    starts.push_back(joined.size());
    joined += t.token;
  }

  std::vector<std::optional<double>> out(implicit.size());
  const auto section = joined.find("\"missed_dimensions\"");
  std::size_t cursor = section == std::string::npos ? 0 : section;
  for (std::size_t k = 0; k < implicit.size(); ++k) {
    const std::string name_js = nlohmann::json(implicit[k].name()).dump();
    const std::string value_js = nlohmann::json(implicit[k].value()).dump();
    const auto p = joined.find(name_js, cursor);
    if (p == std::string::npos) continue;
    const auto q = joined.find(value_js, p + name_js.size());
    if (q == std::string::npos) continue;
    const auto span_end = q + value_js.size();

    double sum = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const auto tok_end = starts[i] + tokens[i].token.size();
      if (starts[i] < span_end && tok_end > p) {
        sum += tokens[i].logprob;
        ++n;
      }
    }
    if (n > 0) out[k] = std::min(0.0, mode == ConfidenceMode::MeanToken ? sum / n : sum);
    cursor = span_end;
  }
  return out;
}

std::string annotation_prompt(Domain d, const AnnotationInputs& in) {
  std::string out = render(annotate_template(d), {});
  out += "\n\n";
  switch (d) {
    case Domain::Coding:
      out += "(1) User query:\n" + in.query + "\n\n(2) Solution code:\n" + in.response;
      break;
    case Domain::Medical:
      out += "(1) User medical query:\n" + in.query + "\n\n(2) Doctor response:\n" + in.response;
      break;
    case Domain::Recommendation:
      out += "(1) User persona:\n" + (in.persona ? format_persona(*in.persona) : std::string("(none)")) +
             "\n\n(2) User query:\n" + in.query + "\n\n(3) Recommended product:\n" + in.response;
      break;
  }
  return out;
}

namespace {

std::string baseline_system_line(Domain d) {
  switch (d) {
    case Domain::Coding: return "You are a helpful coding assistant.";
    case Domain::Medical: return "You are a helpful clinical assistant answering a patient's question.";
    case Domain::Recommendation: return "You are a helpful shopping recommendation assistant.";
  }
  return "You are a helpful assistant.";
}

ChatRequest single_turn(const std::string& model, double temperature, int max_tokens, std::string prompt,
                        bool logprobs = false) {
  ChatRequest req;
  req.model = model;
  req.temperature = temperature;
  req.max_tokens = max_tokens;
  req.want_logprobs = logprobs;
  req.messages.push_back({Role::User, std::move(prompt)});
  return req;
}

nlohmann::json dims_json(const std::vector<Dimension>& dims) {
  auto arr = nlohmann::json::array();
  for (const auto& d : dims) arr.push_back(to_json(d));
  return arr;
}

}  // namespace

Agents::Agents(std::shared_ptr<ChatProvider> chat, std::shared_ptr<const EmbeddingProvider> embedder,
               AgentConfig config)
    : chat_(std::move(chat)),
      embedder_(std::move(embedder)),
      config_(std::move(config)),
      matcher_(embedder_, config_.match_threshold, config_.embedding_text) {
  if (!chat_) fail(ErrorCode::Configuration, "agents need a chat provider");
  config_.validate();
}

ChatResponse Agents::call(const std::string& stage, ChatRequest req, StageLog* log) const {
  req.validate();
  const auto started = std::chrono::steady_clock::now();
  auto resp = chat_->complete(req);
  if (log) {
    StageRecord rec;
    rec.stage = stage;
    rec.model = req.model;
    rec.request_id = request_key(req);
    rec.attempts = resp.provider_meta.value("attempts", resp.attempts);
    if (config_.record_timings) {
      rec.duration_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    }
    log->records.push_back(std::move(rec));
  }
  return resp;
}

template <typename Parse>
auto Agents::call_parsed(const std::string& stage, ChatRequest req, StageLog* log, Parse&& parse) const
    -> decltype(parse(std::declval<const ChatResponse&>())) {
  for (int repair = 0;; ++repair) {
    ChatResponse resp;
    try {
      resp = call(stage, req, log);
    } catch (Error& e) {
      e.with_stage(stage);
      throw;
    }
    try {
      if (log && repair > 0) log->records.back().repairs = repair;
      return parse(resp);
    } catch (Error& e) {
      if (e.category() != ErrorCategory::Parse || repair >= config_.repair_retries) {
        e.with_stage(stage);
        if (e.raw_text().empty()) e.with_raw(resp.text);
        throw;
      }
      spdlog::warn("{}: unparseable model output ({}), asking for a repair", stage, e.what());
      req.messages.push_back({Role::Assistant, resp.text});
      req.messages.push_back({Role::User, std::string("Your previous reply could not be parsed: ") + e.what() +
                                              "\nReply again, following the required output format exactly."});
    }
  }
}

std::string Agents::generate_baseline(const InteractionState& s, StageLog* log) const {
  s.validate();
  ChatRequest req;
  req.model = config_.models.baseline;
  req.temperature = config_.temperatures.baseline;
  req.max_tokens = config_.max_tokens;
  std::string system = baseline_system_line(s.domain);
  if (s.persona && !s.persona->empty()) system += "\nUser persona: " + format_persona(*s.persona);
  req.messages.push_back({Role::System, system});
  for (const auto& t : s.history) req.messages.push_back({t.role, t.text});
  req.messages.push_back({Role::User, s.query});
  return call_parsed("baseline", std::move(req), log, [](const ChatResponse& r) {
    if (text::is_blank(r.text)) fail(ErrorCode::EmptyValue, "baseline response is empty");
    return r.text;
  });
}

DgaResult Agents::run_dga(const InteractionState& s, StageLog* log, const std::string* model) const {
  s.validate();
  const auto tpl = dga_template(s.domain);
  PromptValues values;
  switch (s.domain) {
    case Domain::Coding:
      values["<INSERT_PERSONA>"] = s.persona && !s.persona->empty() ? format_persona(*s.persona) : "none";
      values["<INSERT_USER_QUERY>"] = query_block(s, false);
      break;
    case Domain::Recommendation:
      values["{user_query}"] = query_block(s, true);
      break;
    case Domain::Medical:
      values["{patient_query}"] = query_block(s, false);
      break;
  }
  auto req = single_turn(model ? *model : config_.models.dga, config_.temperatures.dga, config_.max_tokens,
                         render(tpl, values), true);

  return call_parsed("dga", std::move(req), log, [&](const ChatResponse& r) {
    const auto inner = extract_between_markers(r.text, kStartJsonMarker, kEndJsonMarker);
    auto payload = parse_dimension_json(inner);
    DgaResult out;
    out.explicit_dims = std::move(payload.explicit_dims);
    if (!r.token_logprobs) {
      out.logprobs_unavailable = true;
      out.implicit = std::move(payload.missed);
      return out;
    }
    const auto conf = span_confidences(payload.missed, *r.token_logprobs, config_.confidence);
    for (std::size_t i = 0; i < payload.missed.size(); ++i) {
      if (!conf[i]) ++out.unscored;
      out.implicit.push_back(payload.missed[i].with_confidence(conf[i]));
    }
    return out;
  });
}

AspectPayload Agents::annotate(Domain d, const AnnotationInputs& in, StageLog* log) const {
  if (text::is_blank(in.query)) fail(ErrorCode::InvalidInput, "annotation needs a query");
  if (text::is_blank(in.response)) fail(ErrorCode::InvalidInput, "annotation needs a response");
  auto req = single_turn(config_.models.annotate, config_.temperatures.annotate, config_.max_tokens,
                         annotation_prompt(d, in));
  return call_parsed("annotate", std::move(req), log,
                     [](const ChatResponse& r) { return parse_aspect_json(text::trim(r.text)); });
}

std::string Agents::complete_text(const std::string& stage, const std::string& model, double temperature,
                                  std::string prompt, StageLog* log) const {
  auto req = single_turn(model, temperature, config_.max_tokens, std::move(prompt));
  return call_parsed(stage, std::move(req), log, [](const ChatResponse& r) {
    auto out = std::string(text::trim(r.text));
    if (out.empty()) fail(ErrorCode::EmptyValue, "completion is empty");
    return out;
  });
}

std::vector<Dimension> Agents::extract_system_dimensions(const InteractionState& s, const std::string& r0,
                                                         StageLog* log) const {
  if (text::is_blank(r0)) fail(ErrorCode::InvalidInput, "system dimensions need a non-empty response");
  s.validate();
  AnnotationInputs in{query_block(s, false), r0, s.persona};
  auto req = single_turn(config_.models.annotate, config_.temperatures.annotate, config_.max_tokens,
                         annotation_prompt(s.domain, in));
  return call_parsed("system_dimensions", std::move(req), log, [](const ChatResponse& r) {
    return parse_aspect_json(text::trim(r.text)).solution_aspects;
  });
}

RgaResult Agents::run_rga(const InteractionState& s, const std::string& r0, const std::vector<Dimension>& unmet,
                          const std::vector<Dimension>& selected, StageLog* log) const {
  if (text::is_blank(r0)) fail(ErrorCode::InvalidInput, "response stage needs a baseline response");
  std::vector<Dimension> aspects = unmet;
  aspects.insert(aspects.end(), selected.begin(), selected.end());

  RgaResult out;
  out.missed_aspects = format_missed_aspects(aspects);
  const PromptValues values = {{"<user_query>", query_block(s, s.domain == Domain::Recommendation)},
                               {"<system_output>", r0},
                               {"<missed_aspects>", out.missed_aspects}};
  auto req = single_turn(config_.models.rga, config_.temperatures.rga, config_.max_tokens,
                         render(rga_template(s.domain), values));
  out.text = call_parsed("rga", std::move(req), log, [](const ChatResponse& r) {
    auto body = extract_between_markers(r.text, kStartMarker, kEndMarker);
    if (text::is_blank(body)) fail(ErrorCode::EmptyValue, "revised response is empty");
    return body;
  });
  out.new_questions = count_new_questions(out.text, r0);
  if (out.new_questions > 1) {
    const auto msg = "clarifying-question lint: " + std::to_string(out.new_questions) +
                     " new questions (at most one expected)";
    spdlog::warn("{}", msg);
    if (log) log->warnings.push_back(msg);
  }
  return out;
}

CotResult Agents::run_cot_baseline(const InteractionState& s, StageLog* log) const {
  CotResult out;
  try {
    out.baseline = generate_baseline(s, log);
  } catch (Error& e) {
    e.with_stage("stage 1 (baseline)");
    throw;
  }

  const PromptValues extract_values = {{"<INSERT_USER_QUERY>", query_block(s, true)},
                                       {"<INSERT_EXISTING_RESPONSE>", out.baseline}};
  auto extract_req = single_turn(config_.models.annotate, config_.temperatures.annotate, config_.max_tokens,
                                 render(TemplateId::CotExtract, extract_values));
  out.aspects = call_parsed("stage 2 (cot-extract)", std::move(extract_req), log,
                            [](const ChatResponse& r) { return parse_aspect_json(text::trim(r.text)); });

  std::vector<Dimension> missing = out.aspects.user_aspects;
  missing.insert(missing.end(), out.aspects.solution_aspects.begin(), out.aspects.solution_aspects.end());
  const PromptValues refine_values = {{"<user_query>", query_block(s, true)},
                                      {"<system_output>", out.baseline},
                                      {"<missed_aspects>", format_missed_aspects(missing)}};
  auto refine_req = single_turn(config_.models.rga, config_.temperatures.rga, config_.max_tokens,
                                render(TemplateId::CotRefine, refine_values));
  out.final_response = call_parsed("stage 3 (cot-refine)", std::move(refine_req), log, [](const ChatResponse& r) {
    return extract_between_markers(r.text, kStartMarker, kEndMarker);
  });
  return out;
}

EvalRecord Agents::run_judge(const std::string& query, const std::string& response_a,
                             const std::string& response_b, StageLog* log) const {
  if (text::is_blank(query)) fail(ErrorCode::InvalidInput, "judge needs a query");
  if (text::is_blank(response_a) || text::is_blank(response_b)) {
    fail(ErrorCode::InvalidInput, "judge needs two non-empty responses");
  }
  auto judge_once = [&](const std::string& a, const std::string& b, const std::string& stage) {
    const PromptValues values = {{"<INSERT USER QUERY HERE>", query},
                                 {"<INSERT RESPONSE A HERE>", a},
                                 {"<INSERT RESPONSE B HERE>", b}};
    auto req = single_turn(config_.models.judge, config_.temperatures.judge, config_.max_tokens,
                           render(TemplateId::Judge, values));
    return call_parsed(stage, std::move(req), log,
                       [](const ChatResponse& r) { return parse_judge_json(text::trim(r.text)); });
  };
  auto record = judge_once(response_a, response_b, "judge");
  if (config_.judge_swap_ab) {
    const auto mirror = judge_once(response_b, response_a, "judge_swapped");
    record.swapped_pass =
        JudgeVerdict{mirror.score_b, mirror.score_a, mirror.justification_b, mirror.justification_a};
  }
  return record;
}

PipelineTrace Agents::run_proper(const InteractionState& s, const std::string& sample_id) const {
  return run_ablation(s, AblationVariant::None, sample_id);
}

PipelineTrace Agents::run_ablation(const InteractionState& s, AblationVariant variant,
                                   const std::string& sample_id) const {
  PipelineTrace t;
  t.sample_id = sample_id;
  t.variant = variant;
  t.state = s;
  t.dga_model = variant == AblationVariant::NoDga ? config_.models.baseline : config_.models.dga;

  std::string stage = "input";
  try {
    s.validate();

    stage = "baseline";
    t.r0 = generate_baseline(s, &t.log);
    t.state.baseline_response = t.r0;

    stage = "dga";
    const auto dga = run_dga(s, &t.log, &t.dga_model);
    t.user_explicit = dga.explicit_dims;
    t.implicit_candidates = dga.implicit;
    t.dga_logprobs_unavailable = dga.logprobs_unavailable;
    if (dga.logprobs_unavailable) t.log.warnings.push_back("dga: logprobs unavailable, confidences set to 0");
    if (dga.unscored > 0) {
      t.log.warnings.push_back("dga: " + std::to_string(dga.unscored) +
                               " implicit dimensions could not be aligned to tokens, confidence 0");
    }

    stage = "system_dimensions";
    t.system_explicit = extract_system_dimensions(s, t.r0, &t.log);

    stage = "pool";
    const auto unmet = unmet_explicit(t.user_explicit, t.system_explicit, matcher_);
    t.pool = build_activation_pool(t.state, unmet, t.system_explicit, t.implicit_candidates, matcher_,
                                   PoolOptions{config_.dedupe_threshold});
    for (const auto& w : t.pool->warnings) t.log.warnings.push_back("pool: " + w);

    stage = "rerank";
    std::vector<Dimension> fwd_explicit;
    std::vector<Dimension> fwd_implicit;
    if (variant == AblationVariant::NoReranker) {
      fwd_explicit = t.pool->unmet_explicit;
      fwd_implicit = t.pool->implicit_candidates;
    } else {
      t.selection = select(*t.pool, config_.rerank);
      const std::set<std::string> chosen(t.selection->selected.begin(), t.selection->selected.end());
      for (const auto& d : t.pool->unmet_explicit) {
        if (config_.rerank.pool_mode == PoolMode::ImplicitOnly || chosen.contains(d.id())) {
          fwd_explicit.push_back(d);
        }
      }
      for (const auto& d : t.pool->implicit_candidates) {
        if (chosen.contains(d.id())) fwd_implicit.push_back(d);
      }
    }
    t.forwarded = fwd_explicit;
    t.forwarded.insert(t.forwarded.end(), fwd_implicit.begin(), fwd_implicit.end());

    stage = "rga";
    if (variant == AblationVariant::NoRga) {
      t.missed_aspects = format_missed_aspects(t.forwarded);
      std::string bullets;
      for (const auto& d : t.forwarded) bullets += "\n- " + d.name() + ": " + d.value();
      t.final_response = t.forwarded.empty() ? t.r0 : t.r0 + "\n\nAdditional considerations:" + bullets;
    } else {
      auto rga = run_rga(t.state, t.r0, fwd_explicit, fwd_implicit, &t.log);
      t.missed_aspects = std::move(rga.missed_aspects);
      t.final_response = std::move(rga.text);
    }
  } catch (const Error& e) {
    t.failure = StageFailure{e.stage().empty() ? stage : e.stage(), e.code(), e.what(), e.path(), e.raw_text()};
  } catch (const std::exception& e) {
    t.failure = StageFailure{stage, ErrorCode::InvalidState, e.what(), "", ""};
  }
  if (t.failure) spdlog::error("sample {} failed at stage {}: {}", sample_id, t.failure->stage, t.failure->message);
  return t;
}

nlohmann::json to_json(const PipelineTrace& t) {
  nlohmann::json j;
  j["trace_version"] = PipelineTrace::kVersion;
  j["sample_id"] = t.sample_id;
  j["variant"] = std::string(to_string(t.variant));
  j["domain"] = std::string(to_string(t.state.domain));
  j["state"] = to_json(t.state);
  j["dga_model"] = t.dga_model;
  j["r0"] = t.r0;
  j["user_explicit"] = dims_json(t.user_explicit);
  j["system_explicit"] = dims_json(t.system_explicit);
  j["implicit_candidates"] = dims_json(t.implicit_candidates);
  j["dga_logprobs_unavailable"] = t.dga_logprobs_unavailable;
  if (t.pool) {
    j["pool"] = {{"unmet_explicit", dims_json(t.pool->unmet_explicit)},
                 {"implicit_candidates", dims_json(t.pool->implicit_candidates)},
                 {"warnings", t.pool->warnings}};
  } else {
    j["pool"] = nullptr;
  }
  j["selection"] = t.selection ? to_json(*t.selection) : nlohmann::json(nullptr);
  j["forwarded"] = dims_json(t.forwarded);
  j["missed_aspects"] = t.missed_aspects;
  j["final_response"] = t.final_response;
  auto stages = nlohmann::json::array();
  for (const auto& r : t.log.records) {
    nlohmann::json rec = {{"stage", r.stage},
                          {"model", r.model},
                          {"request_id", r.request_id},
                          {"attempts", r.attempts},
                          {"repairs", r.repairs}};
    if (r.duration_ms) rec["duration_ms"] = *r.duration_ms;
    stages.push_back(std::move(rec));
  }
  j["stages"] = std::move(stages);
  j["warnings"] = t.log.warnings;
  if (t.failure) {
    j["failure"] = {{"stage", t.failure->stage},
                    {"code", std::string(to_string(t.failure->code))},
                    {"message", t.failure->message},
                    {"path", t.failure->path},
                    {"raw_text", t.failure->raw_text}};
  } else {
    j["failure"] = nullptr;
  }
  return j;
}

}  // namespace proper
