// Prompt bodies, kept byte-for-byte. Edit with care: cached requests are keyed on them.
#include "prompt_bodies.hpp"

namespace proper::detail {

const char* const kElicitL1 = R"PROMPT(You have been given a detailed description of a coding problem and its solution.
Your task is to generate one realistic user prompt that a beginner programmer might naturally ask GitHub Copilot to generate similar code.

Requirements:
- Natural phrasing that sounds like a real beginner developer.
- Very vague understanding of the problem.
- General intent without clear technical details.
- Concise and Copilot-friendly.

Input:
<problem description>

Output:
A single vague, beginner-level user prompt a programmer would use.)PROMPT";

const char* const kElicitL2 = R"PROMPT(You have been given a detailed description of a coding problem and its solution.
Your task is to generate one realistic user prompt that an intermediate programmer might naturally ask GitHub Copilot to generate similar code.

Requirements:
- Natural phrasing reflecting partial understanding.
- References to basic techniques (e.g., loops, conditionals, functions).
- Some structure, but remaining ambiguity in solution design.
- Clear and concise.

Input:
<problem description>

Output:
A single moderately clear user prompt showing partial understanding of the task.)PROMPT";

const char* const kElicitL3 = R"PROMPT(You have been given a detailed description of a coding problem and its solution.
Your task is to generate one realistic user prompt that an experienced programmer might naturally ask GitHub Copilot to generate similar code.

Requirements:
- Precise, code-focused phrasing.
- Explicit references to relevant data structures, algorithms, or optimizations.
- Highly targeted intent guiding the solution approach.
- Concise and technically specific.

Input:
<problem description>

Output:
A single clear and specific user prompt capturing all relevant solution details.)PROMPT";

const char* const kAnnotateCode = R"PROMPT(You are an expert annotator for programming tasks. Extract latent dimensions from:
(1) User query, (2) Solution code.

Objectives:
- Infer concise, latent aspects grounded in the text.
- Avoid speculation beyond weak, text-supported inference.

User-side axes:
goal intent, user state, expertise level, uncertainty indicators,
constraint awareness, task structure, missing information.

System-side axes:
algorithm pattern, data structures, time and space complexity,
optimization decisions, robustness, constraint handling.

Output format (JSON only):
{
  "user_aspects": [
    {"name": str, "value": str, "justification": str}
  ],
  "solution_aspects": [
    {"name": str, "value": str, "justification": str}
  ]
}
Justifications must cite evidence from the input or be null if implicit.)PROMPT";

const char* const kAnnotateMD = R"PROMPT(You are an expert annotator analyzing clinical question--answer interactions.
Extract both explicit and latent dimensions from:
(1) User medical query, (2) Doctor response.

Objectives:
- Infer concise, latent, and non-trivially stated aspects.
- Avoid speculation beyond weak, text-grounded inference.
- Emphasize medically relevant, domain-specific distinctions.

User-side axes:
clinical goal intent, explicit symptoms and history, latent symptom patterns,
disease-specific indicators, multisystem interactions, risk or red-flag indicators,
constraints, missing information, emotional state, task structure.

System-side axes:
medical reasoning patterns, diagnostic hypotheses, treatment guidance,
risk assessment, uncertainty handling, reassurance strategies, guideline alignment.

Output format (JSON only):
{
  "user_aspects": [
    {"name": str, "value": str, "justification": str}
  ],
  "solution_aspects": [
    {"name": str, "value": str, "justification": str}
  ]
}

Justifications must cite evidence from the input or be null if implicit.)PROMPT";

const char* const kAnnotatePWAB = R"PROMPT(You are an expert annotator analyzing user--system interactions in shopping recommendation tasks.
Extract all the explicitly stated and latent dimensions from:
(1) User persona, (2) User query, (3) Recommended product.

Objectives:
- Infer concise, latent, and non-trivially stated aspects.
- Avoid speculation beyond weak, text-grounded inference.

User-side axes:
goal intent, preference profile, need-state signal, constraint indicators,
missing-information signals, task structure, contextual signals from persona.

System-side axes:
product features, suitability signals, attribute alignment, price signals,
brand alignment, recommendation rationale, risk indicators.

Output format (JSON only):
{
  "user_aspects": [
    {"name": str, "value": str, "justification": str}
  ],
  "solution_aspects": [
    {"name": str, "value": str, "justification": str}
  ]
}

Justifications must cite evidence from the input or be null if implicit.)PROMPT";

const char* const kDgaCode = R"PROMPT(You are an expert coding problem analyst. Your task is to analyze the user's coding query, understand the underlying goal, and identify both the dimensions they have already expressed and the important dimensions they have not yet mentioned.

Think carefully about how coding tasks with similar goals are typically specified and solved. More complete or successful formulations often depend on additional considerations that the current user has not made explicit. Your job is to surface these missing dimensions, not to solve the problem.

You must not repeat or restate any explicit information. You must not provide solutions, advice, code, or guidance. Focus only on identifying the conceptual structure of the problem.

Your output contains two types of dimensions:
---------------------------------------------------
explicit_dimensions
---------------------------------------------------
These are problem-solving dimensions clearly grounded in the user query (e.g., stated goals, constraints, assumptions, or task structure).

Each explicit dimension must include:
  - name: concise conceptual label
  - value: information directly stated or implied in the query
  - justification: why this dimension is relevant to understanding or solving tasks of this type

Extract all explicit dimensions that meaningfully appear in the query.
--------------------------------------------------
missed_dimensions
---------------------------------------------------
These are important considerations that the user has not mentioned but that typically matter when solving similar coding tasks. They should be conceptually diverse and non-redundant.

A missed dimension must:
- not appear in the query,
- not be safely inferable from explicit content,
- not be a generic personal detail (e.g., deadline, experience),
- represent a factor that affects correctness, robustness, efficiency, feasibility, resource use, or clarity.

Each missed dimension must include:
  - name: conceptual label (e.g., edge-case category, constraint type)
  - value: a plausible concrete instance or relevant detail
  - justification: why this dimension matters and how its absence leaves the problem incomplete

You are encouraged to surface out-of-the-box dimensions that a typical user may never think to articulate. These should reveal deeper structural requirements, hidden dependencies, contextual contingencies, or evaluative axes that matter in realistic recommendation scenarios.
Extract as many missed dimensions as possible.

---------------------------------------------------
OUTPUT FORMAT (STRICT)
---------------------------------------------------
Return ONLY:

===START_JSON===
{
  "explicit_dimensions": [
    {"name": "string", "value": "string", "justification":
"string"},
    ...
  ],
  "missed_dimensions": [
    {"name": "string", "value": "string", "justification":
"string"},
    ...
  ]
}
===END_JSON===

Do not output anything outside the JSON markers.

---------------------------------------------------
INPUT
---------------------------------------------------
User_persona: <INSERT_PERSONA>
User_query: <INSERT_USER_QUERY>
Generate the JSON now.)PROMPT";

const char* const kDgaPWAB = R"PROMPT(You are an expert annotator analyzing user's query in personalized shopping and recommendation tasks. Your goal is to examine the user's query, infer their underlying intent, and identify both the dimensions they have explicitly expressed and the important dimensions they have not yet mentioned.

Think carefully about how shopping or preference-seeking tasks are typically formulated. More complete or successful recommendations often depend on additional considerations that the current user has not explicitly articulated. Your role is to surface these missing dimensions, not to solve the user's problem or recommend products.

You must not repeat or restate explicit information.
You must not generate suggestions, advice, or recommendations.
Focus only on identifying the conceptual structure of the user's query.

Your output MUST be valid JSON and nothing else.
You MUST start the JSON with: ===START_JSON===
You MUST end the JSON with: ===END_JSON===

No extra text, no explanations, no markdown, no trailing characters of any kind.

Your output contains two types of dimensions:
---------------------------------------------------
explicit_dimensions
---------------------------------------------------
These are dimensions clearly grounded in the user query (such as stated needs, constraints, preferences, context, or user motivations).

Each explicit dimension must include:
  - name: concise conceptual label
  - value: information directly stated or implied in the query
  - justification: why this dimension is relevant for understanding shopping or preference-oriented tasks

Extract as many  explicit dimensions as possible that meaningfully appear in the query.
---------------------------------------------------
missed_dimensions
---------------------------------------------------
These are important considerations not mentioned by the user but crucial for solving similar shopping or preference tasks. They should be conceptually diverse and non-redundant.

A missed dimension must:
- not appear in the query,
- not be safely inferable from the explicit content,
- not be a generic personal detail (e.g., experience level),
- represent a factor that affects relevance, usefulness, ranking,
  personalization, feasibility, constraints, or decision quality.

Each missed dimension must include:
  - name: conceptual label (e.g., budget constraints, lifecycle needs,product compatibility, preference specificity, situational factors)
  - value: a plausible concrete instance or detail
  - justification: why this dimension matters and how its absence leaves the preference or shopping need underspecified

Extract atleast 10 meaningful missed dimensions.

---------------------------------------------------
OUTPUT FORMAT (STRICT)
---------------------------------------------------
Return ONLY:

===START_JSON===
{
  "explicit_dimensions": [
    {"name": "string", "value": "string", "justification":
 "string"}
  ],
  "missed_dimensions": [
    {"name": "string", "value": "string", "justification":
    "string"}
  ]
}
===END_JSON===

Do not output anything outside the JSON markers.

---------------------------------------------------
INPUT
---------------------------------------------------
user_query: {user_query}

Generate the JSON now.)PROMPT";

const char* const kDgaMD = R"PROMPT(You are an expert clinical reasoning analyst. Your task is to study the patient_query, understand the underlying health concern, and identify both the dimensions the patient has already expressed and the important clinical considerations they have not yet mentioned.

Think carefully about how clinicians typically interpret and structure similar patient presentations. More complete or successful formulations of medical concerns often depend on additional contextual, symptom-based, or risk-related factors that the patient has not stated. Your job is to surface these missing dimensions, not to diagnose or recommend treatment.

You must not repeat or restate any explicit information. You must not provide medical advice. Focus only on exposing the underlying
problem-structure: what is specified, and what remains unspecified.
---------------------------------------------------
1. explicit_dimensions
---------------------------------------------------
These are aspects clearly grounded in the patient's text, such as:
- reported symptoms,
- subjective interpretations of severity,
- concerns or questions,
- contextual details (timeline, triggers),
- emotional or informational states.

Each explicit dimension must include:
  - name: concise clinical or contextual label
  - value: the value directly stated or clearly implied in the patient's text
  - justification: brief explanation of why this dimension is relevant for understanding similar medical presentations

Extract all meaningful explicit dimensions. Do not invent details.

---------------------------------------------------
2. missed_dimensions
---------------------------------------------------
These are important clinical considerations the patient has not mentioned but that clinicians typically explore when evaluating similar symptoms.
They should be conceptually diverse and non-redundant.

A missed dimension must:
- NOT appear in the patient's text,
- NOT be safely inferable,
- NOT be a generic personal detail unrelated to the complaint,
- reflect a clinically relevant factor affecting interpretation of symptoms,
  risk assessment, differential considerations, or need for follow-up.

Useful categories often include:
- missing symptom qualifiers (duration, progression, distribution),
- unreported associated symptoms or red flags,
- gaps in exposure or risk factors,
- missing information about onset, triggers, or patterns,
- relevant medical history elements,
- unasked clarifying questions clinicians typically use to assess severity.

Each missed dimension must include:
  - name: concise conceptual label (e.g., "Associated Symptoms", "Exposure History")
  - value: a plausible clinically relevant instance (e.g., “fever”, “recent contact”,“sudden vs gradual onset”, “immune status”)
  - justification: why this dimension and value matter for interpreting the presentation and how their absence limits understanding

Produce a diverse, non-overlapping set of missed dimensions.

---------------------------------------------------
OUTPUT FORMAT (STRICT)
---------------------------------------------------
Return ONLY:

===START_JSON===
{
  "explicit_dimensions": [
    {"name": "string", "value": "string", "justification":
 "string"},
    ...
  ],
  "missed_dimensions": [
    {"name": "string", "value": "string", "justification":
"string"},
    ...
  ]
}
===END_JSON===

Do not output anything outside the JSON markers.
---------------------------------------------------
INPUT
---------------------------------------------------
patient_query: {patient_query}

Generate the JSON now.)PROMPT";

const char* const kRgaCode = R"PROMPT(You are acting as a proactive coding assistant that reflects on an earlier response from a coding assistant.

Task:
Given a user query, an existing coding assistant response, and a set of missing aspects, generate an updated response that better supports the user by addressing relevant uncertainty and unmet informational needs.

Guiding principle:
The appropriate level of guidance depends on the patient's question.
You must infer how proactive to be from the query itself.

Initiative calibration:
If the query suggests confusion, failure, or blocked progress, expand the response to proactively cover important missing aspects.
If the query is narrow or explicitly limited, keep the response focused and minimally expanded.
If the query is narrow or clearly constrained, keep the response focused and minimally expanded.
If the query reflects frustration or ambiguity, broaden gently while avoiding assumptions about user skill or intent.

Handling missing aspects:
Explicit missing aspects should generally be addressed.
Implicit missing aspects represent possible knowledge gaps and should be included only when appropriate for this query.
If addressing an implicit aspect requires user-specific details, ask at most ONE clarifying question rather than speculating.

Response constraints:
Maintain a supportive, non-authoritative tone.
Avoid condescension, over-specification, or unnecessary implementation detail.
Preserve the original response's structure and intent unless safety or clarity requires change.
Prefer concise additions over complete rewrites.

Output constraints:
You MUST start with: ===START===
You MUST end with: ===END===
Output ONLY the final clinical assistant response.
No explanations,
no markdown, no trailing characters.

User query:
<user_query>

Existing coding assistant response:
<system_output>

Missing aspects (explicit missing + implicit knowledge gaps):
<missed_aspects>)PROMPT";

const char* const kRgaMD = R"PROMPT(You are acting as a clinical assistant that reflects on an existing response to a patient.

Task:
Given a patient query, an existing clinical assistant response, and a set of missing aspects, generate an updated response that better supports the patient by addressing relevant uncertainty and unmet informational needs.

Guiding principle:
The appropriate level of guidance depends on the patient's question.
You must infer how proactive to be from the query itself.

Initiative calibration:
If the query suggests urgency, safety risk, or possible harm, expand the response to proactively cover important missing aspects.
If the query is narrow or explicitly limited, keep the response focused and minimally expanded.
If the query signals uncertainty, curiosity, or lack of clarity, selectively surface helpful missing context.
If the query signals emotional strain or ambiguity, broaden gently while avoiding assumptions or diagnoses.

Handling missing aspects:
Explicit missing aspects should generally be addressed.
Implicit missing aspects represent possible knowledge gaps and should be included only when appropriate for this query.
If addressing an implicit aspect requires patient-specific details, ask at most ONE clarifying question rather than speculating.

Response constraints:
Maintain a supportive, non-authoritative clinical tone.
Avoid diagnosis, definitive medical claims, or alarming language.
Preserve the original response's structure and intent unless safety or clarity requires change.
Prefer concise additions over complete rewritesnd complete rewrites.

Output constraints:
You MUST start with: ===START===
You MUST end with: ===END===
Output ONLY the final clinical assistant response.
No explanations,
no markdown, no trailing characters.

Patient query:
<user_query>
Existing clinical assistant response:
<system_output>
Missing aspects (explicit missing + implicit knowledge gaps):
<missed_aspects>)PROMPT";

const char* const kRgaPWAB = R"PROMPT(You are acting as a proactive recommendation assistant that reflects on an earlier response from a recommendation assistant.

Task:
Given a user query, an existing recommendation assistant response, and a set of missing aspects, generate an updated response that better supports the user by addressing relevant uncertainty and unmet informational needs.

Guiding principle:
The appropriate level of guidance depends on the user's question.
You must infer how proactive to be from the query itself.

Initiative calibration:
If the query suggests indecision, dissatisfaction, or conflicting preferences, expand the response to proactively cover important missing aspects.
If the query is clearly scoped or asks for a specific type of suggestion, keep the response focused and minimally expanded.
If the query signals curiosity, vague goals, or exploratory intent, selectively surface relevant tradeoffs or options.
If the query reflects overwhelm or uncertainty, broaden gently while avoiding assumptions about user preferences or constraints.

Handling missing aspects:
Explicit missing aspects should generally be addressed.
Implicit missing aspects represent possible preference gaps or context needs and should be included only when appropriate for this query.
If addressing an implicit aspect requires user-specific details, ask at most ONE clarifying question rather than speculating.

Response constraints:
Maintain a helpful, user-centered tone.
Avoid prescriptive, one-size-fits-all suggestions or rigid criteria.
Preserve the original response's structure and intent unless personalization or clarity requires change.
Prefer concise additions over complete rewrites.

Output constraints:
You MUST start with: ===START===
You MUST end with: ===END===
Output ONLY the final clinical assistant response.
No explanations,
no markdown, no trailing characters.

User query:
<user_query>

Existing recommendation assistant response:
<system_output>

Missing aspects (explicit missing + implicit knowledge gaps):
<missed_aspects>)PROMPT";

const char* const kJudge = R"PROMPT(You are an expert evaluator of proactive and personalized AI assistants.
Your task is to independently evaluate two assistant responses to a user query with respect to calibrated proactivity and personalization.
You will be given:
- A user query
- Response A
- Response B

You must infer:
- The interaction domain (e.g., medical, shopping, coding, or other)
- The user's explicit needs
- Any important implicit considerations (e.g., risks, uncertainties, missing context, next steps)

Evaluation Principles:
- Evaluate each response independently. Do NOT compare them directly.
- Do NOT assume which response is baseline or proactive.
- Proactivity is not verbosity; it is taking the right amount of initiative given the user's intent and inferred domain.
- Penalize overreach (irrelevant warnings, excessive assumptions, unnecessary steps).
- Penalize underreach (ignoring important needs, risks, or uncertainties).

Score each response holistically on a 0--5 scale considering:
1. How well it addresses the user's stated intent
2. How well it anticipates and handles unspoken but relevant needs
3. Appropriateness of initiative for the inferred domain
4. Personalization and contextual relevance
5. Clarity, tone, and overall usefulness
6. Missed opportunities or unnecessary intervention

Scoring Scale:
0 -- Very poor
1 -- Poor
2 -- Weak
3 -- Moderate
4 -- Good
5 -- Excellent

Output Requirements:
- Output MUST be valid JSON ONLY.
- Do NOT include explanations outside the JSON.
- Do NOT add extra fields.
- Justifications must be a single concise line each.

Respond ONLY in the following format:

{
  "response_A_score": <integer 0--5>,
  "response_B_score": <integer 0--5>,
  "response_A_justification": "<single concise line>",
  "response_B_justification": "<single concise line>"
}

User Query:
<INSERT USER QUERY HERE>
Response A:
<INSERT RESPONSE A HERE>
Response B:
<INSERT RESPONSE B HERE>)PROMPT";

const char* const kCotExtract = R"PROMPT(You are an expert annotator analyzing clinical question--answer interactions.

Task:
Given a medical user query and an existing clinical assistant response,
extract medically relevant aspects that were:
(a) explicitly requested but not adequately addressed, and/or
(b) implicitly relevant but reasonably missing given the query.

Rules:
-- Do NOT invent facts.
-- Infer latent aspects only when weakly but text-grounded.
-- Do NOT judge style or tone---focus only on medical/technical content.
-- Output structured aspects only.

Inputs
query: <INSERT_USER_QUERY>
solution: <INSERT_EXISTING_RESPONSE>

Aspect definition
aspect = {
  "name": string,
  "value": string,
  "justification": string
}

-- justification must quote a verbatim substring from the input,
  or "null" if the aspect is implicit.

Canonical aspect types (preferred, but not limited to)

User aspects:
-- clinical_goal_intent
-- explicit_symptom
-- explicit_history
-- latent_symptom_pattern
-- disease_specific_indicator
-- multisystem_interaction
-- risk_indicator
-- constraint_indicator
-- missing_information
-- treatment_history_signal
-- emotional_state
-- task_structure

System (response) aspects:
-- medical_reasoning_pattern
-- disease_specific_assessment
-- explicit_guidance
-- treatment_guidance
-- safety_statement
-- diagnostic_hypothesis
-- risk_assessment
-- uncertainty_handling
-- reassurance_strategy
-- information_gap_response
-- guideline_alignment
-- correctness_risk

Output schema (JSON ONLY)
{
  "user_aspects": [
    {"name": str, "value": str, "justification": str}
  ],
  "solution_aspects": [
    {"name": str, "value": str, "justification": str}
  ]
}

Constraints:
-- Produce as many distinct, medically meaningful aspects as supported.
-- Remove duplicates.
-- No markdown, no explanation, JSON only.)PROMPT";

const char* const kCotRefine = R"PROMPT(You are acting as a clinical assistant reflecting on an existing response
to a patient.

Task:
Given:
1) a patient query,
2) an existing clinical assistant response,
3) a list of missing aspects (explicit + implicit),

generate an updated response that better supports the patient by addressing
relevant uncertainty and unmet informational needs.

Guiding principle:
Calibrate initiative based on the patient's query.

Initiative calibration:
-- If the query suggests urgency, safety risk, or possible harm,
  proactively address critical missing aspects.
-- If the query is narrow or explicitly limited,
  keep the response focused and minimally expanded.
-- If the query signals uncertainty or curiosity,
  selectively surface helpful missing context.
-- If the query signals emotional strain or ambiguity,
  broaden gently without assumptions or diagnoses.

Handling missing aspects:
-- Explicit missing aspects → generally address.
-- Implicit missing aspects → include only if appropriate.
-- If an implicit aspect requires patient-specific info,
  ask AT MOST ONE clarifying question.

Response constraints:
-- Supportive, non-authoritative clinical tone.
-- No diagnosis, no definitive medical claims.
-- Avoid alarming language.
-- Preserve original structure and intent unless safety requires change.
-- Prefer concise additions over full rewrites.

Output constraints:
-- MUST start with: ===START===
-- MUST end with: ===END===
-- Output ONLY the final clinical assistant response.
-- No explanations, no markdown, no extra text.

Inputs:
Patient query:
<user_query>

Existing clinical assistant response:
<system_output>

Missing aspects:
<missed_aspects>)PROMPT";

}  // namespace proper::detail
