#include "ssbc/prompts.hpp"

#include <cctype>

namespace ssbc::prompts {

namespace {

constexpr std::string_view kSupportAgentSystem =
    R"(- You are a compassionate and supportive conversational assistant.
- Your goal is to engage with the user in a warm, empathetic manner.
- Listen actively, validate their feelings, and offer gentle encouragement.
- Keep your replies concise and natural.
- Do not diagnose or prescribe; if the user appears to be in crisis, gently encourage them to reach out to a professional or a helpline.)";

constexpr std::string_view kShardExtraction =
    R"(You are an AI assistant whose task is to segment Reddit posts into messages that will be sent to an AI chatbot.

Each message must give the AI a substantial "hook" to respond to. A "hook" must include at least one of:
- A complaint/problem
- Conflict
- Action taken
- Emotion
- Question
- Request for advice

If a fragment lacks a hook, merge it with an adjacent sentence that provides one. If a candidate segment does not include one of these elements, merge it with an adjacent segment until it does.

DO NOT add, remove, or change any words inside the message text. Each message must be an exact verbatim substring from the post (copy/paste only).

DO NOT include any Reddit-post artifacts:
- Any text that comes after a post update (e.g., "Edit:", "Update:", "---", etc.)
- Greetings
- Communal references: meaning any text addressed to the community/audience
  - Examples: "Hello guys," "Anyone else...," "What would/did you do...," "Has anyone...," "Do any of you...", "Dads I need help!"

Remove communal references even if they contain a question/hook; do not keep them to satisfy the hook requirement.

If removal leaves a fragment without a hook, merge it with adjacent non-communal text until it has a hook.

Output the segmented messages as a JSON array of strings. Output ONLY the JSON array, nothing else.)";

constexpr std::string_view kDistressClassification =
    R"(Instruction: You are an exceptional assistant whose task is to carefully read social media posts and assess their psychological / emotional distress severity level. You are to abide by the following instructions, provide reasoning for your classification, and reflect on your confidence level.

---

# Response Format

You MUST end your response with EXACTLY this format - no variations allowed:

First, provide your reasoning in these sections:
- Severity reasoning
- Confidence reasoning

Then END with this EXACT line:

Final answer: {"severity": "<value>", "confidence": "<value>"}

Only possible values for severity:
- None
- Mild
- Moderate+

Only possible values for confidence:
- High
- Low

Remember, you must end your response with a JSON.

---

# Instructions

{{ codebook }}

---

# Post

The post you are to classify is as follows:

Title: {{ post_title }}

Post: {{ post_text }}

---)";

constexpr std::string_view kDistressRubric =
    R"(Rate the user's overall psychological / emotional distress as expressed up to the end of the text.

- None: no signs of distress. The user is neutral, curious, practical or positive; any problem mentioned is routine and does not appear to weigh on them emotionally.
- Mild: some distress is present. The user reports worry, frustration, sadness, stress or uncertainty, but appears to be coping and functioning; the distress is situational and limited in intensity.
- Moderate+: substantial distress. The user describes intense or persistent negative emotions, feeling overwhelmed, hopeless, unsafe or unable to cope, significant impairment in daily life, or any mention of self-harm, harm to others, abuse or crisis.

Judge only what the user has disclosed so far. Do not infer distress that is not expressed. When torn between two levels, choose the lower level and report Low confidence.)";

constexpr std::string_view kSsbcAnnotation =
    R"(You are an exceptional assistant tasked with annotating a response to a user who is seeking support by using the codebook below and providing reasoning for your annotations. Each message may contain between zero and three support types. If multiple support types are present, select only the most prominent or primary ones (up to three), prioritizing those that are most central to the speaker's intent rather than minor or incidental elements. Before giving your final answer, provide a brief summary of your thought process.

Your answer should look like this:

<Your thought process here, going through EVERY category to determine fit>

Final answer: ["...", "...", "..."]

---

# Social Support Behavioral Code Annotation Codebook

{{ codebook }}

---

## User message

{{ user_message }}

## Message to annotate

{{ message_to_annotate }})";

constexpr std::string_view kSsbcCodebook =
    R"(## Emotional support

### Sympathy
Sympathy is the explicit expression of sorrow or regret for the recipient's situation or distress. This support is often perceived as an external recognition of someone's troubles without a full understanding of their emotional experience.

Examples:
1. "I'm really sorry to hear that you're feeling this way."
2. "That sounds incredibly tough, I can't imagine how difficult this must be for you."
3. "I can see how much this is affecting you, and it hurts to know you're dealing with this."

### Empathy
Empathy is defined as either: (a) explicitly labeling emotions experienced by the recipient and conveying them in a way that establishes empathic rapport, (b) demonstrating a cognitive understanding of the recipient's feelings and experiences, often inferred from their disclosure, or (c) probing gently and specifically into the recipient's unstated feelings or experiences, showing active interest and understanding.

Examples:
1. "I feel deeply sad thinking about what you're going through - it's such a heavy burden to carry."
2. "This situation must feel incredibly overwhelming for you, especially since it seems like there's so much out of your control."
3. "Are you feeling scared and alone as this is happening? It sounds so isolating."

Exclusion criteria: Avoids explicitly labeling emotions or resorts to vague reassurances (e.g., "Everything will be okay."), mentions understanding without specifying inferred emotions or experiences (e.g., "I understand how you feel"), or simply a generic query without any mention of the recipient's feelings (e.g., "What happened?").

### Encouragement
Encouragement is the explicit expression meaning to provide the recipient with hope and confidence. Messages of this category are future-oriented and generally seek to empower and motivate the recipient.

Examples:
1. "You've overcome so much already; you have what it takes to handle this too."
2. "Take small steps and go from there."
3. "Keep going - you're making progress, even if it doesn't feel like it right now."

## Esteem support

### Compliment
Compliments are explicit mentions of praise speaking highly of the recipient's own characteristics or conduct.

Examples:
1. "You are worthy and deserving of love and respect."
2. "Your commitment to resolve your issues speaks volumes about your strength!"
3. "You've shown incredible courage by being honest about who you are and reaching out for help."

### Validation
Validation provides explicit agreement with the views, perspective, or conduct stated by the recipient. Such messages are oriented around the present, accepting the recipient's current feelings and thoughts without judgment.

Examples:
1. "You're trying your best. I don't think there's much more you can do."
2. "Don't force it. If you don't want to go to a support group, don't go. Your feelings are valid."
3. "It's okay to take some distance from your partner as you propose; you're doing the right thing!"

### Relief of blame
Relief of Blame explicitly aims to counteract the recipient's negative feelings, such as guilt or self-blame. Such messages are oriented around the past, alleviating any self-criticism of the recipient's past actions.

Examples:
1. "Everyone makes mistakes. This doesn't define you."
2. "It's completely understandable to feel apprehensive about diving into new relationships after your past experiences."
3. "It's not your fault. Many people in similar situations would react the same."

## Informational support

### Advice
Advice provides actionable ideas or suggestions for what the recipient ought to do to better their situation. However, they should be able to independently carry out such actions.

Examples:
1. "Try writing in a journal - it'll help reorganizing your thoughts."
2. "Take a moment to reflect on what you're grateful for."
3. "It's really important to communicate openly with your healthcare provider about your experiences and feelings."

Exclusion criteria: Messages that encourage obtaining help from other individuals, groups, or institutions (such as therapy or a doctor) are not covered by this category, but covered by "Referral."

### Situational appraisal
Situational Appraisal reassesses or redefines the situation the recipient is going through. This kind of social support is when the provider encourages the recipient to take a step back to evaluate their circumstances with a clearer or more objective perspective.

Examples:
1. "It's natural to feel stuck sometimes; it doesn't mean you're not making progress. It just means you're in a moment of reflection before your next step."
2. "Most people have the goal in life to be happy but when you think about it, no one is happy 100% of the time."
3. "It might help to view it as part of a larger journey rather than an isolated event."

### Teaching
Teaching provides the recipient with detailed objective facts or news about their situation or about the skills needed to deal with it.

Examples:
1. "One way to approach goal setting is by using the SMART method: Specific, Measurable, Achievable, Relevant, and Time-bound."
2. "Emotional abuse can manifest in many forms, but it generally involves..."
3. "It's certainly true that a lot of trans people start out with unusual baseline hormone levels..."

### Referral
Referral refers the recipient to other sources of information or help, usually providing links or institutions for further assistance. This kind of social support emphasizes obtaining help beyond the provider's scope.

Examples:
1. "That place might be a better place for those questions."
2. "I don't know if you have seen it: <URL> includes a number of small things that could be used regularly for motivation."
3. "Have you considered therapy?"

Exclusion criteria: The message should not directly connect the recipient with community or networks, but rather point the recipient to external resources they can pursue themselves. Messages that do so are covered by "Access."

## Network support

### Companions
Companions remind the recipient that there are others who share similar experiences and are available, without directly extending the recipient's network.

Examples:
1. "If you haven't tried already, consider joining a support group specifically for male survivors - there's strength in shared experiences."
2. "Connecting with local LGBTQ+ groups can be a great way to meet people who understand what you're going through."
3. "Engaging in supportive online communities, where you can discuss your feelings without fear of judgment, can also provide a sense of connection."

### Access
Access directly provides the recipient with direct access to new people. The emphasis is on extending the recipient's network to discover new sources of support beyond the immediate interaction.

Examples:
1. "Join us over at <community> if you haven't already."
2. "The community <community> might additionally be a place of support, it is possible to ask for a mentor."
3. "There are also a few Discord channels and it may be possible to meet a few like minded people there."

### Presence
Presence social support directly and personally offers to be there for the recipient. It centers on the provider's direct availability to the recipient, offering to engage with them personally or to serve as a source of support.

Examples:
1. "Exact same issue. Send me a message."
2. "I am so very sorry for your loss and if I can answer anything for you, please feel free to reach out."
3. "If you ever need an ear, please reach out to us. We got you.")";

}  // namespace

std::string_view support_agent_system() { return kSupportAgentSystem; }
std::string_view shard_extraction() { return kShardExtraction; }
std::string_view distress_classification() { return kDistressClassification; }
std::string_view distress_rubric() { return kDistressRubric; }
std::string_view ssbc_annotation() { return kSsbcAnnotation; }
std::string_view ssbc_codebook() { return kSsbcCodebook; }

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    auto name = tmpl.substr(open + 2, close - open - 2);
    while (!name.empty() && std::isspace(static_cast<unsigned char>(name.front()))) name.remove_prefix(1);
    while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back()))) name.remove_suffix(1);
    out.append(tmpl.substr(pos, open - pos));
    if (auto it = values.find(std::string(name)); it != values.end()) {
      out.append(it->second);
    } else {
      out.append(tmpl.substr(open, close + 2 - open));
    }
    pos = close + 2;
  }
  out.append(tmpl.substr(pos));
  return out;
}

}  // namespace ssbc::prompts
