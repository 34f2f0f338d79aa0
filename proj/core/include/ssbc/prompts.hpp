#pragma once

#include <map>
#include <string>
#include <string_view>

namespace ssbc::prompts {

/// System prompt given to the support agent in both conversation modes.
std::string_view support_agent_system();

/// Instruction block for post segmentation; the post body is appended.
std::string_view shard_extraction();

/// Distress severity template with {{ codebook }}, {{ post_title }} and
/// {{ post_text }} placeholders.
std::string_view distress_classification();

/// Default severity rubric substituted for {{ codebook }} in the distress
/// template. Configurable at pipeline level.
std::string_view distress_rubric();

/// Annotation template with {{ codebook }}, {{ user_message }} and
/// {{ message_to_annotate }} placeholders.
std::string_view ssbc_annotation();

/// Full SSBC codebook text, including the Access category.
std::string_view ssbc_codebook();

/// Replaces every "{{ name }}" / "{{name}}" occurrence with values.at(name).
/// Unknown placeholders are left in place.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values);

}  // namespace ssbc::prompts
