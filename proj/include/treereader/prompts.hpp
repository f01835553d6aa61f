#pragma once

// Built-in prompt templates. templates/leaf_prompt.txt and
// templates/section_prompt.txt hold the same bytes.

#include <string_view>

namespace treereader::prompts {

inline constexpr std::string_view leaf_template = R"TPL(Here is an abstract of a scientific paper and a specific paragraph
  from the same paper. Please read both and then summarize the
  paragraph in the context of the abstract.
<Abstract>
{abstract}
</Abstract>
<Paragraph>
{node.content}
</Paragraph>
<Requirement>
You are required to output a summary of the paragraph in the format
  of 2~5 key points. The key points should not be more than 70 words
  in total. The key points should summary the original content
  comprehensively.

Return your summary in with a JSON with a single key "points", whose
  value is a list with 2~5 JSON objects with the following keys:
"point" (str): A key point of the paragraph. The key point should be
  a complete sentence stating an important facts.
"evidence" (str): A copy of the original text that support the point.
</Requirement>
)TPL";

inline constexpr std::string_view section_template = R"TPL(Here is an abstract of a scientific paper and the key points of the
  sub-sections and paragraphs of a section from the same paper. Please
  read both and then summarize the section in the context of the abstract.
<Abstract>
{abstract}
</Abstract>
<Section>
{node.content}
</Section>
<Requirement>
You are required to output a summary of the section in the format
  of 2~5 key points. The key points should not be more than 70 words
  in total. The key points should summary the content of the section
  comprehensively.

Return your summary in with a JSON with a single key "points", whose
  value is a list with 2~5 JSON objects with the following keys:
"point" (str): A key point of the section. The key point should be
  a complete sentence stating an important facts.
"evidence" (str): A copy of the key point text in the section content that support the point.
</Requirement>
)TPL";

} // namespace treereader::prompts
