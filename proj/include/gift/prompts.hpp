// Prompt templates shipped in prompts/ and compiled into the binary.
#pragma once

#include <string_view>

namespace gift::prompts {

std::string_view stage2_bdd();
std::string_view stage2_celeba();
// Change-caption summarization; {EVIDENCE} receives the direction blocks.
std::string_view stage3();
// Independent-caption ablation; {DESCRIPTIONS_0} / {DESCRIPTIONS_1}.
std::string_view stage3_independent();

}  // namespace gift::prompts
