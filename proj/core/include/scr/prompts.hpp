#pragma once

#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>

namespace scr {

// Prompt texts shipped in core/prompts/. User templates use {question},
// {answer} and {evaluation} placeholders.
struct PromptTemplates {
  std::string scr_system;         // policy prompt for tagged trajectories
  std::string sampler_system;     // plain candidate solutions
  std::string critique_system;
  std::string critique_user;
  std::string refine_system;
  std::string refine_user;
  std::string replace_system;
  std::string replace_user;
  std::string operator_counter;   // annotator: operator counts
  std::string answer_trajectory;  // annotator: answer-level states
};

const PromptTemplates& builtin_prompts();

// Builtins overridden by "<name>.txt" files present in `dir`.
PromptTemplates load_prompts(const std::string& dir);

// Single left-to-right substitution; inserted values are not rescanned.
std::string fill_template(
    std::string_view tmpl,
    std::initializer_list<std::pair<std::string_view, std::string_view>> values);

}  // namespace scr
