#include "scr/prompts.hpp"

#include <filesystem>

#include "scr/io.hpp"

namespace scr {

namespace detail {
// Defined in the generated prompts_data.cpp.
std::string_view embedded_prompt(std::string_view name);
}  // namespace detail

namespace {

std::string strip_final_newline(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

template <typename Fn>
void for_each_field(PromptTemplates& p, Fn&& fn) {
  fn("scr_system", p.scr_system);
  fn("sampler_system", p.sampler_system);
  fn("critique_system", p.critique_system);
  fn("critique_user", p.critique_user);
  fn("refine_system", p.refine_system);
  fn("refine_user", p.refine_user);
  fn("replace_system", p.replace_system);
  fn("replace_user", p.replace_user);
  fn("operator_counter", p.operator_counter);
  fn("answer_trajectory", p.answer_trajectory);
}

}  // namespace

const PromptTemplates& builtin_prompts() {
  static const PromptTemplates prompts = [] {
    PromptTemplates p;
    for_each_field(p, [](std::string_view name, std::string& slot) {
      slot = strip_final_newline(std::string(detail::embedded_prompt(name)));
    });
    return p;
  }();
  return prompts;
}

PromptTemplates load_prompts(const std::string& dir) {
  PromptTemplates p = builtin_prompts();
  for_each_field(p, [&](std::string_view name, std::string& slot) {
    const auto path = std::filesystem::path(dir) / (std::string(name) + ".txt");
    if (std::filesystem::exists(path)) slot = strip_final_newline(read_file(path.string()));
  });
  return p;
}

std::string fill_template(
    std::string_view tmpl,
    std::initializer_list<std::pair<std::string_view, std::string_view>> values) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const std::size_t close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        const std::string_view key = tmpl.substr(i + 1, close - i - 1);
        bool replaced = false;
        for (const auto& [name, value] : values) {
          if (name == key) {
            out += value;
            replaced = true;
            break;
          }
        }
        if (replaced) {
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

}  // namespace scr
