#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pplqa {

enum class Aspect { coherence, relevance, fluency, consistency, none };

/// qa: "{question}" and "{answer}"; form: the same placeholders, but the
/// prompt asks for an integer 1-5; judge: "{question}" and
/// "{answer_1}".."{answer_N}".
enum class TemplateKind { qa, form, judge };

std::string_view to_string(Aspect aspect) noexcept;
std::string_view to_string(TemplateKind kind) noexcept;
Aspect aspect_from_string(std::string_view text);
TemplateKind template_kind_from_string(std::string_view text);

inline constexpr std::string_view question_placeholder = "{question}";
inline constexpr std::string_view answer_placeholder = "{answer}";
inline constexpr std::size_t max_judge_answers = 9;

struct PromptTemplate {
    std::string name;
    Aspect aspect = Aspect::none;
    TemplateKind kind = TemplateKind::qa;
    std::string body;
    /// Free-form provenance, e.g. "verbatim" or "reconstruction".
    std::string note;

    /// Throws UsageError naming the first missing placeholder for the kind.
    void validate() const;
};

/// Rendered text plus the code-point span of the first answer substitution.
struct RenderedPrompt {
    std::string text;
    std::size_t answer_begin = 0;
    std::size_t answer_end = 0;
};

/// Single-pass substitution: placeholder-like text inside the question or
/// answer is never expanded.
RenderedPrompt render_qa(const PromptTemplate& tmpl, std::string_view question, std::string_view answer);

/// Number of "{answer_k}" placeholders, k = 1, 2, ... without gaps.
std::size_t judge_capacity(const PromptTemplate& tmpl);

/// Renders a judge prompt for answers.size() <= capacity. Lines that refer
/// only to unused answer slots are dropped.
std::string render_judge(const PromptTemplate& tmpl, std::string_view question, std::span<const std::string> answers);

/// Template file: "key: value" header lines (name, aspect, kind), a line
/// holding "---", then the body verbatim (one trailing newline removed).
PromptTemplate parse_template(std::string_view contents);
PromptTemplate load_template_file(const std::filesystem::path& path);
std::string format_template(const PromptTemplate& tmpl);

class TemplateRegistry {
public:
    /// Registry preloaded with the built-in templates.
    static TemplateRegistry with_builtins();

    /// Adds or replaces by name.
    void add(PromptTemplate tmpl);
    /// Loads every *.txt file in `dir`.
    void load_directory(const std::filesystem::path& dir);

    const PromptTemplate* find(std::string_view name) const noexcept;
    /// Throws UsageError for unknown names.
    const PromptTemplate& get(std::string_view name) const;
    const std::vector<PromptTemplate>& all() const noexcept { return templates_; }

private:
    std::vector<PromptTemplate> templates_;
};

const std::vector<PromptTemplate>& builtin_templates();

}  // namespace pplqa
