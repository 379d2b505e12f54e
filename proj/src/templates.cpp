#include "pplqa/templates.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "pplqa/error.hpp"
#include "pplqa/text.hpp"

namespace pplqa {
namespace {

std::string answer_slot(std::size_t k) { return fmt::format("{{answer_{}}}", k); }

bool contains(std::string_view body, std::string_view needle) { return body.find(needle) != std::string_view::npos; }

// Recognises a placeholder at body[pos]; returns its length and the index
// of the value it stands for (0 = question, 1.. = answer slots, with the
// bare "{answer}" mapped to slot 1).
struct Placeholder {
    std::size_t length = 0;
    std::size_t slot = 0;
};

std::optional<Placeholder> placeholder_at(std::string_view body, std::size_t pos) {
    const auto rest = body.substr(pos);
    if (rest.starts_with(question_placeholder)) return Placeholder{question_placeholder.size(), 0};
    if (rest.starts_with(answer_placeholder)) return Placeholder{answer_placeholder.size(), 1};
    constexpr std::string_view prefix = "{answer_";
    if (!rest.starts_with(prefix)) return std::nullopt;
    std::size_t i = prefix.size();
    std::size_t slot = 0;
    while (i < rest.size() && rest[i] >= '0' && rest[i] <= '9') {
        slot = slot * 10 + static_cast<std::size_t>(rest[i] - '0');
        ++i;
    }
    if (i == prefix.size() || i >= rest.size() || rest[i] != '}' || slot == 0) return std::nullopt;
    return Placeholder{i + 1, slot};
}

struct Substitution {
    std::string text;
    // code-point span of each slot's first substitution
    std::vector<std::pair<std::size_t, std::size_t>> spans;
};

Substitution substitute(std::string_view body, std::span<const std::string_view> values) {
    Substitution out;
    out.spans.assign(values.size(), {std::string::npos, std::string::npos});
    std::size_t code_points = 0;
    std::size_t pos = 0;
    while (pos < body.size()) {
        if (body[pos] == '{') {
            if (const auto ph = placeholder_at(body, pos); ph && ph->slot < values.size()) {
                const auto value = values[ph->slot];
                const auto length = utf8_length(value);
                if (out.spans[ph->slot].first == std::string::npos) {
                    out.spans[ph->slot] = {code_points, code_points + length};
                }
                out.text.append(value);
                code_points += length;
                pos += ph->length;
                continue;
            }
        }
        out.text.push_back(body[pos]);
        if ((static_cast<unsigned char>(body[pos]) & 0xC0) != 0x80) ++code_points;
        ++pos;
    }
    return out;
}

std::vector<PromptTemplate> make_builtins() {
    constexpr std::string_view dialogue_prefix =
        "Answer the question based on the conversation between a human and AI. Question: ";
    constexpr std::string_view dialogue_suffix = " (a) Yes. (b) No. Conversation: human:{question} AI: {answer}";
    auto dialogue = [&](std::string name, Aspect aspect, std::string_view question, std::string note) {
        return PromptTemplate{std::move(name), aspect, TemplateKind::qa,
                              fmt::format("{}{}{}", dialogue_prefix, question, dialogue_suffix), std::move(note)};
    };
    auto form = [](std::string name, Aspect aspect, std::string_view criterion) {
        return PromptTemplate{
            std::move(name), aspect, TemplateKind::form,
            fmt::format("You will be given a question and an answer written by an AI assistant.\n"
                        "Rate the answer on one metric.\n\n"
                        "Evaluation criterion:\n{}\n\n"
                        "Evaluation steps:\n"
                        "1. Read the question and the answer carefully.\n"
                        "2. Judge the answer against the criterion.\n"
                        "3. Assign a score from 1 (worst) to 5 (best).\n\n"
                        "Question: {{question}}\n\nAnswer: {{answer}}\n\n"
                        "Reply with the score only.\nScore:",
                        criterion),
            "reconstruction"};
    };
    return {
        dialogue("coherence", Aspect::coherence,
                 "Is the AI coherent and maintains a good conversation flow throughout the conversation?",
                 "verbatim"),
        dialogue("relevance", Aspect::relevance, "Are the responses of the AI relevant to the conversation?",
                 "reconstruction"),
        dialogue("fluency", Aspect::fluency, "Is the response of the AI fluent throughout the conversation?",
                 "reconstruction"),
        dialogue("consistency", Aspect::consistency,
                 "Are the responses of the AI consistent in the information they provide throughout the "
                 "conversation?",
                 "reconstruction"),
        form("geval_coherence", Aspect::coherence,
             "Coherence (1-5) - the answer is well structured and well organized, and builds a coherent body of "
             "information."),
        form("geval_relevance", Aspect::relevance,
             "Relevance (1-5) - the answer addresses the question and contains no unrelated information."),
        form("geval_fluency", Aspect::fluency,
             "Fluency (1-5) - the answer is well written, grammatical and easy to read."),
        form("geval_consistency", Aspect::consistency,
             "Consistency (1-5) - the answer does not contradict itself or the question."),
        PromptTemplate{"judge_4", Aspect::none, TemplateKind::judge,
                       "Human: Rank the following 4 Answers based on the Question. The response should contain "
                       "the answers in ranked order from best to worst.\n"
                       "Question: {question}\n"
                       "Answer 1: '{answer_1}'\n"
                       "Answer 2: '{answer_2}'\n"
                       "Answer 3: '{answer_3}'\n"
                       "Answer 4: '{answer_4}'\n"
                       "Assistant:",
                       "verbatim"},
    };
}

}  // namespace

std::string_view to_string(Aspect aspect) noexcept {
    switch (aspect) {
        case Aspect::coherence: return "coherence";
        case Aspect::relevance: return "relevance";
        case Aspect::fluency: return "fluency";
        case Aspect::consistency: return "consistency";
        case Aspect::none: return "none";
    }
    return "none";
}

std::string_view to_string(TemplateKind kind) noexcept {
    switch (kind) {
        case TemplateKind::qa: return "qa";
        case TemplateKind::form: return "form";
        case TemplateKind::judge: return "judge";
    }
    return "qa";
}

Aspect aspect_from_string(std::string_view text) {
    for (auto a : {Aspect::coherence, Aspect::relevance, Aspect::fluency, Aspect::consistency, Aspect::none}) {
        if (to_string(a) == text) return a;
    }
    throw UsageError(fmt::format("unknown aspect '{}'", text));
}

TemplateKind template_kind_from_string(std::string_view text) {
    for (auto k : {TemplateKind::qa, TemplateKind::form, TemplateKind::judge}) {
        if (to_string(k) == text) return k;
    }
    throw UsageError(fmt::format("unknown template kind '{}'", text));
}

void PromptTemplate::validate() const {
    if (!contains(body, question_placeholder)) {
        throw UsageError(fmt::format("template '{}' is missing placeholder {}", name, question_placeholder));
    }
    if (kind == TemplateKind::judge) {
        if (judge_capacity(*this) < 2) {
            throw UsageError(fmt::format("judge template '{}' is missing placeholder {}", name,
                                         answer_slot(judge_capacity(*this) + 1)));
        }
    } else if (!contains(body, answer_placeholder)) {
        throw UsageError(fmt::format("template '{}' is missing placeholder {}", name, answer_placeholder));
    }
}

RenderedPrompt render_qa(const PromptTemplate& tmpl, std::string_view question, std::string_view answer) {
    tmpl.validate();
    if (tmpl.kind == TemplateKind::judge) {
        throw UsageError(fmt::format("template '{}' is a judge template", tmpl.name));
    }
    const std::string_view values[] = {question, answer};
    auto sub = substitute(tmpl.body, values);
    return {std::move(sub.text), sub.spans[1].first, sub.spans[1].second};
}

std::size_t judge_capacity(const PromptTemplate& tmpl) {
    std::size_t k = 0;
    while (k < max_judge_answers && contains(tmpl.body, answer_slot(k + 1))) ++k;
    return k;
}

std::string render_judge(const PromptTemplate& tmpl, std::string_view question, std::span<const std::string> answers) {
    if (tmpl.kind != TemplateKind::judge) {
        throw UsageError(fmt::format("template '{}' is not a judge template", tmpl.name));
    }
    tmpl.validate();
    const auto capacity = judge_capacity(tmpl);
    if (answers.size() < 2 || answers.size() > capacity) {
        throw UsageError(fmt::format("judge template '{}' ranks 2..{} answers, got {}", tmpl.name, capacity,
                                     answers.size()));
    }
    std::string body;
    for (const auto& line : split(tmpl.body, '\n')) {
        bool unused_slot = false;
        for (std::size_t k = answers.size() + 1; k <= capacity; ++k) unused_slot |= contains(line, answer_slot(k));
        if (unused_slot) continue;
        if (!body.empty()) body.push_back('\n');
        body += line;
    }
    std::vector<std::string_view> values{question};
    for (const auto& a : answers) values.emplace_back(a);
    return substitute(body, values).text;
}

PromptTemplate parse_template(std::string_view contents) {
    PromptTemplate tmpl;
    bool saw_name = false;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (true) {
        if (pos >= contents.size()) throw UsageError("template file has no '---' line before the body");
        const auto end = contents.find('\n', pos);
        const auto line = trim(contents.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
        pos = end == std::string_view::npos ? contents.size() : end + 1;
        ++line_no;
        if (line == "---") break;
        if (line.empty() || line.front() == '#') continue;
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) {
            throw UsageError(fmt::format("template header line {}: expected 'key: value'", line_no));
        }
        const auto key = trim(line.substr(0, colon));
        const auto value = std::string(trim(line.substr(colon + 1)));
        if (key == "name") {
            tmpl.name = value;
            saw_name = true;
        } else if (key == "aspect") {
            tmpl.aspect = aspect_from_string(value);
        } else if (key == "kind") {
            tmpl.kind = template_kind_from_string(value);
        } else if (key == "note") {
            tmpl.note = value;
        } else {
            throw UsageError(fmt::format("template header line {}: unknown key '{}'", line_no, key));
        }
    }
    if (!saw_name || tmpl.name.empty()) throw UsageError("template header is missing 'name'");
    std::string_view body = contents.substr(pos);
    if (body.ends_with('\n')) body.remove_suffix(1);
    tmpl.body = std::string(body);
    tmpl.validate();
    return tmpl;
}

PromptTemplate load_template_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError(fmt::format("cannot read template file {}", path.string()));
    std::ostringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse_template(buffer.str());
    } catch (const Error& e) {
        rethrow_with_context(e, path.string());
    }
}

std::string format_template(const PromptTemplate& tmpl) {
    std::string out = fmt::format("name: {}\naspect: {}\nkind: {}\n", tmpl.name, to_string(tmpl.aspect),
                                  to_string(tmpl.kind));
    if (!tmpl.note.empty()) out += fmt::format("note: {}\n", tmpl.note);
    out += "---\n";
    out += tmpl.body;
    out += '\n';
    return out;
}

const std::vector<PromptTemplate>& builtin_templates() {
    static const std::vector<PromptTemplate> templates = make_builtins();
    return templates;
}

TemplateRegistry TemplateRegistry::with_builtins() {
    TemplateRegistry registry;
    for (const auto& t : builtin_templates()) registry.add(t);
    return registry;
}

void TemplateRegistry::add(PromptTemplate tmpl) {
    tmpl.validate();
    const auto it = std::find_if(templates_.begin(), templates_.end(),
                                 [&](const PromptTemplate& t) { return t.name == tmpl.name; });
    if (it != templates_.end()) {
        *it = std::move(tmpl);
    } else {
        templates_.push_back(std::move(tmpl));
    }
}

void TemplateRegistry::load_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw UsageError(fmt::format("template directory {} does not exist", dir.string()));
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) add(load_template_file(f));
}

const PromptTemplate* TemplateRegistry::find(std::string_view name) const noexcept {
    const auto it =
        std::find_if(templates_.begin(), templates_.end(), [&](const PromptTemplate& t) { return t.name == name; });
    return it == templates_.end() ? nullptr : &*it;
}

const PromptTemplate& TemplateRegistry::get(std::string_view name) const {
    if (const auto* t = find(name)) return *t;
    throw UsageError(fmt::format("unknown template '{}'", name));
}

}  // namespace pplqa
