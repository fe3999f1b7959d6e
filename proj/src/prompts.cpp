#include "evoloop/prompts.hpp"

#include "builtin_templates.hpp"
#include "evoloop/error.hpp"
#include "evoloop/text.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace evoloop {

std::vector<std::string> TaskSpec::effective_requirements() const {
    if (!requirements.empty()) return requirements;
    return {description};
}

void validate(const TaskSpec& task) {
    if (text::trim(task.description).empty())
        throw Error(ErrorCode::config_error, "task description is empty");
}

namespace {

bool ident_start(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }

/// Length of the placeholder token starting at s[pos] ('{'), or 0.
std::size_t token_length(std::string_view s, std::size_t pos) {
    if (s[pos] != '{' || pos + 1 >= s.size() || !ident_start(s[pos + 1])) return 0;
    std::size_t i = pos + 2;
    while (i < s.size() && ident_char(s[i])) ++i;
    if (i < s.size() && s[i] == '}') return i - pos + 1;
    return 0;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

std::set<std::string> placeholders_in(std::string_view text) {
    std::set<std::string> out;
    for (std::size_t i = 0; i < text.size(); ++i)
        if (auto n = token_length(text, i)) {
            out.emplace(text.substr(i + 1, n - 2));
            i += n - 1;
        }
    return out;
}

PromptLibrary PromptLibrary::builtin() {
    PromptLibrary lib;
    for (const auto& [id, body] : detail::builtin_template_texts())
        lib.set(PromptTemplate{std::string(id), {}, std::string(body)});
    return lib;
}

PromptLibrary PromptLibrary::from_directory(const std::filesystem::path& dir) {
    auto lib = builtin();
    for (const auto& id : lib.ids()) {
        auto body_path = dir / (id + ".txt");
        auto system_path = dir / (id + ".system.txt");
        PromptTemplate tpl = lib.get(id);
        if (std::filesystem::exists(body_path)) tpl.body = read_file(body_path);
        if (std::filesystem::exists(system_path)) tpl.system_text = read_file(system_path);
        lib.set(std::move(tpl));
    }
    return lib;
}

const PromptTemplate& PromptLibrary::get(std::string_view id) const {
    auto it = templates_.find(id);
    if (it == templates_.end()) throw Error(ErrorCode::unknown_template, "unknown template: " + std::string(id));
    return it->second;
}

std::vector<std::string> PromptLibrary::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, tpl] : templates_) out.push_back(id);
    return out;
}

void PromptLibrary::set(PromptTemplate tpl) {
    auto id = tpl.id;
    templates_.insert_or_assign(std::move(id), std::move(tpl));
}

void RenderedPrompt::append_section(const std::string& key, const std::string& title,
                                    const std::string& body) {
    user_text += "\n\n" + title + ":\n" + body;
    extra_sections[key] = body;
}

Bindings task_bindings(const TaskSpec& task) {
    std::string reqs;
    auto items = task.effective_requirements();
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) reqs += '\n';
        reqs += std::to_string(i + 1) + ". " + items[i];
    }
    return {
        {"task", task.description},
        {"description", task.description},
        {"modality", task.modality},
        {"language", task.language},
        {"requirements", reqs},
    };
}

RenderedPrompt render_prompt(const PromptLibrary& library, std::string_view template_id,
                             const TaskSpec& task, const Bindings& context) {
    const auto& tpl = library.get(template_id);
    Bindings merged = task_bindings(task);
    for (const auto& [k, v] : context) merged[k] = v;

    RenderedPrompt out;
    out.template_id = tpl.id;
    out.system_text = tpl.system_text;
    const std::string_view body = tpl.body;
    out.user_text.reserve(body.size());
    for (std::size_t i = 0; i < body.size();) {
        if (auto n = token_length(body, i)) {
            std::string name(body.substr(i + 1, n - 2));
            auto it = merged.find(name);
            if (it == merged.end())
                throw Error(ErrorCode::missing_placeholder,
                            "template " + tpl.id + " needs a value for {" + name + "}: " + name);
            out.user_text += it->second;
            out.placeholder_bindings[name] = it->second;
            i += n;
        } else {
            out.user_text += body[i++];
        }
    }
    return out;
}

} // namespace evoloop
