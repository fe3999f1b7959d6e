#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace evoloop {

struct TaskSpec {
    std::string name;
    std::string description;
    std::string modality;
    std::string language = "python";
    std::vector<std::string> requirements;

    /// Requirements, or the description as a single item when none are listed.
    std::vector<std::string> effective_requirements() const;

    friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

/// Throws ConfigError when the description is empty.
void validate(const TaskSpec& task);

using Bindings = std::map<std::string, std::string>;

namespace templates {
inline constexpr std::string_view coding_organizer = "coding_organizer";
inline constexpr std::string_view coding_agent = "coding_agent";
inline constexpr std::string_view testing_organizer = "testing_organizer";
inline constexpr std::string_view testing_agent = "testing_agent";
inline constexpr std::string_view gradient_agent = "gradient_agent";
inline constexpr std::string_view updating_agent = "updating_agent";
} // namespace templates

struct PromptTemplate {
    std::string id;
    std::string system_text;
    std::string body;
};

/// The six agent templates. Built-in copies are compiled from templates/*.txt;
/// a directory of `<id>.txt` (and optional `<id>.system.txt`) overrides them.
class PromptLibrary {
public:
    static PromptLibrary builtin();
    static PromptLibrary from_directory(const std::filesystem::path& dir);

    const PromptTemplate& get(std::string_view id) const;
    std::vector<std::string> ids() const;
    void set(PromptTemplate tpl);

private:
    std::map<std::string, PromptTemplate, std::less<>> templates_;
};

/// `{identifier}` tokens appearing in a template body.
std::set<std::string> placeholders_in(std::string_view text);

struct RenderedPrompt {
    std::string template_id;
    std::string system_text;
    std::string user_text;
    /// Values substituted for the template's placeholders.
    Bindings placeholder_bindings;
    /// Sections appended after the template body (predecessor outputs,
    /// repair notes). Part of the request identity.
    Bindings extra_sections;

    void append_section(const std::string& key, const std::string& title, const std::string& body);
};

Bindings task_bindings(const TaskSpec& task);

/// Literal, single-pass substitution. Context values override task-derived
/// ones. Throws MissingPlaceholder naming the first unresolved token.
RenderedPrompt render_prompt(const PromptLibrary& library, std::string_view template_id,
                             const TaskSpec& task, const Bindings& context);

} // namespace evoloop
