#pragma once

#include "evoloop/graph.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace evoloop {

struct FilePatch {
    std::string filename;
    std::string content;

    friend bool operator==(const FilePatch&, const FilePatch&) = default;
};

/// Relative path with an extension; no absolute paths, drive letters,
/// backslashes, control characters, or "." / ".." segments.
bool is_safe_filename(std::string_view name);

/// Extracts FILENAME + fenced block pairs. The block body is kept verbatim.
/// Unsafe names are dropped. Throws NoPatchesFound when nothing usable remains.
std::vector<FilePatch> parse_file_patches(std::string_view reply);

enum class GradientKind { no_error, wrong_test_code, diagnoses };

std::string_view to_string(GradientKind kind);

struct Diagnosis {
    std::string filename;
    std::vector<std::string> functions;
    std::string analysis;

    friend bool operator==(const Diagnosis&, const Diagnosis&) = default;
};

struct TextualGradient {
    GradientKind kind = GradientKind::no_error;
    std::vector<Diagnosis> diagnoses;
    /// Full reply; for wrong_test_code this is the only payload.
    std::string raw_text;

    friend bool operator==(const TextualGradient&, const TextualGradient&) = default;
};

struct GradientOptions {
    std::string test_prefix = "test_";
};

TextualGradient parse_gradient(std::string_view reply, const GradientOptions& options = {});
std::string serialize_gradient(const TextualGradient& gradient);
/// Diagnoses rendered for the updating agent's issue list.
std::string describe_issues(const TextualGradient& gradient);

struct RequirementProgress {
    std::string requirement;
    bool achieved = false;
    bool double_checked = false;
    std::string detail;

    friend bool operator==(const RequirementProgress&, const RequirementProgress&) = default;
};

struct UpdateReport {
    std::vector<RequirementProgress> progress;
    NetworkDraft draft;

    friend bool operator==(const UpdateReport&, const UpdateReport&) = default;
};

UpdateReport parse_update_report(std::string_view reply, const DraftOptions& options = {});
std::string serialize_update_report(const UpdateReport& report);

} // namespace evoloop
