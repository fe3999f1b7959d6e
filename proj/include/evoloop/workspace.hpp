#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace evoloop {

/// Origin recorded for files carried in from a previous iteration.
inline constexpr std::string_view kSeedOrigin = "<seed>";

/// Named-file map of generated artifacts. Filenames always satisfy
/// is_safe_filename; every file has an origin.
class Workspace {
public:
    /// Throws UnsafeFilename.
    void put(const std::string& filename, std::string content, std::string origin);
    void erase(const std::string& filename);

    const std::map<std::string, std::string>& files() const { return files_; }
    const std::map<std::string, std::string>& origin() const { return origin_; }
    std::optional<std::string_view> get(const std::string& filename) const;
    bool contains(const std::string& filename) const { return files_.count(filename) != 0; }
    bool empty() const { return files_.empty(); }
    std::size_t size() const { return files_.size(); }

    /// Same files with every origin reset to kSeedOrigin.
    Workspace as_seed() const;

    friend bool operator==(const Workspace&, const Workspace&) = default;

private:
    std::map<std::string, std::string> files_;
    std::map<std::string, std::string> origin_;
};

/// Files rendered as FILENAME + fenced blocks. When the total exceeds
/// `budget`, the largest files are cut first (water-filling) so every file
/// keeps at least a prefix.
std::string workspace_listing(const Workspace& ws, std::size_t budget);

/// Files referenced by imports/includes but absent from the workspace.
/// Conservative: only local-looking references are reported.
std::vector<std::string> unimplemented_files(const Workspace& ws);

/// File extension used for generated sources in `language` ("py" for python).
std::string extension_for(std::string_view language);

} // namespace evoloop
