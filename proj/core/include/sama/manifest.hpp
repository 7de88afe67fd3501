#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sama {

// Mean-of-three-turns judge scores on the 1..10 scale.
struct JudgeScores {
    double instruction_following = 0.0;
    double visual_quality = 0.0;
    double content_preservation = 0.0;
    std::optional<double> motion_consistency;  // video records only
};

struct ManifestRecord {
    std::string id;
    std::string kind;  // image_edit | video_edit | t2v
    std::map<std::string, std::string> paths;
    std::string instruction;
    std::string split = "train";
    std::string edit_kind;  // empty for t2v
    std::optional<JudgeScores> scores;
    std::optional<bool> keep;  // filter decision, when scored
};

struct Manifest {
    std::vector<ManifestRecord> records;
};

// JSON-lines round trip. Writing validates id uniqueness; loading also checks
// that every referenced file exists (relative paths resolve against the
// manifest's directory) and reports malformed lines with their line number.
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest load_manifest(const std::filesystem::path& path);

}  // namespace sama
