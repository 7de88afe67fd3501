#include "sama/manifest.hpp"

#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "sama/errors.hpp"

namespace sama {

using nlohmann::json;

namespace {

json record_to_json(const ManifestRecord& rec) {
    json j;
    j["id"] = rec.id;
    j["kind"] = rec.kind;
    j["paths"] = rec.paths;
    j["instruction"] = rec.instruction;
    j["split"] = rec.split;
    if (!rec.edit_kind.empty()) j["edit_kind"] = rec.edit_kind;
    if (rec.scores) {
        json s;
        s["instruction_following"] = rec.scores->instruction_following;
        s["visual_quality"] = rec.scores->visual_quality;
        s["content_preservation"] = rec.scores->content_preservation;
        if (rec.scores->motion_consistency) s["motion_consistency"] = *rec.scores->motion_consistency;
        j["scores"] = s;
    }
    if (rec.keep) j["keep"] = *rec.keep;
    return j;
}

ManifestRecord record_from_json(const json& j, int line_no) {
    auto fail = [line_no](const std::string& what) {
        throw ParseError("manifest line " + std::to_string(line_no) + ": " + what);
    };
    ManifestRecord rec;
    try {
        rec.id = j.at("id").get<std::string>();
        rec.kind = j.at("kind").get<std::string>();
        rec.paths = j.at("paths").get<std::map<std::string, std::string>>();
        rec.instruction = j.at("instruction").get<std::string>();
        rec.split = j.value("split", std::string("train"));
        rec.edit_kind = j.value("edit_kind", std::string());
        if (j.contains("scores")) {
            const json& s = j.at("scores");
            JudgeScores scores;
            scores.instruction_following = s.at("instruction_following").get<double>();
            scores.visual_quality = s.at("visual_quality").get<double>();
            scores.content_preservation = s.at("content_preservation").get<double>();
            if (s.contains("motion_consistency")) {
                scores.motion_consistency = s.at("motion_consistency").get<double>();
            }
            rec.scores = scores;
        }
        if (j.contains("keep")) rec.keep = j.at("keep").get<bool>();
    } catch (const json::exception& e) {
        fail(e.what());
    }
    if (rec.kind != "image_edit" && rec.kind != "video_edit" && rec.kind != "t2v") {
        fail("unknown kind '" + rec.kind + "'");
    }
    return rec;
}

}  // namespace

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
    std::unordered_set<std::string> ids;
    for (const ManifestRecord& rec : manifest.records) {
        if (!ids.insert(rec.id).second) {
            throw ContractError("write_manifest: duplicate sample id '" + rec.id + "'");
        }
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("write_manifest: cannot open " + path.string());
    for (const ManifestRecord& rec : manifest.records) {
        out << record_to_json(rec).dump() << '\n';
    }
    if (!out) throw IoError("write_manifest: write failed for " + path.string());
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_manifest: cannot open " + path.string());
    const std::filesystem::path base = path.parent_path();
    Manifest manifest;
    std::unordered_set<std::string> ids;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw ParseError("manifest line " + std::to_string(line_no) + ": invalid JSON");
        }
        ManifestRecord rec = record_from_json(j, line_no);
        if (!ids.insert(rec.id).second) {
            throw ParseError("manifest line " + std::to_string(line_no) + ": duplicate id '" +
                             rec.id + "'");
        }
        for (const auto& [role, rel] : rec.paths) {
            const std::filesystem::path p =
                std::filesystem::path(rel).is_absolute() ? std::filesystem::path(rel) : base / rel;
            if (!std::filesystem::exists(p)) {
                throw IoError("manifest record '" + rec.id + "': missing file " + p.string() +
                              " (role " + role + ")");
            }
        }
        manifest.records.push_back(std::move(rec));
    }
    return manifest;
}

}  // namespace sama
