#include "sama/video.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "sama/errors.hpp"
#include "sama/vtensor.hpp"

namespace sama {

VideoClip make_clip(int frames, int height, int width, float fill) {
    if (frames < 1 || height < 1 || width < 1) {
        throw ContractError("make_clip: dimensions must be positive");
    }
    if (fill < 0.0f || fill > 1.0f) throw ContractError("make_clip: fill outside [0,1]");
    VideoClip clip;
    clip.frames = frames;
    clip.height = height;
    clip.width = width;
    clip.data.assign(static_cast<std::size_t>(clip.voxels()), fill);
    return clip;
}

void validate_clip(const VideoClip& clip) {
    if (clip.frames < 1) throw ContractError("clip: T must be >= 1");
    if (clip.channels != 3) throw ContractError("clip: C must be 3");
    if (static_cast<std::int64_t>(clip.data.size()) != clip.voxels()) {
        throw ShapeError("clip: payload does not match dims");
    }
    for (float v : clip.data) {
        if (!(v >= 0.0f && v <= 1.0f)) throw ContractError("clip: value outside [0,1]");
    }
}

void save_clip(const std::filesystem::path& path, const VideoClip& clip) {
    VTensorData t;
    t.dims = {static_cast<std::uint32_t>(clip.frames), static_cast<std::uint32_t>(clip.height),
              static_cast<std::uint32_t>(clip.width), static_cast<std::uint32_t>(clip.channels)};
    t.values = clip.data;
    write_vtensor(path, t);
}

VideoClip load_clip(const std::filesystem::path& path) {
    VTensorData t = read_vtensor(path);
    if (t.dims.size() != 4 || t.dims[3] != 3) {
        throw ParseError("load_clip: " + path.string() + " is not a T,H,W,3 container");
    }
    VideoClip clip;
    clip.frames = static_cast<int>(t.dims[0]);
    clip.height = static_cast<int>(t.dims[1]);
    clip.width = static_cast<int>(t.dims[2]);
    clip.data = std::move(t.values);
    validate_clip(clip);
    return clip;
}

void dump_ppm_frames(const std::filesystem::path& dir, const VideoClip& clip) {
    std::filesystem::create_directories(dir);
    for (int t = 0; t < clip.frames; ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%04d.ppm", t);
        std::ofstream out(dir / name);
        if (!out) throw IoError("dump_ppm_frames: cannot open " + (dir / name).string());
        out << "P3\n" << clip.width << ' ' << clip.height << "\n255\n";
        for (int y = 0; y < clip.height; ++y) {
            for (int x = 0; x < clip.width; ++x) {
                for (int c = 0; c < 3; ++c) {
                    const int v = static_cast<int>(std::lround(clip.at(t, y, x, c) * 255.0f));
                    out << v << (c == 2 && x == clip.width - 1 ? "" : " ");
                }
            }
            out << '\n';
        }
        if (!out) throw IoError("dump_ppm_frames: write failed in " + dir.string());
    }
}

}  // namespace sama
