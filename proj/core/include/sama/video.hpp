#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace sama {

// Dense T x H x W x C frame tensor with values in [0,1]; the unit of all
// data generation and transforms. C is 3 throughout.
struct VideoClip {
    int frames = 0;
    int height = 0;
    int width = 0;
    int channels = 3;
    std::vector<float> data;  // row-major T,H,W,C
    double fps = 8.0;         // informational only

    std::int64_t voxels() const {
        return static_cast<std::int64_t>(frames) * height * width * channels;
    }
    float& at(int t, int y, int x, int c) {
        return data[static_cast<std::size_t>(((t * height + y) * width + x) * channels + c)];
    }
    float at(int t, int y, int x, int c) const {
        return data[static_cast<std::size_t>(((t * height + y) * width + x) * channels + c)];
    }
    bool same_dims(const VideoClip& o) const {
        return frames == o.frames && height == o.height && width == o.width &&
               channels == o.channels;
    }
};

// Allocates a clip filled with a constant value; validates the range invariant.
VideoClip make_clip(int frames, int height, int width, float fill = 0.0f);

// Validates T >= 1, C == 3 and all values within [0,1].
void validate_clip(const VideoClip& clip);

// VTensor round-trip for clips (rank-4 T,H,W,C containers).
void save_clip(const std::filesystem::path& path, const VideoClip& clip);
VideoClip load_clip(const std::filesystem::path& path);

// One ASCII PPM (P3) file per frame, named frame_%04d.ppm under dir.
void dump_ppm_frames(const std::filesystem::path& dir, const VideoClip& clip);

}  // namespace sama
