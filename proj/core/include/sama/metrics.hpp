#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sama/video.hpp"

namespace sama {

// Mean |output - target| over region voxels; empty region -> 0.
double edit_region_error(const VideoClip& output, const VideoClip& target,
                         std::span<const std::uint8_t> region);

// Mean |output - source| over the region complement; empty complement -> 0.
double preservation_error(const VideoClip& output, const VideoClip& source,
                          std::span<const std::uint8_t> region);

// Pearson correlation between the flattened frame-difference sequences of
// output and source. Both static -> 1; exactly one static -> 0.
double motion_consistency(const VideoClip& output, const VideoClip& source);

// Global mean absolute error.
double restoration_error(const VideoClip& restored, const VideoClip& original);

struct SampleMetrics {
    std::string id;
    std::string kind;
    double edit_region_error = 0.0;
    double preservation_error = 0.0;
    double motion_consistency = 0.0;
    double restoration_error = 0.0;
    bool has_restoration = false;
};

struct EvalReport {
    std::vector<SampleMetrics> samples;
    double mean_edit_region_error = 0.0;
    double mean_preservation_error = 0.0;
    double mean_motion_consistency = 0.0;
    double mean_restoration_error = 0.0;
    int edit_samples = 0;
    int restoration_samples = 0;

    void finalize();  // recomputes corpus means
};

}  // namespace sama
