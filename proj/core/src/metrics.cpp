#include "sama/metrics.hpp"

#include <cmath>

#include "sama/errors.hpp"

namespace sama {

namespace {

void require_same_dims(const char* op, const VideoClip& a, const VideoClip& b) {
    if (!a.same_dims(b)) {
        throw ShapeError(std::string(op) + ": clip dims disagree [" + std::to_string(a.frames) +
                         "," + std::to_string(a.height) + "," + std::to_string(a.width) +
                         "] vs [" + std::to_string(b.frames) + "," + std::to_string(b.height) +
                         "," + std::to_string(b.width) + "]");
    }
}

void require_region(const VideoClip& clip, std::span<const std::uint8_t> region) {
    const std::size_t expected =
        static_cast<std::size_t>(clip.frames) * clip.height * clip.width;
    if (region.size() != expected) {
        throw ShapeError("region mask has " + std::to_string(region.size()) +
                         " entries, clip needs " + std::to_string(expected));
    }
}

double masked_abs_error(const VideoClip& a, const VideoClip& b,
                        std::span<const std::uint8_t> region, bool inside) {
    double sum = 0.0;
    std::int64_t count = 0;
    std::size_t v = 0;
    for (std::size_t p = 0; p < region.size(); ++p) {
        const bool in = region[p] != 0;
        if (in == inside) {
            for (int c = 0; c < a.channels; ++c) {
                sum += std::abs(static_cast<double>(a.data[v + static_cast<std::size_t>(c)]) -
                                b.data[v + static_cast<std::size_t>(c)]);
            }
            count += a.channels;
        }
        v += static_cast<std::size_t>(a.channels);
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

}  // namespace

double edit_region_error(const VideoClip& output, const VideoClip& target,
                         std::span<const std::uint8_t> region) {
    require_same_dims("edit_region_error", output, target);
    require_region(output, region);
    return masked_abs_error(output, target, region, true);
}

double preservation_error(const VideoClip& output, const VideoClip& source,
                          std::span<const std::uint8_t> region) {
    require_same_dims("preservation_error", output, source);
    require_region(output, region);
    return masked_abs_error(output, source, region, false);
}

double motion_consistency(const VideoClip& output, const VideoClip& source) {
    require_same_dims("motion_consistency", output, source);
    if (output.frames < 2) throw ContractError("motion_consistency: T must be >= 2");
    const std::size_t frame_elems =
        static_cast<std::size_t>(output.height) * output.width * output.channels;
    const std::size_t n = static_cast<std::size_t>(output.frames - 1) * frame_elems;

    double mean_a = 0.0, mean_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_a += static_cast<double>(output.data[i + frame_elems]) - output.data[i];
        mean_b += static_cast<double>(source.data[i + frame_elems]) - source.data[i];
    }
    mean_a /= static_cast<double>(n);
    mean_b /= static_cast<double>(n);

    double var_a = 0.0, var_b = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = (static_cast<double>(output.data[i + frame_elems]) - output.data[i]) - mean_a;
        const double db = (static_cast<double>(source.data[i + frame_elems]) - source.data[i]) - mean_b;
        var_a += da * da;
        var_b += db * db;
        cov += da * db;
    }
    if (var_a == 0.0 && var_b == 0.0) return 1.0;  // both static
    if (var_a == 0.0 || var_b == 0.0) return 0.0;
    return cov / std::sqrt(var_a * var_b);
}

double restoration_error(const VideoClip& restored, const VideoClip& original) {
    require_same_dims("restoration_error", restored, original);
    double sum = 0.0;
    for (std::size_t i = 0; i < restored.data.size(); ++i) {
        sum += std::abs(static_cast<double>(restored.data[i]) - original.data[i]);
    }
    return sum / static_cast<double>(restored.data.size());
}

void EvalReport::finalize() {
    mean_edit_region_error = 0.0;
    mean_preservation_error = 0.0;
    mean_motion_consistency = 0.0;
    mean_restoration_error = 0.0;
    edit_samples = 0;
    restoration_samples = 0;
    for (const SampleMetrics& s : samples) {
        if (s.has_restoration) {
            mean_restoration_error += s.restoration_error;
            ++restoration_samples;
        } else {
            mean_edit_region_error += s.edit_region_error;
            mean_preservation_error += s.preservation_error;
            mean_motion_consistency += s.motion_consistency;
            ++edit_samples;
        }
    }
    if (edit_samples > 0) {
        mean_edit_region_error /= edit_samples;
        mean_preservation_error /= edit_samples;
        mean_motion_consistency /= edit_samples;
    }
    if (restoration_samples > 0) mean_restoration_error /= restoration_samples;
}

}  // namespace sama
