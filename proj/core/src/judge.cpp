#include "sama/judge.hpp"

#include <algorithm>
#include <cmath>

#include "sama/errors.hpp"
#include "sama/metrics.hpp"
#include "sama/rng.hpp"

namespace sama {

namespace {

double error_to_score(double err, double full_scale) {
    return 10.0 - 9.0 * std::min(1.0, err / full_scale);
}

// Mean abs error over voxels passing both the region predicate and the turn
// subsample; empty selection -> 0.
double subsampled_error(const VideoClip& a, const VideoClip& b,
                        std::span<const std::uint8_t> region, bool inside, bool use_region,
                        std::span<const std::uint8_t> turn_mask) {
    double sum = 0.0;
    std::int64_t count = 0;
    const std::size_t pixels = turn_mask.size();
    for (std::size_t p = 0; p < pixels; ++p) {
        if (!turn_mask[p]) continue;
        if (use_region && (region[p] != 0) != inside) continue;
        const std::size_t v = p * static_cast<std::size_t>(a.channels);
        for (int c = 0; c < a.channels; ++c) {
            sum += std::abs(static_cast<double>(a.data[v + static_cast<std::size_t>(c)]) -
                            b.data[v + static_cast<std::size_t>(c)]);
        }
        count += a.channels;
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

}  // namespace

JudgeScores SyntheticJudge::score(const VideoClip& source, const VideoClip& edited,
                                  const VideoClip& reference, std::span<const std::uint8_t> region,
                                  bool is_video) const {
    if (!source.same_dims(edited) || !source.same_dims(reference)) {
        throw ShapeError("SyntheticJudge: clip dims disagree");
    }
    const std::size_t pixels = static_cast<std::size_t>(source.frames) * source.height * source.width;
    if (region.size() != pixels) throw ShapeError("SyntheticJudge: region size mismatch");

    JudgeScores scores;
    double mc_total = 0.0;
    std::vector<std::uint8_t> turn_mask(pixels);
    for (int turn = 0; turn < turns_; ++turn) {
        Rng rng = Rng::substream(seed_, static_cast<std::uint64_t>(turn) + 1);
        for (std::uint8_t& m : turn_mask) m = rng.uniform() < 0.5 ? 1 : 0;

        scores.instruction_following +=
            error_to_score(subsampled_error(edited, reference, region, true, true, turn_mask), 0.5);
        scores.visual_quality +=
            error_to_score(subsampled_error(edited, reference, region, true, false, turn_mask), 0.5);
        scores.content_preservation +=
            error_to_score(subsampled_error(edited, source, region, false, true, turn_mask), 0.5);
        if (is_video) {
            // Motion is judged on whole frames; turns reuse the correlation.
            mc_total += 1.0 + 9.0 * std::max(0.0, motion_consistency(edited, source));
        }
    }
    scores.instruction_following /= turns_;
    scores.visual_quality /= turns_;
    scores.content_preservation /= turns_;
    if (is_video) scores.motion_consistency = mc_total / turns_;
    return scores;
}

bool filter_sample(const JudgeScores& scores, const std::string& kind,
                   const FilterThresholds& thresholds) {
    if (kind == "image_edit") {
        return scores.instruction_following >= thresholds.image_if &&
               scores.visual_quality >= thresholds.image_vq &&
               scores.content_preservation >= thresholds.image_cp;
    }
    if (kind == "video_edit" || kind == "t2v") {
        if (!scores.motion_consistency) {
            throw ContractError("filter_sample: video record lacks a motion-consistency score");
        }
        return scores.instruction_following >= thresholds.video_if &&
               scores.visual_quality >= thresholds.video_vq &&
               scores.content_preservation >= thresholds.video_cp &&
               *scores.motion_consistency >= thresholds.video_mc;
    }
    throw ContractError("filter_sample: unknown kind '" + kind + "'");
}

}  // namespace sama
