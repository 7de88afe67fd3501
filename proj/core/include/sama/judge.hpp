#pragma once

#include <cstdint>
#include <span>

#include "sama/manifest.hpp"
#include "sama/video.hpp"

namespace sama {

// Keep thresholds on the 1..10 judge scale.
struct FilterThresholds {
    double image_if = 9.0, image_vq = 9.0, image_cp = 9.0;
    double video_if = 8.0, video_vq = 9.0, video_cp = 8.0, video_mc = 8.0;
    int turns = 3;
};

// Pluggable judge interface; scores an edited clip against the pair it came
// from. `reference` is the ground-truth edited result where one exists.
class Judge {
  public:
    virtual ~Judge() = default;
    virtual JudgeScores score(const VideoClip& source, const VideoClip& edited,
                              const VideoClip& reference, std::span<const std::uint8_t> region,
                              bool is_video) const = 0;
};

// Deterministic stand-in for a VLM judge: each of the three turns evaluates a
// seeded voxel subsample and maps pixel errors / motion correlation onto the
// 1..10 scale; the reported score is the mean over turns.
class SyntheticJudge : public Judge {
  public:
    explicit SyntheticJudge(std::uint64_t seed, int turns = 3) : seed_(seed), turns_(turns) {}

    JudgeScores score(const VideoClip& source, const VideoClip& edited,
                      const VideoClip& reference, std::span<const std::uint8_t> region,
                      bool is_video) const override;

  private:
    std::uint64_t seed_;
    int turns_;
};

// Keep iff every threshold applicable to the kind is met. Video records must
// carry a motion-consistency score.
bool filter_sample(const JudgeScores& scores, const std::string& kind,
                   const FilterThresholds& thresholds);

}  // namespace sama
