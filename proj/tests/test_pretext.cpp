#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <map>

#include "sama/errors.hpp"
#include "sama/pretext.hpp"
#include "sama/scene.hpp"
#include "test_util.hpp"

using namespace sama;

namespace {

VideoClip ramp_clip(int frames, int height, int width) {
    VideoClip clip = make_clip(frames, height, width);
    for (int t = 0; t < frames; ++t) {
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                for (int c = 0; c < 3; ++c) {
                    clip.at(t, y, x, c) =
                        static_cast<float>((t * 31 + y * 7 + x * 3 + c) % 97) / 96.0f;
                }
            }
        }
    }
    return clip;
}

// Brightness centroid along x of one frame; oracle for displacement rates.
double centroid_x(const VideoClip& clip, int frame) {
    double total = 0.0, weighted = 0.0;
    for (int y = 0; y < clip.height; ++y) {
        for (int x = 0; x < clip.width; ++x) {
            const double v = clip.at(frame, y, x, 0);
            total += v;
            weighted += v * x;
        }
    }
    return weighted / total;
}

}  // namespace

TEST_CASE("cube inpaint masks round(ratio*T) frames") {
    Rng rng(1);
    const VideoClip clip = ramp_clip(16, 4, 4);
    const auto [masked, meta] = cube_inpaint(clip, 0.3, rng);
    CHECK(meta.length == 5);  // round(4.8)
    CHECK(meta.start >= 0);
    CHECK(meta.start + meta.length <= 16);
    for (int t = meta.start; t < meta.start + meta.length; ++t) {
        for (int y = 0; y < 4; ++y) {
            for (int x = 0; x < 4; ++x) {
                for (int c = 0; c < 3; ++c) CHECK(masked.at(t, y, x, c) == 0.5f);
            }
        }
    }
}

TEST_CASE("cube inpaint clamps tiny ratios to one frame") {
    Rng rng(2);
    const auto [masked, meta] = cube_inpaint(ramp_clip(8, 4, 4), 0.01, rng);
    CHECK(meta.length == 1);
    // and never the whole clip
    Rng rng2(3);
    const auto [m2, meta2] = cube_inpaint(ramp_clip(4, 4, 4), 0.99, rng2);
    CHECK(meta2.length == 3);
}

TEST_CASE("unmasked frames are bit-identical to the input") {
    Rng rng(4);
    const VideoClip clip = ramp_clip(10, 4, 4);
    const auto [masked, meta] = cube_inpaint(clip, 0.3, rng);
    const std::size_t frame_elems = 4 * 4 * 3;
    for (int t = 0; t < 10; ++t) {
        if (t >= meta.start && t < meta.start + meta.length) continue;
        CHECK(std::memcmp(&masked.data[t * frame_elems], &clip.data[t * frame_elems],
                          frame_elems * sizeof(float)) == 0);
    }
    CHECK_THROWS_AS(cube_inpaint(ramp_clip(1, 4, 4), 0.3, rng), ContractError);
    CHECK_THROWS_AS(cube_inpaint(clip, 1.0, rng), ContractError);
}

TEST_CASE("speed perturb takes even frames against the first half") {
    const VideoClip raw = ramp_clip(16, 4, 4);
    const SpeedPerturbResult r = speed_perturb(raw);
    REQUIRE(r.fast_source.frames == 8);
    REQUIRE(r.normal_target.frames == 8);
    const std::size_t frame_elems = 4 * 4 * 3;
    for (int t = 0; t < 8; ++t) {
        CHECK(std::memcmp(&r.fast_source.data[t * frame_elems], &raw.data[(2 * t) * frame_elems],
                          frame_elems * sizeof(float)) == 0);
        CHECK(std::memcmp(&r.normal_target.data[t * frame_elems], &raw.data[t * frame_elems],
                          frame_elems * sizeof(float)) == 0);
    }
    CHECK_THROWS_AS(speed_perturb(ramp_clip(7, 4, 4)), ContractError);
    CHECK_THROWS_AS(speed_perturb(ramp_clip(2, 4, 4)), ContractError);
}

TEST_CASE("static clips are a fixed point of speed perturbation") {
    const VideoClip still = make_clip(8, 4, 4, 0.25f);
    const SpeedPerturbResult r = speed_perturb(still);
    CHECK(std::memcmp(r.fast_source.data.data(), r.normal_target.data.data(),
                      r.fast_source.data.size() * sizeof(float)) == 0);
}

TEST_CASE("speed perturbation doubles tracked displacement") {
    SceneSpec spec;
    spec.height = 16;
    spec.width = 32;
    ShapeSpec s;
    s.kind = ShapeKind::Square;
    s.cx = 4.0;
    s.cy = 8.0;
    s.vx = 1.0;
    s.size = 4.0;
    s.color = {1.0f, 1.0f, 1.0f};
    spec.shapes.push_back(s);
    const VideoClip raw = render_scene(spec, 16);
    const SpeedPerturbResult r = speed_perturb(raw);
    const double fast_rate = centroid_x(r.fast_source, 4) - centroid_x(r.fast_source, 3);
    const double normal_rate = centroid_x(r.normal_target, 4) - centroid_x(r.normal_target, 3);
    CHECK(fast_rate == doctest::Approx(2.0).epsilon(0.1));
    CHECK(normal_rate == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("tube shuffle algebra") {
    const VideoClip clip = ramp_clip(4, 6, 8);

    const TubePermutation identity{0, 1, 2, 3, 4, 5, 6, 7};
    const VideoClip same = apply_tube_permutation(clip, identity);
    CHECK(std::memcmp(same.data.data(), clip.data.data(), clip.data.size() * sizeof(float)) == 0);

    Rng rng(5);
    const auto [shuffled, perm] = tube_shuffle(clip, rng);
    const VideoClip restored = apply_tube_permutation(shuffled, invert_tube_permutation(perm));
    CHECK(std::memcmp(restored.data.data(), clip.data.data(), clip.data.size() * sizeof(float)) ==
          0);

    // voxel multiset preserved
    std::map<float, int> before, after;
    for (float v : clip.data) before[v]++;
    for (float v : shuffled.data) after[v]++;
    CHECK(before == after);

    CHECK_THROWS_AS(tube_shuffle(ramp_clip(3, 4, 4), rng), ContractError);
}

TEST_CASE("task prompts carry the verbatim task tokens") {
    CHECK(task_prompt(PretextTask::CubeInpaint, "a red square moves right") ==
          "[Complete the missing regions in the video.] a red square moves right");
    CHECK(task_prompt(PretextTask::SpeedPerturb, "c") ==
          "[Restore the video to normal playback speed.] c");
    CHECK(task_prompt(PretextTask::None, "anything") == "anything");
    CHECK(task_prompt(PretextTask::TubeShuffle, "") ==
          "[Restore the correct spatio-temporal order of the video segments.]");
}

TEST_CASE("task sampling matches the 0.1/0.2/0.3/0.4 mixture") {
    Rng rng(6);
    std::map<PretextTask, int> counts;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) counts[sample_task(rng)]++;
    const double expected[] = {0.1, 0.2, 0.3, 0.4};
    const PretextTask tasks[] = {PretextTask::None, PretextTask::CubeInpaint,
                                 PretextTask::SpeedPerturb, PretextTask::TubeShuffle};
    double total = 0.0;
    for (int k = 0; k < 4; ++k) {
        const double freq = static_cast<double>(counts[tasks[k]]) / draws;
        total += freq;
        CHECK(std::abs(freq - expected[k]) < 0.01);
    }
    CHECK(total == doctest::Approx(1.0));

    // seeded sequences reproduce
    Rng a(7), b(7);
    for (int i = 0; i < 100; ++i) CHECK(sample_task(a) == sample_task(b));
}

TEST_CASE("the target side of a pretext sample is never touched") {
    Rng rng(8);
    const VideoClip clip = ramp_clip(8, 4, 4);
    for (const PretextTask task : {PretextTask::None, PretextTask::CubeInpaint,
                                   PretextTask::TubeShuffle}) {
        Rng task_rng(9);
        const PretextSample sample = make_pretext_sample(clip, "a red square moves right", task,
                                                         0.3, task_rng);
        CHECK(std::memcmp(sample.target.data.data(), clip.data.data(),
                          clip.data.size() * sizeof(float)) == 0);
    }
    // speed restoration targets the first-half normal-speed segment
    Rng task_rng(10);
    const PretextSample speed = make_pretext_sample(clip, "c", PretextTask::SpeedPerturb, 0.3,
                                                    task_rng);
    CHECK(speed.target.frames == 4);
    CHECK(std::memcmp(speed.target.data.data(), clip.data.data(),
                      speed.target.data.size() * sizeof(float)) == 0);
}

TEST_CASE("pretext samples serialize to two containers plus a sidecar") {
    sama::test::TempDir tmp("pretext_io");
    Rng rng(11);
    const VideoClip clip = ramp_clip(4, 4, 4);
    const PretextSample sample = make_pretext_sample(clip, "a red square moves right",
                                                     PretextTask::TubeShuffle, 0.3, rng);
    save_pretext_sample(tmp.path, "s0", sample);
    const PretextSample loaded = load_pretext_sample(tmp.path, "s0");
    CHECK(loaded.task == sample.task);
    CHECK(loaded.prompt == sample.prompt);
    CHECK(loaded.meta.tube_perm == sample.meta.tube_perm);
    CHECK(std::memcmp(loaded.perturbed_source.data.data(), sample.perturbed_source.data.data(),
                      sample.perturbed_source.data.size() * sizeof(float)) == 0);
    CHECK(std::memcmp(loaded.target.data.data(), sample.target.data.data(),
                      sample.target.data.size() * sizeof(float)) == 0);
}
