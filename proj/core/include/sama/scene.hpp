#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sama/rng.hpp"
#include "sama/video.hpp"

namespace sama {

enum class ShapeKind { Square, Circle, Triangle };

const char* shape_kind_name(ShapeKind kind);

// Fixed 8-entry color vocabulary so instruction -> pixel mapping is checkable.
struct NamedColor {
    const char* name;
    std::array<float, 3> rgb;
};
std::span<const NamedColor> color_vocab();
int color_index(const std::array<float, 3>& rgb);  // -1 when not in the vocabulary

struct ShapeSpec {
    ShapeKind kind = ShapeKind::Square;
    double cx = 0.0, cy = 0.0;  // center in px, x = column, y = row
    double vx = 0.0, vy = 0.0;  // px per frame
    double size = 4.0;          // bounding box side
    std::array<float, 3> color{1.0f, 0.0f, 0.0f};
};

struct SceneSpec {
    int height = 32;
    int width = 32;
    std::array<float, 3> background{0.0f, 0.0f, 0.0f};
    std::vector<ShapeSpec> shapes;  // painter's order: later entries drawn on top
};

enum class EditKind { Recolor, Remove, Add, Style };

const char* edit_kind_name(EditKind kind);
EditKind edit_kind_from_name(const std::string& name);

struct EditPair {
    VideoClip source;
    VideoClip target;
    std::string instruction;
    EditKind kind = EditKind::Recolor;
    // Per-frame boolean mask, T*H*W entries; channels collapse.
    std::vector<std::uint8_t> region;
};

// Whether the shape covers the pixel whose center is (x+0.5, y+0.5) at frame k.
bool shape_covers(const ShapeSpec& shape, int frame, int x, int y);

// Renders T frames; frame k places each shape at center + k * velocity over the
// background, painter's order, no anti-aliasing.
VideoClip render_scene(const SceneSpec& spec, int frames);

// Scene with 1..3 random shapes from the color vocabulary.
SceneSpec random_scene(Rng& rng, int height, int width);

// Caption for the first shape, e.g. "a red square moves right".
std::string scene_caption(const SceneSpec& spec);

// Edited-pair construction. Target is rendered from an edited spec (recolor /
// remove / add) or value-inverted (style); the instruction comes from a fixed
// template grammar; edit_region is the union of affected shape footprints.
EditPair make_edit_pair(const SceneSpec& spec, int frames, EditKind kind, Rng& rng);
EditPair make_image_edit_pair(const SceneSpec& spec, EditKind kind, Rng& rng);

// Weighted edit-kind draw used by corpus generation.
EditKind sample_edit_kind(Rng& rng, std::span<const double> weights);

}  // namespace sama
