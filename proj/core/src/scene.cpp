#include "sama/scene.hpp"

#include <algorithm>
#include <cmath>

#include "sama/errors.hpp"

namespace sama {

namespace {

const std::array<NamedColor, 8> kColors{{
    {"red", {1.0f, 0.0f, 0.0f}},
    {"green", {0.0f, 1.0f, 0.0f}},
    {"blue", {0.0f, 0.0f, 1.0f}},
    {"yellow", {1.0f, 1.0f, 0.0f}},
    {"cyan", {0.0f, 1.0f, 1.0f}},
    {"magenta", {1.0f, 0.0f, 1.0f}},
    {"white", {1.0f, 1.0f, 1.0f}},
    {"gray", {0.5f, 0.5f, 0.5f}},
}};

double cross(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

std::string color_name_of(const std::array<float, 3>& rgb) {
    const int idx = color_index(rgb);
    if (idx < 0) throw ContractError("shape color is outside the fixed color vocabulary");
    return kColors[static_cast<std::size_t>(idx)].name;
}

void paint_shape(VideoClip& clip, const ShapeSpec& shape) {
    for (int t = 0; t < clip.frames; ++t) {
        for (int y = 0; y < clip.height; ++y) {
            for (int x = 0; x < clip.width; ++x) {
                if (shape_covers(shape, t, x, y)) {
                    for (int c = 0; c < 3; ++c) clip.at(t, y, x, c) = shape.color[static_cast<std::size_t>(c)];
                }
            }
        }
    }
}

// Marks the per-frame footprint of one shape into a T*H*W mask.
void mark_footprint(std::vector<std::uint8_t>& region, const ShapeSpec& shape, int frames,
                    int height, int width) {
    for (int t = 0; t < frames; ++t) {
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                if (shape_covers(shape, t, x, y)) {
                    region[static_cast<std::size_t>((t * height + y) * width + x)] = 1;
                }
            }
        }
    }
}

ShapeSpec random_shape(Rng& rng, int height, int width) {
    ShapeSpec s;
    s.kind = static_cast<ShapeKind>(rng.uniform_int(3));
    s.color = kColors[static_cast<std::size_t>(rng.uniform_int(8))].rgb;
    s.size = 4.0 + static_cast<double>(rng.uniform_int(7));  // 4..10 px
    const double margin = s.size * 0.5 + 1.0;
    s.cx = rng.uniform(margin, static_cast<double>(width) - margin);
    s.cy = rng.uniform(margin, static_cast<double>(height) - margin);
    s.vx = static_cast<double>(rng.uniform_int(5) - 2);
    s.vy = static_cast<double>(rng.uniform_int(5) - 2);
    return s;
}

}  // namespace

const char* shape_kind_name(ShapeKind kind) {
    switch (kind) {
        case ShapeKind::Square: return "square";
        case ShapeKind::Circle: return "circle";
        case ShapeKind::Triangle: return "triangle";
    }
    return "square";
}

std::span<const NamedColor> color_vocab() { return kColors; }

int color_index(const std::array<float, 3>& rgb) {
    for (std::size_t i = 0; i < kColors.size(); ++i) {
        if (kColors[i].rgb == rgb) return static_cast<int>(i);
    }
    return -1;
}

const char* edit_kind_name(EditKind kind) {
    switch (kind) {
        case EditKind::Recolor: return "recolor";
        case EditKind::Remove: return "remove";
        case EditKind::Add: return "add";
        case EditKind::Style: return "style";
    }
    return "recolor";
}

EditKind edit_kind_from_name(const std::string& name) {
    if (name == "recolor") return EditKind::Recolor;
    if (name == "remove") return EditKind::Remove;
    if (name == "add") return EditKind::Add;
    if (name == "style") return EditKind::Style;
    throw ContractError("unknown edit kind: " + name);
}

bool shape_covers(const ShapeSpec& shape, int frame, int x, int y) {
    const double px = x + 0.5;
    const double py = y + 0.5;
    const double cx = shape.cx + frame * shape.vx;
    const double cy = shape.cy + frame * shape.vy;
    const double half = shape.size * 0.5;
    switch (shape.kind) {
        case ShapeKind::Square:
            return std::abs(px - cx) < half && std::abs(py - cy) < half;
        case ShapeKind::Circle: {
            const double dx = px - cx, dy = py - cy;
            return dx * dx + dy * dy < half * half;
        }
        case ShapeKind::Triangle: {
            // Apex at the top of the bounding box, base at the bottom.
            const double ax = cx, ay = cy - half;
            const double bx = cx - half, by = cy + half;
            const double ex = cx + half, ey = cy + half;
            const double d1 = cross(bx - ax, by - ay, px - ax, py - ay);
            const double d2 = cross(ex - bx, ey - by, px - bx, py - by);
            const double d3 = cross(ax - ex, ay - ey, px - ex, py - ey);
            return (d1 > 0 && d2 > 0 && d3 > 0) || (d1 < 0 && d2 < 0 && d3 < 0);
        }
    }
    return false;
}

VideoClip render_scene(const SceneSpec& spec, int frames) {
    if (frames < 1) throw ContractError("render_scene: T must be >= 1");
    VideoClip clip = make_clip(frames, spec.height, spec.width);
    for (int t = 0; t < frames; ++t) {
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                for (int c = 0; c < 3; ++c) clip.at(t, y, x, c) = spec.background[static_cast<std::size_t>(c)];
            }
        }
    }
    for (const ShapeSpec& shape : spec.shapes) paint_shape(clip, shape);
    return clip;
}

SceneSpec random_scene(Rng& rng, int height, int width) {
    SceneSpec spec;
    spec.height = height;
    spec.width = width;
    const int count = 1 + static_cast<int>(rng.uniform_int(3));
    for (int i = 0; i < count; ++i) spec.shapes.push_back(random_shape(rng, height, width));
    return spec;
}

std::string scene_caption(const SceneSpec& spec) {
    if (spec.shapes.empty()) return "a gray square stays still";
    const ShapeSpec& s = spec.shapes.front();
    std::string out = "a " + color_name_of(s.color) + " " + shape_kind_name(s.kind);
    if (s.vx == 0.0 && s.vy == 0.0) return out + " stays still";
    const char* dir;
    if (std::abs(s.vx) >= std::abs(s.vy)) {
        dir = s.vx > 0 ? "right" : "left";
    } else {
        dir = s.vy > 0 ? "down" : "up";
    }
    return out + " moves " + dir;
}

EditPair make_edit_pair(const SceneSpec& spec, int frames, EditKind kind, Rng& rng) {
    if ((kind == EditKind::Recolor || kind == EditKind::Remove) && spec.shapes.empty()) {
        throw ContractError(std::string(edit_kind_name(kind)) + " requires at least one shape");
    }
    EditPair pair;
    pair.kind = kind;
    pair.source = render_scene(spec, frames);
    pair.region.assign(static_cast<std::size_t>(frames) * spec.height * spec.width, 0);

    SceneSpec edited = spec;
    switch (kind) {
        case EditKind::Recolor: {
            const auto idx = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(spec.shapes.size())));
            const int old_color = color_index(spec.shapes[idx].color);
            int next = static_cast<int>(rng.uniform_int(7));
            if (next >= old_color) ++next;
            edited.shapes[idx].color = kColors[static_cast<std::size_t>(next)].rgb;
            pair.instruction = "turn the " + color_name_of(spec.shapes[idx].color) + " " +
                               shape_kind_name(spec.shapes[idx].kind) + " " +
                               kColors[static_cast<std::size_t>(next)].name;
            mark_footprint(pair.region, spec.shapes[idx], frames, spec.height, spec.width);
            pair.target = render_scene(edited, frames);
            break;
        }
        case EditKind::Remove: {
            const auto idx = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(spec.shapes.size())));
            pair.instruction = "remove the " + color_name_of(spec.shapes[idx].color) + " " +
                               shape_kind_name(spec.shapes[idx].kind);
            mark_footprint(pair.region, spec.shapes[idx], frames, spec.height, spec.width);
            edited.shapes.erase(edited.shapes.begin() + static_cast<std::ptrdiff_t>(idx));
            pair.target = render_scene(edited, frames);
            break;
        }
        case EditKind::Add: {
            const ShapeSpec added = random_shape(rng, spec.height, spec.width);
            edited.shapes.push_back(added);
            pair.instruction = "add a " + color_name_of(added.color) + " " +
                               shape_kind_name(added.kind);
            mark_footprint(pair.region, added, frames, spec.height, spec.width);
            pair.target = render_scene(edited, frames);
            break;
        }
        case EditKind::Style: {
            pair.instruction = "invert the colors of the video";
            std::fill(pair.region.begin(), pair.region.end(), 1);
            pair.target = pair.source;
            for (float& v : pair.target.data) v = 1.0f - v;
            break;
        }
    }
    return pair;
}

EditPair make_image_edit_pair(const SceneSpec& spec, EditKind kind, Rng& rng) {
    return make_edit_pair(spec, 1, kind, rng);
}

EditKind sample_edit_kind(Rng& rng, std::span<const double> weights) {
    if (weights.size() != 4) throw ContractError("sample_edit_kind: need 4 weights");
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw ContractError("sample_edit_kind: negative weight");
        total += w;
    }
    if (total <= 0.0) throw ContractError("sample_edit_kind: weights sum to zero");
    const double u = rng.uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        acc += weights[i];
        if (u < acc) return static_cast<EditKind>(i);
    }
    return EditKind::Style;
}

}  // namespace sama
