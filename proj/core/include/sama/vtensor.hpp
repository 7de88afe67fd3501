#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace sama {

// Raw float payload with a shape, as stored in .vt container files.
struct VTensorData {
    std::vector<std::uint32_t> dims;
    std::vector<float> values;
};

// Container layout: magic "SAMT", version byte 0x01, rank as u8, each
// dimension as u32 little-endian, payload as f32 little-endian row-major.
// Round-trips are bit-exact.
void write_vtensor(const std::filesystem::path& path, const VTensorData& t);
VTensorData read_vtensor(const std::filesystem::path& path);

}  // namespace sama
