#include "sama/vtensor.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "sama/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "vtensor i/o assumes a little-endian host");

namespace sama {

namespace {
constexpr char kMagic[4] = {'S', 'A', 'M', 'T'};
constexpr std::uint8_t kVersion = 0x01;
}  // namespace

void write_vtensor(const std::filesystem::path& path, const VTensorData& t) {
    if (t.dims.empty() || t.dims.size() > 255) {
        throw ContractError("write_vtensor: rank must be in [1,255]");
    }
    std::uint64_t n = 1;
    for (std::uint32_t d : t.dims) n *= d;
    if (n != t.values.size()) {
        throw ShapeError("write_vtensor: dims do not match payload size");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("write_vtensor: cannot open " + path.string());
    out.write(kMagic, 4);
    out.put(static_cast<char>(kVersion));
    out.put(static_cast<char>(t.dims.size()));
    out.write(reinterpret_cast<const char*>(t.dims.data()),
              static_cast<std::streamsize>(t.dims.size() * sizeof(std::uint32_t)));
    out.write(reinterpret_cast<const char*>(t.values.data()),
              static_cast<std::streamsize>(t.values.size() * sizeof(float)));
    if (!out) throw IoError("write_vtensor: write failed for " + path.string());
}

VTensorData read_vtensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_vtensor: cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw ParseError("read_vtensor: bad magic in " + path.string());
    }
    const int version = in.get();
    if (version != kVersion) {
        throw ParseError("read_vtensor: unsupported version " + std::to_string(version) + " in " +
                         path.string());
    }
    const int rank = in.get();
    if (rank < 1) throw ParseError("read_vtensor: bad rank in " + path.string());
    VTensorData t;
    t.dims.resize(static_cast<std::size_t>(rank));
    in.read(reinterpret_cast<char*>(t.dims.data()),
            static_cast<std::streamsize>(t.dims.size() * sizeof(std::uint32_t)));
    if (!in) throw ParseError("read_vtensor: truncated header in " + path.string());
    std::uint64_t n = 1;
    for (std::uint32_t d : t.dims) {
        if (d == 0) throw ParseError("read_vtensor: zero dimension in " + path.string());
        n *= d;
    }
    t.values.resize(n);
    in.read(reinterpret_cast<char*>(t.values.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) throw ParseError("read_vtensor: truncated payload in " + path.string());
    return t;
}

}  // namespace sama
