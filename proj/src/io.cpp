#include "pcreg/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace pcreg {
namespace binary {
namespace {

template <typename T>
void put_le(std::ostream& out, T v) {
    std::array<char, sizeof(T)> bytes{};
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in) {
    std::array<unsigned char, sizeof(T)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (!in) throw FormatError("unexpected end of file");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[i]) << (8 * i);
    return v;
}

}  // namespace

void put_u32(std::ostream& out, std::uint32_t v) { put_le(out, v); }
void put_u64(std::ostream& out, std::uint64_t v) { put_le(out, v); }
void put_f32(std::ostream& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }
std::uint32_t get_u32(std::istream& in) { return get_le<std::uint32_t>(in); }
std::uint64_t get_u64(std::istream& in) { return get_le<std::uint64_t>(in); }
float get_f32(std::istream& in) { return std::bit_cast<float>(get_le<std::uint32_t>(in)); }

}  // namespace binary

namespace {

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode) {
    std::ofstream out(path, mode);
    if (!out) throw FormatError("cannot open for writing: " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode) {
    std::ifstream in(path, mode);
    if (!in) throw FormatError("cannot open for reading: " + path.string());
    return in;
}

void expect_magic(std::istream& in, const char (&magic)[5], const std::filesystem::path& path) {
    char buf[4] = {};
    in.read(buf, 4);
    if (!in || std::memcmp(buf, magic, 4) != 0)
        throw FormatError(path.string() + ": bad magic, expected " + std::string(magic));
}

// Re-throws low-level read failures with the file path attached.
template <typename Fn>
auto with_path(const std::filesystem::path& path, Fn&& fn) {
    try {
        return fn();
    } catch (const FormatError& e) {
        const std::string what = e.what();
        if (what.rfind(path.string(), 0) == 0) throw;
        throw FormatError(path.string() + ": " + what);
    }
}

}  // namespace

void write_freg(const std::filesystem::path& path, const PointCloud& cloud) {
    cloud.validate();
    auto out = open_out(path, std::ios::binary | std::ios::trunc);
    out.write("FREG", 4);
    binary::put_u32(out, kCloudFormatVersion);
    binary::put_u64(out, cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto& p = cloud.coords[i];
        binary::put_f32(out, static_cast<float>(p.x()));
        binary::put_f32(out, static_cast<float>(p.y()));
        binary::put_f32(out, static_cast<float>(p.z()));
        binary::put_f32(out, cloud.has_intensity() ? static_cast<float>(cloud.intensity[i]) : 0.0f);
    }
    if (!out) throw FormatError("write failed: " + path.string());
}

PointCloud read_freg(const std::filesystem::path& path) {
    return with_path(path, [&] {
        auto in = open_in(path, std::ios::binary);
        expect_magic(in, "FREG", path);
        const auto version = binary::get_u32(in);
        if (version != kCloudFormatVersion)
            throw FormatError(path.string() + ": unsupported FREG version " + std::to_string(version));
        const auto count = binary::get_u64(in);
        const auto expected = static_cast<std::uintmax_t>(16 + 16 * count);
        if (count > (std::uintmax_t{1} << 40) || std::filesystem::file_size(path) != expected)
            throw FormatError(path.string() + ": truncated or oversized FREG payload");
        PointCloud cloud;
        cloud.coords.resize(count);
        cloud.intensity.resize(count);
        for (std::uint64_t i = 0; i < count; ++i) {
            const double x = binary::get_f32(in);
            const double y = binary::get_f32(in);
            const double z = binary::get_f32(in);
            cloud.coords[i] = Point3(x, y, z);
            cloud.intensity[i] = binary::get_f32(in);
        }
        cloud.validate();
        return cloud;
    });
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud) {
    cloud.validate();
    auto out = open_out(path, std::ios::trunc);
    out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
        << "\nproperty float x\nproperty float y\nproperty float z\n";
    if (cloud.has_intensity()) out << "property float intensity\n";
    out << "end_header\n";
    out.precision(9);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto& p = cloud.coords[i];
        out << static_cast<float>(p.x()) << ' ' << static_cast<float>(p.y()) << ' ' << static_cast<float>(p.z());
        if (cloud.has_intensity()) out << ' ' << static_cast<float>(cloud.intensity[i]);
        out << '\n';
    }
    if (!out) throw FormatError("write failed: " + path.string());
}

PointCloud read_ply(const std::filesystem::path& path) {
    auto in = open_in(path, std::ios::in);
    std::string line;
    if (!std::getline(in, line) || line != "ply") throw FormatError(path.string() + ": not a PLY file");

    std::uint64_t count = 0;
    bool in_vertex = false;
    bool have_vertex = false;
    std::vector<std::string> props;
    for (;;) {
        if (!std::getline(in, line)) throw FormatError(path.string() + ": unterminated PLY header");
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "end_header") break;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "ascii") throw FormatError(path.string() + ": only ASCII PLY is supported");
        } else if (word == "element") {
            std::string name;
            ls >> name;
            in_vertex = name == "vertex";
            if (in_vertex) {
                ls >> count;
                have_vertex = true;
            } else if (!have_vertex) {
                throw FormatError(path.string() + ": vertex element must come first");
            }
        } else if (word == "property" && in_vertex) {
            std::string type, name;
            ls >> type >> name;
            if (type == "list") throw FormatError(path.string() + ": list properties are not supported");
            props.push_back(name);
        }
    }
    int ix = -1, iy = -1, iz = -1, ii = -1;
    for (std::size_t k = 0; k < props.size(); ++k) {
        const auto& p = props[k];
        const int idx = static_cast<int>(k);
        if (p == "x") ix = idx;
        if (p == "y") iy = idx;
        if (p == "z") iz = idx;
        if (p == "intensity") ii = idx;
    }
    if (ix < 0 || iy < 0 || iz < 0) throw FormatError(path.string() + ": missing x/y/z properties");

    PointCloud cloud;
    cloud.coords.reserve(count);
    std::vector<float> values(props.size());  // declared float; widening keeps the stored value exact
    for (std::uint64_t i = 0; i < count; ++i) {
        if (!std::getline(in, line)) throw FormatError(path.string() + ": truncated vertex list");
        std::istringstream ls(line);
        for (auto& v : values)
            if (!(ls >> v)) throw FormatError(path.string() + ": malformed vertex at line " + std::to_string(i));
        cloud.coords.emplace_back(values[ix], values[iy], values[iz]);
        if (ii >= 0) cloud.intensity.push_back(values[ii]);
    }
    try {
        cloud.validate();
    } catch (const InvalidArgumentError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return cloud;
}

PointCloud read_cloud(const std::filesystem::path& path) {
    char magic[4] = {};
    {
        auto in = open_in(path, std::ios::binary);
        in.read(magic, 4);
    }
    if (std::memcmp(magic, "FREG", 4) == 0) return read_freg(path);
    if (std::memcmp(magic, "ply", 3) == 0) return read_ply(path);
    throw FormatError(path.string() + ": unrecognized point cloud format");
}

std::uint64_t Tensor::element_count() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

void write_tensors(const std::filesystem::path& path, const TensorTable& tensors) {
    auto out = open_out(path, std::ios::binary | std::ios::trunc);
    out.write("FRWT", 4);
    binary::put_u32(out, kTensorFormatVersion);
    binary::put_u64(out, tensors.size());
    for (const auto& [name, t] : tensors) {
        if (t.data.size() != t.element_count())
            throw InvalidArgumentError("tensor '" + name + "' data does not match its dims");
        binary::put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        binary::put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
        for (auto d : t.dims) binary::put_u64(out, d);
        for (float v : t.data) binary::put_f32(out, v);
    }
    if (!out) throw FormatError("write failed: " + path.string());
}

TensorTable read_tensors(const std::filesystem::path& path) {
    return with_path(path, [&] {
        auto in = open_in(path, std::ios::binary);
        expect_magic(in, "FRWT", path);
        const auto version = binary::get_u32(in);
        if (version != kTensorFormatVersion)
            throw FormatError(path.string() + ": unsupported FRWT version " + std::to_string(version));
        const auto size = std::filesystem::file_size(path);
        const auto count = binary::get_u64(in);
        if (count > size) throw FormatError(path.string() + ": implausible tensor count");
        TensorTable table;
        for (std::uint64_t k = 0; k < count; ++k) {
            const auto name_len = binary::get_u32(in);
            if (name_len > size) throw FormatError(path.string() + ": implausible tensor name length");
            std::string name(name_len, '\0');
            in.read(name.data(), name_len);
            if (!in) throw FormatError(path.string() + ": truncated tensor name");
            Tensor t;
            const auto rank = binary::get_u32(in);
            if (rank > 8) throw FormatError(path.string() + ": tensor '" + name + "' has unsupported rank");
            for (std::uint32_t r = 0; r < rank; ++r) t.dims.push_back(binary::get_u64(in));
            const auto n = t.element_count();
            if (n > size) throw FormatError(path.string() + ": tensor '" + name + "' exceeds file size");
            t.data.resize(n);
            for (auto& v : t.data) v = binary::get_f32(in);
            if (!table.emplace(name, std::move(t)).second)
                throw FormatError(path.string() + ": duplicate tensor '" + name + "'");
        }
        return table;
    });
}

}  // namespace pcreg
