#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "advray/core.hpp"
#include "advray/image.hpp"

namespace advray {

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// --- PPM (P6) ---
//
// Header "P6\n<w> <h>\n255\n", then rgb bytes. Display gamma 1/2.2 is applied
// here and only here; every other stage works in linear radiance. Channel
// byte = round-half-away-from-zero(255 * clamp01(v)^(1/2.2)).

inline std::vector<uint8_t> write_ppm(const RgbGrid& img) {
    std::string header =
        "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + size_t(3) * img.pixel_count());
    for (int i = 0; i < img.pixel_count(); i++) {
        Rgb c = img.get(i);
        for (int ch = 0; ch < 3; ch++) {
            double v = std::pow(clamp01(c[ch]), 1.0 / 2.2);
            out.push_back(uint8_t(std::lround(255.0 * v)));
        }
    }
    return out;
}

// --- Raw texture (.tex, "ATX1") ---
//
// magic "ATX1" | u32 LE width | u32 LE height | width*height*3 f32 LE values
// row-major rgb. Lossless for f32 data; in-memory doubles are rounded to f32
// on write.

inline std::vector<uint8_t> write_texture_raw(const Texture& tex) {
    std::vector<uint8_t> out;
    out.reserve(12 + tex.value_count() * 4);
    const char magic[4] = {'A', 'T', 'X', '1'};
    out.insert(out.end(), magic, magic + 4);
    auto put_u32 = [&](uint32_t v) {
        for (int i = 0; i < 4; i++) out.push_back(uint8_t(v >> (8 * i)));
    };
    put_u32(uint32_t(tex.width));
    put_u32(uint32_t(tex.height));
    for (double d : tex.data) {
        float f = float(d);
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(bits);
    }
    return out;
}

inline Texture read_texture_raw(std::span<const uint8_t> bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "ATX1", 4) != 0)
        throw IoError("texture: bad magic, not an ATX1 file");
    auto get_u32 = [&](size_t at) {
        uint32_t v = 0;
        for (int i = 0; i < 4; i++) v |= uint32_t(bytes[at + i]) << (8 * i);
        return v;
    };
    uint32_t w = get_u32(4), h = get_u32(8);
    if (w == 0 || h == 0 || w > (1u << 16) || h > (1u << 16))
        throw IoError("texture: implausible dimensions " + std::to_string(w) + "x" +
                      std::to_string(h));
    size_t expected = 12 + size_t(w) * h * 3 * 4;
    if (bytes.size() != expected)
        throw IoError("texture: byte length " + std::to_string(bytes.size()) +
                      " does not match header-derived " + std::to_string(expected));
    Texture tex(static_cast<int>(w), static_cast<int>(h));
    for (size_t i = 0; i < tex.value_count(); i++) {
        uint32_t bits = get_u32(12 + i * 4);
        float f;
        std::memcpy(&f, &bits, 4);
        tex.data[i] = double(f);
    }
    return tex;
}

// --- File helpers ---

inline std::vector<uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path.string());
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return bytes;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    auto bytes = read_file(path);
    return std::string(bytes.begin(), bytes.end());
}

inline void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

}  // namespace advray
