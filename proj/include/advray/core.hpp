#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace advray {

// Always-on invariant check. Rendering/attack internals use this instead of
// assert() so violations surface identically in every build type.
#define ADVRAY_CHECK(cond, msg)                                         \
    do {                                                                \
        if (!(cond)) throw ::advray::InternalError(msg);                \
    } while (0)

struct InternalError : std::logic_error {
    explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }

struct Vec3 {
    double x = 0, y = 0, z = 0;

    constexpr Vec3() = default;
    constexpr Vec3(double x, double y, double z) : x(x), y(y), z(z) {}

    Vec3 operator+(const Vec3& b) const { return {x + b.x, y + b.y, z + b.z}; }
    Vec3 operator-(const Vec3& b) const { return {x - b.x, y - b.y, z - b.z}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& b) { x += b.x; y += b.y; z += b.z; return *this; }
    Vec3& operator-=(const Vec3& b) { x -= b.x; y -= b.y; z -= b.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
    bool operator==(const Vec3&) const = default;

    // componentwise product (color modulation)
    Vec3 cmul(const Vec3& b) const { return {x * b.x, y * b.y, z * b.z}; }

    double dot(const Vec3& b) const { return x * b.x + y * b.y + z * b.z; }
    Vec3 cross(const Vec3& b) const {
        return {y * b.z - z * b.y, z * b.x - x * b.z, x * b.y - y * b.x};
    }
    double norm2() const { return x * x + y * y + z * z; }
    double norm() const { return std::sqrt(norm2()); }
    Vec3 normalized() const {
        double n = norm();
        return n > 0 ? *this * (1.0 / n) : Vec3{};
    }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    double max_component() const { return std::fmax(x, std::fmax(y, z)); }
    double min_component() const { return std::fmin(x, std::fmin(y, z)); }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

using Point3 = Vec3;
using Rgb = Vec3;

inline Vec3 vmin(const Vec3& a, const Vec3& b) {
    return {std::fmin(a.x, b.x), std::fmin(a.y, b.y), std::fmin(a.z, b.z)};
}
inline Vec3 vmax(const Vec3& a, const Vec3& b) {
    return {std::fmax(a.x, b.x), std::fmax(a.y, b.y), std::fmax(a.z, b.z)};
}

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// --- 4x4 affine transform with cached inverse ---
//
// Composed as translate * rotZ * rotY * rotX * scale: a point is scaled,
// rotated about X then Y then Z, then translated. Euler angles in degrees.

struct Mat4 {
    double m[4][4] = {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}};

    static Mat4 identity() { return {}; }

    Mat4 operator*(const Mat4& b) const {
        Mat4 r;
        for (int i = 0; i < 4; i++)
            for (int j = 0; j < 4; j++) {
                double s = 0;
                for (int k = 0; k < 4; k++) s += m[i][k] * b.m[k][j];
                r.m[i][j] = s;
            }
        return r;
    }

    Point3 apply_point(const Point3& p) const {
        return {m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z + m[0][3],
                m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z + m[1][3],
                m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z + m[2][3]};
    }
    Vec3 apply_vector(const Vec3& v) const {
        return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
                m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
    }
    // upper-left 3x3 transposed, applied to v (for normals: pass the inverse)
    Vec3 apply_transposed3(const Vec3& v) const {
        return {m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z,
                m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
                m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z};
    }

    static Mat4 translation(const Vec3& t) {
        Mat4 r;
        r.m[0][3] = t.x; r.m[1][3] = t.y; r.m[2][3] = t.z;
        return r;
    }
    static Mat4 scaling(const Vec3& s) {
        Mat4 r;
        r.m[0][0] = s.x; r.m[1][1] = s.y; r.m[2][2] = s.z;
        return r;
    }
    static Mat4 rotation_x(double rad) {
        Mat4 r;
        double c = std::cos(rad), s = std::sin(rad);
        r.m[1][1] = c; r.m[1][2] = -s; r.m[2][1] = s; r.m[2][2] = c;
        return r;
    }
    static Mat4 rotation_y(double rad) {
        Mat4 r;
        double c = std::cos(rad), s = std::sin(rad);
        r.m[0][0] = c; r.m[0][2] = s; r.m[2][0] = -s; r.m[2][2] = c;
        return r;
    }
    static Mat4 rotation_z(double rad) {
        Mat4 r;
        double c = std::cos(rad), s = std::sin(rad);
        r.m[0][0] = c; r.m[0][1] = -s; r.m[1][0] = s; r.m[1][1] = c;
        return r;
    }
};

struct Transform {
    Mat4 fwd;
    Mat4 inv;

    static Transform identity() { return {Mat4::identity(), Mat4::identity()}; }

    // translate * rotZ * rotY * rotX * scale, rotations given as XYZ Euler degrees
    static Transform trs(const Vec3& translate, const Vec3& rotate_euler_deg, const Vec3& scale) {
        double rx = deg_to_rad(rotate_euler_deg.x);
        double ry = deg_to_rad(rotate_euler_deg.y);
        double rz = deg_to_rad(rotate_euler_deg.z);
        Mat4 fwd = Mat4::translation(translate) * Mat4::rotation_z(rz) * Mat4::rotation_y(ry) *
                   Mat4::rotation_x(rx) * Mat4::scaling(scale);
        Mat4 inv = Mat4::scaling({1.0 / scale.x, 1.0 / scale.y, 1.0 / scale.z}) *
                   Mat4::rotation_x(-rx) * Mat4::rotation_y(-ry) * Mat4::rotation_z(-rz) *
                   Mat4::translation(-translate);
        return {fwd, inv};
    }

    Point3 apply_point(const Point3& p) const { return fwd.apply_point(p); }
    Vec3 apply_vector(const Vec3& v) const { return fwd.apply_vector(v); }
    // normals transform by the inverse transpose
    Vec3 apply_normal(const Vec3& n) const { return inv.apply_transposed3(n).normalized(); }
};

// --- Deterministic RNG ---
//
// SplitMix64: the single random stream used everywhere (weight init, pixel
// jitter, test scene generation). state -> next 64-bit value:
//   z  = state += 0x9E3779B97F4A7C15
//   z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
//   z ^= z >> 27;  z *= 0x94D049BB133111EB
//   z ^= z >> 31
// uniform doubles take the top 53 bits / 2^53.

struct SplitMix64 {
    uint64_t state = 0;

    explicit SplitMix64(uint64_t seed = 0) : state(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    // uniform in [0, 1)
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }
    // uniform in [lo, hi)
    double next_double(double lo, double hi) { return lo + (hi - lo) * next_double(); }
    uint64_t next_below(uint64_t n) { return next_u64() % n; }
};

// stable mixing of two seeds into one stream seed (pixel jitter etc.)
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    SplitMix64 s(a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2)));
    return s.next_u64();
}

}  // namespace advray
