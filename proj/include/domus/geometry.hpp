#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <ostream>
#include <string>

#include "error.hpp"

namespace domus {

enum class Axis : std::uint8_t { X = 0, Y = 1, Z = 2 };

inline constexpr std::array<Axis, 3> kAxes{Axis::X, Axis::Y, Axis::Z};

inline constexpr char axis_name(Axis a) noexcept { return "XYZ"[static_cast<int>(a)]; }

/// Integer lattice point. Ordered (z, y, x) lexicographically, which is the
/// storage and traversal order used throughout the library.
struct Cell {
    std::int64_t x = 0;
    std::int64_t y = 0;
    std::int64_t z = 0;

    constexpr std::int64_t operator[](Axis a) const noexcept {
        return a == Axis::X ? x : a == Axis::Y ? y : z;
    }
    constexpr std::int64_t& operator[](Axis a) noexcept {
        return a == Axis::X ? x : a == Axis::Y ? y : z;
    }

    friend constexpr bool operator==(const Cell&, const Cell&) = default;
    friend constexpr std::strong_ordering operator<=>(const Cell& a, const Cell& b) noexcept {
        if (auto c = a.z <=> b.z; c != 0) return c;
        if (auto c = a.y <=> b.y; c != 0) return c;
        return a.x <=> b.x;
    }
    friend constexpr Cell operator+(Cell a, const Cell& b) noexcept {
        return {a.x + b.x, a.y + b.y, a.z + b.z};
    }
    friend constexpr Cell operator-(Cell a, const Cell& b) noexcept {
        return {a.x - b.x, a.y - b.y, a.z - b.z};
    }
    friend std::ostream& operator<<(std::ostream& os, const Cell& c) {
        return os << '(' << c.x << ',' << c.y << ',' << c.z << ')';
    }
};

using Offset = Cell;

/// World size in cells along each axis.
struct Dims {
    std::int64_t nx = 1;
    std::int64_t ny = 1;
    std::int64_t nz = 1;

    constexpr std::int64_t operator[](Axis a) const noexcept {
        return a == Axis::X ? nx : a == Axis::Y ? ny : nz;
    }
    constexpr std::int64_t volume() const noexcept { return nx * ny * nz; }
    constexpr std::int64_t max_extent() const noexcept {
        return nx > ny ? (nx > nz ? nx : nz) : (ny > nz ? ny : nz);
    }
    constexpr bool contains(const Cell& c) const noexcept {
        return c.x >= 0 && c.y >= 0 && c.z >= 0 && c.x < nx && c.y < ny && c.z < nz;
    }

    friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

inline void require_positive(const Dims& d) {
    if (d.nx <= 0 || d.ny <= 0 || d.nz <= 0)
        throw BadLiteral("dims must be positive, got " + std::to_string(d.nx) + " " +
                         std::to_string(d.ny) + " " + std::to_string(d.nz));
}

/// Inclusive axis-aligned box.
struct Box {
    Cell lo;
    Cell hi;

    constexpr bool contains(const Cell& c) const noexcept {
        return c.x >= lo.x && c.y >= lo.y && c.z >= lo.z && c.x <= hi.x && c.y <= hi.y &&
               c.z <= hi.z;
    }
    constexpr std::int64_t extent(Axis a) const noexcept { return hi[a] - lo[a] + 1; }

    friend constexpr bool operator==(const Box&, const Box&) = default;
};

} // namespace domus
