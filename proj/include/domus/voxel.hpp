#pragma once

#include <cstddef>
#include <cstdint>
#include <algorithm>
#include <optional>
#include <sstream>
#include <vector>

#include "geometry.hpp"

namespace domus {

/// Dense occupancy grid. A single material; a cell is either empty or filled.
class VoxelStructure {
public:
    VoxelStructure() : VoxelStructure(Dims{1, 1, 1}) {}

    explicit VoxelStructure(Dims dims) : dims_(dims) {
        require_positive(dims_);
        grid_.assign(static_cast<std::size_t>(dims_.volume()), 0);
    }

    VoxelStructure(Dims dims, const std::vector<Cell>& cells) : VoxelStructure(dims) {
        for (const auto& c : cells) set(c);
    }

    const Dims& dims() const noexcept { return dims_; }
    bool in_bounds(const Cell& c) const noexcept { return dims_.contains(c); }

    /// Out-of-bounds cells read as empty.
    bool occupied(const Cell& c) const noexcept {
        return in_bounds(c) && grid_[index(c)] != 0;
    }

    void set(const Cell& c, bool value = true) {
        if (!in_bounds(c)) {
            std::ostringstream os;
            os << "cell " << c << " outside world";
            throw OutOfBounds(os.str());
        }
        auto& slot = grid_[index(c)];
        if (slot != static_cast<std::uint8_t>(value)) {
            count_ += value ? 1 : -1;
            slot = value ? 1 : 0;
        }
    }
    void clear(const Cell& c) { set(c, false); }

    std::size_t count() const noexcept { return count_; }
    bool empty() const noexcept { return count_ == 0; }

    /// Occupied cells in (z, y, x) lexicographic order.
    std::vector<Cell> cells() const {
        std::vector<Cell> out;
        out.reserve(count_);
        for_each_cell([&](const Cell& c) { out.push_back(c); });
        return out;
    }

    template <class F>
    void for_each_cell(F&& f) const {
        if (count_ == 0) return;
        std::size_t i = 0;
        for (std::int64_t z = 0; z < dims_.nz; ++z)
            for (std::int64_t y = 0; y < dims_.ny; ++y)
                for (std::int64_t x = 0; x < dims_.nx; ++x, ++i)
                    if (grid_[i]) f(Cell{x, y, z});
    }

    /// Tight bounding box of the occupied cells; nullopt when empty.
    std::optional<Box> bounds() const {
        if (count_ == 0) return std::nullopt;
        Box b{{dims_.nx, dims_.ny, dims_.nz}, {-1, -1, -1}};
        for_each_cell([&](const Cell& c) {
            for (Axis a : kAxes) {
                b.lo[a] = std::min(b.lo[a], c[a]);
                b.hi[a] = std::max(b.hi[a], c[a]);
            }
        });
        return b;
    }

    /// Raw row-major bytes (x fastest, then y, then z); one byte per cell.
    const std::vector<std::uint8_t>& raw() const noexcept { return grid_; }

    std::size_t index(const Cell& c) const noexcept {
        return static_cast<std::size_t>((c.z * dims_.ny + c.y) * dims_.nx + c.x);
    }

    friend bool operator==(const VoxelStructure& a, const VoxelStructure& b) {
        return a.dims_ == b.dims_ && a.grid_ == b.grid_;
    }

private:
    Dims dims_;
    std::vector<std::uint8_t> grid_;
    std::size_t count_ = 0;
};

/// Copy of `s` shifted by `delta`, in a world of `dims`; throws OutOfBounds
/// if any cell leaves the world.
inline VoxelStructure translated(const VoxelStructure& s, const Offset& delta, const Dims& dims) {
    VoxelStructure out(dims);
    s.for_each_cell([&](const Cell& c) { out.set(c + delta); });
    return out;
}

} // namespace domus
