#pragma once

// Regularity features that separate built from grown structures, and a
// box-counting estimate of self-similarity.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"
#include "voxel.hpp"
#include "world.hpp"

namespace domus {

namespace detail {

inline Box require_nonempty(const VoxelStructure& s) {
    auto b = s.bounds();
    if (!b) throw EmptyStructure();
    return *b;
}

inline Offset unit(Axis a) {
    Offset o{};
    o[a] = 1;
    return o;
}

} // namespace detail

/// Longest run of consecutive occupied cells along an axis over the
/// bounding-box extent on that axis, maximized over the axes on which the
/// structure has extent > 1. A single cell scores 1.
inline double straightness_score(const VoxelStructure& s) {
    const Box box = detail::require_nonempty(s);
    double best = -1;
    for (Axis a : kAxes) {
        const std::int64_t extent = box.extent(a);
        if (extent <= 1) continue;
        const Offset step = detail::unit(a);
        std::int64_t longest = 0;
        s.for_each_cell([&](const Cell& c) {
            if (s.occupied(c - step)) return;  // not the start of a run
            std::int64_t len = 1;
            while (s.occupied(c + Offset{step.x * len, step.y * len, step.z * len})) ++len;
            longest = std::max(longest, len);
        });
        best = std::max(best, static_cast<double>(longest) / static_cast<double>(extent));
    }
    return best < 0 ? 1.0 : best;
}

/// Fraction of exposed faces that lie in flat patches of at least
/// `min_patch` faces. A patch is a 4-connected set of coplanar exposed
/// faces sharing an outward direction.
inline double planarity_score(const VoxelStructure& s, std::size_t min_patch = 4) {
    detail::require_nonempty(s);
    const auto& d = s.dims();
    const std::size_t volume = s.raw().size();
    // face id = direction * volume + cell index
    std::vector<std::uint8_t> exposed(6 * volume, 0), seen(6 * volume, 0);
    std::size_t total = 0;
    s.for_each_cell([&](const Cell& c) {
        for (std::size_t dir = 0; dir < 6; ++dir) {
            Cell n = c + kFaceNeighbours[dir];
            if (!d.contains(n) || !s.occupied(n)) {
                exposed[dir * volume + s.index(c)] = 1;
                ++total;
            }
        }
    });
    std::size_t in_patches = 0;
    std::vector<Cell> stack;
    s.for_each_cell([&](const Cell& c) {
        for (std::size_t dir = 0; dir < 6; ++dir) {
            const std::size_t id = dir * volume + s.index(c);
            if (!exposed[id] || seen[id]) continue;
            const Axis normal = kAxes[dir / 2];
            std::size_t area = 0;
            seen[id] = 1;
            stack.assign(1, c);
            while (!stack.empty()) {
                Cell f = stack.back();
                stack.pop_back();
                ++area;
                for (Axis a : kAxes) {
                    if (a == normal) continue;
                    for (int sign : {-1, 1}) {
                        Offset o = detail::unit(a);
                        Cell n{f.x + sign * o.x, f.y + sign * o.y, f.z + sign * o.z};
                        if (!d.contains(n)) continue;
                        const std::size_t nid = dir * volume + s.index(n);
                        if (exposed[nid] && !seen[nid]) {
                            seen[nid] = 1;
                            stack.push_back(n);
                        }
                    }
                }
            }
            if (area >= min_patch) in_patches += area;
        }
    });
    return static_cast<double>(in_patches) / static_cast<double>(total);
}

/// Fraction of occupied cells whose mirror image across the bounding-box
/// mid-plane normal to `axis` is occupied.
inline double mirror_symmetry(const VoxelStructure& s, Axis axis) {
    const Box box = detail::require_nonempty(s);
    std::size_t matched = 0;
    s.for_each_cell([&](const Cell& c) {
        Cell m = c;
        m[axis] = box.lo[axis] + box.hi[axis] - c[axis];
        matched += s.occupied(m);
    });
    return static_cast<double>(matched) / static_cast<double>(s.count());
}

/// Best mirror symmetry over the axes on which the structure has extent
/// > 1 (a flat axis is trivially symmetric). A single cell scores 1.
inline double symmetry_score(const VoxelStructure& s) {
    const Box box = detail::require_nonempty(s);
    double best = -1;
    for (Axis a : kAxes)
        if (box.extent(a) > 1) best = std::max(best, mirror_symmetry(s, a));
    return best < 0 ? 1.0 : best;
}

struct FractalEstimate {
    double dimension = 0;
    double r2 = 0;
    std::vector<std::int64_t> box_sizes;
    std::vector<std::size_t> box_counts;
};

/// Box-counting dimension: boxes of side 1, 2, 4, ... up to half the
/// largest bounding-box extent, aligned to the bounding box's minimum
/// corner. Slope and r^2 of the least-squares line of ln N against ln(1/size).
inline FractalEstimate box_counting_dimension(const VoxelStructure& s) {
    const Box box = detail::require_nonempty(s);
    std::int64_t max_extent = 0;
    for (Axis a : kAxes) max_extent = std::max(max_extent, box.extent(a));
    FractalEstimate est;
    for (std::int64_t size = 1; 2 * size <= max_extent; size *= 2) est.box_sizes.push_back(size);
    if (est.box_sizes.size() < 3)
        throw TooSmall("box counting needs a bounding-box extent of at least 8, got " + std::to_string(max_extent));

    const auto cells = s.cells();
    std::vector<std::tuple<std::int64_t, std::int64_t, std::int64_t>> keys;
    keys.reserve(cells.size());
    for (auto size : est.box_sizes) {
        keys.clear();
        for (const auto& c : cells)
            keys.emplace_back((c.x - box.lo.x) / size, (c.y - box.lo.y) / size, (c.z - box.lo.z) / size);
        std::sort(keys.begin(), keys.end());
        est.box_counts.push_back(static_cast<std::size_t>(std::unique(keys.begin(), keys.end()) - keys.begin()));
    }

    const double n = static_cast<double>(est.box_sizes.size());
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < est.box_sizes.size(); ++i) {
        double x = -std::log(static_cast<double>(est.box_sizes[i]));
        double y = std::log(static_cast<double>(est.box_counts[i]));
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    const double vx = sxx - sx * sx / n;
    const double vy = syy - sy * sy / n;
    const double cxy = sxy - sx * sy / n;
    est.dimension = cxy / vx;
    est.r2 = vy <= 1e-15 ? 1.0 : std::clamp(cxy * cxy / (vx * vy), 0.0, 1.0);
    return est;
}

enum class Label { Natural, Artificial };

inline const char* label_name(Label l) noexcept { return l == Label::Natural ? "Natural" : "Artificial"; }

struct NaturalnessOptions {
    double threshold = 0.5;
    std::size_t min_patch = 4;
};

struct NaturalnessReport {
    double straightness = 0;
    double planarity = 0;
    double symmetry = 0;
    /// Absent when the structure is too small for three box sizes.
    std::optional<FractalEstimate> fractal;
    double regularity_index = 0;
    double naturalness = 0;
    double threshold = 0.5;
    Label label = Label::Artificial;
};

inline NaturalnessReport naturalness_report(const VoxelStructure& s, const NaturalnessOptions& opt = {}) {
    detail::require_nonempty(s);
    NaturalnessReport r;
    r.straightness = straightness_score(s);
    r.planarity = planarity_score(s, opt.min_patch);
    r.symmetry = symmetry_score(s);
    try {
        r.fractal = box_counting_dimension(s);
    } catch (const TooSmall&) {
        r.fractal.reset();
    }
    r.regularity_index = (r.straightness + r.planarity + r.symmetry) / 3.0;
    r.naturalness = 1.0 - r.regularity_index;
    r.threshold = opt.threshold;
    r.label = r.naturalness >= opt.threshold ? Label::Natural : Label::Artificial;
    return r;
}

} // namespace domus
