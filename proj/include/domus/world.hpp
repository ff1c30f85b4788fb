#pragma once

#include <cstdint>
#include <deque>
#include <istream>
#include <limits>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "geometry.hpp"
#include "voxel.hpp"

namespace domus {

inline constexpr std::array<Offset, 6> kFaceNeighbours{
    Offset{1, 0, 0}, Offset{-1, 0, 0}, Offset{0, 1, 0}, Offset{0, -1, 0}, Offset{0, 0, 1}, Offset{0, 0, -1}};

// ---------------------------------------------------------------------------
// static support

struct StabilityReport {
    bool stable = true;
    std::vector<Cell> unstable_cells;  // (z, y, x) order
    std::size_t supported_count = 0;
};

/// Per-cell support flags for `s` (indexed like VoxelStructure::raw()).
///
/// A cell is vertically supported when it sits on the ground or on a
/// vertically supported cell. Any other occupied cell is supported if a
/// vertically supported cell in the same layer reaches it through at most
/// `max_overhang` face-adjacent occupied steps.
inline std::vector<std::uint8_t> support_map(const VoxelStructure& s, std::int64_t max_overhang = 2) {
    const Dims& d = s.dims();
    std::vector<std::uint8_t> vertical(s.raw().size(), 0), supported(s.raw().size(), 0);
    std::vector<std::int64_t> dist(s.raw().size(), -1);
    std::deque<Cell> queue;
    for (std::int64_t z = 0; z < d.nz; ++z) {
        queue.clear();
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x) {
                Cell c{x, y, z};
                if (!s.occupied(c)) continue;
                auto i = s.index(c);
                if (z == 0 || vertical[s.index({x, y, z - 1})]) {
                    vertical[i] = supported[i] = 1;
                    dist[i] = 0;
                    queue.push_back(c);
                }
            }
        while (!queue.empty()) {
            Cell c = queue.front();
            queue.pop_front();
            auto dc = dist[s.index(c)];
            if (dc >= max_overhang) continue;
            for (std::size_t k = 0; k < 4; ++k) {
                Cell n = c + kFaceNeighbours[k];
                if (!s.occupied(n)) continue;
                auto j = s.index(n);
                if (dist[j] >= 0) continue;
                dist[j] = dc + 1;
                supported[j] = 1;
                queue.push_back(n);
            }
        }
    }
    return supported;
}

inline StabilityReport check_stability(const VoxelStructure& s, std::int64_t max_overhang = 2) {
    StabilityReport r;
    auto sup = support_map(s, max_overhang);
    s.for_each_cell([&](const Cell& c) {
        if (sup[s.index(c)]) ++r.supported_count;
        else r.unstable_cells.push_back(c);
    });
    r.stable = r.unstable_cells.empty();
    return r;
}

// ---------------------------------------------------------------------------
// enclosure

/// Empty cells that cannot reach the boundary of the world through
/// face-connected empty cells.
inline std::size_t enclosed_volume(const VoxelStructure& s) {
    const Dims& d = s.dims();
    std::vector<std::uint8_t> outside(s.raw().size(), 0);
    std::vector<Cell> stack;
    auto seed = [&](const Cell& c) {
        auto i = s.index(c);
        if (!s.raw()[i] && !outside[i]) {
            outside[i] = 1;
            stack.push_back(c);
        }
    };
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x)
                if (x == 0 || y == 0 || z == 0 || x == d.nx - 1 || y == d.ny - 1 || z == d.nz - 1)
                    seed({x, y, z});
    while (!stack.empty()) {
        Cell c = stack.back();
        stack.pop_back();
        for (const auto& o : kFaceNeighbours) {
            Cell n = c + o;
            if (d.contains(n)) seed(n);
        }
    }
    std::size_t empty = static_cast<std::size_t>(d.volume()) - s.count();
    std::size_t reached = 0;
    for (auto v : outside) reached += v;
    return empty - reached;
}

// ---------------------------------------------------------------------------
// functional constraints

struct Stability {
    std::int64_t max_overhang = 2;
};
struct EnclosedVolumeAtLeast {
    std::size_t v_min = 0;
};
struct MaterialAtMost {
    std::size_t m_max = 0;
};
struct WithinBox {
    Box box;
};

using ConstraintKind = std::variant<Stability, EnclosedVolumeAtLeast, MaterialAtMost, WithinBox>;

struct Constraint {
    ConstraintKind kind;
    double weight = 1.0;  // bytes-equivalent per unit of violation
};

struct ConstraintSet {
    std::vector<Constraint> constraints;

    ConstraintSet() = default;
    ConstraintSet(std::initializer_list<Constraint> il) : constraints(il) {
        for (const auto& c : constraints)
            if (!(c.weight >= 0)) throw BadLiteral("constraint weights must be >= 0");
    }
};

struct ConstraintEvaluation {
    std::vector<double> penalties;  // one per constraint, same order
    double total = 0;
};

/// Violation magnitude of one constraint (before weighting).
inline double violation(const VoxelStructure& s, const ConstraintKind& k) {
    return std::visit(
        [&](const auto& c) -> double {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, Stability>) {
                return static_cast<double>(check_stability(s, c.max_overhang).unstable_cells.size());
            } else if constexpr (std::is_same_v<T, EnclosedVolumeAtLeast>) {
                auto v = enclosed_volume(s);
                return v >= c.v_min ? 0.0 : static_cast<double>(c.v_min - v);
            } else if constexpr (std::is_same_v<T, MaterialAtMost>) {
                return s.count() <= c.m_max ? 0.0 : static_cast<double>(s.count() - c.m_max);
            } else {
                std::size_t outside = 0;
                s.for_each_cell([&](const Cell& cell) { outside += !c.box.contains(cell); });
                return static_cast<double>(outside);
            }
        },
        k);
}

inline ConstraintEvaluation eval_constraints(const VoxelStructure& s, const ConstraintSet& cs) {
    ConstraintEvaluation e;
    for (const auto& c : cs.constraints) {
        double v = violation(s, c.kind);
        double p = v == 0 ? 0.0 : c.weight * v;
        e.penalties.push_back(p);
        e.total += p;
    }
    return e;
}

// JSON: [{"kind": "Stability", "params": {"max_overhang": 2}, "weight": 10}, ...]
// WithinBox params are {"min": [x, y, z], "max": [x, y, z]}, both inclusive.

inline ConstraintSet constraints_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw FormatError("constraint file must hold a JSON array");
    ConstraintSet cs;
    for (const auto& item : j) {
        try {
            std::string kind = item.at("kind").get<std::string>();
            const nlohmann::json params = item.value("params", nlohmann::json::object());
            double w = item.value("weight", 1.0);
            if (!(w >= 0)) throw FormatError("constraint weight must be >= 0");
            Constraint c;
            c.weight = w;
            if (kind == "Stability") {
                c.kind = Stability{params.value("max_overhang", std::int64_t{2})};
            } else if (kind == "EnclosedVolumeAtLeast") {
                c.kind = EnclosedVolumeAtLeast{params.at("v_min").get<std::size_t>()};
            } else if (kind == "MaterialAtMost") {
                c.kind = MaterialAtMost{params.at("m_max").get<std::size_t>()};
            } else if (kind == "WithinBox") {
                auto lo = params.at("min").get<std::array<std::int64_t, 3>>();
                auto hi = params.at("max").get<std::array<std::int64_t, 3>>();
                c.kind = WithinBox{Box{{lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]}}};
            } else {
                throw FormatError("unknown constraint kind '" + kind + "'");
            }
            cs.constraints.push_back(std::move(c));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("bad constraint entry: ") + e.what());
        }
    }
    return cs;
}

inline nlohmann::json constraints_to_json(const ConstraintSet& cs) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : cs.constraints) {
        nlohmann::json item;
        item["weight"] = c.weight;
        std::visit(
            [&](const auto& k) {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, Stability>) {
                    item["kind"] = "Stability";
                    item["params"] = {{"max_overhang", k.max_overhang}};
                } else if constexpr (std::is_same_v<T, EnclosedVolumeAtLeast>) {
                    item["kind"] = "EnclosedVolumeAtLeast";
                    item["params"] = {{"v_min", k.v_min}};
                } else if constexpr (std::is_same_v<T, MaterialAtMost>) {
                    item["kind"] = "MaterialAtMost";
                    item["params"] = {{"m_max", k.m_max}};
                } else {
                    item["kind"] = "WithinBox";
                    item["params"] = {{"min", {k.box.lo.x, k.box.lo.y, k.box.lo.z}},
                                      {"max", {k.box.hi.x, k.box.hi.y, k.box.hi.z}}};
                }
            },
            c.kind);
        out.push_back(std::move(item));
    }
    return out;
}

// ---------------------------------------------------------------------------
// .vox.txt

/// Layered text form: "DIMS nx ny nz", then per layer "LAYER z" followed by
/// ny rows of nx characters ('#' occupied, '.' empty), row y=0 first. No
/// trailing newline.
inline std::string to_vox_text(const VoxelStructure& s) {
    const Dims& d = s.dims();
    std::string out = "DIMS " + std::to_string(d.nx) + " " + std::to_string(d.ny) + " " + std::to_string(d.nz);
    for (std::int64_t z = 0; z < d.nz; ++z) {
        out += "\nLAYER " + std::to_string(z);
        for (std::int64_t y = 0; y < d.ny; ++y) {
            out.push_back('\n');
            for (std::int64_t x = 0; x < d.nx; ++x) out.push_back(s.occupied({x, y, z}) ? '#' : '.');
        }
    }
    return out;
}

inline VoxelStructure from_vox_text(std::string_view text) {
    std::vector<std::string> lines;
    {
        std::string cur;
        for (char c : text) {
            if (c == '\n') {
                lines.push_back(cur);
                cur.clear();
            } else if (c != '\r') {
                cur.push_back(c);
            }
        }
        if (!cur.empty()) lines.push_back(cur);
    }
    if (lines.empty()) throw FormatError("empty structure file");
    Dims d;
    {
        std::istringstream hs(lines[0]);
        std::string kw, extra;
        if (!(hs >> kw >> d.nx >> d.ny >> d.nz) || kw != "DIMS" || (hs >> extra))
            throw FormatError("line 1: expected 'DIMS nx ny nz'");
        if (d.nx <= 0 || d.ny <= 0 || d.nz <= 0) throw FormatError("line 1: dims must be positive");
    }
    std::size_t expected = 1 + static_cast<std::size_t>(d.nz * (d.ny + 1));
    if (lines.size() != expected)
        throw FormatError("expected " + std::to_string(expected) + " lines, found " + std::to_string(lines.size()));
    VoxelStructure s(d);
    std::size_t li = 1;
    for (std::int64_t z = 0; z < d.nz; ++z) {
        if (lines[li] != "LAYER " + std::to_string(z))
            throw FormatError("line " + std::to_string(li + 1) + ": expected 'LAYER " + std::to_string(z) + "'");
        ++li;
        for (std::int64_t y = 0; y < d.ny; ++y, ++li) {
            const auto& row = lines[li];
            if (static_cast<std::int64_t>(row.size()) != d.nx)
                throw FormatError("line " + std::to_string(li + 1) + ": expected " + std::to_string(d.nx) + " cells");
            for (std::int64_t x = 0; x < d.nx; ++x) {
                if (row[x] == '#') s.set({x, y, z});
                else if (row[x] != '.') throw FormatError("line " + std::to_string(li + 1) + ": bad cell character");
            }
        }
    }
    return s;
}

} // namespace domus
