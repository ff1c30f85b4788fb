#pragma once

// Perceptual model: a dictionary of primitive patterns, a greedy cover of a
// structure by translated copies of them, and the beauty score
//
//   score = D * N + r
//
// where D is the byte length of the stamp list that explains the covered
// cells, N the dictionary size, and r the synthesized program length of the
// cells left unexplained. Lower scores are more beautiful.

#include <algorithm>
#include <cstdint>
#include <queue>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_set>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"
#include "synthesis.hpp"
#include "vm.hpp"
#include "voxel.hpp"

namespace domus {

struct Pattern {
    std::string name;
    std::vector<Offset> cells;  // sorted, min corner at the origin

    Offset extent() const {
        Offset e{0, 0, 0};
        for (const auto& c : cells)
            for (Axis a : kAxes) e[a] = std::max(e[a], c[a] + 1);
        return e;
    }
};

class PatternDictionary {
public:
    PatternDictionary() = default;

    /// Adds a pattern; cells are shifted so their minimum corner is the
    /// origin. Names must be unique identifiers.
    void add(std::string name, std::vector<Offset> cells) {
        if (!is_identifier(name)) throw FormatError("pattern name '" + name + "' is not an identifier");
        for (const auto& p : patterns_)
            if (p.name == name) throw FormatError("duplicate pattern name '" + name + "'");
        if (cells.empty()) throw FormatError("pattern '" + name + "' has no cells");
        Offset lo = cells.front();
        for (const auto& c : cells)
            for (Axis a : kAxes) lo[a] = std::min(lo[a], c[a]);
        for (auto& c : cells) c = c - lo;
        std::sort(cells.begin(), cells.end());
        cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
        patterns_.push_back({std::move(name), std::move(cells)});
    }

    const std::vector<Pattern>& patterns() const noexcept { return patterns_; }
    std::size_t size() const noexcept { return patterns_.size(); }
    bool empty() const noexcept { return patterns_.empty(); }
    const Pattern& operator[](std::size_t i) const { return patterns_[i]; }

private:
    std::vector<Pattern> patterns_;
};

// .pat files: blocks of "PATTERN name" followed by "x y z" offset lines,
// separated by blank lines.

inline PatternDictionary from_pat_text(std::string_view text) {
    PatternDictionary dict;
    std::istringstream in{std::string(text)};
    std::string line;
    std::string name;
    std::vector<Offset> cells;
    bool open = false;
    std::size_t lineno = 0;
    auto close = [&] {
        if (open) dict.add(name, cells);
        open = false;
        cells.clear();
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) {
            close();
            continue;
        }
        std::istringstream ls(line);
        std::string first;
        ls >> first;
        if (first == "PATTERN") {
            close();
            if (!(ls >> name)) throw FormatError("line " + std::to_string(lineno) + ": PATTERN needs a name");
            open = true;
            continue;
        }
        if (!open) throw FormatError("line " + std::to_string(lineno) + ": offset outside a PATTERN block");
        auto x = detail::parse_int(first);
        std::string ys, zs, extra;
        ls >> ys >> zs;
        auto y = detail::parse_int(ys);
        auto z = detail::parse_int(zs);
        if (!x || !y || !z || (ls >> extra))
            throw FormatError("line " + std::to_string(lineno) + ": expected 'x y z'");
        cells.push_back({*x, *y, *z});
    }
    close();
    return dict;
}

inline std::string to_pat_text(const PatternDictionary& dict) {
    std::string out;
    for (std::size_t i = 0; i < dict.size(); ++i) {
        if (i) out += "\n";
        out += "PATTERN " + dict[i].name + "\n";
        for (const auto& c : dict[i].cells)
            out += std::to_string(c.x) + " " + std::to_string(c.y) + " " + std::to_string(c.z) + "\n";
    }
    return out;
}

struct Placement {
    std::size_t pattern = 0;
    std::string name;
    Cell anchor;

    friend bool operator==(const Placement&, const Placement&) = default;
};

struct Cover {
    std::vector<Placement> placements;  // in selection order
    std::vector<Cell> covered;          // (z, y, x) order
    std::vector<Cell> residual;         // (z, y, x) order
};

/// Greedy cover by translated patterns. Each round takes the placement
/// lying entirely on occupied cells that covers the most new cells; ties go
/// to the lowest (pattern index, z, y, x). Placements may overlap.
inline Cover cover(const VoxelStructure& s, const PatternDictionary& dict) {
    using Key = std::tuple<std::size_t, std::int64_t, std::int64_t, std::int64_t>;  // (pattern, z, y, x)
    struct Entry {
        std::size_t gain;
        Key order;
        bool operator<(const Entry& o) const {
            if (gain != o.gain) return gain < o.gain;
            return order > o.order;
        }
    };

    std::priority_queue<Entry> heap;
    const auto cells = s.cells();
    for (std::size_t p = 0; p < dict.size(); ++p) {
        const auto& pat = dict[p];
        for (const auto& c : cells) {
            Cell anchor = c - pat.cells.front();
            bool fits = std::all_of(pat.cells.begin(), pat.cells.end(),
                                    [&](const Offset& o) { return s.occupied(anchor + o); });
            if (fits) heap.push({pat.cells.size(), Key{p, anchor.z, anchor.y, anchor.x}});
        }
    }

    std::vector<std::uint8_t> is_covered(s.raw().size(), 0);
    Cover out;
    auto gain_of = [&](const Entry& e) {
        const auto& pat = dict[std::get<0>(e.order)];
        Cell anchor{std::get<3>(e.order), std::get<2>(e.order), std::get<1>(e.order)};
        std::size_t g = 0;
        for (const auto& o : pat.cells) g += !is_covered[s.index(anchor + o)];
        return g;
    };
    while (!heap.empty()) {
        Entry top = heap.top();
        heap.pop();
        std::size_t g = gain_of(top);
        if (g == 0) continue;
        if (g != top.gain) {
            heap.push({g, top.order});
            continue;
        }
        std::size_t p = std::get<0>(top.order);
        Cell anchor{std::get<3>(top.order), std::get<2>(top.order), std::get<1>(top.order)};
        for (const auto& o : dict[p].cells) is_covered[s.index(anchor + o)] = 1;
        out.placements.push_back({p, dict[p].name, anchor});
    }
    for (const auto& c : cells) (is_covered[s.index(c)] ? out.covered : out.residual).push_back(c);
    return out;
}

inline std::string stamp_line(const Placement& p) {
    return "STAMP " + p.name + " " + std::to_string(p.anchor.x) + " " + std::to_string(p.anchor.y) + " " +
           std::to_string(p.anchor.z);
}

/// Bytes of the stamp list: one "STAMP name x y z" line per placement,
/// newline-separated.
inline std::size_t description_length(const Cover& c) {
    if (c.placements.empty()) return 0;
    std::size_t n = c.placements.size() - 1;
    for (const auto& p : c.placements) n += stamp_line(p).size();
    return n;
}

inline VoxelStructure residual_structure(const Dims& dims, const Cover& c) {
    return VoxelStructure(dims, c.residual);
}

struct BeautyScore {
    std::size_t D = 0;      // description length given the dictionary
    std::size_t N = 0;      // dictionary size
    std::size_t r = 0;      // residual complexity
    std::size_t score = 0;  // D * N + r; lower is more beautiful
    Cover cover;
    ComplexityBound residual_witness;
};

inline BeautyScore beauty_score(const VoxelStructure& s, const PatternDictionary& dict,
                                const SynthesisOptions& opt = {}) {
    BeautyScore b;
    b.cover = cover(s, dict);
    b.D = description_length(b.cover);
    b.N = dict.size();
    b.residual_witness = synthesize_min(residual_structure(s.dims(), b.cover), opt);
    b.r = b.residual_witness.length;
    b.score = b.D * b.N + b.r;
    return b;
}

} // namespace domus
