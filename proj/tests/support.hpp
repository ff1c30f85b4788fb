#pragma once

#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <domus/domus.hpp>

namespace domus::testing {

inline std::string corpus(const std::string& name) { return std::string(DOMUS_CORPUS_DIR) + "/" + name; }

inline std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline VoxelStructure cells_in(Dims d, std::vector<Cell> cells) { return VoxelStructure(d, cells); }

/// Uniformly random subset with at most `max_cells` cells.
inline VoxelStructure random_structure(Rng& rng, Dims d, std::size_t max_cells) {
    VoxelStructure s(d);
    std::size_t n = 1 + rng.below(max_cells);
    for (std::size_t i = 0; i < n; ++i)
        s.set({rng.between(0, d.nx - 1), rng.between(0, d.ny - 1), rng.between(0, d.nz - 1)});
    return s;
}

/// Random structure biased toward runs and blocks, which exercises the
/// compression passes more than uniform noise does.
inline VoxelStructure random_blocky(Rng& rng, Dims d, std::size_t max_cells) {
    VoxelStructure s(d);
    std::size_t pieces = 1 + rng.below(4);
    for (std::size_t p = 0; p < pieces && s.count() < max_cells; ++p) {
        Cell lo{rng.between(0, d.nx - 1), rng.between(0, d.ny - 1), rng.between(0, d.nz - 1)};
        Offset ext{rng.between(1, 4), rng.between(1, 4), rng.between(1, 3)};
        for (std::int64_t z = lo.z; z < std::min(d.nz, lo.z + ext.z); ++z)
            for (std::int64_t y = lo.y; y < std::min(d.ny, lo.y + ext.y); ++y)
                for (std::int64_t x = lo.x; x < std::min(d.nx, lo.x + ext.x); ++x)
                    if (s.count() < max_cells) s.set({x, y, z});
    }
    return s;
}

/// Random syntactically valid program (may not execute in bounds).
inline Program random_program(Rng& rng, std::size_t defs = 2, std::size_t statements = 6) {
    Program p;
    std::vector<std::string> names;
    std::function<Block(int, bool)> block = [&](int depth, bool in_def) {
        Block b;
        std::size_t n = 1 + rng.below(statements);
        for (std::size_t i = 0; i < n; ++i) {
            switch (rng.below(depth > 0 ? 6 : 5)) {
            case 0: b.push_back(Place{}); break;
            case 1: b.push_back(Fill{rng.between(1, 3), rng.between(1, 3), rng.between(1, 3)}); break;
            case 2:
            case 3: {
                std::int64_t v = rng.between(1, 3);
                b.push_back(Move{kAxes[rng.below(3)], rng.chance(0.5) ? v : -v});
                break;
            }
            case 4: {
                std::size_t usable = in_def ? names.size() - 1 : names.size();
                if (usable == 0) b.push_back(Place{});
                else b.push_back(Call{names[rng.below(usable)], rng.between(1, 3)});
                break;
            }
            default: b.push_back(Repeat{rng.between(2, 4), block(depth - 1, in_def)});
            }
        }
        return b;
    };
    std::size_t nd = rng.below(defs + 1);
    for (std::size_t i = 0; i < nd; ++i) {
        names.push_back("d" + std::to_string(i));
        p.instructions.push_back(Def{names.back(), block(1, true)});
    }
    for (auto& ins : block(2, false)) p.instructions.push_back(std::move(ins));
    return p;
}

} // namespace domus::testing
