#pragma once

// Upper bounds on the shortest-program length of a structure.
//
// synthesize_min() runs a fixed pipeline of program transformations, each
// accepted only when it strictly shortens the canonical text:
//
//   literal -> maximal cuboids -> loop folding -> subroutine extraction
//
// exhaustive_min() is the independent oracle: it enumerates every canonical
// program up to a byte budget and keeps the shortest exact producer.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <functional>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "error.hpp"
#include "vm.hpp"
#include "voxel.hpp"

namespace domus {

enum class Method { Literal, Compressed, Exhaustive };

inline const char* method_name(Method m) noexcept {
    switch (m) {
    case Method::Literal: return "Literal";
    case Method::Compressed: return "Compressed";
    default: return "Exhaustive";
    }
}

/// A witness program and its canonical length.
struct ComplexityBound {
    Program program;
    std::size_t length = 0;
    Method method = Method::Literal;
};

struct SynthesisOptions {
    std::size_t cell_limit = 1'000'000;
    /// Loop folding and subroutine extraction are quadratic in the number of
    /// top-level instructions; larger programs skip them.
    std::size_t compression_item_limit = 20'000;
    std::size_t max_block_items = 64;
};

/// Visits cells in (z, y, x) order, moving the cursor with relative MOVEs
/// (X, Y, Z order) and emitting one PLACE per cell.
inline Program literal_program(const VoxelStructure& s) {
    Program p;
    Cell cursor{};
    s.for_each_cell([&](const Cell& c) {
        for (auto& m : moves_for(c - cursor)) p.instructions.push_back(std::move(m));
        p.instructions.push_back(Place{});
        cursor = c;
    });
    return p;
}

namespace detail {

struct Cuboid {
    Cell anchor;
    Offset extent;
};

/// Greedy decomposition: take the first uncovered cell in (z, y, x) order
/// and grow it as far as possible along the axes in `order`.
inline std::vector<Cuboid> greedy_cuboids(const VoxelStructure& s, const std::array<Axis, 3>& order) {
    const Dims& d = s.dims();
    std::vector<std::uint8_t> covered(s.raw().size(), 0);
    auto free = [&](const Cell& c) { return s.occupied(c) && !covered[s.index(c)]; };
    auto slab_free = [&](const Cell& lo, const Offset& ext) {
        for (std::int64_t z = lo.z; z < lo.z + ext.z; ++z)
            for (std::int64_t y = lo.y; y < lo.y + ext.y; ++y)
                for (std::int64_t x = lo.x; x < lo.x + ext.x; ++x)
                    if (!free({x, y, z})) return false;
        return true;
    };
    std::vector<Cuboid> out;
    s.for_each_cell([&](const Cell& c) {
        if (covered[s.index(c)]) return;
        Offset ext{1, 1, 1};
        for (Axis a : order) {
            while (c[a] + ext[a] < d[a]) {
                Cell lo = c;
                lo[a] = c[a] + ext[a];
                Offset slab = ext;
                slab[a] = 1;
                if (!slab_free(lo, slab)) break;
                ++ext[a];
            }
        }
        for (std::int64_t z = c.z; z < c.z + ext.z; ++z)
            for (std::int64_t y = c.y; y < c.y + ext.y; ++y)
                for (std::int64_t x = c.x; x < c.x + ext.x; ++x) covered[s.index({x, y, z})] = 1;
        out.push_back({c, ext});
    });
    return out;
}

inline Program cuboid_program(const std::vector<Cuboid>& cuboids) {
    Program p;
    Cell cursor{};
    for (const auto& q : cuboids) {
        for (auto& m : moves_for(q.anchor - cursor)) p.instructions.push_back(std::move(m));
        if (q.extent == Offset{1, 1, 1}) p.instructions.push_back(Place{});
        else p.instructions.push_back(Fill{q.extent.x, q.extent.y, q.extent.z});
        cursor = q.anchor;
    }
    return p;
}

/// (length, text) ordering used for every tie-break between witnesses.
inline bool shorter(const Program& a, const Program& b) {
    auto la = program_length(a), lb = program_length(b);
    if (la != lb) return la < lb;
    return serialize(a) < serialize(b);
}

/// Interns instructions by canonical text so blocks compare as int spans.
class Interner {
public:
    int id(const Instruction& ins) {
        auto [it, inserted] = ids_.emplace(serialize(ins), static_cast<int>(ids_.size()));
        return it->second;
    }

private:
    std::unordered_map<std::string, int> ids_;
};

inline std::size_t span_bytes(const std::vector<std::size_t>& prefix, std::size_t i, std::size_t j) {
    // bytes of items [i, j) including the j-i-1 separators between them
    return prefix[j] - prefix[i] + (j - i) - 1;
}

inline std::vector<std::size_t> prefix_sizes(const Block& b) {
    std::vector<std::size_t> prefix(b.size() + 1, 0);
    for (std::size_t i = 0; i < b.size(); ++i) prefix[i + 1] = prefix[i] + instruction_length(b[i]);
    return prefix;
}

inline std::size_t moves_bytes(const Offset& d) {
    std::size_t n = 0;
    for (Axis a : kAxes)
        if (d[a] != 0) n += 7 + digits(d[a]) + 1;  // line plus its separator
    return n;
}

/// One round of loop folding on `b`: replaces the most profitable run of
/// k >= 2 adjacent copies of a block by REPEAT k { block }. A run followed
/// by a partial copy whose missing suffix is only MOVEs is folded as k+1
/// copies plus compensating moves. Returns false when nothing shortens.
inline bool fold_once(Block& b, std::size_t max_items) {
    const std::size_t n = b.size();
    if (n < 2) return false;
    Interner in;
    std::vector<int> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = in.id(b[i]);
    auto prefix = prefix_sizes(b);

    struct Best {
        std::ptrdiff_t gain = 0;
        std::size_t i = 0, len = 0, reps = 0, consumed = 0;
        Offset comp{};
    } best;

    std::vector<std::size_t> run(n + 1, 0);
    for (std::size_t L = 1; L <= std::min(n / 2, max_items); ++L) {
        // run[j] = number of consecutive p >= j with ids[p] == ids[p + L]
        run[n - L] = 0;
        for (std::size_t j = n - L; j-- > 0;) run[j] = ids[j] == ids[j + L] ? run[j + 1] + 1 : 0;
        for (std::size_t i = 0; i + 2 * L <= n; ++i) {
            if (run[i] < L) continue;
            std::size_t k = 1 + run[i] / L;
            std::size_t body = span_bytes(prefix, i, i + L);
            std::size_t header = 9 + digits(static_cast<std::int64_t>(k));
            std::size_t folded = header + 1 + body + 2;
            std::ptrdiff_t gain = static_cast<std::ptrdiff_t>(span_bytes(prefix, i, i + k * L)) -
                                  static_cast<std::ptrdiff_t>(folded);
            auto consider = [&](std::ptrdiff_t g, std::size_t reps, std::size_t consumed, Offset comp) {
                if (g > best.gain || (g == best.gain && g > 0 && (i < best.i || (i == best.i && L < best.len))))
                    best = {g, i, L, reps, consumed, comp};
            };
            consider(gain, k, k * L, Offset{});

            // partial trailing copy: items[i+kL .. i+kL+t) == block[0..t), block[t..L) all moves
            std::size_t t = run[i] % L;
            if (t > 0) {
                bool tail_moves = true;
                Offset comp{};
                for (std::size_t q = i + t; q < i + L; ++q) {
                    if (!b[q].is<Move>()) {
                        tail_moves = false;
                        break;
                    }
                    const auto& m = b[q].as<Move>();
                    comp[m.axis] -= m.distance;
                }
                if (tail_moves) {
                    std::size_t header2 = 9 + digits(static_cast<std::int64_t>(k + 1));
                    std::size_t folded2 = header2 + 1 + body + 2 + moves_bytes(comp);
                    std::ptrdiff_t g2 = static_cast<std::ptrdiff_t>(span_bytes(prefix, i, i + k * L + t)) -
                                        static_cast<std::ptrdiff_t>(folded2);
                    consider(g2, k + 1, k * L + t, comp);
                }
            }
        }
    }
    if (best.gain <= 0) return false;

    Block body(b.begin() + static_cast<std::ptrdiff_t>(best.i),
               b.begin() + static_cast<std::ptrdiff_t>(best.i + best.len));
    Block out;
    out.reserve(n);
    for (std::size_t q = 0; q < best.i; ++q) out.push_back(std::move(b[q]));
    out.push_back(Repeat{static_cast<std::int64_t>(best.reps), std::move(body)});
    for (auto& m : moves_for(best.comp)) out.push_back(std::move(m));
    for (std::size_t q = best.i + best.consumed; q < n; ++q) out.push_back(std::move(b[q]));
    normalize_moves(out);
    b = std::move(out);
    return true;
}

inline void fold_loops(Block& b, std::size_t max_items) {
    while (fold_once(b, max_items)) {
    }
    for (auto& ins : b) {
        if (auto* r = std::get_if<Repeat>(&ins.op)) fold_loops(r->body, max_items);
        else if (auto* d = std::get_if<Def>(&ins.op)) fold_loops(d->body, max_items);
    }
}

inline std::string fresh_name(const Program& p, std::size_t& counter) {
    while (true) {
        std::string name;
        std::size_t v = counter++;
        do {
            name.insert(name.begin(), static_cast<char>('a' + v % 26));
            v /= 26;
        } while (v-- > 0);
        if (!p.find_def(name)) return name;
    }
}

/// One round of subroutine extraction over the top-level statements that
/// follow the DEF prefix: the most profitable repeated block becomes a DEF
/// and each non-overlapping occurrence becomes CALL plus the moves that
/// replay the block's net displacement.
inline bool extract_once(Program& p, std::size_t max_items, std::size_t& name_counter) {
    Block& all = p.instructions;
    std::size_t first = 0;
    while (first < all.size() && all[first].is<Def>()) ++first;
    const std::size_t n = all.size() - first;
    if (n < 2) return false;

    Interner in;
    std::vector<int> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = in.id(all[first + i]);
    std::vector<std::size_t> prefix(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + instruction_length(all[first + i]);

    std::string name = fresh_name(p, name_counter);
    --name_counter;  // only consumed if we commit

    struct Best {
        std::ptrdiff_t gain = 0;
        std::size_t start = 0, len = 0;
        std::vector<std::size_t> occ;
    } best;

    std::unordered_map<std::uint64_t, std::vector<std::size_t>> groups;
    for (std::size_t L = 1; L <= std::min(n / 2, max_items); ++L) {
        groups.clear();
        for (std::size_t i = 0; i + L <= n; ++i) {
            std::uint64_t h = 1469598103934665603ull;
            for (std::size_t q = i; q < i + L; ++q) h = (h ^ static_cast<std::uint64_t>(ids[q])) * 1099511628211ull;
            groups[h].push_back(i);
        }
        std::vector<std::pair<std::uint64_t, std::vector<std::size_t>*>> ordered;
        for (auto& [h, v] : groups)
            if (v.size() >= 2) ordered.emplace_back(v.front(), &v);
        std::sort(ordered.begin(), ordered.end(), [](auto& a, auto& b) { return a.first < b.first; });
        for (auto& [start0, vec] : ordered) {
            const auto& pos = *vec;
            // split hash bucket into exact-equality classes, greedy non-overlap
            std::vector<std::uint8_t> used(pos.size(), 0);
            for (std::size_t a = 0; a < pos.size(); ++a) {
                if (used[a]) continue;
                std::vector<std::size_t> occ;
                std::size_t last_end = 0;
                bool any = false;
                for (std::size_t c = a; c < pos.size(); ++c) {
                    if (used[c]) continue;
                    if (!std::equal(ids.begin() + pos[a], ids.begin() + pos[a] + L, ids.begin() + pos[c])) continue;
                    used[c] = 1;
                    if (any && pos[c] < last_end) continue;
                    occ.push_back(pos[c]);
                    last_end = pos[c] + L;
                    any = true;
                }
                if (occ.size() < 2) continue;
                const std::size_t s0 = first + occ.front();
                Block blk(all.begin() + static_cast<std::ptrdiff_t>(s0),
                          all.begin() + static_cast<std::ptrdiff_t>(s0 + L));
                Offset disp = net_displacement(blk);
                std::size_t bytes = span_bytes(prefix, occ.front(), occ.front() + L);
                std::size_t body = bytes;
                for (std::size_t q = L; q-- > 0 && blk[q].is<Move>();)
                    body -= instruction_length(blk[q]) + (q > 0 ? 1 : 0);
                if (body == 0) continue;  // block made only of moves
                std::size_t call = 5 + name.size();
                std::size_t def = 6 + name.size() + 1 + body + 2 + 1;
                std::ptrdiff_t m = static_cast<std::ptrdiff_t>(occ.size());
                std::ptrdiff_t gain = m * static_cast<std::ptrdiff_t>(bytes) -
                                      m * static_cast<std::ptrdiff_t>(call + moves_bytes(disp)) -
                                      static_cast<std::ptrdiff_t>(def);
                if (gain > best.gain) best = {gain, occ.front(), L, occ};
            }
        }
    }
    if (best.gain <= 0) return false;

    Program before = p;
    const std::size_t L = best.len;
    Block body(all.begin() + static_cast<std::ptrdiff_t>(first + best.start),
               all.begin() + static_cast<std::ptrdiff_t>(first + best.start + L));
    Offset disp = net_displacement(body);
    while (!body.empty() && body.back().is<Move>()) body.pop_back();

    Block out;
    out.reserve(all.size());
    for (std::size_t q = 0; q < first; ++q) out.push_back(std::move(all[q]));
    out.push_back(Def{name, std::move(body)});
    std::size_t oi = 0;
    for (std::size_t q = 0; q < n;) {
        if (oi < best.occ.size() && best.occ[oi] == q) {
            out.push_back(Call{name, 1});
            for (auto& m : moves_for(disp)) out.push_back(std::move(m));
            q += L;
            ++oi;
        } else {
            out.push_back(std::move(all[first + q]));
            ++q;
        }
    }
    normalize_moves(out);
    p.instructions = std::move(out);
    strip_dead_moves(p);
    if (program_length(p) >= program_length(before)) {
        p = std::move(before);
        return false;
    }
    ++name_counter;
    return true;
}

inline Program compress(Program p, const SynthesisOptions& opt) {
    if (p.instructions.size() > opt.compression_item_limit) return p;
    Program folded = p;
    fold_loops(folded.instructions, opt.max_block_items);
    strip_dead_moves(folded);
    if (program_length(folded) < program_length(p)) p = std::move(folded);
    std::size_t counter = 0;
    Program extracted = p;
    while (extract_once(extracted, std::min<std::size_t>(opt.max_block_items, 32), counter)) {
    }
    if (program_length(extracted) < program_length(p)) p = std::move(extracted);
    return p;
}

} // namespace detail

/// Shortest witness found by the compression pipeline. The result always
/// reproduces `s` exactly and is never longer than the literal program.
inline ComplexityBound synthesize_min(const VoxelStructure& s, const SynthesisOptions& opt = {}) {
    if (s.count() > opt.cell_limit)
        throw BudgetExceeded("structure has " + std::to_string(s.count()) + " cells, synthesis limit is " +
                             std::to_string(opt.cell_limit));
    const Program literal = literal_program(s);

    // cuboid pass: best of the six growth orders
    Program current = literal;
    {
        static constexpr std::array<std::array<Axis, 3>, 6> orders{{
            {Axis::X, Axis::Y, Axis::Z}, {Axis::X, Axis::Z, Axis::Y}, {Axis::Y, Axis::X, Axis::Z},
            {Axis::Y, Axis::Z, Axis::X}, {Axis::Z, Axis::X, Axis::Y}, {Axis::Z, Axis::Y, Axis::X}}};
        std::optional<Program> best;
        for (const auto& order : orders) {
            Program cand = detail::cuboid_program(detail::greedy_cuboids(s, order));
            if (!best || detail::shorter(cand, *best)) best = std::move(cand);
        }
        if (program_length(*best) < program_length(current)) current = std::move(*best);
    }

    // loops and subroutines on both the literal and the cuboid track
    Program a = detail::compress(literal, opt);
    Program b = current == literal ? a : detail::compress(current, opt);
    Program result = detail::shorter(b, a) ? std::move(b) : std::move(a);
    if (detail::shorter(current, result)) result = std::move(current);

    ComplexityBound out;
    out.length = program_length(result);
    out.method = result == literal ? Method::Literal : Method::Compressed;
    out.program = std::move(result);
    return out;
}

/// synthesize_min(a).length - synthesize_min(b).length.
inline std::int64_t relative_complexity(const VoxelStructure& a, const VoxelStructure& b,
                                        const SynthesisOptions& opt = {}) {
    return static_cast<std::int64_t>(synthesize_min(a, opt).length) -
           static_cast<std::int64_t>(synthesize_min(b, opt).length);
}

/// `preamble` followed by `witness`. Preamble DEFs must not clash with the
/// witness's names.
inline Program with_preamble(const Block& preamble, const Program& witness) {
    Program p;
    p.instructions = preamble;
    for (const auto& ins : witness.instructions) p.instructions.push_back(ins);
    validate(p);
    return p;
}

// ---------------------------------------------------------------------------
// exhaustive oracle

struct ExhaustiveOptions {
    /// Maximum number of complete programs executed before giving up.
    std::uint64_t node_budget = 400'000'000;
    unsigned workers = 1;
};

namespace detail {

/// Enumerates canonical programs of an exact byte length for a world of the
/// given dims. Integer literals are bounded by the dims: |MOVE| <= n-1 on
/// its axis, FILL extents <= n, REPEAT counts and CALL scales <= max extent.
///
/// Programs that have a strictly shorter equivalent, or an equal-length
/// equivalent that sorts first, are skipped:
///   - runs of adjacent MOVEs must have nondecreasing axes, and same-axis
///     neighbours only when their sum leaves the literal range;
///   - no two adjacent PLACEs; no FILL 1 1 1 outside DEF bodies;
///   - no trailing MOVEs at top level or at the end of a DEF body;
///   - no REPEAT whose body has zero net displacement, no empty bodies;
///   - every DEF is called; a DEF called once at scale 1 must have nonzero
///     net displacement (otherwise inlining it is shorter).
/// DEFs are enumerated first, named a, b, c... in order; the lexicographic
/// tie-break over DEF placements is restored by best_arrangement().
class Enumerator {
public:
    Enumerator(const Dims& dims, std::uint64_t budget) : dims_(dims), budget_(budget) {
        max_scale_ = dims.max_extent();
    }

    std::uint64_t executed() const noexcept { return executed_; }

    /// Calls visit(program) for every surviving program of exactly `length`
    /// bytes whose first top-level choice index is congruent to `worker`
    /// modulo `workers`.
    template <class Visit>
    void enumerate(std::size_t length, unsigned worker, unsigned workers, Visit&& visit) {
        if (length == 0) {
            if (worker == 0) {
                Program empty;
                count_node();
                visit(empty);
            }
            return;
        }
        const std::size_t total = length + 1;  // every line pays one separator
        Program prog;
        std::size_t choice = 0;
        defs_then_main(prog, total, 0, worker, workers, choice, visit);
    }

private:
    void count_node() {
        if (++executed_ > budget_)
            throw EnumerationBudgetExceeded("exhaustive search exceeded its budget of " + std::to_string(budget_) +
                                            " programs");
    }

    static std::size_t cost(const Instruction& ins) { return instruction_length(ins) + 1; }

    static std::string def_name(std::size_t i) { return std::string(1, static_cast<char>('a' + i)); }

    // Bodies memoized by (budget, available defs, inside a DEF body).
    const std::vector<Block>& bodies(std::size_t budget, std::size_t ndefs, bool in_def) {
        auto key = std::make_tuple(budget, ndefs, in_def);
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        std::vector<Block> out;
        for (std::size_t c = 1; c <= budget; ++c) {
            for (const auto& first : atoms(c, ndefs, in_def)) {
                if (c == budget) {
                    out.push_back(Block{first});
                    continue;
                }
                for (const auto& rest : bodies(budget - c, ndefs, in_def)) {
                    if (!adjacent_ok(first, rest.front())) continue;
                    Block b;
                    b.reserve(rest.size() + 1);
                    b.push_back(first);
                    b.insert(b.end(), rest.begin(), rest.end());
                    out.push_back(std::move(b));
                }
            }
        }
        return memo_.emplace(key, std::move(out)).first->second;
    }

    const std::vector<Instruction>& atoms(std::size_t c, std::size_t ndefs, bool in_def) {
        auto key = std::make_tuple(c, ndefs, in_def);
        if (auto it = atom_memo_.find(key); it != atom_memo_.end()) return it->second;
        std::vector<Instruction> out;
        atoms(c, ndefs, in_def, out);
        return atom_memo_.emplace(key, std::move(out)).first->second;
    }

    /// All single statements (no DEF) of exactly cost `c`.
    void atoms(std::size_t c, std::size_t ndefs, bool in_def, std::vector<Instruction>& out) {
        if (c == 6) out.push_back(Place{});
        for (Axis a : kAxes)
            for (std::int64_t d = -(dims_[a] - 1); d <= dims_[a] - 1; ++d)
                if (d != 0 && 8 + digits(d) == c) out.push_back(Move{a, d});
        for (std::int64_t x = 1; x <= dims_.nx; ++x)
            for (std::int64_t y = 1; y <= dims_.ny; ++y)
                for (std::int64_t z = 1; z <= dims_.nz; ++z) {
                    if (!in_def && x == 1 && y == 1 && z == 1) continue;
                    if (8 + digits(x) + digits(y) + digits(z) == c) out.push_back(Fill{x, y, z});
                }
        for (std::size_t i = 0; i < ndefs; ++i)
            for (std::int64_t s = 1; s <= max_scale_; ++s)
                if (6 + 1 + (s != 1 ? 1 + digits(s) : 0) == c) out.push_back(Call{def_name(i), s});
        for (std::int64_t k = 2; k <= max_scale_; ++k) {
            std::size_t overhead = 12 + digits(k);  // "REPEAT k {\n" + "}\n"
            if (c <= overhead) continue;
            for (const auto& body : bodies(c - overhead, ndefs, in_def)) {
                if (net_displacement(body) == Offset{}) continue;
                out.push_back(Repeat{k, body});
            }
        }
    }

    bool adjacent_ok(const Instruction& a, const Instruction& b) const {
        if (a.is<Place>() && b.is<Place>()) return false;
        if (a.is<Move>() && b.is<Move>()) {
            const auto& ma = a.as<Move>();
            const auto& mb = b.as<Move>();
            if (ma.axis > mb.axis) return false;
            if (ma.axis == mb.axis) {
                std::int64_t sum = ma.distance + mb.distance;
                if (sum == 0 || (sum >= -(dims_[ma.axis] - 1) && sum <= dims_[ma.axis] - 1)) return false;
            }
        }
        return true;
    }

    template <class Visit>
    void defs_then_main(Program& prog, std::size_t remaining, std::size_t ndefs, unsigned worker,
                        unsigned workers, std::size_t& choice, Visit& visit) {
        // main statement list over the remaining budget
        main_list(prog, remaining, ndefs, true, worker, workers, choice, visit);
        // or one more DEF first: "DEF x {\n" (8) + body + "}\n" (2)
        if (ndefs >= 26) return;
        for (std::size_t body = 6; body + 10 < remaining; ++body) {
            for (const auto& b : bodies(body, ndefs, true)) {
                if (b.back().is<Move>()) continue;
                prog.instructions.push_back(Def{def_name(ndefs), b});
                defs_then_main(prog, remaining - body - 10, ndefs + 1, worker, workers, choice, visit);
                prog.instructions.pop_back();
            }
        }
    }

    template <class Visit>
    void main_list(Program& prog, std::size_t remaining, std::size_t ndefs, bool first, unsigned worker,
                   unsigned workers, std::size_t& choice, Visit& visit) {
        if (remaining == 0) {
            if (first || prog.instructions.back().is<Move>()) return;
            if (!defs_useful(prog, ndefs)) return;
            count_node();
            visit(static_cast<const Program&>(prog));
            return;
        }
        for (std::size_t c = 1; c <= remaining; ++c) {
            for (const auto& ins : atoms(c, ndefs, false)) {
                if (first) {
                    // partition work by the first statement of the main list
                    if (choice++ % workers != worker) continue;
                } else if (!adjacent_ok(prog.instructions.back(), ins)) {
                    continue;
                }
                prog.instructions.push_back(ins);
                main_list(prog, remaining - c, ndefs, false, worker, workers, choice, visit);
                prog.instructions.pop_back();
            }
        }
    }

    static void count_calls(const Block& b, std::vector<std::size_t>& calls, std::vector<std::uint8_t>& scaled) {
        for (const auto& ins : b) {
            if (auto* c = std::get_if<Call>(&ins.op)) {
                auto i = static_cast<std::size_t>(c->name[0] - 'a');
                ++calls[i];
                if (c->scale != 1) scaled[i] = 1;
            } else if (auto* r = std::get_if<Repeat>(&ins.op)) {
                count_calls(r->body, calls, scaled);
            } else if (auto* d = std::get_if<Def>(&ins.op)) {
                count_calls(d->body, calls, scaled);
            }
        }
    }

    static bool defs_useful(const Program& p, std::size_t ndefs) {
        if (ndefs == 0) return true;
        std::vector<std::size_t> calls(ndefs, 0);
        std::vector<std::uint8_t> scaled(ndefs, 0);
        count_calls(p.instructions, calls, scaled);
        for (std::size_t i = 0; i < ndefs; ++i) {
            if (calls[i] == 0) return false;
            if (calls[i] == 1 && !scaled[i] && net_displacement(p.instructions[i].as<Def>().body) == Offset{})
                return false;
        }
        return true;
    }

    Dims dims_;
    std::uint64_t budget_;
    std::uint64_t executed_ = 0;
    std::int64_t max_scale_ = 1;
    std::map<std::tuple<std::size_t, std::size_t, bool>, std::vector<Block>> memo_;
    std::map<std::tuple<std::size_t, std::size_t, bool>, std::vector<Instruction>> atom_memo_;
};

/// Lexicographically smallest text among the placements of the leading
/// DEFs of `p` that keep their relative order and stay before first use.
inline std::string best_arrangement(const Program& p) {
    std::size_t k = 0;
    while (k < p.instructions.size() && p.instructions[k].is<Def>()) ++k;
    std::string best = serialize(p);
    if (k == 0) return best;
    const std::size_t m = p.instructions.size() - k;
    // latest gap each DEF may occupy: before its first use in the main list
    std::vector<std::size_t> limit(k, m);
    for (std::size_t d = 0; d < k; ++d) {
        const std::string& name = p.instructions[d].as<Def>().name;
        for (std::size_t q = 0; q < m; ++q) {
            if (serialize(p.instructions[k + q]).find("CALL " + name) != std::string::npos) {
                // matches "CALL a" but also "CALL ab"; names here are single letters
                limit[d] = q;
                break;
            }
        }
    }
    std::vector<std::size_t> gap(k, 0);
    std::function<void(std::size_t, std::size_t)> place = [&](std::size_t d, std::size_t lo) {
        if (d == k) {
            Program q;
            std::size_t di = 0;
            for (std::size_t g = 0; g <= m; ++g) {
                while (di < k && gap[di] == g) q.instructions.push_back(p.instructions[di++]);
                if (g < m) q.instructions.push_back(p.instructions[k + g]);
            }
            auto text = serialize(q);
            if (text < best) best = std::move(text);
            return;
        }
        for (std::size_t g = lo; g <= limit[d]; ++g) {
            gap[d] = g;
            place(d + 1, g);
        }
    };
    // a DEF cannot move past a later DEF that calls it, which the
    // nondecreasing gap order already enforces
    place(0, 0);
    return best;
}

struct Candidate {
    std::size_t length = 0;
    std::string text;
};

} // namespace detail

/// Shortest program of at most `max_len` bytes that reproduces `s`
/// exactly (ties: lexicographically smallest text), or nullopt if none
/// exists. Throws EnumerationBudgetExceeded past the node budget.
inline std::optional<ComplexityBound> exhaustive_min(const VoxelStructure& s, std::size_t max_len,
                                                     const ExhaustiveOptions& opt = {}) {
    ExecutionLimits limits;
    limits.max_placements = static_cast<std::uint64_t>(s.dims().volume()) * 64;
    limits.max_steps = 1'000'000;
    const unsigned workers = std::max(1u, opt.workers);
    std::vector<detail::Enumerator> enumerators;
    for (unsigned w = 0; w < workers; ++w) enumerators.emplace_back(s.dims(), opt.node_budget / workers + 1);

    for (std::size_t len = 0; len <= max_len; ++len) {
        std::vector<std::optional<detail::Candidate>> found(workers);
        std::vector<std::exception_ptr> errors(workers);
        auto work = [&](unsigned w) {
            try {
                VoxelStructure scratch(s.dims());
                enumerators[w].enumerate(len, w, workers, [&](const Program& p) {
                    scratch = VoxelStructure(s.dims());
                    detail::Machine m(scratch, limits);
                    m.set_mask(&s);
                    if (m.run(p) != detail::ExecStatus::Ok || scratch.count() != s.count()) return;
                    auto text = detail::best_arrangement(p);
                    if (!found[w] || text < found[w]->text) found[w] = detail::Candidate{len, std::move(text)};
                });
            } catch (...) {
                errors[w] = std::current_exception();
            }
        };
        if (workers == 1) {
            work(0);
        } else {
            std::vector<std::thread> pool;
            for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
            for (auto& t : pool) t.join();
        }
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
        std::optional<detail::Candidate> best;
        for (auto& f : found)
            if (f && (!best || f->text < best->text)) best = std::move(f);
        if (best) {
            ComplexityBound out;
            out.program = parse(best->text);
            out.length = best->length;
            out.method = Method::Exhaustive;
            return out;
        }
    }
    return std::nullopt;
}

/// One enumeration shared by many queries: the shortest program (up to
/// `max_len` bytes) for every structure any such program produces.
class ExhaustiveTable {
public:
    ExhaustiveTable(const Dims& dims, std::size_t max_len, const ExhaustiveOptions& opt = {})
        : dims_(dims), max_len_(max_len) {
        ExecutionLimits limits;
        limits.max_placements = static_cast<std::uint64_t>(dims.volume()) * 64;
        limits.max_steps = 1'000'000;
        const unsigned workers = std::max(1u, opt.workers);
        std::vector<Map> partial(workers);
        std::vector<std::exception_ptr> errors(workers);
        std::vector<std::uint64_t> counts(workers, 0);
        auto work = [&](unsigned w) {
            try {
                detail::Enumerator e(dims, opt.node_budget / workers + 1);
                VoxelStructure scratch(dims);
                for (std::size_t len = 0; len <= max_len; ++len) {
                    e.enumerate(len, w, workers, [&](const Program& p) {
                        scratch = VoxelStructure(dims);
                        detail::Machine m(scratch, limits);
                        if (m.run(p) != detail::ExecStatus::Ok) return;
                        auto key = pack(scratch);
                        auto it = partial[w].find(key);
                        if (it != partial[w].end() && it->second.length < len) return;
                        auto text = detail::best_arrangement(p);
                        if (it == partial[w].end()) partial[w].emplace(std::move(key), detail::Candidate{len, std::move(text)});
                        else if (text < it->second.text) it->second.text = std::move(text);
                    });
                }
                counts[w] = e.executed();
            } catch (...) {
                errors[w] = std::current_exception();
            }
        };
        if (workers == 1) {
            work(0);
        } else {
            std::vector<std::thread> pool;
            for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
            for (auto& t : pool) t.join();
        }
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
        for (unsigned w = 0; w < workers; ++w) {
            programs_ += counts[w];
            for (auto& [k, c] : partial[w]) {
                auto it = table_.find(k);
                if (it == table_.end()) table_.emplace(k, std::move(c));
                else if (c.length < it->second.length || (c.length == it->second.length && c.text < it->second.text))
                    it->second = std::move(c);
            }
        }
    }

    std::optional<ComplexityBound> lookup(const VoxelStructure& s) const {
        if (s.dims() != dims_) throw BadLiteral("structure dims differ from the table's dims");
        auto it = table_.find(pack(s));
        if (it == table_.end()) return std::nullopt;
        ComplexityBound out;
        out.program = parse(it->second.text);
        out.length = it->second.length;
        out.method = Method::Exhaustive;
        return out;
    }

    std::size_t structures() const noexcept { return table_.size(); }
    std::uint64_t programs() const noexcept { return programs_; }
    std::size_t max_len() const noexcept { return max_len_; }

private:
    using Map = std::unordered_map<std::string, detail::Candidate>;

    static std::string pack(const VoxelStructure& s) {
        const auto& raw = s.raw();
        std::string key((raw.size() + 7) / 8, '\0');
        for (std::size_t i = 0; i < raw.size(); ++i)
            if (raw[i]) key[i / 8] = static_cast<char>(key[i / 8] | (1 << (i % 8)));
        return key;
    }

    Dims dims_;
    std::size_t max_len_;
    Map table_;
    std::uint64_t programs_ = 0;
};

} // namespace domus
