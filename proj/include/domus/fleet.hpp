#pragma once

// Fleets of buildings from one program, attacks that remove a few cells, and
// how well one attack transfers across a fleet.

#include <algorithm>
#include <array>
#include <cstdint>
#include <exception>
#include <set>
#include <thread>
#include <vector>

#include "error.hpp"
#include "rng.hpp"
#include "vm.hpp"
#include "voxel.hpp"
#include "world.hpp"

namespace domus {

struct BuilderModel {
    enum class Kind { Robot, Human };
    Kind kind = Kind::Robot;
    double jitter_prob = 0;
    std::uint64_t seed = 0;

    static BuilderModel robot() { return {}; }
    static BuilderModel human(double p, std::uint64_t seed) {
        if (!(p >= 0 && p <= 1)) throw BadLiteral("jitter probability must be in [0, 1]");
        return {Kind::Human, p, seed};
    }
};

/// The 26 nonzero offsets in {-1, 0, 1}^3, in (z, y, x) order.
inline constexpr std::array<Offset, 26> kJitterOffsets = [] {
    std::array<Offset, 26> out{};
    std::size_t i = 0;
    for (std::int64_t z = -1; z <= 1; ++z)
        for (std::int64_t y = -1; y <= 1; ++y)
            for (std::int64_t x = -1; x <= 1; ++x)
                if (x || y || z) out[i++] = Offset{x, y, z};
    return out;
}();

namespace detail {

// Runs f(i) for i in [0, n) on up to `workers` threads, striding by index.
// Exceptions are rethrown for the lowest failing index.
template <class F>
void parallel_for(std::size_t n, unsigned workers, F&& f) {
    const std::size_t threads = std::min<std::size_t>(std::max(1u, workers), n);
    std::vector<std::exception_ptr> errors(n);
    auto body = [&](std::size_t t) {
        for (std::size_t i = t; i < n; i += threads) {
            try {
                f(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (threads <= 1) {
        body(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(body, t);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace detail

/// Member i of a fleet. Human builders displace each PLACE/FILL anchor with
/// probability p by a uniform nonzero offset drawn from the stream (seed, i).
inline VoxelStructure build_member(const Program& p, std::size_t i, const BuilderModel& model, const Dims& dims,
                                   const ExecutionLimits& limits = {}) {
    if (model.kind == BuilderModel::Kind::Robot) return execute(p, dims, limits);
    Rng rng({model.seed, static_cast<std::uint64_t>(i)});
    const double prob = model.jitter_prob;
    return execute_jittered(
        p, dims,
        [&rng, prob]() -> Offset {
            if (!rng.chance(prob)) return Offset{0, 0, 0};
            return kJitterOffsets[rng.below(kJitterOffsets.size())];
        },
        limits);
}

inline std::vector<VoxelStructure> build_fleet(const Program& p, std::size_t n, const BuilderModel& model,
                                               const Dims& dims, const ExecutionLimits& limits = {},
                                               unsigned workers = 1) {
    VoxelStructure prototype = execute(p, dims, limits);  // errors propagate from here
    std::vector<VoxelStructure> fleet(n, VoxelStructure(dims));
    if (model.kind == BuilderModel::Kind::Robot) {
        std::fill(fleet.begin(), fleet.end(), prototype);
        return fleet;
    }
    detail::parallel_for(n, workers, [&](std::size_t i) { fleet[i] = build_member(p, i, model, dims, limits); });
    return fleet;
}

inline std::size_t distinct_structures(const std::vector<VoxelStructure>& fleet) {
    std::set<std::vector<std::uint8_t>> seen;
    for (const auto& s : fleet) seen.insert(s.raw());
    return seen.size();
}

struct Attack {
    std::vector<Cell> removed_cells;  // sorted
    std::size_t k = 0;
    double collapse_fraction = 0;
};

struct CollapseCount {
    std::size_t lost = 0;       // cells supported before, unsupported after
    std::size_t remaining = 0;  // occupied cells after removal

    double fraction() const {
        return remaining ? static_cast<double>(lost) / static_cast<double>(remaining) : 0.0;
    }
    // exact comparison of lost/remaining
    bool beats(const CollapseCount& o) const {
        return static_cast<unsigned __int128>(lost) * o.remaining > static_cast<unsigned __int128>(o.lost) * remaining;
    }
};

namespace detail {

// Support depends only on the column above the ground, so analysis runs on
// the x/y bounding box with z kept from 0 upward.
class SupportFrame {
public:
    SupportFrame(const VoxelStructure& s, std::int64_t max_overhang) : max_overhang_(max_overhang), local_(Dims{1, 1, 1}) {
        auto b = s.bounds();
        if (!b) {
            empty_ = true;
            return;
        }
        lo_ = Offset{b->lo.x, b->lo.y, 0};
        local_ = VoxelStructure(Dims{b->hi.x - b->lo.x + 1, b->hi.y - b->lo.y + 1, b->hi.z + 1});
        s.for_each_cell([&](const Cell& c) { local_.set(c - lo_); });
        before_ = support_map(local_, max_overhang_);
    }

    bool empty() const noexcept { return empty_; }
    const VoxelStructure& local() const noexcept { return local_; }
    Cell to_local(const Cell& c) const noexcept { return c - lo_; }
    Cell to_world(const Cell& c) const noexcept { return c + lo_; }

    CollapseCount evaluate(const std::vector<Cell>& removed_local) {
        if (empty_) return {};
        std::vector<Cell> cleared;
        for (const auto& c : removed_local)
            if (local_.occupied(c)) {
                local_.clear(c);
                cleared.push_back(c);
            }
        auto after = support_map(local_, max_overhang_);
        CollapseCount out;
        local_.for_each_cell([&](const Cell& c) {
            ++out.remaining;
            auto i = local_.index(c);
            if (before_[i] && !after[i]) ++out.lost;
        });
        for (const auto& c : cleared) local_.set(c);
        return out;
    }

private:
    std::int64_t max_overhang_;
    bool empty_ = false;
    Offset lo_{};
    VoxelStructure local_;
    std::vector<std::uint8_t> before_;
};

} // namespace detail

/// Fraction of the cells left after removing `removed` that were supported
/// before and are not after. Cells not present in `s` are ignored.
inline CollapseCount collapse_count(const VoxelStructure& s, const std::vector<Cell>& removed,
                                    std::int64_t max_overhang = 2) {
    detail::SupportFrame frame(s, max_overhang);
    if (frame.empty()) return {};
    std::vector<Cell> local;
    for (const auto& c : removed)
        if (s.occupied(c)) local.push_back(frame.to_local(c));
    return frame.evaluate(local);
}

inline double collapse_fraction(const VoxelStructure& s, const std::vector<Cell>& removed,
                                std::int64_t max_overhang = 2) {
    return collapse_count(s, removed, max_overhang).fraction();
}

struct AttackOptions {
    std::int64_t max_overhang = 2;
    std::size_t exhaustive_max_k = 2;
    std::size_t exhaustive_max_cells = 500;
};

/// Best removal of at most k cells. Exhaustive for small budgets and
/// structures, greedy otherwise. Ties prefer fewer cells, then the
/// lexicographically smallest sorted cell list.
inline Attack find_attack(const VoxelStructure& s, std::size_t k, const AttackOptions& opt = {}) {
    if (k < 1) throw BadLiteral("attack budget must be >= 1");
    if (!check_stability(s, opt.max_overhang).stable) throw AlreadyUnstable("structure is unstable before the attack");
    Attack out;
    out.k = k;
    const auto cells = s.cells();
    if (cells.empty()) return out;

    detail::SupportFrame frame(s, opt.max_overhang);
    std::vector<Cell> local;
    for (const auto& c : cells) local.push_back(frame.to_local(c));

    std::vector<std::size_t> best_set;
    CollapseCount best;
    bool have = false;
    auto consider = [&](const std::vector<std::size_t>& idx) {
        std::vector<Cell> rm;
        for (auto i : idx) rm.push_back(local[i]);
        CollapseCount c = frame.evaluate(rm);
        if (!have || c.beats(best)) {
            best = c;
            best_set = idx;
            have = true;
        }
    };

    const std::size_t n = cells.size();
    if (k <= opt.exhaustive_max_k && n <= opt.exhaustive_max_cells) {
        // sizes in increasing order, each in lexicographic order, so strict
        // improvement implements the tie-break
        for (std::size_t i = 0; i < n; ++i) consider({i});
        if (k >= 2)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j) consider({i, j});
    } else {
        std::vector<std::size_t> chosen;
        for (std::size_t step = 0; step < k && chosen.size() < n; ++step) {
            std::vector<std::size_t> round_best;
            CollapseCount round;
            bool any = false;
            for (std::size_t i = 0; i < n; ++i) {
                if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
                auto idx = chosen;
                idx.push_back(i);
                std::sort(idx.begin(), idx.end());
                std::vector<Cell> rm;
                for (auto q : idx) rm.push_back(local[q]);
                CollapseCount c = frame.evaluate(rm);
                if (!any || c.beats(round)) {
                    round = c;
                    round_best = idx;
                    any = true;
                }
            }
            if (have && !round.beats(best)) break;  // another cell does not help
            best = round;
            best_set = round_best;
            chosen = round_best;
            have = true;
        }
    }
    for (auto i : best_set) out.removed_cells.push_back(cells[i]);
    std::sort(out.removed_cells.begin(), out.removed_cells.end());
    out.collapse_fraction = best.fraction();
    return out;
}

struct FleetReport {
    std::size_t n = 0;
    std::size_t distinct_structures = 0;
    double transfer_rate = 0;
    double collapse_threshold = 0.5;
    std::vector<double> member_fractions;  // by member index
    std::size_t collapsed = 0;
};

/// Applies one attack to every member; a member counts as destroyed when its
/// collapse fraction reaches the threshold.
inline FleetReport transfer_rate(const Attack& a, const std::vector<VoxelStructure>& fleet,
                                 double collapse_threshold = 0.5, std::int64_t max_overhang = 2,
                                 unsigned workers = 1) {
    if (fleet.empty()) throw BadLiteral("fleet must not be empty");
    FleetReport r;
    r.n = fleet.size();
    r.collapse_threshold = collapse_threshold;
    r.distinct_structures = distinct_structures(fleet);
    r.member_fractions.assign(r.n, 0.0);
    if (!a.removed_cells.empty())
        detail::parallel_for(r.n, workers, [&](std::size_t i) {
            r.member_fractions[i] = collapse_fraction(fleet[i], a.removed_cells, max_overhang);
        });
    for (double f : r.member_fractions) r.collapsed += f >= collapse_threshold;
    r.transfer_rate = static_cast<double>(r.collapsed) / static_cast<double>(r.n);
    return r;
}

} // namespace domus
