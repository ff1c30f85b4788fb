#pragma once

// Design search: simulated annealing over construction programs, minimizing
//
//   J(P) = r(T(P) | dictionary) + sum_i w_i * violation_i(T(P))
//
// i.e. the bytes needed for whatever the dictionary cannot explain, plus
// weighted functional-constraint penalties, both in bytes.

#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "aesthetics.hpp"
#include "rng.hpp"
#include "synthesis.hpp"
#include "vm.hpp"
#include "world.hpp"

namespace domus {

inline constexpr double kInfeasible = std::numeric_limits<double>::infinity();

enum class EditMove : std::size_t { Insert, Delete, Perturb, Wrap, Extract, Stamp };
inline constexpr std::size_t kEditMoves = 6;

struct SearchParams {
    std::uint64_t seed = 0;
    std::size_t iterations = 1000;
    double initial_temperature = 8.0;
    double cooling = 0.999;
    Dims dims{8, 8, 8};
    std::size_t max_program_bytes = 4096;
    /// Relative weights of insert, delete, perturb, wrap, extract, stamp.
    std::array<double, kEditMoves> move_weights{2, 3, 2, 1, 1, 2};
    /// Independent annealing chains; the best one wins (ties: lowest index).
    std::size_t islands = 1;
    /// Threads used to run islands. Results do not depend on it.
    unsigned workers = 1;
    /// Statements the search starts from (after the dictionary stamps).
    Block initial_body;
    ExecutionLimits limits{1'000'000, 32, 10'000'000};
};

inline void validate(const SearchParams& p) {
    if (p.iterations < 1) throw BadLiteral("iterations must be >= 1");
    if (!(p.cooling > 0 && p.cooling < 1)) throw BadLiteral("cooling must be in (0, 1)");
    if (!(p.initial_temperature > 0)) throw BadLiteral("initial temperature must be positive");
    if (p.islands < 1) throw BadLiteral("islands must be >= 1");
    require_positive(p.dims);
    double total = 0;
    for (double w : p.move_weights) {
        if (!(w >= 0)) throw BadLiteral("move weights must be >= 0");
        total += w;
    }
    if (!(total > 0)) throw BadLiteral("move weights must not all be zero");
}

struct TraceRecord {
    std::size_t iteration = 0;
    double objective = 0;  // of the proposal
    bool accepted = false;
    double best = 0;       // best objective so far
};

struct SearchTrace {
    std::vector<TraceRecord> records;
};

struct ObjectiveBreakdown {
    double residual = 0;  // r, in bytes
    double penalty = 0;   // constraint total
    double total = kInfeasible;
};

/// J(P); programs that fail to execute on `dims` score kInfeasible.
inline ObjectiveBreakdown objective_breakdown(const Program& p, const PatternDictionary& dict, const ConstraintSet& cs,
                                              const Dims& dims, const ExecutionLimits& limits = {}) {
    ObjectiveBreakdown out;
    auto built = try_execute(p, dims, limits);
    if (!built) return out;
    Cover c = cover(*built, dict);
    out.residual = static_cast<double>(synthesize_min(residual_structure(dims, c)).length);
    out.penalty = eval_constraints(*built, cs).total;
    out.total = out.residual + out.penalty;
    return out;
}

inline double objective(const Program& p, const PatternDictionary& dict, const ConstraintSet& cs, const Dims& dims,
                        const ExecutionLimits& limits = {}) {
    return objective_breakdown(p, dict, cs, dims, limits).total;
}

/// One DEF per dictionary pattern, named after it, whose body places the
/// pattern's cells relative to the cursor.
inline Block compile_stamps(const PatternDictionary& dict) {
    Block out;
    for (const auto& pat : dict.patterns()) {
        Offset e = pat.extent();
        VoxelStructure local(Dims{e.x, e.y, e.z}, pat.cells);
        out.push_back(Def{pat.name, literal_program(local).instructions});
    }
    return out;
}

struct SearchResult {
    Program best;
    double objective = kInfeasible;
    SearchTrace trace;
    std::size_t island = 0;
};

namespace detail {

class Annealer {
public:
    Annealer(const PatternDictionary& dict, const ConstraintSet& cs, const SearchParams& params, std::size_t island)
        : dict_(dict), cs_(cs), params_(params), rng_({params.seed, static_cast<std::uint64_t>(island)}) {
        for (double w : params.move_weights) weight_total_ += w;
    }

    SearchResult run() {
        Program current;
        current.instructions = compile_stamps(dict_);
        stamp_count_ = current.instructions.size();
        for (const auto& ins : params_.initial_body) current.instructions.push_back(ins);
        double current_j = evaluate(current);

        SearchResult res;
        res.best = current;
        res.objective = current_j;
        double temperature = params_.initial_temperature;
        res.trace.records.reserve(params_.iterations);
        for (std::size_t it = 0; it < params_.iterations; ++it) {
            Program proposal = propose(current);
            double j = evaluate(proposal);
            bool accept = false;
            if (j < kInfeasible) {
                double delta = j - current_j;
                accept = delta <= 0 || (current_j == kInfeasible) || rng_.uniform() < std::exp(-delta / temperature);
            }
            if (accept) {
                current = std::move(proposal);
                current_j = j;
                // ties go to the shorter program
                if (j < res.objective ||
                    (j == res.objective && program_length(current) < program_length(res.best))) {
                    res.best = current;
                    res.objective = j;
                }
            }
            res.trace.records.push_back({it, j, accept, res.objective});
            temperature *= params_.cooling;
        }
        return res;
    }

private:
    double evaluate(const Program& p) const {
        if (program_length(p) > params_.max_program_bytes) return kInfeasible;
        return objective(p, dict_, cs_, params_.dims, params_.limits);
    }

    std::size_t first_body(const Program& p) const {
        std::size_t i = 0;
        while (i < p.instructions.size() && p.instructions[i].is<Def>()) ++i;
        return i;
    }

    EditMove pick_move() {
        double u = rng_.uniform() * weight_total_;
        for (std::size_t i = 0; i < kEditMoves; ++i) {
            if (u < params_.move_weights[i]) return static_cast<EditMove>(i);
            u -= params_.move_weights[i];
        }
        for (std::size_t i = kEditMoves; i-- > 0;)
            if (params_.move_weights[i] > 0) return static_cast<EditMove>(i);
        return EditMove::Insert;
    }

    // Editable statement lists: the main body (as a view), user DEF bodies and
    // every REPEAT body nested in them.
    struct Site {
        Block* block;       // nullptr means the main body of the program
        bool in_user_def;
    };

    static void collect_repeats(Block& b, bool in_def, std::vector<Site>& out) {
        for (auto& ins : b)
            if (auto* r = std::get_if<Repeat>(&ins.op)) {
                out.push_back({&r->body, in_def});
                collect_repeats(r->body, in_def, out);
            }
    }

    std::vector<Site> sites(Program& p, Block& body) const {
        std::vector<Site> out{{nullptr, false}};
        collect_repeats(body, false, out);
        for (std::size_t i = stamp_count_; i < p.instructions.size(); ++i)
            if (auto* d = std::get_if<Def>(&p.instructions[i].op)) {
                out.push_back({&d->body, true});
                collect_repeats(d->body, true, out);
            }
        return out;
    }

    Instruction random_statement(const Program& p, bool in_user_def) {
        const auto& d = params_.dims;
        switch (rng_.below(4)) {
        case 0: return Place{};
        case 1: {
            Axis a = kAxes[rng_.below(3)];
            std::int64_t limit = std::max<std::int64_t>(1, std::min<std::int64_t>(3, d[a] - 1));
            std::int64_t n = rng_.between(1, limit);
            return Move{a, rng_.chance(0.5) ? n : -n};
        }
        case 2: return Fill{rng_.between(1, 3), rng_.between(1, 3), rng_.between(1, 3)};
        default: {
            // stamps are callable anywhere; user DEFs only from the main body
            std::size_t defs = in_user_def ? stamp_count_ : first_body(p);
            if (defs == 0) return Place{};
            const auto& def = p.instructions[rng_.below(defs)].as<Def>();
            return Call{def.name, 1};
        }
        }
    }

    bool apply(EditMove move, Program& p) {
        const std::size_t fb = first_body(p);
        Block body(p.instructions.begin() + static_cast<std::ptrdiff_t>(fb), p.instructions.end());
        p.instructions.resize(fb);
        bool ok = edit(move, p, body);
        for (auto& ins : body) p.instructions.push_back(std::move(ins));
        drop_unused_user_defs(p);
        return ok;
    }

    bool edit(EditMove move, Program& p, Block& body) {
        auto all = sites(p, body);
        auto pick = [&](bool nonempty) -> Site* {
            std::vector<Site*> ok;
            for (auto& s : all) {
                Block& b = s.block ? *s.block : body;
                if (!nonempty || !b.empty()) ok.push_back(&s);
            }
            if (ok.empty()) return nullptr;
            return ok[rng_.below(ok.size())];
        };
        switch (move) {
        case EditMove::Insert: {
            Site* s = pick(false);
            Block& b = s->block ? *s->block : body;
            auto pos = static_cast<std::ptrdiff_t>(rng_.below(b.size() + 1));
            b.insert(b.begin() + pos, random_statement(p, s->in_user_def));
            return true;
        }
        case EditMove::Delete: {
            Site* s = pick(true);
            if (!s) return false;
            Block& b = s->block ? *s->block : body;
            b.erase(b.begin() + static_cast<std::ptrdiff_t>(rng_.below(b.size())));
            return true;
        }
        case EditMove::Perturb: {
            std::vector<std::int64_t*> ints;
            std::vector<std::int64_t> mins;
            std::function<void(Block&)> gather = [&](Block& b) {
                for (auto& ins : b) {
                    if (auto* m = std::get_if<Move>(&ins.op)) {
                        ints.push_back(&m->distance);
                        mins.push_back(std::numeric_limits<std::int64_t>::min());
                    } else if (auto* f = std::get_if<Fill>(&ins.op)) {
                        for (auto* v : {&f->dx, &f->dy, &f->dz}) {
                            ints.push_back(v);
                            mins.push_back(1);
                        }
                    } else if (auto* r = std::get_if<Repeat>(&ins.op)) {
                        ints.push_back(&r->count);
                        mins.push_back(2);
                        gather(r->body);
                    } else if (auto* c = std::get_if<Call>(&ins.op)) {
                        ints.push_back(&c->scale);
                        mins.push_back(1);
                    } else if (auto* d = std::get_if<Def>(&ins.op)) {
                        gather(d->body);
                    }
                }
            };
            gather(body);
            for (std::size_t i = stamp_count_; i < p.instructions.size(); ++i)
                if (auto* d = std::get_if<Def>(&p.instructions[i].op)) gather(d->body);
            if (ints.empty()) return false;
            std::size_t k = rng_.below(ints.size());
            std::int64_t delta = (rng_.chance(0.5) ? 1 : 2) * (rng_.chance(0.5) ? 1 : -1);
            std::int64_t v = *ints[k] + delta;
            if (v < mins[k] || v == 0) return false;
            *ints[k] = v;
            return true;
        }
        case EditMove::Wrap: {
            Site* s = pick(true);
            if (!s) return false;
            Block& b = s->block ? *s->block : body;
            std::size_t i = rng_.below(b.size());
            std::size_t len = 1 + rng_.below(std::min<std::size_t>(4, b.size() - i));
            Block inner(b.begin() + static_cast<std::ptrdiff_t>(i), b.begin() + static_cast<std::ptrdiff_t>(i + len));
            b.erase(b.begin() + static_cast<std::ptrdiff_t>(i), b.begin() + static_cast<std::ptrdiff_t>(i + len));
            b.insert(b.begin() + static_cast<std::ptrdiff_t>(i), Repeat{rng_.between(2, 4), std::move(inner)});
            return true;
        }
        case EditMove::Extract: {
            // repeated blocks of 1..4 main-body statements
            struct Option {
                std::size_t start, len;
                std::vector<std::size_t> occ;
            };
            std::vector<Option> options;
            for (std::size_t len = 1; len <= 4; ++len)
                for (std::size_t i = 0; i + len <= body.size(); ++i) {
                    bool has_placement = false;
                    for (std::size_t q = i; q < i + len; ++q) has_placement |= !body[q].is<Move>();
                    if (!has_placement) continue;
                    std::vector<std::size_t> occ{i};
                    for (std::size_t j = i + len; j + len <= body.size();) {
                        if (std::equal(body.begin() + static_cast<std::ptrdiff_t>(i),
                                       body.begin() + static_cast<std::ptrdiff_t>(i + len),
                                       body.begin() + static_cast<std::ptrdiff_t>(j))) {
                            occ.push_back(j);
                            j += len;
                        } else {
                            ++j;
                        }
                    }
                    if (occ.size() >= 2) options.push_back({i, len, std::move(occ)});
                }
            if (options.empty()) return false;
            const Option& o = options[rng_.below(options.size())];
            Block blk(body.begin() + static_cast<std::ptrdiff_t>(o.start),
                      body.begin() + static_cast<std::ptrdiff_t>(o.start + o.len));
            Offset disp = net_displacement(blk);
            std::string name;
            for (std::size_t n = 0;; ++n) {
                name = "u" + std::to_string(n);
                if (!p.find_def(name)) break;
            }
            Block out;
            std::size_t oi = 0;
            for (std::size_t q = 0; q < body.size();) {
                if (oi < o.occ.size() && o.occ[oi] == q) {
                    out.push_back(Call{name, 1});
                    for (auto& m : moves_for(disp)) out.push_back(std::move(m));
                    q += o.len;
                    ++oi;
                } else {
                    out.push_back(std::move(body[q++]));
                }
            }
            body = std::move(out);
            p.instructions.push_back(Def{name, std::move(blk)});
            return true;
        }
        case EditMove::Stamp: {
            if (stamp_count_ == 0) return false;
            auto pos = static_cast<std::ptrdiff_t>(rng_.below(body.size() + 1));
            body.insert(body.begin() + pos, Call{p.instructions[rng_.below(stamp_count_)].as<Def>().name, 1});
            return true;
        }
        }
        return false;
    }

    void drop_unused_user_defs(Program& p) const {
        bool changed = true;
        while (changed) {
            changed = false;
            std::string all = serialize(p);
            for (std::size_t i = stamp_count_; i < p.instructions.size(); ++i) {
                auto* d = std::get_if<Def>(&p.instructions[i].op);
                if (!d) continue;
                const std::string needle = "CALL " + d->name;
                bool used = false;
                for (std::size_t pos = all.find(needle); pos != std::string::npos; pos = all.find(needle, pos + 1)) {
                    std::size_t end = pos + needle.size();
                    if (end == all.size() || all[end] == '\n' || all[end] == ' ') {
                        used = true;
                        break;
                    }
                }
                if (!used) {
                    p.instructions.erase(p.instructions.begin() + static_cast<std::ptrdiff_t>(i));
                    changed = true;
                    break;
                }
            }
        }
    }

    Program propose(const Program& current) {
        for (int attempt = 0; attempt < 16; ++attempt) {
            Program p = current;
            if (!apply(pick_move(), p)) continue;
            try {
                validate(p);
            } catch (const Error&) {
                continue;
            }
            return p;
        }
        return current;
    }

    const PatternDictionary& dict_;
    const ConstraintSet& cs_;
    const SearchParams& params_;
    Rng rng_;
    double weight_total_ = 0;
    std::size_t stamp_count_ = 0;
};

} // namespace detail

/// Simulated annealing over program edits. With a fixed seed and island
/// count the result is bit-identical regardless of `workers`.
inline SearchResult optimize(const PatternDictionary& dict, const ConstraintSet& cs, const SearchParams& params) {
    validate(params);
    std::vector<SearchResult> results(params.islands);
    std::vector<std::exception_ptr> errors(params.islands);
    auto run_island = [&](std::size_t i) {
        try {
            results[i] = detail::Annealer(dict, cs, params, i).run();
            results[i].island = i;
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    const std::size_t threads = std::min<std::size_t>(std::max(1u, params.workers), params.islands);
    if (threads <= 1) {
        for (std::size_t i = 0; i < params.islands; ++i) run_island(i);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t i = t; i < params.islands; i += threads) run_island(i);
            });
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::size_t best = 0;
    for (std::size_t i = 1; i < results.size(); ++i)
        if (results[i].objective < results[best].objective) best = i;
    return std::move(results[best]);
}

} // namespace domus
