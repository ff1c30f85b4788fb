#pragma once

// The construction machine: a small DSL whose programs are executed by a
// cursor-driven "robot" that fills cells of a voxel world.
//
//   program := { stmt }
//   stmt    := PLACE | FILL int int int | MOVE (X|Y|Z) int
//            | REPEAT int { stmt* } | DEF ident { stmt* } | CALL ident [int]
//
// Canonical text has one instruction per line, single spaces between
// tokens, no indentation and no trailing newline. The byte length of the
// canonical text is the program length used by every complexity measure.

#include <charconv>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <unordered_set>
#include <variant>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"
#include "voxel.hpp"

namespace domus {

struct Instruction;
using Block = std::vector<Instruction>;

struct Place {
    friend bool operator==(const Place&, const Place&) = default;
};

struct Fill {
    std::int64_t dx = 1;
    std::int64_t dy = 1;
    std::int64_t dz = 1;
    friend bool operator==(const Fill&, const Fill&) = default;
};

struct Move {
    Axis axis = Axis::X;
    std::int64_t distance = 1;
    friend bool operator==(const Move&, const Move&) = default;
};

struct Repeat {
    std::int64_t count = 2;
    Block body;
    friend bool operator==(const Repeat&, const Repeat&);
};

struct Def {
    std::string name;
    Block body;
    friend bool operator==(const Def&, const Def&);
};

/// Stamp: runs a Def body with a saved cursor and a multiplied scale.
struct Call {
    std::string name;
    std::int64_t scale = 1;
    friend bool operator==(const Call&, const Call&) = default;
};

struct Instruction {
    using Variant = std::variant<Place, Fill, Move, Repeat, Def, Call>;
    Variant op;

    Instruction() = default;
    template <class T>
        requires std::is_constructible_v<Variant, T&&> &&
                 (!std::is_same_v<std::remove_cvref_t<T>, Instruction>)
    Instruction(T&& v) : op(std::forward<T>(v)) {}

    template <class T>
    bool is() const noexcept { return std::holds_alternative<T>(op); }
    template <class T>
    const T& as() const { return std::get<T>(op); }
    template <class T>
    T& as() { return std::get<T>(op); }

    friend bool operator==(const Instruction&, const Instruction&) = default;
};

inline bool operator==(const Repeat& a, const Repeat& b) {
    return a.count == b.count && a.body == b.body;
}
inline bool operator==(const Def& a, const Def& b) {
    return a.name == b.name && a.body == b.body;
}

struct Program {
    Block instructions;

    Program() = default;
    Program(Block b) : instructions(std::move(b)) {}
    Program(std::initializer_list<Instruction> il) : instructions(il) {}

    /// Top-level Def with the given name, or nullptr.
    const Def* find_def(std::string_view name) const {
        for (const auto& ins : instructions)
            if (ins.is<Def>() && ins.as<Def>().name == name) return &ins.as<Def>();
        return nullptr;
    }

    friend bool operator==(const Program&, const Program&) = default;
};

struct ExecutionLimits {
    std::uint64_t max_placements = 10'000'000;
    std::uint32_t max_call_depth = 32;
    /// Instruction dispatch budget; bounds programs that loop over moves only.
    std::uint64_t max_steps = 200'000'000;
};

// ---------------------------------------------------------------------------
// identifiers and literals

inline bool is_identifier(std::string_view s) noexcept {
    if (s.empty() || s[0] < 'a' || s[0] > 'z') return false;
    for (char c : s.substr(1))
        if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) return false;
    return true;
}

namespace detail {

inline std::optional<std::int64_t> parse_int(std::string_view tok) {
    std::string_view digits = tok;
    if (!digits.empty() && digits[0] == '-') digits.remove_prefix(1);
    if (digits.empty() || (digits.size() > 1 && digits[0] == '0')) return std::nullopt;
    for (char c : digits)
        if (c < '0' || c > '9') return std::nullopt;
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) return std::nullopt;
    return v;
}

struct Token {
    std::string_view text;
    std::size_t pos;
};

inline std::vector<Token> tokenize(std::string_view src) {
    std::vector<Token> out;
    std::size_t i = 0;
    auto space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
    while (i < src.size()) {
        while (i < src.size() && space(src[i])) ++i;
        if (i >= src.size()) break;
        std::size_t start = i;
        while (i < src.size() && !space(src[i])) ++i;
        out.push_back({src.substr(start, i - start), start});
    }
    return out;
}

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src), toks_(tokenize(src)) {}

    Program run() {
        Program p;
        while (!at_end()) p.instructions.push_back(statement(true));
        return p;
    }

private:
    bool at_end() const { return i_ >= toks_.size(); }

    const Token& peek() const { return toks_[i_]; }

    [[noreturn]] void fail(const std::string& expected) const {
        if (at_end()) throw SyntaxError(src_.size(), expected, "");
        throw SyntaxError(peek().pos, expected, std::string(peek().text));
    }

    std::string_view take(const std::string& expected) {
        if (at_end()) fail(expected);
        return toks_[i_++].text;
    }

    void expect(std::string_view word) {
        if (at_end() || peek().text != word) fail("'" + std::string(word) + "'");
        ++i_;
    }

    std::int64_t integer() {
        if (at_end()) fail("integer");
        auto v = parse_int(peek().text);
        if (!v) fail("integer");
        ++i_;
        return *v;
    }

    std::string identifier() {
        if (at_end() || !is_identifier(peek().text)) fail("identifier");
        return std::string(toks_[i_++].text);
    }

    Block body() {
        expect("{");
        Block b;
        while (true) {
            if (at_end()) fail("'}'");
            if (peek().text == "}") {
                ++i_;
                return b;
            }
            b.push_back(statement(false));
        }
    }

    Instruction statement(bool top_level) {
        if (at_end()) fail("statement");
        const Token tok = peek();
        const std::string_view kw = tok.text;
        if (kw == "PLACE") {
            ++i_;
            return Place{};
        }
        if (kw == "FILL") {
            ++i_;
            Fill f{integer(), integer(), integer()};
            if (f.dx < 1 || f.dy < 1 || f.dz < 1)
                throw BadLiteral("FILL extents must be >= 1 (byte " + std::to_string(tok.pos) + ")");
            return f;
        }
        if (kw == "MOVE") {
            ++i_;
            auto axis_tok = take("axis X, Y or Z");
            Axis axis;
            if (axis_tok == "X") axis = Axis::X;
            else if (axis_tok == "Y") axis = Axis::Y;
            else if (axis_tok == "Z") axis = Axis::Z;
            else {
                --i_;
                fail("axis X, Y or Z");
            }
            std::int64_t n = integer();
            if (n == 0) throw BadLiteral("MOVE distance must be nonzero (byte " + std::to_string(tok.pos) + ")");
            return Move{axis, n};
        }
        if (kw == "REPEAT") {
            ++i_;
            std::int64_t n = integer();
            if (n < 2) throw BadLiteral("REPEAT count must be >= 2 (byte " + std::to_string(tok.pos) + ")");
            return Repeat{n, body()};
        }
        if (kw == "DEF") {
            if (!top_level) fail("statement (DEF is only allowed at top level)");
            ++i_;
            std::string name = identifier();
            if (defined_.count(name))
                throw SyntaxError(tok.pos, "unique DEF name", name);
            open_def_ = name;
            Block b = body();
            open_def_.clear();
            defined_.insert(name);
            return Def{std::move(name), std::move(b)};
        }
        if (kw == "CALL") {
            ++i_;
            std::string name = identifier();
            if (name == open_def_)
                throw RecursionError("DEF " + name + " calls itself (byte " + std::to_string(tok.pos) + ")");
            if (!defined_.count(name))
                throw UnknownName("CALL to undefined name '" + name + "' (byte " + std::to_string(tok.pos) + ")");
            std::int64_t scale = 1;
            if (!at_end() && parse_int(peek().text)) {
                scale = integer();
                if (scale < 1) throw BadLiteral("CALL scale must be >= 1 (byte " + std::to_string(tok.pos) + ")");
            }
            return Call{std::move(name), scale};
        }
        fail("statement");
    }

    std::string_view src_;
    std::vector<Token> toks_;
    std::size_t i_ = 0;
    std::unordered_set<std::string> defined_;
    std::string open_def_;
};

inline void append_int(std::string& out, std::int64_t v) {
    char buf[24];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, ptr);
}

inline void write_block(std::string& out, const Block& b, bool& first);

inline void write_line_break(std::string& out, bool& first) {
    if (!first) out.push_back('\n');
    first = false;
}

inline void write_instruction(std::string& out, const Instruction& ins, bool& first) {
    write_line_break(out, first);
    std::visit(
        [&](const auto& op) {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, Place>) {
                out += "PLACE";
            } else if constexpr (std::is_same_v<T, Fill>) {
                out += "FILL ";
                append_int(out, op.dx);
                out.push_back(' ');
                append_int(out, op.dy);
                out.push_back(' ');
                append_int(out, op.dz);
            } else if constexpr (std::is_same_v<T, Move>) {
                out += "MOVE ";
                out.push_back(axis_name(op.axis));
                out.push_back(' ');
                append_int(out, op.distance);
            } else if constexpr (std::is_same_v<T, Repeat>) {
                out += "REPEAT ";
                append_int(out, op.count);
                out += " {";
                write_block(out, op.body, first);
                write_line_break(out, first);
                out.push_back('}');
            } else if constexpr (std::is_same_v<T, Def>) {
                out += "DEF ";
                out += op.name;
                out += " {";
                write_block(out, op.body, first);
                write_line_break(out, first);
                out.push_back('}');
            } else {
                out += "CALL ";
                out += op.name;
                if (op.scale != 1) {
                    out.push_back(' ');
                    append_int(out, op.scale);
                }
            }
        },
        ins.op);
}

inline void write_block(std::string& out, const Block& b, bool& first) {
    for (const auto& ins : b) write_instruction(out, ins, first);
}

inline std::size_t digits(std::int64_t v) noexcept {
    std::size_t n = v < 0 ? 2 : 1;
    std::uint64_t u = v < 0 ? static_cast<std::uint64_t>(-(v + 1)) + 1 : static_cast<std::uint64_t>(v);
    while (u >= 10) {
        u /= 10;
        ++n;
    }
    return n;
}

} // namespace detail

/// Parses DSL source. Throws SyntaxError, UnknownName, RecursionError or
/// BadLiteral.
inline Program parse(std::string_view text) { return detail::Parser(text).run(); }

/// Canonical, bit-exact text of a program.
inline std::string serialize(const Program& p) {
    std::string out;
    bool first = true;
    detail::write_block(out, p.instructions, first);
    return out;
}

inline std::string serialize(const Block& b) {
    std::string out;
    bool first = true;
    detail::write_block(out, b, first);
    return out;
}

inline std::string serialize(const Instruction& ins) {
    std::string out;
    bool first = true;
    detail::write_instruction(out, ins, first);
    return out;
}

/// Canonical byte length of a single instruction (all of its lines, with
/// the newlines between them but none after).
inline std::size_t instruction_length(const Instruction& ins) {
    using detail::digits;
    return std::visit(
        [](const auto& op) -> std::size_t {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, Place>) return 5;
            else if constexpr (std::is_same_v<T, Fill>) return 7 + digits(op.dx) + digits(op.dy) + digits(op.dz);
            else if constexpr (std::is_same_v<T, Move>) return 7 + digits(op.distance);
            else if constexpr (std::is_same_v<T, Repeat>) {
                std::size_t n = 9 + digits(op.count) + 2;  // "REPEAT n {" + "\n}"
                for (const auto& b : op.body) n += instruction_length(b) + 1;
                return n;
            } else if constexpr (std::is_same_v<T, Def>) {
                std::size_t n = 6 + op.name.size() + 2;  // "DEF name {" + "\n}"
                for (const auto& b : op.body) n += instruction_length(b) + 1;
                return n;
            } else {
                return 5 + op.name.size() + (op.scale != 1 ? 1 + digits(op.scale) : 0);
            }
        },
        ins.op);
}

inline std::size_t block_length(const Block& b) {
    if (b.empty()) return 0;
    std::size_t n = b.size() - 1;
    for (const auto& ins : b) n += instruction_length(ins);
    return n;
}

/// Byte length of serialize(p).
inline std::size_t program_length(const Program& p) { return block_length(p.instructions); }

/// Checks the structural invariants a parsed program satisfies: literal
/// ranges, DEF only at top level, unique names, calls only to earlier DEFs.
inline void validate(const Program& p) {
    std::unordered_set<std::string> defined;
    std::function<void(const Block&, bool, const std::string&)> walk =
        [&](const Block& b, bool top, const std::string& open) {
            for (const auto& ins : b) {
                if (auto* f = std::get_if<Fill>(&ins.op)) {
                    if (f->dx < 1 || f->dy < 1 || f->dz < 1) throw BadLiteral("FILL extents must be >= 1");
                } else if (auto* m = std::get_if<Move>(&ins.op)) {
                    if (m->distance == 0) throw BadLiteral("MOVE distance must be nonzero");
                } else if (auto* r = std::get_if<Repeat>(&ins.op)) {
                    if (r->count < 2) throw BadLiteral("REPEAT count must be >= 2");
                    walk(r->body, false, open);
                } else if (auto* d = std::get_if<Def>(&ins.op)) {
                    if (!top) throw SyntaxError(0, "statement (DEF is only allowed at top level)", "DEF");
                    if (!is_identifier(d->name)) throw SyntaxError(0, "identifier", d->name);
                    if (defined.count(d->name)) throw SyntaxError(0, "unique DEF name", d->name);
                    walk(d->body, false, d->name);
                    defined.insert(d->name);
                } else if (auto* c = std::get_if<Call>(&ins.op)) {
                    if (c->name == open) throw RecursionError("DEF " + c->name + " calls itself");
                    if (!defined.count(c->name)) throw UnknownName("CALL to undefined name '" + c->name + "'");
                    if (c->scale < 1) throw BadLiteral("CALL scale must be >= 1");
                }
            }
        };
    walk(p.instructions, true, "");
}

// ---------------------------------------------------------------------------
// execution

namespace detail {

enum class ExecStatus : std::uint8_t { Ok, OutOfBounds, BudgetExceeded, DepthExceeded, UnknownName, Mismatch };

/// Per-placement anchor displacement hook (used by the human-builder model).
using AnchorJitter = std::function<Offset()>;

class Machine {
public:
    Machine(VoxelStructure& out, const ExecutionLimits& limits) : out_(out), limits_(limits) {}

    /// Placements outside `mask` abort with Mismatch (search fast path).
    void set_mask(const VoxelStructure* mask) { mask_ = mask; }
    /// With a jitter hook installed, displaced placements that leave the
    /// world are skipped instead of aborting.
    void set_jitter(AnchorJitter j) { jitter_ = std::move(j); }

    ExecStatus run(const Program& p) {
        defs_.clear();
        cursor_ = Cell{};
        placements_ = steps_ = 0;
        status_ = ExecStatus::Ok;
        message_.clear();
        block(p.instructions, 1, 0, true);
        return status_;
    }

    const std::string& message() const { return message_; }
    const Cell& cursor() const { return cursor_; }

private:
    bool fail(ExecStatus s, std::string msg) {
        if (status_ == ExecStatus::Ok) {
            status_ = s;
            message_ = std::move(msg);
        }
        return false;
    }

    bool step() {
        if (++steps_ > limits_.max_steps) return fail(ExecStatus::BudgetExceeded, "instruction step budget exceeded");
        return true;
    }

    static bool mul(std::int64_t a, std::int64_t b, std::int64_t& r) { return !__builtin_mul_overflow(a, b, &r); }
    static bool add(std::int64_t a, std::int64_t b, std::int64_t& r) { return !__builtin_add_overflow(a, b, &r); }

    bool fill(Cell anchor, std::int64_t ex, std::int64_t ey, std::int64_t ez) {
        std::int64_t vol = 0, xy = 0;
        if (!mul(ex, ey, xy) || !mul(xy, ez, vol) ||
            placements_ + static_cast<std::uint64_t>(vol) > limits_.max_placements)
            return fail(ExecStatus::BudgetExceeded, "placement budget exceeded");
        placements_ += static_cast<std::uint64_t>(vol);
        if (jitter_) {
            Offset d = jitter_();
            anchor = anchor + d;
        }
        const Dims& dims = out_.dims();
        bool inside = anchor.x >= 0 && anchor.y >= 0 && anchor.z >= 0 && ex <= dims.nx - anchor.x &&
                      ey <= dims.ny - anchor.y && ez <= dims.nz - anchor.z;
        if (!inside) {
            if (jitter_) return true;
            std::ostringstream os;
            os << "placement at " << anchor << " with extent (" << ex << ',' << ey << ',' << ez
               << ") leaves the world";
            return fail(ExecStatus::OutOfBounds, os.str());
        }
        for (std::int64_t z = anchor.z; z < anchor.z + ez; ++z)
            for (std::int64_t y = anchor.y; y < anchor.y + ey; ++y)
                for (std::int64_t x = anchor.x; x < anchor.x + ex; ++x) {
                    Cell c{x, y, z};
                    if (mask_ && !mask_->occupied(c)) return fail(ExecStatus::Mismatch, "");
                    out_.set(c);
                }
        return true;
    }

    bool block(const Block& b, std::int64_t scale, std::uint32_t depth, bool top) {
        for (const auto& ins : b) {
            if (!step()) return false;
            bool ok = std::visit(
                [&](const auto& op) -> bool {
                    using T = std::decay_t<decltype(op)>;
                    if constexpr (std::is_same_v<T, Place>) {
                        return fill(cursor_, 1, 1, 1);
                    } else if constexpr (std::is_same_v<T, Fill>) {
                        std::int64_t ex, ey, ez;
                        if (!mul(op.dx, scale, ex) || !mul(op.dy, scale, ey) || !mul(op.dz, scale, ez))
                            return fail(ExecStatus::BudgetExceeded, "arithmetic overflow in FILL");
                        return fill(cursor_, ex, ey, ez);
                    } else if constexpr (std::is_same_v<T, Move>) {
                        std::int64_t d;
                        if (!mul(op.distance, scale, d) || !add(cursor_[op.axis], d, cursor_[op.axis]))
                            return fail(ExecStatus::BudgetExceeded, "arithmetic overflow in MOVE");
                        return true;
                    } else if constexpr (std::is_same_v<T, Repeat>) {
                        for (std::int64_t i = 0; i < op.count; ++i)
                            if (!block(op.body, scale, depth, false)) return false;
                        return true;
                    } else if constexpr (std::is_same_v<T, Def>) {
                        if (top) defs_.push_back(&op);
                        return true;
                    } else {
                        const Def* target = nullptr;
                        for (const Def* d : defs_)
                            if (d->name == op.name) target = d;
                        if (!target) return fail(ExecStatus::UnknownName, "CALL to undefined name '" + op.name + "'");
                        if (depth + 1 > limits_.max_call_depth)
                            return fail(ExecStatus::DepthExceeded, "call depth exceeds " + std::to_string(limits_.max_call_depth));
                        std::int64_t s;
                        if (!mul(scale, op.scale, s)) return fail(ExecStatus::BudgetExceeded, "arithmetic overflow in CALL scale");
                        Cell saved = cursor_;
                        if (!block(target->body, s, depth + 1, false)) return false;
                        cursor_ = saved;
                        return true;
                    }
                },
                ins.op);
            if (!ok) return false;
        }
        return true;
    }

    VoxelStructure& out_;
    const ExecutionLimits& limits_;
    const VoxelStructure* mask_ = nullptr;
    AnchorJitter jitter_;
    std::vector<const Def*> defs_;
    Cell cursor_{};
    std::uint64_t placements_ = 0;
    std::uint64_t steps_ = 0;
    ExecStatus status_ = ExecStatus::Ok;
    std::string message_;
};

[[noreturn]] inline void throw_status(ExecStatus s, const std::string& msg) {
    switch (s) {
    case ExecStatus::OutOfBounds: throw OutOfBounds(msg);
    case ExecStatus::BudgetExceeded: throw BudgetExceeded(msg);
    case ExecStatus::DepthExceeded: throw DepthExceeded(msg);
    case ExecStatus::UnknownName: throw UnknownName(msg);
    default: throw Error(msg);
    }
}

} // namespace detail

/// Runs the robot. Deterministic; throws OutOfBounds, BudgetExceeded or
/// DepthExceeded and never returns a partial structure.
inline VoxelStructure execute(const Program& p, const Dims& dims, const ExecutionLimits& limits = {}) {
    VoxelStructure out(dims);
    detail::Machine m(out, limits);
    if (auto s = m.run(p); s != detail::ExecStatus::Ok) detail::throw_status(s, m.message());
    return out;
}

/// Non-throwing execution used by search loops; returns nullopt on any
/// execution error.
inline std::optional<VoxelStructure> try_execute(const Program& p, const Dims& dims,
                                                 const ExecutionLimits& limits = {}) {
    VoxelStructure out(dims);
    detail::Machine m(out, limits);
    if (m.run(p) != detail::ExecStatus::Ok) return std::nullopt;
    return out;
}

/// Execution where every PLACE/FILL anchor is displaced by `jitter()`;
/// displaced placements leaving the world are skipped.
inline VoxelStructure execute_jittered(const Program& p, const Dims& dims, detail::AnchorJitter jitter,
                                       const ExecutionLimits& limits = {}) {
    VoxelStructure out(dims);
    detail::Machine m(out, limits);
    m.set_jitter(std::move(jitter));
    if (auto s = m.run(p); s != detail::ExecStatus::Ok) detail::throw_status(s, m.message());
    return out;
}

// ---------------------------------------------------------------------------
// static helpers shared by the synthesizer, the enumerator and the designer

/// Net cursor displacement of a block at scale 1. Calls contribute nothing
/// since the cursor is restored after a stamp.
inline Offset net_displacement(const Block& b) {
    Offset d{};
    for (const auto& ins : b) {
        if (auto* m = std::get_if<Move>(&ins.op)) {
            d[m->axis] += m->distance;
        } else if (auto* r = std::get_if<Repeat>(&ins.op)) {
            Offset inner = net_displacement(r->body);
            d.x += inner.x * r->count;
            d.y += inner.y * r->count;
            d.z += inner.z * r->count;
        }
    }
    return d;
}

/// MOVE instructions that translate the cursor by `d`, in X, Y, Z order.
inline Block moves_for(const Offset& d) {
    Block out;
    for (Axis a : kAxes)
        if (d[a] != 0) out.push_back(Move{a, d[a]});
    return out;
}

/// Collapses every run of consecutive MOVEs into at most one MOVE per axis
/// (X, Y, Z order). Never lengthens a block and preserves its semantics.
inline void normalize_moves(Block& b) {
    Block out;
    out.reserve(b.size());
    std::size_t i = 0;
    while (i < b.size()) {
        if (!b[i].is<Move>()) {
            if (auto* r = std::get_if<Repeat>(&b[i].op)) normalize_moves(r->body);
            if (auto* d = std::get_if<Def>(&b[i].op)) normalize_moves(d->body);
            out.push_back(std::move(b[i++]));
            continue;
        }
        Offset d{};
        while (i < b.size() && b[i].is<Move>()) {
            const auto& m = b[i].as<Move>();
            d[m.axis] += m.distance;
            ++i;
        }
        for (auto& m : moves_for(d)) out.push_back(std::move(m));
    }
    b = std::move(out);
}

/// Drops MOVEs that cannot affect the result: trailing top-level moves and
/// trailing moves inside DEF bodies (the cursor is restored after a call).
inline void strip_dead_moves(Program& p) {
    auto strip = [](Block& b) {
        while (!b.empty() && b.back().is<Move>()) b.pop_back();
    };
    strip(p.instructions);
    for (auto& ins : p.instructions)
        if (auto* d = std::get_if<Def>(&ins.op)) strip(d->body);
}

} // namespace domus
