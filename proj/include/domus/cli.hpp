#pragma once

// Command-line front end. `run` is the whole program minus main() so the
// test suite can drive it in-process.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "domus.hpp"

namespace domus::cli {

enum Exit : int { kOk = 0, kNegative = 1, kUsage = 2, kFailure = 3 };

/// Thrown for bad flag values discovered after parsing.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string read_text(const std::string& path, std::istream& in) {
    if (path == "-") {
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write '" + path + "'");
    f << text;
    if (!f) throw Error("cannot write '" + path + "'");
}

inline bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline ExecutionLimits limits_from_env() {
    ExecutionLimits limits;
    if (const char* v = std::getenv("DOMUS_MAX_PLACEMENTS")) {
        auto n = ::domus::detail::parse_int(v);
        if (!n || *n < 1) throw UsageError(std::string("DOMUS_MAX_PLACEMENTS must be a positive integer, got '") + v + "'");
        limits.max_placements = static_cast<std::uint64_t>(*n);
    }
    return limits;
}

inline bool looks_like_vox(const std::string& path, const std::string& text) {
    if (ends_with(path, ".vox.txt")) return true;
    if (ends_with(path, ".cvm")) return false;
    return text.rfind("DIMS", 0) == 0;
}

/// A structure from a .cvm program (built on `dims`), a .vox.txt file, or
/// standard input ("-", sniffed by content).
inline VoxelStructure load_structure(const std::string& path, const Dims& dims, std::istream& in) {
    std::string text = read_text(path, in);
    if (looks_like_vox(path, text)) return from_vox_text(text);
    return execute(parse(text), dims, limits_from_env());
}

inline nlohmann::json cells_json(const std::vector<Cell>& cells) {
    auto arr = nlohmann::json::array();
    for (const auto& c : cells) arr.push_back({c.x, c.y, c.z});
    return arr;
}

// text output: one "key: value" line per top-level field
inline std::string as_text(const nlohmann::json& j) {
    std::string out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        out += it.key() + ": ";
        if (it->is_string()) out += it->get<std::string>();
        else out += it->dump();
        out += "\n";
    }
    return out;
}

} // namespace detail

struct CliConfig {
    std::vector<std::int64_t> dims{64, 64, 64};
    std::uint64_t seed = 0;
    std::string out;
    std::string format = "json";
};

/// Runs one command line (args excludes the program name). Returns the
/// process exit code.
inline int run(const std::vector<std::string>& args, std::istream& in = std::cin, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    CliConfig cfg;
    CLI::App app{"domus: construction programs, complexity bounds and structure analysis", "domus"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    app.add_option("--dims", cfg.dims, "world size nx ny nz")->expected(3)->check(CLI::PositiveNumber);
    app.add_option("--seed", cfg.seed, "random seed");
    app.add_option("-o,--out", cfg.out, "output path (directory for optimize)");
    app.add_option("--format", cfg.format, "report format")->check(CLI::IsMember({"json", "text"}));

    std::string input;
    auto add_input = [&](CLI::App* sub) { sub->add_option("input", input, "program (.cvm), .vox.txt or -")->required(); };

    auto* build = app.add_subcommand("build", "run a program and write the structure as .vox.txt");
    add_input(build);
    auto* render = app.add_subcommand("render", "print a structure in layered text");
    add_input(render);

    auto* complexity = app.add_subcommand("complexity", "upper-bound the program length of a structure");
    add_input(complexity);
    std::size_t exhaustive_len = 0;
    unsigned workers = 1;
    complexity->add_option("--exhaustive", exhaustive_len, "also run the exhaustive oracle up to this many bytes");
    complexity->add_option("--workers", workers, "threads for the exhaustive oracle")->check(CLI::PositiveNumber);

    std::string dict_path;
    auto* beauty = app.add_subcommand("beauty", "pattern-dictionary beauty score (lower is more beautiful)");
    add_input(beauty);
    beauty->add_option("--dict", dict_path, "pattern dictionary (.pat)")->required();

    double threshold = 0.5;
    std::size_t min_patch = 4;
    auto* natural = app.add_subcommand("natural", "regularity and naturalness report; exit 1 when Artificial");
    add_input(natural);
    natural->add_option("--threshold", threshold, "naturalness threshold");
    natural->add_option("--min-patch", min_patch, "smallest flat patch, in faces");

    SearchParams sp;
    std::string constraints_path;
    std::string initial_path;
    auto* optimize_cmd = app.add_subcommand("optimize", "search for a program minimizing residual plus penalties");
    optimize_cmd->add_option("--dict", dict_path, "pattern dictionary (.pat)")->required();
    optimize_cmd->add_option("--constraints", constraints_path, "constraint set (.json)")->required();
    optimize_cmd->add_option("--iters", sp.iterations, "annealing iterations");
    optimize_cmd->add_option("--temperature", sp.initial_temperature, "initial temperature");
    optimize_cmd->add_option("--cooling", sp.cooling, "temperature factor per iteration");
    optimize_cmd->add_option("--max-bytes", sp.max_program_bytes, "longest program considered");
    optimize_cmd->add_option("--islands", sp.islands, "independent annealing chains");
    optimize_cmd->add_option("--workers", sp.workers, "threads for islands")->check(CLI::PositiveNumber);
    optimize_cmd->add_option("--initial", initial_path, "program whose statements seed the search");

    std::size_t fleet_n = 50;
    std::string builder = "robot";
    double jitter = 0.0;
    std::size_t budget = 2;
    double collapse_threshold = 0.5;
    auto* attack = app.add_subcommand("attack", "find a removal attack on a program's building and test it on a fleet");
    add_input(attack);
    attack->add_option("--fleet", fleet_n, "fleet size")->check(CLI::PositiveNumber);
    attack->add_option("--builder", builder, "builder model")->check(CLI::IsMember({"robot", "human"}));
    attack->add_option("--p", jitter, "human jitter probability")->check(CLI::Range(0.0, 1.0));
    attack->add_option("--k", budget, "cells the attacker may remove")->check(CLI::PositiveNumber);
    attack->add_option("--threshold", collapse_threshold, "collapse fraction that counts as destroyed");
    attack->add_option("--workers", workers, "threads for fleet building")->check(CLI::PositiveNumber);

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    std::vector<std::string> argv(args.rbegin(), args.rend());  // CLI11 consumes from the back
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "domus: " << e.what() << "\n";
        return kUsage;
    }

    const Dims dims{cfg.dims[0], cfg.dims[1], cfg.dims[2]};
    auto emit = [&](const nlohmann::json& report) {
        std::string text = cfg.format == "json" ? report.dump(2) + "\n" : detail::as_text(report);
        if (cfg.out.empty()) out << text;
        else detail::write_text(cfg.out, text);
    };

    try {
        if (build->parsed() || render->parsed()) {
            auto s = detail::load_structure(input, dims, in);
            std::string text = to_vox_text(s);
            if (build->parsed() && !cfg.out.empty()) detail::write_text(cfg.out, text);
            else out << text;
            return kOk;
        }

        if (complexity->parsed()) {
            auto s = detail::load_structure(input, dims, in);
            auto b = synthesize_min(s);
            nlohmann::json r{{"length", b.length},
                             {"method", method_name(b.method)},
                             {"program_text", serialize(b.program)},
                             {"cells", s.count()}};
            int code = kOk;
            if (complexity->count("--exhaustive")) {
                ExhaustiveOptions eo;
                eo.workers = workers;
                auto e = exhaustive_min(s, exhaustive_len, eo);
                if (e) {
                    r["exhaustive"] = {{"length", e->length}, {"program_text", serialize(e->program)}};
                } else {
                    r["exhaustive"] = nullptr;  // nothing within the byte limit
                    code = kNegative;
                }
            }
            emit(r);
            return code;
        }

        if (beauty->parsed()) {
            auto s = detail::load_structure(input, dims, in);
            auto dict = from_pat_text(detail::read_text(dict_path, in));
            auto b = beauty_score(s, dict);
            auto placements = nlohmann::json::array();
            for (const auto& p : b.cover.placements) placements.push_back(stamp_line(p));
            emit({{"D", b.D},
                  {"N", b.N},
                  {"r", b.r},
                  {"score", b.score},
                  {"placements", placements},
                  {"residual_cells", b.cover.residual.size()},
                  {"lower_is_more_beautiful", true}});
            return kOk;
        }

        if (natural->parsed()) {
            auto s = detail::load_structure(input, dims, in);
            NaturalnessOptions no;
            no.threshold = threshold;
            no.min_patch = min_patch;
            auto r = naturalness_report(s, no);
            nlohmann::json fractal = nullptr;
            if (r.fractal)
                fractal = {{"dimension", r.fractal->dimension},
                           {"r2", r.fractal->r2},
                           {"box_sizes", r.fractal->box_sizes},
                           {"box_counts", r.fractal->box_counts}};
            emit({{"straightness", r.straightness},
                  {"planarity", r.planarity},
                  {"symmetry", r.symmetry},
                  {"fractal", fractal},
                  {"regularity_index", r.regularity_index},
                  {"naturalness", r.naturalness},
                  {"threshold", r.threshold},
                  {"label", label_name(r.label)}});
            return r.label == Label::Natural ? kOk : kNegative;
        }

        if (optimize_cmd->parsed()) {
            auto dict = from_pat_text(detail::read_text(dict_path, in));
            auto cs = constraints_from_json(nlohmann::json::parse(detail::read_text(constraints_path, in)));
            if (cs.constraints.empty()) throw UsageError("the constraint set must not be empty");
            sp.seed = cfg.seed;
            sp.dims = dims;
            sp.limits = detail::limits_from_env();
            if (!initial_path.empty()) sp.initial_body = parse(detail::read_text(initial_path, in)).instructions;
            auto res = optimize(dict, cs, sp);
            auto built = execute(res.best, dims, sp.limits);
            std::filesystem::path dir = cfg.out.empty() ? std::filesystem::path(".") : std::filesystem::path(cfg.out);
            std::filesystem::create_directories(dir);
            detail::write_text((dir / "best.cvm").string(), serialize(res.best));
            detail::write_text((dir / "best.vox.txt").string(), to_vox_text(built));
            std::ostringstream csv;
            csv << "iter,objective,accepted,best\n";
            csv << std::setprecision(17);
            for (const auto& t : res.trace.records)
                csv << t.iteration << "," << t.objective << "," << (t.accepted ? 1 : 0) << "," << t.best << "\n";
            detail::write_text((dir / "trace.csv").string(), csv.str());
            auto bd = objective_breakdown(res.best, dict, cs, dims, sp.limits);
            nlohmann::json r{{"objective", res.objective},
                             {"residual", bd.residual},
                             {"penalty", bd.penalty},
                             {"program_bytes", program_length(res.best)},
                             {"cells", built.count()},
                             {"island", res.island},
                             {"iterations", res.trace.records.size()}};
            out << (cfg.format == "json" ? r.dump(2) + "\n" : detail::as_text(r));
            return kOk;
        }

        if (attack->parsed()) {
            Program p = parse(detail::read_text(input, in));
            auto limits = detail::limits_from_env();
            VoxelStructure prototype = execute(p, dims, limits);
            Attack a = find_attack(prototype, budget);
            BuilderModel model = builder == "human" ? BuilderModel::human(jitter, cfg.seed) : BuilderModel::robot();
            auto fleet = build_fleet(p, fleet_n, model, dims, limits, workers);
            auto rep = transfer_rate(a, fleet, collapse_threshold, 2, workers);
            emit({{"n", rep.n},
                  {"distinct_structures", rep.distinct_structures},
                  {"transfer_rate", rep.transfer_rate},
                  {"collapsed", rep.collapsed},
                  {"collapse_threshold", rep.collapse_threshold},
                  {"builder", builder},
                  {"k", a.k},
                  {"prototype_collapse_fraction", a.collapse_fraction},
                  {"attack_cells", detail::cells_json(a.removed_cells)},
                  {"member_fractions", rep.member_fractions}});
            return kOk;
        }
    } catch (const UsageError& e) {
        err << "domus: " << e.what() << "\n";
        return kUsage;
    } catch (const nlohmann::json::exception& e) {
        err << "domus: bad JSON: " << e.what() << "\n";
        return kFailure;
    } catch (const std::exception& e) {
        err << "domus: " << e.what() << "\n";
        return kFailure;
    }
    return kUsage;
}

} // namespace domus::cli
