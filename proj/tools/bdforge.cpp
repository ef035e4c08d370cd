// bdforge: command-line surface over the construction registry, the witness
// builders, and the audit suite.  All exact values print in the canonical
// "p/q" form; reruns on identical state are byte-identical (timestamps are
// confined to the header line written by the suite file writer).

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "bdforge/error.hpp"
#include "bdforge/sequences.hpp"
#include "bdforge/uncond.hpp"
#include "bdforge/verify.hpp"

using namespace bdforge;
using nlohmann::json;

namespace {

struct Opts {
    std::string schedule = "minimal:3";
    std::string mode = "universe";
    std::uint64_t max_rank = 3;
    std::uint64_t net_cap = 0;  // 0 = uncapped
    std::uint64_t jobs = 1;
    std::uint64_t seed = 0;
    std::string out;  // empty = stdout
};

ParamSchedule parse_schedule(const std::string& spec) {
    if (spec == "closed-form") return ParamSchedule::closed_form();
    if (spec.rfind("minimal:", 0) == 0) {
        const std::uint64_t K = std::stoull(spec.substr(8));
        if (K < 2) fail("invalid-argument", "minimal:K needs K >= 2");
        return minimal_schedule(K);
    }
    if (spec.rfind("file:", 0) == 0) {
        std::ifstream f(spec.substr(5));
        if (!f.good()) fail("persistence-error", "cannot read schedule file " + spec);
        std::stringstream ss;
        ss << f.rdbuf();
        return ParamSchedule::from_json(ss.str());
    }
    fail("invalid-argument",
         "--schedule must be closed-form, minimal:K, or file:PATH, got " + spec);
}

std::string default_registry_path() {
    const char* home = std::getenv("BDFORGE_HOME");
    if (home == nullptr || *home == '\0') return {};
    return std::string(home) + "/registry.jsonl";
}

EnumCaps caps_of(const Opts& o) {
    EnumCaps caps;
    if (o.net_cap > 0) caps.net_cap = o.net_cap;
    return caps;
}

Registry::Mode mode_of(const Opts& o) {
    if (o.mode == "universe") return Registry::Mode::Universe;
    if (o.mode == "witness") return Registry::Mode::Witness;
    fail("invalid-argument", "--mode must be universe or witness, got " + o.mode);
}

// Builds the working registry: a persisted registry (default location) is
// replayed when present, otherwise universe mode materializes ranks up to
// --max-rank under the active caps.
Registry open_registry(const Opts& o) {
    Registry reg(parse_schedule(o.schedule), mode_of(o),
                 o.net_cap > 0 ? std::optional<std::uint64_t>(o.net_cap)
                               : std::nullopt);
    reg.base_node();
    const std::string path = default_registry_path();
    if (!path.empty()) {
        std::ifstream f(path);
        if (f.good()) {
            std::stringstream ss;
            ss << f.rdbuf();
            reg.load_jsonl(ss.str());
            return reg;
        }
    }
    if (reg.mode() == Registry::Mode::Universe) {
        const EnumCaps caps = caps_of(o);
        for (std::uint64_t q = 2; q <= o.max_rank; ++q) reg.enumerate_delta(q, caps);
    }
    return reg;
}

void emit(const Opts& o, const std::string& text) {
    if (o.out.empty()) {
        std::cout << text;
        if (text.empty() || text.back() != '\n') std::cout << '\n';
        return;
    }
    std::ofstream f(o.out);
    if (!f.good()) fail("persistence-error", "cannot write " + o.out);
    f << text;
    if (text.empty() || text.back() != '\n') f << '\n';
}

json node_json(const Registry& reg, NodeId id) {
    const Node& n = reg.node(id);
    json j;
    j["id"] = n.id;
    j["rank"] = n.rank;
    j["pred"] = n.pred;
    j["j"] = n.weight_index;
    j["I"] = {n.ival.lo, n.ival.hi};
    j["eps"] = n.sign;
    j["lambda"] = rat_to_string(n.lambda);
    j["eta"] = n.target;
    j["class"] = node_class_name(n.klass);
    j["age"] = n.age;
    return j;
}

VectorX read_vec(const std::string& arg) {
    if (!arg.empty() && arg[0] == '@') {
        std::ifstream f(arg.substr(1));
        if (!f.good()) fail("persistence-error", "cannot read vector file " + arg);
        std::stringstream ss;
        ss << f.rdbuf();
        return vector_from_json(ss.str());
    }
    return vector_from_json(arg);
}

std::vector<int> parse_signs(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
    return out;
}

// Non-conforming desk schedule with m_2 = 16 and n_2 = 64, deep enough in
// rank for long weight-2 chains: m = (4, 16, 32, ...), n = (4, 64, 128, ...).
ParamSchedule chain_schedule(std::uint64_t K) {
    std::vector<Int> m, n, l;
    for (std::uint64_t k = 1; k <= K; ++k) {
        m.push_back(k == 1 ? Int(4) : Int(1) << (k + 2));
        n.push_back(k == 1 ? Int(4) : Int(1) << (k + 4));
        l.push_back(Int(k + 1));
    }
    return ParamSchedule::explicit_list(m, n, l);
}

int cmd_schedule_validate(const Opts& o, std::uint64_t K) {
    const ParamSchedule ps = parse_schedule(o.schedule);
    const ValidityReport rep = validate_schedule(ps, K);
    json j;
    j["K"] = K;
    j["increasing"] = rep.increasing;
    j["base_standard"] = rep.base_standard;
    j["conforming"] = rep.conforming;
    json arr = json::array();
    for (const auto& e : rep.entries)
        arr.push_back({{"k", e.k}, {"first_ok", e.first_ok}, {"second_ok", e.second_ok}});
    j["entries"] = arr;
    emit(o, j.dump(2));
    return rep.conforming ? 0 : 1;
}

int cmd_build(const Opts& o) {
    Opts local = o;
    local.mode = "universe";
    const Registry reg = open_registry(local);
    json j;
    j["nodes"] = reg.ids().size();
    j["max_rank"] = reg.max_rank_touched();
    j["census_capped"] = reg.census_capped();
    j["toy"] = reg.toy();
    emit(o, j.dump(2));
    if (!o.out.empty()) return 0;  // summary went to the file; registry to home
    const std::string path = default_registry_path();
    if (!path.empty()) {
        std::ofstream f(path);
        if (!f.good()) fail("persistence-error", "cannot write " + path);
        f << reg.to_jsonl();
    }
    return 0;
}

int cmd_witness_61a(const Opts& o) {
    Registry reg(minimal_schedule(5), Registry::Mode::Witness);
    reg.base_node();
    const NodeId u1 = reg.make_node(2, 0, 1, Interval{1, 1}, 1, 1, 1);
    const NodeId u2 = reg.make_node(5, 0, 1, Interval{1, 1}, 1, 1, 1);
    const std::vector<VectorX> xs = {d_basis(u1),
                                     scale_vec(d_basis(u2), Rational(-3))};
    const WitnessNode w = witness_node_61a(reg, xs, 1);
    json j;
    j["gamma"] = w.gamma;
    j["value"] = rat_to_string(w.value);
    j["lower_bound"] = rat_to_string(w.lower_bound);
    j["toy_count"] = w.toy_count;
    emit(o, j.dump(2));
    return 0;
}

int cmd_witness_61b(const Opts& o, std::uint64_t count) {
    if (count == 0) fail("empty-input", "need a positive block count");
    Registry reg(chain_schedule(2 * count + 4), Registry::Mode::Witness);
    reg.base_node();
    std::vector<NodeId> xis;
    for (std::uint64_t k = 0; k < count; ++k)
        xis.push_back(reg.make_node(2 + 2 * k, 0, 1, Interval{1, 1}, 1, 1, 1));
    const WitnessNode w = witness_node_61b(reg, xis, 1);
    json j;
    j["count"] = count;
    j["m"] = reg.schedule().m(2).str();
    j["gamma"] = w.gamma;
    j["value"] = rat_to_string(w.value);
    j["toy_count"] = w.toy_count;
    emit(o, j.dump(2));
    return 0;
}

int cmd_witness_dependent(const Opts& o, std::uint64_t jj, std::uint64_t length) {
    Registry reg(ParamSchedule::toy_rule(200), Registry::Mode::Witness);
    reg.base_node();
    CodingRegistry coding(reg);
    KusLayer kus(reg, coding);
    const DependentSequence ds = dependent_sequence(kus, jj, length, {}, {});
    emit(o, dependent_sequence_to_json(ds));
    return 0;
}

int cmd_witness_flip(const Opts& o, const std::string& signs_csv) {
    Registry reg(ParamSchedule::toy_rule(200), Registry::Mode::Witness);
    reg.base_node();
    CodingRegistry coding(reg);
    KusLayer kus(reg, coding);
    const DependentSequence ds = dependent_sequence(kus, 1, 2, {}, {});
    const NodeId g2 = ds.pairs[1].first;
    const std::vector<VectorX> xs = {ds.pairs[0].second, ds.pairs[1].second};
    const FlipResult fr = flip_node(reg, g2, xs, parse_signs(signs_csv));
    emit(o, flip_result_to_json(fr));
    return 0;
}

int cmd_audit(const Opts& o, const std::vector<std::string>& names) {
    const SuiteSummary s = run_suite(names);
    if (!o.out.empty()) {
        write_suite(s, o.out);
    } else {
        std::cout << suite_to_json(s) << '\n';
    }
    return s.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"exact-arithmetic construction engine and verification harness"};
    app.require_subcommand(1);
    app.set_config("--config");

    Opts o;
    app.add_option("--schedule", o.schedule,
                   "closed-form | minimal:K | file:PATH (default minimal:3)");
    app.add_option("--mode", o.mode, "universe | witness");
    app.add_option("--max-rank", o.max_rank, "materialization depth for universe mode");
    app.add_option("--net-cap", o.net_cap, "cap the coefficient nets (0 = exact)");
    app.add_option("--jobs", o.jobs, "worker parallelism");
    app.add_option("--seed", o.seed, "seed for any sampling audit");
    app.add_option("--out", o.out, "write output to this path instead of stdout");

    // schedule {validate | minimal}
    auto* sched = app.add_subcommand("schedule", "inspect parameter schedules");
    sched->require_subcommand(1);
    std::uint64_t val_K = 3, min_K = 2;
    auto* sval = sched->add_subcommand("validate", "check the growth inequalities");
    sval->add_option("--K", val_K, "check indices 2..K");
    auto* smin = sched->add_subcommand("minimal", "print the smallest conforming schedule");
    smin->add_option("--K", min_K, "schedule length")->required();

    // build
    app.add_subcommand("build", "materialize the capped universe");

    // node {make | show | tree | eval-analysis}
    auto* nodec = app.add_subcommand("node", "inspect or create nodes");
    nodec->require_subcommand(1);
    struct {
        std::uint64_t rank = 2, pred = 0, weight = 1, lo = 1, hi = 1, target = 1;
        int sign = 1;
        std::string lambda = "1";
    } mk;
    auto* nmake = nodec->add_subcommand("make", "intern a node tuple (witness mode)");
    nmake->add_option("--rank", mk.rank)->required();
    nmake->add_option("--pred", mk.pred);
    nmake->add_option("--weight", mk.weight)->required();
    nmake->add_option("--lo", mk.lo)->required();
    nmake->add_option("--hi", mk.hi)->required();
    nmake->add_option("--sign", mk.sign);
    nmake->add_option("--lambda", mk.lambda);
    nmake->add_option("--target", mk.target);
    NodeId show_id = 1, tree_id = 0, ea_id = 0;
    nodec->add_subcommand("show", "print one node record")
        ->add_option("id", show_id)->required();
    nodec->add_subcommand("tree", "print the tree analysis")
        ->add_option("id", tree_id)->required();
    nodec->add_subcommand("eval-analysis", "print the evaluation analysis")
        ->add_option("id", ea_id)->required();

    // vec {eval | coord | norm}
    auto* vecc = app.add_subcommand("vec", "evaluate functionals on vectors");
    vecc->require_subcommand(1);
    NodeId vgamma = 0, veta = 0;
    std::string vec_arg;
    std::uint64_t vcutoff = 0;
    auto* veval = vecc->add_subcommand("eval", "e*_gamma applied to a vector");
    veval->add_option("--gamma", vgamma)->required();
    veval->add_option("--vec", vec_arg, "vector JSON, or @file")->required();
    auto* vcoord = vecc->add_subcommand("coord", "coordinate of a vector at eta");
    vcoord->add_option("--eta", veta)->required();
    vcoord->add_option("--vec", vec_arg, "vector JSON, or @file")->required();
    auto* vnorm = vecc->add_subcommand("norm", "certified norm interval");
    vnorm->add_option("--vec", vec_arg, "vector JSON, or @file")->required();
    vnorm->add_option("--cutoff", vcutoff, "witness search depth (default max rank)");

    // witness {61a | 61b | dependent | flip}
    auto* wit = app.add_subcommand("witness", "run the shipped witness fixtures");
    wit->require_subcommand(1);
    std::uint64_t w_count = 4, w_j = 1, w_len = 2;
    std::string w_signs = "-1,-1";
    wit->add_subcommand("61a", "greedy chain witness over two blocks");
    wit->add_subcommand("61b", "exact chain identity count/m")
        ->add_option("--count", w_count, "number of unit blocks");
    auto* wdep = wit->add_subcommand("dependent", "dependent-sequence builder");
    wdep->add_option("--j", w_j);
    wdep->add_option("--length", w_len);
    wit->add_subcommand("flip", "sign-killing rebuild of the special fixture")
        ->add_option("--signs", w_signs, "comma-separated +1/-1 per block");

    // audit {2.4 | 3.3 | 5.2 | 6.4 | suite}
    auto* aud = app.add_subcommand("audit", "run verification audits");
    aud->require_subcommand(1);
    bool suite_all = false;
    std::vector<std::string> suite_names;
    for (const char* nm : {"2.4", "3.3", "5.2", "6.4"})
        aud->add_subcommand(nm, "single audit on its shipped fixture");
    auto* asuite = aud->add_subcommand("suite", "audit collection");
    asuite->add_flag("--all", suite_all, "run every audit");
    asuite->add_option("--names", suite_names, "explicit audit names");

    // export
    app.add_subcommand("export", "dump the working registry as JSON lines");

    // Global flags may appear after the subcommand name.
    for (CLI::App* top : app.get_subcommands([](const CLI::App*) { return true; })) {
        top->fallthrough();
        for (CLI::App* sub :
             top->get_subcommands([](const CLI::App*) { return true; }))
            sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (sval->parsed()) return cmd_schedule_validate(o, val_K);
        if (smin->parsed()) {
            emit(o, minimal_schedule(min_K).to_json(min_K));
            return 0;
        }
        if (app.got_subcommand("build")) return cmd_build(o);
        if (nodec->parsed()) {
            if (nmake->parsed()) {
                Opts local = o;
                local.mode = "witness";
                Registry reg = open_registry(local);
                const NodeId id =
                    reg.make_node(mk.rank, mk.pred, mk.weight,
                                  Interval{mk.lo, mk.hi}, mk.sign,
                                  rat_from_string(mk.lambda), mk.target);
                emit(o, node_json(reg, id).dump(2));
                const std::string path = default_registry_path();
                if (!path.empty()) {
                    std::ofstream f(path);
                    if (!f.good()) fail("persistence-error", "cannot write " + path);
                    f << reg.to_jsonl();
                }
                return 0;
            }
            const Registry reg = open_registry(o);
            if (nodec->got_subcommand("show")) {
                emit(o, node_json(reg, show_id).dump(2));
                return 0;
            }
            if (nodec->got_subcommand("tree")) {
                const TreeAnalysis ta = tree_analysis(reg, tree_id);
                json arr = json::array();
                for (const auto& t : ta.nodes)
                    arr.push_back({{"path", t.path},
                                   {"I", {t.ival.lo, t.ival.hi}},
                                   {"eps", t.sign},
                                   {"lambda", rat_to_string(t.lambda)},
                                   {"eta", t.eta},
                                   {"terminal", t.terminal},
                                   {"xi", t.xi}});
                emit(o, json{{"gamma", ta.gamma}, {"nodes", arr}}.dump(2));
                return 0;
            }
            const EvaluationAnalysis an = evaluation_analysis(reg, ea_id);
            json arr = json::array();
            for (const auto& e : an.entries)
                arr.push_back({{"I", {e.ival.lo, e.ival.hi}},
                               {"eps", e.sign},
                               {"lambda", rat_to_string(e.lambda)},
                               {"eta", e.eta},
                               {"xi", e.xi}});
            emit(o, json{{"j", an.weight_index}, {"entries", arr}}.dump(2));
            return 0;
        }
        if (vecc->parsed()) {
            const Registry reg = open_registry(o);
            const VectorX x = read_vec(vec_arg);
            json j;
            if (veval->parsed()) {
                j["value"] = rat_to_string(eval(e_star(reg, vgamma), x));
            } else if (vcoord->parsed()) {
                j["value"] = rat_to_string(coordinate(reg, x, veta));
            } else {
                const std::uint64_t cut =
                    vcutoff > 0 ? vcutoff : reg.max_rank_touched();
                const NormInterval ni = norm_bounds(reg, x, cut);
                j["lo"] = rat_to_string(ni.lo);
                j["hi"] = rat_to_string(ni.hi);
                j["lo_witness"] = ni.lo_witness;
                j["hi_rule"] = ni.hi_rule;
            }
            emit(o, j.dump(2));
            return 0;
        }
        if (wit->parsed()) {
            if (wit->got_subcommand("61a")) return cmd_witness_61a(o);
            if (wit->got_subcommand("61b")) return cmd_witness_61b(o, w_count);
            if (wdep->parsed()) return cmd_witness_dependent(o, w_j, w_len);
            return cmd_witness_flip(o, w_signs);
        }
        if (aud->parsed()) {
            if (asuite->parsed()) {
                if (suite_all) return cmd_audit(o, {"all"});
                if (suite_names.empty())
                    fail("empty-input", "audit suite needs --all or --names");
                return cmd_audit(o, suite_names);
            }
            for (const char* nm : {"2.4", "3.3", "5.2", "6.4"})
                if (aud->got_subcommand(nm)) return cmd_audit(o, {nm});
        }
        if (app.got_subcommand("export")) {
            const Registry reg = open_registry(o);
            emit(o, reg.to_jsonl());
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    std::cerr << app.help();
    return 2;
}
