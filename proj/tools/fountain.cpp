// fountain: encode/decode files, evaluate the analytical models, run
// simulation presets.
//
// Exit codes: 0 success, 2 usage, 3 needs doping, 4 integrity.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fountain/container.hpp"
#include "fountain/model.hpp"
#include "fountain/sim.hpp"

namespace {

using nlohmann::json;
using namespace fountain;

constexpr int exit_ok = 0;
constexpr int exit_usage = 2;
constexpr int exit_needs_doping = 3;
constexpr int exit_integrity = 4;

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw UsageError("write to '" + path + "' failed");
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write '" + path + "'");
    out << text;
}

// ---- encode --------------------------------------------------------------

struct EncodeArgs {
    std::string input, out, dist = "is";
    std::size_t k = 0, symbols = 0, p = 0;
    std::uint64_t seed = 0;
};

int run_encode(const EncodeArgs& a) {
    const auto data = read_file(a.input);
    EncodeFileOptions o{.k = a.k, .symbols = a.symbols, .p = a.p, .distribution = parse_distribution(a.dist), .seed = a.seed};
    write_file(a.out, encode_file(data, o));
    return exit_ok;
}

// ---- decode --------------------------------------------------------------

struct DecodeArgs {
    std::string packets, out, report, mode = "conditional", policy = "postponed", source = "none", dist = "is";
    std::uint64_t seed = 0;
};

json rank_json(const RankReport& r) {
    return {{"variables", r.variables}, {"equations", r.equations}, {"rank", r.rank},
            {"rank_permanent", r.rank_permanent}, {"rank_dynamic", r.rank_dynamic}, {"full_rank", r.full_rank()}};
}

int run_decode(const DecodeArgs& a) {
    const auto bytes = read_file(a.packets);
    const auto c = read_container(bytes);
    const auto& l = c.layout;
    CodeParams params{.k = l.k, .symbol_bits = l.symbol_bytes * 8, .p = c.p, .distribution = parse_distribution(a.dist),
                      .mode = parse_mode(a.mode)};
    params.validate();
    const auto policy = parse_policy(a.policy);

    std::optional<std::vector<std::uint8_t>> original;
    if (a.source != "none") {
        original = read_file(a.source);
        if (original->size() != l.length) throw IntegrityError("doping source length does not match the file header");
    }

    json report = {{"file", {{"length", l.length}, {"k", l.k}, {"symbol_bits", params.symbol_bits}, {"blocks", l.blocks},
                             {"p", c.p}, {"mode", to_string(params.mode)}, {"policy", to_string(policy)}}},
                   {"blocks", json::array()}};
    json missing = json::array();
    std::vector<std::vector<BitVector>> decoded(l.blocks);

    for (std::size_t b = 0; b < l.blocks; ++b) {
        std::vector<EncodedSymbol> syms;
        if (auto it = c.blocks.find(static_cast<std::uint32_t>(b)); it != c.blocks.end())
            for (const auto& pk : it->second) syms.push_back(wire::from_packet(pk, params.distribution));

        std::vector<BitVector> src;
        if (original) src = block_symbols(*original, l, b);
        std::map<std::uint32_t, BitVector> doped;

        DecodeOutcome out;
        if (syms.empty()) {
            out = empty_outcome(params);
        } else {
            DecodeOptions opts;
            opts.policy = policy;
            opts.seed = derive_seed(a.seed, b);
            if (original && policy == StallPolicy::Sequential)
                opts.repair = [&](std::uint32_t q) {
                    doped.emplace(q, src[q]);
                    return src[q];
                };
            out = decode(syms, params, std::move(opts));
        }

        const auto ge = finalize_ge(out);
        const std::size_t seq = out.sequential_doped.size();
        json blk = {{"block", b}, {"received", syms.size()}, {"i", out.i()}, {"u", out.u()},
                    {"dynamic_inactivations", out.dynamic_inactivations}, {"permanent", out.permanent()},
                    {"d_min", seq + ge.d_min}, {"d_all", seq + dope_all_set(out).size()}, {"rank", rank_json(ge.rank)},
                    {"must_dope", ge.minimal_dopings}};

        if (!original) {
            if (!ge.minimal_dopings.empty()) {
                missing.push_back({{"block", b}, {"indices", ge.minimal_dopings}});
                report["blocks"].push_back(std::move(blk));
                continue;
            }
        } else {
            for (auto q : ge.minimal_dopings) doped.emplace(q, src[q]);
        }
        decoded[b] = back_substitute(out, doped);

        const std::size_t d = doped.size();
        blk["d"] = d;
        blk["M"] = static_cast<double>(d) / static_cast<double>(l.k);
        blk["doped"] = [&] {
            std::vector<std::uint32_t> v;
            for (const auto& [q, _] : doped) v.push_back(q);
            return v;
        }();
        if (d < l.k) {
            const auto cr = complexity_report(l.k, out.permanent(), out.i(), out.u(), d, params.ge_exponent);
            blk["complexity"] = {{"C", cr.per_symbol}, {"C_l", cr.linear}, {"C_g", cr.quadratic}};
        }
        report["blocks"].push_back(std::move(blk));
    }

    if (!missing.empty()) {
        report["status"] = "needs-doping";
        report["missing"] = missing;
        if (!a.report.empty()) write_text(a.report, report.dump(2) + "\n");
        std::cout << json{{"status", "needs-doping"}, {"missing", missing}}.dump() << "\n";
        return exit_needs_doping;
    }

    const auto restored = join_blocks(decoded, l);
    if (original && restored != *original) throw IntegrityError("decoded file differs from the doping source");
    report["status"] = "ok";
    if (!a.out.empty()) write_file(a.out, restored);
    if (!a.report.empty()) write_text(a.report, report.dump(2) + "\n");
    return exit_ok;
}

// ---- model ---------------------------------------------------------------

struct ModelArgs {
    std::string formula, dist = "is", repair_mode = "postponed";
    std::size_t k = 1000, l = 0, p = 1, m = 0, d = 0, q = 2, dopings = 0, clients = 50, n = 1150;
    double delta = 0.0, x = 0.0, s = 8000, feedback_delay = 0.0, eps = 0.05, bound = 0.005;
    std::optional<double> mean_degree, density;
};

json pmf_json(const std::vector<double>& v, std::size_t from) {
    json a = json::array();
    for (std::size_t i = from; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

json evaluate_model(const ModelArgs& a) {
    json in, out;
    const auto& f = a.formula;
    if (f == "isol") {
        in = {{"k", a.k}};
        const auto rho = ideal_soliton(a.k);
        if (a.d > 0) {
            in["d"] = a.d;
            out = {{"rho", rho.pmf(a.d)}};
        } else {
            out = {{"pmf_from_1", pmf_json(rho.pmf_table(), 1)}, {"mean", rho.mean()}};
        }
    } else if (f == "probd") {
        in = {{"k", a.k}, {"l", a.l}, {"distribution", a.dist}};
        const auto omega = make_distribution(parse_distribution(a.dist), a.k);
        const auto pmf = model::column_degree_evolution(omega.pmf_table(), a.k, a.l);
        double mass = 0.0;
        for (double v : pmf) mass += v;
        out = {{"pmf_from_1", pmf_json(pmf, 1)}, {"mass", mass}};
    } else if (f == "ripple") {
        in = {{"k", a.k}, {"delta", a.delta}, {"l", a.l}};
        out = {{"lambda", model::ripple_intensity(a.k, a.delta, a.l)},
               {"pmf_from_0", pmf_json(model::ripple_increment_pmf(a.k, a.delta, a.l), 0)}};
    } else if (f == "yield") {
        in = {{"k", a.k}, {"delta", a.delta}};
        const auto y = model::interdoping_yield_pmf(a.k, a.delta);
        out = {{"lambda", y.lambda}, {"pmf_from_0", pmf_json(y.prob, 0)}, {"tail_mass", y.tail_mass}};
    } else if (f == "eyield") {
        in = {{"k", a.k}, {"delta", a.delta}};
        out = {{"expected_yield", model::expected_yield(model::interdoping_yield_pmf(a.k, a.delta))}};
    } else if (f == "edop") {
        in = {{"k", a.k}, {"delta", a.delta}};
        const double e = model::expected_dopings(a.k, a.delta);
        out = {{"expected_dopings", e}, {"fraction", e / static_cast<double>(a.k)}};
    } else if (f == "frankprob") {
        in = {{"p", a.p}, {"m", a.m}};
        out = {{"probability", model::full_rank_prob(a.p, a.m)}};
    } else if (f == "uncIS") {
        const double mean = a.mean_degree.value_or(model::nominal_mean_degree(parse_distribution(a.dist), a.k));
        in = {{"k", a.k}, {"delta", a.delta}, {"distribution", a.dist}, {"mean_degree", mean}};
        out = {{"uncovered", model::uncovered_estimate(a.k, a.delta, mean)}};
    } else if (f == "pk") {
        in = {{"k", a.k}, {"x", a.x}};
        out = {{"threshold", model::density_threshold(a.k, a.x)}};
        if (a.density) {
            in["density"] = *a.density;
            out["meets_threshold"] = model::meets_density_threshold(*a.density, a.k, a.x);
        }
    } else if (f == "repaircost") {
        in = {{"k", a.k}, {"s", a.s}, {"q", a.q}, {"feedback_delay", a.feedback_delay}, {"dopings", a.dopings},
              {"mode", a.repair_mode}};
        const auto mode = a.repair_mode == "sequential" ? model::RepairMode::Sequential
                          : a.repair_mode == "postponed"
                              ? model::RepairMode::Postponed
                              : throw UsageError("unknown repair mode '" + a.repair_mode + "'");
        const auto rc = model::repair_cost({a.k, a.s, a.q, a.feedback_delay}, mode, a.dopings);
        out = {{"M", rc.fraction_undecoded}, {"per_symbol", rc.per_symbol ? json(*rc.per_symbol) : json(nullptr)},
               {"total", rc.total}};
    } else if (f == "usecase") {
        in = {{"clients", a.clients}, {"erasure", a.eps}, {"k", a.k}, {"n", a.n}, {"bound", a.bound}};
        const auto uc = model::use_case(a.clients, a.eps, a.k, a.n, a.bound);
        out = {{"no_fec_repair", uc.no_fec_repair}, {"fec_broadcast", uc.fec_broadcast}, {"fec_repair", uc.fec_repair},
               {"fec_total", uc.fec_total()}};
    } else {
        throw UsageError("unknown formula '" + f + "'");
    }
    return {{"formula", f}, {"inputs", in}, {"outputs", out}};
}

// ---- simulate / usecase ----------------------------------------------------

struct SimulateArgs {
    std::string preset, out, overlay;
    sim::ExperimentOptions opt;
};

int run_simulate(const SimulateArgs& a) {
    const auto res = sim::run_experiment(a.preset, a.opt);
    if (a.out.empty()) {
        sim::write_csv(std::cout, res);
    } else {
        std::ostringstream os;
        sim::write_csv(os, res);
        write_text(a.out, os.str());
    }
    if (!a.overlay.empty()) write_text(a.overlay, json{{"preset", a.preset}, {"overlay", res.overlay}}.dump(2) + "\n");
    return exit_ok;
}

int run_usecase(const ModelArgs& a, bool as_json) {
    const auto uc = model::use_case(a.clients, a.eps, a.k, a.n, a.bound);
    if (as_json) {
        std::cout << json{{"no_fec_repair", uc.no_fec_repair}, {"fec_broadcast", uc.fec_broadcast},
                          {"fec_repair", uc.fec_repair}, {"fec_total", uc.fec_total()}}
                         .dump()
                  << "\n";
        return exit_ok;
    }
    auto pct = [](double v) {
        std::ostringstream os;
        os << std::fixed << std::setprecision(1) << v * 100.0 << "%";
        return os.str();
    };
    std::cout << "clients " << a.clients << ", erasure " << pct(a.eps) << ", k " << a.k << ", n " << a.n
              << ", per-user repair bound " << pct(a.bound) << "\n";
    std::cout << std::left << std::setw(22) << "scheme" << std::setw(12) << "broadcast" << std::setw(10) << "repair"
              << "total\n";
    std::cout << std::setw(22) << "no FEC" << std::setw(12) << pct(0.0) << std::setw(10) << pct(uc.no_fec_repair)
              << pct(uc.no_fec_repair) << "\n";
    std::cout << std::setw(22) << "AL-FEC + repair" << std::setw(12) << pct(uc.fec_broadcast) << std::setw(10)
              << pct(uc.fec_repair) << pct(uc.fec_total()) << "\n";
    return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fountain codes with doping and inactivation decoding"};
    app.require_subcommand(1);

    EncodeArgs ea;
    auto* enc = app.add_subcommand("encode", "Encode a file into packets");
    enc->add_option("--input", ea.input, "Input file")->required();
    enc->add_option("--out", ea.out, "Packet file to write")->required();
    enc->add_option("--k", ea.k, "Source symbols per block")->required();
    enc->add_option("--symbols", ea.symbols, "Packets per block")->required();
    enc->add_option("--dist", ea.dist, "Degree distribution: is | r10");
    enc->add_option("--p", ea.p, "Permanently inactivated rows");
    enc->add_option("--seed", ea.seed, "Session seed");

    DecodeArgs da;
    auto* dec = app.add_subcommand("decode", "Decode a packet file");
    dec->add_option("--packets", da.packets, "Packet file")->required();
    dec->add_option("--out", da.out, "Restored file");
    dec->add_option("--report", da.report, "JSON report");
    dec->add_option("--mode", da.mode, "conditional | unconditional");
    dec->add_option("--policy", da.policy, "sequential | postponed");
    dec->add_option("--doping-source", da.source, "Original file serving doping requests, or none");
    dec->add_option("--dist", da.dist, "Distribution for seed-kind packets");
    dec->add_option("--seed", da.seed, "Tie-breaking seed");

    ModelArgs ma;
    double mean_degree = 0.0, density = 0.0;
    auto* mod = app.add_subcommand("model", "Evaluate an analytical formula, print JSON");
    mod->add_option("--formula", ma.formula,
                    "isol | probd | ripple | yield | eyield | edop | frankprob | uncIS | pk | repaircost | usecase")
        ->required();
    mod->add_option("--k", ma.k);
    mod->add_option("--delta", ma.delta);
    mod->add_option("--l", ma.l, "Processed symbols");
    mod->add_option("--d", ma.d, "Degree");
    mod->add_option("--p", ma.p);
    mod->add_option("--m", ma.m);
    mod->add_option("--x", ma.x, "Slack term of the density threshold");
    auto* density_opt = mod->add_option("--density", density);
    auto* mean_opt = mod->add_option("--mean-degree", mean_degree);
    mod->add_option("--dist", ma.dist);
    mod->add_option("--s", ma.s, "Bits per symbol");
    mod->add_option("--q", ma.q, "Field size");
    mod->add_option("--feedback-delay", ma.feedback_delay, "Feedback delay in bit-equivalents");
    mod->add_option("--dopings", ma.dopings);
    mod->add_option("--repair-mode", ma.repair_mode, "sequential | postponed");
    mod->add_option("--clients", ma.clients);
    mod->add_option("--eps", ma.eps);
    mod->add_option("--n", ma.n, "Broadcast symbols");
    mod->add_option("--bound", ma.bound, "Per-user repair bound");

    SimulateArgs sa;
    auto* simc = app.add_subcommand("simulate", "Run an experiment preset, write CSV");
    simc->add_option("--preset", sa.preset, "fig-syman | fig-dopPer | fig-compersym | fig-dopPer1 | fig-compersym1 | usecase")
        ->required();
    simc->add_option("--trials", sa.opt.trials);
    simc->add_option("--jobs", sa.opt.jobs);
    simc->add_option("--seed", sa.opt.seed);
    simc->add_option("--symbol-bits", sa.opt.symbol_bits);
    simc->add_option("--feedback-delay", sa.opt.feedback_delay);
    simc->add_option("--out", sa.out, "CSV file (default stdout)");
    simc->add_option("--overlay", sa.overlay, "Model overlay JSON file");

    ModelArgs ua;
    bool uc_json = false;
    auto* usc = app.add_subcommand("usecase", "Print the broadcast repair-overhead table");
    usc->add_option("--clients", ua.clients);
    usc->add_option("--eps", ua.eps);
    usc->add_option("--k", ua.k);
    usc->add_option("--n", ua.n);
    usc->add_option("--bound", ua.bound);
    usc->add_flag("--json", uc_json);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    }

    try {
        if (*enc) return run_encode(ea);
        if (*dec) return run_decode(da);
        if (*mod) {
            if (*mean_opt) ma.mean_degree = mean_degree;
            if (*density_opt) ma.density = density;
            std::cout << evaluate_model(ma).dump() << "\n";
            return exit_ok;
        }
        if (*simc) return run_simulate(sa);
        if (*usc) return run_usecase(ua, uc_json);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return exit_usage;
    } catch (const IntegrityError& e) {
        std::cerr << "integrity error: " << e.what() << "\n";
        return exit_integrity;
    } catch (const ProtocolError& e) {
        std::cerr << "malformed input: " << e.what() << "\n";
        return exit_integrity;
    } catch (const InconsistentSystem& e) {
        std::cerr << "integrity error: " << e.what() << "\n";
        return exit_integrity;
    }
    return exit_usage;
}
