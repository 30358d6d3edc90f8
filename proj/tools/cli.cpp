// Command-line front end: one subcommand per stage of the pipeline.
// Exit codes: 0 success, 1 a check failed, 2 bad input or config, 3 module error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "mm/bootstrap.hpp"
#include "mm/config.hpp"
#include "mm/io.hpp"
#include "mm/pipeline.hpp"
#include "mm/riesz.hpp"

using namespace mm;

namespace {

struct Globals {
    std::string config;
    std::optional<unsigned> seed;
    int threads = 0;
    std::string out_dir;
};

ExperimentConfig resolve(const Globals& g) {
    ExperimentConfig c = g.config.empty() ? default_config() : load_config(g.config);
    if (g.seed) c.seed = *g.seed;
    if (g.threads > 0) c.threads = g.threads;
    if (const char* env = std::getenv("MORREY_MICROPOLAR_THREADS")) {
        try {
            c.threads = std::stoi(env);
        } catch (const std::exception&) {
            throw ConfigError(std::string("MORREY_MICROPOLAR_THREADS is not an integer: ") + env);
        }
    }
    if (!g.out_dir.empty()) c.out_dir = g.out_dir;
    c.validate();
    if (c.threads > 0) set_threads(c.threads);
    return c;
}

Field history(const Grid& g, const VectorSupplier& s) {
    Field f(g, 3);
    if (!s) return f;
    for (int n = 0; n < g.Nt; ++n) {
        double* out[3] = {f.slice(n, 0), f.slice(n, 1), f.slice(n, 2)};
        s(g.t(n), out);
    }
    f.divergence_free = true;
    return f;
}

Field select(const std::string& path, const std::string& which) {
    if (which == "all") return load_pmf1(path);
    if (which == "u") return load_state(path).u;
    if (which == "omega") return load_state(path).w;
    throw ConfigError("--select must be all, u or omega");
}

CylinderSamplingPlan plan_from(const std::vector<double>& spec, const Grid& g) {
    if (spec.empty()) return CylinderSamplingPlan::default_for(g);
    if (spec.size() != 4) throw ConfigError("--plan takes r_min r_max time_stride space_stride");
    CylinderSamplingPlan p;
    p.r_min = spec[0];
    p.r_max = spec[1];
    p.time_stride = int(spec[2]);
    p.space_stride = int(spec[3]);
    return p;
}

void emit(const json& j, const std::string& path) {
    if (path.empty()) {
        std::cout << j.dump(2) << "\n";
        return;
    }
    std::ofstream(path) << j.dump(2) << "\n";
}

// The config fixes a, f and the cylinders; its grid must be the state's.
RunResult state_run(const ExperimentConfig& c, const std::string& path) {
    StateFields s = load_state(path);
    if (!(s.u.grid() == c.grid())) throw ConfigError("state grid differs from the config grid");
    RunResult r;
    r.u = std::move(s.u);
    r.u.divergence_free = true;
    r.w = std::move(s.w);
    r.a = c.solver.toggles.perturbation ? history(c.grid(), perturbation_of(c)) : Field(c.grid(), 3);
    r.f = c.solver.toggles.forcing ? history(c.grid(), forcing_of(c)) : Field(c.grid(), 3);
    r.a.divergence_free = true;
    return r;
}

int print_checks(const AcceptanceReport& r) {
    for (const Check& c : r.checks) std::cout << summary_line(c) << "\n";
    return r.all_pass() ? 0 : 1;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Morrey-space diagnostics for the perturbed micropolar system"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "experiment config (JSON); defaults apply when omitted");
    app.add_option("--seed", g.seed, "overrides the config seed");
    app.add_option("--threads", g.threads, "worker threads; MORREY_MICROPOLAR_THREADS takes precedence");
    app.add_option("--out-dir", g.out_dir, "output directory; overrides output.dir");

    std::string out, diag, field, state, report, side = "u", selection = "all", x0s, radii;
    std::string p0s = "3", q0s = "6";
    double p = 2, q = 2, a = 0.5, t0 = -1, eps = 0;
    std::vector<double> plan_spec;

    auto* solve = app.add_subcommand("solve", "integrate the system and write the u, omega history");
    solve->add_option("--out", out, "state file: PMF1 records u then omega");
    solve->add_option("--diag", diag, "diagnostics CSV");

    auto* morrey = app.add_subcommand("morrey-norm", "lower estimate of a parabolic Morrey norm");
    morrey->add_option("--field", field)->required();
    morrey->add_option("--p", p)->required();
    morrey->add_option("--q", q)->required();
    morrey->add_option("--select", selection, "all (plain PMF1) | u | omega (state files)");
    morrey->add_option("--plan", plan_spec, "r_min r_max time_stride space_stride")->expected(4);

    auto* riesz = app.add_subcommand("riesz", "parabolic Riesz potential I_a of a field");
    riesz->add_option("--field", field)->required();
    riesz->add_option("--a", a)->required();
    riesz->add_option("--out", out)->required();
    riesz->add_option("--select", selection, "all (plain PMF1) | u | omega (state files)");

    auto* rcheck = app.add_subcommand("riesz-check", "Adams-Hedberg ratio of a field");
    rcheck->add_option("--field", field)->required();
    rcheck->add_option("--p", p)->required();
    rcheck->add_option("--q", q)->required();
    rcheck->add_option("--a", a)->required();
    rcheck->add_option("--select", selection, "all (plain PMF1) | u | omega (state files)");
    rcheck->add_option("--plan", plan_spec, "r_min r_max time_stride space_stride")->expected(4);

    auto* decompose = app.add_subcommand("decompose", "localized decomposition and term norms of a state");
    decompose->add_option("--state", state)->required();
    decompose->add_option("--side", side, "u | omega")->check(CLI::IsMember({"u", "omega"}));
    decompose->add_option("--report", report, "JSON output (stdout when omitted)");

    auto* boot = app.add_subcommand("bootstrap", "exponent chain p -> min(p/nu, q0)");
    boot->add_option("--p0", p0s, "start index, e.g. 3 or 10/3");
    boot->add_option("--q0", q0s, "e.g. 6");
    boot->add_option("--out", out, "JSON output (stdout when omitted)");

    auto* ckn = app.add_subcommand("ckn", "local energy series on shrinking cylinders");
    ckn->add_option("--state", state)->required();
    ckn->add_option("--t0", t0, "centre time (default T/2)");
    ckn->add_option("--x0", x0s, "centre x,y,z (default box centre)");
    ckn->add_option("--radii", radii, "comma-separated radii (default from config)");
    ckn->add_option("--eps", eps, "threshold for the crossing radius (default from config)");
    ckn->add_option("--out", out, "CSV output (stdout when omitted)");

    auto* pipe = app.add_subcommand("pipeline", "full run: solve, both sides, bootstrap, monitors, checks");

    auto* rep = app.add_subcommand("report", "summarize a saved report and emit its plot tables");
    rep->add_option("--report", report)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const ExperimentConfig c = resolve(g);
        if (*solve) {
            const std::string base = c.out_dir;
            std::filesystem::create_directories(base);
            const RunResult r = run(c.solver, initial_state_of(c),
                                    c.solver.toggles.perturbation ? perturbation_of(c) : VectorSupplier{},
                                    c.solver.toggles.forcing ? forcing_of(c) : VectorSupplier{});
            save_state(out.empty() ? base + "/run.pmf1" : out, r.u, r.w);
            write_diagnostics_csv(r.diagnostics, diag.empty() ? base + "/diagnostics.csv" : diag);
            return 0;
        }
        if (*morrey) {
            const Field f = select(field, selection);
            const NormEstimate e = morrey_norm(f, {p, q}, plan_from(plan_spec, f.grid()));
            std::cout << json{{"p", p}, {"q", q}, {"norm", e.norm}, {"empty", e.empty},
                              {"argmax", {{"t0", e.argmax.t0}, {"x0", e.argmax.x0}, {"r", e.argmax.r}}},
                              {"plan", e.plan_summary}}
                             .dump(2)
                      << "\n";
            return 0;
        }
        if (*riesz) {
            save_pmf1(out, riesz_apply(select(field, selection), a));
            return 0;
        }
        if (*rcheck) {
            const Field f = select(field, selection);
            const AdamsHedbergReport r = adams_hedberg_check(f, p, q, a, plan_from(plan_spec, f.grid()));
            std::cout << json{{"rho", r.rho}, {"nu", r.nu}, {"norm_f", r.norm_f}, {"norm_If", r.norm_If},
                              {"empty", r.empty}, {"finite", r.finite}}
                             .dump(2)
                      << "\n";
            return 0;
        }
        if (*decompose) {
            const RunResult r = state_run(c, state);
            if (side == "u") {
                emit(velocity_stage(c, r).to_json(), report);
            } else {
                // The microrotation side needs only the velocity conclusion norms.
                VelocityStage v;
                const auto& q5 = c.cylinders;
                v.hypothesis = hypothesis_check(r.u, r.w, {q5[0], q5[2], q5[4]}, to_double(c.p0),
                                                to_double(c.q0), c.effective_plan());
                emit(microrotation_stage(c, r, v).to_json(), report);
            }
            return 0;
        }
        if (*boot) {
            const BootstrapChain ch = bootstrap_chain(parse_rational(p0s), parse_rational(q0s));
            json states = json::array();
            for (const ExponentState& s : ch.states)
                states.push_back({{"step", s.step}, {"p", to_string(s.p)}, {"p_decimal", to_double(s.p)},
                                  {"q", to_string(s.q)}, {"nu", to_string(s.nu)}});
            emit({{"p0", p0s}, {"q0", q0s}, {"length", ch.length()}, {"chain", states}}, out);
            return 0;
        }
        if (*ckn) {
            const StateFields s = load_state(state);
            const Grid& gr = s.u.grid();
            Event e{t0 >= 0 ? t0 : gr.T / 2, {gr.L / 2, gr.L / 2, gr.L / 2}};
            if (!x0s.empty()) {
                const auto v = parse_list(x0s);
                if (v.size() != 3) throw ConfigError("--x0 takes three comma-separated values");
                e.x = {v[0], v[1], v[2]};
            }
            const std::vector<double> rs = radii.empty() ? c.ckn.radii : parse_list(radii);
            const EnergyMonitorSeries series =
                ckn_monitor(s.u, s.w, e, rs, eps > 0 ? eps : c.ckn.eps_star);
            std::ostringstream os;
            os << "r,value,nodes\n";
            os.precision(12);
            for (const EnergyPoint& pt : series.points) os << pt.r << "," << pt.value << "," << pt.nodes << "\n";
            os << "# slope," << series.slope << "\n";
            if (series.crossing) os << "# crossing," << *series.crossing << "\n";
            if (out.empty()) std::cout << os.str();
            else std::ofstream(out) << os.str();
            return 0;
        }
        if (*pipe) {
            const AcceptanceReport r = run_pipeline(c, [](const std::string& s) { std::cerr << s << "\n"; });
            emit_plots(r, c.out_dir + "/plots");
            return print_checks(r);
        }
        if (*rep) {
            const AcceptanceReport r = read_report(report);
            std::filesystem::path dir = g.out_dir.empty() ? std::filesystem::path(report).parent_path()
                                                          : std::filesystem::path(g.out_dir);
            if (dir.empty()) dir = ".";
            emit_plots(r, (dir / "plots").string());
            return print_checks(r);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
