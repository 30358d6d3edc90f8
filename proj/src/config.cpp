#include "mm/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>

#include "mm/exponents.hpp"
#include "mm/synthetic.hpp"

namespace mm {

namespace {

// Rejects keys outside the allowed set so typos never fall back to defaults.
void allow_only(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [k, v] : j.items()) {
        bool ok = false;
        for (const char* a : keys) ok = ok || k == a;
        if (!ok) throw ConfigError(where + ": unknown key '" + k + "'");
    }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

Rational read_rational(const json& v, const std::string& where) {
    try {
        if (v.is_string()) return parse_rational(v.get<std::string>());
        if (v.is_number()) return parse_rational(v.dump());
    } catch (const Error& e) {
        throw ConfigError(where + ": " + e.what());
    }
    throw ConfigError(where + ": expected a number or a rational string");
}

Cylinder read_cylinder(const json& j, const std::string& where) {
    allow_only(j, where, {"a", "b", "x0", "r"});
    for (const char* k : {"a", "b", "x0", "r"})
        if (!j.contains(k)) throw ConfigError(where + ": missing '" + k + "'");
    Cylinder c;
    read(j, "a", c.a, where);
    read(j, "b", c.b, where);
    read(j, "x0", c.x0, where);
    read(j, "r", c.r, where);
    return c;
}

json cylinder_json(const Cylinder& c) { return {{"a", c.a}, {"b", c.b}, {"x0", c.x0}, {"r", c.r}}; }

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

// Nodal lookup of one slice of a field sampled on g.
PointFn nodal(const Grid& g, std::vector<double> values, int nc) {
    return [g, values = std::move(values), nc](double, const double* x, double* out) {
        const int N = g.Nx;
        int i[3];
        for (int k = 0; k < 3; ++k) i[k] = ((int(std::lround(x[k] / g.h())) % N) + N) % N;
        const std::size_t idx = (std::size_t(i[2]) * N + i[1]) * N + i[0];
        for (int c = 0; c < nc; ++c) out[c] = values[std::size_t(c) * g.cells() + idx];
    };
}

PointFn random_slice(const Grid& g, unsigned seed, double amplitude, bool solenoidal) {
    Grid g1 = g;
    g1.Nt = 2;
    const Field f = solenoidal ? random_solenoidal(g1, seed, 2) : random_bandlimited(g1, 3, seed, 2);
    std::vector<double> v(f.data().begin(), f.data().begin() + 3 * std::ptrdiff_t(g.cells()));
    double m = 0;
    for (double x : v) m = std::max(m, std::abs(x));
    if (m > 0)
        for (double& x : v) x *= amplitude / m;
    return nodal(g, std::move(v), 3);
}

}  // namespace

CylinderSamplingPlan ExperimentConfig::effective_plan() const {
    return plan.r_min > 0 ? plan : CylinderSamplingPlan::default_for(grid());
}

void ExperimentConfig::validate() const {
    const Grid& g = grid();
    try {
        g.validate();
        solver.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("grid/solver: ") + e.what());
    }
    static const char* names[5] = {"Q", "Q0", "Q1", "Qa", "Q2"};
    for (int i = 0; i < 5; ++i) {
        const Cylinder& c = cylinders[i];
        require(c.a > 0, std::string("geometry: cylinder ") + names[i] + " must start after t = 0");
        require(c.b <= g.T, std::string("geometry: cylinder ") + names[i] + " must end by T");
        require(c.r > 0 && c.a < c.b, std::string("geometry: cylinder ") + names[i] + " is empty");
        if (i > 0) {
            require(c.x0 == cylinders[0].x0, std::string("geometry: ") + names[i] + " must share the centre of Q");
            require(c.strictly_inside(cylinders[i - 1]), std::string("geometry: ") + names[i] +
                                                             " must lie strictly inside " + names[i - 1]);
        }
    }
    require(cutoff_order >= 1 && cutoff_order <= 8, "geometry.cutoff_order must be in [1, 8]");
    require(p0 > 2 && p0 <= q0 && q0 > 5 && q0 <= 6, "morrey: need 2 < p0 <= q0 and 5 < q0 <= 6");
    try {
        effective_plan().validate(g);
    } catch (const Error& e) {
        throw ConfigError(std::string("morrey.plan: ") + e.what());
    }
    require(omega_exponents.p > 10.0 / 3 && omega_exponents.p <= omega_exponents.q &&
                omega_exponents.q <= 3.75,
            "omega_exponents: need 10/3 < p <= q <= 15/4");
    require(initial.velocity == "taylor_green" || initial.velocity == "random" || initial.velocity == "zero",
            "initial.velocity must be taylor_green, random or zero");
    require(initial.microrotation == "zero" || initial.microrotation == "smooth" ||
                initial.microrotation == "random",
            "initial.microrotation must be zero, smooth or random");
    require(perturbation.kind == "default" || perturbation.kind == "zero",
            "perturbation.kind must be default or zero");
    require(perturbation.l6_norm >= 0, "perturbation.l6_norm must be nonnegative");
    require(forcing.kind == "zero" || forcing.kind == "cosine", "forcing.kind must be zero or cosine");
    const double t0 = ckn.t0.value_or(g.T / 2);
    require(!ckn.radii.empty(), "ckn.radii must not be empty");
    for (double r : ckn.radii) {
        require(r > 0 && r < g.L / 2, "ckn.radii must lie in (0, L/2)");
        require(t0 - r * r >= 0 && t0 + r * r <= g.T, "ckn: every cylinder must stay inside [0, T]");
    }
    require(ckn.eps_star > 0, "ckn.eps_star must be positive");
    const Tolerances& t = tolerances;
    for (double v : {t.identity, t.reconstruction, t.expansion, t.morrey_lp, t.indicator, t.scaling,
                     t.adams_hedberg, t.holder, t.divergence, t.decay, t.energy, t.halving_ratio,
                     t.duhamel, t.evolution_ratio, t.ckn_slope_lo, t.ckn_slope_hi})
        require(v > 0, "tolerances must be positive");
    require(t.ckn_slope_lo < t.ckn_slope_hi, "tolerances: ckn_slope_lo must be below ckn_slope_hi");
    require(threads >= 0, "threads must be nonnegative");
    require(!out_dir.empty(), "output.dir must not be empty");
}

ExperimentConfig default_config() {
    ExperimentConfig c;
    c.cylinders = default_cylinders(c.grid());
    return c;
}

ExperimentConfig config_from_json(const json& j) {
    allow_only(j, "config", {"grid", "solver", "initial", "perturbation", "forcing", "geometry", "morrey",
                             "omega_exponents", "ckn", "tolerances", "synthetic", "output", "seed",
                             "threads"});
    ExperimentConfig c;
    Grid& g = c.solver.grid;
    if (j.contains("grid")) {
        const json& s = j["grid"];
        allow_only(s, "grid", {"L", "Nx", "T", "Nt"});
        read(s, "L", g.L, "grid");
        read(s, "Nx", g.Nx, "grid");
        read(s, "T", g.T, "grid");
        read(s, "Nt", g.Nt, "grid");
    }
    if (j.contains("solver")) {
        const json& s = j["solver"];
        allow_only(s, "solver", {"substeps", "dealias", "cfl", "toggles"});
        read(s, "substeps", c.solver.substeps, "solver");
        read(s, "dealias", c.solver.dealias, "solver");
        read(s, "cfl", c.solver.cfl, "solver");
        if (s.contains("toggles")) {
            const json& t = s["toggles"];
            Toggles& o = c.solver.toggles;
            allow_only(t, "solver.toggles",
                       {"convection", "coupling", "grad_div", "damping", "perturbation", "forcing"});
            read(t, "convection", o.convection, "solver.toggles");
            read(t, "coupling", o.coupling, "solver.toggles");
            read(t, "grad_div", o.grad_div, "solver.toggles");
            read(t, "damping", o.damping, "solver.toggles");
            read(t, "perturbation", o.perturbation, "solver.toggles");
            read(t, "forcing", o.forcing, "solver.toggles");
        }
    }
    if (j.contains("initial")) {
        const json& s = j["initial"];
        allow_only(s, "initial",
                   {"velocity", "velocity_amplitude", "microrotation", "microrotation_amplitude"});
        read(s, "velocity", c.initial.velocity, "initial");
        read(s, "velocity_amplitude", c.initial.velocity_amplitude, "initial");
        read(s, "microrotation", c.initial.microrotation, "initial");
        read(s, "microrotation_amplitude", c.initial.microrotation_amplitude, "initial");
    }
    if (j.contains("perturbation")) {
        const json& s = j["perturbation"];
        allow_only(s, "perturbation", {"kind", "l6_norm"});
        read(s, "kind", c.perturbation.kind, "perturbation");
        read(s, "l6_norm", c.perturbation.l6_norm, "perturbation");
    }
    if (j.contains("forcing")) {
        const json& s = j["forcing"];
        allow_only(s, "forcing", {"kind", "amplitude"});
        read(s, "kind", c.forcing.kind, "forcing");
        read(s, "amplitude", c.forcing.amplitude, "forcing");
    }
    c.cylinders = default_cylinders(g);
    if (j.contains("geometry")) {
        const json& s = j["geometry"];
        allow_only(s, "geometry", {"cylinders", "cutoff_order"});
        read(s, "cutoff_order", c.cutoff_order, "geometry");
        if (s.contains("cylinders") && !(s["cylinders"].is_string() && s["cylinders"] == "default")) {
            const json& a = s["cylinders"];
            if (!a.is_array() || a.size() != 5)
                throw ConfigError("geometry.cylinders: expected \"default\" or five cylinders Q, Q0, Q1, Qa, Q2");
            for (int i = 0; i < 5; ++i)
                c.cylinders[i] = read_cylinder(a[i], "geometry.cylinders[" + std::to_string(i) + "]");
        }
    }
    if (j.contains("morrey")) {
        const json& s = j["morrey"];
        allow_only(s, "morrey", {"p0", "q0", "plan"});
        if (s.contains("p0")) c.p0 = read_rational(s["p0"], "morrey.p0");
        if (s.contains("q0")) c.q0 = read_rational(s["q0"], "morrey.q0");
        if (s.contains("plan")) {
            const json& p = s["plan"];
            allow_only(p, "morrey.plan", {"r_min", "r_max", "time_stride", "space_stride"});
            read(p, "r_min", c.plan.r_min, "morrey.plan");
            read(p, "r_max", c.plan.r_max, "morrey.plan");
            read(p, "time_stride", c.plan.time_stride, "morrey.plan");
            read(p, "space_stride", c.plan.space_stride, "morrey.plan");
        }
    }
    if (j.contains("omega_exponents")) {
        const json& s = j["omega_exponents"];
        allow_only(s, "omega_exponents", {"p", "q"});
        read(s, "p", c.omega_exponents.p, "omega_exponents");
        read(s, "q", c.omega_exponents.q, "omega_exponents");
    }
    if (j.contains("ckn")) {
        const json& s = j["ckn"];
        allow_only(s, "ckn", {"t0", "x0", "radii", "eps_star"});
        if (s.contains("t0") && !s["t0"].is_null()) c.ckn.t0 = s["t0"].get<double>();
        if (s.contains("x0") && !s["x0"].is_null()) c.ckn.x0 = s["x0"].get<std::array<double, 3>>();
        read(s, "radii", c.ckn.radii, "ckn");
        read(s, "eps_star", c.ckn.eps_star, "ckn");
    }
    if (j.contains("tolerances")) {
        const json& s = j["tolerances"];
        Tolerances& t = c.tolerances;
        allow_only(s, "tolerances",
                   {"identity", "reconstruction", "expansion", "morrey_lp", "indicator", "scaling",
                    "adams_hedberg", "holder", "divergence", "decay", "energy", "halving_ratio", "duhamel",
                    "evolution_ratio", "ckn_slope_lo", "ckn_slope_hi"});
        read(s, "identity", t.identity, "tolerances");
        read(s, "reconstruction", t.reconstruction, "tolerances");
        read(s, "expansion", t.expansion, "tolerances");
        read(s, "morrey_lp", t.morrey_lp, "tolerances");
        read(s, "indicator", t.indicator, "tolerances");
        read(s, "scaling", t.scaling, "tolerances");
        read(s, "adams_hedberg", t.adams_hedberg, "tolerances");
        read(s, "holder", t.holder, "tolerances");
        read(s, "divergence", t.divergence, "tolerances");
        read(s, "decay", t.decay, "tolerances");
        read(s, "energy", t.energy, "tolerances");
        read(s, "halving_ratio", t.halving_ratio, "tolerances");
        read(s, "duhamel", t.duhamel, "tolerances");
        read(s, "evolution_ratio", t.evolution_ratio, "tolerances");
        read(s, "ckn_slope_lo", t.ckn_slope_lo, "tolerances");
        read(s, "ckn_slope_hi", t.ckn_slope_hi, "tolerances");
    }
    read(j, "synthetic", c.synthetic, "config");
    if (j.contains("output")) {
        const json& s = j["output"];
        allow_only(s, "output", {"dir"});
        read(s, "dir", c.out_dir, "output");
    }
    read(j, "seed", c.seed, "config");
    read(j, "threads", c.threads, "config");
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    return config_from_json(j);
}

json to_json(const ExperimentConfig& c) {
    const Grid& g = c.grid();
    const Toggles& o = c.solver.toggles;
    const Tolerances& t = c.tolerances;
    json cyl = json::array();
    for (const Cylinder& q : c.cylinders) cyl.push_back(cylinder_json(q));
    json ckn = {{"radii", c.ckn.radii}, {"eps_star", c.ckn.eps_star}};
    ckn["t0"] = c.ckn.t0 ? json(*c.ckn.t0) : json(nullptr);
    ckn["x0"] = c.ckn.x0 ? json(*c.ckn.x0) : json(nullptr);
    return {
        {"grid", {{"L", g.L}, {"Nx", g.Nx}, {"T", g.T}, {"Nt", g.Nt}}},
        {"solver",
         {{"substeps", c.solver.substeps},
          {"dealias", c.solver.dealias},
          {"cfl", c.solver.cfl},
          {"toggles",
           {{"convection", o.convection},
            {"coupling", o.coupling},
            {"grad_div", o.grad_div},
            {"damping", o.damping},
            {"perturbation", o.perturbation},
            {"forcing", o.forcing}}}}},
        {"initial",
         {{"velocity", c.initial.velocity},
          {"velocity_amplitude", c.initial.velocity_amplitude},
          {"microrotation", c.initial.microrotation},
          {"microrotation_amplitude", c.initial.microrotation_amplitude}}},
        {"perturbation", {{"kind", c.perturbation.kind}, {"l6_norm", c.perturbation.l6_norm}}},
        {"forcing", {{"kind", c.forcing.kind}, {"amplitude", c.forcing.amplitude}}},
        {"geometry", {{"cylinders", cyl}, {"cutoff_order", c.cutoff_order}}},
        {"morrey",
         {{"p0", to_string(c.p0)},
          {"q0", to_string(c.q0)},
          {"plan",
           {{"r_min", c.plan.r_min},
            {"r_max", c.plan.r_max},
            {"time_stride", c.plan.time_stride},
            {"space_stride", c.plan.space_stride}}}}},
        {"omega_exponents", {{"p", c.omega_exponents.p}, {"q", c.omega_exponents.q}}},
        {"ckn", ckn},
        {"tolerances",
         {{"identity", t.identity},
          {"reconstruction", t.reconstruction},
          {"expansion", t.expansion},
          {"morrey_lp", t.morrey_lp},
          {"indicator", t.indicator},
          {"scaling", t.scaling},
          {"adams_hedberg", t.adams_hedberg},
          {"holder", t.holder},
          {"divergence", t.divergence},
          {"decay", t.decay},
          {"energy", t.energy},
          {"halving_ratio", t.halving_ratio},
          {"duhamel", t.duhamel},
          {"evolution_ratio", t.evolution_ratio},
          {"ckn_slope_lo", t.ckn_slope_lo},
          {"ckn_slope_hi", t.ckn_slope_hi}}},
        {"synthetic", c.synthetic},
        {"output", {{"dir", c.out_dir}}},
        {"seed", c.seed},
        {"threads", c.threads},
    };
}

SolverState initial_state_of(const ExperimentConfig& c) {
    const Grid& g = c.grid();
    PointFn u0, w0;
    const double ua = c.initial.velocity_amplitude, wa = c.initial.microrotation_amplitude;
    if (c.initial.velocity == "taylor_green") u0 = taylor_green(g.L, ua);
    else if (c.initial.velocity == "random") u0 = random_slice(g, c.seed, ua, true);
    if (c.initial.microrotation == "smooth") {
        const double ks = 2 * std::numbers::pi / g.L;
        w0 = [wa, ks](double, const double* x, double* o) {
            o[0] = wa * (std::sin(ks * x[1]) + 0.3 * std::cos(ks * x[0]));
            o[1] = wa * std::sin(ks * x[2] + 0.4);
            o[2] = wa * std::cos(ks * (x[0] - x[1]));
        };
    } else if (c.initial.microrotation == "random") {
        w0 = random_slice(g, c.seed + 1, wa, false);
    }
    return initial_state(g, u0, w0);
}

VectorSupplier perturbation_of(const ExperimentConfig& c) {
    if (c.perturbation.kind == "zero" || c.perturbation.l6_norm == 0) return {};
    return supplier_from(c.grid(), default_perturbation(c.grid(), c.perturbation.l6_norm));
}

VectorSupplier forcing_of(const ExperimentConfig& c) {
    if (c.forcing.kind == "zero" || c.forcing.amplitude == 0) return {};
    const double amp = c.forcing.amplitude, ks = 2 * std::numbers::pi / c.grid().L;
    return supplier_from(c.grid(), [amp, ks](double t, const double* x, double* o) {
        o[0] = amp * std::cos(3 * t) * std::sin(ks * x[2]);
        o[1] = 0;
        o[2] = amp * std::cos(3 * t) * std::sin(ks * x[1]);
    });
}

}  // namespace mm
