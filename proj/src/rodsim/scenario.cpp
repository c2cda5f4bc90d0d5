#include "scenario.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "csv.hpp"
#include "oracles.hpp"

namespace rodsim {

namespace {

struct LineParser {
    std::istringstream ss;
    int lineno;
    explicit LineParser(const std::string& line, int n) : ss(line), lineno(n) {}

    [[noreturn]] void fail(const std::string& what) {
        throw std::invalid_argument("scenario line " + std::to_string(lineno) + ": " + what);
    }
    std::string word() {
        std::string w;
        if (!(ss >> w)) fail("missing token");
        return w;
    }
    std::optional<std::string> maybe_word() {
        std::string w;
        if (ss >> w) return w;
        return std::nullopt;
    }
    double num() {
        double v;
        if (!(ss >> v)) fail("expected a number");
        if (!std::isfinite(v)) fail("non-finite value");
        return v;
    }
    int integer() { return static_cast<int>(num()); }
    Vec3 vec3() {
        const double x = num(), y = num(), z = num();
        return Vec3(x, y, z);
    }
    bool onoff() {
        const std::string w = word();
        if (w == "on") return true;
        if (w == "off") return false;
        fail("expected on/off, got " + w);
    }
    RodEnd rod_end() {
        const std::string w = word();
        if (w == "start") return RodEnd::start;
        if (w == "end") return RodEnd::end;
        fail("expected start/end, got " + w);
    }
};

void parse_contact_fields(LineParser& p, ScenarioSpec::ContactDef& c) {
    while (auto key = p.maybe_word()) {
        if (*key == "mu")
            c.mu = p.num();
        else if (*key == "delta")
            c.delta = p.num();
        else if (*key == "nu")
            c.nu = p.num();
        else if (*key == "stiffness")
            c.stiffness = p.num();
        else
            p.fail("unknown contact field " + *key);
    }
}

void validate(const ScenarioSpec& s) {
    auto need_rod = [&](const std::string& name, const char* ctx) {
        s.rod_index(name);
        (void)ctx;
    };
    if (s.rods.empty()) throw std::invalid_argument("scenario declares no rods");
    for (const auto& r : s.rods) s.material(r.material);
    for (const auto& j : s.joints) {
        need_rod(j.rod_a, "joint");
        need_rod(j.rod_b, "joint");
    }
    for (const auto& b : s.bcs) need_rod(b.rod, "bc");
    for (const auto& pu : s.pushes) need_rod(pu.rod, "push");
    for (const auto& a : s.actuations) need_rod(a.rod, "actuate");
    if (s.init_velocity) need_rod(s.init_velocity->rod, "init");
    if (s.sweep) {
        need_rod(s.sweep->rod, "sweep");
        if (s.sweep->values.empty()) throw std::invalid_argument("sweep has no values");
    }
    if (s.real2sim)
        for (const auto& l : s.real2sim->limbs) need_rod(l, "real2sim");
    if (!(s.sim.time > 0.0)) throw std::invalid_argument("sim time must be positive");
    if (!(s.sim.dt > 0.0)) throw std::invalid_argument("sim dt must be positive");
    if (s.sim.integrator != "backward_euler" && s.sim.integrator != "implicit_midpoint" &&
        s.sim.integrator != "verlet")
        throw std::invalid_argument("unknown integrator " + s.sim.integrator);
}

}  // namespace

int ScenarioSpec::rod_index(const std::string& name) const {
    for (size_t i = 0; i < rods.size(); ++i)
        if (rods[i].name == name) return static_cast<int>(i);
    throw std::invalid_argument("unknown rod " + name);
}

const ScenarioSpec::MaterialDef& ScenarioSpec::material(const std::string& name) const {
    for (const auto& m : materials)
        if (m.name == name) return m;
    throw std::invalid_argument("unknown material " + name);
}

ScenarioSpec parse_scenario(const std::string& text) {
    ScenarioSpec s;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        LineParser p(line, lineno);
        const auto head = p.maybe_word();
        if (!head) continue;
        const std::string& key = *head;

        if (key == "material") {
            ScenarioSpec::MaterialDef m;
            m.name = p.word();
            while (auto f = p.maybe_word()) {
                if (*f == "E")
                    m.youngs = p.num();
                else if (*f == "poisson")
                    m.poisson = p.num();
                else if (*f == "G")
                    m.shear = p.num();
                else if (*f == "rho")
                    m.rho = p.num();
                else if (*f == "radius")
                    m.radius = p.num();
                else
                    p.fail("unknown material field " + *f);
            }
            if (!m.poisson && !m.shear) p.fail("material needs poisson or G");
            s.materials.push_back(m);
        } else if (key == "rod") {
            ScenarioSpec::RodDef r;
            r.name = p.word();
            const std::string kind = p.word();
            if (kind == "line") {
                r.kind = ScenarioSpec::RodDef::Kind::line;
                r.a = p.vec3();
                r.b = p.vec3();
            } else if (kind == "helix") {
                r.kind = ScenarioSpec::RodDef::Kind::helix;
            } else {
                p.fail("unknown rod kind " + kind);
            }
            while (auto f = p.maybe_word()) {
                if (*f == "nodes")
                    r.nodes = p.integer();
                else if (*f == "material")
                    r.material = p.word();
                else if (*f == "center")
                    r.center = p.vec3();
                else if (*f == "axis")
                    r.axis = p.vec3();
                else if (*f == "radius")
                    r.radius = p.num();
                else if (*f == "pitch")
                    r.pitch = p.num();
                else if (*f == "contour")
                    r.contour = p.num();
                else if (*f == "phase")
                    r.phase = p.num();
                else
                    p.fail("unknown rod field " + *f);
            }
            s.rods.push_back(r);
        } else if (key == "joint") {
            ScenarioSpec::JointDef j;
            j.rod_a = p.word();
            j.node_a = p.integer();
            j.rod_b = p.word();
            j.end_b = p.rod_end();
            s.joints.push_back(j);
        } else if (key == "clamp") {
            ScenarioSpec::BcDef b;
            b.kind = ScenarioSpec::BcDef::Kind::clamp;
            b.rod = p.word();
            b.end = p.rod_end();
            s.bcs.push_back(b);
        } else if (key == "fix_node" || key == "fix_theta") {
            ScenarioSpec::BcDef b;
            b.kind = (key == "fix_node") ? ScenarioSpec::BcDef::Kind::fix_node
                                         : ScenarioSpec::BcDef::Kind::fix_theta;
            b.rod = p.word();
            b.index = p.integer();
            s.bcs.push_back(b);
        } else if (key == "gravity") {
            s.gravity = p.vec3();
        } else if (key == "damping") {
            s.damping = p.num();
        } else if (key == "floor") {
            ScenarioSpec::FloorDef f;
            const std::string zkey = p.word();
            if (zkey != "z") p.fail("floor expects z <value> first");
            f.z = p.num();
            parse_contact_fields(p, f);
            s.floor = f;
        } else if (key == "selfcontact") {
            ScenarioSpec::ContactDef c;
            parse_contact_fields(p, c);
            s.selfcontact = c;
        } else if (key == "push") {
            ScenarioSpec::PushDef pd;
            pd.rod = p.word();
            pd.force = p.vec3();
            s.pushes.push_back(pd);
        } else if (key == "actuate") {
            ScenarioSpec::ActuateDef a;
            a.rod = p.word();
            const std::string kind = p.word();
            if (kind == "phi_deg") {
                a.kind = ScenarioSpec::ActuateDef::Kind::phi_deg;
                a.phi_deg = p.num();
            } else if (kind == "kappa") {
                a.kind = ScenarioSpec::ActuateDef::Kind::kappa;
                a.kappa[0] = p.num();
                a.kappa[1] = p.num();
            } else if (kind == "random_phi_deg") {
                a.kind = ScenarioSpec::ActuateDef::Kind::random_phi_deg;
                a.lo_deg = p.num();
                a.hi_deg = p.num();
            } else {
                p.fail("unknown actuation kind " + kind);
            }
            while (auto f = p.maybe_word()) {
                if (*f == "seed")
                    a.seed = static_cast<unsigned>(p.num());
                else if (*f == "azimuth_deg")
                    a.azimuth_deg = p.num();
                else if (*f == "ramp") {
                    a.ramp_t0 = p.num();
                    a.ramp_t1 = p.num();
                } else
                    p.fail("unknown actuation field " + *f);
            }
            s.actuations.push_back(a);
        } else if (key == "sim") {
            while (auto f = p.maybe_word()) {
                if (*f == "dt")
                    s.sim.dt = p.num();
                else if (*f == "time")
                    s.sim.time = p.num();
                else if (*f == "integrator")
                    s.sim.integrator = p.word();
                else if (*f == "tol")
                    s.sim.tol = p.num();
                else if (*f == "max_iters")
                    s.sim.max_iters = p.integer();
                else if (*f == "line_search")
                    s.sim.line_search = p.onoff();
                else if (*f == "adaptive")
                    s.sim.adaptive = p.onoff();
                else if (*f == "min_dt")
                    s.sim.min_dt = p.num();
                else if (*f == "settle") {
                    s.sim.settle_time = p.num();
                    s.sim.settle_damping = p.num();
                } else
                    p.fail("unknown sim field " + *f);
            }
        } else if (key == "init_mode_velocity") {
            ScenarioSpec::InitVelocityDef iv;
            iv.rod = p.word();
            iv.tip_velocity = p.num();
            s.init_velocity = iv;
        } else if (key == "log") {
            while (auto f = p.maybe_word()) {
                if (*f == "every")
                    s.log.every = p.integer();
                else if (*f == "energies")
                    s.log.energies = p.onoff();
                else
                    p.fail("unknown log field " + *f);
            }
        } else if (key == "sweep") {
            ScenarioSpec::SweepDef sw;
            sw.parameter = p.word();
            if (sw.parameter != "push_x" && sw.parameter != "push_y" && sw.parameter != "push_z")
                p.fail("unknown sweep parameter " + sw.parameter);
            sw.rod = p.word();
            const std::string mode = p.word();
            if (mode == "linspace") {
                const double lo = p.num(), hi = p.num();
                const int count = p.integer();
                if (count < 1) p.fail("sweep count must be >= 1");
                for (int i = 0; i < count; ++i)
                    sw.values.push_back(
                        count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (count - 1));
            } else if (mode == "values") {
                while (auto v = p.maybe_word()) sw.values.push_back(std::stod(*v));
            } else {
                p.fail("sweep expects linspace or values");
            }
            s.sweep = sw;
        } else if (key == "real2sim") {
            ScenarioSpec::Real2SimDef r;
            while (auto f = p.maybe_word()) {
                if (*f == "markers")
                    r.marker_path = p.word();
                else if (*f == "limbs") {
                    r.limbs.push_back(p.word());
                    r.limbs.push_back(p.word());
                } else if (*f == "alpha")
                    r.alpha = p.num();
                else if (*f == "eps")
                    r.eps = p.num();
                else if (*f == "tol")
                    r.tol = p.num();
                else if (*f == "settle_vel")
                    r.settle_vel = p.num();
                else if (*f == "max_iters")
                    r.max_iters = p.integer();
                else if (*f == "cold_start")
                    r.cold_start = true;
                else
                    p.fail("unknown real2sim field " + *f);
            }
            s.real2sim = r;
        } else if (key == "seed") {
            s.seed = static_cast<unsigned>(p.num());
        } else {
            p.fail("unknown directive " + key);
        }
    }
    validate(s);
    return s;
}

ScenarioSpec load_scenario(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open scenario " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_scenario(ss.str());
}

std::string serialize_scenario(const ScenarioSpec& s) {
    std::ostringstream os;
    const auto d = [](double v) { return format_double(v); };
    const auto v3 = [&](const Vec3& v) { return d(v[0]) + " " + d(v[1]) + " " + d(v[2]); };
    for (const auto& m : s.materials) {
        os << "material " << m.name << " E " << d(m.youngs);
        if (m.poisson) os << " poisson " << d(*m.poisson);
        if (m.shear) os << " G " << d(*m.shear);
        os << " rho " << d(m.rho) << " radius " << d(m.radius) << "\n";
    }
    for (const auto& r : s.rods) {
        os << "rod " << r.name << ' ';
        if (r.kind == ScenarioSpec::RodDef::Kind::line)
            os << "line " << v3(r.a) << ' ' << v3(r.b);
        else
            os << "helix center " << v3(r.center) << " axis " << v3(r.axis) << " radius "
               << d(r.radius) << " pitch " << d(r.pitch) << " contour " << d(r.contour)
               << " phase " << d(r.phase);
        os << " nodes " << r.nodes << " material " << r.material << "\n";
    }
    for (const auto& j : s.joints)
        os << "joint " << j.rod_a << ' ' << j.node_a << ' ' << j.rod_b << ' '
           << (j.end_b == RodEnd::start ? "start" : "end") << "\n";
    for (const auto& b : s.bcs) {
        if (b.kind == ScenarioSpec::BcDef::Kind::clamp)
            os << "clamp " << b.rod << ' ' << (b.end == RodEnd::start ? "start" : "end") << "\n";
        else if (b.kind == ScenarioSpec::BcDef::Kind::fix_node)
            os << "fix_node " << b.rod << ' ' << b.index << "\n";
        else
            os << "fix_theta " << b.rod << ' ' << b.index << "\n";
    }
    os << "gravity " << v3(s.gravity) << "\n";
    os << "damping " << d(s.damping) << "\n";
    if (s.floor)
        os << "floor z " << d(s.floor->z) << " mu " << d(s.floor->mu) << " delta "
           << d(s.floor->delta) << " nu " << d(s.floor->nu) << " stiffness "
           << d(s.floor->stiffness) << "\n";
    if (s.selfcontact)
        os << "selfcontact mu " << d(s.selfcontact->mu) << " delta " << d(s.selfcontact->delta)
           << " nu " << d(s.selfcontact->nu) << " stiffness " << d(s.selfcontact->stiffness)
           << "\n";
    for (const auto& pu : s.pushes) os << "push " << pu.rod << ' ' << v3(pu.force) << "\n";
    for (const auto& a : s.actuations) {
        os << "actuate " << a.rod << ' ';
        if (a.kind == ScenarioSpec::ActuateDef::Kind::phi_deg)
            os << "phi_deg " << d(a.phi_deg);
        else if (a.kind == ScenarioSpec::ActuateDef::Kind::kappa)
            os << "kappa " << d(a.kappa[0]) << ' ' << d(a.kappa[1]);
        else
            os << "random_phi_deg " << d(a.lo_deg) << ' ' << d(a.hi_deg) << " seed " << a.seed;
        os << " azimuth_deg " << d(a.azimuth_deg) << " ramp " << d(a.ramp_t0) << ' '
           << d(a.ramp_t1) << "\n";
    }
    os << "sim dt " << d(s.sim.dt) << " time " << d(s.sim.time) << " integrator "
       << s.sim.integrator << " tol " << d(s.sim.tol) << " max_iters " << s.sim.max_iters
       << " line_search " << (s.sim.line_search ? "on" : "off") << " adaptive "
       << (s.sim.adaptive ? "on" : "off") << " min_dt " << d(s.sim.min_dt) << " settle "
       << d(s.sim.settle_time) << ' ' << d(s.sim.settle_damping) << "\n";
    if (s.init_velocity)
        os << "init_mode_velocity " << s.init_velocity->rod << ' '
           << d(s.init_velocity->tip_velocity) << "\n";
    os << "log every " << s.log.every << " energies " << (s.log.energies ? "on" : "off") << "\n";
    if (s.sweep) {
        os << "sweep " << s.sweep->parameter << ' ' << s.sweep->rod << " values";
        for (double v : s.sweep->values) os << ' ' << d(v);
        os << "\n";
    }
    if (s.real2sim) {
        const auto& r = *s.real2sim;
        os << "real2sim markers " << r.marker_path << " limbs " << r.limbs[0] << ' '
           << r.limbs[1] << " alpha " << d(r.alpha) << " eps " << d(r.eps) << " tol " << d(r.tol)
           << " settle_vel " << d(r.settle_vel) << " max_iters " << r.max_iters;
        if (r.cold_start) os << " cold_start";
        os << "\n";
    }
    os << "seed " << s.seed << "\n";
    return os.str();
}

BuiltScenario build_scenario(const ScenarioSpec& spec) {
    validate(spec);
    BuiltScenario out;
    out.spec = spec;
    out.assembly = std::make_unique<Assembly>();
    Assembly& assembly = *out.assembly;

    for (const auto& r : spec.rods) {
        const auto& md = spec.material(r.material);
        const Material mat = md.poisson
                                 ? Material::from_poisson(md.youngs, *md.poisson, md.rho, md.radius)
                                 : Material(md.youngs, *md.shear, md.rho, md.radius);
        RodSpec rs;
        if (r.kind == ScenarioSpec::RodDef::Kind::line) {
            rs.shape = RodSpec::Shape::line;
            rs.a = r.a;
            rs.b = r.b;
        } else {
            rs.shape = RodSpec::Shape::helix;
            rs.center = r.center;
            rs.axis = r.axis;
            rs.helix_radius = r.radius;
            rs.pitch = r.pitch;
            rs.contour_length = r.contour;
            rs.phase = r.phase;
        }
        rs.node_count = r.nodes;
        rs.material = mat;
        assembly.add_rod(rs);
    }
    for (const auto& j : spec.joints)
        assembly.create_joint(spec.rod_index(j.rod_a), j.node_a, spec.rod_index(j.rod_b), j.end_b);
    for (const auto& b : spec.bcs) {
        const int rod = spec.rod_index(b.rod);
        switch (b.kind) {
            case ScenarioSpec::BcDef::Kind::clamp:
                assembly.clamp_end(rod, b.end);
                break;
            case ScenarioSpec::BcDef::Kind::fix_node:
                assembly.fix_node(rod, b.index);
                break;
            case ScenarioSpec::BcDef::Kind::fix_theta:
                assembly.fix_theta(rod, b.index);
                break;
        }
    }

    SimConfig cfg;
    cfg.dt = spec.sim.dt;
    cfg.newton_tol = spec.sim.tol;
    cfg.max_newton_iters = spec.sim.max_iters;
    cfg.line_search = spec.sim.line_search;
    cfg.adaptive.enabled = spec.sim.adaptive;
    cfg.adaptive.min_dt = spec.sim.min_dt;
    cfg.gravity = spec.gravity;
    cfg.damping = spec.damping;
    if (spec.sim.integrator == "backward_euler")
        cfg.integrator = IntegratorKind::backward_euler;
    else if (spec.sim.integrator == "implicit_midpoint")
        cfg.integrator = IntegratorKind::implicit_midpoint;
    else
        cfg.integrator = IntegratorKind::verlet_explicit;

    out.sim = std::make_unique<Simulator>(assembly, cfg);

    if (spec.floor) {
        ContactParams cp;
        cp.mu = spec.floor->mu;
        cp.delta = spec.floor->delta;
        cp.nu = spec.floor->nu;
        cp.stiffness = spec.floor->stiffness;
        out.sim->set_floor(FloorPlane{Vec3(0, 0, 1), spec.floor->z}, cp);
    }
    if (spec.selfcontact) {
        ContactParams cp;
        cp.mu = spec.selfcontact->mu;
        cp.delta = spec.selfcontact->delta;
        cp.nu = spec.selfcontact->nu;
        cp.stiffness = spec.selfcontact->stiffness;
        out.sim->set_self_contact(cp);
    }
    for (const auto& pu : spec.pushes) out.sim->add_push(spec.rod_index(pu.rod), pu.force);

    for (size_t idx = 0; idx < spec.actuations.size(); ++idx) {
        const auto& a = spec.actuations[idx];
        const int rod = spec.rod_index(a.rod);
        const double az = a.azimuth_deg * M_PI / 180.0;
        const Vec2 dir(std::cos(az), std::sin(az));
        ActuationSchedule::Channel ch;
        switch (a.kind) {
            case ScenarioSpec::ActuateDef::Kind::phi_deg: {
                const double mag = curvature_from_angle(a.phi_deg * M_PI / 180.0);
                ch = ActuationSchedule::uniform(assembly, rod, mag * dir);
                break;
            }
            case ScenarioSpec::ActuateDef::Kind::kappa: {
                ch = ActuationSchedule::uniform(assembly, rod, a.kappa);
                break;
            }
            case ScenarioSpec::ActuateDef::Kind::random_phi_deg: {
                ch.rod = rod;
                const int ni = assembly.rod(rod).geometry.interior_count();
                std::mt19937 rng(a.seed ? a.seed : spec.seed + static_cast<unsigned>(idx));
                std::uniform_real_distribution<double> u(a.lo_deg, a.hi_deg);
                ch.base_curvature.resize(ni);
                for (int i = 0; i < ni; ++i)
                    ch.base_curvature[i] = curvature_from_angle(u(rng) * M_PI / 180.0) * dir;
                break;
            }
        }
        if (a.ramp_t1 > a.ramp_t0) {
            ch.keys = {{a.ramp_t0, 0.0}, {a.ramp_t1, 1.0}};
            ch.linear = true;
        } else {
            ch.keys = {{a.ramp_t0, 1.0}};
            ch.linear = false;
        }
        out.schedule.channels.push_back(ch);
    }
    if (!out.schedule.channels.empty()) {
        ActuationSchedule* sched = &out.schedule;
        Assembly* asmb = &assembly;
        out.sim->pre_step = [sched, asmb](double t) { sched->apply(*asmb, t); };
    }

    if (spec.init_velocity) {
        const int rod = spec.rod_index(spec.init_velocity->rod);
        const Rod& r = assembly.rod(rod);
        const CantileverOracle oracle(r.material, r.geometry.length(),
                                      spec.init_velocity->tip_velocity);
        VecX qdot = out.sim->state().qdot;
        double arc = 0.0;
        for (int i = 0; i < r.geometry.node_count; ++i) {
            if (i > 0) arc += r.geometry.rest_edge_len[i - 1];
            const int base = assembly.node_base(rod, i);
            if (!assembly.fixed_mask()[base + 2]) qdot[base + 2] = oracle.initial_velocity(arc);
        }
        out.sim->state().qdot = qdot;
    }
    return out;
}

}  // namespace rodsim
