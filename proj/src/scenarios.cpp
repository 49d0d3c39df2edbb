#include "gbsde/scenarios.hpp"

#include "gbsde/parallel.hpp"
#include "gbsde/rng.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace gbsde {

VolatilityControl VolatilityControl::constant(double sigma) {
    VolatilityControl c;
    c.kind = Kind::Constant;
    c.sigma_a = sigma;
    return c;
}

VolatilityControl VolatilityControl::bang_bang(double before, double after, double switch_time) {
    VolatilityControl c;
    c.kind = Kind::BangBang;
    c.sigma_a = before;
    c.sigma_b = after;
    c.switch_time = switch_time;
    return c;
}

VolatilityControl VolatilityControl::piecewise_random() {
    VolatilityControl c;
    c.kind = Kind::PiecewiseRandom;
    return c;
}

std::string VolatilityControl::label() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::Constant:
            os << "const(" << sigma_a << ")";
            break;
        case Kind::BangBang:
            os << "bang(" << sigma_a << "->" << sigma_b << "@" << switch_time << ")";
            break;
        case Kind::PiecewiseRandom:
            os << "rand";
            break;
    }
    return os.str();
}

ScenarioFamily ScenarioFamily::default_family(const VolatilityBand& band, double dt,
                                              double horizon, int paths_per_control,
                                              uint64_t base_seed) {
    ScenarioFamily fam{band, dt, horizon, base_seed, {}};
    auto add = [&](VolatilityControl c) { fam.members.push_back({c, paths_per_control}); };
    add(VolatilityControl::constant(band.sigma_lo));
    add(VolatilityControl::constant(band.sigma_hi));
    for (double frac : {0.5, 0.25, 0.75, 0.125}) {
        add(VolatilityControl::bang_bang(band.sigma_lo, band.sigma_hi, frac * horizon));
        add(VolatilityControl::bang_bang(band.sigma_hi, band.sigma_lo, frac * horizon));
    }
    for (int i = 0; i < 8; ++i) add(VolatilityControl::piecewise_random());
    return fam;
}

ScenarioFamily ScenarioFamily::extremes(const VolatilityBand& band, double dt, double horizon,
                                        int paths_per_control, uint64_t base_seed) {
    ScenarioFamily fam{band, dt, horizon, base_seed, {}};
    fam.members.push_back({VolatilityControl::constant(band.sigma_lo), paths_per_control});
    fam.members.push_back({VolatilityControl::constant(band.sigma_hi), paths_per_control});
    return fam;
}

void ScenarioFamily::validate() const {
    bool has_lo = false, has_hi = false;
    for (const auto& m : members) {
        if (m.control.kind == VolatilityControl::Kind::Constant) {
            if (m.control.sigma_a == band.sigma_lo) has_lo = true;
            if (m.control.sigma_a == band.sigma_hi) has_hi = true;
        }
    }
    if (!has_lo || !has_hi)
        throw ConfigError(
            "ScenarioFamily: the family must contain both constant extreme controls");
    if (!(dt > 0.0)) throw ConfigError("ScenarioFamily: dt must be positive");
}

uint64_t ScenarioFamily::path_seed(int member, int path) const {
    return mix_seed(base_seed, static_cast<uint64_t>(member) + 1,
                    static_cast<uint64_t>(path) + 1);
}

long ScenarioFamily::steps() const {
    double raw = horizon / dt;
    long n = static_cast<long>(std::llround(raw));
    if (n < 1 || std::abs(raw - static_cast<double>(n)) > 1e-9)
        throw DomainError("ScenarioFamily: dt must divide the horizon");
    return n;
}

ScenarioPath simulate_scenario(const VolatilityControl& control, const VolatilityBand& band,
                               uint64_t seed, double dt, double horizon, int control_index) {
    if (!(dt > 0.0)) throw DomainError("simulate_scenario: dt must be positive");
    double raw = horizon / dt;
    long steps = static_cast<long>(std::llround(raw));
    if (steps < 1 || std::abs(raw - static_cast<double>(steps)) > 1e-9)
        throw DomainError("simulate_scenario: dt must divide the horizon");

    ScenarioPath path;
    path.dt = dt;
    path.control_index = control_index;
    path.seed = seed;
    path.t = Array::LinSpaced(steps + 1, 0.0, horizon);
    path.b.resize(steps + 1);
    path.qv.resize(steps + 1);
    path.sigma.resize(steps);
    path.b[0] = 0.0;
    path.qv[0] = 0.0;

    std::mt19937_64 noise(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    // the control draws from its own stream so path noise and control noise
    // stay decoupled (state-independent controls)
    std::mt19937_64 control_stream(mix_seed(seed, 0x636f6e74726f6cULL));
    std::uniform_real_distribution<double> uni(band.sigma_lo, band.sigma_hi);

    const double sqdt = std::sqrt(dt);
    for (long j = 0; j < steps; ++j) {
        double s;
        switch (control.kind) {
            case VolatilityControl::Kind::Constant:
                s = control.sigma_a;
                break;
            case VolatilityControl::Kind::BangBang:
                s = path.t[j] < control.switch_time ? control.sigma_a : control.sigma_b;
                break;
            case VolatilityControl::Kind::PiecewiseRandom:
                s = uni(control_stream);
                break;
            default:
                s = control.sigma_a;
        }
        if (!band.contains(s))
            throw DomainError("simulate_scenario: control value " + std::to_string(s) +
                              " outside the band at step " + std::to_string(j));
        path.sigma[j] = s;
        path.b[j + 1] = path.b[j] + s * sqdt * gauss(noise);
        path.qv[j + 1] = path.qv[j] + s * s * dt;
    }
    return path;
}

ScenarioPath restrict_path(const ScenarioPath& path, int factor) {
    if (factor < 1) throw DomainError("restrict_path: factor must be >= 1");
    if (factor == 1) return path;
    if (path.steps() % factor != 0)
        throw ShapeError("restrict_path: factor must divide the step count");
    const long steps = path.steps() / factor;
    ScenarioPath out;
    out.dt = path.dt * factor;
    out.control_index = path.control_index;
    out.seed = path.seed;
    out.t.resize(steps + 1);
    out.b.resize(steps + 1);
    out.qv.resize(steps + 1);
    out.sigma.resize(steps);
    for (long j = 0; j <= steps; ++j) {
        out.t[j] = path.t[j * factor];
        out.b[j] = path.b[j * factor];
        out.qv[j] = path.qv[j * factor];
    }
    for (long j = 0; j < steps; ++j)
        out.sigma[j] = std::sqrt((out.qv[j + 1] - out.qv[j]) / out.dt);
    return out;
}

Array ito_integral(Eigen::Ref<const Array> eta, const ScenarioPath& path) {
    if (eta.size() != path.b.size())
        throw ShapeError("ito_integral: integrand has " + std::to_string(eta.size()) +
                         " entries, path grid has " + std::to_string(path.b.size()));
    Array out(path.b.size());
    out[0] = 0.0;
    for (long j = 0; j + 1 < path.b.size(); ++j)
        out[j + 1] = out[j] + eta[j] * (path.b[j + 1] - path.b[j]);
    return out;
}

Array qv_integral(Eigen::Ref<const Array> eta, const ScenarioPath& path) {
    if (eta.size() != path.qv.size())
        throw ShapeError("qv_integral: integrand has " + std::to_string(eta.size()) +
                         " entries, path grid has " + std::to_string(path.qv.size()));
    Array out(path.qv.size());
    out[0] = 0.0;
    for (long j = 0; j + 1 < path.qv.size(); ++j)
        out[j + 1] = out[j] + eta[j] * (path.qv[j + 1] - path.qv[j]);
    return out;
}

std::vector<UpperExpectation> upper_expectations(const std::vector<PathFunctional>& functionals,
                                                 const ScenarioFamily& family) {
    if (family.members.empty())
        throw ConfigError("upper_expectations: the scenario family has no controls");
    const std::size_t nf = functionals.size();
    std::vector<UpperExpectation> out(nf);
    for (auto& ue : out) ue.per_control.reserve(family.members.size());

    for (std::size_t m = 0; m < family.members.size(); ++m) {
        const auto& member = family.members[m];
        std::vector<Array> values(nf, Array(member.path_count));
        parallel_for(member.path_count, [&](long p) {
            ScenarioPath path = simulate_scenario(member.control, family.band,
                                                  family.path_seed(static_cast<int>(m),
                                                                   static_cast<int>(p)),
                                                  family.dt, family.horizon, static_cast<int>(m));
            try {
                for (std::size_t f = 0; f < nf; ++f) values[f][p] = functionals[f](path);
            } catch (const std::exception& e) {
                throw NumericError("functional failed on control '" + member.control.label() +
                                   "' path " + std::to_string(p) + ": " + e.what());
            }
        });
        for (std::size_t f = 0; f < nf; ++f) {
            MeanStdErr ms = mean_stderr(values[f]);
            out[f].per_control.push_back(
                {member.control.label(), ms.mean, ms.std_error, ms.count});
        }
    }
    for (auto& ue : out) {
        ue.argmax_control = 0;
        for (std::size_t c = 1; c < ue.per_control.size(); ++c)
            if (ue.per_control[c].mean > ue.per_control[ue.argmax_control].mean)
                ue.argmax_control = static_cast<int>(c);
        ue.estimate = ue.per_control[ue.argmax_control].mean;
        ue.max_std_error = ue.per_control[ue.argmax_control].std_error;
    }
    return out;
}

UpperExpectation upper_expectation(const PathFunctional& functional,
                                   const ScenarioFamily& family) {
    return upper_expectations({functional}, family)[0];
}

std::vector<ScenarioPath> simulate_family(const ScenarioFamily& family) {
    long total = 0;
    for (const auto& m : family.members) total += m.path_count;
    std::vector<ScenarioPath> out(static_cast<std::size_t>(total));
    std::vector<std::pair<int, int>> ids(static_cast<std::size_t>(total));
    long pos = 0;
    for (std::size_t m = 0; m < family.members.size(); ++m)
        for (int p = 0; p < family.members[m].path_count; ++p)
            ids[static_cast<std::size_t>(pos++)] = {static_cast<int>(m), p};
    parallel_for(total, [&](long i) {
        auto [m, p] = ids[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] =
            simulate_scenario(family.members[static_cast<std::size_t>(m)].control, family.band,
                              family.path_seed(m, p), family.dt, family.horizon, m);
    });
    return out;
}

void for_each_path(const ScenarioFamily& family,
                   const std::function<void(const ScenarioPath&, int, int)>& visit) {
    for (std::size_t m = 0; m < family.members.size(); ++m) {
        const auto& member = family.members[m];
        for (int p = 0; p < member.path_count; ++p) {
            ScenarioPath path =
                simulate_scenario(member.control, family.band,
                                  family.path_seed(static_cast<int>(m), p), family.dt,
                                  family.horizon, static_cast<int>(m));
            visit(path, static_cast<int>(m), p);
        }
    }
}

}  // namespace gbsde
