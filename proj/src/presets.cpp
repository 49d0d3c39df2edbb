#include "gbsde/presets.hpp"

#include "gbsde/expr.hpp"
#include "gbsde/rng.hpp"

#include <cmath>
#include <limits>

namespace gbsde {

namespace {

using nlohmann::json;

double get_num(const json& params, const std::string& key, double fallback) {
    if (!params.contains(key)) return fallback;
    if (!params[key].is_number())
        throw ConfigError("preset parameter '" + key + "' must be a number");
    return params[key].get<double>();
}

void check_keys(const json& params, const std::string& id,
                std::initializer_list<const char*> allowed) {
    if (params.is_null()) return;
    if (!params.is_object()) throw ConfigError("preset '" + id + "': params must be an object");
    for (auto it = params.begin(); it != params.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) throw ConfigError("preset '" + id + "': unknown parameter '" + it.key() + "'");
    }
}

std::function<double(double)> linear_modulus(double slope) {
    return [slope](double d) { return slope * std::abs(d); };
}

std::function<double(double)> clamped_modulus(double slope, double cap) {
    return [slope, cap](double d) { return std::min(slope * std::abs(d), cap); };
}

constexpr double kUnbounded = std::numeric_limits<double>::infinity();

}  // namespace

GeneratorSpec make_generator(const std::string& id, const json& params, int num_increments) {
    GeneratorSpec f;
    f.num_increments = num_increments;
    f.modulus = linear_modulus(0.0);
    f.deps = {false, false, false, false};

    if (id == "zero") {
        check_keys(params, id, {});
        f.eval = [](double, Eigen::Ref<const Vector>, double, double) { return 0.0; };
        return f;
    }
    if (id == "constant") {
        check_keys(params, id, {"c"});
        double c = get_num(params, "c", 0.3);
        f.m0 = std::abs(c);
        f.eval = [c](double, Eigen::Ref<const Vector>, double, double) { return c; };
        return f;
    }
    if (id == "linear-y") {
        check_keys(params, id, {"alpha"});
        double alpha = get_num(params, "alpha", 0.5);
        f.lip_y = std::abs(alpha);
        f.deps.y = true;
        f.eval = [alpha](double, Eigen::Ref<const Vector>, double y, double) { return alpha * y; };
        return f;
    }
    if (id == "linear-z") {
        check_keys(params, id, {"beta"});
        double beta = get_num(params, "beta", 0.5);
        f.lip_z = std::abs(beta);
        f.deps.z = true;
        f.eval = [beta](double, Eigen::Ref<const Vector>, double, double z) { return beta * z; };
        return f;
    }
    if (id == "random-lipschitz") {
        check_keys(params, id, {"seed", "amp_x", "amp_y", "amp_z"});
        uint64_t seed = static_cast<uint64_t>(get_num(params, "seed", 7.0));
        double ax = get_num(params, "amp_x", 0.15);
        double ay = get_num(params, "amp_y", 0.2);
        double az = get_num(params, "amp_z", 0.15);
        // frequencies and phases drawn once from the seed, fixed thereafter
        uint64_t s = seed;
        auto draw = [&s](double lo, double hi) {
            return lo + (hi - lo) * (static_cast<double>(splitmix64(s) >> 11) / 9007199254740992.0);
        };
        double wt = draw(0.5, 1.5);
        Vector wx(num_increments);
        for (int i = 0; i < num_increments; ++i) wx[i] = draw(0.5, 1.5);
        double wy = draw(0.5, 1.5), wz = draw(0.5, 1.5);
        double pt = draw(0.0, 6.28), py = draw(0.0, 6.28), pz = draw(0.0, 6.28);
        f.m0 = ax + ay + az;
        f.lip_y = ay * wy;
        f.lip_z = az * wz;
        f.lip_x = ax * wx.maxCoeff();
        f.modulus = linear_modulus(ax * std::max(wt, wx.maxCoeff()));
        f.deps = {true, true, true, true};
        f.eval = [=](double t, Eigen::Ref<const Vector> x, double y, double z) {
            return ax * std::sin(wt * t + wx.dot(x) + pt) + ay * std::sin(wy * y + py) +
                   az * std::sin(wz * z + pz);
        };
        return f;
    }
    if (id == "expr") {
        check_keys(params, id, {"expr", "m0", "lip_y", "lip_z", "lip_x", "modulus_slope"});
        if (!params.contains("expr") || !params["expr"].is_string())
            throw ConfigError("preset 'expr': missing expression string");
        Expression e = Expression::parse(params["expr"].get<std::string>(), num_increments);
        f.m0 = get_num(params, "m0", 0.0);
        f.lip_y = get_num(params, "lip_y", 0.0);
        f.lip_z = get_num(params, "lip_z", 0.0);
        f.lip_x = get_num(params, "lip_x", 0.0);
        f.modulus = linear_modulus(get_num(params, "modulus_slope", f.lip_x * num_increments));
        f.deps = {e.uses_t(), e.uses_x(), e.uses_y(), e.uses_z()};
        f.eval = [e](double t, Eigen::Ref<const Vector> x, double y, double z) {
            return e.eval(t, x, y, z);
        };
        return f;
    }
    throw ConfigError("unknown generator preset '" + id + "'");
}

TerminalSpec make_terminal(const std::string& id, const json& params, int num_increments) {
    TerminalSpec phi;
    phi.num_increments = num_increments;
    auto from_sum = [&phi](std::function<double(double)> g) {
        phi.sum_form = g;
        phi.phi = [g](Eigen::Ref<const Vector> x) { return g(x.sum()); };
    };

    if (id == "zero") {
        check_keys(params, id, {});
        phi.bound = 0.0;
        phi.lipschitz = 0.0;
        from_sum([](double) { return 0.0; });
        return phi;
    }
    if (id == "affine" || id == "identity") {
        double a = 0.0, b = 1.0;
        if (id == "affine") {
            check_keys(params, id, {"a", "b"});
            a = get_num(params, "a", 0.0);
            b = get_num(params, "b", 1.0);
        } else {
            check_keys(params, id, {});
        }
        phi.bound = kUnbounded;
        phi.lipschitz = std::abs(b);
        from_sum([a, b](double s) { return a + b * s; });
        return phi;
    }
    if (id == "quad-convex" || id == "quad-concave") {
        check_keys(params, id, {"scale", "domain_halfwidth"});
        double scale = get_num(params, "scale", 1.0);
        double hw = get_num(params, "domain_halfwidth", 6.0);
        double sign = id == "quad-convex" ? 1.0 : -1.0;
        phi.bound = kUnbounded;
        phi.lipschitz = 2.0 * scale * hw * num_increments;
        from_sum([scale, sign](double s) { return sign * scale * s * s; });
        return phi;
    }
    if (id == "exp-clamped") {
        check_keys(params, id, {"lo", "hi"});
        double lo = get_num(params, "lo", -5.0);
        double hi = get_num(params, "hi", 5.0);
        phi.bound = std::exp(hi);
        phi.lipschitz = std::exp(hi);
        from_sum([lo, hi](double s) { return std::exp(std::clamp(s, lo, hi)); });
        return phi;
    }
    if (id == "clamped-identity") {
        check_keys(params, id, {"lo", "hi", "scale"});
        double lo = get_num(params, "lo", -2.0);
        double hi = get_num(params, "hi", 2.0);
        double scale = get_num(params, "scale", 1.0);
        phi.bound = scale * std::max(std::abs(lo), std::abs(hi));
        phi.lipschitz = scale;
        from_sum([lo, hi, scale](double s) { return scale * std::clamp(s, lo, hi); });
        return phi;
    }
    if (id == "tanh") {
        check_keys(params, id, {"scale", "slope"});
        double scale = get_num(params, "scale", 0.5);
        double slope = get_num(params, "slope", 1.0);
        phi.bound = scale;
        phi.lipschitz = scale * slope;
        from_sum([scale, slope](double s) { return scale * std::tanh(slope * s); });
        return phi;
    }
    if (id == "product") {  // x1 * x2 * ... (no sum form)
        check_keys(params, id, {});
        phi.bound = kUnbounded;
        phi.lipschitz = kUnbounded;
        phi.phi = [](Eigen::Ref<const Vector> x) { return x.prod(); };
        return phi;
    }
    if (id == "expr") {
        check_keys(params, id, {"expr", "bound", "lipschitz"});
        if (!params.contains("expr") || !params["expr"].is_string())
            throw ConfigError("preset 'expr': missing expression string");
        Expression e = Expression::parse(params["expr"].get<std::string>(), num_increments);
        phi.bound = get_num(params, "bound", kUnbounded);
        phi.lipschitz = get_num(params, "lipschitz", kUnbounded);
        phi.phi = [e](Eigen::Ref<const Vector> x) { return e.eval(0.0, x, 0.0, 0.0); };
        return phi;
    }
    throw ConfigError("unknown terminal preset '" + id + "'");
}

PathGeneratorSpec make_path_generator(const std::string& id, const json& params) {
    PathGeneratorSpec h;
    h.deps = {false, false, false, false};

    if (id == "path-free") {
        check_keys(params, id, {"amp_t", "amp_y", "freq"});
        double at = get_num(params, "amp_t", 0.2);
        double ay = get_num(params, "amp_y", 0.2);
        double freq = get_num(params, "freq", 1.0);
        h.m0 = at;
        h.lip_y = ay;
        h.modulus = linear_modulus(at * freq);
        h.deps = {true, false, true, false};
        h.eval = [=](double t, const PiecewisePath&, double y, double) {
            return at * std::sin(freq * t) + ay * std::sin(y);
        };
        h.current_value = [=](double t, double, double y, double) {
            return at * std::sin(freq * t) + ay * std::sin(y);
        };
        return h;
    }
    if (id == "clamped-path") {
        check_keys(params, id, {"lo", "hi", "scale"});
        double lo = get_num(params, "lo", -1.0);
        double hi = get_num(params, "hi", 1.0);
        double scale = get_num(params, "scale", 0.5);
        h.m0 = scale * std::max(std::abs(lo), std::abs(hi));
        h.modulus = clamped_modulus(scale, scale * (hi - lo));
        h.deps = {false, true, false, false};
        h.eval = [=](double t, const PiecewisePath& omega, double, double) {
            return scale * std::clamp(omega(t), lo, hi);
        };
        h.current_value = [=](double, double v, double, double) {
            return scale * std::clamp(v, lo, hi);
        };
        return h;
    }
    throw ConfigError("unknown path generator preset '" + id + "'");
}

std::vector<std::string> generator_preset_ids() {
    return {"zero", "constant", "linear-y", "linear-z", "random-lipschitz", "expr"};
}

std::vector<std::string> terminal_preset_ids() {
    return {"zero",        "affine",           "identity", "quad-convex", "quad-concave",
            "exp-clamped", "clamped-identity", "tanh",     "product",     "expr"};
}

std::vector<std::string> path_generator_preset_ids() { return {"path-free", "clamped-path"}; }

}  // namespace gbsde
