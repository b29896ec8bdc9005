#include "kqsd/catalog.hpp"

#include "kqsd/errors.hpp"

#include <cmath>

namespace kqsd {

namespace {

double get(const std::map<std::string, double>& params, const CatalogEntry& entry,
           const std::string& key) {
    if (auto it = params.find(key); it != params.end()) return it->second;
    for (const auto& p : entry.params) {
        if (p.name == key) return p.default_value;
    }
    throw ParameterError("catalog entry " + entry.name + " has no parameter " + key);
}

void reject_unknown(const std::map<std::string, double>& params,
                    const CatalogEntry& entry) {
    std::vector<std::string> bad;
    for (const auto& [key, value] : params) {
        (void)value;
        bool known = false;
        for (const auto& p : entry.params) known = known || p.name == key;
        if (!known) bad.push_back("params." + key);
    }
    if (!bad.empty()) {
        std::string what = "unknown parameters for " + entry.name + ":";
        for (const auto& k : bad) what += " " + k;
        throw ConfigError(what, bad);
    }
}

const CatalogEntry& find_entry(const std::string& name) {
    for (const auto& e : catalog()) {
        if (e.name == name) return e;
    }
    throw ParameterError("unknown catalog model \"" + name + "\"");
}

// F(q,p) = force(q) - gamma p with sigma = sqrt(2 gamma kT) I.
CoefficientModel make_langevin(int dim, const std::string& name, double gamma, double kT,
                               std::shared_ptr<const VectorField> force,
                               std::function<double(const Vec&)> potential,
                               std::shared_ptr<const VectorField> grad_potential,
                               std::shared_ptr<const VectorField> ell,
                               double potential_quadratic_lower, double growth_a,
                               double growth_b) {
    LangevinForm form;
    form.force = force;
    form.gamma = gamma;
    form.kT = kT;
    form.potential = std::move(potential);
    form.grad_potential = std::move(grad_potential);
    form.ell = std::move(ell);
    form.potential_quadratic_lower = potential_quadratic_lower;

    auto F = std::make_shared<const LambdaVectorField>(
        [force, gamma](const Vec& q, const Vec& p, Vec& out) {
            force->eval(q, p, out);
            out -= gamma * p;
        });
    const double s = form.sigma_constant();
    auto sigma = std::make_shared<const IsotropicMatrixField>(s);
    CoefficientBounds bounds;
    bounds.alpha = 0.5;
    bounds.c1 = s * s;
    bounds.c2 = s * s;
    bounds.c3 = 0.0;
    bounds.a = growth_a;
    bounds.b = growth_b;
    return CoefficientModel(dim, F, sigma, bounds, name, form);
}

}  // namespace

const std::vector<CatalogEntry>& catalog() {
    static const std::vector<CatalogEntry> entries = {
        {"harmonic-langevin",
         "U(q) = 0.5 omega^2 |q|^2 with friction gamma and temperature kT",
         {{"omega", 1.0, "angular frequency"},
          {"gamma", 1.0, "friction"},
          {"kT", 0.5, "temperature"},
          {"d", 1.0, "dimension"}}},
        {"double-well-langevin",
         "U(q) = h (q^2 - q0^2)^2 in d = 1",
         {{"h", 1.0, "barrier scale"},
          {"q0", 1.0, "well location"},
          {"gamma", 1.0, "friction"},
          {"kT", 0.5, "temperature"},
          {"growth_window", 3.0, "|q| range on which declared growth bounds hold"}}},
        {"nonconservative-langevin",
         "force -grad U - ell with bounded non-gradient ell(q) = b_ell q / (1 + |q|)",
         {{"omega", 1.0, "harmonic stiffness of U"},
          {"b_ell", 0.5, "non-gradient strength"},
          {"gamma", 1.0, "friction"},
          {"kT", 0.5, "temperature"},
          {"d", 1.0, "dimension"},
          {"alpha_drift", 0.25, "declared drift-condition alpha"},
          {"beta_drift", 0.5, "declared drift-condition beta"}}},
        {"sign-drift",
         "F(q,p) = s sign(p) per coordinate with constant isotropic sigma",
         {{"s", 1.0, "drift magnitude"},
          {"sigma", 1.0, "diffusion scale"},
          {"d", 1.0, "dimension"}}},
        {"free-kinetic",
         "F = 0 with constant isotropic sigma (possibly zero)",
         {{"sigma", 0.0, "diffusion scale"}, {"d", 1.0, "dimension"}}},
    };
    return entries;
}

CoefficientModel make_catalog_model(const std::string& name,
                                    const std::map<std::string, double>& params) {
    const CatalogEntry& entry = find_entry(name);
    reject_unknown(params, entry);

    if (name == "harmonic-langevin") {
        const double omega = get(params, entry, "omega");
        const double gamma = get(params, entry, "gamma");
        const double kT = get(params, entry, "kT");
        const int dim = static_cast<int>(get(params, entry, "d"));
        if (!(omega > 0.0)) throw ParameterError("omega must be > 0");
        const double w2 = omega * omega;
        auto force = std::make_shared<const LambdaVectorField>(
            [w2](const Vec& q, const Vec&, Vec& out) { out = -w2 * q; });
        auto grad = std::make_shared<const LambdaVectorField>(
            [w2](const Vec& q, const Vec&, Vec& out) { out = w2 * q; });
        auto U = [w2](const Vec& q) { return 0.5 * w2 * q.squaredNorm(); };
        return make_langevin(dim, name, gamma, kT, force, U, grad, nullptr, w2, 0.0,
                             std::max(w2, gamma));
    }

    if (name == "double-well-langevin") {
        const double h = get(params, entry, "h");
        const double q0 = get(params, entry, "q0");
        const double gamma = get(params, entry, "gamma");
        const double kT = get(params, entry, "kT");
        const double window = get(params, entry, "growth_window");
        if (!(h > 0.0) || !(q0 > 0.0)) throw ParameterError("h and q0 must be > 0");
        auto force = std::make_shared<const LambdaVectorField>(
            [h, q0](const Vec& q, const Vec&, Vec& out) {
                const double v = q[0];
                out.resize(1);
                out[0] = -4.0 * h * v * (v * v - q0 * q0);
            });
        auto grad = std::make_shared<const LambdaVectorField>(
            [h, q0](const Vec& q, const Vec&, Vec& out) {
                const double v = q[0];
                out.resize(1);
                out[0] = 4.0 * h * v * (v * v - q0 * q0);
            });
        auto U = [h, q0](const Vec& q) {
            const double s = q[0] * q[0] - q0 * q0;
            return h * s * s;
        };
        // |force| <= 4 h W (W^2 + q0^2) on |q| <= W; declared bounds hold there.
        const double a = 4.0 * h * window * (window * window + q0 * q0);
        return make_langevin(1, name, gamma, kT, force, U, grad, nullptr, 0.0, a, gamma);
    }

    if (name == "nonconservative-langevin") {
        const double omega = get(params, entry, "omega");
        const double b_ell = get(params, entry, "b_ell");
        const double gamma = get(params, entry, "gamma");
        const double kT = get(params, entry, "kT");
        const int dim = static_cast<int>(get(params, entry, "d"));
        const double w2 = omega * omega;
        auto ell = std::make_shared<const LambdaVectorField>(
            [b_ell](const Vec& q, const Vec&, Vec& out) {
                out = (b_ell / (1.0 + q.norm())) * q;
            });
        auto force = std::make_shared<const LambdaVectorField>(
            [w2, b_ell](const Vec& q, const Vec&, Vec& out) {
                out = -w2 * q - (b_ell / (1.0 + q.norm())) * q;
            });
        auto grad = std::make_shared<const LambdaVectorField>(
            [w2](const Vec& q, const Vec&, Vec& out) { out = w2 * q; });
        auto U = [w2](const Vec& q) { return 0.5 * w2 * q.squaredNorm(); };
        return make_langevin(dim, name, gamma, kT, force, U, grad, ell, w2, b_ell,
                             std::max(w2, gamma));
    }

    if (name == "sign-drift") {
        const double s = get(params, entry, "s");
        const double sig = get(params, entry, "sigma");
        const int dim = static_cast<int>(get(params, entry, "d"));
        auto F = std::make_shared<const LambdaVectorField>(
            [s](const Vec&, const Vec& p, Vec& out) {
                out.resize(p.size());
                for (int i = 0; i < p.size(); ++i) {
                    out[i] = p[i] > 0.0 ? s : (p[i] < 0.0 ? -s : 0.0);
                }
            });
        auto sigma = std::make_shared<const IsotropicMatrixField>(sig);
        CoefficientBounds bounds;
        bounds.alpha = 0.5;
        bounds.c1 = sig > 0.0 ? sig * sig : 1e-12;
        bounds.c2 = sig > 0.0 ? sig * sig : 1e-12;
        bounds.c3 = 0.0;
        bounds.a = std::abs(s) * std::sqrt(static_cast<double>(dim));
        bounds.b = 0.0;
        return CoefficientModel(dim, F, sigma, bounds, name);
    }

    // free-kinetic
    const double sig = get(params, entry, "sigma");
    const int dim = static_cast<int>(get(params, entry, "d"));
    auto F = std::make_shared<const ZeroVectorField>();
    auto sigma = std::make_shared<const IsotropicMatrixField>(sig);
    CoefficientBounds bounds;
    bounds.alpha = 0.5;
    bounds.c1 = sig > 0.0 ? sig * sig : 1e-12;
    bounds.c2 = sig > 0.0 ? sig * sig : 1e-12;
    bounds.c3 = 0.0;
    bounds.a = 0.0;
    bounds.b = 0.0;
    return CoefficientModel(dim, F, sigma, bounds, name);
}

}  // namespace kqsd
