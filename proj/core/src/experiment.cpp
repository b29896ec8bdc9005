#include "kqsd/experiment.hpp"

#include "kqsd/catalog.hpp"
#include "kqsd/diagnostics.hpp"
#include "kqsd/domain.hpp"
#include "kqsd/errors.hpp"
#include "kqsd/expr.hpp"
#include "kqsd/integrate.hpp"
#include "kqsd/io.hpp"
#include "kqsd/lyapunov.hpp"
#include "kqsd/model.hpp"
#include "kqsd/mollify.hpp"
#include "kqsd/parallel.hpp"
#include "kqsd/qsd.hpp"
#include "kqsd/version.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <sstream>

namespace kqsd {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------- validation

void collect_unknown(const json& obj, const std::string& path,
                     std::initializer_list<const char*> allowed,
                     std::vector<std::string>& bad) {
    if (!obj.is_object()) return;
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                known = true;
                break;
            }
        if (!known) bad.push_back(path + item.key());
    }
}

[[noreturn]] void fail_key(const std::string& key, const std::string& why) {
    throw ConfigError(why + ": " + key, {key});
}

const json& require_obj(const json& parent, const char* key, const std::string& path) {
    const auto it = parent.find(key);
    if (it == parent.end()) fail_key(path + key, "missing required key");
    if (!it->is_object()) fail_key(path + key, "expected an object");
    return *it;
}

double num(const json& obj, const char* key, const std::string& path) {
    const auto it = obj.find(key);
    if (it == obj.end()) fail_key(path + key, "missing required key");
    if (!it->is_number()) fail_key(path + key, "expected a number");
    return it->get<double>();
}

double num_or(const json& obj, const char* key, const std::string& path, double def) {
    const auto it = obj.find(key);
    if (it == obj.end()) return def;
    if (!it->is_number()) fail_key(path + key, "expected a number");
    return it->get<double>();
}

std::uint64_t unum(const json& obj, const char* key, const std::string& path) {
    const double v = num(obj, key, path);
    if (v < 0.0 || v != std::floor(v)) fail_key(path + key, "expected a non-negative integer");
    return static_cast<std::uint64_t>(v);
}

std::uint64_t unum_or(const json& obj, const char* key, const std::string& path,
                      std::uint64_t def) {
    if (obj.find(key) == obj.end()) return def;
    return unum(obj, key, path);
}

bool flag_or(const json& obj, const char* key, const std::string& path, bool def) {
    const auto it = obj.find(key);
    if (it == obj.end()) return def;
    if (!it->is_boolean()) fail_key(path + key, "expected a boolean");
    return it->get<bool>();
}

std::string str(const json& obj, const char* key, const std::string& path) {
    const auto it = obj.find(key);
    if (it == obj.end()) fail_key(path + key, "missing required key");
    if (!it->is_string()) fail_key(path + key, "expected a string");
    return it->get<std::string>();
}

std::string str_or(const json& obj, const char* key, const std::string& path,
                   const std::string& def) {
    const auto it = obj.find(key);
    if (it == obj.end()) return def;
    if (!it->is_string()) fail_key(path + key, "expected a string");
    return it->get<std::string>();
}

Vec vec_of(const json& obj, const char* key, const std::string& path, int dim) {
    const auto it = obj.find(key);
    if (it == obj.end()) fail_key(path + key, "missing required key");
    if (!it->is_array()) fail_key(path + key, "expected an array of numbers");
    if (static_cast<int>(it->size()) != dim)
        fail_key(path + key, "expected " + std::to_string(dim) + " entries");
    Vec out(dim);
    for (int i = 0; i < dim; ++i) {
        if (!(*it)[i].is_number()) fail_key(path + key, "expected an array of numbers");
        out[i] = (*it)[i].get<double>();
    }
    return out;
}

std::vector<double> numlist(const json& obj, const char* key, const std::string& path) {
    const auto it = obj.find(key);
    if (it == obj.end()) fail_key(path + key, "missing required key");
    if (!it->is_array() || it->empty())
        fail_key(path + key, "expected a non-empty array of numbers");
    std::vector<double> out;
    for (const auto& v : *it) {
        if (!v.is_number()) fail_key(path + key, "expected an array of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

// ------------------------------------------------------------- config pieces

CoefficientModel model_from_json(const json& root, std::vector<std::string>& bad) {
    const json& m = require_obj(root, "model", "");
    collect_unknown(m, "model.", {"catalog", "params", "custom", "mollify_n", "mollify_order"},
                    bad);
    const bool has_catalog = m.find("catalog") != m.end();
    const bool has_custom = m.find("custom") != m.end();
    if (has_catalog == has_custom)
        fail_key("model", "exactly one of model.catalog / model.custom is required");

    std::unique_ptr<CoefficientModel> built;
    if (has_catalog) {
        const std::string name = str(m, "catalog", "model.");
        std::map<std::string, double> params;
        const auto pit = m.find("params");
        if (pit != m.end()) {
            if (!pit->is_object()) fail_key("model.params", "expected an object");
            for (const auto& item : pit->items()) {
                if (!item.value().is_number())
                    fail_key("model.params." + item.key(), "expected a number");
                params[item.key()] = item.value().get<double>();
            }
        }
        built = std::make_unique<CoefficientModel>(make_catalog_model(name, params));
    } else {
        const json& c = require_obj(m, "custom", "model.");
        collect_unknown(c, "model.custom.", {"dim", "name", "F", "sigma", "bounds"}, bad);
        const int dim = static_cast<int>(num(c, "dim", "model.custom."));
        if (dim < 1 || dim > 16) fail_key("model.custom.dim", "expected dim in [1,16]");
        const std::string name = str_or(c, "name", "model.custom.", "custom");

        const auto fit = c.find("F");
        if (fit == c.end() || !fit->is_array() || static_cast<int>(fit->size()) != dim)
            fail_key("model.custom.F", "expected an array of dim expressions");
        auto exprs = std::make_shared<std::vector<Expression>>();
        for (int i = 0; i < dim; ++i) {
            if (!(*fit)[i].is_string())
                fail_key("model.custom.F", "expected an array of dim expressions");
            exprs->push_back(Expression::parse((*fit)[i].get<std::string>(), dim));
        }
        auto F = std::make_shared<LambdaVectorField>(
            [exprs, dim](const Vec& q, const Vec& p, Vec& out) {
                for (int i = 0; i < dim; ++i) out[i] = (*exprs)[i].eval(q, p);
            });

        auto sig = std::make_shared<Expression>(
            Expression::parse(str(c, "sigma", "model.custom."), dim));
        auto sigma = std::make_shared<IsotropicMatrixField>(
            [sig](const Vec& q, const Vec& p) { return sig->eval(q, p); });

        const json& b = require_obj(c, "bounds", "model.custom.");
        collect_unknown(b, "model.custom.bounds.", {"alpha", "c1", "c2", "c3", "a", "b"},
                        bad);
        CoefficientBounds bounds;
        bounds.alpha = num_or(b, "alpha", "model.custom.bounds.", bounds.alpha);
        bounds.c1 = num_or(b, "c1", "model.custom.bounds.", bounds.c1);
        bounds.c2 = num_or(b, "c2", "model.custom.bounds.", bounds.c2);
        bounds.c3 = num_or(b, "c3", "model.custom.bounds.", bounds.c3);
        bounds.a = num_or(b, "a", "model.custom.bounds.", bounds.a);
        bounds.b = num_or(b, "b", "model.custom.bounds.", bounds.b);
        built = std::make_unique<CoefficientModel>(dim, F, sigma, bounds, name);
    }

    if (m.find("mollify_n") != m.end()) {
        const double n = num(m, "mollify_n", "model.");
        const int order = static_cast<int>(num_or(m, "mollify_order", "model.", 16));
        built = std::make_unique<CoefficientModel>(mollify(*built, n, order));
    }
    return std::move(*built);
}

std::shared_ptr<const CylindricalDomain> domain_from_json(const json& root,
                                                          std::vector<std::string>& bad) {
    const json& d = require_obj(root, "domain", "");
    const std::string type = str(d, "type", "domain.");
    if (type == "interval") {
        collect_unknown(d, "domain.", {"type", "left", "right"}, bad);
        return std::make_shared<CylindricalDomain>(
            CylindricalDomain::interval(num(d, "left", "domain."), num(d, "right", "domain.")));
    }
    if (type == "ball") {
        collect_unknown(d, "domain.", {"type", "center", "radius"}, bad);
        const auto cit = d.find("center");
        if (cit == d.end() || !cit->is_array() || cit->empty())
            fail_key("domain.center", "expected an array of numbers");
        const int dim = static_cast<int>(cit->size());
        return std::make_shared<CylindricalDomain>(CylindricalDomain::ball(
            vec_of(d, "center", "domain.", dim), num(d, "radius", "domain.")));
    }
    if (type == "box") {
        collect_unknown(d, "domain.", {"type", "lo", "hi"}, bad);
        const auto lit = d.find("lo");
        if (lit == d.end() || !lit->is_array() || lit->empty())
            fail_key("domain.lo", "expected an array of numbers");
        const int dim = static_cast<int>(lit->size());
        return std::make_shared<CylindricalDomain>(CylindricalDomain::box(
            vec_of(d, "lo", "domain.", dim), vec_of(d, "hi", "domain.", dim)));
    }
    if (type == "half-space") {
        collect_unknown(d, "domain.", {"type", "normal", "offset"}, bad);
        const auto nit = d.find("normal");
        if (nit == d.end() || !nit->is_array() || nit->empty())
            fail_key("domain.normal", "expected an array of numbers");
        const int dim = static_cast<int>(nit->size());
        return std::make_shared<CylindricalDomain>(CylindricalDomain::half_space(
            vec_of(d, "normal", "domain.", dim), num(d, "offset", "domain.")));
    }
    if (type == "full-space") {
        collect_unknown(d, "domain.", {"type", "dim"}, bad);
        return std::make_shared<CylindricalDomain>(
            CylindricalDomain::full_space(static_cast<int>(num(d, "dim", "domain."))));
    }
    fail_key("domain.type", "unknown domain type '" + type + "'");
}

IntegratorConfig integrator_from_json(const json& root, std::uint64_t seed,
                                      std::vector<std::string>& bad) {
    IntegratorConfig cfg;
    cfg.seed = seed;
    const auto it = root.find("integrator");
    if (it == root.end()) return cfg;
    const json& i = *it;
    if (!i.is_object()) fail_key("integrator", "expected an object");
    collect_unknown(i, "integrator.", {"dt", "scheme", "crossing"}, bad);
    cfg.dt = num_or(i, "dt", "integrator.", cfg.dt);
    if (!(cfg.dt > 0.0)) fail_key("integrator.dt", "dt must be positive");
    const std::string scheme = str_or(i, "scheme", "integrator.", "auto");
    if (scheme == "auto")
        cfg.scheme = Scheme::auto_select;
    else if (scheme == "euler-maruyama")
        cfg.scheme = Scheme::euler_maruyama;
    else if (scheme == "langevin-splitting")
        cfg.scheme = Scheme::langevin_splitting;
    else
        fail_key("integrator.scheme", "unknown scheme '" + scheme + "'");
    const std::string crossing = str_or(i, "crossing", "integrator.", "substep");
    if (crossing == "substep")
        cfg.crossing = CrossingRule::substep_interpolation;
    else if (crossing == "endpoint")
        cfg.crossing = CrossingRule::endpoint_only;
    else
        fail_key("integrator.crossing", "unknown crossing rule '" + crossing + "'");
    return cfg;
}

PhaseBinning window_from_json(const json& parent, const char* key,
                              const std::string& path, int dim,
                              std::vector<std::string>& bad) {
    const json& w = require_obj(parent, key, path);
    const std::string p = path + key + ".";
    collect_unknown(w, p, {"q_lo", "q_hi", "p_lo", "p_hi", "bins_per_axis"}, bad);
    return PhaseBinning::uniform(
        vec_of(w, "q_lo", p, dim), vec_of(w, "q_hi", p, dim), vec_of(w, "p_lo", p, dim),
        vec_of(w, "p_hi", p, dim),
        static_cast<int>(num_or(w, "bins_per_axis", p, 40)));
}

CompactSet box_set_from_json(const json& parent, const char* key,
                             const std::string& path, int dim,
                             std::vector<std::string>& bad) {
    const json& w = require_obj(parent, key, path);
    const std::string p = path + key + ".";
    collect_unknown(w, p, {"q_lo", "q_hi", "p_lo", "p_hi"}, bad);
    return CompactSet::phase_box(vec_of(w, "q_lo", p, dim), vec_of(w, "q_hi", p, dim),
                                 vec_of(w, "p_lo", p, dim), vec_of(w, "p_hi", p, dim));
}

json binning_to_json(const PhaseBinning& b) {
    json j;
    j["q_lo"] = std::vector<double>(b.q_lo.data(), b.q_lo.data() + b.q_lo.size());
    j["q_hi"] = std::vector<double>(b.q_hi.data(), b.q_hi.data() + b.q_hi.size());
    j["p_lo"] = std::vector<double>(b.p_lo.data(), b.p_lo.data() + b.p_lo.size());
    j["p_hi"] = std::vector<double>(b.p_hi.data(), b.p_hi.data() + b.p_hi.size());
    j["bins_per_axis"] = b.bins_per_axis;
    return j;
}

PhaseBinning binning_from_json(const json& j, const std::string& path) {
    const auto qit = j.find("q_lo");
    if (qit == j.end() || !qit->is_array() || qit->empty())
        fail_key(path + "q_lo", "expected an array of numbers");
    const int dim = static_cast<int>(qit->size());
    return PhaseBinning::uniform(vec_of(j, "q_lo", path, dim), vec_of(j, "q_hi", path, dim),
                                 vec_of(j, "p_lo", path, dim), vec_of(j, "p_hi", path, dim),
                                 static_cast<int>(num(j, "bins_per_axis", path)));
}

json estimate_to_json(const QsdEstimate& est) {
    json j;
    j["binning"] = binning_to_json(est.measure.binning);
    j["weights"] = est.measure.weights;
    j["overflow"] = est.measure.overflow;
    j["lambda0_hat"] = est.lambda0_hat;
    j["lambda0_se"] = est.lambda0_se;
    j["burn_in"] = est.burn_in;
    j["n_particles"] = est.n_particles;
    j["horizon"] = est.horizon;
    j["dt"] = est.dt;
    j["kill_count"] = est.kill_count;
    j["kills_post_burnin"] = est.kills_post_burnin;
    return j;
}

QsdEstimate estimate_from_json(const json& j, const std::string& path) {
    QsdEstimate est;
    const auto bit = j.find("binning");
    if (bit == j.end() || !bit->is_object())
        fail_key(path + "binning", "expected an object");
    est.measure.binning = binning_from_json(*bit, path + "binning.");
    const auto wit = j.find("weights");
    if (wit == j.end() || !wit->is_array())
        fail_key(path + "weights", "expected an array");
    est.measure.weights.assign(wit->begin(), wit->end());
    est.measure.overflow = num_or(j, "overflow", path, 0.0);
    est.lambda0_hat = num_or(j, "lambda0_hat", path, 0.0);
    est.lambda0_se = num_or(j, "lambda0_se", path, 0.0);
    est.burn_in = num_or(j, "burn_in", path, 0.0);
    est.n_particles = unum_or(j, "n_particles", path, 0);
    est.horizon = num_or(j, "horizon", path, 0.0);
    est.dt = num_or(j, "dt", path, 0.0);
    return est;
}

StartSampler start_from_json(const json& root, int dim, std::uint64_t seed,
                             std::vector<std::string>& bad, std::string* type_out) {
    const json& s = require_obj(root, "start", "");
    const std::string type = str(s, "type", "start.");
    if (type_out) *type_out = type;
    if (type == "point") {
        collect_unknown(s, "start.", {"type", "q", "p"}, bad);
        KineticState st;
        st.q = vec_of(s, "q", "start.", dim);
        st.p = vec_of(s, "p", "start.", dim);
        st.t = 0.0;
        return point_start(std::move(st));
    }
    if (type == "gaussian") {
        collect_unknown(s, "start.", {"type", "mean_q", "mean_p", "std_q", "std_p"}, bad);
        KineticState mean;
        mean.q = vec_of(s, "mean_q", "start.", dim);
        mean.p = vec_of(s, "mean_p", "start.", dim);
        mean.t = 0.0;
        return gaussian_start(std::move(mean), num(s, "std_q", "start."),
                              num(s, "std_p", "start."), seed);
    }
    if (type == "box") {
        collect_unknown(s, "start.", {"type", "q_lo", "q_hi", "p_lo", "p_hi"}, bad);
        return box_start(vec_of(s, "q_lo", "start.", dim), vec_of(s, "q_hi", "start.", dim),
                         vec_of(s, "p_lo", "start.", dim), vec_of(s, "p_hi", "start.", dim),
                         seed);
    }
    if (type == "qsd") {
        collect_unknown(s, "start.", {"type", "estimate_path"}, bad);
        const std::string path = str(s, "estimate_path", "start.");
        json est_json;
        try {
            est_json = json::parse(read_text_file(path));
        } catch (const json::parse_error& e) {
            throw Error("start.estimate_path: cannot parse " + path + ": " + e.what());
        }
        const QsdEstimate est = estimate_from_json(est_json, "start.estimate.");
        if (est.measure.binning.dim() != dim)
            fail_key("start.estimate_path", "estimate dimension mismatch");
        return start_from_estimate(est, seed);
    }
    fail_key("start.type", "unknown start type '" + type + "'");
}

// ----------------------------------------------------------------- artifacts

struct Ctx {
    std::string output_dir;
    std::uint64_t seed = 0;
    ThreadPool pool{1};
    bool verbose = false;
    std::ostringstream summary;
};

void emit(Ctx& ctx, const std::string& name, const std::string& content) {
    write_text_file(join_path(ctx.output_dir, name), content);
}

std::string histogram_csv(const BinnedMeasure& m) {
    const int d = m.binning.dim();
    std::ostringstream out;
    out << "bin";
    for (int a = 0; a < d; ++a) out << ",q" << a << "_center";
    for (int a = 0; a < d; ++a) out << ",p" << a << "_center";
    out << ",weight\n";
    Vec qc, pc;
    for (std::size_t b = 0; b < m.weights.size(); ++b) {
        m.binning.center(b, qc, pc);
        out << b;
        for (int a = 0; a < d; ++a) out << "," << fmt_double(qc[a]);
        for (int a = 0; a < d; ++a) out << "," << fmt_double(pc[a]);
        out << "," << fmt_double(m.weights[b]) << "\n";
    }
    return out.str();
}

// -------------------------------------------------------------- kind runners

int run_simulate(const json& cfg, const json& params, Ctx& ctx) {
    std::vector<std::string> bad;
    collect_unknown(params, "params.", {"n_samples", "horizon", "time_grid"}, bad);
    CoefficientModel model = model_from_json(cfg, bad);
    auto domain = domain_from_json(cfg, bad);
    IntegratorConfig icfg = integrator_from_json(cfg, ctx.seed, bad);
    StartSampler start = start_from_json(cfg, model.dim(), ctx.seed, bad, nullptr);
    const std::uint64_t n = unum(params, "n_samples", "params.");
    const double horizon = num(params, "horizon", "params.");
    if (!(horizon > 0.0)) fail_key("params.horizon", "horizon must be positive");
    if (!bad.empty()) throw ConfigError("unknown configuration keys", bad);
    if (n == 0) fail_key("params.n_samples", "need at least one sample");
    icfg.max_time = horizon;
    icfg.validate();

    struct Row {
        bool exited = false;
        ExitRecord rec;
    };
    std::vector<Row> rows(n);
    run_samples(model, *domain, icfg, start, n, ctx.pool,
                [&](std::uint64_t idx, TrajectoryOutcome&& o) {
                    if (o.exit) {
                        rows[idx].exited = true;
                        rows[idx].rec = *o.exit;
                    }
                });

    const int d = model.dim();
    std::ostringstream exits;
    exits << "sample,exit_time,classification,crossed_at_substep";
    for (int a = 0; a < d; ++a) exits << ",q" << a;
    for (int a = 0; a < d; ++a) exits << ",p" << a;
    exits << "\n";
    std::uint64_t n_exits = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        if (!rows[i].exited) continue;
        ++n_exits;
        const auto& r = rows[i].rec;
        exits << i << "," << fmt_double(r.exit_time) << ","
              << (r.classification == ExitClass::outgoing ? "outgoing" : "tangential")
              << "," << (r.crossed_at_substep ? 1 : 0);
        for (int a = 0; a < d; ++a) exits << "," << fmt_double(r.exit_state.q[a]);
        for (int a = 0; a < d; ++a) exits << "," << fmt_double(r.exit_state.p[a]);
        exits << "\n";
    }
    emit(ctx, "exits.csv", exits.str());

    if (params.find("time_grid") != params.end()) {
        const auto grid = numlist(params, "time_grid", "params.");
        const SurvivalCurve curve =
            survival_probability(model, *domain, icfg, start, n, grid, ctx.pool);
        std::ostringstream sv;
        sv << "t,p_hat,ci_lo,ci_hi\n";
        for (std::size_t i = 0; i < curve.t.size(); ++i)
            sv << fmt_double(curve.t[i]) << "," << fmt_double(curve.p_hat[i]) << ","
               << fmt_double(curve.ci_lo[i]) << "," << fmt_double(curve.ci_hi[i]) << "\n";
        emit(ctx, "survival.csv", sv.str());
    }

    ctx.summary << "simulate: " << n << " trajectories, " << n_exits << " exits ("
                << fmt_double(static_cast<double>(n_exits) / static_cast<double>(n))
                << " fraction)\n";
    return 0;
}

int run_fleming_viot(const json& cfg, const json& params, Ctx& ctx) {
    std::vector<std::string> bad;
    collect_unknown(params, "params.",
                    {"n_particles", "horizon", "burn_in", "window", "accumulate_every",
                     "record_every", "bootstrap_rounds"},
                    bad);
    CoefficientModel model = model_from_json(cfg, bad);
    auto domain = domain_from_json(cfg, bad);
    FvConfig fv;
    fv.integrator = integrator_from_json(cfg, ctx.seed, bad);
    StartSampler start = start_from_json(cfg, model.dim(), ctx.seed, bad, nullptr);
    const std::uint64_t n_particles = unum(params, "n_particles", "params.");
    fv.horizon = num(params, "horizon", "params.");
    fv.burn_in = num_or(params, "burn_in", "params.", 0.0);
    fv.binning = window_from_json(params, "window", "params.", model.dim(), bad);
    fv.accumulate_every = unum_or(params, "accumulate_every", "params.", 10);
    fv.record_every = unum_or(params, "record_every", "params.", 0);
    fv.bootstrap_rounds = unum_or(params, "bootstrap_rounds", "params.", 200);
    if (!bad.empty()) throw ConfigError("unknown configuration keys", bad);

    const FvResult res =
        fleming_viot_run(start, model, *domain, n_particles, fv, ctx.pool);

    emit(ctx, "qsd_estimate.json", estimate_to_json(res.estimate).dump(2) + "\n");
    emit(ctx, "qsd_histogram.csv", histogram_csv(res.estimate.measure));

    std::ostringstream kills;
    kills << "epoch,t,kills\n";
    for (std::size_t e = 0; e < res.kills_per_epoch.size(); ++e)
        kills << e << "," << fmt_double((e + 1) * res.estimate.dt) << ","
              << res.kills_per_epoch[e] << "\n";
    emit(ctx, "kills.csv", kills.str());

    if (!res.series.empty()) {
        std::ostringstream sr;
        sr << "t,bin,weight\n";
        for (const auto& pt : res.series)
            for (std::size_t b = 0; b < pt.measure.weights.size(); ++b)
                if (pt.measure.weights[b] > 0.0)
                    sr << fmt_double(pt.t) << "," << b << ","
                       << fmt_double(pt.measure.weights[b]) << "\n";
        emit(ctx, "series.csv", sr.str());
    }

    ctx.summary << "fleming-viot: lambda0_hat = " << fmt_double(res.estimate.lambda0_hat)
                << " +- " << fmt_double(res.estimate.lambda0_se) << " ("
                << res.estimate.kills_post_burnin << " kills after burn-in, overflow "
                << fmt_double(res.estimate.measure.overflow) << ")\n";
    return 0;
}

int run_conditioned_mc(const json& cfg, const json& params, Ctx& ctx) {
    std::vector<std::string> bad;
    collect_unknown(params, "params.",
                    {"n_samples", "horizon", "window", "pilot_n", "target_survivors"},
                    bad);
    CoefficientModel model = model_from_json(cfg, bad);
    auto domain = domain_from_json(cfg, bad);
    CmcConfig cc;
    cc.integrator = integrator_from_json(cfg, ctx.seed, bad);
    StartSampler start = start_from_json(cfg, model.dim(), ctx.seed, bad, nullptr);
    const std::uint64_t n = unum(params, "n_samples", "params.");
    const double horizon = num(params, "horizon", "params.");
    cc.binning = window_from_json(params, "window", "params.", model.dim(), bad);
    cc.pilot_n = unum_or(params, "pilot_n", "params.", 2000);
    cc.target_survivors = unum_or(params, "target_survivors", "params.", 0);
    if (!bad.empty()) throw ConfigError("unknown configuration keys", bad);

    const CmcResult res =
        conditioned_mc(start, model, *domain, horizon, n, cc, ctx.pool);

    json j;
    j["survival_fraction"] = res.survival_fraction;
    j["n_samples"] = res.n_samples;
    j["n_survivors"] = res.n_survivors;
    j["overflow"] = res.measure.overflow;
    j["binning"] = binning_to_json(res.measure.binning);
    emit(ctx, "cmc_summary.json", j.dump(2) + "\n");
    emit(ctx, "cmc_histogram.csv", histogram_csv(res.measure));

    ctx.summary << "conditioned-mc: " << res.n_survivors << "/" << res.n_samples
                << " survivors (fraction " << fmt_double(res.survival_fraction)
                << ")\n";
    return 0;
}

int run_lyapunov_verify(const json& cfg, const json& params, Ctx& ctx) {
    std::vector<std::string> bad;
    collect_unknown(params, "params.",
                    {"variant", "lambda", "p_scan_max", "q_grid_per_axis", "p_per_octave",
                     "directions", "tolerance", "margin", "alpha_drift", "beta_drift",
                     "grid_half_width", "grid_per_axis"},
                    bad);
    CoefficientModel model = model_from_json(cfg, bad);
    const std::string variant = str(params, "variant", "params.");
    const double lambda = num_or(params, "lambda", "params.", 1.0);

    json report;
    report["variant"] = variant;
    report["lambda"] = lambda;
    bool passed = false;

    if (variant == "bounded") {
        auto domain = domain_from_json(cfg, bad);
        if (!bad.empty()) throw ConfigError("unknown configuration keys", bad);
        BoundedBuildOptions opts;
        opts.p_scan_max = num_or(params, "p_scan_max", "params.", opts.p_scan_max);
        opts.q_grid_per_axis = static_cast<int>(
            num_or(params, "q_grid_per_axis", "params.", opts.q_grid_per_axis));
        opts.p_per_octave = static_cast<int>(
            num_or(params, "p_per_octave", "params.", opts.p_per_octave));
        opts.directions =
            static_cast<int>(num_or(params, "directions", "params.", opts.directions));
        opts.tolerance = num_or(params, "tolerance", "params.", opts.tolerance);
        opts.margin = num_or(params, "margin", "params.", opts.margin);
        opts.seed = ctx.seed;
        try {
            const BoundedDomainLyapunov lyap =
                bounded_lyapunov_build(domain, model, lambda, opts);
            report["beta"] = lyap.beta;
            report["p_a"] = lyap.p_a;
            report["p0"] = lyap.p0;
            report["c_lambda"] = lyap.c_lambda;
            report["shell"] = json::parse(lyap.shell_report.to_json());
            passed = lyap.shell_report.passed;
        } catch (const LyapunovBuildError& e) {
            report["error"] = e.what();
            report["shell"] = json::parse(e.report.to_json());
            passed = false;
        }
    } else if (variant == "hamiltonian") {
        if (!bad.empty()) throw ConfigError("unknown configuration keys", bad);
        HamiltonianBuildOptions opts;
        opts.grid_half_width =
            num_or(params, "grid_half_width", "params.", opts.grid_half_width);
        opts.grid_per_axis = static_cast<int>(
            num_or(params, "grid_per_axis", "params.", opts.grid_per_axis));
        opts.margin = num_or(params, "margin", "params.", opts.margin);
        const double alpha = num(params, "alpha_drift", "params.");
        const double beta = num_or(params, "beta_drift", "params.", 0.0);
        const HamiltonianSpec spec = hamiltonian_spec_from_model(model, alpha, beta);
        try {
            const HamiltonianLyapunov lyap =
                hamiltonian_lyapunov_build(spec, lambda, opts);
            report["delta"] = lyap.delta;
            report["epsilon"] = lyap.epsilon;
            report["kappa"] = lyap.kappa;
            report["c"] = lyap.c;
            report["n"] = lyap.n;
            report["r_n"] = lyap.r_n;
            report["c_n"] = lyap.c_n;
            report["drift"] = json::parse(lyap.drift_report.to_json());

            std::vector<KineticState> grid;
            const int per = opts.grid_per_axis;
            if (per < 2) fail_key("params.grid_per_axis", "need at least 2");
            const double w = opts.grid_half_width;
            const int d = model.dim();
            std::vector<int> idx(2 * d, 0);
            while (true) {
                KineticState s;
                s.q.resize(d);
                s.p.resize(d);
                for (int a = 0; a < d; ++a)
                    s.q[a] = -w + 2.0 * w * idx[a] / (per - 1);
                for (int a = 0; a < d; ++a)
                    s.p[a] = -w + 2.0 * w * idx[d + a] / (per - 1);
                grid.push_back(std::move(s));
                int a = 0;
                while (a < 2 * d && ++idx[a] == per) idx[a++] = 0;
                if (a == 2 * d) break;
            }
            auto in_b = [&lyap](const Vec& q, const Vec& p) {
                return lyap.in_b_n(q, p);
            };
            const DriftCheckReport verify = verify_drift_inequality(
                lyap.phi, model, lambda, in_b, lyap.c_n, grid, nullptr);
            report["verify"] = json::parse(verify.to_json());
            passed = lyap.drift_report.passed && verify.passed;
        } catch (const LyapunovBuildError& e) {
            report["error"] = e.what();
            report["drift"] = json::parse(e.report.to_json());
            passed = false;
        }
    } else {
        fail_key("params.variant", "unknown variant '" + variant + "'");
    }

    report["passed"] = passed;
    emit(ctx, "lyapunov_report.json", report.dump(2) + "\n");
    ctx.summary << "lyapunov-verify (" << variant << "): "
                << (passed ? "passed" : "FAILED") << "\n";
    return passed ? 0 : 2;
}

int run_harnack_scan(const json& cfg, const json& params, Ctx& ctx) {
    std::vector<std::string> bad;
    collect_unknown(params, "params.",
                    {"a_box", "k_box", "times", "lag", "n_samples", "k_grid_per_axis",
                     "max_factor"},
                    bad);
    CoefficientModel model = model_from_json(cfg, bad);
    auto domain = domain_from_json(cfg, bad);
    HarnackConfig hc;
    hc.integrator = integrator_from_json(cfg, ctx.seed, bad);
    const CompactSet a_set = box_set_from_json(params, "a_box", "params.", model.dim(), bad);
    const CompactSet k_set = box_set_from_json(params, "k_box", "params.", model.dim(), bad);
    const auto times = numlist(params, "times", "params.");
    const double lag = num(params, "lag", "params.");
    const std::uint64_t n = unum(params, "n_samples", "params.");
    hc.k_grid_per_axis =
        static_cast<int>(num_or(params, "k_grid_per_axis", "params.", 5));
    const double max_factor = num_or(params, "max_factor", "params.", 0.0);
    if (!bad.empty()) throw ConfigError("unknown configuration keys", bad);

    const HarnackReport rep =
        harnack_ratio_scan(a_set, k_set, model, *domain, times, lag, n, hc, ctx.pool);
    emit(ctx, "harnack_report.json", rep.to_json() + "\n");

    std::ostringstream csv;
    csv << "t,u_num_max,u_den_min,ratio,ratio_lo,ratio_hi,conclusive\n";
    for (const auto& row : rep.rows)
        csv << fmt_double(row.t) << "," << fmt_double(row.u_num_max) << ","
            << fmt_double(row.u_den_min) << "," << fmt_double(row.ratio) << ","
            << fmt_double(row.ratio_lo) << "," << fmt_double(row.ratio_hi) << ","
            << (row.conclusive ? 1 : 0) << "\n";
    emit(ctx, "harnack_table.csv", csv.str());

    ctx.summary << "harnack-scan: factor spread " << fmt_double(rep.factor_spread)
                << (rep.all_conclusive ? "" : " (inconclusive rows present)") << "\n";
    if (!rep.all_conclusive) return 3;
    if (max_factor > 0.0 && rep.factor_spread > max_factor) return 2;
    return 0;
}

int run_exit_law(const json& cfg, const json& params, Ctx& ctx) {
    std::vector<std::string> bad;
    collect_unknown(params, "params.",
                    {"n_samples", "horizon", "level", "bootstrap_rounds",
                     "negative_control", "min_exits", "plugin_rate"},
                    bad);
    CoefficientModel model = model_from_json(cfg, bad);
    auto domain = domain_from_json(cfg, bad);
    ExitLawConfig ec;
    ec.integrator = integrator_from_json(cfg, ctx.seed, bad);
    StartSampler start = start_from_json(cfg, model.dim(), ctx.seed, bad, nullptr);
    const std::uint64_t n = unum(params, "n_samples", "params.");
    ec.horizon = num_or(params, "horizon", "params.", ec.horizon);
    ec.level = num_or(params, "level", "params.", ec.level);
    ec.bootstrap_rounds = unum_or(params, "bootstrap_rounds", "params.", ec.bootstrap_rounds);
    ec.negative_control = flag_or(params, "negative_control", "params.", false);
    ec.min_exits = unum_or(params, "min_exits", "params.", ec.min_exits);
    ec.lambda0_plugin = num_or(params, "plugin_rate", "params.", ec.lambda0_plugin);
    if (!bad.empty()) throw ConfigError("unknown configuration keys", bad);

    const auto reports = exit_law_battery(start, model, *domain, n, ec, ctx.pool);
    emit(ctx, "exit_law_report.json", reports_to_json(reports) + "\n");

    std::ostringstream csv;
    csv << "test,statistic,p_value,passed,asserted\n";
    for (const auto& r : reports)
        csv << r.test_name << "," << fmt_double(r.statistic) << ","
            << (r.p_value ? fmt_double(*r.p_value) : std::string("")) << ","
            << (r.passed ? 1 : 0) << "," << (r.asserted ? 1 : 0) << "\n";
    emit(ctx, "exit_law_tests.csv", csv.str());

    const bool ok = all_asserted_passed(reports);
    ctx.summary << "exit-law: " << reports.size() << " tests, "
                << (ok ? "all asserted passed" : "FAILURES present") << "\n";
    return ok ? 0 : 2;
}

int run_mollify_report(const json& cfg, const json& params, Ctx& ctx) {
    std::vector<std::string> bad;
    collect_unknown(params, "params.",
                    {"ns", "q_lo", "q_hi", "p_lo", "p_hi", "order",
                     "sigma_grid_per_axis", "l1_rel_tol"},
                    bad);
    CoefficientModel model = model_from_json(cfg, bad);
    const int d = model.dim();
    const auto ns = numlist(params, "ns", "params.");
    const Vec q_lo = vec_of(params, "q_lo", "params.", d);
    const Vec q_hi = vec_of(params, "q_hi", "params.", d);
    const Vec p_lo = vec_of(params, "p_lo", "params.", d);
    const Vec p_hi = vec_of(params, "p_hi", "params.", d);
    MollifierReportOptions opts;
    opts.order = static_cast<int>(num_or(params, "order", "params.", opts.order));
    opts.sigma_grid_per_axis = static_cast<int>(
        num_or(params, "sigma_grid_per_axis", "params.", opts.sigma_grid_per_axis));
    opts.l1_rel_tol = num_or(params, "l1_rel_tol", "params.", opts.l1_rel_tol);
    if (!bad.empty()) throw ConfigError("unknown configuration keys", bad);

    const MollifierConvergenceReport rep =
        mollifier_convergence_report(model, ns, q_lo, q_hi, p_lo, p_hi, opts);

    json j;
    j["sigma_monotone"] = rep.sigma_monotone;
    j["f_monotone"] = rep.f_monotone;
    j["grid_per_axis"] = rep.grid_per_axis;
    json rows = json::array();
    std::ostringstream csv;
    csv << "n,sigma_sup_discrepancy,f_l1_discrepancy\n";
    for (const auto& row : rep.rows) {
        json e;
        e["n"] = row.index_n;
        e["sigma_sup_discrepancy"] = row.sigma_sup_discrepancy;
        e["f_l1_discrepancy"] = row.f_l1_discrepancy;
        rows.push_back(std::move(e));
        csv << fmt_double(row.index_n) << "," << fmt_double(row.sigma_sup_discrepancy)
            << "," << fmt_double(row.f_l1_discrepancy) << "\n";
    }
    j["rows"] = std::move(rows);
    emit(ctx, "mollify_report.json", j.dump(2) + "\n");
    emit(ctx, "mollify_table.csv", csv.str());

    const bool ok = rep.sigma_monotone && rep.f_monotone;
    ctx.summary << "mollify-report: discrepancies "
                << (ok ? "non-increasing" : "NOT monotone") << " over " << ns.size()
                << " kernel indices\n";
    return ok ? 0 : 2;
}

int run_f2_probe(const json& cfg, const json& params, Ctx& ctx) {
    std::vector<std::string> bad;
    collect_unknown(params, "params.",
                    {"psi1", "k_box", "t2", "alpha1", "starts", "n_samples"}, bad);
    CoefficientModel model = model_from_json(cfg, bad);
    auto domain = domain_from_json(cfg, bad);
    F2Config fc;
    fc.integrator = integrator_from_json(cfg, ctx.seed, bad);
    const int d = model.dim();
    const CompactSet k_set = box_set_from_json(params, "k_box", "params.", d, bad);
    const double t2 = num(params, "t2", "params.");
    const double alpha1 = num(params, "alpha1", "params.");
    const std::uint64_t n = unum(params, "n_samples", "params.");

    auto psi_expr = std::make_shared<Expression>(
        Expression::parse(str(params, "psi1", "params."), d));
    TestFunction psi1;
    psi1.name = "psi1";
    psi1.value = [psi_expr](const Vec& q, const Vec& p) { return psi_expr->eval(q, p); };

    const auto sit = params.find("starts");
    if (sit == params.end() || !sit->is_array() || sit->empty())
        fail_key("params.starts", "expected an array of [q..., p...] rows");
    std::vector<KineticState> starts;
    for (const auto& row : *sit) {
        if (!row.is_array() || static_cast<int>(row.size()) != 2 * d)
            fail_key("params.starts", "each row needs 2*dim numbers");
        KineticState s;
        s.q.resize(d);
        s.p.resize(d);
        for (int a = 0; a < d; ++a) s.q[a] = row[a].get<double>();
        for (int a = 0; a < d; ++a) s.p[a] = row[d + a].get<double>();
        s.t = 0.0;
        starts.push_back(std::move(s));
    }
    if (!bad.empty()) throw ConfigError("unknown configuration keys", bad);

    const F2Report rep =
        f2_lyapunov_probe(psi1, k_set, model, *domain, t2, alpha1, starts, n, fc, ctx.pool);
    emit(ctx, "f2_report.json", rep.to_json() + "\n");
    ctx.summary << "f2-probe: " << rep.rows.size() << " starts, "
                << (rep.all_passed ? "bound holds everywhere" : "bound VIOLATED") << "\n";
    return rep.all_passed ? 0 : 2;
}

int run_moment_scan(const json& cfg, const json& params, Ctx& ctx) {
    std::vector<std::string> bad;
    collect_unknown(params, "params.",
                    {"horizon", "n_samples", "mollify_ns", "mollify_order"}, bad);
    CoefficientModel model = model_from_json(cfg, bad);
    MomentConfig mc;
    mc.integrator = integrator_from_json(cfg, ctx.seed, bad);
    std::string start_type;
    start_from_json(cfg, model.dim(), ctx.seed, bad, &start_type);
    if (start_type != "point")
        fail_key("start.type", "moment-scan requires a point start");
    const json& s = require_obj(cfg, "start", "");
    KineticState start;
    start.q = vec_of(s, "q", "start.", model.dim());
    start.p = vec_of(s, "p", "start.", model.dim());
    start.t = 0.0;
    const double horizon = num(params, "horizon", "params.");
    const std::uint64_t n = unum(params, "n_samples", "params.");
    std::vector<double> ns;
    if (params.find("mollify_ns") != params.end())
        ns = numlist(params, "mollify_ns", "params.");
    const int order = static_cast<int>(num_or(params, "mollify_order", "params.", 16));
    if (!bad.empty()) throw ConfigError("unknown configuration keys", bad);

    std::vector<std::shared_ptr<const CoefficientModel>> family;
    if (ns.empty()) {
        family.push_back(std::make_shared<CoefficientModel>(model));
    } else {
        for (double nn : ns)
            family.push_back(std::make_shared<CoefficientModel>(mollify(model, nn, order)));
    }

    const MomentReport rep = moment_bound_scan(family, start, horizon, n, mc, ctx.pool);
    emit(ctx, "moment_report.json", rep.to_json() + "\n");

    std::ostringstream csv;
    csv << "label,e_sup_sq,se,sup_mean_sq,sup_mean_se\n";
    for (const auto& row : rep.rows)
        csv << row.label << "," << fmt_double(row.e_sup_sq) << "," << fmt_double(row.se)
            << "," << fmt_double(row.sup_mean_sq) << "," << fmt_double(row.sup_mean_se)
            << "\n";
    emit(ctx, "moment_table.csv", csv.str());

    ctx.summary << "moment-scan: max " << fmt_double(rep.max_value) << " vs median "
                << fmt_double(rep.median_value) << " -> band "
                << (rep.band_pass ? "ok" : "EXCEEDED") << "\n";
    return rep.band_pass ? 0 : 2;
}

}  // namespace

int run_experiment_text(const std::string& config_text, const RunOptions& opts) {
    json root;
    try {
        root = json::parse(config_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what(), {});
    }
    if (!root.is_object()) throw ConfigError("config must be a JSON object", {});

    // a manifest from an earlier run re-executes its resolved config
    json config;
    if (root.find("resolved_config") != root.end()) {
        std::vector<std::string> bad;
        collect_unknown(root, "", {"engine_version", "resolved_config", "wall_time_s"},
                        bad);
        if (!bad.empty()) throw ConfigError("unknown configuration keys", bad);
        config = root["resolved_config"];
        if (!config.is_object())
            throw ConfigError("resolved_config must be a JSON object", {"resolved_config"});
    } else {
        config = root;
    }

    {
        std::vector<std::string> bad;
        collect_unknown(config, "",
                        {"kind", "seed", "output_dir", "threads", "model", "domain",
                         "integrator", "start", "params"},
                        bad);
        if (!bad.empty()) throw ConfigError("unknown configuration keys", bad);
    }

    const std::string kind = str(config, "kind", "");
    Ctx ctx;
    ctx.seed = opts.seed ? *opts.seed : unum_or(config, "seed", "", 0);
    ctx.output_dir = !opts.output_dir.empty()
                         ? opts.output_dir
                         : str_or(config, "output_dir", "", ".");
    unsigned threads = opts.threads;
    if (threads == 0)
        threads = static_cast<unsigned>(unum_or(config, "threads", "", 1));
    ctx.pool = ThreadPool(threads);
    ctx.verbose = opts.verbose;
    ensure_directory(ctx.output_dir);

    json resolved = config;
    resolved["seed"] = ctx.seed;
    resolved["kind"] = kind;

    const json empty_params = json::object();
    const json& params =
        config.find("params") != config.end() ? config["params"] : empty_params;
    if (!params.is_object()) fail_key("params", "expected an object");

    const auto t0 = std::chrono::steady_clock::now();
    int status;
    if (kind == "simulate")
        status = run_simulate(config, params, ctx);
    else if (kind == "fleming-viot")
        status = run_fleming_viot(config, params, ctx);
    else if (kind == "conditioned-mc")
        status = run_conditioned_mc(config, params, ctx);
    else if (kind == "lyapunov-verify")
        status = run_lyapunov_verify(config, params, ctx);
    else if (kind == "harnack-scan")
        status = run_harnack_scan(config, params, ctx);
    else if (kind == "exit-law")
        status = run_exit_law(config, params, ctx);
    else if (kind == "mollify-report")
        status = run_mollify_report(config, params, ctx);
    else if (kind == "f2-probe")
        status = run_f2_probe(config, params, ctx);
    else if (kind == "moment-scan")
        status = run_moment_scan(config, params, ctx);
    else
        fail_key("kind", "unknown experiment kind '" + kind + "'");
    const auto t1 = std::chrono::steady_clock::now();

    json manifest;
    manifest["engine_version"] = engine_version;
    manifest["resolved_config"] = std::move(resolved);
    manifest["wall_time_s"] = std::chrono::duration<double>(t1 - t0).count();
    write_text_file(join_path(ctx.output_dir, "manifest.json"), manifest.dump(2) + "\n");

    ctx.summary << "status: " << status << "\n";
    write_text_file(join_path(ctx.output_dir, "summary.txt"), ctx.summary.str());
    return status;
}

int run_experiment_file(const std::string& config_path, const RunOptions& opts) {
    return run_experiment_text(read_text_file(config_path), opts);
}

std::string catalog_text() {
    std::ostringstream out;
    for (const auto& entry : catalog()) {
        out << entry.name << ": " << entry.describe << "\n";
        for (const auto& p : entry.params)
            out << "  " << p.name << " (default " << fmt_double(p.default_value) << ") "
                << p.describe << "\n";
    }
    return out.str();
}

}  // namespace kqsd
