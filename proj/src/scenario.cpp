#include "hamlens/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>

#include "hamlens/canonical.hpp"
#include "hamlens/errors.hpp"
#include "hamlens/finsler.hpp"
#include "hamlens/flow.hpp"
#include "hamlens/io.hpp"
#include "hamlens/rng.hpp"
#include "hamlens/scattering.hpp"
#include "hamlens/transforms.hpp"
#include "hamlens/traveltime.hpp"

namespace hamlens {
namespace {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config access
// ---------------------------------------------------------------------------

const Json& require_field(const Json& j, const std::string& key, const std::string& where) {
    if (!j.is_object() || !j.contains(key))
        fail(ErrorCode::ConfigParse, where + ": missing field '" + key + "'");
    return j.at(key);
}

double num_field(const Json& j, const std::string& key, const std::string& where) {
    const Json& v = require_field(j, key, where);
    if (!v.is_number())
        fail(ErrorCode::ConfigParse, where + ": field '" + key + "' must be a number");
    return v.get<double>();
}

double num_or(const Json& j, const std::string& key, double dflt) {
    if (!j.is_object() || !j.contains(key)) return dflt;
    if (!j.at(key).is_number())
        fail(ErrorCode::ConfigParse, "field '" + key + "' must be a number");
    return j.at(key).get<double>();
}

int int_field(const Json& j, const std::string& key, const std::string& where) {
    const Json& v = require_field(j, key, where);
    if (!v.is_number_integer())
        fail(ErrorCode::ConfigParse, where + ": field '" + key + "' must be an integer");
    return v.get<int>();
}

int int_or(const Json& j, const std::string& key, int dflt) {
    if (!j.is_object() || !j.contains(key)) return dflt;
    if (!j.at(key).is_number_integer())
        fail(ErrorCode::ConfigParse, "field '" + key + "' must be an integer");
    return j.at(key).get<int>();
}

std::string str_field(const Json& j, const std::string& key, const std::string& where) {
    const Json& v = require_field(j, key, where);
    if (!v.is_string())
        fail(ErrorCode::ConfigParse, where + ": field '" + key + "' must be a string");
    return v.get<std::string>();
}

std::string str_or(const Json& j, const std::string& key, const std::string& dflt) {
    if (!j.is_object() || !j.contains(key)) return dflt;
    return str_field(j, key, "config");
}

Vec vec_field(const Json& j, const std::string& key, const std::string& where) {
    const Json& v = require_field(j, key, where);
    if (!v.is_array() || v.empty())
        fail(ErrorCode::ConfigParse, where + ": field '" + key + "' must be a numeric array");
    Vec out(static_cast<int>(v.size()));
    for (int i = 0; i < out.size(); ++i) {
        if (!v[i].is_number())
            fail(ErrorCode::ConfigParse, where + ": field '" + key + "' must be a numeric array");
        out(i) = v[i].get<double>();
    }
    return out;
}

Mat mat_field(const Json& j, const std::string& key, const std::string& where) {
    const Json& v = require_field(j, key, where);
    if (!v.is_array() || v.empty() || !v[0].is_array())
        fail(ErrorCode::ConfigParse, where + ": field '" + key + "' must be an array of rows");
    const int rows = static_cast<int>(v.size());
    const int cols = static_cast<int>(v[0].size());
    Mat out(rows, cols);
    for (int i = 0; i < rows; ++i) {
        if (!v[i].is_array() || static_cast<int>(v[i].size()) != cols)
            fail(ErrorCode::ConfigParse, where + ": ragged matrix in field '" + key + "'");
        for (int k = 0; k < cols; ++k) out(i, k) = v[i][k].get<double>();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Overrides:  path.to.key=json-value  (bare words fall back to strings)
// ---------------------------------------------------------------------------

bool all_digits(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

void apply_overrides(Json& cfg, const std::vector<std::string>& overrides) {
    for (const std::string& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos || eq == 0)
            fail(ErrorCode::ConfigParse, "override '" + ov + "' must look like path.to.key=value");
        const std::string path = ov.substr(0, eq);
        const std::string raw = ov.substr(eq + 1);
        Json value;
        try {
            value = Json::parse(raw);
        } catch (const std::exception&) {
            value = raw;
        }
        std::vector<std::string> segs;
        std::size_t start = 0;
        while (true) {
            const auto dot = path.find('.', start);
            segs.push_back(path.substr(start, dot == std::string::npos ? dot : dot - start));
            if (dot == std::string::npos) break;
            start = dot + 1;
        }
        Json* cur = &cfg;
        for (std::size_t i = 0; i + 1 < segs.size(); ++i) {
            if (cur->is_array() && all_digits(segs[i]))
                cur = &(*cur)[std::stoul(segs[i])];
            else
                cur = &(*cur)[segs[i]];
        }
        if (cur->is_array() && all_digits(segs.back()))
            (*cur)[std::stoul(segs.back())] = value;
        else
            (*cur)[segs.back()] = value;
    }
}

// ---------------------------------------------------------------------------
// Deterministic worker pool: indexed tasks, results slotted by index.
// ---------------------------------------------------------------------------

void parallel_for(int n, int threads, const std::function<void(int)>& body) {
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto worker = [&]() {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Check table
// ---------------------------------------------------------------------------

struct CheckTable {
    Json thresholds = Json::object();
    Json results = Json::array();
    bool failed = false;

    void record(const std::string& name, double value) {
        Json r;
        r["name"] = name;
        r["value"] = value;
        if (thresholds.contains(name)) {
            const double thr = thresholds.at(name).get<double>();
            const bool pass = value <= thr; // NaN compares false on purpose
            r["threshold"] = thr;
            r["pass"] = pass;
            if (!pass) failed = true;
        }
        results.push_back(std::move(r));
    }
};

struct Ctx {
    Json cfg;
    fs::path out_dir;
    std::uint64_t seed = 0;
    int threads = 1;
    CheckTable checks;
    std::vector<std::string> artifacts;
    Json extra = Json::object();

    io::CsvWriter open_csv(const std::string& name, const std::string& experiment) {
        io::CsvWriter w((out_dir / name).string());
        w.comment("hamlens " + experiment + " seed=" + std::to_string(seed));
        artifacts.push_back(name);
        return w;
    }
};

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

DiffeoMap build_diffeo(const Json& spec, int dim) {
    const std::string type = str_field(spec, "type", "diffeo");
    if (type == "identity") {
        DiffeoMap d;
        d.dim = dim;
        d.name = "identity";
        d.psi = [](const Vec& x) { return x; };
        d.dpsi = [dim](const Vec&) { return Mat(Mat::Identity(dim, dim)); };
        d.psi_inv = [](const Vec& x) { return x; };
        return d;
    }
    if (type == "bump_shift") {
        const Vec center = vec_field(spec, "center", "diffeo");
        const Vec dir = vec_field(spec, "dir", "diffeo");
        const double width = num_field(spec, "width", "diffeo");
        const double amp = num_field(spec, "amp", "diffeo");
        if (center.size() != dim || dir.size() != dim)
            fail(ErrorCode::ConfigParse, "diffeo: center/dir must have the model dimension");
        auto bump = [](double r) { return r < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - r * r)) : 0.0; };
        auto dbump = [bump](double r) {
            if (r <= 0.0 || r >= 1.0) return 0.0;
            const double q = 1.0 - r * r;
            return bump(r) * (-2.0 * r / (q * q));
        };
        DiffeoMap d;
        d.dim = dim;
        d.name = "bump_shift";
        d.psi = [center, dir, width, amp, bump](const Vec& x) {
            return Vec(x + (amp * bump((x - center).norm() / width)) * dir);
        };
        d.dpsi = [center, dir, width, amp, dbump, dim](const Vec& x) {
            Mat D = Mat::Identity(dim, dim);
            const Vec dx = x - center;
            const double r = dx.norm() / width;
            if (r <= 0.0 || r >= 1.0) return D;
            D += (amp * dbump(r) / (dx.norm() * width)) * dir * dx.transpose();
            return D;
        };
        return d;
    }
    if (type == "interior_shear") {
        // Transverse shear on a width-W slab, identity to first order on both
        // walls; derivatives of every order stay O(amp).
        if (dim != 2) fail(ErrorCode::ConfigParse, "diffeo: interior_shear is two-dimensional");
        const int axis = int_field(spec, "axis", "diffeo");
        const double width = num_field(spec, "width", "diffeo");
        const double amp = num_field(spec, "amp", "diffeo");
        if (axis < 0 || axis > 1 || !(width > 0.0) || std::abs(amp) >= 1.0)
            fail(ErrorCode::ConfigParse, "diffeo: interior_shear needs axis in {0,1}, width > 0, |amp| < 1");
        const int t = 1 - axis;
        DiffeoMap d;
        d.dim = dim;
        d.name = "interior_shear";
        d.psi = [axis, t, width, amp](const Vec& x) {
            Vec y = x;
            const double w = std::sin(M_PI * x(axis) / width);
            y(t) += amp * w * w * std::sin(x(t));
            return y;
        };
        d.dpsi = [axis, t, width, amp](const Vec& x) {
            Mat D = Mat::Identity(2, 2);
            const double w = std::sin(M_PI * x(axis) / width);
            D(t, axis) = amp * (M_PI / width) * std::sin(2.0 * M_PI * x(axis) / width) *
                         std::sin(x(t));
            D(t, t) = 1.0 + amp * w * w * std::cos(x(t));
            return D;
        };
        return d;
    }
    fail(ErrorCode::ConfigParse, "unknown diffeo type '" + type + "'");
}

HamiltonianModel build_weighted_minkowski(double amp) {
    auto theta = [](const Vec& x, const Vec& xi) { return x(0) + x(1) * xi(0) / xi(1); };
    auto quad = [](const Vec& xi) { return 0.5 * (-xi(0) * xi(0) + xi(1) * xi(1)); };
    auto eval = [=](const Vec& x, const Vec& xi) {
        return (1.0 + amp * std::sin(theta(x, xi))) * quad(xi);
    };
    auto gx = [=](const Vec& x, const Vec& xi) {
        const double c = amp * std::cos(theta(x, xi)) * quad(xi);
        Vec g(2);
        g << c, c * xi(0) / xi(1);
        return g;
    };
    auto gxi = [=](const Vec& x, const Vec& xi) {
        const double c = amp * std::cos(theta(x, xi)) * quad(xi);
        const double mu = 1.0 + amp * std::sin(theta(x, xi));
        Vec g(2);
        g << c * x(1) / xi(1) - mu * xi(0), -c * x(1) * xi(0) / (xi(1) * xi(1)) + mu * xi(1);
        return g;
    };
    return HamiltonianModel(2, HamiltonianModel::Kind::lorentzian, "minkowski_weighted", eval, gx,
                            gxi);
}

} // namespace

HamiltonianModel build_model(const Json& spec) {
    const std::string type = str_field(spec, "type", "model");
    if (type == "euclidean") {
        const int dim = int_field(spec, "dim", "model");
        return make_constant_metric(Mat(Mat::Identity(dim, dim)), "euclidean");
    }
    if (type == "minkowski") {
        const int dim = int_or(spec, "dim", 2);
        Mat g = Mat::Identity(dim, dim);
        g(0, 0) = -1.0;
        return make_constant_metric(g, "minkowski");
    }
    if (type == "constant") {
        return make_constant_metric(mat_field(spec, "matrix", "model"), "constant");
    }
    if (type == "conformal_constant") {
        const int dim = int_field(spec, "dim", "model");
        const double c = num_field(spec, "c", "model");
        return make_conformal(
            dim, [c](const Vec&) { return c; }, [dim](const Vec&) { return Vec(Vec::Zero(dim)); },
            "conformal_constant");
    }
    if (type == "conformal_linear") {
        const Vec slope = vec_field(spec, "slope", "model");
        const double base = num_field(spec, "base", "model");
        const int dim = static_cast<int>(slope.size());
        return make_conformal(
            dim, [base, slope](const Vec& x) { return base + slope.dot(x); },
            [slope](const Vec&) { return slope; }, "conformal_linear");
    }
    if (type == "conformal_gaussian_well") {
        const int dim = int_field(spec, "dim", "model");
        const double depth = num_field(spec, "depth", "model");
        const double width = num_field(spec, "width", "model");
        const double w2 = width * width;
        return make_conformal(
            dim, [depth, w2](const Vec& x) { return 1.0 - depth * std::exp(-x.squaredNorm() / w2); },
            [depth, w2](const Vec& x) {
                return Vec((2.0 * depth / w2) * std::exp(-x.squaredNorm() / w2) * x);
            },
            "conformal_gaussian_well");
    }
    if (type == "minkowski_weighted") {
        return build_weighted_minkowski(num_field(spec, "amp", "model"));
    }
    if (type == "gauged") {
        HamiltonianModel base = build_model(require_field(spec, "base", "model"));
        DiffeoMap psi = build_diffeo(require_field(spec, "diffeo", "model"), base.dim());
        return transported_model(base, cotangent_lift(psi), "gauged_" + base.name());
    }
    if (type == "randers_dual") {
        const Vec b = vec_field(spec, "b", "model");
        const int dim = static_cast<int>(b.size());
        Mat a = spec.contains("matrix") ? mat_field(spec, "matrix", "model")
                                        : Mat(Mat::Identity(dim, dim));
        return to_hamiltonian(make_randers(a, b), "randers_dual");
    }
    fail(ErrorCode::ConfigParse, "unknown model type '" + type + "'");
}

Domain build_domain(const Json& spec) {
    const std::string type = str_field(spec, "type", "domain");
    if (type == "half_space")
        return make_half_space(int_field(spec, "dim", "domain"), int_field(spec, "axis", "domain"));
    if (type == "slab")
        return make_slab(int_field(spec, "dim", "domain"), int_field(spec, "axis", "domain"),
                         num_field(spec, "width", "domain"));
    if (type == "disk") return make_disk();
    if (type == "ball") return make_ball(int_field(spec, "dim", "domain"));
    fail(ErrorCode::ConfigParse, "unknown domain type '" + type + "'");
}

namespace {

PhaseFunction build_integrand(const Json& spec, const HamiltonianModel& model) {
    const std::string type = str_field(spec, "type", "integrand");
    if (type == "one") return [](const PhasePoint&) { return 1.0; };
    if (type == "one_minus_r2")
        return [](const PhasePoint& p) { return 1.0 - p.x.squaredNorm(); };
    if (type == "energy") {
        auto m = std::make_shared<HamiltonianModel>(model);
        return [m](const PhasePoint& p) { return m->value(p); };
    }
    if (type == "xh_gauge") {
        const std::string phi_name = str_field(spec, "phi", "integrand");
        const int comp = int_or(spec, "component", 1) - 1;
        if (comp < 0 || comp >= model.dim())
            fail(ErrorCode::ConfigParse, "integrand: component out of range");
        PhaseFunction phi;
        if (phi_name == "disk_poly") {
            phi = [comp](const PhasePoint& p) { return (1.0 - p.x.squaredNorm()) * p.xi(comp); };
        } else if (phi_name == "slab_poly") {
            const int axis = int_field(spec, "axis", "integrand");
            const double width = num_field(spec, "width", "integrand");
            phi = [comp, axis, width](const PhasePoint& p) {
                return p.x(axis) * (width - p.x(axis)) / width * p.xi(comp);
            };
        } else {
            fail(ErrorCode::ConfigParse, "unknown gauge potential '" + phi_name + "'");
        }
        return xh_of(model, phi);
    }
    fail(ErrorCode::ConfigParse, "unknown integrand type '" + type + "'");
}

// ---------------------------------------------------------------------------
// Fans over boundary data
// ---------------------------------------------------------------------------

std::vector<double> grid_values(const Json& spec, const std::string& where) {
    const double lo = num_field(spec, "min", where);
    const double hi = num_field(spec, "max", where);
    const int count = int_field(spec, "count", where);
    if (count < 1) fail(ErrorCode::ConfigParse, where + ": count must be positive");
    std::vector<double> vals(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        vals[static_cast<std::size_t>(i)] =
            count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (count - 1);
    return vals;
}

struct FanPoint {
    Vec u, xi_prime;
};

std::vector<FanPoint> build_fan(const Json& blk, int m, const std::string& where) {
    std::vector<Vec> us, xps;
    if (blk.contains("u")) {
        Vec u = vec_field(blk, "u", where);
        if (u.size() != m) fail(ErrorCode::ConfigParse, where + ": u must have boundary dimension");
        us.push_back(u);
    } else if (blk.contains("u_range")) {
        if (m != 1) fail(ErrorCode::ConfigParse, where + ": u_range needs a 1d boundary");
        for (double v : grid_values(blk.at("u_range"), where + ".u_range")) {
            Vec u(1);
            u << v;
            us.push_back(u);
        }
    } else {
        fail(ErrorCode::ConfigParse, where + ": need u or u_range");
    }
    if (blk.contains("xi_prime")) {
        Vec xp = vec_field(blk, "xi_prime", where);
        if (xp.size() != m)
            fail(ErrorCode::ConfigParse, where + ": xi_prime must have boundary dimension");
        xps.push_back(xp);
    } else if (blk.contains("xi_prime_range")) {
        if (m != 1) fail(ErrorCode::ConfigParse, where + ": xi_prime_range needs a 1d boundary");
        for (double v : grid_values(blk.at("xi_prime_range"), where + ".xi_prime_range")) {
            Vec xp(1);
            xp << v;
            xps.push_back(xp);
        }
    } else {
        fail(ErrorCode::ConfigParse, where + ": need xi_prime or xi_prime_range");
    }
    std::vector<FanPoint> fan;
    fan.reserve(us.size() * xps.size());
    for (const Vec& u : us)
        for (const Vec& xp : xps) fan.push_back({u, xp});
    return fan;
}

bool recoverable_ray_error(ErrorCode c) {
    return c == ErrorCode::NoTransversalSolution || c == ErrorCode::NoRoot ||
           c == ErrorCode::TangentialHit || c == ErrorCode::AmbiguousBranch;
}

// ---------------------------------------------------------------------------
// Scatter CSV helpers
// ---------------------------------------------------------------------------

std::vector<std::string> scatter_header(int m) {
    std::vector<std::string> h;
    h.push_back("entry_chart");
    for (int i = 0; i < m; ++i) h.push_back("entry_u" + std::to_string(i + 1));
    for (int i = 0; i < m; ++i) h.push_back("entry_xi_prime" + std::to_string(i + 1));
    h.push_back("exit_chart");
    for (int i = 0; i < m; ++i) h.push_back("exit_u" + std::to_string(i + 1));
    for (int i = 0; i < m; ++i) h.push_back("exit_xi_prime" + std::to_string(i + 1));
    h.push_back("ell");
    h.push_back("energy");
    h.push_back("flag_transversal");
    return h;
}

std::vector<std::string> scatter_row(const BoundaryCovector& bc,
                                     const std::optional<ScatterRecord>& rec, int m) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> f;
    f.push_back(std::to_string(bc.chart));
    for (int i = 0; i < m; ++i) f.push_back(io::fmt(bc.u(i)));
    for (int i = 0; i < m; ++i) f.push_back(io::fmt(bc.xi_prime(i)));
    const bool ok = rec && rec->status == ScatterStatus::ok && rec->exit_bc;
    if (ok) {
        f.push_back(std::to_string(rec->exit_bc->chart));
        for (int i = 0; i < m; ++i) f.push_back(io::fmt(rec->exit_bc->u(i)));
        for (int i = 0; i < m; ++i) f.push_back(io::fmt(rec->exit_bc->xi_prime(i)));
        f.push_back(io::fmt(rec->ell));
        f.push_back(io::fmt(rec->energy));
        f.push_back("1");
    } else {
        f.push_back("-1");
        for (int i = 0; i < 2 * m; ++i) f.push_back(io::fmt(nan));
        f.push_back(io::fmt(rec ? rec->ell : nan));
        f.push_back(io::fmt(rec ? rec->energy : nan));
        f.push_back("0");
    }
    return f;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

void run_flow(Ctx& ctx) {
    const Json& blk = require_field(ctx.cfg, "flow", "config");
    HamiltonianModel model = build_model(require_field(ctx.cfg, "model", "config"));
    const double t1 = num_or(blk, "t1", 1.0);
    const Json& pts = require_field(blk, "points", "flow");
    if (!pts.is_array() || pts.empty()) fail(ErrorCode::ConfigParse, "flow: points must be an array");

    double drift = 0.0;
    std::vector<PhasePoint> phase_points;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        PhasePoint p{vec_field(pts[i], "x", "flow.points"), vec_field(pts[i], "xi", "flow.points")};
        phase_points.push_back(p);
        Trajectory traj = integrate(model, p, 0.0, t1);
        std::vector<std::string> header{"t"};
        for (int k = 0; k < model.dim(); ++k) header.push_back("x" + std::to_string(k + 1));
        for (int k = 0; k < model.dim(); ++k) header.push_back("xi" + std::to_string(k + 1));
        header.push_back("H");
        io::CsvWriter w = ctx.open_csv("flow_trajectory_" + std::to_string(i) + ".csv", "flow");
        w.header(header);
        for (int j = 0; j <= traj.n_steps(); ++j) {
            const PhasePoint q = traj.phase_node(j);
            std::vector<std::string> row{io::fmt(traj.times()[static_cast<std::size_t>(j)])};
            for (int k = 0; k < model.dim(); ++k) row.push_back(io::fmt(q.x(k)));
            for (int k = 0; k < model.dim(); ++k) row.push_back(io::fmt(q.xi(k)));
            row.push_back(io::fmt(model.value(q)));
            w.row(row);
            drift = std::max(drift, std::abs(model.value(q) - traj.energy0));
        }
    }
    ctx.checks.record("energy_drift", drift);

    if (blk.contains("rescale_lambdas")) {
        double worst = 0.0;
        for (const Json& lj : blk.at("rescale_lambdas")) {
            const double lambda = lj.get<double>();
            for (const PhasePoint& p : phase_points)
                worst = std::max(worst, rescale_check(model, p, lambda, std::min(t1, 1.0)));
        }
        ctx.checks.record("rescale", worst);
    }
}

void run_scatter_fan(Ctx& ctx) {
    const Json& blk = require_field(ctx.cfg, "scatter", "config");
    HamiltonianModel model = build_model(require_field(ctx.cfg, "model", "config"));
    Domain domain = build_domain(require_field(ctx.cfg, "domain", "config"));
    const int m = model.dim() - 1;
    const int chart = int_or(blk, "chart", 0);
    const double energy = num_or(blk, "energy", 0.5);
    const Branch branch =
        str_or(blk, "branch", "incoming") == "outgoing" ? Branch::outgoing : Branch::incoming;
    const std::vector<FanPoint> fan = build_fan(blk, m, "scatter");

    std::vector<std::optional<ScatterRecord>> records(fan.size());
    parallel_for(static_cast<int>(fan.size()), ctx.threads, [&](int i) {
        const auto& fp = fan[static_cast<std::size_t>(i)];
        try {
            records[static_cast<std::size_t>(i)] =
                scatter(model, domain, {chart, fp.u, fp.xi_prime}, energy, branch);
        } catch (const Error& e) {
            if (!recoverable_ray_error(e.code())) throw;
        }
    });

    io::CsvWriter w = ctx.open_csv("scatter.csv", "scatter_fan");
    w.header(scatter_header(m));
    int n_ok = 0;
    double energy_res = 0.0;
    for (std::size_t i = 0; i < fan.size(); ++i) {
        const BoundaryCovector bc{chart, fan[i].u, fan[i].xi_prime};
        w.row(scatter_row(bc, records[i], m));
        const auto& rec = records[i];
        if (rec && rec->status == ScatterStatus::ok) {
            ++n_ok;
            energy_res = std::max(energy_res, std::abs(model.value(rec->exit) - rec->energy));
        }
    }
    ctx.extra["rays_total"] = fan.size();
    ctx.extra["rays_ok"] = n_ok;
    ctx.checks.record("energy_consistency",
                      n_ok > 0 ? energy_res : std::numeric_limits<double>::quiet_NaN());

    if (blk.contains("expect_ell")) {
        const Json& ex = blk.at("expect_ell");
        const int idx = int_field(ex, "index", "scatter.expect_ell");
        const double want = num_field(ex, "value", "scatter.expect_ell");
        double got = std::numeric_limits<double>::quiet_NaN();
        if (idx >= 0 && idx < static_cast<int>(records.size()) &&
            records[static_cast<std::size_t>(idx)])
            got = std::abs(records[static_cast<std::size_t>(idx)]->ell - want);
        ctx.checks.record("ell_expected", got);
    }

    if (ctx.checks.thresholds.contains("inversion")) {
        double worst = n_ok > 0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
        int done = 0;
        const int want = std::min(8, n_ok);
        for (std::size_t i = 0; i < records.size() && done < want; ++i) {
            const auto& rec = records[i];
            if (!rec || rec->status != ScatterStatus::ok || !rec->exit_bc) continue;
            ScatterRecord back =
                scatter(model, domain, *rec->exit_bc, rec->energy, Branch::outgoing);
            double res = std::abs(back.ell + rec->ell);
            if (back.status == ScatterStatus::ok)
                res = std::max(res, phase_dist(back.exit, rec->entry));
            else
                res = std::numeric_limits<double>::quiet_NaN();
            worst = std::max(worst, res);
            ++done;
        }
        ctx.checks.record("inversion", worst);
    }
}

void run_traveltime_table(Ctx& ctx) {
    const Json& blk = require_field(ctx.cfg, "traveltime", "config");
    const Json& model_spec = require_field(ctx.cfg, "model", "config");
    HamiltonianModel model = build_model(model_spec);
    const int n = model.dim();

    struct Pair {
        Vec x, y;
        std::optional<Vec> seed;
    };
    std::vector<Pair> pairs;
    if (blk.contains("pairs")) {
        for (const Json& pj : blk.at("pairs")) {
            Pair p{vec_field(pj, "x", "traveltime.pairs"), vec_field(pj, "y", "traveltime.pairs"),
                   std::nullopt};
            if (pj.contains("seed")) p.seed = vec_field(pj, "seed", "traveltime.pairs");
            pairs.push_back(std::move(p));
        }
    } else {
        const int count = int_field(blk, "n_random", "traveltime");
        const double lo = num_or(blk, "box_min", -1.0);
        const double hi = num_or(blk, "box_max", 1.0);
        const double min_dist = num_or(blk, "min_dist", 0.3);
        Rng rng(ctx.seed);
        while (static_cast<int>(pairs.size()) < count) {
            Vec x = rng.uniform_vec(n, lo, hi);
            Vec y = rng.uniform_vec(n, lo, hi);
            if ((y - x).norm() < min_dist) continue;
            pairs.push_back({x, y, std::nullopt});
        }
    }

    // Closed forms for the flat builtins give both a default seed and an oracle.
    const std::string type = str_field(model_spec, "type", "model");
    std::function<double(const Vec&, const Vec&)> closed_form;
    std::function<Vec(const Vec&, const Vec&)> analytic_seed;
    if (type == "euclidean") {
        closed_form = [](const Vec& x, const Vec& y) { return (y - x).norm(); };
        analytic_seed = [](const Vec& x, const Vec& y) { return Vec(y - x); };
    } else if (type == "conformal_constant") {
        const double c = num_field(model_spec, "c", "model");
        closed_form = [c](const Vec& x, const Vec& y) { return (y - x).norm() / c; };
        analytic_seed = [c](const Vec& x, const Vec& y) { return Vec((y - x) / (c * c)); };
    }

    std::vector<TravelTime> results(pairs.size());
    parallel_for(static_cast<int>(pairs.size()), ctx.threads, [&](int i) {
        const Pair& pr = pairs[static_cast<std::size_t>(i)];
        std::optional<Vec> seed = pr.seed;
        if (!seed && analytic_seed) seed = analytic_seed(pr.x, pr.y);
        results[static_cast<std::size_t>(i)] = travel_time(model, pr.x, pr.y, seed);
    });

    std::vector<std::string> header;
    for (int k = 0; k < n; ++k) header.push_back("x" + std::to_string(k + 1));
    for (int k = 0; k < n; ++k) header.push_back("y" + std::to_string(k + 1));
    header.push_back("T");
    header.push_back("iters");
    header.push_back("det");
    io::CsvWriter w = ctx.open_csv("ttable.csv", "traveltime_table");
    w.header(header);
    double cf_res = 0.0, shoot_err = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const TravelTime& tt = results[i];
        std::vector<std::string> row;
        for (int k = 0; k < n; ++k) row.push_back(io::fmt(pairs[i].x(k)));
        for (int k = 0; k < n; ++k) row.push_back(io::fmt(pairs[i].y(k)));
        row.push_back(io::fmt(tt.T));
        row.push_back(std::to_string(tt.shot.iters));
        row.push_back(io::fmt(tt.shot.det));
        w.row(row);
        shoot_err = std::max(shoot_err, tt.shot.err);
        if (closed_form)
            cf_res = std::max(cf_res, std::abs(tt.T - closed_form(pairs[i].x, pairs[i].y)));
    }
    ctx.checks.record("max_shoot_err", shoot_err);
    if (closed_form) ctx.checks.record("closed_form", cf_res);
}

void run_xray_sinogram(Ctx& ctx) {
    const Json& blk = require_field(ctx.cfg, "xray", "config");
    HamiltonianModel model = build_model(require_field(ctx.cfg, "model", "config"));
    Domain domain = build_domain(require_field(ctx.cfg, "domain", "config"));
    PhaseFunction f = build_integrand(require_field(blk, "integrand", "xray"), model);
    const int m = model.dim() - 1;
    const int chart = int_or(blk, "chart", 0);
    const std::vector<FanPoint> fan = build_fan(blk, m, "xray");

    std::vector<std::optional<RayIntegral>> rays(fan.size());
    parallel_for(static_cast<int>(fan.size()), ctx.threads, [&](int i) {
        const auto& fp = fan[static_cast<std::size_t>(i)];
        try {
            rays[static_cast<std::size_t>(i)] =
                xray(model, domain, f, {chart, fp.u, fp.xi_prime});
        } catch (const Error& e) {
            if (!recoverable_ray_error(e.code())) throw;
        }
    });

    std::vector<std::string> header{"ray"};
    for (int i = 0; i < m; ++i) header.push_back("u" + std::to_string(i + 1));
    for (int i = 0; i < m; ++i) header.push_back("xi_prime" + std::to_string(i + 1));
    header.push_back("value");
    io::CsvWriter w = ctx.open_csv("sinogram.csv", "xray_sinogram");
    w.header(header);
    int n_ok = 0;
    double kernel_rel = 0.0;
    for (std::size_t i = 0; i < fan.size(); ++i) {
        std::vector<std::string> row{std::to_string(i)};
        for (int k = 0; k < m; ++k) row.push_back(io::fmt(fan[i].u(k)));
        for (int k = 0; k < m; ++k) row.push_back(io::fmt(fan[i].xi_prime(k)));
        const auto& ri = rays[i];
        const bool ok = ri && ri->ray.status == ScatterStatus::ok;
        row.push_back(io::fmt(ok ? ri->value : std::numeric_limits<double>::quiet_NaN()));
        w.row(row);
        if (ok) {
            ++n_ok;
            kernel_rel = std::max(kernel_rel, std::abs(ri->value) / std::max(ri->length, 1e-6));
        }
    }
    ctx.extra["rays_total"] = fan.size();
    ctx.extra["rays_ok"] = n_ok;
    if (ctx.checks.thresholds.contains("kernel_rel"))
        ctx.checks.record("kernel_rel",
                          n_ok > 0 ? kernel_rel : std::numeric_limits<double>::quiet_NaN());
    if (blk.contains("expect_value")) {
        const Json& ex = blk.at("expect_value");
        const int idx = int_field(ex, "index", "xray.expect_value");
        const double want = num_field(ex, "value", "xray.expect_value");
        double got = std::numeric_limits<double>::quiet_NaN();
        if (idx >= 0 && idx < static_cast<int>(rays.size()) && rays[static_cast<std::size_t>(idx)])
            got = std::abs(rays[static_cast<std::size_t>(idx)]->value - want);
        ctx.checks.record("value_expected", got);
    }
}

void run_lightray_fan(Ctx& ctx) {
    const Json& blk = require_field(ctx.cfg, "lightray", "config");
    HamiltonianModel model = build_model(require_field(ctx.cfg, "model", "config"));
    Domain domain = build_domain(require_field(ctx.cfg, "domain", "config"));
    const int m = model.dim() - 1;
    const int chart = int_or(blk, "chart", 0);
    const std::vector<FanPoint> fan = build_fan(blk, m, "lightray");

    std::vector<std::optional<ScatterRecord>> records(fan.size());
    parallel_for(static_cast<int>(fan.size()), ctx.threads, [&](int i) {
        const auto& fp = fan[static_cast<std::size_t>(i)];
        try {
            records[static_cast<std::size_t>(i)] =
                scatter_zero(model, domain, {chart, fp.u, fp.xi_prime}, Branch::incoming);
        } catch (const Error& e) {
            if (!recoverable_ray_error(e.code())) throw;
        }
    });

    io::CsvWriter w = ctx.open_csv("s0_table.csv", "lightray_fan");
    w.header(scatter_header(m));
    int n_ok = 0;
    double exit_energy = 0.0;
    for (std::size_t i = 0; i < fan.size(); ++i) {
        const BoundaryCovector bc{chart, fan[i].u, fan[i].xi_prime};
        w.row(scatter_row(bc, records[i], m));
        if (records[i] && records[i]->status == ScatterStatus::ok) {
            ++n_ok;
            exit_energy = std::max(exit_energy, std::abs(model.value(records[i]->exit)));
        }
    }
    ctx.extra["rays_total"] = fan.size();
    ctx.extra["rays_ok"] = n_ok;
    ctx.checks.record("max_exit_energy",
                      n_ok > 0 ? exit_energy : std::numeric_limits<double>::quiet_NaN());

    if (blk.contains("integrand")) {
        PhaseFunction f = build_integrand(blk.at("integrand"), model);
        std::vector<std::string> header{"ray"};
        for (int i = 0; i < m; ++i) header.push_back("u" + std::to_string(i + 1));
        for (int i = 0; i < m; ++i) header.push_back("xi_prime" + std::to_string(i + 1));
        header.push_back("value");
        io::CsvWriter lw = ctx.open_csv("lightray.csv", "lightray_fan");
        lw.header(header);
        double kernel_rel = 0.0;
        for (std::size_t i = 0; i < fan.size(); ++i) {
            std::vector<std::string> row{std::to_string(i)};
            for (int k = 0; k < m; ++k) row.push_back(io::fmt(fan[i].u(k)));
            for (int k = 0; k < m; ++k) row.push_back(io::fmt(fan[i].xi_prime(k)));
            double value = std::numeric_limits<double>::quiet_NaN();
            if (records[i] && records[i]->status == ScatterStatus::ok) {
                value = ray_integral(f, *records[i]);
                kernel_rel =
                    std::max(kernel_rel, std::abs(value) / std::max(records[i]->ell, 1e-6));
            }
            row.push_back(io::fmt(value));
            lw.row(row);
        }
        if (ctx.checks.thresholds.contains("kernel_rel"))
            ctx.checks.record("kernel_rel",
                              n_ok > 0 ? kernel_rel : std::numeric_limits<double>::quiet_NaN());
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (ctx.checks.thresholds.contains("homogeneity")) {
        const double lambda = num_or(blk, "homog_lambda", 2.0);
        double worst = n_ok > 0 ? 0.0 : nan;
        int done = 0;
        for (std::size_t i = 0; i < fan.size() && done < 8; ++i) {
            const auto& rec = records[i];
            if (!rec || rec->status != ScatterStatus::ok) continue;
            ScatterRecord scaled = scatter_zero(
                model, domain, {chart, fan[i].u, Vec(lambda * fan[i].xi_prime)}, Branch::incoming);
            if (scaled.status != ScatterStatus::ok) {
                worst = nan;
                break;
            }
            double res = phase_dist(scaled.exit, dilate(rec->exit, lambda));
            res = std::max(res, std::abs(lambda * scaled.ell - rec->ell));
            worst = std::max(worst, res);
            ++done;
        }
        ctx.checks.record("homogeneity", worst);
    }

    if (ctx.checks.thresholds.contains("inversion")) {
        double worst = n_ok > 0 ? 0.0 : nan;
        int done = 0;
        for (std::size_t i = 0; i < fan.size() && done < 8; ++i) {
            const auto& rec = records[i];
            if (!rec || rec->status != ScatterStatus::ok || !rec->exit_bc) continue;
            ScatterRecord back = scatter_zero(model, domain, *rec->exit_bc, Branch::outgoing);
            double res = std::abs(back.ell + rec->ell);
            if (back.status == ScatterStatus::ok)
                res = std::max(res, phase_dist(back.exit, rec->entry));
            else
                res = nan;
            worst = std::max(worst, res);
            ++done;
        }
        ctx.checks.record("inversion", worst);
    }
}

void run_kappa_validate(Ctx& ctx) {
    const Json& blk = require_field(ctx.cfg, "kappa", "config");
    HamiltonianModel model = build_model(require_field(ctx.cfg, "model", "config"));
    HamiltonianModel model_t = build_model(require_field(ctx.cfg, "model_target", "config"));
    Domain domain = build_domain(require_field(ctx.cfg, "domain", "config"));
    Domain domain_t = ctx.cfg.contains("domain_target")
                          ? build_domain(ctx.cfg.at("domain_target"))
                          : build_domain(require_field(ctx.cfg, "domain", "config"));
    CanonicalMap kappa = kappa_from_pair(model, domain, model_t, domain_t);

    const int m = model.dim() - 1;
    const int chart = int_or(blk, "chart", 0);
    const int n_rays = int_or(blk, "n_rays", 6);
    const double energy = num_or(blk, "energy", 0.5);
    const double flow_s = num_or(blk, "flow_s", 0.15);
    const Vec u_lo = vec_field(blk, "u_min", "kappa"), u_hi = vec_field(blk, "u_max", "kappa");
    const Vec xp_lo = vec_field(blk, "xi_prime_min", "kappa"),
              xp_hi = vec_field(blk, "xi_prime_max", "kappa");
    if (u_lo.size() != m || u_hi.size() != m || xp_lo.size() != m || xp_hi.size() != m)
        fail(ErrorCode::ConfigParse, "kappa: sampling boxes must have boundary dimension");

    Rng rng(ctx.seed);
    struct Probe {
        BoundaryCovector bc;
        double frac = 0.5;
    };
    std::vector<Probe> probes;
    for (int i = 0; i < n_rays; ++i) {
        Vec u(m), xp(m);
        for (int k = 0; k < m; ++k) u(k) = rng.uniform(u_lo(k), u_hi(k));
        for (int k = 0; k < m; ++k) xp(k) = rng.uniform(xp_lo(k), xp_hi(k));
        probes.push_back({{chart, u, xp}, rng.uniform(0.3, 0.6)});
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    struct RayResult {
        bool ok = false;
        double symplectic = std::numeric_limits<double>::quiet_NaN();
        double pullback = std::numeric_limits<double>::quiet_NaN();
        double conjugation = std::numeric_limits<double>::quiet_NaN();
        double boundary = std::numeric_limits<double>::quiet_NaN();
    };
    std::vector<RayResult> results(probes.size());
    parallel_for(static_cast<int>(probes.size()), ctx.threads, [&](int i) {
        const Probe& pr = probes[static_cast<std::size_t>(i)];
        RayResult& rr = results[static_cast<std::size_t>(i)];
        ScatterRecord rec;
        try {
            rec = scatter(model, domain, pr.bc, energy, Branch::incoming);
        } catch (const Error& e) {
            if (!recoverable_ray_error(e.code())) throw;
            return;
        }
        if (rec.status != ScatterStatus::ok) return;
        const PhasePoint p = rec.traj->phase_at(pr.frac * rec.ell);
        const double s = std::min(flow_s, 0.2 * rec.ell);
        rr.symplectic = kappa_symplectic_residual(kappa, p);
        rr.pullback = kappa_pullback_residual(model, model_t, kappa, p);
        rr.conjugation = kappa_conjugation_residual(model, model_t, kappa, p, s);
        rr.boundary = kappa_boundary_residual(domain, kappa, rec.entry);
        rr.ok = true;
    });

    Json points = Json::array();
    double sym = nan, pull = nan, conj = nan, bnd = nan;
    int n_ok = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const RayResult& rr = results[i];
        Json pt;
        pt["ray"] = i;
        pt["symplectic"] = rr.symplectic;
        pt["hamiltonian_pullback"] = rr.pullback;
        pt["conjugation"] = rr.conjugation;
        pt["boundary"] = rr.boundary;
        points.push_back(std::move(pt));
        if (!rr.ok) continue;
        ++n_ok;
        sym = n_ok == 1 ? rr.symplectic : std::max(sym, rr.symplectic);
        pull = n_ok == 1 ? rr.pullback : std::max(pull, rr.pullback);
        conj = n_ok == 1 ? rr.conjugation : std::max(conj, rr.conjugation);
        bnd = n_ok == 1 ? rr.boundary : std::max(bnd, rr.boundary);
    }
    Json report;
    report["schema_version"] = 1;
    report["seed"] = ctx.seed;
    report["points"] = std::move(points);
    std::ofstream out((ctx.out_dir / "kappa_report.json").string(), std::ios::binary);
    out << report.dump(2) << "\n";
    ctx.artifacts.push_back("kappa_report.json");
    ctx.extra["rays_ok"] = n_ok;

    ctx.checks.record("symplectic", sym);
    ctx.checks.record("hamiltonian_pullback", pull);
    ctx.checks.record("conjugation", conj);
    ctx.checks.record("boundary", bnd);
}

void run_finsler_suite(Ctx& ctx) {
    const Json& blk = require_field(ctx.cfg, "finsler", "config");
    const Vec b = vec_field(blk, "b", "finsler");
    const int n = static_cast<int>(b.size());
    Mat a = blk.contains("matrix") ? mat_field(blk, "matrix", "finsler")
                                   : Mat(Mat::Identity(n, n));
    FinslerModel fm = make_randers(a, b);
    HamiltonianModel model = to_hamiltonian(fm);
    Domain domain = build_domain(require_field(ctx.cfg, "domain", "config"));

    const int n_samples = int_or(blk, "n_samples", 6);
    Rng rng(ctx.seed);
    double legendre_res = 0.0, roundtrip_res = 0.0;
    for (int i = 0; i < n_samples; ++i) {
        const Vec x = rng.uniform_vec(n, -0.5, 0.5);
        const Vec v = rng.covector(n);
        const double fv = fm.value(x, v);
        const Vec xi = legendre(fm, x, v);
        legendre_res = std::max(legendre_res, std::abs(dual_norm(fm, x, xi, v) - fv));
        legendre_res =
            std::max(legendre_res, std::abs(model.value(x, xi) - 0.5 * fv * fv));
        const Vec back = legendre_inverse(fm, x, xi, Vec(1.5 * v));
        roundtrip_res = std::max(roundtrip_res, (back - v).cwiseAbs().maxCoeff());
    }
    ctx.checks.record("legendre_identity", legendre_res);
    ctx.checks.record("roundtrip", roundtrip_res);

    const double conj_t = num_or(blk, "conj_t", 0.4);
    double conj_res = 0.0;
    for (int i = 0; i < std::min(2, n_samples); ++i) {
        const Vec x = rng.uniform_vec(n, -0.3, 0.3);
        const Vec v = rng.covector(n);
        conj_res = std::max(conj_res, el_conjugation_residual(fm, model, {x, v}, conj_t));
    }
    ctx.checks.record("conjugation", conj_res);

    const int n_rays = int_or(blk, "n_rays", 4);
    struct RayOut {
        TangentPoint entry;
        std::optional<FinslerScatter> sc;
        double dual = std::numeric_limits<double>::quiet_NaN();
    };
    std::vector<RayOut> rays(static_cast<std::size_t>(n_rays));
    for (int i = 0; i < n_rays; ++i) {
        const double alpha = rng.uniform(0.0, 2.0 * M_PI);
        const Vec x = (Vec(2) << std::cos(alpha), std::sin(alpha)).finished();
        const Vec tangent = (Vec(2) << -std::sin(alpha), std::cos(alpha)).finished();
        Vec d = -x + rng.uniform(-0.4, 0.4) * tangent;
        rays[static_cast<std::size_t>(i)].entry = {x, Vec(d / fm.value(x, d))};
    }
    parallel_for(n_rays, ctx.threads, [&](int i) {
        RayOut& ro = rays[static_cast<std::size_t>(i)];
        ro.sc = finsler_scatter(fm, model, domain, ro.entry);
        ro.dual = finsler_dual_route_residual(fm, model, domain, ro.entry);
    });

    std::vector<std::string> header{"ray"};
    for (int k = 0; k < n; ++k) header.push_back("x" + std::to_string(k + 1));
    for (int k = 0; k < n; ++k) header.push_back("v" + std::to_string(k + 1));
    for (int k = 0; k < n; ++k) header.push_back("exit_x" + std::to_string(k + 1));
    for (int k = 0; k < n; ++k) header.push_back("exit_v" + std::to_string(k + 1));
    header.push_back("ell");
    io::CsvWriter w = ctx.open_csv("finsler_rays.csv", "finsler_suite");
    w.header(header);
    double dual_res = 0.0;
    for (std::size_t i = 0; i < rays.size(); ++i) {
        const RayOut& ro = rays[i];
        std::vector<std::string> row{std::to_string(i)};
        for (int k = 0; k < n; ++k) row.push_back(io::fmt(ro.entry.x(k)));
        for (int k = 0; k < n; ++k) row.push_back(io::fmt(ro.entry.v(k)));
        const bool ok = ro.sc && ro.sc->status == ScatterStatus::ok;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (int k = 0; k < n; ++k) row.push_back(io::fmt(ok ? ro.sc->exit.x(k) : nan));
        for (int k = 0; k < n; ++k) row.push_back(io::fmt(ok ? ro.sc->exit.v(k) : nan));
        row.push_back(io::fmt(ok ? ro.sc->ell : nan));
        w.row(row);
        dual_res = std::max(dual_res, ro.dual);
    }
    ctx.checks.record("dual_route", dual_res);
}

void run_zero_energy_suite(Ctx& ctx) {
    const Json& blk = require_field(ctx.cfg, "zero", "config");
    HamiltonianModel model = build_model(require_field(ctx.cfg, "model", "config"));
    HamiltonianModel model_t = build_model(require_field(ctx.cfg, "model_target", "config"));
    Domain domain = build_domain(require_field(ctx.cfg, "domain", "config"));
    ZeroEnergyKappa zk = kappa_zero_energy(model, domain, model_t, domain);

    auto mu_exact = [&](const PhasePoint& p) {
        const Vec g = model.grad_xi(p);
        return model_t.grad_xi(p).dot(g) / g.squaredNorm();
    };

    const int m = model.dim() - 1;
    const int chart = int_or(blk, "chart", 0);
    const int n_rays = int_or(blk, "n_rays", 6);
    const double flow_s = num_or(blk, "flow_s", 0.1);
    const Vec u_lo = vec_field(blk, "u_min", "zero"), u_hi = vec_field(blk, "u_max", "zero");
    const Vec xp_lo = vec_field(blk, "xi_prime_min", "zero"),
              xp_hi = vec_field(blk, "xi_prime_max", "zero");
    if (u_lo.size() != m || u_hi.size() != m || xp_lo.size() != m || xp_hi.size() != m)
        fail(ErrorCode::ConfigParse, "zero: sampling boxes must have boundary dimension");

    Rng rng(ctx.seed);
    struct Probe {
        BoundaryCovector bc;
        double frac = 0.4;
    };
    std::vector<Probe> probes;
    for (int i = 0; i < n_rays; ++i) {
        Vec u(m), xp(m);
        for (int k = 0; k < m; ++k) u(k) = rng.uniform(u_lo(k), u_hi(k));
        for (int k = 0; k < m; ++k) xp(k) = rng.uniform(xp_lo(k), xp_hi(k));
        probes.push_back({{chart, u, xp}, rng.uniform(0.3, 0.6)});
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    struct RayResult {
        bool ok = false;
        double pointset = std::numeric_limits<double>::quiet_NaN();
        double mu_value = std::numeric_limits<double>::quiet_NaN();
        double mu_expected = std::numeric_limits<double>::quiet_NaN();
        double tangential = std::numeric_limits<double>::quiet_NaN();
        double conjugation = std::numeric_limits<double>::quiet_NaN();
    };
    std::vector<RayResult> results(probes.size());
    PhaseFn mu_fn = mu_exact;
    parallel_for(static_cast<int>(probes.size()), ctx.threads, [&](int i) {
        const Probe& pr = probes[static_cast<std::size_t>(i)];
        RayResult& rr = results[static_cast<std::size_t>(i)];
        PhasePoint entry;
        try {
            entry = solve_zeta(model, domain, pr.bc, 0.0, Branch::incoming);
        } catch (const Error& e) {
            if (!recoverable_ray_error(e.code())) throw;
            return;
        }
        HitResult fwd = first_exit(model, domain, entry, +1.0);
        if (fwd.status != HitStatus::ok) return;
        const double chord = fwd.hit.t;
        const PhasePoint p = fwd.traj.phase_at(pr.frac * chord);
        rr.pointset = mu_pointset_residual(reparametrize_mu(model, mu_fn, entry, 0.8 * chord));
        rr.mu_value = zk.mu(p);
        rr.mu_expected = mu_exact(p);
        rr.tangential = tangential_symplectic_residual(model, zk.kappa, p);
        rr.conjugation =
            kappa_conjugation_residual_mu(model, model_t, zk, p, std::min(flow_s, 0.2 * chord));
        rr.ok = true;
    });

    std::vector<std::string> header{"ray"};
    for (int k = 0; k < m; ++k) header.push_back("u" + std::to_string(k + 1));
    for (int k = 0; k < m; ++k) header.push_back("xi_prime" + std::to_string(k + 1));
    header.push_back("mu");
    header.push_back("mu_expected");
    io::CsvWriter w = ctx.open_csv("mu.csv", "zero_energy_suite");
    w.header(header);
    double pointset = nan, mu_rec = nan, tang = nan, conj = nan;
    int n_ok = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const RayResult& rr = results[i];
        std::vector<std::string> row{std::to_string(i)};
        for (int k = 0; k < m; ++k) row.push_back(io::fmt(probes[i].bc.u(k)));
        for (int k = 0; k < m; ++k) row.push_back(io::fmt(probes[i].bc.xi_prime(k)));
        row.push_back(io::fmt(rr.mu_value));
        row.push_back(io::fmt(rr.mu_expected));
        w.row(row);
        if (!rr.ok) continue;
        ++n_ok;
        const double mu_res = std::abs(rr.mu_value - rr.mu_expected);
        pointset = n_ok == 1 ? rr.pointset : std::max(pointset, rr.pointset);
        mu_rec = n_ok == 1 ? mu_res : std::max(mu_rec, mu_res);
        tang = n_ok == 1 ? rr.tangential : std::max(tang, rr.tangential);
        conj = n_ok == 1 ? rr.conjugation : std::max(conj, rr.conjugation);
    }
    ctx.extra["rays_ok"] = n_ok;
    ctx.checks.record("pointset", pointset);
    ctx.checks.record("mu_recovery", mu_rec);
    ctx.checks.record("tangential_symplectic", tang);
    ctx.checks.record("conjugation", conj);

    if (blk.contains("sigma")) {
        const Json& sblk = blk.at("sigma");
        const int n_pairs = int_or(sblk, "n_pairs", 4);
        const double width = num_field(require_field(ctx.cfg, "domain", "config"), "width", "domain");
        const int axis = int_field(require_field(ctx.cfg, "domain", "config"), "axis", "domain");
        if (model.dim() != 2 || axis != 1)
            fail(ErrorCode::ConfigParse, "zero.sigma expects a 2d slab across axis 1");
        Mat g(2, 2);
        g << -1.0, 0.0, 0.0, 1.0;
        double law = 0.0, closed = 0.0;
        for (int i = 0; i < n_pairs; ++i) {
            Vec u(1), wv(1);
            u << rng.uniform(-0.5, 0.5);
            wv << rng.uniform(-0.5, 0.5);
            const Vec x = (Vec(2) << u(0), 0.0).finished();
            const Vec y = (Vec(2) << wv(0), width).finished();
            const Vec seed = g * (y - x);
            SigmaProbe sp = sigma_probe(model, domain, 0, u, 1, wv, seed);
            law = std::max(law, sp.law_residual);
            const double want = 0.5 * (y - x).dot(g * (y - x));
            closed = std::max(closed, std::abs(sp.r - want));
        }
        ctx.checks.record("sigma_gradient", law);
        ctx.checks.record("sigma_closed_form", closed);
    }
}

using Runner = void (*)(Ctx&);

const std::map<std::string, Runner>& runners() {
    static const std::map<std::string, Runner> table{
        {"flow", run_flow},
        {"scatter_fan", run_scatter_fan},
        {"traveltime_table", run_traveltime_table},
        {"xray_sinogram", run_xray_sinogram},
        {"lightray_fan", run_lightray_fan},
        {"kappa_validate", run_kappa_validate},
        {"finsler_suite", run_finsler_suite},
        {"zero_energy_suite", run_zero_energy_suite},
    };
    return table;
}

Json load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::ConfigParse, "cannot open config '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const std::exception& e) {
        fail(ErrorCode::ConfigParse, "config '" + path + "': " + e.what());
    }
}

int resolve_threads(const Json& cfg, const RunOptions& opts) {
    if (opts.threads) return std::max(1, *opts.threads);
    if (cfg.contains("threads")) return std::max(1, cfg.at("threads").get<int>());
    if (const char* env = std::getenv("HAMLENS_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

} // namespace

RunResult run_scenario(const std::string& config_path, const RunOptions& opts) {
    Ctx ctx;
    ctx.out_dir = opts.out_dir.empty() ? fs::path(".") : fs::path(opts.out_dir);
    fs::create_directories(ctx.out_dir);

    Json summary;
    summary["schema_version"] = 1;

    auto write_summary = [&](int code) {
        summary["exit_code"] = code;
        std::ofstream out((ctx.out_dir / "summary.json").string(), std::ios::binary);
        out << summary.dump(2) << "\n";
    };

    Runner runner = nullptr;
    try {
        Json cfg = load_config(config_path);
        apply_overrides(cfg, opts.overrides);
        if (int_or(cfg, "schema_version", -1) != 1)
            fail(ErrorCode::ConfigParse, "config must declare schema_version 1");
        const std::string experiment = str_field(cfg, "experiment", "config");
        const auto it = runners().find(experiment);
        if (it == runners().end())
            fail(ErrorCode::ConfigParse, "unknown experiment '" + experiment + "'");
        runner = it->second;
        summary["experiment"] = experiment;
        ctx.cfg = std::move(cfg);
    } catch (const Error& e) {
        summary["config"] = fs::path(config_path).filename().string();
        summary["error"] = e.what();
        write_summary(1);
        throw;
    }

    ctx.seed = opts.seed ? *opts.seed
                         : (ctx.cfg.contains("seed") ? ctx.cfg.at("seed").get<std::uint64_t>() : 0);
    ctx.threads = resolve_threads(ctx.cfg, opts);
    ctx.checks.thresholds = ctx.cfg.value("checks", Json::object());

    summary["config"] = fs::path(config_path).filename().string();
    summary["seed"] = ctx.seed;
    summary["threads"] = ctx.threads;

    auto finish = [&](int code) {
        summary["checks"] = ctx.checks.results;
        if (!ctx.extra.empty()) summary["stats"] = ctx.extra;
        summary["artifacts"] = ctx.artifacts;
        write_summary(code);
    };

    try {
        runner(ctx);
    } catch (const Error& e) {
        summary["error"] = e.what();
        finish(1);
        throw;
    }
    const int code = ctx.checks.failed ? 2 : 0;
    finish(code);
    return {code, summary};
}

std::vector<std::string> validate_scenario(const std::string& config_path) {
    std::vector<std::string> findings;
    Json cfg;
    try {
        cfg = load_config(config_path);
    } catch (const Error& e) {
        findings.push_back(e.what());
        return findings;
    }
    if (int_or(cfg, "schema_version", -1) != 1)
        findings.push_back("config must declare schema_version 1");
    std::string experiment;
    try {
        experiment = str_field(cfg, "experiment", "config");
        if (runners().find(experiment) == runners().end())
            findings.push_back("unknown experiment '" + experiment + "'");
    } catch (const Error& e) {
        findings.push_back(e.what());
    }
    for (const char* key : {"model", "model_target"}) {
        if (!cfg.contains(key)) continue;
        try {
            build_model(cfg.at(key));
        } catch (const Error& e) {
            findings.push_back(std::string(key) + ": " + e.what());
        }
    }
    for (const char* key : {"domain", "domain_target"}) {
        if (!cfg.contains(key)) continue;
        try {
            build_domain(cfg.at(key));
        } catch (const Error& e) {
            findings.push_back(std::string(key) + ": " + e.what());
        }
    }
    if (!experiment.empty() && runners().count(experiment) && !cfg.contains(experiment) &&
        !(experiment == "scatter_fan" && cfg.contains("scatter")) &&
        !(experiment == "traveltime_table" && cfg.contains("traveltime")) &&
        !(experiment == "xray_sinogram" && cfg.contains("xray")) &&
        !(experiment == "lightray_fan" && cfg.contains("lightray")) &&
        !(experiment == "kappa_validate" && cfg.contains("kappa")) &&
        !(experiment == "finsler_suite" && cfg.contains("finsler")) &&
        !(experiment == "zero_energy_suite" && cfg.contains("zero")))
        findings.push_back("missing experiment block for '" + experiment + "'");
    if (cfg.contains("checks")) {
        if (!cfg.at("checks").is_object()) {
            findings.push_back("checks must be an object of name -> threshold");
        } else {
            for (const auto& [name, thr] : cfg.at("checks").items())
                if (!thr.is_number())
                    findings.push_back("check '" + name + "' threshold must be a number");
        }
    }
    return findings;
}

Json builtin_catalog() {
    Json cat;
    cat["experiments"] = Json::array();
    for (const auto& [name, fn] : runners()) {
        (void)fn;
        cat["experiments"].push_back(name);
    }
    cat["models"] = Json::array({
        Json{{"type", "euclidean"}, {"params", {"dim"}}},
        Json{{"type", "minkowski"}, {"params", {"dim"}}},
        Json{{"type", "constant"}, {"params", {"matrix"}}},
        Json{{"type", "conformal_constant"}, {"params", {"dim", "c"}}},
        Json{{"type", "conformal_linear"}, {"params", {"base", "slope"}}},
        Json{{"type", "conformal_gaussian_well"}, {"params", {"dim", "depth", "width"}}},
        Json{{"type", "minkowski_weighted"}, {"params", {"amp"}}},
        Json{{"type", "gauged"}, {"params", {"base", "diffeo"}}},
        Json{{"type", "randers_dual"}, {"params", {"b", "matrix"}}},
    });
    cat["domains"] = Json::array({
        Json{{"type", "half_space"}, {"params", {"dim", "axis"}}},
        Json{{"type", "slab"}, {"params", {"dim", "axis", "width"}}},
        Json{{"type", "disk"}, {"params", Json::array()}},
        Json{{"type", "ball"}, {"params", {"dim"}}},
    });
    cat["integrands"] = Json::array({
        Json{{"type", "one"}, {"params", Json::array()}},
        Json{{"type", "one_minus_r2"}, {"params", Json::array()}},
        Json{{"type", "energy"}, {"params", Json::array()}},
        Json{{"type", "xh_gauge"}, {"params", {"phi", "component", "axis", "width"}}},
    });
    cat["diffeos"] = Json::array({
        Json{{"type", "identity"}, {"params", Json::array()}},
        Json{{"type", "bump_shift"}, {"params", {"center", "width", "amp", "dir"}}},
        Json{{"type", "interior_shear"}, {"params", {"axis", "width", "amp"}}},
    });
    return cat;
}

} // namespace hamlens
