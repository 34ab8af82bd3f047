#include "zmc/estimation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/tools/roots.hpp>

#include "zmc/diagnostics.hpp"
#include "zmc/errors.hpp"
#include "zmc/parallel.hpp"

namespace zmc {

SampleMoments SampleMoments::from(std::span<const std::int64_t> counts) {
    if (counts.size() < 2) throw InvalidSpec("sample moments need at least two counts");
    SampleMoments m;
    const double n = static_cast<double>(counts.size());
    double f1 = 0.0, f2 = 0.0, f3 = 0.0, zeros = 0.0;
    for (const auto y : counts) {
        const double v = static_cast<double>(y);
        f1 += v;
        f2 += v * (v - 1.0);
        f3 += v * (v - 1.0) * (v - 2.0);
        zeros += y == 0 ? 1.0 : 0.0;
    }
    m.ybar = f1 / n;
    m.factorial = {f1 / n, f2 / n, f3 / n};
    m.zero_fraction = zeros / n;
    double ss = 0.0, lag = 0.0;
    for (std::size_t t = 0; t < counts.size(); ++t) {
        const double d = static_cast<double>(counts[t]) - m.ybar;
        ss += d * d;
        if (t + 1 < counts.size()) lag += d * (static_cast<double>(counts[t + 1]) - m.ybar);
    }
    m.s2 = ss / n;
    m.r1 = ss > 0.0 ? lag / ss : 0.0;
    return m;
}

namespace {

bool finite_all(std::initializer_list<double> values) {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

Params moment_init_ear1(const SampleMoments& m) {
    if (!(m.ybar > 0.0)) throw InfeasibleInit("EAR1 initializer needs a positive sample mean");
    const double z = (m.s2 / m.ybar - 1.0) / m.ybar;
    const double omega = (z - 1.0) / (z + 1.0);
    const double mu = m.ybar / (1.0 - omega);
    const double rho = m.r1 * (1.0 + (1.0 + omega) * mu) / ((1.0 - omega) * mu);
    if (!finite_all({z, omega, mu, rho}) || !(omega > -1.0 && omega < 1.0) || !(mu > 0.0) ||
        !(rho >= 0.0 && rho < 1.0))
        throw InfeasibleInit("EAR1 moment initializer left the parameter space");
    Params q;
    q.omega = omega;
    q.rho = rho;
    q.beta = 1.0 / mu;
    q.p = 1.0;
    return q;
}

Params moment_init_gar1_factorial(const SampleMoments& m) {
    const auto [y1, y2, y3] = m.factorial;
    if (!(y1 > 0.0 && y2 > 0.0 && y3 > 0.0))
        throw InfeasibleInit("factorial initializer needs positive factorial moments");
    const double r2 = y2 / y1;
    const double r3 = y3 / y2;
    if (!(r3 > r2)) throw InfeasibleInit("factorial initializer needs r3 > r2");
    const double beta = 1.0 / (r3 - r2);
    const double p = r2 * beta - 1.0;
    if (!(p > 0.0)) throw InfeasibleInit("factorial initializer gave a non-positive shape");
    const double omega = 1.0 - y1 * beta / p;
    const double mu = p / beta;
    const double s2 = p / (beta * beta);
    const double rho = m.r1 * (mu + s2 + omega * mu * mu) / ((1.0 - omega) * s2);
    if (!finite_all({beta, p, omega, rho}) || !(omega > -1.0 && omega < 1.0) || !(rho >= 0.0 && rho < 1.0))
        throw InfeasibleInit("factorial initializer left the parameter space");
    Params q;
    q.omega = omega;
    q.rho = rho;
    q.beta = beta;
    q.p = p;
    return q;
}

std::vector<double> GridAxis::points() const {
    if (steps < 1) throw InvalidSpec("grid axis needs at least one point");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(steps));
    if (steps == 1) {
        out.push_back(lo);
        return out;
    }
    for (int i = 0; i < steps; ++i) out.push_back(lo + (hi - lo) * i / (steps - 1));
    return out;
}

double moment_mismatch(const SampleMoments& m, const ModelStructure& model, const Params& q) {
    const auto spec = ModelSpec::make(model.family, model.intensity, q);
    const auto mom = marginal_count_moments(spec);
    const double r1 = count_acf(spec, 1);
    const double e_mean = (m.ybar - mom.mean) / std::max(m.ybar, 1e-8);
    const double e_var = (m.s2 - mom.variance) / std::max(m.s2, 1e-8);
    const double e_acf = m.r1 - r1;
    return e_mean * e_mean + e_var * e_var + e_acf * e_acf;
}

Params grid_search_init(std::span<const std::int64_t> counts, const ModelStructure& model, const GridConfig& grid) {
    const auto m = SampleMoments::from(counts);
    const auto rhos = grid.rho.points();
    const auto omegas = grid.omega.points();
    const auto betas = grid.beta.points();
    const auto ps = model.intensity == IntensityFamily::EAR1 ? std::vector<double>{1.0} : grid.p.points();
    const auto as = model.family == CountFamily::ZMNB ? grid.a.points() : std::vector<double>{0.0};

    double best = std::numeric_limits<double>::infinity();
    Params best_q;
    for (const double beta : betas)
        for (const double p : ps)
            for (const double a : as)
                for (const double omega : omegas) {
                    Params q;
                    q.beta = beta;
                    q.p = p;
                    q.a = a;
                    q.c = model.c;
                    q.omega = omega;
                    if (!(omega < 1.0)) continue;
                    const double lower = feasible_omega_interval(model.family, q.mu(), a, model.c).lower;
                    if (omega < lower) continue;
                    for (const double rho : rhos) {
                        if (!(rho >= 0.0 && rho < 1.0)) continue;
                        q.rho = rho;
                        const double f = moment_mismatch(m, model, q);
                        if (f < best) {
                            best = f;
                            best_q = q;
                        }
                    }
                }
    if (!std::isfinite(best)) throw InfeasibleInit("grid search found no feasible point");
    return best_q;
}

namespace {

// Generalized Gauss-Laguerre rule for E[f(X)], X ~ Gamma(shape, 1), by
// Golub-Welsch. Cached because the shape only changes with a.
struct LaguerreRule {
    double shape = -1.0;
    std::array<double, 16> nodes{};
    std::array<double, 16> weights{};
};

const LaguerreRule& laguerre_rule(double shape) {
    thread_local LaguerreRule rule;
    if (rule.shape == shape) return rule;
    constexpr int n = 16;
    const double alpha = shape - 1.0;
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        T(i, i) = 2.0 * i + alpha + 1.0;
        if (i + 1 < n) T(i, i + 1) = T(i + 1, i) = std::sqrt((i + 1.0) * (i + 1.0 + alpha));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(T);
    for (int i = 0; i < n; ++i) {
        rule.nodes[i] = eig.eigenvalues()(i);
        const double v = eig.eigenvectors()(0, i);
        rule.weights[i] = v * v;
    }
    rule.shape = shape;
    return rule;
}

}  // namespace

double predictive_zero_prob(const FilterParams& q, double m, double C) {
    if (q.family == CountFamily::ZMNB && q.c == 1) {
        // (1 + a L)^{-1/a} = E[exp(-L V)] with V ~ Gamma(1/a, scale a), so the
        // predictive mean is E_V[(1 + V C/m)^{-m^2/C}].
        if (C <= 1e-14 * m * m) return std::pow(1.0 + q.a * m, -1.0 / q.a);
        const auto& rule = laguerre_rule(1.0 / q.a);
        const double k = m * m / C;
        const double scale = q.a * C / m;
        double sum = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i)
            sum += rule.weights[i] * std::exp(-k * std::log1p(scale * rule.nodes[i]));
        return sum;
    }
    // Laplace transform of a Gamma law with mean m and variance C at s.
    const double s = q.family == CountFamily::ZMNB ? std::log1p(q.a) / q.a : 1.0;
    if (C <= 1e-14 * m * m) return std::exp(-s * m);
    return std::exp(-(m * m / C) * std::log1p(s * C / m));
}

namespace {

constexpr double kJacobianScaleFloor = 0.1;

struct QuadraticTerm {
    double weight;
    double residual;
};

QuadraticTerm quadratic_term(std::int64_t y, const FilterStep& step, const FilterParams& q, double a) {
    const double w1 = 1.0 - q.omega;
    const double m = step.prediction;
    const double C = step.pred_var;
    const double second = m * m + C;
    const double expected =
        w1 * w1 * C + w1 * (m + q.omega * second + a * (q.c == 1 ? second : m));
    const double h = static_cast<double>(y) - w1 * m;
    Params local;
    local.omega = q.omega;
    local.a = a;
    local.c = q.c;
    const double var_q = quadratic_innovation_variance(m, local);
    const double weight = -w1 * std::pow(m, 1.0 + q.c) / var_q;
    return {weight, h * h - expected};
}

}  // namespace

EFSystem ef_components(std::span<const std::int64_t> counts, std::span<const double> filtered_prev,
                       const FilterParams& params, std::span<const double> error_var_prev) {
    const std::size_t n = counts.size();
    if (filtered_prev.size() != n) throw InvalidSpec("ef_components: filtered_prev must align with counts");
    if (!error_var_prev.empty() && error_var_prev.size() != n)
        throw InvalidSpec("ef_components: error variances must align with counts");

    auto evaluate = [&](double omega, double mu, double rho, std::array<double, 3>& g, double* zero_mass) {
        FilterParams q = params;
        q.omega = omega;
        q.mu = mu;
        q.rho = rho;
        const double v = vbar(q);
        const double w1 = 1.0 - omega;
        g = {0.0, 0.0, 0.0};
        double zero_sum = 0.0, zero_var = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double lp = filtered_prev[t];
            const double cp = error_var_prev.empty() ? 0.0 : error_var_prev[t];
            const double c_pred = rho * rho * cp + (1.0 - rho * rho) * q.sigma2;
            const double J = w1 * w1 * c_pred + w1 * v;
            if (!(J > 0.0) || !std::isfinite(J))
                throw EstimationError("degenerate EF weight at index " + std::to_string(t));
            const double m = rho * lp + (1.0 - rho) * mu;
            const double h = static_cast<double>(counts[t]) - w1 * m;
            g[0] += m * h / J;
            g[1] += -w1 * (1.0 - rho) * h / J;
            g[2] += -w1 * (lp - mu) * h / J;
            if (zero_mass) {
                const double pi = omega + w1 * predictive_zero_prob(q, m, c_pred);
                zero_sum += (counts[t] == 0 ? 1.0 : 0.0) - pi;
                zero_var += pi * (1.0 - pi);
            }
        }
        if (zero_mass) *zero_mass = zero_sum / std::max(zero_var / static_cast<double>(n), 1e-12);
    };

    EFSystem sys;
    evaluate(params.omega, params.mu, params.rho, sys.components, &sys.zero_mass);
    const std::array<double, 3> theta{params.omega, params.mu, params.rho};
    for (int j = 0; j < 3; ++j) {
        const double h = 1e-5 * std::max(std::abs(theta[j]), kJacobianScaleFloor);
        auto up = theta, down = theta;
        up[j] += h;
        down[j] -= h;
        std::array<double, 3> gu{}, gd{};
        evaluate(up[0], up[1], up[2], gu, nullptr);
        evaluate(down[0], down[1], down[2], gd, nullptr);
        for (int i = 0; i < 3; ++i) sys.jacobian(i, j) = (gu[i] - gd[i]) / (2.0 * h);
    }
    return sys;
}

std::vector<double> latent_innovations(std::span<const double> path, double rho, double mu) {
    std::vector<double> out;
    if (path.size() < 2) return out;
    out.reserve(path.size() - 1);
    for (std::size_t t = 1; t < path.size(); ++t) out.push_back(path[t] - rho * path[t - 1] - (1.0 - rho) * mu);
    return out;
}

double estimate_sigma2(std::span<const double> path, double rho, double mu, std::span<const double> error_var) {
    if (path.size() < 2) throw InvalidSpec("estimate_sigma2 needs at least two values");
    if (!(std::abs(rho) < 1.0)) throw InvalidSpec("estimate_sigma2 needs |rho| < 1");
    if (!error_var.empty() && error_var.size() != path.size())
        throw InvalidSpec("estimate_sigma2: error variances must align with the path");
    double sum = 0.0;
    for (std::size_t t = 1; t < path.size(); ++t) {
        const double d = path[t] - rho * path[t - 1] - (1.0 - rho) * mu;
        sum += d * d;
        if (!error_var.empty()) sum += error_var[t] - rho * rho * error_var[t - 1];
    }
    return sum / static_cast<double>(path.size() - 1) / (1.0 - rho * rho);
}

double quadratic_ef(std::span<const std::int64_t> counts, const FilterPass& pass, const FilterParams& params,
                    double a) {
    if (pass.size() != counts.size()) throw InvalidSpec("quadratic_ef: filter pass must align with counts");
    double g = 0.0;
    for (std::size_t t = 0; t < counts.size(); ++t) {
        const auto term = quadratic_term(counts[t], pass.steps[t], params, a);
        g += term.weight * term.residual;
    }
    return g;
}

QuadraticEFResult solve_quadratic_ef(std::span<const std::int64_t> counts, const FilterPass& pass,
                                     const FilterParams& params, double a_max) {
    if (params.family != CountFamily::ZMNB) throw InvalidSpec("quadratic EF applies to ZMNB only");
    if (!(a_max > 0.0)) throw InvalidSpec("a_max must be positive");
    constexpr double a_min = 1e-10;
    auto g = [&](double a) { return quadratic_ef(counts, pass, params, a); };
    const double g_lo = g(a_min);
    if (g_lo >= 0.0) return {0.0, true};
    const double g_hi = g(a_max);
    if (g_hi < 0.0)
        throw EstimationError("quadratic EF has no sign change on (0, " + std::to_string(a_max) +
                              "]; increase a_max");
    std::uintmax_t max_iter = 200;
    const auto root = boost::math::tools::toms748_solve(g, a_min, a_max, g_lo, g_hi,
                                                        boost::math::tools::eps_tolerance<double>(50), max_iter);
    return {0.5 * (root.first + root.second), false};
}

namespace {

// x = [omega, mu, rho, sigma2?, a?]; sigma2 is tied to mu^2 for EAR1.
struct Layout {
    bool free_sigma2;
    bool has_a;
    Eigen::Index size() const { return 3 + (free_sigma2 ? 1 : 0) + (has_a ? 1 : 0); }
    Eigen::Index sigma2_index() const { return 3; }
    Eigen::Index a_index() const { return free_sigma2 ? 4 : 3; }
};

Layout layout_for(const ModelStructure& model) {
    return {model.intensity == IntensityFamily::GAR1, model.family == CountFamily::ZMNB};
}

FilterParams filter_params(const ModelStructure& model, const Layout& lay, const Eigen::VectorXd& x) {
    FilterParams q;
    q.family = model.family;
    q.omega = x[0];
    q.mu = x[1];
    q.rho = x[2];
    q.sigma2 = lay.free_sigma2 ? x[lay.sigma2_index()] : x[1] * x[1];
    q.a = lay.has_a ? x[lay.a_index()] : 0.0;
    q.c = model.c;
    return q;
}

Params to_params(const ModelStructure& model, const Layout& lay, const Eigen::VectorXd& x) {
    const auto q = filter_params(model, lay, x);
    Params out;
    out.omega = q.omega;
    out.rho = q.rho;
    out.beta = q.mu / q.sigma2;
    out.p = q.mu * out.beta;
    out.a = q.a;
    out.c = model.c;
    if (model.intensity == IntensityFamily::EAR1) out.p = 1.0;
    return out;
}

Eigen::VectorXd to_vector(const Layout& lay, const Params& q) {
    Eigen::VectorXd x(lay.size());
    x[0] = q.omega;
    x[1] = q.mu();
    x[2] = q.rho;
    if (lay.free_sigma2) x[lay.sigma2_index()] = q.sigma2();
    if (lay.has_a) x[lay.a_index()] = q.a;
    return x;
}

struct Evaluation {
    Eigen::VectorXd g;      // each component a mean over t
    Eigen::VectorXd scale;  // standard-error scale of each component
    FilterPass pass;
    double max_abs = 0.0;
};

Evaluation evaluate(std::span<const std::int64_t> counts, const ModelStructure& model, const Layout& lay,
                    const Eigen::VectorXd& x, const FitConfig& cfg) {
    const auto q = filter_params(model, lay, x);
    Evaluation ev;
    ev.pass = gkf_filter(counts, q, std::nullopt, cfg.lambda_clamp);
    const std::size_t n = counts.size();
    const double nd = static_cast<double>(n);
    const Eigen::Index k = lay.size();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(k);

    const double w1 = 1.0 - q.omega;
    const double rho2 = q.rho * q.rho;
    std::vector<double> zero_terms(n);
    std::vector<double> sigma2_terms(lay.free_sigma2 ? n : 0);
    double zero_var = 0.0;
    double sigma2_norm = 0.0;
    auto add = [&](Eigen::Index i, double term) {
        sum[i] += term;
        sq[i] += term * term;
    };
    for (std::size_t t = 0; t < n; ++t) {
        const auto& st = ev.pass.steps[t];
        const auto& prev = ev.pass.previous(t);
        const double J = st.innovation_var;
        add(0, -w1 * (1.0 - q.rho) * st.innovation / J);
        add(1, -w1 * (prev.lambda_filtered - q.mu) * st.innovation / J);
        const double pi = q.omega + w1 * predictive_zero_prob(q, st.prediction, st.pred_var);
        zero_terms[t] = (counts[t] == 0 ? 1.0 : 0.0) - pi;
        zero_var += pi * (1.0 - pi);
        if (lay.free_sigma2 && lay.has_a) {
            // Innovation whiteness at lag 1; the innovation-variance form
            // is nearly collinear with the dispersion equation.
            if (t > 0) {
                const auto& before = ev.pass.steps[t - 1];
                sigma2_terms[t] = st.innovation * before.innovation / std::sqrt(J * before.innovation_var);
            }
            sigma2_norm += 1.0;
        } else if (lay.free_sigma2) {
            const double d = ev.pass.states[t].lambda_filtered - st.prediction;
            sigma2_terms[t] = (d * d + ev.pass.states[t].error_var - rho2 * prev.error_var) / (1.0 - rho2) - q.sigma2;
            sigma2_norm += st.gain * st.gain * J / (1.0 - rho2);
        }
        if (lay.has_a) {
            const auto term = quadratic_term(counts[t], st, q, q.a);
            add(lay.a_index(), term.weight * term.residual);
        }
    }
    const double zero_norm = std::max(zero_var / nd, 1e-12);
    for (std::size_t t = 0; t < n; ++t) add(2, zero_terms[t] / zero_norm);
    if (lay.free_sigma2) {
        // Without the clamp each term equals G_t^2 (h_t^2 - J_t) / (1 - rho^2);
        // dividing by the mean of G_t^2 J_t / (1 - rho^2) removes the trivial
        // root at sigma2 -> 0 where every gain vanishes.
        const double norm = std::max(sigma2_norm / nd, 1e-300);
        for (std::size_t t = 0; t < n; ++t) add(lay.sigma2_index(), sigma2_terms[t] / norm);
    }

    ev.g = sum / nd;
    ev.scale.resize(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        ev.scale[i] = std::max(std::sqrt(sq[i] / nd / nd), 1e-300);
        ev.max_abs = std::max(ev.max_abs, std::abs(ev.g[i]));
    }
    if (!ev.g.allFinite()) throw EstimationError("estimating equations are not finite at the current iterate");
    return ev;
}

struct Box {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
};

Box feasible_box(const ModelStructure& model, const Layout& lay, const Eigen::VectorXd& x, const FilterPass& pass,
                 const FitConfig& cfg) {
    double min_lambda = std::numeric_limits<double>::infinity();
    for (const auto& s : pass.states) min_lambda = std::min(min_lambda, s.lambda_filtered);
    const double a = lay.has_a ? x[lay.a_index()] : 0.0;
    const double omega_min = feasible_omega_interval(model.family, min_lambda, a, model.c).lower;
    const double inf = std::numeric_limits<double>::infinity();
    Box b{Eigen::VectorXd(lay.size()), Eigen::VectorXd(lay.size())};
    b.lo[0] = omega_min + cfg.omega_margin;
    b.hi[0] = cfg.omega_max;
    b.lo[1] = cfg.floor;
    b.hi[1] = inf;
    b.lo[2] = 0.0;
    b.hi[2] = cfg.rho_max;
    if (lay.free_sigma2) {
        b.lo[lay.sigma2_index()] = cfg.floor;
        b.hi[lay.sigma2_index()] = inf;
    }
    if (lay.has_a) {
        b.lo[lay.a_index()] = cfg.floor;
        b.hi[lay.a_index()] = cfg.a_max;
    }
    return b;
}

bool project(Eigen::VectorXd& x, const Box& box) {
    bool clipped = false;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double v = std::clamp(x[i], box.lo[i], box.hi[i]);
        if (v != x[i]) clipped = true;
        x[i] = v;
    }
    return clipped;
}

double merit(const Evaluation& ev, const Eigen::VectorXd& scale) {
    return (ev.g.array() / scale.array()).square().sum();
}

}  // namespace

FitResult solve_ef_block(std::span<const std::int64_t> counts, const ModelStructure& model, const Params& init,
                         const FitConfig& cfg) {
    if (counts.size() < 3) throw InvalidSpec("solve_ef_block needs at least three counts");
    if (model.intensity == IntensityFamily::EAR1 && init.p != 1.0)
        throw InvalidSpec("EAR1 fits need an initial shape p = 1");
    const Layout lay = layout_for(model);
    const Eigen::Index k = lay.size();

    FitResult res;
    res.init = init;
    Eigen::VectorXd x = to_vector(lay, init);
    Evaluation ev = evaluate(counts, model, lay, x, cfg);
    Box box = feasible_box(model, lay, x, ev.pass, cfg);
    if (project(x, box)) {
        ++res.projections;
        ev = evaluate(counts, model, lay, x, cfg);
    }
    res.trace.push_back(to_params(model, lay, x));

    double last_change = std::numeric_limits<double>::infinity();
    for (int iter = 1; iter <= cfg.max_iter; ++iter) {
        res.iterations = iter;
        box = feasible_box(model, lay, x, ev.pass, cfg);

        Eigen::MatrixXd jac(k, k);
        for (Eigen::Index j = 0; j < k; ++j) {
            const double h = cfg.jacobian_step * std::max(std::abs(x[j]), kJacobianScaleFloor);
            Eigen::VectorXd up = x, down = x;
            double width = 2.0 * h;
            up[j] += h;
            down[j] -= h;
            if (up[j] > box.hi[j]) {
                up[j] = x[j];
                width = h;
            } else if (down[j] < box.lo[j]) {
                down[j] = x[j];
                width = h;
            }
            const auto eu = evaluate(counts, model, lay, up, cfg);
            const auto ed = evaluate(counts, model, lay, down, cfg);
            jac.col(j) = (eu.g - ed.g) / width;
        }
        Eigen::VectorXd step = jac.completeOrthogonalDecomposition().solve(-ev.g);
        if (!step.allFinite()) break;
        // Cap the move: absolute for omega and rho, relative for the rest.
        double shrink = 1.0;
        for (Eigen::Index i = 0; i < k; ++i) {
            const double limit = (i == 0 || i == 2) ? cfg.max_step : cfg.max_step * std::max(std::abs(x[i]), cfg.floor);
            if (std::abs(step[i]) > limit) shrink = std::min(shrink, limit / std::abs(step[i]));
        }
        step *= shrink;

        const Eigen::VectorXd scale = ev.scale;
        const double current = merit(ev, scale);
        bool accepted = false;
        double lambda = 1.0;
        Eigen::VectorXd trial;
        Evaluation trial_ev;
        bool clipped = false;
        for (int halving = 0; halving <= cfg.max_halvings; ++halving, lambda *= 0.5) {
            trial = x + lambda * step;
            clipped = project(trial, box);
            try {
                trial_ev = evaluate(counts, model, lay, trial, cfg);
            } catch (const EstimationError&) {
                continue;
            }
            if (merit(trial_ev, scale) < current) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // No descent left: accept only if already at a root.
            res.converged = ev.max_abs < cfg.ef_tol;
            break;
        }
        if (clipped) ++res.projections;

        last_change = 0.0;
        for (Eigen::Index i = 0; i < k; ++i)
            last_change = std::max(last_change, std::abs(trial[i] - x[i]) / std::max(std::abs(x[i]), 1.0));
        x = trial;
        ev = std::move(trial_ev);
        res.trace.push_back(to_params(model, lay, x));
        if (last_change < cfg.tol && ev.max_abs < cfg.ef_tol) {
            res.converged = true;
            break;
        }
        if (ev.max_abs < cfg.ef_tol * 1e-3) {
            res.converged = true;
            break;
        }
    }

    res.params_hat = to_params(model, lay, x);
    res.ef_norm = ev.max_abs;
    res.filtered = std::move(ev.pass);
    std::vector<double> filtered(res.filtered.size());
    for (std::size_t t = 0; t < filtered.size(); ++t) filtered[t] = res.filtered.states[t].lambda_filtered;
    try {
        res.residuals = pearson_residuals(counts, filtered, res.params_hat, model.family);
    } catch (const EstimationError&) {
        res.residuals.clear();
    }
    return res;
}

InitResult initialize(std::span<const std::int64_t> counts, const ModelStructure& model, const FitConfig& cfg) {
    if (model.family == CountFamily::ZMP) {
        const auto m = SampleMoments::from(counts);
        try {
            Params q = model.intensity == IntensityFamily::EAR1 ? moment_init_ear1(m) : moment_init_gar1_factorial(m);
            q.c = model.c;
            // Reject starts the box would clip at lambda = mu.
            const double lower = feasible_omega_interval(model.family, q.mu(), 0.0, model.c).lower;
            if (q.omega >= lower && q.omega <= cfg.omega_max && q.rho <= cfg.rho_max)
                return {q, model.intensity == IntensityFamily::EAR1 ? "ear1-moments" : "factorial-moments"};
        } catch (const InfeasibleInit&) {
        }
    }
    return {grid_search_init(counts, model, cfg.grid), "grid"};
}

FitResult fit_model(std::span<const std::int64_t> counts, const ModelStructure& model, const FitConfig& cfg) {
    const auto first = initialize(counts, model, cfg);
    std::vector<InitResult> starts{first};
    if (first.source != "grid") {
        try {
            starts.push_back({grid_search_init(counts, model, cfg.grid), "grid"});
        } catch (const InfeasibleInit&) {
        }
    }
    const std::size_t base_count = starts.size();
    for (std::size_t b = 0; b < base_count; ++b)
        for (const double rho : cfg.restart_rho) {
            InitResult alt = starts[b];
            alt.params.rho = rho;
            alt.source += "+restart";
            starts.push_back(alt);
        }

    std::optional<FitResult> best;
    int attempts = 0;
    for (const auto& start : starts) {
        ++attempts;
        FitResult res;
        try {
            res = solve_ef_block(counts, model, start.params, cfg);
        } catch (const EstimationError&) {
            continue;
        }
        res.init_source = start.source;
        if (res.converged) {
            res.starts = attempts;
            return res;
        }
        if (!best || res.ef_norm < best->ef_norm) best = std::move(res);
    }
    if (!best) throw EstimationError("every start failed to produce finite estimating equations");
    best->starts = attempts;
    return *best;
}

Params empirical_standard_errors(std::span<const Params> estimates) {
    if (estimates.size() < 2) throw InvalidSpec("standard errors need at least two estimates");
    const double n = static_cast<double>(estimates.size());
    auto sd = [&](auto get) {
        double mean = 0.0;
        for (const auto& e : estimates) mean += get(e);
        mean /= n;
        double ss = 0.0;
        for (const auto& e : estimates) ss += (get(e) - mean) * (get(e) - mean);
        return std::sqrt(ss / (n - 1.0));
    };
    Params se;
    se.omega = sd([](const Params& q) { return q.omega; });
    se.rho = sd([](const Params& q) { return q.rho; });
    se.beta = sd([](const Params& q) { return q.beta; });
    se.p = sd([](const Params& q) { return q.p; });
    se.a = sd([](const Params& q) { return q.a; });
    se.c = estimates.front().c;
    return se;
}

BootstrapResult bootstrap_se(const ModelSpec& spec_hat, std::size_t n, std::size_t reps, std::uint64_t seed,
                             const FitConfig& cfg, unsigned jobs) {
    if (reps < 2) throw InvalidSpec("bootstrap needs reps >= 2");
    spec_hat.validate();
    const ModelStructure model{spec_hat.family, spec_hat.intensity.family, spec_hat.params.c};
    std::vector<std::optional<Params>> fits(reps);
    parallel_for(reps, jobs, [&](std::size_t i) {
        auto rng = RandomSource::derived(seed, i);
        try {
            const auto path = simulate_intensity(spec_hat.intensity, n, rng);
            const auto series = zm_sample(spec_hat.family, path, spec_hat.params, rng);
            const auto res = fit_model(series.counts, model, cfg);
            if (res.converged) fits[i] = res.params_hat;
        } catch (const Error&) {
        }
    });
    std::vector<Params> ok;
    for (const auto& f : fits)
        if (f) ok.push_back(*f);
    BootstrapResult out;
    out.completed = ok.size();
    out.failed = reps - ok.size();
    if (2 * out.failed > reps || ok.size() < 2)
        throw EstimationError("bootstrap: " + std::to_string(out.failed) + " of " + std::to_string(reps) +
                              " refits failed");
    out.se = empirical_standard_errors(ok);
    return out;
}

}  // namespace zmc
