#include <algorithm>
#include <cmath>
#include <limits>

#include "epinet/estimator.hpp"
#include "epinet/kernels.hpp"

namespace epinet {

namespace {

std::optional<double> rate_ratio(const std::string& name, double num, double den, std::vector<std::string>& flags) {
    if (den > 0.0) {
        if (num == 0.0) flags.push_back(name + ": boundary estimate (zero count)");
        return num / den;
    }
    if (num == 0.0) {
        flags.push_back(name + ": undetermined (0/0)");
        return std::nullopt;
    }
    throw EstimationError(name + ": positive count with zero exposure time");
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

constexpr int kCoordinateWarmup = 5;
constexpr double kDivergentExpEta = 1e6;

bool small_change(double before, double after, double tol) {
    return std::abs(after - before) <= tol * std::max(std::abs(before), 1e-8);
}

double poisson_objective(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
    return (y.array() * eta.array() - eta.array().exp()).sum();
}

Eigen::MatrixXd design_of(const Covariates& cov, const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cov.dim()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t k = 0; k < cov.dim(); ++k) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = cov(rows[r], k);
    }
    return x;
}

/// Data views shared by the epidemic solver iterations.
struct EpidemicData {
    const SufficientStats& st;
    const Covariates& cov;
    std::vector<double> snap_a;
    std::vector<double> snap_s;
    std::vector<double> y;
    std::vector<std::vector<double>> cols;
    double total_s = 0.0;

    EpidemicData(const SufficientStats& s, const Covariates& c)
        : st(s), cov(c), snap_a(s.snapshot_a.begin(), s.snapshot_a.end()),
          snap_s(s.snapshot_s.begin(), s.snapshot_s.end()), y(s.population, 0.0), cols(c.columns()) {
        for (int id : s.exposed_ids) y[static_cast<std::size_t>(id)] = 1.0;
        for (double v : s.pressure_s) total_s += v;
    }

    std::vector<double> weights(const std::vector<double>& b) const {
        const auto lp = cov.linear_predictor(b);
        std::vector<double> w(lp.size());
        kernels::active().scaled_exp(lp.data(), nullptr, w.data(), w.size());
        return w;
    }

    std::vector<double> pressure(double e) const {
        std::vector<double> f(st.population);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = st.pressure_a[i] + e * st.pressure_s[i];
        return f;
    }

    std::vector<double> residuals(const EpidemicEstimate& est) const {
        const auto w = weights(est.b_S);
        const auto f = pressure(est.exp_eta);
        std::vector<double> r;
        r.push_back((st.n_exposed == 0 ? 0.0 : static_cast<double>(st.n_exposed) / est.beta) - kernels::dot(w, f));
        for (std::size_t k = 0; k < cov.dim(); ++k) {
            double obs = 0.0;
            for (int id : st.exposed_ids) obs += cov(static_cast<std::size_t>(id), k);
            r.push_back(obs - est.beta * kernels::dot3(w, f, cols[k]));
        }
        r.push_back(kernels::ratio_sums(snap_a, snap_s, est.exp_eta).value - est.beta * kernels::dot(w, st.pressure_s));
        return r;
    }

    /// Epidemic part of the log-likelihood that depends on (beta, b_S, exp_eta).
    double objective(const EpidemicEstimate& est) const {
        const auto w = weights(est.b_S);
        double obj = static_cast<double>(st.n_exposed) * std::log(est.beta) - est.beta * kernels::dot(w, pressure(est.exp_eta));
        for (std::size_t k = 0; k < st.exposed_ids.size(); ++k) {
            const auto i = static_cast<std::size_t>(st.exposed_ids[k]);
            for (std::size_t d = 0; d < cov.dim(); ++d) obj += est.b_S[d] * cov(i, d);
            obj += std::log(snap_a[k] + est.exp_eta * snap_s[k]);
        }
        return obj;
    }

    /// One safeguarded Newton step on (log beta, b_S, log exp_eta) over the free
    /// coordinates. Returns false (leaving `est` untouched) when the Hessian is
    /// not negative definite or no ascent is found along the step.
    bool newton_step(EpidemicEstimate& est, bool free_beta, bool free_b, bool free_eta) const {
        const std::size_t dim = cov.dim();
        std::vector<int> map;  // position in (u, v..., z) of each free coordinate
        if (free_beta) map.push_back(0);
        if (free_b) {
            for (std::size_t k = 0; k < dim; ++k) map.push_back(static_cast<int>(1 + k));
        }
        if (free_eta) map.push_back(static_cast<int>(1 + dim));
        if (map.size() < 2) return false;

        const std::size_t n = 2 + dim;
        const auto w = weights(est.b_S);
        const double b = est.beta;
        const double e = est.exp_eta;
        Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        Eigen::VectorXd xi(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < st.population; ++i) {
            const double wf = b * w[i] * (st.pressure_a[i] + e * st.pressure_s[i]);
            const double ws = b * e * w[i] * st.pressure_s[i];
            if (wf == 0.0) continue;
            xi(0) = 1.0;
            for (std::size_t k = 0; k < dim; ++k) xi(static_cast<Eigen::Index>(1 + k)) = cov(i, k);
            const auto z = static_cast<Eigen::Index>(1 + dim);
            xi(z) = 0.0;
            g.head(z) -= wf * xi.head(z);
            h.topLeftCorner(z, z) -= wf * xi.head(z) * xi.head(z).transpose();
            h.block(0, z, z, 1) -= ws * xi.head(z);
            g(z) -= ws;
            h(z, z) -= ws;
        }
        const auto z = static_cast<Eigen::Index>(1 + dim);
        h.block(z, 0, 1, z) = h.block(0, z, z, 1).transpose();
        g(0) += static_cast<double>(st.n_exposed);
        for (int id : st.exposed_ids) {
            for (std::size_t k = 0; k < dim; ++k) g(static_cast<Eigen::Index>(1 + k)) += cov(static_cast<std::size_t>(id), k);
        }
        for (std::size_t k = 0; k < snap_s.size(); ++k) {
            const double den = snap_a[k] + e * snap_s[k];
            g(z) += e * snap_s[k] / den;
            h(z, z) += e * snap_s[k] * snap_a[k] / (den * den);
        }

        const auto m = static_cast<Eigen::Index>(map.size());
        Eigen::VectorXd gs(m);
        Eigen::MatrixXd hs(m, m);
        for (Eigen::Index r = 0; r < m; ++r) {
            gs(r) = g(map[static_cast<std::size_t>(r)]);
            for (Eigen::Index c = 0; c < m; ++c) hs(r, c) = h(map[static_cast<std::size_t>(r)], map[static_cast<std::size_t>(c)]);
        }
        const Eigen::LLT<Eigen::MatrixXd> llt(-hs);
        if (llt.info() != Eigen::Success) return false;
        const Eigen::VectorXd step = llt.solve(gs);
        if (!step.allFinite()) return false;

        const double base = objective(est);
        double t = 1.0;
        for (int half = 0; half < 30; ++half, t *= 0.5) {
            EpidemicEstimate trial = est;
            for (Eigen::Index r = 0; r < m; ++r) {
                const int c = map[static_cast<std::size_t>(r)];
                const double delta = t * step(r);
                if (c == 0) trial.beta = est.beta * std::exp(delta);
                else if (c == static_cast<int>(1 + dim)) trial.exp_eta = est.exp_eta * std::exp(delta);
                else trial.b_S[static_cast<std::size_t>(c - 1)] += delta;
            }
            const double obj = objective(trial);
            if (std::isfinite(obj) && obj >= base) {
                est = trial;
                return true;
            }
        }
        return false;
    }
};

/// Root of sum s/(a + s e) = rhs on (0, inf); the left side is decreasing in e.
double solve_exp_eta(const EpidemicData& d, double rhs, double start, bool& boundary) {
    boundary = false;
    const auto h = [&](double e) { return kernels::ratio_sums(d.snap_a, d.snap_s, e).value - rhs; };
    bool infinite_at_zero = false;
    double at_zero = 0.0;
    for (std::size_t k = 0; k < d.snap_s.size(); ++k) {
        if (d.snap_s[k] == 0.0) continue;
        if (d.snap_a[k] == 0.0) infinite_at_zero = true;
        else at_zero += d.snap_s[k] / d.snap_a[k];
    }
    if (!infinite_at_zero && at_zero <= rhs) {
        boundary = true;
        return 0.0;
    }
    double lo = 0.0;
    double hi = std::max(start, 1.0);
    while (h(hi) > 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) throw EstimationError("exp_eta: root bracket diverged");
    }
    double e = std::clamp(start, lo, hi);
    if (e <= lo || e >= hi) e = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const auto rs = kernels::ratio_sums(d.snap_a, d.snap_s, e);
        const double val = rs.value - rhs;
        if (val == 0.0) return e;
        if (val > 0.0) lo = e;
        else hi = e;
        // Newton step (h'(e) = -slope), falling back to bisection outside the bracket.
        double next = rs.slope > 0.0 ? e + val / rs.slope : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - e) <= 1e-15 * std::max(e, 1e-300)) return next;
        e = next;
        if (hi - lo <= 1e-15 * hi) return e;
    }
    return e;
}

}  // namespace

ClosedForm closed_form_mles(const SufficientStats& st) {
    ClosedForm out;
    out.phi = rate_ratio("phi", static_cast<double>(st.n_manifest), st.integral_E, out.flags);
    out.gamma = rate_ratio("gamma", static_cast<double>(st.n_recovered), st.integral_I, out.flags);
    const double n_i = static_cast<double>(st.n_infectives());
    if (n_i > 0.0) {
        out.p_s = static_cast<double>(st.n_Is) / n_i;
        if (st.n_Is == 0 || st.n_Ia == 0) out.flags.push_back("p_s: boundary estimate");
    } else {
        out.flags.push_back("p_s: undetermined (no infectives)");
    }
    ParameterLayout names(0, false);
    for (int s = 0; s < kLinkRateSlots; ++s) {
        const auto u = static_cast<std::size_t>(s);
        out.alpha[u] = rate_ratio(names.name(names.alpha(s)), static_cast<double>(st.activations[u]),
                                  st.integral_disconnected[u], out.flags);
        out.omega[u] = rate_ratio(names.name(names.omega(s)), static_cast<double>(st.terminations[u]),
                                  st.integral_connected[u], out.flags);
    }
    return out;
}

PoissonFit poisson_offset_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const Eigen::VectorXd& o,
                              const Eigen::VectorXd* start, double tol, int max_iter) {
    if (y.size() != x.rows() || o.size() != x.rows()) throw std::invalid_argument("poisson fit: size mismatch");
    if ((y.array() < 0.0).any()) throw std::invalid_argument("poisson fit: negative response");
    PoissonFit fit;
    fit.coef = start ? *start : Eigen::VectorXd::Zero(x.cols());
    if (x.cols() == 0) return fit;
    if (y.sum() == 0.0) throw EstimationError("poisson fit: all responses are zero");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < x.cols()) throw EstimationError("poisson fit: design matrix is rank deficient");

    Eigen::VectorXd eta = x * fit.coef + o;
    double obj = poisson_objective(y, eta);
    for (int it = 1; it <= max_iter; ++it) {
        const Eigen::VectorXd mu = eta.array().exp();
        const Eigen::VectorXd g = x.transpose() * (y - mu);
        fit.max_score = g.cwiseAbs().maxCoeff();
        fit.iterations = it - 1;
        if (fit.max_score < tol) return fit;
        const Eigen::MatrixXd info = x.transpose() * mu.asDiagonal() * x;
        const Eigen::VectorXd step = info.ldlt().solve(g);
        double t = 1.0;
        Eigen::VectorXd trial;
        double trial_obj = -std::numeric_limits<double>::infinity();
        for (int half = 0; half < 60; ++half, t *= 0.5) {
            trial = fit.coef + t * step;
            trial_obj = poisson_objective(y, x * trial + o);
            if (std::isfinite(trial_obj) && trial_obj >= obj - 1e-12 * std::abs(obj)) break;
        }
        if (!std::isfinite(trial_obj) || !trial.allFinite() || trial.cwiseAbs().maxCoeff() > 1e3) {
            throw EstimationError("poisson fit: diverged (possible separation)",
                                  std::vector<double>(fit.coef.data(), fit.coef.data() + fit.coef.size()),
                                  std::vector<double>(g.data(), g.data() + g.size()));
        }
        fit.coef = trial;
        eta = x * fit.coef + o;
        obj = trial_obj;
    }
    const Eigen::VectorXd g = x.transpose() * (y - Eigen::VectorXd(eta.array().exp()));
    fit.max_score = g.cwiseAbs().maxCoeff();
    fit.iterations = max_iter;
    if (fit.max_score < tol) return fit;
    throw EstimationError("poisson fit: no convergence",
                          std::vector<double>(fit.coef.data(), fit.coef.data() + fit.coef.size()),
                          std::vector<double>(g.data(), g.data() + g.size()));
}

EpidemicEstimate default_epidemic_init(const SufficientStats& st, std::size_t dim) {
    EpidemicEstimate init;
    init.b_S.assign(dim, 0.0);
    init.exp_eta = 1.0;
    double total = 0.0;
    for (std::size_t i = 0; i < st.population; ++i) total += st.pressure_a[i] + st.pressure_s[i];
    init.beta = total > 0.0 ? static_cast<double>(st.n_exposed) / total : 0.0;
    return init;
}

EpidemicEstimate solve_beta_bS_eta(const SufficientStats& st, const Covariates& cov, const EpidemicEstimate& init,
                                   const SolverOptions& opt) {
    if (init.b_S.size() != cov.dim()) throw std::invalid_argument("b_S init has the wrong dimension");
    if (st.n_exposed == 0) throw EstimationError("no exposure events: beta, b_S and exp_eta cannot be estimated");
    const EpidemicData d(st, cov);
    EpidemicEstimate est = init;
    est.flags.clear();

    const bool eta_identified = d.total_s > 0.0;
    if (!eta_identified && !opt.fix_exp_eta) est.flags.push_back("exp_eta: unidentified (no Is exposure pressure)");
    bool eta_boundary = false;

    std::vector<std::size_t> rows;
    std::vector<std::size_t> all_rows;
    for (std::size_t i = 0; i < st.population; ++i) all_rows.push_back(i);
    const Eigen::MatrixXd x_all = design_of(cov, all_rows);

    for (int it = 1; it <= opt.max_iter; ++it) {
        const EpidemicEstimate before = est;
        if (!opt.fix_beta) {
            const auto w = d.weights(est.b_S);
            est.beta = static_cast<double>(st.n_exposed) / kernels::dot(w, d.pressure(est.exp_eta));
        }
        if (!opt.fix_b_S && cov.dim() > 0) {
            const auto f = d.pressure(est.exp_eta);
            rows.clear();
            for (std::size_t i = 0; i < st.population; ++i) {
                if (f[i] > 0.0) rows.push_back(i);
                else if (d.y[i] > 0.0) throw EstimationError("exposed individual with zero exposure pressure");
            }
            Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
            Eigen::VectorXd o(static_cast<Eigen::Index>(rows.size()));
            Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cov.dim()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                const auto ri = static_cast<Eigen::Index>(r);
                y(ri) = d.y[rows[r]];
                o(ri) = std::log(est.beta) + std::log(f[rows[r]]);
                x.row(ri) = x_all.row(static_cast<Eigen::Index>(rows[r]));
            }
            const Eigen::VectorXd start = Eigen::Map<const Eigen::VectorXd>(est.b_S.data(), static_cast<Eigen::Index>(est.b_S.size()));
            const auto fit = poisson_offset_fit(y, x, o, &start);
            est.b_S.assign(fit.coef.data(), fit.coef.data() + fit.coef.size());
        }
        if (!opt.fix_exp_eta && eta_identified) {
            const auto w = d.weights(est.b_S);
            const double rhs = est.beta * kernels::dot(w, st.pressure_s);
            est.exp_eta = solve_exp_eta(d, rhs, est.exp_eta, eta_boundary);
        }
        if (it > kCoordinateWarmup && !eta_boundary) {
            d.newton_step(est, !opt.fix_beta, !opt.fix_b_S && cov.dim() > 0, !opt.fix_exp_eta && eta_identified);
        }
        if (est.exp_eta > kDivergentExpEta) {
            throw EstimationError("exp_eta: estimate diverges (likelihood increases without bound)",
                                  {est.beta, est.exp_eta}, d.residuals(est));
        }

        est.iterations = it;
        est.residuals = d.residuals(est);
        bool moved = !small_change(before.beta, est.beta, opt.tol) || !small_change(before.exp_eta, est.exp_eta, opt.tol);
        for (std::size_t k = 0; k < est.b_S.size(); ++k) moved = moved || !small_change(before.b_S[k], est.b_S[k], opt.tol);
        double worst = 0.0;
        if (!opt.fix_beta) worst = std::max(worst, std::abs(est.residuals.front()));
        if (!opt.fix_b_S) {
            for (std::size_t k = 0; k < cov.dim(); ++k) worst = std::max(worst, std::abs(est.residuals[1 + k]));
        }
        if (!opt.fix_exp_eta && eta_identified && !eta_boundary) worst = std::max(worst, std::abs(est.residuals.back()));
        if (!moved && worst < 1e-6) {
            if (eta_boundary) est.flags.push_back("exp_eta: boundary estimate (0)");
            return est;
        }
    }
    std::vector<double> last{est.beta};
    last.insert(last.end(), est.b_S.begin(), est.b_S.end());
    last.push_back(est.exp_eta);
    throw EstimationError("beta/b_S/exp_eta solver did not converge", last, est.residuals);
}

ExternalEstimate solve_external(const SufficientStats& st, const Covariates& cov,
                                const std::optional<ExternalParams>& init, const SolverOptions& opt) {
    ExternalEstimate est;
    est.params = init.value_or(ExternalParams{0.0, std::vector<double>(cov.dim(), 0.0)});
    if (est.params.b_E.size() != cov.dim()) throw std::invalid_argument("b_E init has the wrong dimension");
    if (st.n_external == 0) {
        est.params.xi = 0.0;
        est.flags.push_back("xi: boundary estimate (no external cases)");
        if (cov.dim() > 0) est.flags.push_back("b_E: undetermined (no external cases)");
        est.residuals.assign(1 + cov.dim(), 0.0);
        return est;
    }
    const auto cols = cov.columns();
    std::vector<double> y(st.population, 0.0);
    for (int id : st.external_ids) y[static_cast<std::size_t>(id)] = 1.0;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < st.population; ++i) {
        if (st.onset_time[i] > 0.0) rows.push_back(i);
        else if (y[i] > 0.0) throw EstimationError("external case with zero time at risk");
    }
    const Eigen::MatrixXd x = design_of(cov, rows);
    Eigen::VectorXd yv(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) yv(static_cast<Eigen::Index>(r)) = y[rows[r]];

    const auto weighted_time = [&](const std::vector<double>& b) {
        const auto lp = cov.linear_predictor(b);
        std::vector<double> tw(st.population);
        kernels::active().scaled_exp(lp.data(), st.onset_time.data(), tw.data(), tw.size());
        return tw;
    };
    const auto residuals = [&](const ExternalParams& p) {
        const auto tw = weighted_time(p.b_E);
        double total = 0.0;
        for (double v : tw) total += v;
        std::vector<double> r{static_cast<double>(st.n_external) / p.xi - total};
        for (std::size_t k = 0; k < cov.dim(); ++k) {
            double obs = 0.0;
            for (int id : st.external_ids) obs += cov(static_cast<std::size_t>(id), k);
            r.push_back(obs - p.xi * kernels::dot(tw, cols[k]));
        }
        return r;
    };

    for (int it = 1; it <= opt.max_iter; ++it) {
        const ExternalParams before = est.params;
        double total = 0.0;
        for (double v : weighted_time(est.params.b_E)) total += v;
        est.params.xi = static_cast<double>(st.n_external) / total;
        if (cov.dim() > 0) {
            Eigen::VectorXd o(static_cast<Eigen::Index>(rows.size()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                o(static_cast<Eigen::Index>(r)) = std::log(est.params.xi) + std::log(st.onset_time[rows[r]]);
            }
            const Eigen::VectorXd start =
                Eigen::Map<const Eigen::VectorXd>(est.params.b_E.data(), static_cast<Eigen::Index>(cov.dim()));
            const auto fit = poisson_offset_fit(yv, x, o, &start);
            est.params.b_E.assign(fit.coef.data(), fit.coef.data() + fit.coef.size());
        }
        est.iterations = it;
        est.residuals = residuals(est.params);
        bool moved = !small_change(before.xi, est.params.xi, opt.tol);
        for (std::size_t k = 0; k < cov.dim(); ++k) moved = moved || !small_change(before.b_E[k], est.params.b_E[k], opt.tol);
        if (!moved && max_abs(est.residuals) < 1e-6) return est;
    }
    std::vector<double> last{est.params.xi};
    last.insert(last.end(), est.params.b_E.begin(), est.params.b_E.end());
    throw EstimationError("xi/b_E solver did not converge", last, est.residuals);
}

FitResult fit_complete(const SufficientStats& st, const Covariates& cov, const FitOptions& opt) {
    FitResult out;
    Parameters& p = out.params;
    const std::size_t dim = cov.dim();
    const bool fixed_rest = opt.only_eta_and_b_S;
    if (fixed_rest && !opt.reference) throw std::invalid_argument("fixed-parameter fit needs reference values");
    const Parameters* ref = opt.reference ? &*opt.reference : nullptr;

    if (fixed_rest) {
        p = *ref;
    } else {
        const ClosedForm cf = closed_form_mles(st);
        out.flags = cf.flags;
        const auto pick = [&](const std::optional<double>& v, double fallback) { return v.value_or(fallback); };
        p.phi = pick(cf.phi, ref ? ref->phi : 0.0);
        p.gamma = pick(cf.gamma, ref ? ref->gamma : 0.0);
        p.p_s = pick(cf.p_s, ref ? ref->p_s : 0.5);
        for (std::size_t s = 0; s < static_cast<std::size_t>(kLinkRateSlots); ++s) {
            p.alpha.values[s] = pick(cf.alpha[s], ref ? ref->alpha.values[s] : 0.0);
            p.omega.values[s] = pick(cf.omega[s], ref ? ref->omega.values[s] : 0.0);
        }
    }

    EpidemicEstimate init = default_epidemic_init(st, dim);
    SolverOptions so = opt.solver;
    if (fixed_rest) {
        init.beta = ref->beta;
        so.fix_beta = true;
    }
    if (st.n_exposed == 0) {
        p.beta = fixed_rest ? ref->beta : 0.0;
        p.b_S = fixed_rest ? ref->b_S : init.b_S;
        p.exp_eta = fixed_rest ? ref->exp_eta : init.exp_eta;
        if (!fixed_rest) out.flags.push_back("beta: boundary estimate (no exposures)");
        out.flags.push_back("b_S: undetermined (no exposures)");
        out.flags.push_back("exp_eta: undetermined (no exposures)");
    } else {
        const auto est = solve_beta_bS_eta(st, cov, init, so);
        p.beta = est.beta;
        p.b_S = est.b_S;
        p.exp_eta = est.exp_eta;
        out.iterations = est.iterations;
        out.flags.insert(out.flags.end(), est.flags.begin(), est.flags.end());
    }

    if (opt.external || st.n_external > 0) {
        if (fixed_rest && ref->external) {
            p.external = ref->external;
        } else {
            const auto ext = solve_external(st, cov, std::nullopt, opt.solver);
            p.external = ext.params;
            out.flags.insert(out.flags.end(), ext.flags.begin(), ext.flags.end());
        }
    } else {
        p.external.reset();
    }
    out.score = score(p, st, cov);
    return out;
}

}  // namespace epinet
