#include <cmath>
#include <limits>
#include <stdexcept>

#include "epinet/kernels.hpp"
#include "epinet/likelihood.hpp"

namespace epinet {

namespace {

double xlogy(double n, double x) { return n == 0.0 ? 0.0 : n * std::log(x); }

double ratio(double n, double x) { return n == 0.0 ? 0.0 : n / x; }

double ratio2(double n, double x) { return n == 0.0 ? 0.0 : n / (x * x); }

void check(const Parameters& params, const SufficientStats& stats, const Covariates& cov) {
    if (cov.size() != stats.population) throw std::invalid_argument("covariate rows do not match the population");
    if (params.b_S.size() != cov.dim()) throw std::invalid_argument("b_S has the wrong dimension");
    if (stats.n_external > 0 && !params.external) {
        throw std::invalid_argument("data contain external onsets but no external parameters were given");
    }
    if (params.external && params.external->b_E.size() != cov.dim()) {
        throw std::invalid_argument("b_E has the wrong dimension");
    }
}

/// Per-individual quantities shared by the epidemic block.
struct Weights {
    std::vector<double> w;   // exp(x b_S)
    std::vector<double> F;   // A + e S
    std::vector<double> snap_a;
    std::vector<double> snap_s;
    std::vector<std::vector<double>> x;  // covariate columns

    Weights(const Parameters& p, const SufficientStats& st, const Covariates& cov) : x(cov.columns()) {
        const std::size_t n = st.population;
        const auto lp = cov.linear_predictor(p.b_S);
        w.resize(n);
        kernels::active().scaled_exp(lp.data(), nullptr, w.data(), n);
        F.resize(n);
        for (std::size_t i = 0; i < n; ++i) F[i] = st.pressure_a[i] + p.exp_eta * st.pressure_s[i];
        snap_a.assign(st.snapshot_a.begin(), st.snapshot_a.end());
        snap_s.assign(st.snapshot_s.begin(), st.snapshot_s.end());
    }
};

/// t_I weighted by exp(x b_E), used by the external block.
struct ExternalWeights {
    std::vector<double> tw;
    std::vector<std::vector<double>> x;

    ExternalWeights(const ExternalParams& e, const SufficientStats& st, const Covariates& cov) : x(cov.columns()) {
        const auto lp = cov.linear_predictor(e.b_E);
        tw.resize(st.population);
        kernels::active().scaled_exp(lp.data(), st.onset_time.data(), tw.data(), st.population);
    }
};

}  // namespace

LogLikelihood log_likelihood(const Parameters& params, const SufficientStats& stats, const Covariates& cov) {
    check(params, stats, cov);
    LogLikelihood out;
    const Weights wt(params, stats, cov);
    const double e = params.exp_eta;

    double epi = xlogy(static_cast<double>(stats.n_exposed), params.beta) +
                 xlogy(static_cast<double>(stats.n_manifest), params.phi) +
                 xlogy(static_cast<double>(stats.n_recovered), params.gamma) +
                 xlogy(static_cast<double>(stats.n_Is), params.p_s) +
                 xlogy(static_cast<double>(stats.n_Ia), 1.0 - params.p_s);
    for (std::size_t k = 0; k < stats.exposed_ids.size(); ++k) {
        const auto i = static_cast<std::size_t>(stats.exposed_ids[k]);
        const double a = wt.snap_a[k];
        const double s = wt.snap_s[k];
        if (a + s == 0.0) out.impossible = true;
        double lp = 0.0;
        for (std::size_t d = 0; d < cov.dim(); ++d) lp += params.b_S[d] * cov(i, d);
        epi += lp + std::log(a + s * e);
    }
    epi -= params.beta * kernels::dot(wt.w, wt.F);
    epi -= params.gamma * stats.integral_I + params.phi * stats.integral_E;
    out.epidemic = out.impossible ? -std::numeric_limits<double>::infinity() : epi;

    double net = 0.0;
    for (int s = 0; s < kLinkRateSlots; ++s) {
        const auto u = static_cast<std::size_t>(s);
        net += xlogy(static_cast<double>(stats.activations[u]), params.alpha.values[u]) -
               params.alpha.values[u] * stats.integral_disconnected[u];
        net += xlogy(static_cast<double>(stats.terminations[u]), params.omega.values[u]) -
               params.omega.values[u] * stats.integral_connected[u];
    }
    out.network = net;

    if (params.external) {
        const auto& ex = *params.external;
        const ExternalWeights ew(ex, stats, cov);
        double ext = xlogy(static_cast<double>(stats.n_external), ex.xi);
        for (int id : stats.external_ids) {
            for (std::size_t d = 0; d < cov.dim(); ++d) ext += ex.b_E[d] * cov(static_cast<std::size_t>(id), d);
        }
        double total = 0.0;
        for (double v : ew.tw) total += v;
        out.external = ext - ex.xi * total;
    }
    return out;
}

std::vector<double> score(const Parameters& params, const SufficientStats& stats, const Covariates& cov) {
    check(params, stats, cov);
    const ParameterLayout layout = ParameterLayout::of(params);
    std::vector<double> g(layout.size(), 0.0);
    const Weights wt(params, stats, cov);
    const double e = params.exp_eta;
    const double beta = params.beta;

    g[layout.beta()] = ratio(static_cast<double>(stats.n_exposed), beta) - kernels::dot(wt.w, wt.F);
    const auto rs = kernels::ratio_sums(wt.snap_a, wt.snap_s, e);
    g[layout.exp_eta()] = rs.value - beta * kernels::dot(wt.w, stats.pressure_s);
    g[layout.phi()] = ratio(static_cast<double>(stats.n_manifest), params.phi) - stats.integral_E;
    g[layout.gamma()] = ratio(static_cast<double>(stats.n_recovered), params.gamma) - stats.integral_I;
    g[layout.p_s()] = ratio(static_cast<double>(stats.n_Is), params.p_s) -
                      ratio(static_cast<double>(stats.n_Ia), 1.0 - params.p_s);
    for (std::size_t d = 0; d < cov.dim(); ++d) {
        double obs = 0.0;
        for (int id : stats.exposed_ids) obs += cov(static_cast<std::size_t>(id), d);
        g[layout.b_S(d)] = obs - beta * kernels::dot3(wt.w, wt.F, wt.x[d]);
    }
    for (int s = 0; s < kLinkRateSlots; ++s) {
        const auto u = static_cast<std::size_t>(s);
        g[layout.alpha(s)] = ratio(static_cast<double>(stats.activations[u]), params.alpha.values[u]) -
                             stats.integral_disconnected[u];
        g[layout.omega(s)] = ratio(static_cast<double>(stats.terminations[u]), params.omega.values[u]) -
                             stats.integral_connected[u];
    }
    if (params.external) {
        const auto& ex = *params.external;
        const ExternalWeights ew(ex, stats, cov);
        double total = 0.0;
        for (double v : ew.tw) total += v;
        g[layout.xi()] = ratio(static_cast<double>(stats.n_external), ex.xi) - total;
        for (std::size_t d = 0; d < cov.dim(); ++d) {
            double obs = 0.0;
            for (int id : stats.external_ids) obs += cov(static_cast<std::size_t>(id), d);
            g[layout.b_E(d)] = obs - ex.xi * kernels::dot(ew.tw, ew.x[d]);
        }
    }
    return g;
}

Eigen::MatrixXd hessian(const Parameters& params, const SufficientStats& stats, const Covariates& cov) {
    check(params, stats, cov);
    const ParameterLayout layout = ParameterLayout::of(params);
    const auto n = static_cast<Eigen::Index>(layout.size());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    const Weights wt(params, stats, cov);
    const double e = params.exp_eta;
    const double beta = params.beta;
    const auto idx = [](std::size_t k) { return static_cast<Eigen::Index>(k); };

    std::vector<double> wF(wt.w.size());
    for (std::size_t i = 0; i < wF.size(); ++i) wF[i] = wt.w[i] * wt.F[i];
    std::vector<double> wS(wt.w.size());
    for (std::size_t i = 0; i < wS.size(); ++i) wS[i] = wt.w[i] * stats.pressure_s[i];

    const auto b = idx(layout.beta());
    const auto ee = idx(layout.exp_eta());
    h(b, b) = -ratio2(static_cast<double>(stats.n_exposed), beta);
    h(b, ee) = h(ee, b) = -kernels::dot(wt.w, stats.pressure_s);
    h(ee, ee) = -kernels::ratio_sums(wt.snap_a, wt.snap_s, e).slope;
    for (std::size_t d = 0; d < cov.dim(); ++d) {
        const auto bd = idx(layout.b_S(d));
        h(b, bd) = h(bd, b) = -kernels::dot(wF, wt.x[d]);
        h(ee, bd) = h(bd, ee) = -beta * kernels::dot(wS, wt.x[d]);
        for (std::size_t l = d; l < cov.dim(); ++l) {
            const auto bl = idx(layout.b_S(l));
            h(bd, bl) = h(bl, bd) = -beta * kernels::dot3(wF, wt.x[d], wt.x[l]);
        }
    }
    h(idx(layout.phi()), idx(layout.phi())) = -ratio2(static_cast<double>(stats.n_manifest), params.phi);
    h(idx(layout.gamma()), idx(layout.gamma())) = -ratio2(static_cast<double>(stats.n_recovered), params.gamma);
    h(idx(layout.p_s()), idx(layout.p_s())) = -ratio2(static_cast<double>(stats.n_Is), params.p_s) -
                                              ratio2(static_cast<double>(stats.n_Ia), 1.0 - params.p_s);
    for (int s = 0; s < kLinkRateSlots; ++s) {
        const auto u = static_cast<std::size_t>(s);
        h(idx(layout.alpha(s)), idx(layout.alpha(s))) =
            -ratio2(static_cast<double>(stats.activations[u]), params.alpha.values[u]);
        h(idx(layout.omega(s)), idx(layout.omega(s))) =
            -ratio2(static_cast<double>(stats.terminations[u]), params.omega.values[u]);
    }
    if (params.external) {
        const auto& ex = *params.external;
        const ExternalWeights ew(ex, stats, cov);
        const auto xi = idx(layout.xi());
        h(xi, xi) = -ratio2(static_cast<double>(stats.n_external), ex.xi);
        for (std::size_t d = 0; d < cov.dim(); ++d) {
            const auto bd = idx(layout.b_E(d));
            h(xi, bd) = h(bd, xi) = -kernels::dot(ew.tw, ew.x[d]);
            for (std::size_t l = d; l < cov.dim(); ++l) {
                const auto bl = idx(layout.b_E(l));
                h(bd, bl) = h(bl, bd) = -ex.xi * kernels::dot3(ew.tw, ew.x[d], ew.x[l]);
            }
        }
    }
    return h;
}

Eigen::MatrixXd hessian_numeric(const Parameters& params, const SufficientStats& stats, const Covariates& cov,
                                double h) {
    const ParameterLayout layout = ParameterLayout::of(params);
    const auto theta = layout.flatten(params);
    const auto n = static_cast<Eigen::Index>(theta.size());
    Eigen::MatrixXd out(n, n);
    for (std::size_t j = 0; j < theta.size(); ++j) {
        const double step = h * (theta[j] != 0.0 ? std::abs(theta[j]) : 1.0);
        auto up = theta;
        auto down = theta;
        up[j] += step;
        down[j] -= step;
        const auto gu = score(layout.unflatten(up), stats, cov);
        const auto gd = score(layout.unflatten(down), stats, cov);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (gu[i] - gd[i]) / (2.0 * step);
        }
    }
    return out;
}

}  // namespace epinet
