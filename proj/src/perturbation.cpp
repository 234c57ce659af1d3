#include "perron/perturbation.hpp"

#include "perron/norms.hpp"

#include <cmath>

namespace perron {

Perturbation::Perturbation(PerturbationFn f, ScalarField lip, NormKind norm, std::string tag)
    : f_(std::move(f)), lip_(std::move(lip)), norm_(norm), tag_(std::move(tag)) {
    if (!f_ || !lip_)
        throw std::invalid_argument("Perturbation: f and lip must be callable");
}

Perturbation Perturbation::zero(int dim) {
    return Perturbation([dim](const BasePoint&, const Vec&) { return Vec::Zero(dim); },
                        [](const BasePoint&) { return 0.0; }, NormKind::MaxNorm, "zero");
}

Perturbation Perturbation::sine2d(ScalarField scale) {
    auto f = [scale](const BasePoint& w, const Vec& x) {
        double c = scale(w);
        Vec y(2);
        y[0] = c * 0.5 * std::sin(x[0] + x[1]);
        y[1] = c * 0.5 * std::sin(x[0]);
        return y;
    };
    auto lip = [scale](const BasePoint& w) { return scale(w); };
    return Perturbation(f, lip, NormKind::MaxNorm, "sine2d");
}

Vec Perturbation::eval(const BasePoint& w, const Vec& x) const {
    Vec y = f_(w, x);
    if (y.size() != x.size())
        throw std::invalid_argument("Perturbation: f changed the vector dimension");
    return y;
}

double Perturbation::lip(const BasePoint& w) const {
    double l = lip_(w);
    if (!(l >= 0.0) || !std::isfinite(l))
        throw std::domain_error("Perturbation: Lip(f_w) must be finite and nonnegative");
    return l;
}

double lip_scan(const Perturbation& p, const BasePoint& w,
                const std::vector<std::pair<Vec, Vec>>& pairs, double rel_tol) {
    double declared = p.lip(w);
    double worst = 0.0;
    for (const auto& [x, y] : pairs) {
        double dist = vector_norm(Vec(x - y), p.norm_kind());
        if (dist == 0.0)
            throw std::invalid_argument("lip_scan: pair with identical points");
        double q = vector_norm(Vec(p.eval(w, x) - p.eval(w, y)), p.norm_kind()) / dist;
        if (q > declared * (1.0 + rel_tol))
            throw LipViolation("lip_scan: sampled quotient " + std::to_string(q) +
                                   " exceeds declared Lip(f_w) = " + std::to_string(declared) +
                                   " at w = " + format_point(w),
                               x, y, q, declared);
        worst = std::max(worst, q);
    }
    return worst;
}

SigmaTau merge_sigma_tau(const SigmaTau& sigma_part, const SigmaTau& tau_part) {
    SigmaTau st = tau_part;
    st.sigma = sigma_part.sigma;
    st.sigma_horizon = sigma_part.sigma_horizon;
    return st;
}

namespace {

struct TermSeries {
    std::vector<double> terms; // one entry per k (discrete) or grid node (continuous)
    double step = 1.0;
};

// sigma integrand/summand values along the forward orbit of w.
TermSeries sigma_terms(const DichotomyBounds& bounds, const Perturbation& p, const BasePoint& w,
                       double t, double quad_step, bool discrete,
                       const std::vector<BasePoint>& orbit_cache) {
    TermSeries s;
    if (discrete) {
        int n = static_cast<int>(t);
        s.terms.resize(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) {
            const BasePoint& wk = orbit_cache[static_cast<std::size_t>(k)];
            const BasePoint& wk1 = orbit_cache[static_cast<std::size_t>(k) + 1];
            s.terms[static_cast<std::size_t>(k)] =
                bounds.alpha_plus(n - k - 1, wk1) * p.lip(wk) * bounds.alpha_plus(k, w);
        }
    } else {
        int n = std::max(1, static_cast<int>(std::llround(t / quad_step)));
        s.step = t / n;
        s.terms.resize(static_cast<std::size_t>(n) + 1);
        for (int i = 0; i <= n; ++i) {
            double sv = i * s.step;
            const BasePoint& ws = orbit_cache[static_cast<std::size_t>(i)];
            s.terms[static_cast<std::size_t>(i)] =
                bounds.alpha_plus(t - sv, ws) * p.lip(ws) * bounds.alpha_plus(sv, w);
        }
    }
    return s;
}

double trapezoid_total(const TermSeries& s) {
    if (s.terms.size() < 2) return 0.0;
    double sum = 0.5 * (s.terms.front() + s.terms.back());
    for (std::size_t i = 1; i + 1 < s.terms.size(); ++i) sum += s.terms[i];
    return sum * s.step;
}

} // namespace

SigmaTau compute_sigma(const DichotomyBounds& bounds, const Perturbation& p, const BasePoint& w,
                       double horizon, double quad_step) {
    if (!(horizon > 0.0))
        throw std::invalid_argument("compute_sigma: horizon must be positive");
    const DrivingSystem& ds = bounds.driving();
    const bool discrete = ds.time_domain() == TimeDomain::Discrete;
    if (discrete && !is_integer_time(horizon))
        throw std::invalid_argument("compute_sigma: discrete horizon must be an integer");
    if (!discrete && !(quad_step > 0.0))
        throw std::invalid_argument("compute_sigma: continuous case needs a quadrature step");

    SigmaTau st;
    st.sigma_horizon = horizon;

    if (discrete) {
        int n_max = static_cast<int>(horizon);
        std::vector<BasePoint> orbit(static_cast<std::size_t>(n_max) + 1);
        orbit[0] = w;
        for (int k = 1; k <= n_max; ++k) orbit[static_cast<std::size_t>(k)] = ds.evolve(1.0, orbit[static_cast<std::size_t>(k - 1)]);
        for (int n = 1; n <= n_max; ++n) {
            TermSeries s = sigma_terms(bounds, p, w, n, 0.0, true, orbit);
            double total = 0.0;
            for (double v : s.terms) total += v;
            st.sigma = std::max(st.sigma, total / bounds.alpha_plus(n, w));
        }
    } else {
        int n_max = std::max(1, static_cast<int>(std::llround(horizon / quad_step)));
        double h = horizon / n_max;
        std::vector<BasePoint> orbit(static_cast<std::size_t>(n_max) + 1);
        orbit[0] = w;
        for (int k = 1; k <= n_max; ++k) orbit[static_cast<std::size_t>(k)] = ds.evolve(k * h, w);
        for (int i = 1; i <= n_max; ++i) {
            double t = i * h;
            TermSeries s = sigma_terms(bounds, p, w, t, h, false, orbit);
            st.sigma = std::max(st.sigma, trapezoid_total(s) / bounds.alpha_plus(t, w));
        }
    }
    return st;
}

SigmaTau compute_tau(const DichotomyBounds& bounds, const Perturbation& p, const BasePoint& w,
                     double truncation, double quad_step) {
    if (!(truncation > 0.0))
        throw std::invalid_argument("compute_tau: truncation must be positive");
    const DrivingSystem& ds = bounds.driving();
    const bool discrete = ds.time_domain() == TimeDomain::Discrete;
    if (discrete && !is_integer_time(truncation))
        throw std::invalid_argument("compute_tau: discrete truncation must be an integer");
    if (!discrete && !(quad_step > 0.0))
        throw std::invalid_argument("compute_tau: continuous case needs a quadrature step");

    SigmaTau st;
    st.tau_truncation = truncation;

    // Per-term series; discrete terms alpha^-_{k+1,.} Lip_k alpha^+_k,
    // continuous nodes h * g(s_i) with g = alpha^-_s Lip_s alpha^+_s.
    std::vector<double> terms;
    if (discrete) {
        int k_max = static_cast<int>(truncation);
        BasePoint wk = w;
        terms.reserve(static_cast<std::size_t>(k_max) + 1);
        for (int k = 0; k <= k_max; ++k) {
            terms.push_back(bounds.alpha_minus(k + 1, w) * p.lip(wk) * bounds.alpha_plus(k, w));
            wk = ds.evolve(1.0, wk);
        }
        for (double v : terms) st.tau += v;
    } else {
        int n = std::max(1, static_cast<int>(std::llround(truncation / quad_step)));
        double h = truncation / n;
        std::vector<double> g(static_cast<std::size_t>(n) + 1);
        for (int i = 0; i <= n; ++i) {
            double s = i * h;
            BasePoint ws = ds.evolve(s, w);
            g[static_cast<std::size_t>(i)] = bounds.alpha_minus(s, w) * p.lip(ws) * bounds.alpha_plus(s, w);
        }
        double sum = 0.5 * (g.front() + g.back());
        for (int i = 1; i < n; ++i) sum += g[static_cast<std::size_t>(i)];
        st.tau = sum * h;
        terms.resize(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) terms[i] = g[i] * h;
    }

    // Geometric tail detection over the final quarter.
    std::size_t q_start = terms.size() - std::max<std::size_t>(2, terms.size() / 4);
    double r = 0.0;
    bool all_finite_decay = true;
    bool all_zero = true;
    for (std::size_t i = q_start; i + 1 < terms.size(); ++i) {
        if (terms[i + 1] != 0.0) all_zero = false;
        if (terms[i] == 0.0) {
            if (terms[i + 1] != 0.0) all_finite_decay = false;
            continue;
        }
        all_zero = false;
        r = std::max(r, terms[i + 1] / terms[i]);
    }
    if (terms.back() == 0.0 || all_zero) {
        st.tau_tail_bound = 0.0;
        st.tail_available = true;
    } else if (all_finite_decay && r < 1.0) {
        st.tau_tail_bound = terms.back() * r / (1.0 - r);
        st.tail_available = true;
    } else {
        st.tau_tail_bound = std::numeric_limits<double>::infinity();
        st.tail_available = false;
    }
    return st;
}

TemperednessReport temperedness_lambda(const ScalarField& K, double gamma, const BasePoint& w,
                                       double horizon, const DrivingSystem& ds) {
    if (!(gamma > 0.0))
        throw std::invalid_argument("temperedness_lambda: gamma must be positive");
    if (!(horizon > 0.0))
        throw std::invalid_argument("temperedness_lambda: horizon must be positive");
    TemperednessReport rep;
    rep.gamma = gamma;
    rep.horizon = horizon;

    const bool discrete = ds.time_domain() == TimeDomain::Discrete;
    double step = discrete ? 1.0 : horizon / std::max(1.0, std::ceil(horizon / 0.25));
    double t_max = discrete ? std::floor(horizon) : horizon;

    double lambda = K(w); // the t = 0 term is part of the sup
    double edge_max = 0.0; // max over the outer 20% of the window
    int n_steps = static_cast<int>(std::llround(t_max / step));
    for (int i = -n_steps; i <= n_steps; ++i) {
        double t = i * step;
        double v = std::exp(-gamma * std::abs(t)) * K(ds.evolve(discrete ? std::round(t) : t, w));
        lambda = std::max(lambda, v);
        if (std::abs(t) >= 0.8 * t_max) edge_max = std::max(edge_max, v);
    }
    rep.lambda = lambda;
    // value at the window edge still dominating the sup flags divergence
    rep.diverging = edge_max >= lambda * (1.0 - 1e-9) && lambda > K(w) * (1.0 + 1e-9);
    return rep;
}

} // namespace perron
