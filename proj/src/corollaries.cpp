#include "perron/corollaries.hpp"

#include "perron/cocycle.hpp"

#include <cmath>
#include <limits>

namespace perron {

CorollaryKind corollary_from_id(const std::string& id) {
    if (id == "c32") return CorollaryKind::C32;
    if (id == "c33") return CorollaryKind::C33;
    if (id == "c34") return CorollaryKind::C34;
    if (id == "c42") return CorollaryKind::C42;
    if (id == "c43") return CorollaryKind::C43;
    if (id == "c44") return CorollaryKind::C44;
    throw std::invalid_argument("unknown corollary id: " + id);
}

std::string corollary_id(CorollaryKind kind) {
    switch (kind) {
        case CorollaryKind::C32: return "c32";
        case CorollaryKind::C33: return "c33";
        case CorollaryKind::C34: return "c34";
        case CorollaryKind::C42: return "c42";
        case CorollaryKind::C43: return "c43";
        case CorollaryKind::C44: return "c44";
    }
    throw std::logic_error("corollary_id: bad kind");
}

bool corollary_is_discrete(CorollaryKind kind) {
    return kind == CorollaryKind::C42 || kind == CorollaryKind::C43 || kind == CorollaryKind::C44;
}

namespace {

constexpr double kMarginTol = 1e-9;

struct Checker {
    HypothesisReport rep;

    Checker() { rep.checks.reserve(32); } // add() hands out stable references

    HypothesisCheck& add(const std::string& name) {
        if (rep.checks.size() == rep.checks.capacity())
            throw std::logic_error("Checker: too many hypothesis checks");
        rep.checks.push_back(HypothesisCheck{name, false, std::numeric_limits<double>::infinity(), {}});
        return rep.checks.back();
    }

    // fold a per-sample margin into a check, keeping the worst witness
    static void fold(HypothesisCheck& c, double margin, const std::string& witness) {
        if (margin < c.margin) {
            c.margin = margin;
            c.witness = witness;
        }
    }

    void finish() {
        rep.pass = true;
        for (auto& c : rep.checks) {
            c.pass = c.margin >= -kMarginTol;
            rep.pass = rep.pass && c.pass;
        }
    }
};

// Window sum/integral of G over [-H, H] along the orbit of w.
double g_window(const CorollaryData& d, const BasePoint& w, bool discrete,
                const CorollaryHorizons& hz) {
    const DrivingSystem& ds = *d.driving;
    if (discrete) {
        double sum = 0.0;
        int H = static_cast<int>(hz.g_horizon);
        for (int k = -H; k <= H; ++k) sum += d.G(ds.evolve(k, w));
        return sum;
    }
    int n = std::max(2, static_cast<int>(std::ceil(2.0 * hz.g_horizon / hz.quad_step)));
    double h = 2.0 * hz.g_horizon / n;
    double sum = 0.5 * (d.G(ds.evolve(-hz.g_horizon, w)) + d.G(ds.evolve(hz.g_horizon, w)));
    for (int i = 1; i < n; ++i) sum += d.G(ds.evolve(-hz.g_horizon + i * h, w));
    return sum * h;
}

// Finite-horizon surrogate of value(t) -> 0: non-increasing over the last
// half of the window and below tol at the horizon.
double decay_margin(const std::function<double(double)>& value, bool discrete,
                    const CorollaryHorizons& hz, std::string& note) {
    int n = discrete ? static_cast<int>(hz.decay_horizon) : 40;
    double step = discrete ? 1.0 : hz.decay_horizon / n;
    std::vector<double> v(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) v[static_cast<std::size_t>(i)] = value(i * step);
    bool non_increasing = true;
    for (std::size_t i = v.size() / 2; i + 1 < v.size(); ++i)
        if (v[i + 1] > v[i] * (1.0 + 1e-12)) non_increasing = false;
    note = "value " + std::to_string(v.back()) + " at horizon " + std::to_string(n * step);
    if (!non_increasing) return -1.0;
    return (hz.decay_tol - v.back()) / hz.decay_tol;
}

double central_diff(const std::function<double(double)>& f, double t, double step_scale) {
    double h = step_scale * std::max(1.0, std::abs(t));
    return (f(t + h) - f(t - h)) / (2.0 * h);
}

} // namespace

HypothesisReport check_corollary(CorollaryKind kind, const CorollaryData& d,
                                 const std::vector<BasePoint>& samples,
                                 const CorollaryHorizons& hz) {
    if (!d.driving) throw std::invalid_argument("check_corollary: missing driving system");
    if (!d.K || !d.a || !d.b || !d.G || !d.lip)
        throw std::invalid_argument("check_corollary: K, a, b, G, lip are all required");
    const bool needs_gamma = kind == CorollaryKind::C32 || kind == CorollaryKind::C42;
    if (needs_gamma && !d.gamma)
        throw std::invalid_argument("check_corollary: this corollary needs gamma");
    if (samples.empty())
        throw std::invalid_argument("check_corollary: no sample points");
    const bool discrete = corollary_is_discrete(kind);
    if (discrete != (d.driving->time_domain() == TimeDomain::Discrete))
        throw std::invalid_argument("check_corollary: corollary/driving time-domain mismatch");

    const DrivingSystem& ds = *d.driving;
    Checker ck;
    ck.rep.kind = kind;
    ck.rep.horizons = hz;

    {
        auto& c = ck.add("delta in ]0,1/4[");
        Checker::fold(c, std::min(d.delta, 0.25 - d.delta) / 0.25,
                      "delta = " + std::to_string(d.delta));
    }
    {
        auto& c = ck.add("K >= 1");
        for (const auto& w : samples) Checker::fold(c, d.K(w) - 1.0, format_point(w));
    }
    {
        auto& c = ck.add("sum/integral of G <= 1");
        for (const auto& w : samples)
            Checker::fold(c, 1.0 - g_window(d, w, discrete, hz), format_point(w));
    }

    // Per-sample lambda for the tempered kinds, reused by the Lip ceiling.
    std::vector<double> lambdas(samples.size(), 1.0);
    if (needs_gamma) {
        auto& pos = ck.add("gamma > 0");
        auto& inv = ck.add("a, b, gamma theta-invariant");
        auto& sgn = ck.add("a + b < 0");
        auto& sgn2 = ck.add("a + b + gamma < 0");
        auto& tempered = ck.add("K tempered (lambda finite over window)");
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto& w = samples[i];
            Checker::fold(pos, d.gamma(w), format_point(w));
            double drift = 0.0;
            BasePoint w1 = ds.evolve(discrete ? 1.0 : 1.0, w);
            drift = std::max({std::abs(d.a(w1) - d.a(w)), std::abs(d.b(w1) - d.b(w)),
                              std::abs(d.gamma(w1) - d.gamma(w))});
            Checker::fold(inv, 1e-9 - drift, format_point(w));
            Checker::fold(sgn, -(d.a(w) + d.b(w)), format_point(w));
            Checker::fold(sgn2, -(d.a(w) + d.b(w) + d.gamma(w)), format_point(w));
            TemperednessReport tr = temperedness_lambda(d.K, d.gamma(w), w, hz.temper_horizon, ds);
            lambdas[i] = tr.lambda;
            Checker::fold(tempered, tr.diverging ? -1.0 : 1.0,
                          "lambda = " + std::to_string(tr.lambda) + " at " + format_point(w));
        }
    }

    auto fold_lip_ceiling = [&](HypothesisCheck& c, const BasePoint& w, double ceiling) {
        double lip = d.lip(w);
        double scale = std::max(ceiling, 1e-300);
        Checker::fold(c, (ceiling - lip) / scale,
                      "lip = " + std::to_string(lip) + ", ceiling = " + std::to_string(ceiling) +
                          " at " + format_point(w));
    };

    switch (kind) {
        case CorollaryKind::C32: {
            auto& c = ck.add("Lip(f_w) <= delta/K(w) * min{G, |a+b+gamma|/lambda}");
            for (std::size_t i = 0; i < samples.size(); ++i) {
                const auto& w = samples[i];
                double ceiling = d.delta / d.K(w) *
                                 std::min(d.G(w), std::abs(d.a(w) + d.b(w) + d.gamma(w)) / lambdas[i]);
                fold_lip_ceiling(c, w, ceiling);
            }
            break;
        }
        case CorollaryKind::C33: {
            auto& slope = ck.add("d_w(0) > K(w)(a(w)+b(w))");
            auto& lipc = ck.add("Lip(f_w) <= delta/K(w) * min{G, (d_w(0)/K - (a+b))/K}");
            auto& decay = ck.add("K(theta^t w) e^{int (a+b)} -> 0 (finite-horizon surrogate)");
            for (const auto& w : samples) {
                auto K_along = [&](double t) { return d.K(ds.evolve(t, w)); };
                double d0 = central_diff(K_along, 0.0, hz.fd_step_scale);
                double ab = d.a(w) + d.b(w);
                Checker::fold(slope, d0 - d.K(w) * ab,
                              "d_w(0) = " + std::to_string(d0) + " at " + format_point(w));
                double ceiling = d.delta / d.K(w) *
                                 std::min(d.G(w), (d0 / d.K(w) - ab) / d.K(w));
                fold_lip_ceiling(lipc, w, ceiling);
                auto value = [&](double t) {
                    double integral = 0.0;
                    int n = std::max(1, static_cast<int>(std::ceil(t / hz.quad_step)));
                    double h = t / n;
                    auto ab_at = [&](double s) {
                        BasePoint ws = ds.evolve(s, w);
                        return d.a(ws) + d.b(ws);
                    };
                    if (t > 0.0) {
                        integral = 0.5 * (ab_at(0.0) + ab_at(t));
                        for (int j = 1; j < n; ++j) integral += ab_at(j * h);
                        integral *= h;
                    }
                    return d.K(ds.evolve(t, w)) * std::exp(integral);
                };
                std::string note;
                double m = decay_margin(value, false, hz, note);
                Checker::fold(decay, m, note + " from " + format_point(w));
            }
            break;
        }
        case CorollaryKind::C34:
        case CorollaryKind::C44: {
            auto& apos = ck.add("a > 0");
            auto& bpos = ck.add("b > 0");
            const bool cont = kind == CorollaryKind::C34;
            auto& mono = ck.add(cont ? "H_w'(s) > 0" : "H_w non-decreasing");
            auto& lipc = ck.add(cont ? "Lip(f_w) <= delta/K(w) * min{G, a b H_w'(0)}"
                                     : "Lip(f_w) <= delta * min{a(w) b(theta w)/K(theta w) * (H_{theta w}(0)-H_w(0)), G}");
            auto& decay = ck.add("K/(a b) (theta^t w) -> 0 (finite-horizon surrogate)");
            for (const auto& w : samples) {
                Checker::fold(apos, d.a(w), format_point(w));
                Checker::fold(bpos, d.b(w), format_point(w));
                auto H = [&](double s) {
                    BasePoint ws = ds.evolve(s, w);
                    return -1.0 / (d.a(ws) * d.b(ws) * d.K(ws));
                };
                if (cont) {
                    for (int j = -8; j <= 8; ++j) {
                        double s = 0.5 * j;
                        Checker::fold(mono, central_diff(H, s, hz.fd_step_scale),
                                      "H'(s), s = " + std::to_string(s) + " from " + format_point(w));
                    }
                    double ceiling = d.delta / d.K(w) *
                                     std::min(d.G(w), d.a(w) * d.b(w) * central_diff(H, 0.0, hz.fd_step_scale));
                    fold_lip_ceiling(lipc, w, ceiling);
                } else {
                    for (int n = -8; n <= 8; ++n)
                        Checker::fold(mono, H(n + 1) - H(n),
                                      "H(n+1)-H(n), n = " + std::to_string(n) + " from " + format_point(w));
                    BasePoint w1 = ds.evolve(1.0, w);
                    double ceiling = d.delta *
                                     std::min(d.a(w) * d.b(w1) / d.K(w1) * (H(1.0) - H(0.0)), d.G(w));
                    fold_lip_ceiling(lipc, w, ceiling);
                }
                auto value = [&](double t) {
                    BasePoint wt = ds.evolve(cont ? t : std::round(t), w);
                    return d.K(wt) / (d.a(wt) * d.b(wt));
                };
                std::string note;
                double m = decay_margin(value, !cont, hz, note);
                Checker::fold(decay, m, note + " from " + format_point(w));
            }
            break;
        }
        case CorollaryKind::C42: {
            auto& c = ck.add("Lip(f_w) <= delta/K(theta w) * min{e^a G, e^b (1-e^{a+b+gamma})/lambda}");
            for (std::size_t i = 0; i < samples.size(); ++i) {
                const auto& w = samples[i];
                double aw = d.a(w), bw = d.b(w), gw = d.gamma(w);
                double k1 = d.K(ds.evolve(1.0, w));
                double ceiling = d.delta / k1 *
                                 std::min(std::exp(aw) * d.G(w),
                                          std::exp(bw) * (1.0 - std::exp(aw + bw + gw)) / lambdas[i]);
                fold_lip_ceiling(c, w, ceiling);
            }
            break;
        }
        case CorollaryKind::C43: {
            auto& growth = ck.add("K(w) e^{a+b} <= K(theta w)");
            auto& lipc = ck.add("Lip(f_w) <= delta * min{e^a G/K(theta w), (1/K - e^{a+b}/K(theta w)) e^{-b}/K(theta w)}");
            auto& decay = ck.add("K(theta^n w) e^{S_{a+b}} -> 0 (finite-horizon surrogate)");
            for (const auto& w : samples) {
                BasePoint w1 = ds.evolve(1.0, w);
                double k = d.K(w), k1 = d.K(w1);
                double eab = std::exp(d.a(w) + d.b(w));
                Checker::fold(growth, (k1 - k * eab) / k1, format_point(w));
                double ceiling = d.delta *
                                 std::min(std::exp(d.a(w)) / k1 * d.G(w),
                                          (1.0 / k - eab / k1) * std::exp(-d.b(w)) / k1);
                fold_lip_ceiling(lipc, w, ceiling);
                auto ab = [&](const BasePoint& q) { return d.a(q) + d.b(q); };
                auto value = [&](double t) {
                    double n = std::round(t);
                    return d.K(ds.evolve(n, w)) * std::exp(birkhoff_sum(ab, n, w, ds));
                };
                std::string note;
                double m = decay_margin(value, true, hz, note);
                Checker::fold(decay, m, note + " from " + format_point(w));
            }
            break;
        }
    }

    ck.finish();
    return ck.rep;
}

DichotomyBounds corollary_bounds(CorollaryKind kind, const CorollaryData& d, double quad_step) {
    switch (kind) {
        case CorollaryKind::C32:
        case CorollaryKind::C42:
            return DichotomyBounds::tempered_exp(d.driving, d.K, d.a, d.b);
        case CorollaryKind::C33:
            return DichotomyBounds::integral_exp(d.driving, d.K, d.a, d.b, quad_step);
        case CorollaryKind::C43:
            return DichotomyBounds::birkhoff_exp(d.driving, d.K, d.a, d.b);
        case CorollaryKind::C34:
        case CorollaryKind::C44:
            return DichotomyBounds::ratio_form(d.driving, d.K, d.a, d.b);
    }
    throw std::logic_error("corollary_bounds: bad kind");
}

} // namespace perron
