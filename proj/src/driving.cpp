#include "perron/driving.hpp"

#include <algorithm>
#include <cmath>

namespace perron {

namespace {

double mod1(double x) {
    double r = x - std::floor(x);
    if (r >= 1.0) r -= 1.0; // floor rounding at the seam
    return r;
}

} // namespace

std::shared_ptr<const DrivingSystem> DrivingSystem::circle_rotation(double angle, TimeDomain td) {
    auto ds = std::shared_ptr<DrivingSystem>(new DrivingSystem());
    ds->kind_ = Kind::CircleRotation;
    ds->time_domain_ = td;
    ds->base_dim_ = 1;
    ds->angle_ = angle;
    return ds;
}

std::shared_ptr<const DrivingSystem> DrivingSystem::planar_shift_flow(TimeDomain td) {
    auto ds = std::shared_ptr<DrivingSystem>(new DrivingSystem());
    ds->kind_ = Kind::PlanarShiftFlow;
    ds->time_domain_ = td;
    ds->base_dim_ = 2;
    return ds;
}

std::shared_ptr<const DrivingSystem> DrivingSystem::integer_shift() {
    auto ds = std::shared_ptr<DrivingSystem>(new DrivingSystem());
    ds->kind_ = Kind::IntegerShiftIndexed;
    ds->time_domain_ = TimeDomain::Discrete;
    ds->base_dim_ = 1;
    return ds;
}

std::shared_ptr<const DrivingSystem> DrivingSystem::user_table(std::vector<TableEntry> entries, int base_dim, TimeDomain td) {
    for (const auto& e : entries) {
        if (e.from.size() != base_dim || e.to.size() != base_dim)
            throw std::invalid_argument("user_table: entry dimension does not match base_dim");
        if (td == TimeDomain::Discrete && !is_integer_time(e.t))
            throw std::invalid_argument("user_table: non-integer time in a discrete table");
    }
    auto ds = std::shared_ptr<DrivingSystem>(new DrivingSystem());
    ds->kind_ = Kind::UserTable;
    ds->time_domain_ = td;
    ds->base_dim_ = base_dim;
    ds->table_ = std::move(entries);
    return ds;
}

void DrivingSystem::require_time(double t) const {
    if (!std::isfinite(t))
        throw std::domain_error("evolve: time is not finite");
    if (time_domain_ == TimeDomain::Discrete && !is_integer_time(t))
        throw std::domain_error("evolve: non-integer time for a discrete driving system");
}

BasePoint DrivingSystem::evolve(double t, const BasePoint& w) const {
    require_time(t);
    if (w.dim() != base_dim_)
        throw std::invalid_argument("evolve: base point dimension mismatch");
    if (t == 0.0)
        return w;

    switch (kind_) {
        case Kind::CircleRotation: {
            Vec c(1);
            c[0] = mod1(w.coords[0] + t * angle_);
            return BasePoint(c);
        }
        case Kind::PlanarShiftFlow: {
            Vec c = w.coords;
            c[0] += t;
            return BasePoint(c);
        }
        case Kind::IntegerShiftIndexed: {
            Vec c = w.coords;
            c[0] += t;
            return BasePoint(c);
        }
        case Kind::UserTable: {
            // Tabulated systems never interpolate: the exact (point, t)
            // pair must be stored.
            for (const auto& e : table_) {
                if (e.t == t && e.from == w.coords)
                    return BasePoint(e.to);
            }
            throw std::domain_error("evolve: time " + std::to_string(t) + " not tabulated for point " + format_point(w));
        }
    }
    throw std::logic_error("evolve: unknown driving-system kind");
}

double DrivingSystem::point_distance(const BasePoint& a, const BasePoint& b) const {
    if (a.dim() != base_dim_ || b.dim() != base_dim_)
        throw std::invalid_argument("point_distance: base point dimension mismatch");
    if (kind_ == Kind::CircleRotation) {
        double d = std::abs(a.coords[0] - b.coords[0]);
        return std::min(d, 1.0 - d);
    }
    return (a.coords - b.coords).lpNorm<Eigen::Infinity>();
}

std::vector<BasePoint> DrivingSystem::orbit(const BasePoint& w, const std::vector<double>& times) const {
    for (std::size_t i = 1; i < times.size(); ++i)
        if (times[i] < times[i - 1])
            throw std::invalid_argument("orbit: times must be sorted ascending");
    std::vector<BasePoint> out;
    out.reserve(times.size());
    for (double t : times)
        out.push_back(evolve(t, w));
    return out;
}

FlowReport DrivingSystem::check_flow_property(const std::vector<double>& sample_times,
                                              const std::vector<BasePoint>& sample_points,
                                              double tol) const {
    if (tol <= 0.0)
        throw std::invalid_argument("check_flow_property: tol must be positive");
    FlowReport rep;
    rep.tol = tol;
    for (const BasePoint& w : sample_points) {
        rep.max_identity_residual = std::max(rep.max_identity_residual,
                                             point_distance(evolve(0.0, w), w));
        for (double t : sample_times) {
            for (double s : sample_times) {
                BasePoint direct = evolve(t + s, w);
                BasePoint chained = evolve(t, evolve(s, w));
                double r = point_distance(direct, chained);
                if (r > rep.max_composition_residual) {
                    rep.max_composition_residual = r;
                    rep.witness_t = t;
                    rep.witness_s = s;
                    rep.witness_point = w;
                }
            }
        }
    }
    rep.pass = rep.max_composition_residual <= tol && rep.max_identity_residual <= tol;
    return rep;
}

std::vector<BasePoint> DrivingSystem::sample_points(int n) const {
    std::vector<BasePoint> pts;
    pts.reserve(static_cast<std::size_t>(std::max(n, 0)));
    switch (kind_) {
        case Kind::CircleRotation:
            for (int i = 0; i < n; ++i)
                pts.push_back(BasePoint{mod1(0.1 + 0.7 * i)});
            break;
        case Kind::PlanarShiftFlow:
            for (int i = 0; i < n; ++i)
                pts.push_back(BasePoint{-1.0 + 0.5 * i, 0.25 * i});
            break;
        case Kind::IntegerShiftIndexed:
            for (int i = 0; i < n; ++i)
                pts.push_back(BasePoint{static_cast<double>(i)});
            break;
        case Kind::UserTable:
            for (const auto& e : table_) {
                if (static_cast<int>(pts.size()) >= n) break;
                bool seen = false;
                for (const auto& p : pts)
                    if (p.coords == e.from) { seen = true; break; }
                if (!seen) pts.push_back(BasePoint(e.from));
            }
            break;
    }
    return pts;
}

} // namespace perron
