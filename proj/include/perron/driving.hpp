#pragma once

#include "perron/types.hpp"

#include <map>
#include <memory>
#include <optional>
#include <vector>

namespace perron {

// One tabulated transition of a user-supplied driving system:
// theta^t(from) = to.  Tables may contain redundant, mutually
// inconsistent entries; check_flow_property will expose those.
struct TableEntry {
    double t = 0.0;
    Vec from;
    Vec to;
};

struct FlowReport {
    double max_composition_residual = 0.0; // over ||theta^{t+s} w - theta^t theta^s w||
    double max_identity_residual = 0.0;    // over ||theta^0 w - w||
    double tol = 0.0;
    bool pass = false;
    // worst composition witness
    double witness_t = 0.0;
    double witness_s = 0.0;
    BasePoint witness_point;
};

// The driving dynamical system theta acting on the base space.
// All built-in kinds are defined for every time in their domain,
// forward and backward; tabulated systems answer only what they store.
class DrivingSystem {
public:
    enum class Kind { CircleRotation, PlanarShiftFlow, IntegerShiftIndexed, UserTable };

    static std::shared_ptr<const DrivingSystem> circle_rotation(double angle, TimeDomain td = TimeDomain::Discrete);
    static std::shared_ptr<const DrivingSystem> planar_shift_flow(TimeDomain td = TimeDomain::Continuous);
    static std::shared_ptr<const DrivingSystem> integer_shift();
    static std::shared_ptr<const DrivingSystem> user_table(std::vector<TableEntry> entries, int base_dim, TimeDomain td);

    Kind kind() const { return kind_; }
    TimeDomain time_domain() const { return time_domain_; }
    int base_dim() const { return base_dim_; }
    double angle() const { return angle_; }

    // theta^t w.  Throws std::domain_error for a non-integer time on a
    // discrete system and for untabulated queries on a UserTable.
    BasePoint evolve(double t, const BasePoint& w) const;

    // distance in the base-space geometry (wrap-around on the circle)
    double point_distance(const BasePoint& a, const BasePoint& b) const;

    // Pointwise evolve over an ascending list of times.
    std::vector<BasePoint> orbit(const BasePoint& w, const std::vector<double>& times) const;

    // Residuals of theta^{t+s} w = theta^t theta^s w and theta^0 = Id
    // over the sample grid (all pairs t,s from sample_times x all points).
    FlowReport check_flow_property(const std::vector<double>& sample_times,
                                   const std::vector<BasePoint>& sample_points,
                                   double tol) const;

    // Deterministic default sample points, used by construction-time spot
    // checks that need somewhere to evaluate.
    std::vector<BasePoint> sample_points(int n) const;

private:
    DrivingSystem() = default;

    void require_time(double t) const;

    Kind kind_ = Kind::IntegerShiftIndexed;
    TimeDomain time_domain_ = TimeDomain::Discrete;
    int base_dim_ = 1;
    double angle_ = 0.0;
    std::vector<TableEntry> table_;
};

using DrivingPtr = std::shared_ptr<const DrivingSystem>;

} // namespace perron
