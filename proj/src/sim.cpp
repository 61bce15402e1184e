#include "hygrid/sim.hpp"

#include <algorithm>
#include <cmath>

#include "hygrid/errors.hpp"
#include "hygrid/stability.hpp"

namespace hygrid {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void DisturbanceSchedule::validate(const SystemModel& model) const {
    for (const auto& s : steps) {
        if (!(s.t_start >= 0.0) || !std::isfinite(s.t_start)) {
            throw Error(ErrorCode::InvalidArgument, "load step at " + s.node + " has negative t_start", s.node);
        }
        if (!std::isfinite(s.value)) throw Error(ErrorCode::InvalidArgument, "load step value is not finite", s.node);
        model.load_vector({NodeLoad{s.node, s.value, s.port}});
    }
}

VectorXd DisturbanceSchedule::loads_at(const SystemModel& model, double t) const {
    std::vector<NodeLoad> active;
    for (const auto& s : steps) {
        if (s.t_start <= t) active.push_back(NodeLoad{s.node, s.value, s.port});
    }
    return model.load_vector(active);
}

std::vector<double> DisturbanceSchedule::breakpoints(double t_final) const {
    std::vector<double> out;
    for (const auto& s : steps) {
        if (s.t_start > 0.0 && s.t_start < t_final) out.push_back(s.t_start);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<NodeLoad> DisturbanceSchedule::final_loads() const {
    std::vector<NodeLoad> out;
    for (const auto& s : steps) out.push_back(NodeLoad{s.node, s.value, s.port});
    return out;
}

Trajectory simulate(const SystemModel& model, const VectorXd& x0, const DisturbanceSchedule& schedule,
                    double t_final, double dt, const SimOptions& options) {
    const auto n = static_cast<Eigen::Index>(model.dim());
    if (x0.size() != n) throw Error(ErrorCode::DimensionMismatch, "initial state has wrong dimension");
    if (!(dt > 0.0) || !(t_final >= dt)) {
        throw Error(ErrorCode::InvalidArgument, "need dt > 0 and t_final >= dt");
    }
    if (options.reference && options.reference->size() != n) {
        throw Error(ErrorCode::DimensionMismatch, "reference state has wrong dimension");
    }
    schedule.validate(model);

    const MatrixXd F = model.dynamics();
    const MatrixXd Bin = model.input();
    const VectorXd h = lasalle_weights(model);
    const VectorXd ref = options.reference.value_or(VectorXd::Zero(n));
    const std::size_t every = std::max<std::size_t>(1, options.sample_every);

    Trajectory tr;
    tr.labels = model.layout.labels();

    auto record = [&](double t, const VectorXd& x, const VectorXd& u) {
        const VectorXd dx = x - ref;
        tr.t.push_back(t);
        tr.x.push_back(x);
        tr.V.push_back(0.5 * dx.dot(h.cwiseProduct(dx)));
        tr.dV.push_back(dx.dot(h.cwiseProduct(F * x + u)));
    };
    auto energy = [&](const VectorXd& x) {
        const VectorXd dx = x - ref;
        return 0.5 * dx.dot(h.cwiseProduct(dx));
    };

    std::vector<double> bounds = schedule.breakpoints(t_final);
    bounds.push_back(t_final);

    VectorXd x = x0;
    double t = 0.0;
    VectorXd u = Bin * schedule.loads_at(model, t);
    record(t, x, u);
    double V_prev = tr.V.back();
    std::size_t since_sample = 0;

    double seg_start = 0.0;
    for (double seg_end : bounds) {
        const double len = seg_end - seg_start;
        const auto full = static_cast<std::size_t>(std::floor(len / dt * (1.0 + 1e-12)));
        std::size_t count = full;
        if (seg_start + static_cast<double>(full) * dt < seg_end - 1e-12 * std::max(1.0, seg_end)) ++count;
        u = Bin * schedule.loads_at(model, seg_start);
        for (std::size_t k = 0; k < count; ++k) {
            const double t_next = (k + 1 == count) ? seg_end : seg_start + static_cast<double>(k + 1) * dt;
            const double step = t_next - t;
            const VectorXd k1 = F * x + u;
            const VectorXd k2 = F * (x + 0.5 * step * k1) + u;
            const VectorXd k3 = F * (x + 0.5 * step * k2) + u;
            const VectorXd k4 = F * (x + step * k3) + u;
            x += (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t = t_next;
            ++tr.steps;
            if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kDivergenceBound) {
                throw Error(ErrorCode::NonFiniteState,
                            "state diverged at t = " + std::to_string(t) +
                                "; RK4 needs dt below about 2.8 / spectral radius of T^-1 A");
            }
            const double V = energy(x);
            tr.max_V_increase = std::max(tr.max_V_increase, V - V_prev);
            V_prev = V;
            const bool last = (seg_end == t_final) && (k + 1 == count);
            if (++since_sample >= every || last) {
                // loads switch at seg_end; the recorded derivative uses the
                // loads valid on the step just taken
                record(t, x, u);
                since_sample = 0;
            }
        }
        seg_start = seg_end;
    }
    return tr;
}

VectorXd edge_flows(const SystemModel& model, const VectorXd& x) {
    const auto& L = model.layout;
    return model.W_ac.cwiseProduct(x.segment(L.eta.begin(), L.eta.count()));
}

VectorXd closed_form_three_machine(double b1, double b2, double m2, double m3, double t, double c) {
    if (!(b1 > 0.0 && b2 > 0.0 && m2 > 0.0 && m3 > 0.0)) {
        throw Error(ErrorCode::NonPositiveParameter, "line weights and inertias must be positive");
    }
    if (std::abs(b2 / b1 - m3 / m2) > 1e-12) {
        throw Error(ErrorCode::RatioMismatch, "closed form needs b2/b1 == m3/m2");
    }
    const double zeta = std::sqrt(b1 / m2);
    const double cs = std::cos(zeta * t);
    const double sn = std::sin(zeta * t);
    VectorXd x(5);
    x << (b2 / b1) * cs, -cs, 0.0, b2 / std::sqrt(b1 * m2) * sn, -zeta * sn;
    return c * x;
}

}  // namespace hygrid
