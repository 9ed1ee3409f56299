#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oscillattr/coupling.hpp"
#include "oscillattr/energy.hpp"
#include "oscillattr/noise.hpp"

namespace oscillattr {

// Y = (u, v) with v = udot - z.
struct State {
    Eigen::VectorXd u;
    Eigen::VectorXd v;
};

struct PhasePoint {
    Eigen::VectorXd u;
    Eigen::VectorXd udot;
};

// Point of the cylinder T^1 x E2: s is the E1 coordinate mod kappa, q the
// E2 coordinates in an E-orthonormal basis.
struct QuotientPoint {
    double s = 0.0;
    Eigen::VectorXd q;
};

template <class Point>
struct TrajectoryOf {
    TimeGrid grid;
    std::vector<std::int64_t> steps;  // grid indices of the recorded states
    std::vector<Point> states;
    std::uint64_t seed = 0;
    std::string params_hash;
};
using RdeTrajectory = TrajectoryOf<State>;
using SdeTrajectory = TrajectoryOf<PhasePoint>;

Eigen::VectorXd stack(const State& y);
State unstack(const Eigen::VectorXd& y);

enum class RdeScheme { exponential_midpoint, rk4 };
RdeScheme parse_scheme(const std::string& name);
std::string to_string(RdeScheme scheme);

inline constexpr double kBlowUpThreshold = 1e12;

/// Right-hand side (v + z, -KAu - alpha v + f - beta g(u) + (1 - alpha) z).
State drift_rde(const State& y, const Eigen::VectorXd& z, const CouplingMatrix& A, const OscillatorParams& params);

// Advances a block of states (one per column, stacked as (u; v)) that share
// one noise path. exp(C dt) and exp(C dt / 2) are computed once. Const
// methods keep no scratch state, so one stepper may serve several threads.
class RdeStepper {
public:
    RdeStepper(const CouplingMatrix& A, const OscillatorParams& params, const EnergyStructure& es, double dt,
               RdeScheme scheme = RdeScheme::exponential_midpoint);

    /// One step from t_k to t_{k+1}; z_k, z_{k+1} are the OU values at the nodes.
    void step(Eigen::MatrixXd& Y, const Eigen::VectorXd& z_k, const Eigen::VectorXd& z_k1) const;

    /// Steps [k_begin, k_end) of the path. observer(k, Y) sees the block at
    /// grid index k for k = k_begin..k_end. Throws BlowUpError.
    void advance(Eigen::MatrixXd& Y, const NoisePath& noise, std::int64_t k_begin, std::int64_t k_end,
                 const std::function<void(std::int64_t, const Eigen::MatrixXd&)>& observer = {}) const;

    double dt() const { return dt_; }

private:
    void nonlinear(const Eigen::MatrixXd& Y, const Eigen::VectorXd& z, Eigen::MatrixXd& out) const;
    void linear_rhs(const Eigen::MatrixXd& Y, const Eigen::VectorXd& z, Eigen::MatrixXd& out) const;

    Eigen::Index n_;
    double dt_;
    RdeScheme scheme_;
    double alpha_;
    double beta_;
    Eigen::VectorXd f_;
    NonlinearityModel g_;
    Eigen::MatrixXd C_;
    Eigen::MatrixXd E_;       // exp(C dt)
    Eigen::MatrixXd E_half_;  // exp(C dt / 2)
};

// Euler-Maruyama for the second-order SDE on a block of columns.
class SdeStepper {
public:
    SdeStepper(const CouplingMatrix& A, const OscillatorParams& params, double dt);

    void step(Eigen::MatrixXd& U, Eigen::MatrixXd& Udot, const Eigen::VectorXd& dW) const;
    void advance(Eigen::MatrixXd& U, Eigen::MatrixXd& Udot, const NoisePath& noise, std::int64_t k_begin,
                 std::int64_t k_end,
                 const std::function<void(std::int64_t, const Eigen::MatrixXd&, const Eigen::MatrixXd&)>& observer =
                     {}) const;

private:
    double dt_;
    double alpha_;
    double beta_;
    Eigen::VectorXd f_;
    NonlinearityModel g_;
    Eigen::MatrixXd KA_;
};

struct IntegrateOptions {
    RdeScheme scheme = RdeScheme::exponential_midpoint;
    std::int64_t record_every = 1;  // the final state is always recorded
};

RdeTrajectory integrate_rde(const State& y0, const NoisePath& noise, const CouplingMatrix& A,
                            const OscillatorParams& params, const EnergyStructure& es,
                            const IntegrateOptions& options = {});

SdeTrajectory integrate_sde(const PhasePoint& phi0, const NoisePath& noise, const CouplingMatrix& A,
                            const OscillatorParams& params, std::int64_t record_every = 1);

QuotientPoint mod_p0(const Eigen::VectorXd& y, const EnergyStructure& es, double kappa);
inline QuotientPoint mod_p0(const State& y, const EnergyStructure& es, double kappa) {
    return mod_p0(stack(y), es, kappa);
}

/// |Y(t+s, w, Y0) - Y(t, theta_s w, Y(s, w, Y0))|_E with s and t whole
/// multiples of the noise grid step. The path must start at 0 and reach t+s.
double cocycle_residual(const State& y0, const NoisePath& noise, const CouplingMatrix& A,
                        const OscillatorParams& params, const EnergyStructure& es, double t, double s);

/// max over grid times <= t_max of |u_SDE - u_RDE| (Euclidean) with shared
/// increments; the RDE starts from v0 = udot0 - z(t0).
double sde_rde_discrepancy(const PhasePoint& phi0, const NoisePath& noise, const CouplingMatrix& A,
                           const OscillatorParams& params, const EnergyStructure& es, double t_max);

void write_trajectory_csv(std::ostream& out, const RdeTrajectory& trajectory);
void write_trajectory_csv(std::ostream& out, const SdeTrajectory& trajectory);

}  // namespace oscillattr
