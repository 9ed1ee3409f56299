#include "oscillattr/dynamics.hpp"

#include <cmath>
#include <ostream>

#include "oscillattr/errors.hpp"
#include "oscillattr/io.hpp"

namespace oscillattr {

namespace {

void check_finite(const Eigen::MatrixXd& Y, std::int64_t step) {
    if (!Y.allFinite()) throw BlowUpError(step, "non-finite state");
    if (Y.cwiseAbs().maxCoeff() > kBlowUpThreshold) throw BlowUpError(step, "state exceeded 1e12");
}

std::int64_t whole_steps(double t, double dt, const char* what) {
    const double ratio = t / dt;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, rounded))
        throw ValidationError(std::string(what) + " is not a whole number of grid steps");
    return static_cast<std::int64_t>(rounded);
}

}  // namespace

Eigen::VectorXd stack(const State& y) {
    Eigen::VectorXd out(y.u.size() + y.v.size());
    out << y.u, y.v;
    return out;
}

State unstack(const Eigen::VectorXd& y) {
    const Eigen::Index n = y.size() / 2;
    return {y.head(n), y.tail(n)};
}

RdeScheme parse_scheme(const std::string& name) {
    if (name == "exponential_midpoint" || name == "expmid") return RdeScheme::exponential_midpoint;
    if (name == "rk4") return RdeScheme::rk4;
    throw ValidationError("unknown scheme '" + name + "' (expected exponential_midpoint or rk4)");
}

std::string to_string(RdeScheme scheme) {
    return scheme == RdeScheme::rk4 ? "rk4" : "exponential_midpoint";
}

State drift_rde(const State& y, const Eigen::VectorXd& z, const CouplingMatrix& A, const OscillatorParams& params) {
    Eigen::VectorXd g(y.u.size());
    params.g_model.apply(y.u, g);
    return {y.v + z, -params.K * (A.entries * y.u) - params.alpha * y.v + params.f - params.beta * g +
                         (1.0 - params.alpha) * z};
}

// ---------------------------------------------------------------- RDE

RdeStepper::RdeStepper(const CouplingMatrix& A, const OscillatorParams& params, const EnergyStructure& es,
                       double dt, RdeScheme scheme)
    : n_(static_cast<Eigen::Index>(A.size())),
      dt_(dt),
      scheme_(scheme),
      alpha_(params.alpha),
      beta_(params.beta),
      f_(params.f),
      g_(params.g_model),
      C_(es.C) {
    if (!(dt > 0.0)) throw ValidationError("dt must be positive");
    if (C_.rows() != 2 * n_) throw ValidationError("energy structure does not match the coupling matrix");
    E_ = matrix_exponential(C_ * dt);
    E_half_ = matrix_exponential(C_ * (0.5 * dt));
}

// F(z, Y) = (z, f - beta g(u) + (1 - alpha) z) column by column.
void RdeStepper::nonlinear(const Eigen::MatrixXd& Y, const Eigen::VectorXd& z, Eigen::MatrixXd& out) const {
    const Eigen::Index m = Y.cols();
    out.resize(2 * n_, m);
    auto g = out.bottomRows(n_);
    g_.apply(Y.topRows(n_), g);
    const Eigen::VectorXd forcing = f_ + (1.0 - alpha_) * z;
    out.bottomRows(n_) = (-beta_ * g).colwise() + forcing;
    out.topRows(n_).colwise() = z;
}

void RdeStepper::linear_rhs(const Eigen::MatrixXd& Y, const Eigen::VectorXd& z, Eigen::MatrixXd& out) const {
    nonlinear(Y, z, out);
    out.noalias() += C_ * Y;
}

void RdeStepper::step(Eigen::MatrixXd& Y, const Eigen::VectorXd& z_k, const Eigen::VectorXd& z_k1) const {
    const Eigen::VectorXd z_mid = 0.5 * (z_k + z_k1);
    Eigen::MatrixXd F;
    if (scheme_ == RdeScheme::exponential_midpoint) {
        nonlinear(Y, z_k, F);
        const Eigen::MatrixXd Y_mid = E_half_ * (Y + (0.5 * dt_) * F);
        nonlinear(Y_mid, z_mid, F);
        Eigen::MatrixXd next = E_ * Y;
        next.noalias() += dt_ * (E_half_ * F);
        Y.swap(next);
        return;
    }
    Eigen::MatrixXd k1, k2, k3, k4;
    linear_rhs(Y, z_k, k1);
    linear_rhs(Y + (0.5 * dt_) * k1, z_mid, k2);
    linear_rhs(Y + (0.5 * dt_) * k2, z_mid, k3);
    linear_rhs(Y + dt_ * k3, z_k1, k4);
    Y += (dt_ / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void RdeStepper::advance(Eigen::MatrixXd& Y, const NoisePath& noise, std::int64_t k_begin, std::int64_t k_end,
                         const std::function<void(std::int64_t, const Eigen::MatrixXd&)>& observer) const {
    if (!noise.has_z()) throw ValidationError("RDE integration needs the OU path z");
    if (std::abs(noise.grid.dt - dt_) > 1e-15 * dt_) throw ValidationError("noise grid dt differs from stepper dt");
    if (k_begin < 0 || k_end > noise.grid.n_steps || k_begin > k_end)
        throw ValidationError("integration window outside the noise path");
    if (Y.rows() != 2 * n_) throw ValidationError("state dimension does not match the coupling matrix");
    if (observer) observer(k_begin, Y);
    for (std::int64_t k = k_begin; k < k_end; ++k) {
        step(Y, noise.z.col(k), noise.z.col(k + 1));
        check_finite(Y, k + 1);
        if (observer) observer(k + 1, Y);
    }
}

// ---------------------------------------------------------------- SDE

SdeStepper::SdeStepper(const CouplingMatrix& A, const OscillatorParams& params, double dt)
    : dt_(dt), alpha_(params.alpha), beta_(params.beta), f_(params.f), g_(params.g_model), KA_(params.K * A.entries) {
    if (!(dt > 0.0)) throw ValidationError("dt must be positive");
}

void SdeStepper::step(Eigen::MatrixXd& U, Eigen::MatrixXd& Udot, const Eigen::VectorXd& dW) const {
    Eigen::MatrixXd accel(U.rows(), U.cols());
    g_.apply(U, accel);
    accel *= -beta_;
    accel.noalias() -= KA_ * U;
    accel -= alpha_ * Udot;
    accel.colwise() += f_;
    U += dt_ * Udot;
    Udot += dt_ * accel;
    Udot.colwise() += dW;
}

void SdeStepper::advance(
    Eigen::MatrixXd& U, Eigen::MatrixXd& Udot, const NoisePath& noise, std::int64_t k_begin, std::int64_t k_end,
    const std::function<void(std::int64_t, const Eigen::MatrixXd&, const Eigen::MatrixXd&)>& observer) const {
    if (std::abs(noise.grid.dt - dt_) > 1e-15 * dt_) throw ValidationError("noise grid dt differs from stepper dt");
    if (k_begin < 0 || k_end > noise.grid.n_steps || k_begin > k_end)
        throw ValidationError("integration window outside the noise path");
    if (observer) observer(k_begin, U, Udot);
    for (std::int64_t k = k_begin; k < k_end; ++k) {
        step(U, Udot, noise.increments.col(k));
        check_finite(U, k + 1);
        check_finite(Udot, k + 1);
        if (observer) observer(k + 1, U, Udot);
    }
}

// ---------------------------------------------------------------- drivers

RdeTrajectory integrate_rde(const State& y0, const NoisePath& noise, const CouplingMatrix& A,
                            const OscillatorParams& params, const EnergyStructure& es,
                            const IntegrateOptions& options) {
    if (options.record_every < 1) throw ValidationError("record_every must be >= 1");
    const RdeStepper stepper(A, params, es, noise.grid.dt, options.scheme);
    RdeTrajectory out;
    out.grid = noise.grid;
    out.seed = noise.seed;
    out.params_hash = sha256_hex(params.canonical());
    Eigen::MatrixXd Y = stack(y0);
    const std::int64_t last = noise.grid.n_steps;
    stepper.advance(Y, noise, 0, last, [&](std::int64_t k, const Eigen::MatrixXd& block) {
        if (k % options.record_every == 0 || k == last) {
            out.steps.push_back(k);
            out.states.push_back(unstack(block.col(0)));
        }
    });
    return out;
}

SdeTrajectory integrate_sde(const PhasePoint& phi0, const NoisePath& noise, const CouplingMatrix& A,
                            const OscillatorParams& params, std::int64_t record_every) {
    if (record_every < 1) throw ValidationError("record_every must be >= 1");
    if (phi0.u.size() != static_cast<Eigen::Index>(A.size()) || phi0.udot.size() != phi0.u.size())
        throw ValidationError("initial phase point has the wrong dimension");
    const SdeStepper stepper(A, params, noise.grid.dt);
    SdeTrajectory out;
    out.grid = noise.grid;
    out.seed = noise.seed;
    out.params_hash = sha256_hex(params.canonical());
    Eigen::MatrixXd U = phi0.u, Udot = phi0.udot;
    const std::int64_t last = noise.grid.n_steps;
    stepper.advance(U, Udot, noise, 0, last,
                    [&](std::int64_t k, const Eigen::MatrixXd& u, const Eigen::MatrixXd& udot) {
                        if (k % record_every == 0 || k == last) {
                            out.steps.push_back(k);
                            out.states.push_back({u.col(0), udot.col(0)});
                        }
                    });
    return out;
}

QuotientPoint mod_p0(const Eigen::VectorXd& y, const EnergyStructure& es, double kappa) {
    const double c = es.e1_coordinate(y);
    double s = c - kappa * std::floor(c / kappa);
    if (s >= kappa) s = 0.0;
    return {s, es.e2_coordinates(y)};
}

double cocycle_residual(const State& y0, const NoisePath& noise, const CouplingMatrix& A,
                        const OscillatorParams& params, const EnergyStructure& es, double t, double s) {
    if (t < 0.0 || s < 0.0) throw ValidationError("cocycle times must be nonnegative");
    const std::int64_t ks = whole_steps(s, noise.grid.dt, "s");
    const std::int64_t kt = whole_steps(t, noise.grid.dt, "t");
    if (ks + kt > noise.grid.n_steps) throw ValidationError("noise path is shorter than t + s");
    const RdeStepper stepper(A, params, es, noise.grid.dt);

    Eigen::MatrixXd direct = stack(y0);
    stepper.advance(direct, noise, 0, ks + kt);

    Eigen::MatrixXd split = stack(y0);
    stepper.advance(split, noise, 0, ks);
    if (kt > 0) {
        const NoisePath shifted = shift_origin(noise, ks, ks + kt);
        stepper.advance(split, shifted, 0, kt);
    }
    return es.norm(direct.col(0) - split.col(0));
}

double sde_rde_discrepancy(const PhasePoint& phi0, const NoisePath& noise, const CouplingMatrix& A,
                           const OscillatorParams& params, const EnergyStructure& es, double t_max) {
    if (!noise.has_z()) throw ValidationError("discrepancy check needs the OU path z");
    const std::int64_t k_max = std::min(noise.grid.n_steps, whole_steps(t_max, noise.grid.dt, "t_max"));
    const RdeStepper rde(A, params, es, noise.grid.dt);
    const SdeStepper sde(A, params, noise.grid.dt);

    Eigen::MatrixXd U = phi0.u, Udot = phi0.udot;
    Eigen::MatrixXd Y(2 * U.rows(), 1);
    Y << phi0.u, phi0.udot - noise.z.col(0);
    double worst = 0.0;
    for (std::int64_t k = 0; k < k_max; ++k) {
        sde.step(U, Udot, noise.increments.col(k));
        rde.step(Y, noise.z.col(k), noise.z.col(k + 1));
        check_finite(Y, k + 1);
        check_finite(U, k + 1);
        worst = std::max(worst, (U.col(0) - Y.col(0).head(U.rows())).norm());
    }
    return worst;
}

namespace {

template <class Point, class Second>
void write_long_csv(std::ostream& out, const TrajectoryOf<Point>& trajectory, const char* second_name,
                    Second second) {
    write_csv_row(out, {"t", "j", "u", second_name});
    for (std::size_t i = 0; i < trajectory.states.size(); ++i) {
        const std::string t = format_number(trajectory.grid.time(trajectory.steps[i]));
        const Point& p = trajectory.states[i];
        for (Eigen::Index j = 0; j < p.u.size(); ++j)
            write_csv_row(out, {t, std::to_string(j), format_number(p.u(j)), format_number(second(p)(j))});
    }
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const RdeTrajectory& trajectory) {
    write_long_csv(out, trajectory, "v", [](const State& s) -> const Eigen::VectorXd& { return s.v; });
}

void write_trajectory_csv(std::ostream& out, const SdeTrajectory& trajectory) {
    write_long_csv(out, trajectory, "udot", [](const PhasePoint& p) -> const Eigen::VectorXd& { return p.udot; });
}

}  // namespace oscillattr
