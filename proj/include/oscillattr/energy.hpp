#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "oscillattr/coupling.hpp"

namespace oscillattr {

// Periodic C^1 nonlinearity g with |g| <= c1, |g'| <= c2 and smallest
// period kappa. Either the built-in sine or a periodic table interpolated
// with cubic Hermite (Catmull-Rom) segments.
class NonlinearityModel {
public:
    static NonlinearityModel sine();
    /// Equally spaced samples g(k * kappa / M), k = 0..M-1.
    static NonlinearityModel table(double kappa, std::vector<double> values);

    double kappa() const { return kappa_; }
    double c1() const { return c1_; }
    double c2() const { return c2_; }
    bool is_sine() const { return table_.empty(); }
    const std::vector<double>& table_values() const { return table_; }

    double value(double x) const;
    double derivative(double x) const;

    /// Elementwise g applied to a block of positions.
    template <class In, class Out>
    void apply(const In& u, Out& out) const {
        if (is_sine()) {
            out = u.array().sin();
        } else {
            for (Eigen::Index c = 0; c < u.cols(); ++c)
                for (Eigen::Index r = 0; r < u.rows(); ++r) out(r, c) = value(u(r, c));
        }
    }

    /// Periodicity and the c1/c2 bounds on a 10^4-point sample; throws on failure.
    void validate() const;

private:
    double kappa_ = 0.0;
    double c1_ = 0.0;
    double c2_ = 0.0;
    std::vector<double> table_;
};

struct OscillatorParams {
    double alpha = 1.0;  // damping
    double K = 1.0;      // coupling
    double beta = 0.0;
    Eigen::VectorXd f;
    Eigen::VectorXd eps;
    NonlinearityModel g_model = NonlinearityModel::sine();

    void validate(std::size_t n) const;
    /// Canonical text used for digests.
    std::string canonical() const;
};

using MuPair = std::pair<std::complex<double>, std::complex<double>>;

/// (mu+, mu-) = (-alpha +- sqrt(alpha^2 - 4 K lambda)) / 2 for each lambda.
std::vector<MuPair> mu_eigenvalues(double alpha, double K, std::span<const double> lambdas);

double decay_rate_a(double alpha, double K, double delta, double lambda1);

/// The delta in (0, 1] maximising a: min{1, alpha^2 / (2 K lambda1)}.
double choose_delta(double alpha, double K, double lambda1);

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& M);

// Linear part C = [[0, I], [-K A, -alpha I]] of the random ODE together with
// the equivalent inner product in which C contracts on E2 at rate a.
// E = E1 (+) E2 with E1 = span{eta0}; E2 = span{eta_{-1}} (+) E22.
struct EnergyStructure {
    std::size_t n = 0;
    double alpha = 0.0;
    double K = 0.0;
    double delta = 1.0;
    double lambda1 = 0.0;
    double a = 0.0;
    double LF = 0.0;

    Eigen::MatrixXd C;
    Eigen::VectorXd eta0;
    Eigen::VectorXd eta_minus1;
    Eigen::MatrixXd e22_basis;  // Euclidean-orthonormal lifts (phi,0), (0,phi) of nonzero modes of A
    Eigen::MatrixXd gram;       // <Y1, Y2>_E = Y1^T gram Y2
    Eigen::MatrixXd gram_sqrt;
    Eigen::MatrixXd gram_inv_sqrt;
    Eigen::MatrixXd e2_basis;   // 2n x (2n-1), E-orthonormal basis of E2
    double m_eq = 0.0;          // m_eq |Y| <= |Y|_E <= M_eq |Y|
    double M_eq = 0.0;
    double M1 = 0.0;            // |Y|_E <= M1 |Y|
    double eta0_norm_sq = 0.0;  // |eta0|_E^2

    double inner(const Eigen::VectorXd& y1, const Eigen::VectorXd& y2) const { return y1.dot(gram * y2); }
    double norm(const Eigen::VectorXd& y) const { return std::sqrt(std::max(0.0, inner(y, y))); }

    /// Coefficient c with PY = c * eta0; equals mean(u) + mean(v) / alpha.
    double e1_coordinate(const Eigen::VectorXd& y) const;
    /// Coordinates of QY in the E-orthonormal basis of E2 (|q| = |QY|_E).
    Eigen::VectorXd e2_coordinates(const Eigen::VectorXd& y) const;

    /// Matrix of Q = I - P.
    Eigen::MatrixXd q_projector() const;
    /// Operator norm of M induced by |.|_E.
    double operator_norm(const Eigen::MatrixXd& M) const;
};

EnergyStructure build_energy(const CouplingMatrix& A, const OscillatorParams& params, double delta);

struct Projection {
    Eigen::VectorXd p;
    Eigen::VectorXd q;
};
Projection projections(const EnergyStructure& es, const Eigen::VectorXd& y);

struct ConditionReport {
    double lambda1 = 0.0;
    double delta = 0.0;
    double a = 0.0;
    double LF = 0.0;
    bool gap_ok = false;            // a > 4 LF
    double gamma_star = 0.0;        // a / (2 + sqrt 2)
    double cond_4c_value = 0.0;     // LF (1/gamma* + 1/(a - 2 gamma*))
    bool cond_4c_ok = false;        // cond_4c_value < 1
    std::optional<double> M2;       // 1 / (1 - cond_4c_value)
    double remark54_c = 0.0;        // 2 c2 |beta| (sqrt 2 + 1)^2
    double alpha_threshold = 0.0;   // sqrt(2c)
    double K_threshold = 0.0;       // c / lambda1
    std::pair<double, double> delta_window;
    bool thresholds_met = false;    // alpha > sqrt(2c) and K > c / lambda1
    bool locked_regime = false;     // gap_ok and cond_4c_ok
};

ConditionReport check_conditions(const CouplingMatrix& A, const OscillatorParams& params,
                                  std::optional<double> delta = std::nullopt);

struct DecayReport {
    bool passed = true;
    double worst_form_excess = 0.0;   // max (<CY,Y>_E + a |Y|_E^2) / |Y|_E^2 over samples
    double spectral_form_excess = 0.0;  // same maximised exactly over E2
    std::vector<double> t_values;
    std::vector<double> norm_ratio;   // |exp(Ct) Q|_E / e^{-at}
    double worst_p_residual = 0.0;    // |exp(Ct) P Y - P Y| / |P Y|
    std::string failure;
    Eigen::VectorXd witness;
};

DecayReport verify_semigroup_decay(const EnergyStructure& es, std::span<const double> t_grid,
                                   int n_samples = 1000, std::uint64_t sample_seed = 7);

}  // namespace oscillattr
