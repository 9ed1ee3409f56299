#include "oscillattr/energy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "oscillattr/errors.hpp"
#include "oscillattr/io.hpp"

namespace oscillattr {

// ---------------------------------------------------------------- nonlinearity

NonlinearityModel NonlinearityModel::sine() {
    NonlinearityModel g;
    g.kappa_ = 2.0 * std::numbers::pi;
    g.c1_ = 1.0;
    g.c2_ = 1.0;
    return g;
}

NonlinearityModel NonlinearityModel::table(double kappa, std::vector<double> values) {
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ValidationError("table nonlinearity: kappa must be positive");
    if (values.size() < 4) throw ValidationError("table nonlinearity needs at least 4 samples");
    for (double v : values)
        if (!std::isfinite(v)) throw ValidationError("table nonlinearity: non-finite sample");

    NonlinearityModel g;
    g.kappa_ = kappa;
    g.table_ = std::move(values);
    constexpr int kSamples = 10000;
    for (int i = 0; i < kSamples; ++i) {
        const double x = kappa * i / kSamples;
        g.c1_ = std::max(g.c1_, std::abs(g.value(x)));
        g.c2_ = std::max(g.c2_, std::abs(g.derivative(x)));
    }
    for (std::size_t i = 0; i < g.table_.size(); ++i) {
        const double x = kappa * static_cast<double>(i) / static_cast<double>(g.table_.size());
        g.c1_ = std::max(g.c1_, std::abs(g.value(x)));
        g.c2_ = std::max(g.c2_, std::abs(g.derivative(x)));
    }
    // (HG) asks for strictly positive bounds.
    g.c1_ = std::max(g.c1_, 1e-300);
    g.c2_ = std::max(g.c2_, 1e-300);
    return g;
}

namespace {

struct HermiteSegment {
    double y0, y1, m0, m1, t;
};

HermiteSegment locate(const std::vector<double>& y, double kappa, double x) {
    const auto m = static_cast<std::ptrdiff_t>(y.size());
    const double h = kappa / static_cast<double>(m);
    double reduced = x - kappa * std::floor(x / kappa);
    double pos = reduced / h;
    auto i = static_cast<std::ptrdiff_t>(std::floor(pos));
    double t = pos - static_cast<double>(i);
    i = ((i % m) + m) % m;
    auto at = [&](std::ptrdiff_t k) { return y[static_cast<std::size_t>(((k % m) + m) % m)]; };
    return {at(i), at(i + 1), 0.5 * (at(i + 1) - at(i - 1)), 0.5 * (at(i + 2) - at(i)), t};
}

}  // namespace

double NonlinearityModel::value(double x) const {
    if (is_sine()) return std::sin(x);
    const auto s = locate(table_, kappa_, x);
    const double t = s.t, t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * s.y0 + (t3 - 2 * t2 + t) * s.m0 + (-2 * t3 + 3 * t2) * s.y1 + (t3 - t2) * s.m1;
}

double NonlinearityModel::derivative(double x) const {
    if (is_sine()) return std::cos(x);
    const auto s = locate(table_, kappa_, x);
    const double t = s.t, t2 = t * t;
    const double h = kappa_ / static_cast<double>(table_.size());
    return ((6 * t2 - 6 * t) * s.y0 + (3 * t2 - 4 * t + 1) * s.m0 + (-6 * t2 + 6 * t) * s.y1 + (3 * t2 - 2 * t) * s.m1) /
           h;
}

void NonlinearityModel::validate() const {
    if (!(kappa_ > 0.0)) throw ValidationError("nonlinearity period must be positive");
    constexpr int kSamples = 10000;
    for (int i = 0; i < kSamples; ++i) {
        const double x = kappa_ * (static_cast<double>(i) / kSamples);
        const double gx = value(x);
        if (std::abs(value(x + kappa_) - gx) > 1e-12 * std::max(1.0, std::abs(gx)) ||
            std::abs(value(x - 3.0 * kappa_) - gx) > 1e-12 * std::max(1.0, std::abs(gx)))
            throw ValidationError("nonlinearity is not kappa-periodic");
        if (std::abs(gx) > c1_ * (1 + 1e-12) || std::abs(derivative(x)) > c2_ * (1 + 1e-12))
            throw ValidationError("nonlinearity exceeds its c1/c2 bounds");
    }
}

void OscillatorParams::validate(std::size_t n) const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValidationError("alpha must be positive");
    if (!(K > 0.0) || !std::isfinite(K)) throw ValidationError("K must be positive");
    if (!std::isfinite(beta)) throw ValidationError("beta must be finite");
    if (static_cast<std::size_t>(f.size()) != n) throw ValidationError("f must have one entry per oscillator");
    if (static_cast<std::size_t>(eps.size()) != n) throw ValidationError("eps must have one entry per oscillator");
    if (!f.allFinite()) throw ValidationError("f must be finite");
    if (!eps.allFinite() || (eps.array() < 0.0).any()) throw ValidationError("eps must be finite and >= 0");
}

std::string OscillatorParams::canonical() const {
    std::ostringstream out;
    out << "alpha=" << format_number(alpha) << ";K=" << format_number(K) << ";beta=" << format_number(beta) << ";f=";
    for (Eigen::Index i = 0; i < f.size(); ++i) out << (i ? "," : "") << format_number(f(i));
    out << ";eps=";
    for (Eigen::Index i = 0; i < eps.size(); ++i) out << (i ? "," : "") << format_number(eps(i));
    out << ";g=";
    if (g_model.is_sine()) {
        out << "sin";
    } else {
        out << "table:" << format_number(g_model.kappa());
        for (double v : g_model.table_values()) out << "," << format_number(v);
    }
    return out.str();
}

// ---------------------------------------------------------------- scalar formulas

std::vector<MuPair> mu_eigenvalues(double alpha, double K, std::span<const double> lambdas) {
    std::vector<MuPair> out;
    out.reserve(lambdas.size());
    for (double lambda : lambdas) {
        const double disc = alpha * alpha - 4.0 * K * lambda;
        const std::complex<double> root =
            disc >= 0.0 ? std::complex<double>(std::sqrt(disc), 0.0) : std::complex<double>(0.0, std::sqrt(-disc));
        out.emplace_back(0.5 * (-alpha + root), 0.5 * (-alpha - root));
    }
    return out;
}

double decay_rate_a(double alpha, double K, double delta, double lambda1) {
    return 0.5 * alpha - std::abs(0.5 * alpha - delta * K * lambda1 / alpha);
}

double choose_delta(double alpha, double K, double lambda1) {
    const double delta = std::min(1.0, alpha * alpha / (2.0 * K * lambda1));
    return std::clamp(delta, std::numeric_limits<double>::min(), 1.0);
}

// Scaling and squaring with the degree-13 Pade approximant (Higham 2005).
Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& M) {
    static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                   1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                   670442572800.0,      33522128640.0,       1323241920.0,
                                   40840800.0,          960960.0,            16380.0,
                                   182.0,               1.0};
    constexpr double theta13 = 5.371920351148152;

    const Eigen::Index n = M.rows();
    const double norm1 = M.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > theta13) squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
    const Eigen::MatrixXd A = M / std::ldexp(1.0, squarings);

    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd A2 = A * A;
    const Eigen::MatrixXd A4 = A2 * A2;
    const Eigen::MatrixXd A6 = A4 * A2;
    const Eigen::MatrixXd U =
        A * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
    const Eigen::MatrixXd V = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
    Eigen::MatrixXd R = (V - U).partialPivLu().solve(V + U);
    for (int i = 0; i < squarings; ++i) R = R * R;
    return R;
}

// ---------------------------------------------------------------- energy structure

double EnergyStructure::e1_coordinate(const Eigen::VectorXd& y) const {
    return eta0.dot(gram * y) / eta0_norm_sq;
}

Eigen::VectorXd EnergyStructure::e2_coordinates(const Eigen::VectorXd& y) const {
    return e2_basis.transpose() * (gram * y);
}

Eigen::MatrixXd EnergyStructure::q_projector() const {
    const Eigen::Index dim = C.rows();
    return Eigen::MatrixXd::Identity(dim, dim) - eta0 * (gram * eta0).transpose() / eta0_norm_sq;
}

double EnergyStructure::operator_norm(const Eigen::MatrixXd& M) const {
    const Eigen::MatrixXd weighted = gram_sqrt * M * gram_inv_sqrt;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(weighted);
    return svd.singularValues()(0);
}

EnergyStructure build_energy(const CouplingMatrix& A, const OscillatorParams& params, double delta) {
    if (!(delta > 0.0 && delta <= 1.0)) throw ValidationError("delta must lie in (0, 1]");
    const SpectrumReport spectrum = validate_ha(A);
    if (!spectrum.ha_satisfied) throw ValidationError("coupling matrix rejected: " + spectrum.violation.value_or(""));
    const auto n = static_cast<Eigen::Index>(A.size());
    params.validate(A.size());

    const double alpha = params.alpha, K = params.K, lambda1 = spectrum.lambda1;
    EnergyStructure es;
    es.n = A.size();
    es.alpha = alpha;
    es.K = K;
    es.delta = delta;
    es.lambda1 = lambda1;
    es.a = decay_rate_a(alpha, K, delta, lambda1);
    es.LF = 2.0 * params.g_model.c2() * std::abs(params.beta) / alpha;

    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    es.C = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    es.C.topRightCorner(n, n) = I;
    es.C.bottomLeftCorner(n, n) = -K * A.entries;
    es.C.bottomRightCorner(n, n) = -alpha * I;

    es.eta0 = Eigen::VectorXd::Zero(2 * n);
    es.eta0.head(n).setOnes();
    es.eta_minus1.resize(2 * n);
    es.eta_minus1.head(n).setOnes();
    es.eta_minus1.tail(n).setConstant(-alpha);

    // Euclidean projectors onto E11 = {(c1, d1)} and E22 = its complement.
    const Eigen::MatrixXd mean = Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
    Eigen::MatrixXd P11 = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    P11.topLeftCorner(n, n) = mean;
    P11.bottomRightCorner(n, n) = mean;
    const Eigen::MatrixXd P22 = Eigen::MatrixXd::Identity(2 * n, 2 * n) - P11;

    // <Y1,Y2>_E11 = (a^2/4)<u1,u2> + <(a/2)u1 + v1, (a/2)u2 + v2>
    Eigen::MatrixXd form11(2 * n, 2 * n);
    form11 << 0.5 * alpha * alpha * I, 0.5 * alpha * I, 0.5 * alpha * I, I;
    // <Y1,Y2>_E22 = <KAu1,u2> + (a^2/4 - d K l1)<u1,u2> + <(a/2)u1 + v1, (a/2)u2 + v2>
    Eigen::MatrixXd form22(2 * n, 2 * n);
    form22 << K * A.entries + (0.5 * alpha * alpha - delta * K * lambda1) * I, 0.5 * alpha * I, 0.5 * alpha * I, I;

    es.gram = P11.transpose() * form11 * P11 + P22.transpose() * form22 * P22;
    es.gram = 0.5 * (es.gram + es.gram.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gram_eig(es.gram);
    const Eigen::VectorXd& g_ev = gram_eig.eigenvalues();
    if (!(g_ev(0) > 0.0)) throw ValidationError("energy form is not positive definite");
    es.m_eq = std::sqrt(g_ev(0));
    es.M_eq = std::sqrt(g_ev(g_ev.size() - 1));
    es.M1 = es.M_eq;
    const Eigen::MatrixXd& V = gram_eig.eigenvectors();
    es.gram_sqrt = V * g_ev.cwiseSqrt().asDiagonal() * V.transpose();
    es.gram_inv_sqrt = V * g_ev.cwiseSqrt().cwiseInverse().asDiagonal() * V.transpose();
    es.eta0_norm_sq = es.eta0.dot(es.gram * es.eta0);

    // E2 is the E-orthogonal complement of eta0: complete gram^{1/2} eta0 to
    // an orthonormal basis and map the complement back.
    const Eigen::VectorXd w0 = (es.gram_sqrt * es.eta0).normalized();
    const Eigen::MatrixXd w0_column = w0;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(w0_column);
    const Eigen::MatrixXd full = qr.householderQ() * Eigen::MatrixXd::Identity(2 * n, 2 * n);
    es.e2_basis = es.gram_inv_sqrt * full.rightCols(2 * n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> a_eig(A.entries);
    es.e22_basis = Eigen::MatrixXd::Zero(2 * n, 2 * (n - 1));
    for (Eigen::Index i = 1; i < n; ++i) {
        es.e22_basis.col(2 * (i - 1)).head(n) = a_eig.eigenvectors().col(i);
        es.e22_basis.col(2 * (i - 1) + 1).tail(n) = a_eig.eigenvectors().col(i);
    }
    return es;
}

Projection projections(const EnergyStructure& es, const Eigen::VectorXd& y) {
    Projection out;
    out.p = es.e1_coordinate(y) * es.eta0;
    out.q = y - out.p;
    return out;
}

ConditionReport check_conditions(const CouplingMatrix& A, const OscillatorParams& params, std::optional<double> delta) {
    const SpectrumReport spectrum = validate_ha(A);
    if (!spectrum.ha_satisfied) throw ValidationError("coupling matrix rejected: " + spectrum.violation.value_or(""));
    params.validate(A.size());

    ConditionReport r;
    r.lambda1 = spectrum.lambda1;
    r.delta = delta.value_or(choose_delta(params.alpha, params.K, r.lambda1));
    if (!(r.delta > 0.0 && r.delta <= 1.0)) throw ValidationError("delta must lie in (0, 1]");
    r.a = decay_rate_a(params.alpha, params.K, r.delta, r.lambda1);
    r.LF = 2.0 * params.g_model.c2() * std::abs(params.beta) / params.alpha;
    r.gap_ok = r.a > 4.0 * r.LF;
    r.gamma_star = r.a / (2.0 + std::numbers::sqrt2);
    r.cond_4c_value = r.a > 0.0 ? r.LF * (1.0 / r.gamma_star + 1.0 / (r.a - 2.0 * r.gamma_star))
                                : std::numeric_limits<double>::infinity();
    r.cond_4c_ok = r.cond_4c_value < 1.0;
    if (r.cond_4c_ok) r.M2 = 1.0 / (1.0 - r.cond_4c_value);

    const double c = 2.0 * params.g_model.c2() * std::abs(params.beta) * (std::numbers::sqrt2 + 1.0) *
                     (std::numbers::sqrt2 + 1.0);
    r.remark54_c = c;
    r.alpha_threshold = std::sqrt(2.0 * c);
    r.K_threshold = c / r.lambda1;
    const double k_lambda = params.K * r.lambda1;
    r.delta_window = {c / k_lambda, std::min((params.alpha * params.alpha - c) / k_lambda, 1.0)};
    r.thresholds_met = params.alpha > r.alpha_threshold && params.K > r.K_threshold;
    r.locked_regime = r.gap_ok && r.cond_4c_ok;
    return r;
}

DecayReport verify_semigroup_decay(const EnergyStructure& es, std::span<const double> t_grid, int n_samples,
                                   std::uint64_t sample_seed) {
    if (!(es.a > 0.0)) throw ValidationError("decay rate a must be positive");
    DecayReport report;
    const Eigen::Index dim = es.C.rows();

    auto fail = [&](std::string why, const Eigen::VectorXd& witness) {
        if (report.passed) {
            report.passed = false;
            report.failure = std::move(why);
            report.witness = witness;
        }
    };

    // <CY,Y>_E <= -a |Y|_E^2 on E2, sampled and in closed form.
    std::mt19937_64 rng(sample_seed);
    std::normal_distribution<double> normal;
    const Eigen::MatrixXd GC = es.gram * es.C;
    report.worst_form_excess = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_samples; ++i) {
        Eigen::VectorXd q(dim - 1);
        for (Eigen::Index k = 0; k < q.size(); ++k) q(k) = normal(rng);
        const Eigen::VectorXd y = es.e2_basis * q;
        const double norm_sq = es.inner(y, y);
        const double excess = (y.dot(GC * y) + es.a * norm_sq) / norm_sq;
        report.worst_form_excess = std::max(report.worst_form_excess, excess);
        if (excess > 1e-9) fail("<CY,Y>_E + a|Y|_E^2 > 0 on E2", y);
    }
    const Eigen::MatrixXd restricted = es.e2_basis.transpose() * (0.5 * (GC + GC.transpose())) * es.e2_basis;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> form_eig(restricted);
    report.spectral_form_excess = form_eig.eigenvalues().maxCoeff() + es.a;
    if (report.spectral_form_excess > 1e-9)
        fail("<CY,Y>_E + a|Y|_E^2 > 0 on E2 (extremal direction)",
             es.e2_basis * form_eig.eigenvectors().col(form_eig.eigenvalues().size() - 1));

    // |exp(Ct) Q|_E <= e^{-at} and exp(Ct) P = P.
    const Eigen::MatrixXd Q = es.q_projector();
    for (double t : t_grid) {
        const Eigen::MatrixXd E = matrix_exponential(es.C * t);
        const double ratio = es.operator_norm(E * Q) / std::exp(-es.a * t);
        report.t_values.push_back(t);
        report.norm_ratio.push_back(ratio);
        if (ratio > 1.0 + 1e-8) fail("|exp(Ct)Q|_E > e^{-at} at t = " + format_number(t), Eigen::VectorXd());
        for (int i = 0; i < 8; ++i) {
            Eigen::VectorXd y(dim);
            for (Eigen::Index k = 0; k < dim; ++k) y(k) = normal(rng);
            const Eigen::VectorXd py = projections(es, y).p;
            const double residual = (E * py - py).norm() / std::max(py.norm(), 1e-300);
            report.worst_p_residual = std::max(report.worst_p_residual, residual);
            if (residual > 1e-10) fail("exp(Ct)PY != PY at t = " + format_number(t), y);
        }
    }
    return report;
}

}  // namespace oscillattr
