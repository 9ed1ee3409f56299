#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "oscillattr/energy.hpp"
#include "oscillattr/errors.hpp"
#include "support.hpp"

using namespace oscillattr;
using testsupport::make_params;

namespace {

// Inner product assembled from the two block forms: the E11 part of (u, v)
// is (mean u, mean v) on constants, the rest lies in E22.
double oracle_inner(const Eigen::VectorXd& y1, const Eigen::VectorXd& y2, const Eigen::MatrixXd& A, double alpha,
                    double K, double delta, double lambda1) {
    const Eigen::Index n = A.rows();
    auto split = [n](const Eigen::VectorXd& y) {
        const Eigen::VectorXd u = y.head(n), v = y.tail(n);
        const Eigen::VectorXd ub = Eigen::VectorXd::Constant(n, u.mean());
        const Eigen::VectorXd vb = Eigen::VectorXd::Constant(n, v.mean());
        return std::array<Eigen::VectorXd, 4>{ub, vb, u - ub, v - vb};
    };
    const auto a = split(y1), b = split(y2);
    const double e11 = alpha * alpha / 4.0 * a[0].dot(b[0]) + (0.5 * alpha * a[0] + a[1]).dot(0.5 * alpha * b[0] + b[1]);
    const double e22 = (K * A * a[2]).dot(b[2]) + (alpha * alpha / 4.0 - delta * K * lambda1) * a[2].dot(b[2]) +
                       (0.5 * alpha * a[2] + a[3]).dot(0.5 * alpha * b[2] + b[3]);
    return e11 + e22;
}

Eigen::VectorXd eta0_of(Eigen::Index n) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(2 * n);
    e.head(n).setOnes();
    return e;
}

Eigen::VectorXd eta_minus1_of(Eigen::Index n, double alpha) {
    Eigen::VectorXd e(2 * n);
    e.head(n).setOnes();
    e.tail(n).setConstant(-alpha);
    return e;
}

Eigen::MatrixXd exp_by_eigendecomposition(const Eigen::MatrixXd& M) {
    Eigen::EigenSolver<Eigen::MatrixXd> eig(M);
    const Eigen::MatrixXcd V = eig.eigenvectors();
    const Eigen::VectorXcd ev = eig.eigenvalues().array().exp();
    return (V * ev.asDiagonal() * V.inverse()).real();
}

}  // namespace

TEST(MuEigenvalues, WorkedExamples) {
    const double lambdas[] = {0.0, 1.0, 1.0};
    const auto zero = mu_eigenvalues(3.0, 5.0, std::span(lambdas, 1));
    EXPECT_EQ(zero[0].first, std::complex<double>(0.0, 0.0));
    EXPECT_EQ(zero[0].second, std::complex<double>(-3.0, 0.0));

    const double one[] = {1.0};
    const auto critical = mu_eigenvalues(2.0, 1.0, one);
    EXPECT_NEAR(std::abs(critical[0].first - std::complex<double>(-1.0, 0.0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(critical[0].second - std::complex<double>(-1.0, 0.0)), 0.0, 1e-15);

    const auto complex_pair = mu_eigenvalues(1.0, 1.0, one);
    const std::complex<double> expected(-0.5, std::sqrt(3.0) / 2.0);
    EXPECT_NEAR(std::abs(complex_pair[0].first - expected), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(complex_pair[0].second - std::conj(expected)), 0.0, 1e-15);
}

TEST(MuEigenvalues, MatchSpectrumOfC) {
    const auto A = build_laplacian(5, 1, 1.0, Boundary::neumann);
    const auto params = make_params(5, 1.5, 2.0, 0.0, 0.0, 0.0);
    const auto es = build_energy(A, params, 1.0);
    const auto rep = validate_ha(A);
    const auto mus = mu_eigenvalues(1.5, 2.0, rep.eigenvalues);
    Eigen::EigenSolver<Eigen::MatrixXd> eig(es.C);
    const Eigen::VectorXcd ev = eig.eigenvalues();
    for (const auto& [p, m] : mus)
        for (auto mu : {p, m}) {
            double best = 1e300;
            for (Eigen::Index i = 0; i < ev.size(); ++i) best = std::min(best, std::abs(ev(i) - mu));
            EXPECT_LE(best, 1e-7) << mu;
        }
}

TEST(DecayRate, WorkedExamples) {
    EXPECT_NEAR(decay_rate_a(4.0, 4.0, 1.0, 2.0), 2.0, 1e-15);
    EXPECT_NEAR(decay_rate_a(10.0, 5.0, 1.0, 1.0), 0.5, 1e-15);
    const double delta = choose_delta(1.0, 10.0, 1.0);
    EXPECT_NEAR(delta, 0.05, 1e-15);
    EXPECT_NEAR(decay_rate_a(1.0, 10.0, delta, 1.0), 0.5, 1e-15);
}

TEST(DecayRate, ChosenDeltaIsAdmissibleAndOptimal) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> logu(-2.0, 2.0);
    for (int i = 0; i < 1000; ++i) {
        const double alpha = std::pow(10.0, logu(rng)), K = std::pow(10.0, logu(rng)),
                     lambda1 = std::pow(10.0, logu(rng));
        const double delta = choose_delta(alpha, K, lambda1);
        ASSERT_GT(delta, 0.0);
        ASSERT_LE(delta, 1.0);
        const double a = decay_rate_a(alpha, K, delta, lambda1);
        EXPECT_GT(a, 0.0);
        EXPECT_LE(a, alpha / 2.0 * (1.0 + 1e-15));
        for (double other : {0.25 * delta, 0.5 * delta, std::min(1.0, 1.5 * delta), 1.0})
            EXPECT_LE(decay_rate_a(alpha, K, other, lambda1), a * (1.0 + 1e-12) + 1e-300);
    }
}

TEST(Conditions, BetaZeroIsTriviallyLocked) {
    const auto A = build_laplacian(4, 1, 1.0, Boundary::neumann);
    const auto rep = check_conditions(A, make_params(4, 2.0, 3.0, 0.0, 0.0, 0.1));
    EXPECT_EQ(rep.LF, 0.0);
    EXPECT_TRUE(rep.gap_ok);
    EXPECT_TRUE(rep.cond_4c_ok);
    ASSERT_TRUE(rep.M2.has_value());
    EXPECT_EQ(*rep.M2, 1.0);
    EXPECT_EQ(rep.remark54_c, 0.0);
}

TEST(Conditions, ThresholdConstantForSine) {
    const auto A = build_laplacian(4, 1, 1.0, Boundary::periodic);
    const auto rep = check_conditions(A, make_params(4, 10.0, 12.0, 1.0, 0.0, 0.5));
    EXPECT_NEAR(rep.remark54_c, 6.0 + 4.0 * std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(rep.alpha_threshold, std::sqrt(2.0 * (6.0 + 4.0 * std::sqrt(2.0))), 1e-12);
    EXPECT_NEAR(rep.K_threshold, (6.0 + 4.0 * std::sqrt(2.0)) / 2.0, 1e-12);
    EXPECT_TRUE(rep.thresholds_met);
}

TEST(Conditions, LockedRegimeChain) {
    const auto A = build_laplacian(4, 1, 1.0, Boundary::periodic);
    const auto rep = check_conditions(A, make_params(4, 10.0, 12.0, 1.0, 0.0, 0.5));
    EXPECT_NEAR(rep.lambda1, 2.0, 1e-12);
    EXPECT_NEAR(rep.delta, 1.0, 1e-15);
    EXPECT_NEAR(rep.a, 2.4, 1e-12);
    EXPECT_NEAR(rep.LF, 0.2, 1e-12);
    EXPECT_TRUE(rep.gap_ok);
    const double gamma = 2.4 / (2.0 + std::sqrt(2.0));
    EXPECT_NEAR(rep.gamma_star, gamma, 1e-12);
    EXPECT_NEAR(rep.cond_4c_value, 0.2 * (1.0 / gamma + 1.0 / (2.4 - 2.0 * gamma)), 1e-12);
    EXPECT_NEAR(rep.cond_4c_value, 0.486, 1e-3);
    EXPECT_TRUE(rep.cond_4c_ok);
    EXPECT_TRUE(rep.locked_regime);
    ASSERT_TRUE(rep.M2.has_value());
    EXPECT_NEAR(*rep.M2, 1.0 / (1.0 - rep.cond_4c_value), 1e-12);
}

TEST(Conditions, NeumannRingOfFourFailsTheGap) {
    const auto A = build_laplacian(4, 1, 1.0, Boundary::neumann);
    const auto rep = check_conditions(A, make_params(4, 10.0, 12.0, 1.0, 0.0, 0.5));
    EXPECT_NEAR(rep.lambda1, 2.0 - std::sqrt(2.0), 1e-12);
    EXPECT_FALSE(rep.gap_ok);
    EXPECT_FALSE(rep.locked_regime);
}

TEST(Conditions, FourCImpliesGapButNotConversely) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.1, 20.0), b(0.0, 3.0);
    const auto A = build_laplacian(4, 1, 1.0, Boundary::periodic);
    int gap_without_4c = 0;
    for (int i = 0; i < 2000; ++i) {
        const auto rep = check_conditions(A, make_params(4, u(rng), u(rng), b(rng), 0.0, 0.0));
        if (rep.cond_4c_ok) EXPECT_TRUE(rep.gap_ok);
        if (rep.gap_ok && !rep.cond_4c_ok) ++gap_without_4c;
        if (rep.M2) EXPECT_GE(*rep.M2, 1.0);
        EXPECT_LE(rep.delta, 1.0);
    }
    EXPECT_GT(gap_without_4c, 0);
}

TEST(Conditions, RejectsBadInput) {
    const auto A = build_laplacian(4, 1, 1.0, Boundary::periodic);
    EXPECT_THROW(check_conditions(A, make_params(4, -1.0, 1.0, 0.0, 0.0, 0.0)), ValidationError);
    EXPECT_THROW(check_conditions(A, make_params(3, 1.0, 1.0, 0.0, 0.0, 0.0)), ValidationError);
    EXPECT_THROW(check_conditions(A, make_params(4, 1.0, 1.0, 0.0, 0.0, 0.0), 1.5), ValidationError);
    EXPECT_THROW(check_conditions(A, make_params(4, 1.0, 1.0, 0.0, 0.0, 0.0), 0.0), ValidationError);
}

class EnergyForm : public ::testing::TestWithParam<std::tuple<int, int, Boundary, double, double>> {};

TEST_P(EnergyForm, MatchesBlockOracle) {
    const auto [N, dim, bc, alpha, K] = GetParam();
    const auto A = build_laplacian(N, dim, 1.0, bc);
    const auto n = static_cast<Eigen::Index>(A.size());
    const double lambda1 = validate_ha(A).lambda1;
    const double delta = choose_delta(alpha, K, lambda1);
    const auto es = build_energy(A, make_params(A.size(), alpha, K, 0.0, 0.0, 0.0), delta);

    const Eigen::VectorXd eta0 = eta0_of(n), etam = eta_minus1_of(n, alpha);
    EXPECT_NEAR(es.inner(eta0, eta0), alpha * alpha * n / 2.0, 1e-10 * alpha * alpha * n);
    EXPECT_NEAR(es.eta0_norm_sq, alpha * alpha * n / 2.0, 1e-10 * alpha * alpha * n);
    EXPECT_NEAR(es.inner(eta0, etam), 0.0, 1e-10 * alpha * alpha * n);

    std::mt19937_64 rng(static_cast<std::uint64_t>(N * 100 + dim));
    for (int i = 0; i < 50; ++i) {
        const Eigen::VectorXd y1 = testsupport::random_vector(rng, 2 * n);
        const Eigen::VectorXd y2 = testsupport::random_vector(rng, 2 * n);
        const double oracle = oracle_inner(y1, y2, A.entries, alpha, K, delta, lambda1);
        const double scale = std::sqrt(oracle_inner(y1, y1, A.entries, alpha, K, delta, lambda1) *
                                       oracle_inner(y2, y2, A.entries, alpha, K, delta, lambda1));
        EXPECT_NEAR(es.inner(y1, y2), oracle, 1e-10 * scale);
    }
}

INSTANTIATE_TEST_SUITE_P(Lattices, EnergyForm,
                         ::testing::Values(std::make_tuple(4, 1, Boundary::periodic, 10.0, 12.0),
                                           std::make_tuple(4, 1, Boundary::neumann, 10.0, 12.0),
                                           std::make_tuple(6, 1, Boundary::neumann, 1.0, 10.0),
                                           std::make_tuple(3, 2, Boundary::periodic, 2.0, 0.5),
                                           std::make_tuple(3, 2, Boundary::neumann, 0.3, 4.0)));

TEST(Energy, BasesProjectionsAndSandwich) {
    const testsupport::Locked L;
    const auto& es = L.es;
    const Eigen::Index n = 4;
    const Eigen::VectorXd eta0 = eta0_of(n), etam = eta_minus1_of(n, 10.0);

    // E-orthonormal basis of E2, orthogonal to eta0
    const Eigen::MatrixXd gramian = es.e2_basis.transpose() * es.gram * es.e2_basis;
    EXPECT_LE((gramian - Eigen::MatrixXd::Identity(2 * n - 1, 2 * n - 1)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((es.e2_basis.transpose() * es.gram * eta0).cwiseAbs().maxCoeff(), 1e-10 * es.eta0_norm_sq);

    auto pr = projections(es, eta0);
    EXPECT_LE((pr.p - eta0).norm(), 1e-12);
    EXPECT_LE(pr.q.norm(), 1e-12);
    pr = projections(es, etam);
    EXPECT_LE(pr.p.norm(), 1e-12);
    EXPECT_LE((pr.q - etam).norm(), 1e-12);

    std::mt19937_64 rng(1);
    for (int i = 0; i < 1000; ++i) {
        const Eigen::VectorXd y = testsupport::random_vector(rng, 2 * n, 3.0);
        const auto p = projections(es, y);
        EXPECT_NEAR(es.inner(y, y), es.inner(p.p, p.p) + es.inner(p.q, p.q), 1e-10 * es.inner(y, y));
        EXPECT_NEAR(es.e1_coordinate(y), y.head(n).mean() + y.tail(n).mean() / 10.0, 1e-12 * (1.0 + y.norm()));
        EXPECT_NEAR(es.e2_coordinates(y).norm(), es.norm(p.q), 1e-10 * es.norm(y));
        const double e = es.norm(y), eu = y.norm();
        EXPECT_LE(es.m_eq * eu, e * (1.0 + 1e-12));
        EXPECT_LE(e, es.M_eq * eu * (1.0 + 1e-12));
        EXPECT_LE(e, es.M1 * eu * (1.0 + 1e-12));
    }
    EXPECT_LE(es.a, es.alpha / 2.0);

    // C eta_{-1} = -alpha eta_{-1} and the form on it
    EXPECT_LE((es.C * etam + 10.0 * etam).norm(), 1e-12);
    EXPECT_NEAR(es.inner(es.C * etam, etam), -10.0 * es.inner(etam, etam), 1e-9 * es.inner(etam, etam));
    EXPECT_LE((es.C * eta0).norm(), 0.0);
}

TEST(Energy, GramIsSymmetricPositiveDefinite) {
    const testsupport::Locked L;
    const Eigen::MatrixXd& G = L.es.gram;
    EXPECT_LE((G - G.transpose()).cwiseAbs().maxCoeff(), 1e-12 * G.cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
    EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
    EXPECT_LE((L.es.gram_sqrt * L.es.gram_sqrt - G).cwiseAbs().maxCoeff(), 1e-10 * G.cwiseAbs().maxCoeff());
    EXPECT_LE((L.es.gram_sqrt * L.es.gram_inv_sqrt - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Energy, RejectsDeltaOutsideUnitInterval) {
    const testsupport::Locked L;
    EXPECT_THROW(build_energy(L.A, L.params, 0.0), ValidationError);
    EXPECT_THROW(build_energy(L.A, L.params, 1.0001), ValidationError);
    EXPECT_THROW(build_energy(L.A, L.params, -0.5), ValidationError);
    CouplingMatrix bad = L.A;
    bad.entries = Eigen::MatrixXd::Identity(4, 4);
    EXPECT_THROW(build_energy(bad, L.params, 1.0), ValidationError);
}

TEST(SemigroupDecay, NeumannFourSites) {
    const auto A = build_laplacian(4, 1, 1.0, Boundary::neumann);
    const auto params = make_params(4, 10.0, 12.0, 0.0, 0.0, 0.0);
    const auto es = build_energy(A, params, choose_delta(10.0, 12.0, validate_ha(A).lambda1));
    const std::vector<double> ts{0.0, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0};
    const auto rep = verify_semigroup_decay(es, ts);
    EXPECT_TRUE(rep.passed) << rep.failure;
    EXPECT_LE(rep.worst_form_excess, 1e-9);
    EXPECT_LE(rep.spectral_form_excess, 1e-9);
    EXPECT_NEAR(rep.norm_ratio.front(), 1.0, 1e-12);
    for (double r : rep.norm_ratio) EXPECT_LE(r, 1.0 + 1e-8);
    EXPECT_LE(rep.worst_p_residual, 1e-10);
}

TEST(SemigroupDecay, SweepOfRegimes) {
    for (auto bc : {Boundary::neumann, Boundary::periodic})
        for (double alpha : {0.5, 2.0, 10.0})
            for (double K : {0.2, 1.0, 12.0}) {
                const auto A = build_laplacian(5, 1, 1.0, bc);
                const auto es =
                    build_energy(A, make_params(5, alpha, K, 0.0, 0.0, 0.0), choose_delta(alpha, K, validate_ha(A).lambda1));
                const std::vector<double> ts{0.3, 3.0};
                const auto rep = verify_semigroup_decay(es, ts, 200);
                EXPECT_TRUE(rep.passed) << rep.failure << " alpha=" << alpha << " K=" << K;
            }
}

TEST(SemigroupDecay, ReportsWitnessWhenRateIsTooLarge) {
    const testsupport::Locked L;
    EnergyStructure es = L.es;
    es.a = es.alpha;  // claims more decay than C provides
    const std::vector<double> ts{1.0};
    const auto rep = verify_semigroup_decay(es, ts, 50);
    EXPECT_FALSE(rep.passed);
    EXPECT_NE(rep.failure.find("<CY,Y>_E"), std::string::npos);
    EXPECT_EQ(rep.witness.size(), 8);
    es.a = 0.0;
    EXPECT_THROW(verify_semigroup_decay(es, ts), ValidationError);
}

TEST(MatrixExponential, AgreesWithEigendecomposition) {
    const testsupport::Locked L;
    for (double t : {1e-3, 0.1, 1.0, 7.5}) {
        const Eigen::MatrixXd M = L.es.C * t;
        const Eigen::MatrixXd a = matrix_exponential(M), b = exp_by_eigendecomposition(M);
        EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, b.cwiseAbs().maxCoeff())) << t;
    }
    std::mt19937_64 rng(3);
    Eigen::MatrixXd R(6, 6);
    for (Eigen::Index i = 0; i < 36; ++i) R(i) = std::normal_distribution<double>()(rng);
    const Eigen::MatrixXd S = 2.0 * (R + R.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
    const Eigen::MatrixXd oracle =
        eig.eigenvectors() * eig.eigenvalues().array().exp().matrix().asDiagonal() * eig.eigenvectors().transpose();
    EXPECT_LE((matrix_exponential(S) - oracle).cwiseAbs().maxCoeff(), 1e-11 * oracle.cwiseAbs().maxCoeff());
    EXPECT_LE((matrix_exponential(Eigen::MatrixXd::Zero(3, 3)) - Eigen::MatrixXd::Identity(3, 3)).norm(), 1e-15);
}

TEST(Nonlinearity, SineBounds) {
    const auto g = NonlinearityModel::sine();
    EXPECT_NEAR(g.kappa(), 2.0 * std::numbers::pi, 1e-15);
    EXPECT_NEAR(g.c1(), 1.0, 1e-12);
    EXPECT_NEAR(g.c2(), 1.0, 1e-12);
    EXPECT_NO_THROW(g.validate());
    EXPECT_NEAR(g.value(0.3), std::sin(0.3), 1e-15);
    EXPECT_NEAR(g.derivative(0.3), std::cos(0.3), 1e-15);
}

TEST(Nonlinearity, TableInterpolatesPeriodically) {
    const int M = 64;
    const double kappa = 2.0 * std::numbers::pi;
    std::vector<double> values(M);
    for (int k = 0; k < M; ++k) values[k] = std::sin(k * kappa / M);
    const auto g = NonlinearityModel::table(kappa, values);
    EXPECT_FALSE(g.is_sine());
    EXPECT_NO_THROW(g.validate());
    for (double x = -10.0; x < 10.0; x += 0.173) {
        EXPECT_NEAR(g.value(x), std::sin(x), 1e-3);
        EXPECT_NEAR(g.value(x + kappa), g.value(x), 1e-12);
        EXPECT_NEAR(g.derivative(x), std::cos(x), 2e-2);
        EXPECT_LE(std::abs(g.value(x)), g.c1() + 1e-12);
        EXPECT_LE(std::abs(g.derivative(x)), g.c2() + 1e-12);
    }
    for (int k = 0; k < M; ++k) EXPECT_NEAR(g.value(k * kappa / M), values[k], 1e-12);
    EXPECT_THROW(NonlinearityModel::table(kappa, {0.0, 1.0, 0.0}), ValidationError);
    EXPECT_THROW(NonlinearityModel::table(-1.0, values), ValidationError);
    EXPECT_THROW(NonlinearityModel::table(kappa, {0.0, 1.0, NAN, 0.0}), ValidationError);
}

TEST(Nonlinearity, TableLipschitzConstantEntersLF) {
    const auto A = build_laplacian(4, 1, 1.0, Boundary::periodic);
    auto params = make_params(4, 10.0, 12.0, 0.5, 0.0, 0.0);
    params.g_model = NonlinearityModel::table(1.0, {0.0, 2.0, 0.0, -2.0});
    const auto rep = check_conditions(A, params);
    EXPECT_NEAR(rep.LF, 2.0 * params.g_model.c2() * 0.5 / 10.0, 1e-15);
    EXPECT_GE(params.g_model.c2(), 8.0 - 1e-9);  // slope between adjacent samples is 2 / 0.25
}

TEST(Params, CanonicalTextIsStable) {
    const auto p = make_params(2, 1.5, 2.0, 0.25, 0.1, 0.0);
    EXPECT_EQ(p.canonical(), "alpha=1.5;K=2;beta=0.25;f=0.1,0.1;eps=0,0;g=sin");
}
