#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "oscillattr/coupling.hpp"
#include "oscillattr/energy.hpp"

namespace testsupport {

using namespace oscillattr;

inline OscillatorParams make_params(std::size_t n, double alpha, double K, double beta, double f, double eps) {
    OscillatorParams p;
    p.alpha = alpha;
    p.K = K;
    p.beta = beta;
    p.f = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), f);
    p.eps = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), eps);
    return p;
}

// alpha 10, K 12, beta 1, sine, eps 0.5, f 0 on the 4-ring with h = 1
struct Locked {
    CouplingMatrix A = build_laplacian(4, 1, 1.0, Boundary::periodic);
    OscillatorParams params = make_params(4, 10.0, 12.0, 1.0, 0.0, 0.5);
    EnergyStructure es = build_energy(A, params, choose_delta(10.0, 12.0, 2.0));
};

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
    return v;
}

inline Eigen::MatrixXd euclidean_kron_sum_1d(const Eigen::MatrixXd& L, int dim) {
    const Eigen::Index N = L.rows();
    Eigen::MatrixXd out = L;
    for (int k = 1; k < dim; ++k) {
        const Eigen::Index m = out.rows();
        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(m * N, m * N);
        // out (x) I + I (x) L
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < m; ++j)
                next.block(i * N, j * N, N, N) += out(i, j) * Eigen::MatrixXd::Identity(N, N);
        for (Eigen::Index i = 0; i < m; ++i) next.block(i * N, i * N, N, N) += L;
        out = next;
    }
    return out;
}

}  // namespace testsupport
