#include "oscillattr/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "oscillattr/errors.hpp"

namespace oscillattr {

Boundary parse_boundary(const std::string& name) {
    if (name == "neumann") return Boundary::neumann;
    if (name == "periodic") return Boundary::periodic;
    throw ValidationError("unknown boundary condition '" + name + "' (expected neumann or periodic)");
}

std::string to_string(Boundary bc) {
    return bc == Boundary::neumann ? "neumann" : "periodic";
}

namespace {

std::size_t lattice_size(int n_side, int dim) {
    std::size_t size = 1;
    for (int i = 0; i < dim; ++i) {
        size *= static_cast<std::size_t>(n_side);
        if (size > kMaxLatticeSize)
            throw ValidationError("lattice size N^d exceeds " + std::to_string(kMaxLatticeSize));
    }
    return size;
}

}  // namespace

CouplingMatrix build_laplacian(int n_side, int dim, double h, Boundary bc) {
    if (n_side < 2) throw ValidationError("N must be >= 2");
    if (dim < 1) throw ValidationError("d must be >= 1");
    if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("spacing h must be positive");

    const std::size_t size = lattice_size(n_side, dim);
    const double inv_h2 = 1.0 / (h * h);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(size, size);

    std::vector<int> index(dim);
    for (std::size_t row = 0; row < size; ++row) {
        std::size_t rest = row;
        for (int i = 0; i < dim; ++i) {
            index[i] = static_cast<int>(rest % n_side);
            rest /= n_side;
        }
        std::size_t stride = 1;
        for (int i = 0; i < dim; ++i) {
            for (int step : {-1, 1}) {
                int neighbour = index[i] + step;
                if (neighbour < 0 || neighbour >= n_side) {
                    if (bc == Boundary::neumann)
                        neighbour = index[i];
                    else
                        neighbour = (neighbour + n_side) % n_side;
                }
                const std::size_t col = row + (static_cast<std::ptrdiff_t>(neighbour) - index[i]) * stride;
                A(row, row) += inv_h2;
                A(row, col) -= inv_h2;
            }
            stride *= n_side;
        }
    }
    return CouplingMatrix{n_side, dim, h, std::move(A)};
}

SpectrumReport validate_ha(const CouplingMatrix& A) {
    const Eigen::MatrixXd& M = A.entries;
    if (M.rows() != M.cols() || M.rows() == 0)
        throw ValidationError("coupling matrix must be square and non-empty");

    SpectrumReport report;
    std::vector<std::string> problems;

    const double scale = M.cwiseAbs().maxCoeff();
    const double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * scale) problems.push_back("matrix is not symmetric");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& ev = solver.eigenvalues();
    report.eigenvalues.assign(ev.data(), ev.data() + ev.size());

    const double radius = ev.cwiseAbs().maxCoeff();
    if (ev(0) < -1e-10 * radius) problems.push_back("matrix is not nonnegative definite");

    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(M.rows());
    if ((M * ones).norm() > 1e-12 * M.norm())
        problems.push_back("constant vector is not in the kernel (missing zero eigenvalue)");

    const double zero_cut = 1e-8 * radius;
    const auto n_small = std::count_if(ev.data(), ev.data() + ev.size(),
                                       [&](double x) { return std::abs(x) <= zero_cut; });
    if (radius == 0.0 || std::abs(ev(0)) > 1e-10 * std::max(1.0, radius))
        problems.push_back("no zero eigenvalue");
    else if (n_small > 1)
        problems.push_back("zero eigenvalue is not simple");

    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) > zero_cut) {
            report.lambda1 = ev(i);
            break;
        }
    }

    report.ha_satisfied = problems.empty();
    if (!problems.empty()) {
        std::string text = problems.front();
        for (std::size_t i = 1; i < problems.size(); ++i) text += "; " + problems[i];
        report.violation = text;
    }
    return report;
}

CouplingMatrix read_matrix_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open matrix file " + path.string());

    int n_side = 0, dim = 0;
    if (!(in >> n_side >> dim) || n_side < 1 || dim < 1)
        throw ValidationError("matrix file " + path.string() + ": bad header, expected \"N d\"");

    const std::size_t size = lattice_size(n_side, dim);
    Eigen::MatrixXd M(size, size);
    for (std::size_t r = 0; r < size; ++r) {
        for (std::size_t c = 0; c < size; ++c) {
            if (!(in >> M(r, c)) || !std::isfinite(M(r, c)))
                throw ValidationError("matrix file " + path.string() + ": expected " +
                                      std::to_string(size * size) + " finite entries");
        }
    }
    std::string extra;
    if (in >> extra) throw ValidationError("matrix file " + path.string() + ": trailing data");
    return CouplingMatrix{n_side, dim, 1.0, std::move(M)};
}

}  // namespace oscillattr
