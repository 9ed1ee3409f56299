#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace oscillattr {

enum class Boundary { neumann, periodic };

Boundary parse_boundary(const std::string& name);
std::string to_string(Boundary bc);

// Coupling operator A acting on the N^d oscillators of a d-dimensional
// lattice. Dense; the lattice is desk-scale (N^d <= 4096).
struct CouplingMatrix {
    int n_side = 0;
    int dim = 0;
    double spacing = 1.0;  // only meaningful for the built-in Laplacians
    Eigen::MatrixXd entries;

    std::size_t size() const { return static_cast<std::size_t>(entries.rows()); }
};

struct SpectrumReport {
    std::vector<double> eigenvalues;  // ascending
    double lambda1 = 0.0;             // smallest positive eigenvalue
    bool ha_satisfied = false;
    std::optional<std::string> violation;
};

inline constexpr std::size_t kMaxLatticeSize = 4096;

/// Negative discrete Laplacian on Z_N^d with spacing h. Neumann reflects
/// the out-of-range neighbour onto the boundary site, periodic wraps it.
CouplingMatrix build_laplacian(int n_side, int dim, double h, Boundary bc);

/// Checks symmetry, nonnegativity, A*1 = 0 and simplicity of the zero
/// eigenvalue. Never throws for well-formed square input.
SpectrumReport validate_ha(const CouplingMatrix& A);

/// Reads "N d" followed by N^d rows of N^d reals.
CouplingMatrix read_matrix_file(const std::filesystem::path& path);

}  // namespace oscillattr
