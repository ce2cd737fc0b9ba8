#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cstdint>
#include <functional>
#include <memory>

namespace fbp {

using SpMat = Eigen::SparseMatrix<double>;
using VecFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Sparse LU of the bordered matrix [A U; V^T C] with k dense border columns.
class BorderedSolver {
public:
    BorderedSolver(const SpMat& A, const Eigen::MatrixXd& U, const Eigen::MatrixXd& V, const Eigen::MatrixXd& C);
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
    Eigen::Index size() const { return n_; }

private:
    Eigen::Index n_ = 0;
    std::shared_ptr<Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>> lu_;
};

struct EigResult {
    Eigen::VectorXd values;   // descending
    Eigen::MatrixXd vectors;  // B-orthonormal columns
    Eigen::VectorXd residuals;
    int restarts = 0;
    bool converged = false;
};

// Largest k eigenvalues of M = K^{-1} B, self-adjoint in the B inner
// product (B symmetric positive definite). Restarted block Krylov with full
// reorthogonalization and Rayleigh-Ritz extraction.
EigResult top_eigs(const VecFn& apply_kinv, const VecFn& apply_b, Eigen::Index n, int k, double tol,
                   std::uint64_t seed, int max_restarts = 40);

}  // namespace fbp
