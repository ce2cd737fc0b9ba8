#include "fbp/linalg.hpp"

#include "fbp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace fbp {

BorderedSolver::BorderedSolver(const SpMat& A, const Eigen::MatrixXd& U, const Eigen::MatrixXd& V,
                               const Eigen::MatrixXd& C) {
    const Eigen::Index n = A.rows();
    const Eigen::Index k = U.cols();
    n_ = n + k;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(A.nonZeros() + 2 * n * k + k * k);
    for (int c = 0; c < A.outerSize(); ++c)
        for (SpMat::InnerIterator it(A, c); it; ++it) trips.emplace_back(it.row(), it.col(), it.value());
    for (Eigen::Index j = 0; j < k; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (U(i, j) != 0.0) trips.emplace_back(i, n + j, U(i, j));
            if (V(i, j) != 0.0) trips.emplace_back(n + j, i, V(i, j));
        }
        for (Eigen::Index i = 0; i < k; ++i) trips.emplace_back(n + i, n + j, C(i, j));
    }
    SpMat M(n_, n_);
    M.setFromTriplets(trips.begin(), trips.end());
    M.makeCompressed();
    lu_ = std::make_shared<Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>>();
    lu_->analyzePattern(M);
    lu_->factorize(M);
    if (lu_->info() != Eigen::Success) throw SingularLinearization("bordered linear system is singular");
}

Eigen::VectorXd BorderedSolver::solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd x = lu_->solve(rhs);
    if (lu_->info() != Eigen::Success || !x.allFinite()) throw SingularLinearization("bordered solve failed");
    return x;
}

EigResult top_eigs(const VecFn& apply_kinv, const VecFn& apply_b, Eigen::Index n, int k, double tol,
                   std::uint64_t seed, int max_restarts) {
    if (k < 1 || k > n) throw InvalidArgument("top_eigs: invalid number of eigenpairs");
    const int b = static_cast<int>(std::min<Eigen::Index>(n, k + 3));
    const Eigen::Index max_dim = std::min<Eigen::Index>(n, std::max<Eigen::Index>(12 * b, 48));

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd X(n, b);
    for (Eigen::Index j = 0; j < b; ++j)
        for (Eigen::Index i = 0; i < n; ++i) X(i, j) = gauss(rng);

    EigResult res;
    double prev_worst = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart <= max_restarts; ++restart) {
        Eigen::MatrixXd V(n, max_dim), BV(n, max_dim), MV(n, max_dim);
        Eigen::Index dim = 0;
        Eigen::MatrixXd Q = X;
        while (dim < max_dim) {
            const Eigen::Index start = dim;
            for (Eigen::Index c = 0; c < Q.cols() && dim < max_dim; ++c) {
                Eigen::VectorXd q = Q.col(c);
                const double q0 = std::sqrt(std::abs(q.dot(apply_b(q)))) + 1e-300;
                for (int pass = 0; pass < 2; ++pass) {
                    if (dim == 0) break;
                    const Eigen::VectorXd coef = BV.leftCols(dim).transpose() * q;
                    q -= V.leftCols(dim) * coef;
                }
                Eigen::VectorXd bq = apply_b(q);
                const double nrm = std::sqrt(std::max(q.dot(bq), 0.0));
                if (nrm < 1e-10 * q0) continue;
                V.col(dim) = q / nrm;
                BV.col(dim) = bq / nrm;
                ++dim;
            }
            if (dim == start) break;
            for (Eigen::Index c = start; c < dim; ++c) MV.col(c) = apply_kinv(BV.col(c));
            Q = MV.middleCols(start, dim - start);
        }
        if (dim < k) throw NonConvergence("top_eigs: Krylov space collapsed");
        Eigen::MatrixXd H = BV.leftCols(dim).transpose() * MV.leftCols(dim);
        H = 0.5 * (H + H.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
        const Eigen::Index keep = std::min<Eigen::Index>(b, dim);
        Eigen::MatrixXd Y(dim, keep);
        Eigen::VectorXd theta(keep);
        for (Eigen::Index j = 0; j < keep; ++j) {
            theta[j] = es.eigenvalues()[dim - 1 - j];
            Y.col(j) = es.eigenvectors().col(dim - 1 - j);
        }
        Eigen::MatrixXd Xr = V.leftCols(dim) * Y;
        Eigen::MatrixXd MXr = MV.leftCols(dim) * Y;
        Eigen::VectorXd resid(keep);
        for (Eigen::Index j = 0; j < keep; ++j) {
            Eigen::VectorXd r = MXr.col(j) - theta[j] * Xr.col(j);
            resid[j] = std::sqrt(std::max(r.dot(apply_b(r)), 0.0)) / std::max(std::abs(theta[j]), 1e-300);
        }
        res.values = theta.head(k);
        res.vectors = Xr.leftCols(k);
        res.residuals = resid.head(k);
        res.restarts = restart;
        const double worst = resid.head(k).maxCoeff();
        if (worst <= tol || dim == n) {
            res.converged = true;
            return res;
        }
        // Stagnation at the roundoff floor of the solves.
        if (worst > 0.5 * prev_worst) {
            res.converged = worst <= 1e3 * tol;
            return res;
        }
        prev_worst = worst;
        X = Xr;
    }
    return res;
}

}  // namespace fbp
