#pragma once

#include "fbp/domain.hpp"
#include "fbp/state_solver.hpp"

#include <cstdint>
#include <vector>

namespace fbp {

// Constrained eigenpair: -Laplace phi = (tau + sigma) weight [phi].
// On the disk phi is the radial profile of an azimuthal mode; the full
// eigenfunction is phi(r) cos(m theta) (parity 0) or sin(m theta) (parity 1).
struct Eigenpair {
    double sigma = 0.0;
    Field phi;
    double mean = 0.0;      // <phi>, weighted mean
    int mode = 0;
    int parity = 0;
    double residual = 0.0;  // max |phi - (tau + sigma) G[weight [phi]]| / max |phi|
};

struct Spectrum {
    std::vector<Eigenpair> pairs;  // ascending sigma
    double nu1 = 0.0;
    double m = 0.0;
    double tau = 0.0;
    double tolerance = 0.0;         // eigensolver tolerance on sigma (absolute)
    std::vector<int> multiplicity;  // cluster size of each pair at 1e-6 relative
};

struct SpectralOptions {
    int modes = 8;           // azimuthal cutoff on the disk
    double tol = 1e-10;      // relative Ritz residual
    std::uint64_t seed = 20240607;
};

Spectrum constrained_eigs(const Solution& s, int k, const SpectralOptions& opt = {});

// Smallest eigenvalue of -Laplace w = (tau + nu) weight w with Dirichlet data.
// The eigenfunction (sign fixed positive) is returned through `eigenfunction`.
double standard_eig_nu1(const Solution& s, const SpectralOptions& opt = {}, Field* eigenfunction = nullptr);

// |<phi>/m - (lambda (p-1) + sigma) <psi [phi]>|.
double check_eigen_identity(const Solution& s, const Eigenpair& pair);

// Same identity for explicit fields on one grid (all weighted means over
// the given domain's quadrature).
double eigen_identity_residual(const DomainPtr& domain, const Field& weight, const Field& psi, const Field& phi,
                               double sigma, double lambda, double p);

// m <[a], [b]> for eigenfunction-like fields (zero on the boundary) of the
// given azimuthal modes; zero for distinct modes.
double fluct_product(const Solution& s, const Field& a, int mode_a, const Field& b, int mode_b);
double fluct_product(const Solution& s, const Eigenpair& a, const Eigenpair& b);

// A(phi) = int weight [phi]^2 - tau int weight [phi] G[weight [phi]].
double second_variation_form(const Solution& s, const Field& phi, int mode = 0);

struct SobolevOptions {
    double tol = 1e-10;
    int max_iter = 20000;
};

struct SobolevResult {
    double t = 2.0;
    double Lambda = 0.0;
    Field w;
    int iterations = 0;
    double gradient_energy = 0.0;  // int |grad w|^2 (discrete)
    double euler_lagrange_residual = 0.0;
};

// Ground state of -Laplace w = Lambda w^{t-1}, int w^t = 1 by the normalized
// Lane-Emden fixed point with Aitken extrapolation.
SobolevResult sobolev_constant(const DomainPtr& domain, double t, const SobolevOptions& opt = {});

// Independent estimate: preconditioned L-BFGS on the scale-invariant quotient
// int |grad w|^2 / (int |w|^t)^{2/t}.
SobolevResult sobolev_constant_direct(const DomainPtr& domain, double t, int max_iter = 200000);

}  // namespace fbp
