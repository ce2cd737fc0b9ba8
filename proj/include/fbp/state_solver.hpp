#pragma once

#include "fbp/domain.hpp"

#include <functional>
#include <limits>

namespace fbp {

// Solved state of -Laplace psi = (alpha + lambda psi)^p, int rho = 1.
struct Solution {
    DomainPtr domain;
    double lambda = 0.0;
    double p = 1.0;
    double q = std::numeric_limits<double>::infinity();
    double alpha = 1.0;
    Field psi;
    Field rho;
    Field weight;  // rho^{1/q} = (alpha + lambda psi)^{p-1}
    double m = 1.0;
    double tau = 0.0;
    double residual_norm = 0.0;
    double mass_error = 0.0;
    int newton_iterations = 0;
};

struct FreeBoundaryView {
    double I = 0.0;
    double gamma = 0.0;
    Field v;
    double flux_check = 0.0;
};

struct PicardOptions {
    double tol = 1e-13;
    int max_iter = 500;
    // Observed contraction factor above which the iteration is declared
    // non-contractive.
    double max_factor = 0.9;
};

struct PicardResult {
    Field u;
    int iterations = 0;
    double factor = 0.0;
};

struct NewtonOptions {
    double tol = 1e-11;          // target for the relative residual
    double accept_tol = 1e-9;    // contract; accepted when stagnating at roundoff
    int max_iter = 40;
    int max_halvings = 30;
};

double conjugate_exponent(double p);

// Fixed point u = lambda G[(alpha + u)^p]. Disk input is solved on its
// radial sub-grid; the returned field lives on domain->compute_domain().
PicardResult picard_inner_solve(const DomainPtr& domain, double lambda, double alpha, double p,
                                const PicardOptions& opt = {});

// g(alpha) - 1 with g(alpha) = int (alpha + u_lambda[alpha])^p.
double mass_deficit(const DomainPtr& domain, double lambda, double p, double alpha,
                    const PicardOptions& opt = {});

Solution solve_small_lambda(const DomainPtr& domain, double lambda, double p, const PicardOptions& opt = {});

// Newton iteration on (alpha, psi) at fixed lambda. The scalar increment is
// eliminated through the mass row and the reduced field equation
// (K - tau B) dpsi = r is solved directly.
Solution newton_solve(const DomainPtr& domain, double lambda, double p, double alpha0, const Field& psi0,
                      const NewtonOptions& opt = {});

// Newton solve of the endpoint problem alpha = 0 with lambda unknown.
Solution newton_solve_endpoint(const DomainPtr& domain, double p, double lambda0, const Field& psi0,
                               const NewtonOptions& opt = {});

// Newton on (lambda, alpha, psi) with one extra linear constraint
// g = <c_psi, psi - psi_hat> + c_alpha (alpha - alpha_hat) + c_lambda (lambda - lambda_hat) = 0,
// where c_psi is given on interior nodes.
struct LinearConstraint {
    Eigen::VectorXd c_psi;
    double c_alpha = 0.0;
    double c_lambda = 0.0;
    Eigen::VectorXd psi_hat;  // interior values
    double alpha_hat = 0.0;
    double lambda_hat = 0.0;
};
Solution newton_solve_constrained(const DomainPtr& domain, double p, double lambda0, double alpha0,
                                  const Field& psi0, const LinearConstraint& g, const NewtonOptions& opt = {});

// Assemble derived quantities and residuals for given (lambda, alpha, psi).
Solution make_solution(const DomainPtr& domain, double lambda, double p, double alpha, const Field& psi);

// Exact lambda = 0 solution (1, G[1]).
Solution trivial_solution(const DomainPtr& domain, double p);

// A priori bound on max psi over all solutions: psi = G[rho] with int rho = 1
// gives psi <= sup G; estimated from the discrete Green function at the
// centre node, with safety factor 2.
double psi_apriori_bound(const DomainPtr& domain);

FreeBoundaryView to_free_boundary(const Solution& s);

}  // namespace fbp
