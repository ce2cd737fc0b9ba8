#pragma once

#include "fbp/domain.hpp"
#include "fbp/state_solver.hpp"

#include <optional>

namespace fbp {

struct EnergyReport {
    double E_quadratic = 0.0;  // 1/2 int rho psi
    double E_dirichlet = 0.0;  // 1/2 int |grad psi|^2, cell-midpoint gradients
    double J = 0.0;            // free energy at rho
    std::optional<double> Psi; // primal functional at v_I (p > 1, lambda > 0)
    double gap = 0.0;          // |E_quadratic - E_dirichlet|
    double gap_tolerance = 0.0;
};

EnergyReport energy(const Solution& s);

// Grid-dependent bound on the gap between the two energy expressions.
double energy_gap_tolerance(const Domain& d, double E);

// E_0 = 1/2 int G[1].
double torsion_energy(const DomainPtr& domain);

// |B_1|^{-2/N} / (4 (N + 2)).
double torsion_energy_ball(int N);

// (8 pi/(p+1))^{(p-1)/(2p)} Lambda^{(p+1)/(2p)}, Lambda = Lambda(D_2, p+1).
double lambda_star_disk(double p, double Lambda_p_plus_1);

// J(rho) = p/(p+1) int rho^{1+1/p} - lambda/2 int rho G[rho] on s.domain.
double free_energy(const Solution& s, const Field& rho);

// Psi_I(v) = 1/2 int |grad v|^2 - 1/(p+1) int (v)_+^{p+1} + I v|boundary.
// v must be constant on the boundary.
double primal_functional(const DomainPtr& domain, double p, double I, const Field& v);

// k-th positive zero of the Bessel function J_nu.
double bessel_j_zero(int nu, int k);

}  // namespace fbp
