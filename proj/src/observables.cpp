#include "fbp/observables.hpp"

#include "fbp/errors.hpp"

#include <cmath>
#include <numbers>

namespace fbp {

double energy_gap_tolerance(const Domain& d, double E) {
    const double L = d.kind() == DomainKind::UnitSquare ? 1.0 : d.radius();
    const double hr = d.spacing() / L;
    return 4.0 * hr * hr * std::abs(E) + 1e-12;
}

EnergyReport energy(const Solution& s) {
    const Domain& d = *s.domain;
    EnergyReport r;
    r.E_quadratic = 0.5 * d.weights().dot(s.rho.values.cwiseProduct(s.psi.values));
    r.E_dirichlet = dirichlet_energy(s.domain, s.psi);
    r.gap = std::abs(r.E_quadratic - r.E_dirichlet);
    r.gap_tolerance = energy_gap_tolerance(d, r.E_quadratic);
    double a = 0.0;
    for (Eigen::Index k = 0; k < d.node_count(); ++k) a += d.weights()[k] * std::pow(s.rho[k], 1.0 + 1.0 / s.p);
    r.J = s.p / (s.p + 1.0) * a - s.lambda * r.E_quadratic;
    if (s.p > 1.0 && s.lambda > 0.0) {
        const FreeBoundaryView fb = to_free_boundary(s);
        r.Psi = primal_functional(s.domain, s.p, fb.I, fb.v);
    }
    return r;
}

double torsion_energy(const DomainPtr& domain) {
    const Field psi0 = green_apply(domain, Field(domain, 1.0));
    return 0.5 * integrate(domain, psi0);
}

double torsion_energy_ball(int N) {
    return std::pow(unit_ball_volume(N), -2.0 / N) / (4.0 * (N + 2));
}

double lambda_star_disk(double p, double Lambda) {
    if (p < 1.0) throw InvalidArgument("p must be >= 1");
    return std::pow(8.0 * std::numbers::pi / (p + 1.0), (p - 1.0) / (2.0 * p)) * std::pow(Lambda, (p + 1.0) / (2.0 * p));
}

double free_energy(const Solution& s, const Field& rho) {
    const Domain& d = *s.domain;
    double a = 0.0;
    for (Eigen::Index k = 0; k < d.node_count(); ++k) {
        if (rho[k] < 0.0) throw InvalidArgument("free_energy: negative density");
        a += d.weights()[k] * std::pow(rho[k], 1.0 + 1.0 / s.p);
    }
    const Eigen::VectorXd b = d.gather(d.weights().cwiseProduct(rho.values));
    return s.p / (s.p + 1.0) * a - 0.5 * s.lambda * b.dot(d.solve_stiffness(b));
}

double primal_functional(const DomainPtr& domain, double p, double I, const Field& v) {
    const Domain& d = *domain;
    double gamma = 0.0;
    bool first = true;
    for (Eigen::Index k = 0; k < d.node_count(); ++k) {
        if (!d.is_boundary(k)) continue;
        if (first) {
            gamma = v[k];
            first = false;
        } else if (v[k] != gamma) {
            throw InvalidArgument("primal_functional: boundary trace is not constant");
        }
    }
    const Eigen::VectorXd u = d.gather(v.values).array() - gamma;
    double pot = 0.0;
    for (Eigen::Index k = 0; k < d.node_count(); ++k)
        pot += d.weights()[k] * std::pow(std::max(v[k], 0.0), p + 1.0);
    return 0.5 * u.dot(d.stiffness() * u) - pot / (p + 1.0) + I * gamma;
}

double bessel_j_zero(int nu, int k) {
    double x = (k + 0.5 * nu - 0.25) * std::numbers::pi;
    for (int it = 0; it < 100; ++it) {
        const double f = std::cyl_bessel_j(nu, x);
        const double df = nu == 0 ? -std::cyl_bessel_j(1, x)
                                  : 0.5 * (std::cyl_bessel_j(nu - 1, x) - std::cyl_bessel_j(nu + 1, x));
        const double dx = f / df;
        x -= dx;
        if (std::abs(dx) < 1e-15 * x) break;
    }
    return x;
}

}  // namespace fbp
