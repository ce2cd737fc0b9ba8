#include "fbp/domain.hpp"
#include "fbp/errors.hpp"
#include "fbp/observables.hpp"
#include "fbp/spectral.hpp"
#include "fbp/state_solver.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace fbp;

namespace {

constexpr double pi = std::numbers::pi;
constexpr std::uint64_t seed = 20240607;

DomainPtr square(int n) { return build_domain(DomainKind::UnitSquare, {n, n}); }
DomainPtr disk(int nr, int nt = 32) { return build_domain(DomainKind::UnitDisk, {nr, nt}); }

Solution solve_at(const DomainPtr& d, double lambda, double p, int steps = 4) {
    Solution s = trivial_solution(d, p);
    for (int i = 1; i <= steps; ++i) s = newton_solve(d, lambda * i / steps, p, s.alpha, s.psi);
    return s;
}

// Smooth random interior field.
Field random_field(const DomainPtr& d, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    const double a = g(rng), b = g(rng), c = g(rng), e = g(rng);
    Field f = sample(d, [&](double x, double y) {
        return a * std::sin(pi * x) * std::sin(2.0 * pi * y) + b * std::sin(3.0 * pi * x) * std::sin(pi * y) +
               c * std::sin(2.0 * pi * x) * std::sin(2.0 * pi * y) + e * x * (1.0 - x) * y * (1.0 - y) * 16.0;
    });
    for (Eigen::Index k = 0; k < f.size(); ++k)
        if (d->is_boundary(k)) f[k] = 0.0;
    return f;
}

}  // namespace

TEST_CASE("energy report at lambda = 0") {
    const Solution s = trivial_solution(disk(512), 2.0);
    const EnergyReport r = energy(s);
    CHECK(r.E_quadratic == doctest::Approx(1.0 / (16.0 * pi)).epsilon(5e-3));
    CHECK(r.gap <= r.gap_tolerance);
    CHECK(!r.Psi.has_value());
    for (double p : {1.0, 2.0, 3.0}) {
        const EnergyReport rp = energy(trivial_solution(square(32), p));
        CHECK(rp.J == doctest::Approx(p / (p + 1.0)).epsilon(1e-13));
    }
}

TEST_CASE("energy consistency gap") {
    auto gap = [](int n) { return energy(solve_at(square(n), 6.0, 2.0)).gap; };
    const double g32 = gap(32), g64 = gap(64);
    CHECK(g32 / g64 == doctest::Approx(4.0).epsilon(0.2));
    for (const DomainPtr& d : {square(64), disk(256)}) {
        const EnergyReport r = energy(solve_at(d, 6.0, 2.0));
        CHECK(r.gap <= r.gap_tolerance);
        REQUIRE(r.Psi.has_value());
    }
}

TEST_CASE("torsion energies") {
    CHECK(torsion_energy(disk(512)) == doctest::Approx(1.0 / (16.0 * pi)).epsilon(5e-3));
    CHECK(torsion_energy_ball(2) == doctest::Approx(1.0 / (16.0 * pi)).epsilon(1e-14));
    CHECK(torsion_energy_ball(3) == doctest::Approx(0.019245).epsilon(1e-4));
    for (int N : {2, 3, 4}) {
        const DomainPtr b = build_domain(DomainKind::RadialBall, {2048, 0}, N);
        const double exact = b->radius() * b->radius() / (2.0 * N * (N + 2));
        CHECK(torsion_energy(b) == doctest::Approx(exact).epsilon(5e-3));
    }
    const double sq = torsion_energy(square(128));
    CHECK(sq == doctest::Approx(0.5 * oracle::square_torsion_integral()).epsilon(1e-3));
    CHECK(sq < torsion_energy(disk(512)) * (1.0 - 1e-2));
}

TEST_CASE("lambda star on the disk") {
    const double j01 = oracle::bessel_zero(0, 1);
    CHECK(bessel_j_zero(0, 1) == doctest::Approx(j01).epsilon(1e-12));
    CHECK(bessel_j_zero(1, 1) == doctest::Approx(oracle::bessel_zero(1, 1)).epsilon(1e-12));
    const double L2 = oracle::lane_emden_lambda(2, 2.0);
    CHECK(L2 == doctest::Approx(pi * j01 * j01).epsilon(1e-6));
    CHECK(lambda_star_disk(1.0, L2) == doctest::Approx(L2).epsilon(1e-15));
    const double L3 = 30.0;
    CHECK(lambda_star_disk(2.0, L3) == doctest::Approx(std::pow(8.0 * pi / 3.0, 0.25) * std::pow(L3, 0.75)).epsilon(1e-14));
    CHECK_THROWS_AS(lambda_star_disk(0.5, L3), InvalidArgument);
}

TEST_CASE("free energy is locally minimal in mean-zero directions") {
    std::mt19937_64 rng(seed);
    for (double p : {1.0, 2.0, 3.0}) {
        const DomainPtr d = square(32);
        const Solution s = solve_at(d, 4.0 / p, p);
        const double J0 = free_energy(s, s.rho);
        CHECK(J0 == doctest::Approx(energy(s).J).epsilon(1e-10));
        for (int trial = 0; trial < 20; ++trial) {
            const Field phi = random_field(d, rng);
            const Field fl = weighted_fluctuation(d, s.weight, phi);
            Field f(d, s.weight.values.cwiseProduct(fl.values));
            CHECK(std::abs(integrate(d, f)) <= 1e-12 * f.values.cwiseAbs().maxCoeff());
            const double eps = 1e-3 * s.rho.values.minCoeff() / f.values.cwiseAbs().maxCoeff();
            const double Jp = free_energy(s, Field(d, s.rho.values + eps * f.values));
            const double Jm = free_energy(s, Field(d, s.rho.values - eps * f.values));
            const double A = second_variation_form(s, phi);
            CHECK(A > 0.0);
            CHECK(Jp - J0 >= 0.0);
            CHECK(Jm - J0 >= 0.0);
            CHECK((Jp + Jm - 2.0 * J0) == doctest::Approx(eps * eps * A / p).epsilon(1e-3));
            // First-order term vanishes: the difference is symmetric.
            CHECK(std::abs(Jp - Jm) <= 1e-3 * (Jp + Jm - 2.0 * J0));
        }
    }
}

TEST_CASE("primal functional is stationary at the free-boundary state") {
    std::mt19937_64 rng(seed + 1);
    for (const DomainPtr& d : {square(32), disk(256)}) {
        for (double p : {2.0, 3.0}) {
            const Solution s = solve_at(d, 3.0, p);
            const FreeBoundaryView fb = to_free_boundary(s);
            const DomainPtr& cd = s.domain;
            const double Psi = primal_functional(cd, p, fb.I, fb.v);
            CHECK(Psi == doctest::Approx(*energy(s).Psi).epsilon(1e-14));

            // Weights for the first-order variation of int v^p.
            const Eigen::VectorXd dm = cd->weights().cwiseProduct(fb.v.values.array().pow(p - 1.0).matrix());
            std::normal_distribution<double> g;
            for (int trial = 0; trial < 10; ++trial) {
                Eigen::VectorXd f(cd->node_count());
                for (Eigen::Index k = 0; k < f.size(); ++k) {
                    const double r = cd->coord0()[k];
                    f[k] = cd->is_boundary(k) ? 0.0 : g(rng) * (1.0 + r);
                }
                // Constant shift keeping int v^p fixed to first order.
                f.array() -= dm.dot(f) / dm.sum();
                const double eps = 1e-4 * fb.gamma;
                const double up = primal_functional(cd, p, fb.I, Field(cd, fb.v.values + eps * f));
                const double dn = primal_functional(cd, p, fb.I, Field(cd, fb.v.values - eps * f));
                const double deriv = (up - dn) / (2.0 * eps);
                const double scale = cd->weights().dot(fb.v.values.array().pow(p).matrix().cwiseProduct(f.cwiseAbs()));
                CHECK(std::abs(deriv) <= 1e-6 * scale);
            }
            if (cd->kind() == DomainKind::UnitSquare) {
                Field bad = fb.v;
                bad[cd->node_count() - 1] += 1.0;
                CHECK_THROWS_AS(primal_functional(cd, p, fb.I, bad), InvalidArgument);
            }
        }
    }
}
