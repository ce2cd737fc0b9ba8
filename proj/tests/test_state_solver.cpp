#include "fbp/domain.hpp"
#include "fbp/errors.hpp"
#include "fbp/state_solver.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace fbp;

namespace {

constexpr double pi = std::numbers::pi;

DomainPtr square(int n) { return build_domain(DomainKind::UnitSquare, {n, n}); }
DomainPtr disk(int nr, int nt = 32) { return build_domain(DomainKind::UnitDisk, {nr, nt}); }

void check_invariants(const Solution& s) {
    const Domain& d = *s.domain;
    CHECK(std::abs(s.mass_error) <= 1e-10);
    CHECK(s.alpha >= 0.0);
    CHECK(s.alpha <= 1.0);
    CHECK(s.residual_norm <= 1e-9 * s.rho.values.maxCoeff());
    for (Eigen::Index k = 0; k < d.node_count(); ++k) {
        if (d.is_boundary(k)) CHECK(s.psi[k] == 0.0);
        else CHECK(s.psi[k] >= 0.0);
    }
    CHECK(s.m == doctest::Approx(d.weights().dot(s.weight.values)).epsilon(1e-14));
    CHECK(s.tau == s.p * s.lambda);
}

Solution continue_to(const DomainPtr& d, double lambda, double p, int steps) {
    Solution s = trivial_solution(d, p);
    for (int i = 1; i <= steps; ++i) s = newton_solve(d, lambda * i / steps, p, s.alpha, s.psi);
    return s;
}

}  // namespace

TEST_CASE("conjugate exponent") {
    CHECK(std::isinf(conjugate_exponent(1.0)));
    CHECK(conjugate_exponent(2.0) == 2.0);
    CHECK(conjugate_exponent(3.0) == doctest::Approx(1.5));
    CHECK_THROWS_AS(conjugate_exponent(0.5), InvalidArgument);
}

TEST_CASE("picard inner solve") {
    const DomainPtr s32 = square(32);
    for (double a : {0.2, 1.0}) {
        const PicardResult r = picard_inner_solve(s32, 0.0, a, 2.0);
        CHECK(r.iterations == 1);
        CHECK(r.u.values.cwiseAbs().maxCoeff() == 0.0);
    }

    // -Laplace u = 1 + u with u = 0 at r = R: 1 + u = J_0(r)/J_0(R).
    const DomainPtr d = disk(1024);
    const PicardResult r = picard_inner_solve(d, 1.0, 1.0, 1.0);
    const double R = d->radius();
    CHECK(std::abs(r.u[0] - (1.0 / oracle::bessel_j(0, R) - 1.0)) <= 1e-6);
    CHECK(r.u.values.minCoeff() >= 0.0);

    const PicardResult rs = picard_inner_solve(s32, 0.5, 0.9, 2.0);
    const Eigen::VectorXd ref = oracle::fixed_alpha_newton(s32, 0.5, 0.9, 2.0);
    CHECK((rs.u.values - ref).cwiseAbs().maxCoeff() <= 1e-8);

    CHECK_THROWS_AS(picard_inner_solve(s32, 30.0, 1.0, 1.0), NonContraction);
    CHECK_THROWS_AS(picard_inner_solve(s32, -1.0, 1.0, 1.0), InvalidArgument);
    CHECK_THROWS_AS(picard_inner_solve(s32, 1.0, 1.5, 1.0), InvalidArgument);
}

TEST_CASE("mass deficit") {
    const DomainPtr s = square(32);
    // Exact up to roundoff in the quadrature sum.
    CHECK(std::abs(mass_deficit(s, 0.0, 2.0, 1.0)) <= 1e-13);
    CHECK(mass_deficit(s, 0.0, 2.0, 0.5) == doctest::Approx(-0.75).epsilon(1e-13));
    CHECK(mass_deficit(s, 1.0, 2.0, 1.0) > 0.0);

    // Strictly increasing in alpha, and u nondecreasing nodewise.
    double prev = -INFINITY;
    Eigen::VectorXd uprev = Eigen::VectorXd::Zero(s->node_count());
    for (double a = 0.1; a <= 1.0 + 1e-12; a += 0.1) {
        const double g = mass_deficit(s, 2.0, 2.0, a);
        CHECK(g > prev);
        prev = g;
        const Eigen::VectorXd u = picard_inner_solve(s, 2.0, a, 2.0).u.values;
        CHECK((u - uprev).minCoeff() >= -1e-14);
        uprev = u;
    }
}

TEST_CASE("small-lambda solve") {
    const DomainPtr d = disk(256);
    const Solution s0 = solve_small_lambda(d, 0.0, 2.0);
    CHECK(s0.alpha == 1.0);
    const Field g1 = green_apply(d->compute_domain(), Field(d->compute_domain(), 1.0));
    CHECK((s0.psi.values - g1.values).cwiseAbs().maxCoeff() == 0.0);

    const Solution a = solve_small_lambda(d, 0.5, 2.0);
    check_invariants(a);
    const Solution b = continue_to(d, 0.5, 2.0, 5);
    CHECK(std::abs(a.alpha - b.alpha) <= 1e-8);
    CHECK((a.psi.values - b.psi.values).cwiseAbs().maxCoeff() <= 1e-8);

    const Solution c = solve_small_lambda(d, 1.0, 1.0);
    check_invariants(c);
    CHECK(c.alpha >= 1.0 / 3.0);
    CHECK(c.alpha < 1.0);
}

TEST_CASE("newton solve") {
    const DomainPtr d = disk(512);
    const Solution s14 = newton_solve(d, 14.0, 1.0, 1.0, trivial_solution(d, 1.0).psi);
    const Solution s15 = newton_solve(d, 15.0, 1.0, s14.alpha, s14.psi);
    check_invariants(s15);
    CHECK(s15.alpha == doctest::Approx(oracle::disk_p1_alpha(15.0)).epsilon(5e-3));

    // Starting from a converged state takes no further steps.
    const Solution again = newton_solve(d, 15.0, 1.0, s15.alpha, s15.psi);
    CHECK(again.newton_iterations == 0);
    CHECK(again.alpha == s15.alpha);

    // Dense Newton on the full system, same grid.
    const DomainPtr s = square(24);
    const Solution sn = continue_to(s, 3.0, 2.0, 3);
    check_invariants(sn);
    double alpha_ref = 0.0;
    const Eigen::VectorXd psi_ref = oracle::dense_state_newton(s, 3.0, 2.0, alpha_ref);
    CHECK(std::abs(sn.alpha - alpha_ref) <= 1e-9);
    CHECK((sn.psi.values - psi_ref).cwiseAbs().maxCoeff() <= 1e-9);

    CHECK_THROWS_AS(newton_solve(s, 1.0, 2.0, -1.0, Field(s, 0.0)), PositivityLoss);
    CHECK_THROWS_AS(newton_solve(s, 1.0, 2.0, 1.0, Field(square(16), 0.0)), InvalidArgument);
}

TEST_CASE("uniqueness from different warm starts") {
    const DomainPtr s = square(32);
    const Solution a = continue_to(s, 4.0, 2.0, 4);
    const Solution b = newton_solve(s, 4.0, 2.0, 0.3, Field(s, 2.0 * trivial_solution(s, 2.0).psi.values));
    CHECK(std::abs(a.alpha - b.alpha) <= 1e-7);
    CHECK((a.psi.values - b.psi.values).cwiseAbs().maxCoeff() <= 1e-7);
}

TEST_CASE("euler-lagrange form and a-priori bound") {
    for (const DomainPtr& d : {square(32), disk(256)}) {
        const double bound = psi_apriori_bound(d->compute_domain());
        for (double p : {1.0, 2.0, 3.0}) {
            const Solution s = continue_to(d, 4.0, p, 4);
            const Domain& cd = *s.domain;
            const Field gr = green_apply(s.domain, s.rho);
            double err = 0.0;
            for (Eigen::Index k = 0; k < cd.node_count(); ++k)
                err = std::max(err, std::abs(std::pow(s.rho[k], 1.0 / p) - (s.alpha + s.lambda * gr[k])));
            CHECK(err <= 1e-9);
            CHECK(s.psi.values.maxCoeff() <= bound);
        }
    }
}

TEST_CASE("free-boundary view") {
    const DomainPtr s = square(32);
    const Solution fake = make_solution(s, 0.5, 2.0, 0.8, Field(s, 0.0));
    const FreeBoundaryView f = to_free_boundary(fake);
    CHECK(f.I == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(f.gamma == doctest::Approx(0.4).epsilon(1e-15));

    for (const DomainPtr& d : {disk(512), square(128)}) {
        const Solution sol = solve_small_lambda(d, 0.5, 2.0);
        const FreeBoundaryView v = to_free_boundary(sol);
        CHECK(v.I == doctest::Approx(0.25).epsilon(1e-14));
        CHECK(v.flux_check == doctest::Approx(0.25).epsilon(1e-2));
        for (Eigen::Index k = 0; k < sol.domain->node_count(); ++k)
            if (sol.domain->is_boundary(k)) CHECK(v.v[k] == v.gamma);
    }

    CHECK_THROWS_AS(to_free_boundary(trivial_solution(s, 2.0)), InvalidArgument);
    CHECK_THROWS_AS(to_free_boundary(make_solution(s, 0.5, 1.0, 0.8, Field(s, 0.0))), InvalidArgument);
}
