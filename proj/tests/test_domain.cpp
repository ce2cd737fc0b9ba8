#include "fbp/domain.hpp"
#include "fbp/errors.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace fbp;

namespace {

constexpr double pi = std::numbers::pi;
const double R = 1.0 / std::sqrt(pi);

DomainPtr square(int n) { return build_domain(DomainKind::UnitSquare, {n, n}); }
DomainPtr disk(int nr, int nt = 64) { return build_domain(DomainKind::UnitDisk, {nr, nt}); }

double interior_max(const DomainPtr& d, const Eigen::VectorXd& v) {
    return d->gather(v).cwiseAbs().maxCoeff();
}

Field quadratic(const DomainPtr& d) {
    return sample(d, [](double r, double) { return (R * R - r * r) / 4.0; });
}

double sine_laplacian_error(int n) {
    const DomainPtr d = square(n);
    const Field f = sample(d, [](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); });
    const Field lf = laplacian_apply(d, f);
    return interior_max(d, lf.values - 2.0 * pi * pi * f.values);
}

}  // namespace

TEST_CASE("geometry and quadrature") {
    const DomainPtr s = square(64);
    CHECK(s->node_count() == 64 * 64);
    CHECK(std::abs(s->weights().sum() - 1.0) < 1e-12);
    int boundary = 0;
    for (Eigen::Index k = 0; k < s->node_count(); ++k) {
        const double x = s->coord0()[k], y = s->coord1()[k];
        const bool edge = x == 0.0 || y == 0.0 || std::abs(x - 1.0) < 1e-15 || std::abs(y - 1.0) < 1e-15;
        CHECK(edge == s->is_boundary(k));
        boundary += s->is_boundary(k);
    }
    CHECK(boundary == 4 * 63);

    const DomainPtr d = disk(128, 64);
    CHECK(std::abs(d->radius() - 0.5641896) < 1e-7);
    CHECK(std::abs(d->weights().sum() - 1.0) < 1e-12);
    CHECK(std::abs(d->compute_domain()->weights().sum() - 1.0) < 1e-12);

    const DomainPtr b3 = build_domain(DomainKind::RadialBall, {1024, 0}, 3);
    CHECK(std::abs(b3->radius() - std::cbrt(3.0 / (4.0 * pi))) < 1e-12);
    CHECK(std::abs(b3->radius() - 0.6203505) < 1e-7);
    CHECK(std::abs(b3->weights().sum() - 1.0) < 1e-12);
}

TEST_CASE("invalid construction") {
    CHECK_THROWS_AS(build_domain(DomainKind::UnitSquare, {8, 8}), InvalidArgument);
    CHECK_THROWS_AS(build_domain(DomainKind::UnitDisk, {15, 64}), InvalidArgument);
    const DomainPtr a = square(16), b = square(32);
    CHECK_THROWS_AS(laplacian_apply(a, Field(b, 1.0)), InvalidArgument);
}

TEST_CASE("laplacian") {
    // Separable eigenfield, second order.
    const double e32 = sine_laplacian_error(32), e64 = sine_laplacian_error(64);
    CHECK(e64 < 1e-2 * 2.0 * pi * pi);
    CHECK(e32 / e64 == doctest::Approx(4.0).epsilon(0.15));

    for (int nr : {64, 128}) {
        const DomainPtr d = disk(nr, 64);
        const Field lf = laplacian_apply(d, quadratic(d));
        const double h = d->spacing();
        CHECK(interior_max(d, lf.values.array() - 1.0) <= 10.0 * h * h);
    }
    for (const DomainPtr& d : {square(32), disk(64)}) {
        const Field z = laplacian_apply(d, Field(d, 0.0));
        CHECK(z.values.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("green operator") {
    const DomainPtr d = disk(256, 64);
    const Field psi0 = green_apply(d, Field(d, 1.0));
    CHECK(psi0[0] == doctest::Approx(1.0 / (4.0 * pi)).epsilon(5e-3));

    const double series = oracle::square_torsion_integral();
    const DomainPtr s = square(128);
    CHECK(integrate(s, green_apply(s, Field(s, 1.0))) == doctest::Approx(series).epsilon(1e-3));

    CHECK(green_apply(s, Field(s, 0.0)).values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("integration and weighted means") {
    for (const DomainPtr& d : {square(32), disk(64), build_domain(DomainKind::RadialBall, {128, 0}, 4)}) {
        CHECK(integrate(d, Field(d, 1.0)) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(integrate(d, Field(d, -2.5)) == doctest::Approx(-2.5).epsilon(1e-12));
    }
    const DomainPtr d = disk(256);
    CHECK(integrate(d, quadratic(d)) == doctest::Approx(1.0 / (8.0 * pi)).epsilon(5e-3));

    const DomainPtr s = square(32);
    const Field f = sample(s, [](double x, double y) { return x * x + std::cos(3.0 * y); });
    CHECK(weighted_mean(s, Field(s, 1.0), f) == doctest::Approx(integrate(s, f)).epsilon(1e-13));

    const Field wgt = sample(s, [](double x, double y) { return 1.0 + x + 2.0 * y * y; });
    CHECK(weighted_mean(s, wgt, Field(s, 3.25)) == doctest::Approx(3.25).epsilon(1e-14));
    CHECK(weighted_fluctuation(s, wgt, Field(s, 3.25)).values.cwiseAbs().maxCoeff() < 1e-14);
    const Field fl = weighted_fluctuation(s, wgt, f);
    CHECK(std::abs(weighted_mean(s, wgt, fl)) < 1e-13 * f.values.cwiseAbs().maxCoeff());

    Field bad = wgt;
    bad[s->interior_nodes()[5]] = 0.0;
    CHECK_THROWS_AS(weighted_mean(s, bad, f), InvalidArgument);
}

TEST_CASE("dirichlet energy") {
    const DomainPtr s = square(32);
    CHECK(dirichlet_energy(s, Field(s, 0.0)) == 0.0);
    const DomainPtr d = disk(256);
    CHECK(dirichlet_energy(d, green_apply(d, Field(d, 1.0))) == doctest::Approx(1.0 / (16.0 * pi)).epsilon(5e-3));
    // psi_0 = (R^2 - r^2)/(2N) on the unit-volume N-ball, so
    // 1/2 int |grad psi_0|^2 = R^2/(2N(N+2)).
    for (int N : {3, 4}) {
        const DomainPtr b = build_domain(DomainKind::RadialBall, {1024, 0}, N);
        const double exact = b->radius() * b->radius() / (2.0 * N * (N + 2));
        CHECK(dirichlet_energy(b, green_apply(b, Field(b, 1.0))) == doctest::Approx(exact).epsilon(5e-3));
    }
}

TEST_CASE("adjointness, inverse consistency, positivity") {
    for (const DomainPtr& d : {square(48), disk(96, 32)}) {
        const Field f = sample(d, [](double a, double b) { return std::cos(2.0 * a) + a * std::sin(3.0 * b); });
        const Field g = sample(d, [](double a, double b) { return 1.0 + a * a - 0.5 * std::cos(b); });
        const double fg = integrate(d, Field(d, f.values.cwiseProduct(green_apply(d, g).values)));
        const double gf = integrate(d, Field(d, g.values.cwiseProduct(green_apply(d, f).values)));
        CHECK(std::abs(fg - gf) <= 1e-10 * std::max(1.0, std::abs(fg)));

        const Field back = laplacian_apply(d, green_apply(d, f));
        CHECK(interior_max(d, back.values - f.values) <= 1e-10 * f.values.cwiseAbs().maxCoeff());

        Field src(d, 0.0);
        src[d->interior_nodes()[d->interior_count() / 3]] = 1.0;
        const Field u = green_apply(d, src);
        CHECK(d->gather(u.values).minCoeff() > 0.0);
    }
}

TEST_CASE("second-order convergence of the analytic examples") {
    const double series = oracle::square_torsion_integral();
    auto torsion_err = [&](int n) {
        const DomainPtr s = square(n);
        return std::abs(integrate(s, green_apply(s, Field(s, 1.0))) - series);
    };
    CHECK(torsion_err(32) / torsion_err(64) == doctest::Approx(4.0).epsilon(0.2));

    auto quad_err = [&](int nr) {
        const DomainPtr d = disk(nr, 32);
        return std::abs(integrate(d, quadratic(d)) - 1.0 / (8.0 * pi));
    };
    CHECK(quad_err(64) / quad_err(128) == doctest::Approx(4.0).epsilon(0.2));

    CHECK(sine_laplacian_error(32) / sine_laplacian_error(64) == doctest::Approx(4.0).epsilon(0.15));
}
