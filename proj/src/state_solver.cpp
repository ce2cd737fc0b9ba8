#include "fbp/state_solver.hpp"

#include "fbp/errors.hpp"
#include "fbp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace fbp {

namespace {

struct Eval {
    bool admissible = false;
    Eigen::VectorXd base, rho, wgt;  // all nodes
    Eigen::VectorXd F;               // interior: K psi - W rho
    double c = 0.0;                  // mass error
    double m = 0.0;
    double residual = 0.0;           // max |F_i / w_i| / max rho
    double merit = 0.0;
};

double weight_power(double base, double p) { return p == 1.0 ? 1.0 : std::pow(base, p - 1.0); }

Eval evaluate(const Domain& d, double lambda, double p, double alpha, const Eigen::VectorXd& psi_int) {
    Eval e;
    const Eigen::VectorXd psi = d.scatter(psi_int);
    e.base = (alpha + lambda * psi.array()).matrix();
    if (!e.base.allFinite() || alpha < 0.0) return e;
    for (int k : d.interior_nodes()) {
        if (e.base[k] <= 0.0 || e.base[k] < 0.5 * alpha) return e;
    }
    e.rho.resize(e.base.size());
    e.wgt.resize(e.base.size());
    for (Eigen::Index k = 0; k < e.base.size(); ++k) {
        e.wgt[k] = weight_power(e.base[k], p);
        e.rho[k] = e.wgt[k] * e.base[k];
    }
    const Eigen::VectorXd& w = d.weights();
    e.F = d.stiffness() * psi_int - d.gather(w.cwiseProduct(e.rho));
    e.c = w.dot(e.rho) - 1.0;
    e.m = w.dot(e.wgt);
    double r = 0.0;
    for (Eigen::Index i = 0; i < e.F.size(); ++i) r = std::max(r, std::abs(e.F[i]) / w[d.interior_nodes()[i]]);
    e.residual = r / std::max(e.rho.maxCoeff(), 1e-300);
    e.merit = std::max(e.residual, std::abs(e.c));
    e.admissible = true;
    return e;
}

struct Iterate {
    double lambda = 0.0;
    double alpha = 0.0;
    Eigen::VectorXd psi;  // interior
};

struct Step {
    double dlambda = 0.0;
    double dalpha = 0.0;
    Eigen::VectorXd dpsi;
};

using StepFn = std::function<Step(const Iterate&, const Eval&)>;
using ExtraFn = std::function<double(const Iterate&)>;

Solution run_newton(const DomainPtr& dom, double p, Iterate x, const StepFn& step, const ExtraFn& extra,
                    const NewtonOptions& opt) {
    const Domain& d = *dom;
    const double bound = psi_apriori_bound(dom);
    auto merit_of = [&](const Iterate& it, const Eval& e) {
        return extra ? std::max(e.merit, extra(it)) : e.merit;
    };
    Eval ev = evaluate(d, x.lambda, p, x.alpha, x.psi);
    if (!ev.admissible) throw PositivityLoss("initial iterate violates alpha + lambda psi > 0");
    double merit = merit_of(x, ev);
    int iter = 0;
    // A start that already meets the contract is returned unchanged.
    while (merit > opt.accept_tol || (iter > 0 && merit > opt.tol)) {
        if (iter >= opt.max_iter) {
            if (merit <= opt.accept_tol) break;
            throw NonConvergence("Newton iteration limit reached");
        }
        const Step s = step(x, ev);
        double t = 1.0;
        bool accepted = false;
        bool positivity_failed = false;
        for (int h = 0; h <= opt.max_halvings; ++h, t *= 0.5) {
            Iterate trial{x.lambda + t * s.dlambda, x.alpha + t * s.dalpha, x.psi + t * s.dpsi};
            if (trial.psi.size() > 0 && trial.psi.cwiseAbs().maxCoeff() > bound) continue;
            Eval et = evaluate(d, trial.lambda, p, trial.alpha, trial.psi);
            if (!et.admissible) {
                positivity_failed = true;
                continue;
            }
            const double mt = merit_of(trial, et);
            if (mt < (1.0 - 1e-4 * t) * merit) {
                x = std::move(trial);
                ev = std::move(et);
                merit = mt;
                accepted = true;
                break;
            }
        }
        ++iter;
        if (!accepted) {
            if (merit <= opt.accept_tol) break;
            if (positivity_failed) throw PositivityLoss("Newton step leaves the admissible set");
            throw NonConvergence("Newton line search failed");
        }
        const double step_size = t * s.dpsi.cwiseAbs().maxCoeff();
        if (merit <= opt.accept_tol && step_size <= 1e-14 * std::max(1.0, x.psi.cwiseAbs().maxCoeff())) break;
    }
    Solution sol = make_solution(dom, x.lambda, p, x.alpha, Field(dom, d.scatter(x.psi)));
    sol.newton_iterations = iter;
    return sol;
}

Eigen::VectorXd interior_d(const Domain& d, const Eval& ev) {
    return d.gather(d.weights().cwiseProduct(ev.wgt));
}

}  // namespace

double conjugate_exponent(double p) {
    if (p < 1.0) throw InvalidArgument("p must be >= 1");
    return p == 1.0 ? std::numeric_limits<double>::infinity() : p / (p - 1.0);
}

double psi_apriori_bound(const DomainPtr& domain) {
    const Domain& d = *domain;
    Eigen::Index centre = 0;
    if (d.kind() == DomainKind::UnitSquare) {
        const int n = d.resolution().n1;
        centre = static_cast<Eigen::Index>(n / 2) * n + n / 2;
    }
    Eigen::VectorXd e = Eigen::VectorXd::Zero(d.interior_count());
    e[d.interior_index(centre)] = 1.0;
    return 2.0 * d.solve_stiffness(e).maxCoeff();
}

Solution make_solution(const DomainPtr& domain, double lambda, double p, double alpha, const Field& psi) {
    const Domain& d = *domain;
    Solution s;
    s.domain = domain;
    s.lambda = lambda;
    s.p = p;
    s.q = conjugate_exponent(p);
    s.alpha = alpha;
    s.psi = psi;
    s.rho = Field(domain);
    s.weight = Field(domain);
    for (Eigen::Index k = 0; k < d.node_count(); ++k) {
        const double base = alpha + lambda * psi[k];
        if (!(base >= 0.0)) throw PositivityLoss("alpha + lambda psi < 0");
        s.weight[k] = weight_power(base, p);
        s.rho[k] = s.weight[k] * base;
    }
    s.m = d.weights().dot(s.weight.values);
    s.tau = p * lambda;
    const Eigen::VectorXd F =
        d.stiffness() * d.gather(psi.values) - d.gather(d.weights().cwiseProduct(s.rho.values));
    double r = 0.0;
    for (Eigen::Index i = 0; i < F.size(); ++i) r = std::max(r, std::abs(F[i]) / d.weights()[d.interior_nodes()[i]]);
    s.residual_norm = r;
    s.mass_error = d.weights().dot(s.rho.values) - 1.0;
    return s;
}

Solution trivial_solution(const DomainPtr& domain, double p) {
    const DomainPtr d = domain->compute_domain();
    return make_solution(d, 0.0, p, 1.0, green_apply(d, Field(d, 1.0)));
}

namespace {

PicardResult picard_from(const DomainPtr& d, double lambda, double alpha, double p, Eigen::VectorXd u,
                         const PicardOptions& opt) {
    if (lambda < 0.0) throw InvalidArgument("picard: lambda must be >= 0");
    if (alpha < 0.0 || alpha > 1.0) throw InvalidArgument("picard: alpha must lie in [0, 1]");
    const Eigen::VectorXd& w = d->weights();
    double prev_diff = -1.0;
    int bad = 0;
    PicardResult res;
    for (int it = 1; it <= opt.max_iter; ++it) {
        Eigen::VectorXd src(u.size());
        for (Eigen::Index k = 0; k < u.size(); ++k) src[k] = std::pow(alpha + u[k], p);
        Eigen::VectorXd next = d->scatter(d->solve_stiffness(d->gather(w.cwiseProduct(src))) * lambda);
        const double diff = (next - u).cwiseAbs().maxCoeff();
        u = std::move(next);
        res.iterations = it;
        if (prev_diff > 0.0) {
            const double f = diff / prev_diff;
            res.factor = std::max(res.factor, it > 2 ? f : 0.0);
            if (it > 2 && f > opt.max_factor && diff > 1e-12) {
                if (++bad >= 2) throw NonContraction("Picard map is not contracting");
            } else {
                bad = 0;
            }
        }
        if (diff <= opt.tol || diff <= 64.0 * 2.2e-16 * std::max(1.0, u.cwiseAbs().maxCoeff())) {
            res.u = Field(d, std::move(u));
            return res;
        }
        prev_diff = diff;
    }
    throw NonContraction("Picard iteration did not converge");
}

double deficit_of(const DomainPtr& d, double alpha, double p, const Eigen::VectorXd& u) {
    double g = 0.0;
    for (Eigen::Index k = 0; k < u.size(); ++k) g += d->weights()[k] * std::pow(alpha + u[k], p);
    return g - 1.0;
}

}  // namespace

PicardResult picard_inner_solve(const DomainPtr& domain, double lambda, double alpha, double p,
                                const PicardOptions& opt) {
    const DomainPtr d = domain->compute_domain();
    return picard_from(d, lambda, alpha, p, Eigen::VectorXd::Zero(d->node_count()), opt);
}

double mass_deficit(const DomainPtr& domain, double lambda, double p, double alpha, const PicardOptions& opt) {
    const DomainPtr d = domain->compute_domain();
    const PicardResult r = picard_from(d, lambda, alpha, p, Eigen::VectorXd::Zero(d->node_count()), opt);
    return deficit_of(d, alpha, p, r.u.values);
}

Solution solve_small_lambda(const DomainPtr& domain, double lambda, double p, const PicardOptions& opt) {
    const DomainPtr d = domain->compute_domain();
    if (lambda == 0.0) return trivial_solution(d, p);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(d->node_count());
    auto g = [&](double a) {
        u = picard_from(d, lambda, a, p, u, opt).u.values;
        return deficit_of(d, a, p, u);
    };
    double lo = 1e-6, hi = 1.0;
    double glo = g(lo);
    double ghi = g(hi);
    if (!(glo < 0.0 && ghi > 0.0)) throw NotBracketed("mass deficit does not change sign on [1e-6, 1]");
    while (hi - lo > 1e-4) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        if (gm < 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
            ghi = gm;
        }
    }
    double a0 = lo, g0 = glo, a1 = hi, g1 = ghi;
    for (int it = 0; it < 60; ++it) {
        const double a2 = a1 - g1 * (a1 - a0) / (g1 - g0);
        if (!(a2 > 0.0 && a2 <= 1.0)) throw NotBracketed("secant left (0, 1]");
        const double g2 = g(a2);
        a0 = a1;
        g0 = g1;
        a1 = a2;
        g1 = g2;
        if (std::abs(a1 - a0) <= 1e-12 || g1 == 0.0) break;
    }
    u = picard_from(d, lambda, a1, p, u, opt).u.values;
    return make_solution(d, lambda, p, a1, Field(d, u / lambda));
}

Solution newton_solve(const DomainPtr& domain, double lambda, double p, double alpha0, const Field& psi0,
                      const NewtonOptions& opt) {
    const DomainPtr d = domain->compute_domain();
    if (psi0.values.size() != d->node_count()) throw InvalidArgument("newton_solve: initial field on wrong grid");
    if (lambda < 0.0) throw InvalidArgument("newton_solve: lambda must be >= 0");
    const double tau = p * lambda;
    StepFn step = [&](const Iterate& x, const Eval& ev) {
        const Eigen::VectorXd dv = interior_d(*d, ev);
        const double m = ev.m;
        SpMat A = d->stiffness();
        for (Eigen::Index i = 0; i < dv.size(); ++i) A.coeffRef(i, i) -= tau * dv[i];
        Eigen::MatrixXd U = dv * (tau / m), V = dv, C(1, 1);
        C(0, 0) = -1.0;
        BorderedSolver lu(A, U, V, C);
        Eigen::VectorXd rhs(dv.size() + 1);
        rhs.head(dv.size()) = -ev.F - dv * (ev.c / m);
        rhs[dv.size()] = 0.0;
        const Eigen::VectorXd sol = lu.solve(rhs);
        Step s;
        s.dpsi = sol.head(dv.size());
        s.dalpha = -ev.c / (p * m) - x.lambda * dv.dot(s.dpsi) / m;
        return s;
    };
    Iterate x0{lambda, alpha0, d->gather(psi0.values)};
    return run_newton(d, p, std::move(x0), step, nullptr, opt);
}

Solution newton_solve_constrained(const DomainPtr& domain, double p, double lambda0, double alpha0,
                                  const Field& psi0, const LinearConstraint& g, const NewtonOptions& opt) {
    const DomainPtr d = domain->compute_domain();
    if (psi0.values.size() != d->node_count()) throw InvalidArgument("constrained Newton: initial field on wrong grid");
    const Eigen::Index n = d->interior_count();
    const Eigen::VectorXd cpsi = g.c_psi.size() == n ? g.c_psi : Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd psihat = g.psi_hat.size() == n ? g.psi_hat : Eigen::VectorXd::Zero(n);
    auto gval = [&](const Iterate& x) {
        return cpsi.dot(x.psi - psihat) + g.c_alpha * (x.alpha - g.alpha_hat) + g.c_lambda * (x.lambda - g.lambda_hat);
    };
    StepFn step = [&](const Iterate& x, const Eval& ev) {
        const Eigen::VectorXd dv = interior_d(*d, ev);
        const double tau = p * x.lambda;
        SpMat A = d->stiffness();
        for (Eigen::Index i = 0; i < n; ++i) A.coeffRef(i, i) -= tau * dv[i];
        const Eigen::VectorXd dpsi = dv.cwiseProduct(x.psi);
        Eigen::MatrixXd U(n, 2), V(n, 2), C(2, 2);
        U.col(0) = -p * dv;
        U.col(1) = -p * dpsi;
        V.col(0) = tau * dv;
        V.col(1) = cpsi;
        C << p * ev.m, p * dv.dot(x.psi), g.c_alpha, g.c_lambda;
        BorderedSolver lu(A, U, V, C);
        Eigen::VectorXd rhs(n + 2);
        rhs.head(n) = -ev.F;
        rhs[n] = -ev.c;
        rhs[n + 1] = -gval(x);
        const Eigen::VectorXd sol = lu.solve(rhs);
        Step s;
        s.dpsi = sol.head(n);
        s.dalpha = sol[n];
        s.dlambda = sol[n + 1];
        return s;
    };
    const double gscale = std::max({cpsi.cwiseAbs().sum(), std::abs(g.c_alpha), std::abs(g.c_lambda), 1e-300});
    ExtraFn extra = [&](const Iterate& x) { return std::abs(gval(x)) / gscale; };
    Iterate x0{lambda0, alpha0, d->gather(psi0.values)};
    return run_newton(d, p, std::move(x0), step, extra, opt);
}

Solution newton_solve_endpoint(const DomainPtr& domain, double p, double lambda0, const Field& psi0,
                               const NewtonOptions& opt) {
    LinearConstraint g;
    g.c_alpha = 1.0;
    g.alpha_hat = 0.0;
    return newton_solve_constrained(domain, p, lambda0, 0.0, psi0, g, opt);
}

FreeBoundaryView to_free_boundary(const Solution& s) {
    if (s.p == 1.0) throw InvalidArgument("free-boundary map is singular for p = 1");
    if (!(s.lambda > 0.0)) throw InvalidArgument("free-boundary map needs lambda > 0");
    const Domain& d = *s.domain;
    const double scale = std::pow(s.lambda, 1.0 / (s.p - 1.0));
    FreeBoundaryView fb;
    fb.I = std::pow(s.lambda, s.q);
    fb.gamma = scale * s.alpha;
    fb.v = Field(s.domain, (scale * (s.alpha + s.lambda * s.psi.values.array())).matrix());
    for (Eigen::Index k = 0; k < d.node_count(); ++k)
        if (d.is_boundary(k)) fb.v[k] = fb.gamma;
    const Eigen::VectorXd& v = fb.v.values;
    const double h = d.spacing();
    double flux = 0.0;
    if (d.kind() == DomainKind::RadialBall) {
        const Eigen::Index n = d.node_count() - 1;
        const double dvdr = (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h);
        const int N = d.dimension();
        flux = -dvdr * N * unit_ball_volume(N) * std::pow(d.radius(), N - 1);
    } else if (d.kind() == DomainKind::UnitDisk) {
        const int nr = d.resolution().n1, nt = d.angular_nodes();
        const double dt = 2.0 * std::acos(-1.0) / nt;
        for (int j = 0; j < nt; ++j) {
            const double dvdr = (3.0 * v[d.polar_index(nr, j)] - 4.0 * v[d.polar_index(nr - 1, j)] +
                                 v[d.polar_index(nr - 2, j)]) / (2.0 * h);
            flux -= dvdr * d.radius() * dt;
        }
    } else {
        const int n = d.resolution().n1;
        auto at = [&](int i, int j) { return v[static_cast<Eigen::Index>(j) * n + i]; };
        for (int t = 0; t < n; ++t) {
            const double wt = (t == 0 || t == n - 1) ? 0.5 * h : h;
            const double left = (-3.0 * at(0, t) + 4.0 * at(1, t) - at(2, t)) / (2.0 * h);
            const double right = (-3.0 * at(n - 1, t) + 4.0 * at(n - 2, t) - at(n - 3, t)) / (2.0 * h);
            const double bottom = (-3.0 * at(t, 0) + 4.0 * at(t, 1) - at(t, 2)) / (2.0 * h);
            const double top = (-3.0 * at(t, n - 1) + 4.0 * at(t, n - 2) - at(t, n - 3)) / (2.0 * h);
            flux += wt * (left + right + bottom + top);
        }
    }
    fb.flux_check = flux;
    return fb;
}

}  // namespace fbp
