#include "fbp/continuation.hpp"

#include "fbp/errors.hpp"
#include "fbp/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace fbp {

namespace {

// Interior weight vector d = W rho^{1/q}.
Eigen::VectorXd interior_weight(const Solution& s) {
    return s.domain->gather(s.domain->weights().cwiseProduct(s.weight.values));
}

// Solver for (K - tau B) x = r with B = D - d d^T / m.
class ReducedOperator {
public:
    explicit ReducedOperator(const Solution& s)
        : d_(interior_weight(s)), m_(s.m), lu_(build(s, d_, s.m)) {}

    Eigen::VectorXd solve(const Eigen::VectorXd& r) const {
        Eigen::VectorXd rhs(r.size() + 1);
        rhs.head(r.size()) = r;
        rhs[r.size()] = 0.0;
        return lu_.solve(rhs).head(r.size());
    }
    Eigen::VectorXd apply_b(const Eigen::VectorXd& x) const { return d_.cwiseProduct(x) - d_ * (d_.dot(x) / m_); }
    const Eigen::VectorXd& d() const { return d_; }

private:
    static BorderedSolver build(const Solution& s, const Eigen::VectorXd& d, double m) {
        SpMat A = s.domain->stiffness();
        for (Eigen::Index i = 0; i < d.size(); ++i) A.coeffRef(i, i) -= s.tau * d[i];
        Eigen::MatrixXd U = d * (s.tau / m), V = d, C(1, 1);
        C(0, 0) = -1.0;
        return BorderedSolver(A, U, V, C);
    }
    Eigen::VectorXd d_;
    double m_;
    BorderedSolver lu_;
};

double state_distance(const Domain& d, double dl, double da, const Eigen::VectorXd& dpsi_int) {
    const Eigen::VectorXd w = d.gather(d.weights());
    return std::sqrt(dl * dl + da * da + dpsi_int.cwiseProduct(dpsi_int).dot(w));
}

const Eigenpair* radial_pair(const Spectrum& sp) {
    for (const auto& ep : sp.pairs) {
        if (ep.mode != 0) continue;
        const double scale = ep.phi.values.cwiseAbs().maxCoeff();
        if (std::abs(ep.mean) > 1e-6 * scale) return &ep;
    }
    return nullptr;
}

}  // namespace

std::string to_string(Termination t) {
    switch (t) {
        case Termination::LambdaMax: return "lambda_max reached";
        case Termination::AlphaTol: return "alpha <= alpha_tol";
        case Termination::FoldLimit: return "fold limit";
        case Termination::SolverFailure: return "solver failure";
    }
    return "unknown";
}

Tangent tangent(const Solution& s) {
    const Domain& d = *s.domain;
    const ReducedOperator op(s);
    const Eigen::VectorXd psi = d.gather(s.psi.values);
    const Eigen::VectorXd eta = op.solve(s.p * op.apply_b(psi));
    Tangent t;
    t.eta = Field(s.domain, d.scatter(eta));
    t.dalpha_dlambda = -(s.lambda * op.d().dot(eta) + op.d().dot(psi)) / s.m;
    return t;
}

WDerivative w_derivative(const Solution& s) {
    const Domain& d = *s.domain;
    const ReducedOperator op(s);
    const Eigen::VectorXd w = op.solve(d.gather(d.weights().cwiseProduct(s.rho.values)));
    WDerivative r;
    r.w = Field(s.domain, d.scatter(w));
    r.dalpha_dlambda = -op.d().dot(w) / s.m;
    return r;
}

EnergySlope energy_slope(const Solution& s, const Field& eta, double tol) {
    const Domain& d = *s.domain;
    const Eigen::VectorXd dv = interior_weight(s);
    const Eigen::VectorXd e = d.gather(eta.values), psi = d.gather(s.psi.values);
    auto bprod = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return a.cwiseProduct(b).dot(dv) - dv.dot(a) * dv.dot(b) / s.m;
    };
    EnergySlope r;
    r.direct = d.gather(d.weights().cwiseProduct(s.rho.values)).dot(e);
    r.spectral = s.tau * bprod(e, psi) + s.p * bprod(psi, psi);
    r.mismatch = std::abs(r.direct - r.spectral) / std::max({std::abs(r.direct), std::abs(r.spectral), 1e-300});
    if (r.mismatch > tol) throw SolverError("energy slope forms disagree");
    return r;
}

double fourier_slope_check(const Solution& s, const Spectrum& sp, const Field& eta, int count, double* scale) {
    if (static_cast<int>(sp.pairs.size()) < count) throw InvalidArgument("fourier_slope_check: too few eigenpairs");
    double worst = 0.0, xmax = 0.0;
    for (int j = 0; j < count; ++j) {
        const Eigenpair& ep = sp.pairs[j];
        const double xi = fluct_product(s, ep.phi, ep.mode, s.psi, 0);
        const double beta = fluct_product(s, ep.phi, ep.mode, eta, 0);
        worst = std::max(worst, std::abs(ep.sigma * beta - s.p * xi));
        xmax = std::max(xmax, std::abs(xi));
    }
    if (scale) *scale = xmax;
    return worst;
}

Direction branch_direction(const Solution& s, const Direction* prev) {
    const Domain& d = *s.domain;
    const Eigen::Index n = d.interior_count();
    const Eigen::VectorXd dv = interior_weight(s);
    const Eigen::VectorXd psi = d.gather(s.psi.values);
    const Eigen::VectorXd wq = d.gather(d.weights());
    SpMat A = d.stiffness();
    for (Eigen::Index i = 0; i < n; ++i) A.coeffRef(i, i) -= s.tau * dv[i];
    Eigen::MatrixXd U(n, 2), V(n, 2), C(2, 2);
    U.col(0) = -s.p * dv;
    U.col(1) = -s.p * dv.cwiseProduct(psi);
    V.col(0) = s.tau * dv;
    if (prev && prev->dpsi.size() == n) {
        V.col(1) = wq.cwiseProduct(prev->dpsi);
        C << s.p * s.m, s.p * dv.dot(psi), prev->dalpha, prev->dlambda;
    } else {
        V.col(1).setZero();
        C << s.p * s.m, s.p * dv.dot(psi), 0.0, 1.0;
    }
    BorderedSolver lu(A, U, V, C);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 2);
    rhs[n + 1] = 1.0;
    const Eigen::VectorXd x = lu.solve(rhs);
    Direction t;
    t.dpsi = x.head(n);
    t.dalpha = x[n];
    t.dlambda = x[n + 1];
    const double nrm = state_distance(d, t.dlambda, t.dalpha, t.dpsi);
    t.dpsi /= nrm;
    t.dalpha /= nrm;
    t.dlambda /= nrm;
    return t;
}

BranchPoint make_branch_point(const Solution& s, const TraceOptions& opt) {
    BranchPoint bp;
    bp.solution = s;
    bp.lambda = s.lambda;
    bp.corrector_iterations = s.newton_iterations;
    bp.E = 0.5 * s.domain->weights().dot(s.rho.values.cwiseProduct(s.psi.values));
    bp.spectrum = constrained_eigs(s, opt.eig_count, opt.spectral);
    bp.sigma1 = bp.spectrum.pairs.front().sigma;
    bp.nu1 = bp.spectrum.nu1;
    if (const Eigenpair* rp = radial_pair(bp.spectrum)) {
        bp.sigma1_radial = rp->sigma;
        bp.transversality = rp->mean;
    } else {
        bp.sigma1_radial = bp.sigma1;
    }
    try {
        const Tangent t = tangent(s);
        bp.eta = t.eta;
        bp.dalpha_dlambda = t.dalpha_dlambda;
        bp.w = w_derivative(s).w;
        const EnergySlope es = energy_slope(s, t.eta, std::numeric_limits<double>::infinity());
        bp.dE_dlambda = es.direct;
        bp.dE_dlambda_spectral = es.spectral;
    } catch (const SingularLinearization&) {
        // At a fold: only the arclength direction exists.
    }
    return bp;
}

BranchPoint natural_step(const BranchPoint& bp, double dlambda, const TraceOptions& opt) {
    const Solution& s = bp.solution;
    const Domain& d = *s.domain;
    if (!std::isfinite(bp.dalpha_dlambda)) throw SingularLinearization("natural step at a singular point");
    const double alpha_pred = s.alpha + dlambda * bp.dalpha_dlambda;
    const Field psi_pred(s.domain, s.psi.values + dlambda * bp.eta.values);
    const Solution next = newton_solve(s.domain, s.lambda + dlambda, s.p, alpha_pred, psi_pred, opt.newton);
    BranchPoint out = make_branch_point(next, opt);
    out.natural = true;
    const double dpsi = (next.psi.values - psi_pred.values).cwiseAbs().maxCoeff();
    out.predictor_error = std::max(dpsi / std::max(next.psi.values.cwiseAbs().maxCoeff(), 1e-300),
                                   std::abs(next.alpha - alpha_pred));
    out.direction = branch_direction(next, bp.direction.dpsi.size() ? &bp.direction : nullptr);
    out.s = bp.s + state_distance(d, next.lambda - s.lambda, next.alpha - s.alpha,
                                  d.gather(next.psi.values - s.psi.values));
    return out;
}

BranchPoint arclength_step(const BranchPoint& bp, double ds, bool use_phi1, const TraceOptions& opt) {
    const Solution& s = bp.solution;
    const Domain& d = *s.domain;
    const Direction t = bp.direction.dpsi.size() ? bp.direction : branch_direction(s);
    const Eigen::VectorXd psi = d.gather(s.psi.values);
    LinearConstraint g;
    g.psi_hat = psi + ds * t.dpsi;
    g.alpha_hat = s.alpha + ds * t.dalpha;
    g.lambda_hat = s.lambda + ds * t.dlambda;
    if (use_phi1) {
        const Eigenpair* rp = radial_pair(bp.spectrum);
        if (!rp) throw TransversalityLoss("no eigenfunction with nonzero mean");
        if (std::abs(rp->mean) < 1e-4) throw TransversalityLoss("<phi_1> vanishes at the fold");
        const Eigen::VectorXd dv = interior_weight(s);
        const Eigen::VectorXd phi = d.gather(rp->phi.values);
        g.c_psi = dv.cwiseProduct(phi) - dv * (dv.dot(phi) / s.m);
    } else {
        g.c_psi = d.gather(d.weights()).cwiseProduct(t.dpsi);
        g.c_alpha = t.dalpha;
        g.c_lambda = t.dlambda;
    }
    const Field psi0(s.domain, d.scatter(g.psi_hat));
    const Solution next = newton_solve_constrained(s.domain, s.p, g.lambda_hat, g.alpha_hat, psi0, g, opt.newton);
    BranchPoint out = make_branch_point(next, opt);
    out.natural = false;
    const Eigen::VectorXd npsi = d.gather(next.psi.values);
    out.predictor_error = std::max((npsi - g.psi_hat).cwiseAbs().maxCoeff() / std::max(npsi.cwiseAbs().maxCoeff(), 1e-300),
                                   std::abs(next.alpha - g.alpha_hat));
    out.direction = branch_direction(next, &t);
    out.s = bp.s + state_distance(d, next.lambda - s.lambda, next.alpha - s.alpha, npsi - psi);
    return out;
}

namespace {

// Value at x = 0 of the quadratic through three (x, y) samples.
double quadratic_at_zero(const double x[3], const double y[3]) {
    double r = 0.0;
    for (int i = 0; i < 3; ++i) {
        double l = 1.0;
        for (int j = 0; j < 3; ++j)
            if (j != i) l *= (0.0 - x[j]) / (x[i] - x[j]);
        r += l * y[i];
    }
    return r;
}

}  // namespace

Branch trace_branch(const DomainPtr& domain, double p, const TraceOptions& opt) {
    Branch br;
    br.kind = domain->kind();
    br.p = p;
    const Solution s0 = trivial_solution(domain, p);
    const Domain& d = *s0.domain;
    BranchPoint first = make_branch_point(s0, opt);
    first.direction = branch_direction(s0);
    br.sigma_threshold = opt.sigma_fraction * first.sigma1_radial;
    br.points.push_back(std::move(first));

    double dl = opt.dlambda_init;
    double ds = 0.0;
    bool natural_mode = true;
    while (true) {
        const BranchPoint& cur = br.points.back();
        const double lam = cur.lambda, alpha = cur.solution.alpha;
        if (lam >= opt.lambda_max * (1.0 - 1e-14)) {
            br.termination = Termination::LambdaMax;
            break;
        }
        if (alpha <= opt.alpha_tol) {
            br.termination = Termination::AlphaTol;
            break;
        }
        if (static_cast<int>(br.points.size()) >= opt.max_points) {
            br.termination = Termination::SolverFailure;
            br.message = "point limit reached";
            break;
        }
        const bool near_fold = cur.sigma1_radial < br.sigma_threshold || !std::isfinite(cur.dalpha_dlambda);
        if (natural_mode && near_fold) {
            natural_mode = false;
            const double tl = std::max(std::abs(cur.direction.dlambda), 1e-3);
            ds = dl / tl;
        } else if (!natural_mode && !near_fold) {
            natural_mode = true;
            dl = std::max(std::abs(ds * cur.direction.dlambda), opt.dlambda_min);
        }
        const double sgn = cur.direction.dlambda >= 0.0 ? 1.0 : -1.0;

        if (natural_mode) {
            double step = std::min({dl, opt.dlambda_max});
            if (sgn > 0.0) step = std::min(step, opt.lambda_max - lam);
            // Aim the final step at alpha_tol / 2.
            const double da = sgn * cur.dalpha_dlambda;
            if (da < 0.0 && alpha + step * da < opt.alpha_tol) step = std::min(step, (alpha - 0.5 * opt.alpha_tol) / -da);
            try {
                BranchPoint next = natural_step(cur, sgn * step, opt);
                if (next.predictor_error > 4.0 * opt.predictor_tol && step > opt.dlambda_min) {
                    dl = 0.5 * step;
                    continue;
                }
                double f = std::sqrt(opt.predictor_tol / std::max(next.predictor_error, 1e-16));
                f = std::clamp(f, 0.5, 1.5);
                if (next.corrector_iterations > 5) f = std::min(f, 0.7);
                dl = std::clamp(step * f, opt.dlambda_min, opt.dlambda_max);
                br.points.push_back(std::move(next));
            } catch (const SolverError&) {
                dl = 0.5 * step;
                if (dl < opt.dlambda_min) {
                    br.termination = Termination::SolverFailure;
                    br.message = "step-size underflow";
                    break;
                }
            }
        } else {
            try {
                BranchPoint next = arclength_step(cur, ds, true, opt);
                if (next.predictor_error > 4.0 * opt.predictor_tol && ds > opt.dlambda_min) {
                    ds *= 0.5;
                    continue;
                }
                const double prev_dl = cur.direction.dlambda, prev_sig = cur.sigma1_radial;
                if ((prev_dl > 0.0) != (next.direction.dlambda > 0.0) || (prev_sig > 0.0) != (next.sigma1_radial > 0.0)) {
                    next.fold_flag = true;
                    ++br.folds;
                }
                double f = std::sqrt(opt.predictor_tol / std::max(next.predictor_error, 1e-16));
                f = std::clamp(f, 0.5, 1.5);
                if (next.corrector_iterations > 5) f = std::min(f, 0.7);
                ds *= f;
                br.points.push_back(std::move(next));
                if (br.folds > opt.fold_limit) {
                    br.termination = Termination::FoldLimit;
                    break;
                }
            } catch (const TransversalityLoss& e) {
                br.termination = Termination::SolverFailure;
                br.message = e.what();
                break;
            } catch (const SolverError&) {
                ds *= 0.5;
                if (ds < opt.dlambda_min) {
                    br.termination = Termination::SolverFailure;
                    br.message = "arclength step-size underflow";
                    break;
                }
            }
        }
    }

    if (br.termination == Termination::AlphaTol && br.points.size() >= 3) {
        const size_t n = br.points.size();
        double a[3], l[3], e[3];
        for (int i = 0; i < 3; ++i) {
            const BranchPoint& bp = br.points[n - 3 + i];
            a[i] = bp.solution.alpha;
            l[i] = bp.lambda;
            e[i] = bp.E;
        }
        br.extrapolated_lambda = quadratic_at_zero(a, l);
        br.extrapolated_E = quadratic_at_zero(a, e);
        // Endpoint alpha = 0 with lambda unknown, started from the tangent predictor.
        const BranchPoint& last = br.points.back();
        try {
            const double dlam = std::isfinite(last.dalpha_dlambda) && last.dalpha_dlambda < 0.0
                                    ? -last.solution.alpha / last.dalpha_dlambda
                                    : br.extrapolated_lambda - last.lambda;
            const Field psi0(last.solution.domain, last.solution.psi.values + dlam * last.eta.values);
            const Solution end = newton_solve_endpoint(last.solution.domain, p, last.lambda + dlam, psi0, opt.newton);
            BranchPoint ep = make_branch_point(end, opt);
            ep.natural = true;
            ep.direction = branch_direction(end, &last.direction);
            ep.s = last.s + state_distance(d, end.lambda - last.lambda, end.alpha - last.solution.alpha,
                                           d.gather(end.psi.values - last.solution.psi.values));
            br.points.push_back(std::move(ep));
        } catch (const SolverError& e) {
            br.message = std::string("endpoint solve failed: ") + e.what();
        }
    }
    return br;
}

}  // namespace fbp
