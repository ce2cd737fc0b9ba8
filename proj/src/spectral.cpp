#include "fbp/spectral.hpp"

#include "fbp/errors.hpp"
#include "fbp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fbp {

namespace {

// One generalized symmetric problem K x = mu B x on a set of unknown nodes.
struct ModeProblem {
    int mode = 0;
    bool project = true;
    double scale = 1.0;  // lifted inner product = scale * raw sum
    std::vector<int> nodes;
    const SpMat* K = nullptr;
    std::shared_ptr<Eigen::SimplicialLLT<SpMat>> own_chol;
    SpMat own_K;
    const Domain* domain = nullptr;
    Eigen::VectorXd d;
    double m = 1.0;

    Eigen::VectorXd kinv(const Eigen::VectorXd& b) const {
        if (own_chol) return own_chol->solve(b);
        return domain->solve_stiffness(b);
    }
    Eigen::VectorXd apply_b(const Eigen::VectorXd& x) const {
        Eigen::VectorXd y = d.cwiseProduct(x);
        if (project) y -= d * (d.dot(x) / m);
        return y;
    }
};

bool is_mode_domain(const Domain& d) { return d.kind() == DomainKind::RadialBall && d.dimension() == 2; }

void require_spectral_domain(const Domain& d) {
    if (d.kind() == DomainKind::RadialBall && d.dimension() != 2)
        throw InvalidArgument("eigenproblems are only supported in two dimensions");
}

ModeProblem make_problem(const Solution& s, int mode, bool project) {
    const Domain& dom = *s.domain;
    ModeProblem mp;
    mp.mode = mode;
    mp.domain = &dom;
    mp.m = s.m;
    mp.project = project && mode == 0;
    if (mode == 0) {
        mp.nodes = dom.interior_nodes();
        mp.K = &dom.stiffness();
    } else {
        const int nr = dom.resolution().n1;
        const int nt = dom.angular_nodes();
        const double dt = 2.0 * std::numbers::pi / nt;
        const double h = dom.spacing();
        const SpMat& Kr = dom.stiffness();
        mp.own_K = Kr.bottomRightCorner(nr - 1, nr - 1);
        for (int i = 1; i < nr; ++i) {
            mp.nodes.push_back(i);
            const double r = i * h;
            mp.own_K.coeffRef(i - 1, i - 1) += 2.0 * std::numbers::pi * h * (2.0 - 2.0 * std::cos(mode * dt)) / (r * dt * dt);
        }
        mp.own_chol = std::make_shared<Eigen::SimplicialLLT<SpMat>>(mp.own_K);
        if (mp.own_chol->info() != Eigen::Success) throw SolverError("mode operator factorization failed");
        mp.K = &mp.own_K;
        mp.scale = 0.5;
    }
    mp.d.resize(static_cast<Eigen::Index>(mp.nodes.size()));
    for (size_t i = 0; i < mp.nodes.size(); ++i) {
        const double wt = s.weight[mp.nodes[i]];
        if (!(wt > 0.0)) throw InvalidArgument("non-positive weight on an interior node");
        mp.d[static_cast<Eigen::Index>(i)] = dom.weights()[mp.nodes[i]] * wt;
    }
    return mp;
}

std::vector<Eigenpair> solve_problem(const Solution& s, const ModeProblem& mp, int k, const SpectralOptions& opt,
                                     double* tol_out) {
    const Eigen::Index n = static_cast<Eigen::Index>(mp.nodes.size());
    k = static_cast<int>(std::min<Eigen::Index>(k, n - 1));
    EigResult er = top_eigs([&](const Eigen::VectorXd& b) { return mp.kinv(b); },
                            [&](const Eigen::VectorXd& x) { return mp.apply_b(x); }, n, k, opt.tol,
                            opt.seed + static_cast<std::uint64_t>(mp.mode));
    if (!er.converged) throw NonConvergence("eigensolver did not converge");
    std::vector<Eigenpair> out;
    const Domain& dom = *s.domain;
    for (int j = 0; j < k; ++j) {
        Eigen::VectorXd x = er.vectors.col(j);
        const Eigen::VectorXd bx = mp.apply_b(x);
        const double xbx = x.dot(bx);
        const double mu = x.dot(*mp.K * x) / xbx;
        x *= std::sqrt(s.m / (mp.scale * xbx));
        Eigenpair ep;
        ep.mode = mp.mode;
        ep.sigma = mu - s.tau;
        ep.mean = mp.project ? mp.d.dot(x) / s.m : 0.0;
        double sgn = 1.0;
        if (std::abs(ep.mean) > 1e-12 * x.cwiseAbs().maxCoeff() * (mp.d.sum() / s.m)) {
            sgn = ep.mean < 0.0 ? -1.0 : 1.0;
        } else {
            Eigen::Index imax;
            x.cwiseAbs().maxCoeff(&imax);
            sgn = x[imax] < 0.0 ? -1.0 : 1.0;
        }
        x *= sgn;
        ep.mean *= sgn;
        const Eigen::VectorXd r = x - mu * mp.kinv(mp.apply_b(x));
        ep.residual = r.cwiseAbs().maxCoeff() / x.cwiseAbs().maxCoeff();
        Eigen::VectorXd all = Eigen::VectorXd::Zero(dom.node_count());
        for (Eigen::Index i = 0; i < n; ++i) all[mp.nodes[i]] = x[i];
        ep.phi = Field(s.domain, std::move(all));
        if (tol_out) *tol_out = std::max(*tol_out, er.residuals[j] * std::abs(mu) + 1e-12 * std::abs(mu));
        out.push_back(std::move(ep));
    }
    return out;
}

}  // namespace

Spectrum constrained_eigs(const Solution& s, int k, const SpectralOptions& opt) {
    if (k < 1) throw InvalidArgument("constrained_eigs: k must be >= 1");
    const Domain& dom = *s.domain;
    require_spectral_domain(dom);
    Spectrum sp;
    sp.m = s.m;
    sp.tau = s.tau;
    double tol = 0.0;
    if (is_mode_domain(dom)) {
        for (int mode = 0; mode <= opt.modes; ++mode) {
            const ModeProblem mp = make_problem(s, mode, true);
            const int km = mode == 0 ? k : (k + 1) / 2;
            auto pairs = solve_problem(s, mp, km, opt, &tol);
            for (auto& ep : pairs) {
                if (mode > 0) {
                    Eigenpair sine = ep;
                    sine.parity = 1;
                    sp.pairs.push_back(std::move(sine));
                }
                sp.pairs.push_back(std::move(ep));
            }
        }
        std::stable_sort(sp.pairs.begin(), sp.pairs.end(), [](const Eigenpair& a, const Eigenpair& b) {
            if (a.sigma != b.sigma) return a.sigma < b.sigma;
            return a.parity < b.parity;
        });
        if (static_cast<int>(sp.pairs.size()) > k) sp.pairs.resize(k);
    } else {
        const ModeProblem mp = make_problem(s, 0, true);
        sp.pairs = solve_problem(s, mp, k, opt, &tol);
        std::sort(sp.pairs.begin(), sp.pairs.end(),
                  [](const Eigenpair& a, const Eigenpair& b) { return a.sigma < b.sigma; });
    }
    sp.tolerance = tol;
    sp.nu1 = standard_eig_nu1(s, opt);
    sp.multiplicity.resize(sp.pairs.size());
    for (size_t i = 0; i < sp.pairs.size(); ++i) {
        int c = 0;
        for (const auto& other : sp.pairs)
            if (std::abs(other.sigma - sp.pairs[i].sigma) <= 1e-6 * std::max(1.0, std::abs(sp.pairs[i].sigma))) ++c;
        sp.multiplicity[i] = c;
    }
    return sp;
}

double standard_eig_nu1(const Solution& s, const SpectralOptions& opt, Field* eigenfunction) {
    const Domain& dom = *s.domain;
    require_spectral_domain(dom);
    const ModeProblem mp = make_problem(s, 0, false);
    const Eigen::Index n = static_cast<Eigen::Index>(mp.nodes.size());
    EigResult er = top_eigs([&](const Eigen::VectorXd& b) { return mp.kinv(b); },
                            [&](const Eigen::VectorXd& x) { return mp.apply_b(x); }, n, 1, opt.tol, opt.seed + 99);
    if (!er.converged) throw NonConvergence("eigensolver did not converge (nu1)");
    Eigen::VectorXd x = er.vectors.col(0);
    const double mu = x.dot(*mp.K * x) / x.dot(mp.apply_b(x));
    if (eigenfunction) {
        if (x.sum() < 0.0) x = -x;
        Eigen::VectorXd all = Eigen::VectorXd::Zero(dom.node_count());
        for (Eigen::Index i = 0; i < n; ++i) all[mp.nodes[i]] = x[i];
        *eigenfunction = Field(s.domain, std::move(all));
    }
    return mu - s.tau;
}

double eigen_identity_residual(const DomainPtr& domain, const Field& weight, const Field& psi, const Field& phi,
                               double sigma, double lambda, double p) {
    const Eigen::VectorXd ww = domain->weights().cwiseProduct(weight.values);
    const double m = ww.sum();
    const double mean_phi = ww.dot(phi.values) / m;
    const double mean_psi_fl = ww.dot(psi.values.cwiseProduct((phi.values.array() - mean_phi).matrix())) / m;
    return std::abs(mean_phi / m - (lambda * (p - 1.0) + sigma) * mean_psi_fl);
}

double check_eigen_identity(const Solution& s, const Eigenpair& pair) {
    if (pair.mode == 0) return eigen_identity_residual(s.domain, s.weight, s.psi, pair.phi, pair.sigma, s.lambda, s.p);
    // Non-radial mode: both means carry the angular average of the mode.
    const Domain& dom = *s.domain;
    const int nt = dom.angular_nodes();
    double ang = 0.0;
    for (int j = 0; j < nt; ++j) {
        const double th = 2.0 * std::numbers::pi * j / nt;
        ang += pair.parity == 0 ? std::cos(pair.mode * th) : std::sin(pair.mode * th);
    }
    ang /= nt;
    const Eigen::VectorXd ww = dom.weights().cwiseProduct(s.weight.values);
    const double mean_phi = ang * ww.dot(pair.phi.values) / s.m;
    const double mean_psi_fl =
        ang * ww.dot(s.psi.values.cwiseProduct(pair.phi.values)) / s.m - mean_phi * ww.dot(s.psi.values) / s.m;
    return std::abs(mean_phi / s.m - (s.lambda * (s.p - 1.0) + pair.sigma) * mean_psi_fl);
}

double fluct_product(const Solution& s, const Field& a, int mode_a, const Field& b, int mode_b) {
    if (mode_a != mode_b) return 0.0;
    const Eigen::VectorXd ww = s.domain->weights().cwiseProduct(s.weight.values);
    if (mode_a != 0) return 0.5 * ww.dot(a.values.cwiseProduct(b.values));
    const double ma = ww.dot(a.values) / s.m, mb = ww.dot(b.values) / s.m;
    return ww.dot(a.values.cwiseProduct(b.values)) - s.m * ma * mb;
}

double fluct_product(const Solution& s, const Eigenpair& a, const Eigenpair& b) {
    if (a.mode != b.mode || a.parity != b.parity) return 0.0;
    return fluct_product(s, a.phi, a.mode, b.phi, b.mode);
}

double second_variation_form(const Solution& s, const Field& phi, int mode) {
    const Domain& dom = *s.domain;
    for (Eigen::Index k = 0; k < dom.node_count(); ++k)
        if (dom.is_boundary(k) && phi[k] != 0.0) throw InvalidArgument("second_variation_form: phi must vanish on the boundary");
    if (mode != 0) require_spectral_domain(dom);
    const ModeProblem mp = make_problem(s, mode, true);
    Eigen::VectorXd x(static_cast<Eigen::Index>(mp.nodes.size()));
    for (size_t i = 0; i < mp.nodes.size(); ++i) x[static_cast<Eigen::Index>(i)] = phi[mp.nodes[i]];
    const Eigen::VectorXd bx = mp.apply_b(x);
    return mp.scale * (x.dot(bx) - s.tau * bx.dot(mp.kinv(bx)));
}

namespace {

void check_exponent(const Domain& d, double t) {
    const int N = d.dimension();
    if (!(t >= 1.0)) throw InvalidArgument("Sobolev exponent must be >= 1");
    if (N > 2 && !(t < 2.0 * N / (N - 2.0))) throw InvalidArgument("Sobolev exponent must be subcritical");
}

double lt_norm_t(const Domain& d, const Eigen::VectorXd& all, double t) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < all.size(); ++k) s += d.weights()[k] * std::pow(std::abs(all[k]), t);
    return s;
}

}  // namespace

SobolevResult sobolev_constant(const DomainPtr& domain, double t, const SobolevOptions& opt) {
    const DomainPtr dp = domain->compute_domain();
    const Domain& d = *dp;
    check_exponent(d, t);
    const Eigen::VectorXd& w = d.weights();
    auto normalize = [&](Eigen::VectorXd x) {
        const double s = lt_norm_t(d, d.scatter(x), t);
        return Eigen::VectorXd(x / std::pow(s, 1.0 / t));
    };
    auto map = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd src(x.size());
        const Eigen::VectorXd wi = d.gather(w);
        for (Eigen::Index i = 0; i < x.size(); ++i) src[i] = wi[i] * std::pow(x[i], t - 1.0);
        return normalize(d.solve_stiffness(src));
    };
    Eigen::VectorXd x = normalize(d.solve_stiffness(d.gather(w)));
    std::vector<Eigen::VectorXd> hist;
    SobolevResult res;
    res.t = t;
    double diff = 1.0;
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        Eigen::VectorXd y = map(x);
        diff = (y - x).cwiseAbs().maxCoeff() / y.cwiseAbs().maxCoeff();
        hist.push_back(y);
        x = std::move(y);
        if (diff <= opt.tol) break;
        if (hist.size() == 3) {
            // Irons-Tuck vector Aitken step, kept only if it stays positive
            // and lowers the fixed-point residual.
            const Eigen::VectorXd d1 = hist[1] - hist[0], d2 = hist[2] - hist[1];
            const Eigen::VectorXd dd = d2 - d1;
            const double den = dd.squaredNorm();
            if (den > 0.0) {
                Eigen::VectorXd z = hist[2] - (d2.dot(dd) / den) * d2;
                if (z.minCoeff() > 0.0) {
                    z = normalize(z);
                    const Eigen::VectorXd mz = map(z);
                    const double rz = (mz - z).cwiseAbs().maxCoeff() / mz.cwiseAbs().maxCoeff();
                    if (rz < diff) x = z;
                }
            }
            hist.clear();
        }
    }
    if (diff > opt.tol) throw NonConvergence("Lane-Emden iteration stagnated");
    const Eigen::VectorXd kx = d.stiffness() * x;
    res.gradient_energy = x.dot(kx);
    const double nt = lt_norm_t(d, d.scatter(x), t);
    res.Lambda = res.gradient_energy / std::pow(nt, 2.0 / t);
    Eigen::VectorXd el(x.size());
    const Eigen::VectorXd wi = d.gather(w);
    for (Eigen::Index i = 0; i < x.size(); ++i) el[i] = kx[i] - res.Lambda * wi[i] * std::pow(x[i], t - 1.0);
    res.euler_lagrange_residual = el.cwiseAbs().maxCoeff() / kx.cwiseAbs().maxCoeff();
    res.w = Field(dp, d.scatter(x));
    res.iterations = it + 1;
    return res;
}

SobolevResult sobolev_constant_direct(const DomainPtr& domain, double t, int max_iter) {
    const DomainPtr dp = domain->compute_domain();
    const Domain& d = *dp;
    check_exponent(d, t);
    const Eigen::VectorXd wi = d.gather(d.weights());
    const SpMat& K = d.stiffness();
    const Eigen::VectorXd pre = K.diagonal().cwiseInverse();
    Eigen::VectorXd x(d.interior_count());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const int k = d.interior_nodes()[i];
        if (d.kind() == DomainKind::UnitSquare) {
            const double a = d.coord0()[k], b = d.coord1()[k];
            x[i] = a * (1.0 - a) * b * (1.0 - b);
        } else {
            const double r = d.coord0()[k] / d.radius();
            x[i] = 1.0 - r * r;
        }
    }
    // Q(x) = x'Kx / S(x)^{2/t}, S(x) = sum w |x|^t; scale invariant.
    auto eval = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g) {
        const Eigen::VectorXd kv = K * v;
        const double a = v.dot(kv);
        double S = 0.0;
        Eigen::VectorXd sv(v.size());
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double av = std::abs(v[i]);
            S += wi[i] * std::pow(av, t);
            sv[i] = wi[i] * std::pow(av, t - 2.0) * v[i];
        }
        const double s2 = std::pow(S, 2.0 / t);
        g = (2.0 / s2) * (kv - (a / S) * sv);
        return a / s2;
    };
    x /= std::sqrt(x.dot(K * x));
    Eigen::VectorXd g;
    double f = eval(x, g);
    const int mem = 20;
    std::vector<Eigen::VectorXd> S, Y;
    std::vector<double> rho;
    int it = 0, flat = 0;
    for (; it < max_iter; ++it) {
        Eigen::VectorXd q = g;
        std::vector<double> al(S.size());
        for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
            al[i] = rho[i] * S[i].dot(q);
            q -= al[i] * Y[i];
        }
        double gamma = 1.0;
        if (!S.empty()) gamma = S.back().dot(Y.back()) / Y.back().dot(pre.cwiseProduct(Y.back()));
        Eigen::VectorXd dir = gamma * pre.cwiseProduct(q);
        for (size_t i = 0; i < S.size(); ++i) {
            const double be = rho[i] * Y[i].dot(dir);
            dir += (al[i] - be) * S[i];
        }
        dir = -dir;
        double slope = g.dot(dir);
        if (slope >= 0.0) {
            S.clear();
            Y.clear();
            rho.clear();
            dir = -pre.cwiseProduct(g);
            slope = g.dot(dir);
        }
        double step = 1.0;
        Eigen::VectorXd xn, gn;
        double fn = f;
        bool ok = false;
        for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
            xn = x + step * dir;
            fn = eval(xn, gn);
            if (std::isfinite(fn) && fn <= f + 1e-4 * step * slope) {
                ok = true;
                break;
            }
        }
        if (!ok) break;
        const Eigen::VectorXd sv = xn - x, yv = gn - g;
        const double sy = sv.dot(yv);
        if (sy > 1e-300) {
            S.push_back(sv);
            Y.push_back(yv);
            rho.push_back(1.0 / sy);
            if (static_cast<int>(S.size()) > mem) {
                S.erase(S.begin());
                Y.erase(Y.begin());
                rho.erase(rho.begin());
            }
        }
        const double df = f - fn;
        x = xn;
        g = gn;
        f = fn;
        flat = (df <= 1e-15 * f) ? flat + 1 : 0;
        if (flat >= 10) break;
    }
    double Snorm = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) Snorm += wi[i] * std::pow(std::abs(x[i]), t);
    x /= std::pow(Snorm, 1.0 / t);
    SobolevResult res;
    res.t = t;
    res.Lambda = f;
    res.gradient_energy = x.dot(K * x);
    res.w = Field(dp, d.scatter(x));
    res.iterations = it;
    return res;
}

}  // namespace fbp
