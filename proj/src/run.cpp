#include "fbp/run.hpp"

#include "fbp/continuation.hpp"
#include "fbp/errors.hpp"
#include "fbp/observables.hpp"
#include "fbp/spectral.hpp"
#include "fbp/state_solver.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fbp {

namespace {

using nlohmann::json;

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string domain_label(const RunConfig& c) {
    if (c.kind == DomainKind::RadialBall) return "ball:" + std::to_string(c.dimension);
    return c.kind == DomainKind::UnitDisk ? "disk" : "square";
}

DomainPtr make_domain(const RunConfig& c) { return build_domain(c.kind, c.res, c.dimension); }

std::string out_prefix(const RunConfig& c) { return c.out.empty() ? "fbp_" + to_string(c.mode) : c.out; }

void write_file(const std::string& path, const std::string& text) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
}

TraceOptions trace_options(const RunConfig& c) {
    TraceOptions o;
    o.lambda_max = c.lambda_max;
    o.alpha_tol = c.alpha_tol;
    o.sigma_fraction = c.sigma_fraction;
    o.fold_limit = c.fold_limit;
    o.dlambda_max = c.dlambda_max;
    o.eig_count = std::max(c.eigs, 3);
    o.spectral.modes = c.modes;
    o.spectral.seed = c.seed;
    return o;
}

const char* branch_header = "s,lambda,alpha,E,sigma1,nu1,dalpha_dlambda,dE_dlambda,fold,I,gamma\n";

std::string branch_row(const BranchPoint& bp, double p) {
    const Solution& s = bp.solution;
    double I = NAN, gamma = NAN;
    if (p > 1.0) {
        I = std::pow(bp.lambda, s.q);
        gamma = std::pow(bp.lambda, 1.0 / (p - 1.0)) * s.alpha;
    }
    std::ostringstream o;
    o << fmt(bp.s) << ',' << fmt(bp.lambda) << ',' << fmt(s.alpha) << ',' << fmt(bp.E) << ',' << fmt(bp.sigma1)
      << ',' << fmt(bp.nu1) << ',' << fmt(bp.dalpha_dlambda) << ',' << fmt(bp.dE_dlambda) << ','
      << (bp.fold_flag ? 1 : 0) << ',' << fmt(I) << ',' << fmt(gamma) << '\n';
    return o.str();
}

json grid_json(const RunConfig& c, const DomainPtr& d) {
    return {{"domain", domain_label(c)},
            {"res", {c.res.n1, c.res.n2}},
            {"nodes", d->node_count()},
            {"compute_nodes", d->compute_domain()->node_count()},
            {"spacing", d->spacing()}};
}

json base_sidecar(const RunConfig& c, const DomainPtr& d) {
    const NewtonOptions nw;
    const SpectralOptions so;
    return {{"mode", to_string(c.mode)},
            {"grid", grid_json(c, d)},
            {"p", c.p},
            {"seed", c.seed},
            {"tolerances",
             {{"newton", nw.tol},
              {"newton_accept", nw.accept_tol},
              {"eigensolver", so.tol},
              {"alpha_tol", c.alpha_tol},
              {"sigma_fraction", c.sigma_fraction},
              {"dlambda_max", c.dlambda_max}}}};
}

std::string gnuplot_script(const std::string& csv) {
    std::ostringstream g;
    g << "set datafile separator ','\n"
      << "set key off\n"
      << "set multiplot layout 2,2\n"
      << "set xlabel 'lambda'\n"
      << "set ylabel 'alpha'\nplot '" << csv << "' using 2:3 every ::1 with linespoints\n"
      << "set ylabel 'E'\nplot '" << csv << "' using 2:4 every ::1 with linespoints\n"
      << "set ylabel 'sigma1'\nplot '" << csv << "' using 2:5 every ::1 with linespoints\n"
      << "set ylabel 'gamma'\nplot '" << csv << "' using 2:11 every ::1 with linespoints\n"
      << "unset multiplot\n";
    return g.str();
}

// Branch from 0 up to lambda; the last point is the requested state.
Branch solve_by_continuation(const RunConfig& c, const DomainPtr& d, double lambda) {
    TraceOptions o = trace_options(c);
    o.lambda_max = lambda;
    Branch b = trace_branch(d, c.p, o);
    if (b.termination != Termination::LambdaMax) {
        std::ostringstream m;
        m << "no positive solution reached at lambda = " << lambda << " (" << to_string(b.termination);
        if (!b.points.empty()) m << " at lambda = " << b.points.back().lambda;
        m << ")";
        throw SolverError(m.str());
    }
    return b;
}

int run_solve(const RunConfig& c, std::ostream& out) {
    const DomainPtr d = make_domain(c);
    TraceOptions o = trace_options(c);
    BranchPoint bp;
    if (c.lambda == 0.0) {
        bp = make_branch_point(trivial_solution(d, c.p), o);
    } else {
        Branch b = solve_by_continuation(c, d, c.lambda);
        bp = std::move(b.points.back());
    }
    const std::string pre = out_prefix(c);
    write_file(pre + ".csv", std::string(branch_header) + branch_row(bp, c.p));
    const Solution& s = bp.solution;
    std::ostringstream fld;
    fld << "c0,c1,psi,rho\n";
    for (Eigen::Index k = 0; k < s.domain->node_count(); ++k)
        fld << fmt(s.domain->coord0()[k]) << ',' << fmt(s.domain->coord1()[k]) << ',' << fmt(s.psi[k]) << ','
            << fmt(s.rho[k]) << '\n';
    write_file(pre + "_field.csv", fld.str());
    const EnergyReport er = energy(s);
    json j = base_sidecar(c, d);
    j["lambda"] = s.lambda;
    j["alpha"] = s.alpha;
    j["residual"] = s.residual_norm;
    j["mass_error"] = s.mass_error;
    j["energy"] = {{"E_quadratic", er.E_quadratic},
                   {"E_dirichlet", er.E_dirichlet},
                   {"gap", er.gap},
                   {"gap_tolerance", er.gap_tolerance},
                   {"J", er.J},
                   {"Psi", er.Psi ? num(*er.Psi) : json(nullptr)}};
    write_file(pre + ".json", j.dump(2) + "\n");
    out << "lambda = " << fmt(s.lambda) << "  alpha = " << fmt(s.alpha) << "  E = " << fmt(bp.E)
        << "  sigma1 = " << fmt(bp.sigma1) << "\n";
    return 0;
}

int run_branch(const RunConfig& c, std::ostream& out) {
    const DomainPtr d = make_domain(c);
    const Branch b = trace_branch(d, c.p, trace_options(c));
    const std::string pre = out_prefix(c);
    std::string csv = branch_header;
    for (const auto& bp : b.points) csv += branch_row(bp, c.p);
    write_file(pre + ".csv", csv);
    json j = base_sidecar(c, d);
    j["lambda_max"] = num(c.lambda_max);
    j["termination"] = to_string(b.termination);
    j["message"] = b.message;
    j["points"] = b.points.size();
    j["folds"] = b.folds;
    j["sigma_threshold"] = b.sigma_threshold;
    j["extrapolated_lambda"] = num(b.extrapolated_lambda);
    j["extrapolated_E"] = num(b.extrapolated_E);
    j["columns"] = {"s", "lambda", "alpha", "E", "sigma1", "nu1", "dalpha_dlambda", "dE_dlambda", "fold", "I", "gamma"};
    write_file(pre + ".json", j.dump(2) + "\n");
    if (c.plot) write_file(pre + ".gp", gnuplot_script(std::filesystem::path(pre + ".csv").filename().string()));
    const BranchPoint& last = b.points.back();
    out << b.points.size() << " points, " << to_string(b.termination) << "; final lambda = " << fmt(last.lambda)
        << "  alpha = " << fmt(last.solution.alpha) << "  E = " << fmt(last.E) << "\n";
    return b.termination == Termination::SolverFailure || b.termination == Termination::FoldLimit ? 2 : 0;
}

int run_spectrum(const RunConfig& c, std::ostream& out) {
    const DomainPtr d = make_domain(c);
    const Solution s = c.lambda == 0.0 ? trivial_solution(d, c.p)
                                       : solve_by_continuation(c, d, c.lambda).points.back().solution;
    SpectralOptions so;
    so.modes = c.modes;
    so.seed = c.seed;
    const Spectrum sp = constrained_eigs(s, c.eigs, so);
    std::string csv = "index,sigma,mean,mode,parity,residual,multiplicity\n";
    for (size_t i = 0; i < sp.pairs.size(); ++i) {
        const auto& e = sp.pairs[i];
        csv += std::to_string(i + 1) + ',' + fmt(e.sigma) + ',' + fmt(e.mean) + ',' + std::to_string(e.mode) + ',' +
               std::to_string(e.parity) + ',' + fmt(e.residual) + ',' + std::to_string(sp.multiplicity[i]) + '\n';
    }
    const std::string pre = out_prefix(c);
    write_file(pre + ".csv", csv);
    json j = base_sidecar(c, d);
    j["lambda"] = s.lambda;
    j["alpha"] = s.alpha;
    j["nu1"] = sp.nu1;
    j["tau"] = sp.tau;
    j["m"] = sp.m;
    j["eigensolver_tolerance"] = sp.tolerance;
    j["modes"] = c.modes;
    write_file(pre + ".json", j.dump(2) + "\n");
    out << "sigma1 = " << fmt(sp.pairs.front().sigma) << "  nu1 = " << fmt(sp.nu1) << "\n";
    return 0;
}

int run_sobolev(const RunConfig& c, std::ostream& out) {
    const DomainPtr d = make_domain(c);
    const double t = c.t > 0.0 ? c.t : c.p + 1.0;
    const SobolevResult it = sobolev_constant(d, t);
    const SobolevResult dr = sobolev_constant_direct(d, t);
    const double diff = std::abs(it.Lambda - dr.Lambda) / it.Lambda;
    const std::string pre = out_prefix(c);
    write_file(pre + ".csv", "t,Lambda_iteration,Lambda_direct,relative_difference,iterations\n" + fmt(t) + ',' +
                                 fmt(it.Lambda) + ',' + fmt(dr.Lambda) + ',' + fmt(diff) + ',' +
                                 std::to_string(it.iterations) + '\n');
    json j = base_sidecar(c, d);
    j["t"] = t;
    j["Lambda"] = it.Lambda;
    j["Lambda_direct"] = dr.Lambda;
    j["euler_lagrange_residual"] = it.euler_lagrange_residual;
    if (c.kind != DomainKind::UnitSquare && c.dimension == 2 && std::abs(t - c.p - 1.0) < 1e-14)
        j["lambda_star_disk"] = lambda_star_disk(c.p, it.Lambda);
    write_file(pre + ".json", j.dump(2) + "\n");
    out << "Lambda(t = " << fmt(t) << ") = " << fmt(it.Lambda) << "  direct " << fmt(dr.Lambda) << "\n";
    return 0;
}

int run_verify(const RunConfig& c, std::ostream& out) {
    VerifyConfig v = c.verify;
    v.seed = c.seed;
    v.modes = c.modes;
    v.alpha_tol = c.alpha_tol;
    v.dlambda_max = c.dlambda_max;
    v.log = &out;
    const VerifyReport r = verify(v);
    write_file(out_prefix(c) + ".json", report_to_json(r, v) + "\n");
    for (const auto& cr : r.criteria) {
        out << (cr.pass ? "PASS " : "FAIL ") << cr.id << " " << cr.title;
        if (cr.informative) out << " (" << cr.note << ")";
        out << "\n";
        for (const auto& k : cr.checks)
            out << "    " << (k.pass ? "ok   " : "FAIL ") << k.name << ": measured " << fmt(k.measured)
                << ", expected " << fmt(k.expected) << ", tolerance " << fmt(k.tolerance) << "\n";
    }
    out << (r.all_pass ? "all criteria passed" : "verification failed") << " in " << r.seconds << " s\n";
    return r.all_pass ? 0 : 3;
}

template <class T>
T get_field(const json& j, const char* name) {
    try {
        return j.at(name).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("bad config field '") + name + "'");
    }
}

}  // namespace

RunMode parse_mode(const std::string& s) {
    if (s == "solve") return RunMode::Solve;
    if (s == "branch") return RunMode::Branch;
    if (s == "spectrum") return RunMode::Spectrum;
    if (s == "sobolev") return RunMode::Sobolev;
    if (s == "verify") return RunMode::Verify;
    throw ConfigError("bad config field 'mode': " + s);
}

std::string to_string(RunMode m) {
    switch (m) {
        case RunMode::Solve: return "solve";
        case RunMode::Branch: return "branch";
        case RunMode::Spectrum: return "spectrum";
        case RunMode::Sobolev: return "sobolev";
        case RunMode::Verify: return "verify";
    }
    return "?";
}

void parse_domain(const std::string& s, RunConfig& cfg) {
    if (s == "square") {
        cfg.kind = DomainKind::UnitSquare;
        cfg.dimension = 2;
    } else if (s == "disk") {
        cfg.kind = DomainKind::UnitDisk;
        cfg.dimension = 2;
    } else if (s.rfind("ball:", 0) == 0) {
        cfg.kind = DomainKind::RadialBall;
        try {
            size_t used = 0;
            cfg.dimension = std::stoi(s.substr(5), &used);
            if (used != s.size() - 5) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ConfigError("bad config field 'domain': " + s);
        }
    } else {
        throw ConfigError("bad config field 'domain': " + s);
    }
}

Resolution default_resolution(DomainKind kind) {
    switch (kind) {
        case DomainKind::UnitSquare: return {128, 128};
        case DomainKind::UnitDisk: return {512, 64};
        case DomainKind::RadialBall: return {2048, 0};
    }
    return {512, 64};
}

Resolution parse_resolution(const std::string& s, DomainKind kind) {
    try {
        const auto x = s.find('x');
        size_t used = 0;
        Resolution r;
        if (x == std::string::npos) {
            r.n1 = std::stoi(s, &used);
            if (used != s.size()) throw std::invalid_argument("trailing");
            r.n2 = kind == DomainKind::UnitSquare ? r.n1 : (kind == DomainKind::UnitDisk ? 64 : 0);
        } else {
            r.n1 = std::stoi(s.substr(0, x), &used);
            if (used != x) throw std::invalid_argument("trailing");
            r.n2 = std::stoi(s.substr(x + 1), &used);
            if (used != s.size() - x - 1) throw std::invalid_argument("trailing");
        }
        return r;
    } catch (const std::exception&) {
        throw ConfigError("bad config field 'res': " + s);
    }
}

void apply_json(const std::string& text, RunConfig& cfg) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        if (k == "mode") cfg.mode = parse_mode(get_field<std::string>(j, "mode"));
        else if (k == "domain") parse_domain(get_field<std::string>(j, "domain"), cfg);
        else if (k == "p") cfg.p = get_field<double>(j, "p");
        else if (k == "lambda") cfg.lambda = get_field<double>(j, "lambda");
        else if (k == "lambda_max") cfg.lambda_max = get_field<double>(j, "lambda_max");
        else if (k == "alpha_tol") cfg.alpha_tol = get_field<double>(j, "alpha_tol");
        else if (k == "sigma_fraction") cfg.sigma_fraction = get_field<double>(j, "sigma_fraction");
        else if (k == "fold_limit") cfg.fold_limit = get_field<int>(j, "fold_limit");
        else if (k == "dlambda_max") cfg.dlambda_max = get_field<double>(j, "dlambda_max");
        else if (k == "t") cfg.t = get_field<double>(j, "t");
        else if (k == "modes") cfg.modes = get_field<int>(j, "modes");
        else if (k == "eigs") cfg.eigs = get_field<int>(j, "eigs");
        else if (k == "seed") cfg.seed = get_field<std::uint64_t>(j, "seed");
        else if (k == "out") cfg.out = get_field<std::string>(j, "out");
        else if (k == "plot") cfg.plot = get_field<bool>(j, "plot");
        else if (k == "res") {
            // Resolved after the domain is known.
        } else if (k == "verify") {
            const json& v = *it;
            if (!v.is_object()) throw ConfigError("bad config field 'verify'");
            for (auto vi = v.begin(); vi != v.end(); ++vi) {
                const std::string& vk = vi.key();
                if (vk == "disk") {
                    const auto a = get_field<std::vector<int>>(v, "disk");
                    if (a.size() != 2) throw ConfigError("bad config field 'verify.disk'");
                    cfg.verify.disk = {a[0], a[1]};
                } else if (vk == "square") cfg.verify.square = get_field<int>(v, "square");
                else if (vk == "ball") cfg.verify.ball = get_field<int>(v, "ball");
                else if (vk == "threads") cfg.verify.threads = get_field<int>(v, "threads");
                else throw ConfigError("unknown config field 'verify." + vk + "'");
            }
        } else {
            throw ConfigError("unknown config field '" + k + "'");
        }
    }
    if (j.contains("res")) {
        const json& r = j["res"];
        if (r.is_string()) cfg.res = parse_resolution(r.get<std::string>(), cfg.kind);
        else if (r.is_number_integer()) cfg.res = parse_resolution(std::to_string(r.get<int>()), cfg.kind);
        else if (r.is_array() && r.size() == 2 && r[0].is_number_integer() && r[1].is_number_integer())
            cfg.res = {r[0].get<int>(), r[1].get<int>()};
        else throw ConfigError("bad config field 'res'");
    } else if (j.contains("domain")) {
        cfg.res = default_resolution(cfg.kind);
    }
}

void validate(const RunConfig& c) {
    if (!(c.p >= 1.0)) throw ConfigError("bad config field 'p': must be >= 1");
    if (c.kind == DomainKind::RadialBall) {
        if (c.dimension < 2) throw ConfigError("bad config field 'domain': ball dimension must be >= 2");
        if (c.dimension >= 3 && !(c.p < static_cast<double>(c.dimension) / (c.dimension - 2)))
            throw ConfigError("bad config field 'p': must be below N/(N-2) on the N-ball");
        if (c.dimension >= 3 && (c.mode == RunMode::Branch || c.mode == RunMode::Spectrum))
            throw ConfigError("bad config field 'domain': spectra need a two-dimensional domain");
    }
    if (c.res.n1 < 16) throw ConfigError("bad config field 'res': at least 16 required");
    if (c.kind == DomainKind::UnitDisk && c.res.n2 < 8) throw ConfigError("bad config field 'res': angular count below 8");
    if (!(c.lambda >= 0.0)) throw ConfigError("bad config field 'lambda'");
    if (!(c.lambda_max > 0.0)) throw ConfigError("bad config field 'lambda_max'");
    if (!(c.alpha_tol > 0.0 && c.alpha_tol < 1.0)) throw ConfigError("bad config field 'alpha_tol'");
    if (!(c.sigma_fraction >= 0.0 && c.sigma_fraction < 1.0)) throw ConfigError("bad config field 'sigma_fraction'");
    if (c.fold_limit < 0) throw ConfigError("bad config field 'fold_limit'");
    if (!(c.dlambda_max > 0.0)) throw ConfigError("bad config field 'dlambda_max'");
    if (c.t != 0.0 && !(c.t >= 2.0)) throw ConfigError("bad config field 't': must be >= 2");
    if (c.modes < 0) throw ConfigError("bad config field 'modes'");
    if (c.eigs < 1) throw ConfigError("bad config field 'eigs'");
    if (c.verify.disk.n1 < 32 || c.verify.disk.n2 < 32 || c.verify.square < 32 || c.verify.ball < 32)
        throw ConfigError("bad config field 'verify': grids too coarse");
}

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        validate(cfg);
        switch (cfg.mode) {
            case RunMode::Solve: return run_solve(cfg, out);
            case RunMode::Branch: return run_branch(cfg, out);
            case RunMode::Spectrum: return run_spectrum(cfg, out);
            case RunMode::Sobolev: return run_sobolev(cfg, out);
            case RunMode::Verify: return run_verify(cfg, out);
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 1;
    } catch (const InvalidArgument& e) {
        err << "config error: " << e.what() << "\n";
        return 1;
    } catch (const SolverError& e) {
        err << "solver failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace fbp
