// Command-line front end: fbp <solve|branch|spectrum|sobolev|verify> [flags]

#include "fbp/run.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

int main(int argc, char** argv) {
    CLI::App app{"Constrained free-boundary solver: states, branches, spectra, Sobolev constants"};
    app.require_subcommand(1, 1);

    std::string domain, res, config, out;
    double p = 0, lambda = -1, lambda_max = 0, alpha_tol = 0, t = 0, dlambda_max = 0;
    std::uint64_t seed = 0;
    int modes = -1, eigs = 0, threads = -1;
    bool no_plot = false;

    for (const char* name : {"solve", "branch", "spectrum", "sobolev", "verify"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config, "JSON config file (flags override it)");
        sub->add_option("--domain", domain, "square | disk | ball:N");
        sub->add_option("--res", res, "resolution: N or N1xN2 (disk: radial x angular)");
        sub->add_option("--p", p, "exponent p >= 1");
        sub->add_option("--lambda", lambda, "lambda for solve/spectrum");
        sub->add_option("--lambda-max", lambda_max, "branch stops at this lambda");
        sub->add_option("--alpha-tol", alpha_tol, "branch stops once alpha <= alpha-tol");
        sub->add_option("--dlambda-max", dlambda_max, "largest natural continuation step");
        sub->add_option("--t", t, "Sobolev exponent (default p + 1)");
        sub->add_option("--out", out, "output path prefix");
        sub->add_option("--seed", seed, "eigensolver seed");
        sub->add_option("--modes", modes, "azimuthal mode cutoff on the disk");
        sub->add_option("--eigs", eigs, "number of constrained eigenpairs");
        sub->add_option("--threads", threads, "concurrent branch traces in verify (0 = all cores)");
        sub->add_flag("--no-plot", no_plot, "skip the gnuplot script");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    fbp::RunConfig cfg;
    try {
        const CLI::App* sub = app.get_subcommands().front();
        if (!config.empty()) {
            std::ifstream f(config);
            if (!f) throw fbp::ConfigError("cannot read config file " + config);
            std::stringstream ss;
            ss << f.rdbuf();
            fbp::apply_json(ss.str(), cfg);
        }
        cfg.mode = fbp::parse_mode(sub->get_name());
        if (!domain.empty()) {
            fbp::parse_domain(domain, cfg);
            if (res.empty()) cfg.res = fbp::default_resolution(cfg.kind);
        }
        if (!res.empty()) cfg.res = fbp::parse_resolution(res, cfg.kind);
        if (sub->count("--p")) cfg.p = p;
        if (sub->count("--lambda")) cfg.lambda = lambda;
        if (sub->count("--lambda-max")) cfg.lambda_max = lambda_max;
        if (sub->count("--alpha-tol")) cfg.alpha_tol = alpha_tol;
        if (sub->count("--dlambda-max")) cfg.dlambda_max = dlambda_max;
        if (sub->count("--t")) cfg.t = t;
        if (sub->count("--out")) cfg.out = out;
        if (sub->count("--seed")) cfg.seed = seed;
        if (sub->count("--modes")) cfg.modes = modes;
        if (sub->count("--eigs")) cfg.eigs = eigs;
        if (sub->count("--threads")) cfg.verify.threads = threads;
        if (no_plot) cfg.plot = false;
    } catch (const fbp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }
    return fbp::run(cfg, std::cout, std::cerr);
}
