#pragma once

#include "fbp/domain.hpp"
#include "fbp/verify.hpp"

#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace fbp {

enum class RunMode { Solve, Branch, Spectrum, Sobolev, Verify };

// Bad configuration; the message names the offending field.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    RunMode mode = RunMode::Solve;
    DomainKind kind = DomainKind::UnitDisk;
    int dimension = 2;  // radial ball only
    Resolution res{512, 64};
    double p = 1.0;
    double lambda = 0.0;
    double lambda_max = std::numeric_limits<double>::infinity();
    double alpha_tol = 1e-3;
    double sigma_fraction = 0.05;
    int fold_limit = 16;
    double dlambda_max = 0.25;
    double t = 0.0;  // Sobolev exponent; 0 selects p + 1
    int modes = 8;
    int eigs = 6;
    std::uint64_t seed = 20240607;
    std::string out;  // output path prefix; empty selects "fbp_<mode>"
    bool plot = true;
    VerifyConfig verify;
};

RunMode parse_mode(const std::string& s);
std::string to_string(RunMode m);

// "square", "disk" or "ball:N".
void parse_domain(const std::string& s, RunConfig& cfg);

// Default grids: disk 512 x 64, square 128^2, radial ball 2048 intervals.
Resolution default_resolution(DomainKind kind);

// "N" or "N1xN2".
Resolution parse_resolution(const std::string& s, DomainKind kind);

// Applies the fields present in a JSON document on top of cfg.
void apply_json(const std::string& text, RunConfig& cfg);

// Throws ConfigError on inconsistent settings.
void validate(const RunConfig& cfg);

// Exit codes: 0 ok, 1 bad config, 2 solver failure, 3 verification failure.
int run(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace fbp
