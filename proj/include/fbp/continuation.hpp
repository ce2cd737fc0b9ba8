#pragma once

#include "fbp/domain.hpp"
#include "fbp/spectral.hpp"
#include "fbp/state_solver.hpp"

#include <limits>
#include <string>
#include <vector>

namespace fbp {

struct Tangent {
    double dalpha_dlambda = 0.0;
    Field eta;  // d psi / d lambda
};

struct WDerivative {
    Field w;                    // d(lambda psi)/d lambda
    double dalpha_dlambda = 0.0;  // -<w>
};

struct EnergySlope {
    double direct = 0.0;    // int rho eta
    double spectral = 0.0;  // m tau <[eta],[psi]> + m p ||[psi]||^2
    double mismatch = 0.0;  // relative
};

// Unit direction of the solution curve in (lambda, alpha, psi).
struct Direction {
    double dlambda = 1.0;
    double dalpha = 0.0;
    Eigen::VectorXd dpsi;  // interior values
};

struct BranchPoint {
    double s = 0.0;
    double lambda = 0.0;
    Solution solution;
    double E = 0.0;
    double sigma1 = 0.0;         // lowest constrained eigenvalue
    double sigma1_radial = 0.0;  // lowest eigenvalue carrying a nonzero mean (drives folds)
    double nu1 = 0.0;
    double dalpha_dlambda = std::numeric_limits<double>::quiet_NaN();
    double dE_dlambda = std::numeric_limits<double>::quiet_NaN();
    double dE_dlambda_spectral = std::numeric_limits<double>::quiet_NaN();
    Field eta;
    Field w;
    bool fold_flag = false;
    double transversality = std::numeric_limits<double>::quiet_NaN();  // <phi_1> of the radial pair
    bool natural = true;  // reached by a natural-parameter step
    int corrector_iterations = 0;
    double predictor_error = 0.0;  // |corrector - predictor| relative to the state
    Direction direction;
    Spectrum spectrum;
};

enum class Termination { LambdaMax, AlphaTol, FoldLimit, SolverFailure };
std::string to_string(Termination t);

struct Branch {
    std::vector<BranchPoint> points;
    DomainKind kind = DomainKind::UnitSquare;
    double p = 1.0;
    Termination termination = Termination::SolverFailure;
    std::string message;
    int folds = 0;
    double sigma_threshold = 0.0;
    // Quadratic extrapolation to alpha = 0 from the last three points
    // preceding the endpoint solve (NaN if unavailable).
    double extrapolated_lambda = std::numeric_limits<double>::quiet_NaN();
    double extrapolated_E = std::numeric_limits<double>::quiet_NaN();
};

struct TraceOptions {
    double lambda_max = std::numeric_limits<double>::infinity();
    double alpha_tol = 1e-3;
    double sigma_fraction = 0.05;
    int fold_limit = 16;
    double dlambda_init = 0.05;
    double dlambda_min = 1e-6;
    double dlambda_max = 0.25;
    double predictor_tol = 1e-4;  // relative predictor-corrector distance per step
    int eig_count = 4;
    int max_points = 5000;
    SpectralOptions spectral;
    NewtonOptions newton{1e-11, 1e-9, 12, 30};
};

// (K - tau B) eta = p B psi with dalpha/dlambda = -lambda <eta> - <psi>.
Tangent tangent(const Solution& s);

// (K - tau B) w = W rho, dalpha/dlambda = -<w>.
WDerivative w_derivative(const Solution& s);

// Both forms of the energy slope. Throws SolverError when they disagree
// beyond `tol` (relative).
EnergySlope energy_slope(const Solution& s, const Field& eta, double tol = 1e-6);

// max_j |sigma_j beta_j - p xi_j| over the first `count` pairs, with
// xi_j = m <[phi_j],[psi]>, beta_j = m <[phi_j],[eta]>. `scale` receives
// max_j |xi_j| when non-null.
double fourier_slope_check(const Solution& s, const Spectrum& sp, const Field& eta, int count = 3,
                           double* scale = nullptr);

// Builds a branch point (spectrum, slopes, energy) at a solved state.
BranchPoint make_branch_point(const Solution& s, const TraceOptions& opt);

// Unit null direction of the extended Jacobian, oriented along `prev`
// (or increasing lambda when prev is empty).
Direction branch_direction(const Solution& s, const Direction* prev = nullptr);

// Predictor along the tangent, Newton corrector at lambda + dlambda.
BranchPoint natural_step(const BranchPoint& bp, double dlambda, const TraceOptions& opt = {});

// Pseudo-arclength step of length ds along bp.direction. With
// use_phi1 = true the corrector is closed by <[phi_1],psi - psi_pred> = 0,
// otherwise by orthogonality to the predictor direction.
BranchPoint arclength_step(const BranchPoint& bp, double ds, bool use_phi1, const TraceOptions& opt = {});

Branch trace_branch(const DomainPtr& domain, double p, const TraceOptions& opt = {});

}  // namespace fbp
