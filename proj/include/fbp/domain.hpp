#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <memory>
#include <string>
#include <vector>

namespace fbp {

enum class DomainKind { UnitSquare, UnitDisk, RadialBall };

std::string to_string(DomainKind kind);

// n1: nodes per side (square), radial intervals (disk, ball).
// n2: angular nodes (disk only; ignored otherwise).
struct Resolution {
    int n1 = 0;
    int n2 = 0;
};

using SpMat = Eigen::SparseMatrix<double>;

class Domain;
using DomainPtr = std::shared_ptr<const Domain>;

// Grid function on a Domain, one value per node (boundary nodes included).
struct Field {
    DomainPtr domain;
    Eigen::VectorXd values;

    Field() = default;
    Field(DomainPtr d, Eigen::VectorXd v);
    explicit Field(DomainPtr d, double value = 0.0);

    Eigen::Index size() const { return values.size(); }
    double operator[](Eigen::Index i) const { return values[i]; }
    double& operator[](Eigen::Index i) { return values[i]; }
};

// Discretized unit-area domain. The discrete operator is written in flux
// form: -Laplace ~ W^{-1} K on interior nodes, with K symmetric positive
// definite and W the diagonal of quadrature weights.
class Domain : public std::enable_shared_from_this<Domain> {
public:
    DomainKind kind() const { return kind_; }
    int dimension() const { return dim_; }
    Resolution resolution() const { return res_; }
    double radius() const { return radius_; }
    double spacing() const { return h_; }

    Eigen::Index node_count() const { return weights_.size(); }
    Eigen::Index interior_count() const { return static_cast<Eigen::Index>(interior_.size()); }

    const Eigen::VectorXd& weights() const { return weights_; }
    const std::vector<char>& boundary_mask() const { return boundary_; }
    bool is_boundary(Eigen::Index node) const { return boundary_[node] != 0; }
    const std::vector<int>& interior_nodes() const { return interior_; }
    // Interior index of a node, -1 on boundary nodes.
    int interior_index(Eigen::Index node) const { return node_to_interior_[node]; }

    // Coordinates: (x, y) on the square, (r, theta) on the disk, (r, 0) on
    // radial grids.
    const Eigen::VectorXd& coord0() const { return c0_; }
    const Eigen::VectorXd& coord1() const { return c1_; }

    const SpMat& stiffness() const { return K_; }
    // K^{-1} b for an interior vector b.
    Eigen::VectorXd solve_stiffness(const Eigen::VectorXd& b) const;

    Eigen::VectorXd gather(const Eigen::VectorXd& all) const;
    Eigen::VectorXd scatter(const Eigen::VectorXd& interior) const;

    // Disk: radial sub-grid (a RadialBall with N = 2 sharing the radial
    // nodes). Radial grids return themselves. Null on the square.
    DomainPtr radial() const;
    // Computational domain used for axisymmetric solves.
    DomainPtr compute_domain() const;
    // Angular node count used by azimuthal mode decompositions (radial N = 2).
    int angular_nodes() const { return angular_; }

    // Node index on the polar grid (disk only). ring = 0 is the pole.
    Eigen::Index polar_index(int ring, int j) const;

    // Half Dirichlet energy using gradients evaluated at cell midpoints.
    double midpoint_gradient_energy(const Eigen::VectorXd& f) const;

    friend DomainPtr build_domain(DomainKind kind, Resolution res, int dimension);

private:
    Domain() = default;
    void finalize();
    void build_square(int n);
    void build_disk(int nr, int ntheta);
    void build_radial(int nr, int dim, int angular);

    DomainKind kind_ = DomainKind::UnitSquare;
    int dim_ = 2;
    Resolution res_{};
    double radius_ = 0.0;
    double h_ = 0.0;
    int angular_ = 0;
    Eigen::VectorXd weights_;
    Eigen::VectorXd c0_, c1_;
    std::vector<char> boundary_;
    std::vector<int> interior_;
    std::vector<int> node_to_interior_;
    SpMat K_;
    std::shared_ptr<Eigen::SimplicialLLT<SpMat>> chol_;
    DomainPtr radial_;
};

// dimension is only used for RadialBall (N >= 2).
DomainPtr build_domain(DomainKind kind, Resolution res, int dimension = 2);

// Volume of the unit ball in R^N.
double unit_ball_volume(int dim);

// Second-order -Laplace of a field that vanishes on the boundary. Boundary
// entries of the result are zero.
Field laplacian_apply(const DomainPtr& domain, const Field& field);

// Dirichlet solve -Laplace psi = source, psi = 0 on the boundary.
Field green_apply(const DomainPtr& domain, const Field& source);

double integrate(const DomainPtr& domain, const Field& field);
double weighted_mean(const DomainPtr& domain, const Field& weight, const Field& field);
Field weighted_fluctuation(const DomainPtr& domain, const Field& weight, const Field& field);
double dirichlet_energy(const DomainPtr& domain, const Field& field);

// Node-wise sample of a function of the node coordinates.
template <class F>
Field sample(const DomainPtr& domain, F&& f) {
    Field out(domain);
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = f(domain->coord0()[i], domain->coord1()[i]);
    return out;
}

// Lift a radial field on the disk's radial sub-grid to the polar grid,
// multiplied by cos(m theta) (parity 0) or sin(m theta) (parity 1).
Field lift_to_polar(const DomainPtr& disk, const Field& radial_field, int mode = 0, int parity = 0);

}  // namespace fbp
