#include "fbp/domain.hpp"

#include "fbp/errors.hpp"

#include <cmath>
#include <numbers>

namespace fbp {

namespace {

constexpr double kPi = std::numbers::pi;

void check_field(const DomainPtr& domain, const Field& f, const char* what) {
    if (!domain) throw InvalidArgument(std::string(what) + ": null domain");
    if (f.domain && f.domain != domain) throw InvalidArgument(std::string(what) + ": field belongs to another domain");
    if (f.values.size() != domain->node_count())
        throw InvalidArgument(std::string(what) + ": field length does not match node count");
}

struct FaceAssembler {
    const std::vector<int>& map;
    std::vector<Eigen::Triplet<double>> trips;

    void add(Eigen::Index a, Eigen::Index b, double c) {
        const int ia = map[a], ib = map[b];
        if (ia >= 0) trips.emplace_back(ia, ia, c);
        if (ib >= 0) trips.emplace_back(ib, ib, c);
        if (ia >= 0 && ib >= 0) {
            trips.emplace_back(ia, ib, -c);
            trips.emplace_back(ib, ia, -c);
        }
    }
};

}  // namespace

std::string to_string(DomainKind kind) {
    switch (kind) {
        case DomainKind::UnitSquare: return "square";
        case DomainKind::UnitDisk: return "disk";
        case DomainKind::RadialBall: return "ball";
    }
    return "?";
}

Field::Field(DomainPtr d, Eigen::VectorXd v) : domain(std::move(d)), values(std::move(v)) {
    if (domain && values.size() != domain->node_count())
        throw InvalidArgument("Field: length does not match node count");
}

Field::Field(DomainPtr d, double value) : domain(std::move(d)) {
    if (!domain) throw InvalidArgument("Field: null domain");
    values = Eigen::VectorXd::Constant(domain->node_count(), value);
}

double unit_ball_volume(int dim) {
    return std::pow(kPi, 0.5 * dim) / std::tgamma(0.5 * dim + 1.0);
}

void Domain::build_square(int n) {
    kind_ = DomainKind::UnitSquare;
    dim_ = 2;
    res_ = {n, n};
    h_ = 1.0 / (n - 1);
    radius_ = 0.0;
    const Eigen::Index nn = static_cast<Eigen::Index>(n) * n;
    weights_.resize(nn);
    c0_.resize(nn);
    c1_.resize(nn);
    boundary_.assign(nn, 0);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const Eigen::Index k = static_cast<Eigen::Index>(j) * n + i;
            c0_[k] = i * h_;
            c1_[k] = j * h_;
            const double wx = (i == 0 || i == n - 1) ? 0.5 : 1.0;
            const double wy = (j == 0 || j == n - 1) ? 0.5 : 1.0;
            weights_[k] = wx * wy * h_ * h_;
            boundary_[k] = (i == 0 || j == 0 || i == n - 1 || j == n - 1) ? 1 : 0;
        }
    }
    finalize();
    FaceAssembler fa{node_to_interior_, {}};
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const Eigen::Index k = static_cast<Eigen::Index>(j) * n + i;
            if (i + 1 < n) fa.add(k, k + 1, 1.0);
            if (j + 1 < n) fa.add(k, k + n, 1.0);
        }
    }
    K_.resize(interior_count(), interior_count());
    K_.setFromTriplets(fa.trips.begin(), fa.trips.end());
}

Eigen::Index Domain::polar_index(int ring, int j) const {
    if (ring == 0) return 0;
    return 1 + static_cast<Eigen::Index>(ring - 1) * angular_ + j;
}

void Domain::build_disk(int nr, int nt) {
    kind_ = DomainKind::UnitDisk;
    dim_ = 2;
    res_ = {nr, nt};
    angular_ = nt;
    radius_ = 1.0 / std::sqrt(kPi);
    h_ = radius_ / nr;
    const double dt = 2.0 * kPi / nt;
    const Eigen::Index nn = 1 + static_cast<Eigen::Index>(nr) * nt;
    weights_.resize(nn);
    c0_.resize(nn);
    c1_.resize(nn);
    boundary_.assign(nn, 0);
    weights_[0] = kPi * 0.25 * h_ * h_;
    c0_[0] = 0.0;
    c1_[0] = 0.0;
    for (int i = 1; i <= nr; ++i) {
        const double r = i * h_;
        const double inner = r - 0.5 * h_;
        const double outer = (i == nr) ? radius_ : r + 0.5 * h_;
        for (int j = 0; j < nt; ++j) {
            const Eigen::Index k = polar_index(i, j);
            c0_[k] = r;
            c1_[k] = j * dt;
            weights_[k] = 0.5 * (outer * outer - inner * inner) * dt;
            boundary_[k] = (i == nr) ? 1 : 0;
        }
    }
    finalize();
    FaceAssembler fa{node_to_interior_, {}};
    for (int j = 0; j < nt; ++j) fa.add(0, polar_index(1, j), 0.5 * dt);
    for (int i = 1; i <= nr; ++i) {
        const double r = i * h_;
        for (int j = 0; j < nt; ++j) {
            const Eigen::Index k = polar_index(i, j);
            if (i < nr) fa.add(k, polar_index(i + 1, j), (r + 0.5 * h_) * dt / h_);
            if (i < nr) fa.add(k, polar_index(i, (j + 1) % nt), h_ / (r * dt));
        }
    }
    K_.resize(interior_count(), interior_count());
    K_.setFromTriplets(fa.trips.begin(), fa.trips.end());

    auto sub = std::shared_ptr<Domain>(new Domain());
    sub->build_radial(nr, 2, nt);
    radial_ = sub;
}

void Domain::build_radial(int nr, int dim, int angular) {
    kind_ = DomainKind::RadialBall;
    dim_ = dim;
    res_ = {nr, 0};
    angular_ = angular;
    const double vol = unit_ball_volume(dim);
    const double sphere = dim * vol;
    radius_ = std::pow(vol, -1.0 / dim);
    h_ = radius_ / nr;
    const Eigen::Index nn = nr + 1;
    weights_.resize(nn);
    c0_.resize(nn);
    c1_ = Eigen::VectorXd::Zero(nn);
    boundary_.assign(nn, 0);
    for (int i = 0; i <= nr; ++i) {
        const double r = i * h_;
        const double inner = (i == 0) ? 0.0 : r - 0.5 * h_;
        const double outer = (i == nr) ? radius_ : r + 0.5 * h_;
        c0_[i] = r;
        weights_[i] = sphere * (std::pow(outer, dim) - std::pow(inner, dim)) / dim;
    }
    boundary_[nr] = 1;
    finalize();
    FaceAssembler fa{node_to_interior_, {}};
    for (int i = 0; i < nr; ++i) fa.add(i, i + 1, sphere * std::pow((i + 0.5) * h_, dim - 1) / h_);
    K_.resize(interior_count(), interior_count());
    K_.setFromTriplets(fa.trips.begin(), fa.trips.end());
}

void Domain::finalize() {
    const Eigen::Index nn = weights_.size();
    interior_.clear();
    node_to_interior_.assign(nn, -1);
    for (Eigen::Index k = 0; k < nn; ++k) {
        if (!boundary_[k]) {
            node_to_interior_[k] = static_cast<int>(interior_.size());
            interior_.push_back(static_cast<int>(k));
        }
    }
}

Eigen::VectorXd Domain::solve_stiffness(const Eigen::VectorXd& b) const {
    Eigen::VectorXd x = chol_->solve(b);
    if (chol_->info() != Eigen::Success) throw SolverError("green solve failed");
    return x;
}

Eigen::VectorXd Domain::gather(const Eigen::VectorXd& all) const {
    Eigen::VectorXd out(interior_count());
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = all[interior_[i]];
    return out;
}

Eigen::VectorXd Domain::scatter(const Eigen::VectorXd& in) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(node_count());
    for (Eigen::Index i = 0; i < in.size(); ++i) out[interior_[i]] = in[i];
    return out;
}

DomainPtr Domain::radial() const {
    if (kind_ == DomainKind::UnitDisk) return radial_;
    if (kind_ == DomainKind::RadialBall) return shared_from_this();
    return nullptr;
}

DomainPtr Domain::compute_domain() const {
    if (kind_ == DomainKind::UnitDisk) return radial_;
    return shared_from_this();
}

double Domain::midpoint_gradient_energy(const Eigen::VectorXd& f) const {
    double sum = 0.0;
    if (kind_ == DomainKind::UnitSquare) {
        const int n = res_.n1;
        for (int j = 0; j + 1 < n; ++j) {
            for (int i = 0; i + 1 < n; ++i) {
                const Eigen::Index k = static_cast<Eigen::Index>(j) * n + i;
                const double f00 = f[k], f10 = f[k + 1], f01 = f[k + n], f11 = f[k + n + 1];
                const double gx = (f10 + f11 - f00 - f01) / (2.0 * h_);
                const double gy = (f01 + f11 - f00 - f10) / (2.0 * h_);
                sum += (gx * gx + gy * gy) * h_ * h_;
            }
        }
    } else if (kind_ == DomainKind::UnitDisk) {
        const int nr = res_.n1, nt = angular_;
        const double dt = 2.0 * kPi / nt;
        for (int i = 0; i < nr; ++i) {
            const double rc = (i + 0.5) * h_;
            for (int j = 0; j < nt; ++j) {
                const int jn = (j + 1) % nt;
                const double a = f[polar_index(i, i == 0 ? 0 : j)];
                const double b = f[polar_index(i, i == 0 ? 0 : jn)];
                const double c = f[polar_index(i + 1, j)];
                const double d = f[polar_index(i + 1, jn)];
                const double gr = (c + d - a - b) / (2.0 * h_);
                const double gt = (b + d - a - c) / (2.0 * rc * dt);
                sum += (gr * gr + gt * gt) * rc * h_ * dt;
            }
        }
    } else {
        const double sphere = dim_ * unit_ball_volume(dim_);
        for (int i = 0; i < res_.n1; ++i) {
            const double g = (f[i + 1] - f[i]) / h_;
            const double meas = sphere * (std::pow((i + 1) * h_, dim_) - std::pow(i * h_, dim_)) / dim_;
            sum += g * g * meas;
        }
    }
    return 0.5 * sum;
}

DomainPtr build_domain(DomainKind kind, Resolution res, int dimension) {
    auto d = std::shared_ptr<Domain>(new Domain());
    switch (kind) {
        case DomainKind::UnitSquare:
            if (res.n1 < 16) throw InvalidArgument("resolution too small: need at least 16 nodes per direction");
            d->build_square(res.n1);
            break;
        case DomainKind::UnitDisk:
            if (res.n1 < 16 || res.n2 < 16)
                throw InvalidArgument("resolution too small: need at least 16 nodes per direction");
            d->build_disk(res.n1, res.n2);
            break;
        case DomainKind::RadialBall:
            if (res.n1 < 16) throw InvalidArgument("resolution too small: need at least 16 nodes per direction");
            if (dimension < 2) throw InvalidArgument("radial ball needs dimension >= 2");
            d->build_radial(res.n1, dimension, res.n2 > 0 ? res.n2 : 64);
            break;
        default:
            throw InvalidArgument("unsupported domain kind");
    }
    d->chol_ = std::make_shared<Eigen::SimplicialLLT<SpMat>>(d->K_);
    if (d->chol_->info() != Eigen::Success) throw SolverError("stiffness factorization failed");
    if (d->radial_) {
        auto sub = std::const_pointer_cast<Domain>(d->radial_);
        sub->chol_ = std::make_shared<Eigen::SimplicialLLT<SpMat>>(sub->K_);
    }
    return d;
}

Field laplacian_apply(const DomainPtr& domain, const Field& field) {
    check_field(domain, field, "laplacian_apply");
    const Eigen::VectorXd kx = domain->stiffness() * domain->gather(field.values);
    Eigen::VectorXd out = domain->scatter(kx);
    for (Eigen::Index i = 0; i < out.size(); ++i)
        if (!domain->is_boundary(i)) out[i] /= domain->weights()[i];
    return Field(domain, std::move(out));
}

Field green_apply(const DomainPtr& domain, const Field& source) {
    check_field(domain, source, "green_apply");
    if (!source.values.allFinite()) throw InvalidArgument("green_apply: non-finite source");
    const Eigen::VectorXd b = domain->gather(source.values.cwiseProduct(domain->weights()));
    return Field(domain, domain->scatter(domain->solve_stiffness(b)));
}

double integrate(const DomainPtr& domain, const Field& field) {
    check_field(domain, field, "integrate");
    return domain->weights().dot(field.values);
}

double weighted_mean(const DomainPtr& domain, const Field& weight, const Field& field) {
    check_field(domain, weight, "weighted_mean");
    check_field(domain, field, "weighted_mean");
    for (int k : domain->interior_nodes())
        if (!(weight[k] > 0.0)) throw InvalidArgument("weighted_mean: non-positive weight on an interior node");
    const Eigen::VectorXd ww = weight.values.cwiseProduct(domain->weights());
    return ww.dot(field.values) / ww.sum();
}

Field weighted_fluctuation(const DomainPtr& domain, const Field& weight, const Field& field) {
    const double mean = weighted_mean(domain, weight, field);
    return Field(domain, (field.values.array() - mean).matrix());
}

double dirichlet_energy(const DomainPtr& domain, const Field& field) {
    check_field(domain, field, "dirichlet_energy");
    return domain->midpoint_gradient_energy(field.values);
}

Field lift_to_polar(const DomainPtr& disk, const Field& radial_field, int mode, int parity) {
    if (!disk || disk->kind() != DomainKind::UnitDisk) throw InvalidArgument("lift_to_polar: disk domain required");
    const DomainPtr rad = disk->radial();
    if (radial_field.values.size() != rad->node_count())
        throw InvalidArgument("lift_to_polar: field is not on the radial sub-grid");
    Field out(disk);
    const int nr = disk->resolution().n1, nt = disk->angular_nodes();
    out[0] = mode == 0 ? radial_field[0] : 0.0;
    for (int i = 1; i <= nr; ++i) {
        for (int j = 0; j < nt; ++j) {
            const Eigen::Index k = disk->polar_index(i, j);
            const double th = disk->coord1()[k];
            const double ang = mode == 0 ? 1.0 : (parity == 0 ? std::cos(mode * th) : std::sin(mode * th));
            out[k] = radial_field[i] * ang;
        }
    }
    return out;
}

}  // namespace fbp
