#include "stefan/fem.hpp"

#include "stefan/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace stefan::fem {

using geometry::Point;

namespace {

struct Element {
    double area;
    // Edge opposite vertex i, e_i = p_{i+2} - p_{i+1}; grad phi_i = rot90(e_i) / (2 area).
    std::array<Point, 3> edge;
};

Element element(std::span<const Point> vertices, const std::array<int, 3>& t, std::size_t index) {
    Element e;
    e.area = geometry::signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
    if (!(e.area > 0.0)) {
        std::ostringstream msg;
        msg << "degenerate triangle " << index << " (signed area " << e.area << ")";
        throw Error(ErrorKind::FoldedMesh, msg.str());
    }
    for (int i = 0; i < 3; ++i) {
        const Point& a = vertices[t[(i + 1) % 3]];
        const Point& b = vertices[t[(i + 2) % 3]];
        e.edge[i] = {b[0] - a[0], b[1] - a[1]};
    }
    return e;
}

SparseMatrix from_triplets(std::size_t n, const std::vector<Eigen::Triplet<double>>& triplets) {
    SparseMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.makeCompressed();
    return m;
}

} // namespace

SparseMatrix assemble_stiffness(std::span<const Point> vertices,
                                std::span<const std::array<int, 3>> triangles) {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(9 * triangles.size());
    for (std::size_t k = 0; k < triangles.size(); ++k) {
        const auto& t = triangles[k];
        const Element e = element(vertices, t, k);
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                const double dot = e.edge[i][0] * e.edge[j][0] + e.edge[i][1] * e.edge[j][1];
                triplets.emplace_back(t[i], t[j], dot / (4.0 * e.area));
            }
        }
    }
    return from_triplets(vertices.size(), triplets);
}

SparseMatrix assemble_mass(std::span<const Point> vertices,
                           std::span<const std::array<int, 3>> triangles) {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(9 * triangles.size());
    for (std::size_t k = 0; k < triangles.size(); ++k) {
        const auto& t = triangles[k];
        const double area = element(vertices, t, k).area;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                triplets.emplace_back(t[i], t[j], area * (i == j ? 2.0 : 1.0) / 12.0);
            }
        }
    }
    return from_triplets(vertices.size(), triplets);
}

Vector assemble_load(std::span<const Point> vertices, std::span<const std::array<int, 3>> triangles) {
    Vector f = Vector::Zero(static_cast<Eigen::Index>(vertices.size()));
    for (std::size_t k = 0; k < triangles.size(); ++k) {
        const auto& t = triangles[k];
        const double area = element(vertices, t, k).area;
        for (int v : t) f[v] += area / 3.0;
    }
    return f;
}

SparseMatrix assemble_stiffness(const geometry::MappedMesh& mesh) {
    return assemble_stiffness(mesh.vertices, mesh.triangles());
}

SparseMatrix assemble_mass(const geometry::MappedMesh& mesh) {
    return assemble_mass(mesh.vertices, mesh.triangles());
}

Vector assemble_load(const geometry::MappedMesh& mesh) {
    return assemble_load(mesh.vertices, mesh.triangles());
}

CrankNicolson::CrankNicolson(const SparseMatrix& stiffness, const SparseMatrix& mass, Vector load,
                             std::span<const int> boundary, double dt)
    : dt_(dt), load_(std::move(load)) {
    require(dt > 0.0, "time step must be positive");
    const auto n = mass.rows();
    require(stiffness.rows() == n && stiffness.cols() == n && mass.cols() == n &&
                load_.size() == n,
            "Crank-Nicolson operands have inconsistent sizes");

    explicit_part_ = mass - 0.5 * dt * stiffness;
    const SparseMatrix implicit_full = mass + 0.5 * dt * stiffness;

    std::vector<int> local(static_cast<std::size_t>(n), 0);
    for (int b : boundary) {
        require(b >= 0 && b < n, "boundary index out of range");
        local[b] = -1;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (local[i] == 0) {
            local[i] = static_cast<int>(interior_.size());
            interior_.push_back(static_cast<int>(i));
        }
    }

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(implicit_full.nonZeros()));
    for (Eigen::Index col = 0; col < implicit_full.outerSize(); ++col) {
        if (local[col] < 0) continue;
        for (SparseMatrix::InnerIterator it(implicit_full, col); it; ++it) {
            if (local[it.row()] < 0) continue;
            triplets.emplace_back(local[it.row()], local[col], it.value());
        }
    }
    const auto m = static_cast<Eigen::Index>(interior_.size());
    implicit_interior_.resize(m, m);
    implicit_interior_.setFromTriplets(triplets.begin(), triplets.end());
    implicit_interior_.makeCompressed();

    if (m > 0) {
        solver_.compute(implicit_interior_);
        if (solver_.info() != Eigen::Success) {
            throw Error(ErrorKind::SolverFailure, "Crank-Nicolson matrix factorization failed");
        }
    }
}

Vector CrankNicolson::solve_interior(const Vector& rhs_full) const {
    Vector out = Vector::Zero(load_.size());
    if (interior_.empty()) return out;
    Vector rhs(static_cast<Eigen::Index>(interior_.size()));
    for (std::size_t i = 0; i < interior_.size(); ++i) rhs[static_cast<Eigen::Index>(i)] = rhs_full[interior_[i]];

    const double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) {
        last_residual_ = 0.0;
        return out;
    }
    const Vector x = solver_.solve(rhs);
    if (solver_.info() != Eigen::Success) {
        throw Error(ErrorKind::SolverFailure, "Crank-Nicolson solve failed");
    }
    last_residual_ = (implicit_interior_ * x - rhs).norm() / rhs_norm;
    if (!(last_residual_ <= 1e-10)) {
        std::ostringstream msg;
        msg << "Crank-Nicolson solve residual " << last_residual_ << " exceeds 1e-10";
        throw Error(ErrorKind::SolverFailure, msg.str());
    }
    for (std::size_t i = 0; i < interior_.size(); ++i) out[interior_[i]] = x[static_cast<Eigen::Index>(i)];
    return out;
}

Vector CrankNicolson::step(const Vector& v, double alpha) const {
    require(v.size() == load_.size(), "field size does not match the system");
    return solve_interior(explicit_part_ * v - (dt_ * alpha) * load_);
}

Vector CrankNicolson::homogeneous(const Vector& v) const { return step(v, 0.0); }

Vector CrankNicolson::source_response() const { return solve_interior(-dt_ * load_); }

NodalField crank_nicolson_step(const SparseMatrix& stiffness, const SparseMatrix& mass,
                               const Vector& load, const geometry::MappedMesh& mesh,
                               const NodalField& v, double alpha, double dt) {
    const CrankNicolson cn(stiffness, mass, load, mesh.boundary(), dt);
    return {cn.step(v.values, alpha), v.time_index + 1};
}

BoundaryFlux boundary_flux(const geometry::MappedMesh& mesh, const Vector& v) {
    return boundary_flux(mesh, v, mesh.source);
}

BoundaryFlux boundary_flux(const geometry::MappedMesh& mesh, const Vector& v,
                           const geometry::FourierBoundary& b) {
    const auto& ref = *mesh.reference;
    require(static_cast<std::size_t>(v.size()) == mesh.num_vertices(),
            "field size does not match the mesh");
    BoundaryFlux flux;
    flux.values.resize(ref.num_boundary());
    for (std::size_t i = 0; i < ref.num_boundary(); ++i) {
        const int vertex = ref.boundary[i];
        const auto normal = geometry::boundary_normal(b, ref.angle[vertex]).normal;
        double weighted = 0.0, total_area = 0.0;
        for (int t : ref.vertex_triangles[vertex]) {
            const auto& tri = ref.triangles[t];
            const Element e = element(mesh.vertices, tri, static_cast<std::size_t>(t));
            double gx = 0.0, gy = 0.0;
            for (int k = 0; k < 3; ++k) {
                // rot90(e) = (-e_y, e_x)
                gx += v[tri[k]] * -e.edge[k][1];
                gy += v[tri[k]] * e.edge[k][0];
            }
            gx /= 2.0 * e.area;
            gy /= 2.0 * e.area;
            weighted += e.area * (gx * normal[0] + gy * normal[1]);
            total_area += e.area;
        }
        flux.values[i] = weighted / total_area;
    }
    return flux;
}

std::pair<double, double> rayleigh_taylor_check(const BoundaryFlux& flux) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double g : flux.values) {
        lo = std::min(lo, -g);
        hi = std::max(hi, -g);
    }
    return {lo, hi};
}

} // namespace stefan::fem
