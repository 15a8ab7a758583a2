#pragma once

#include "stefan/geometry.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace stefan::fem {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

// Per-vertex values of the shifted temperature v = u - u_m.
struct NodalField {
    Vector values;
    int time_index = 0;

    std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

// Normal derivative dv/dn at each boundary vertex, in boundary order.
struct BoundaryFlux {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
};

// Exact P1 element contributions.
SparseMatrix assemble_stiffness(std::span<const geometry::Point> vertices,
                                std::span<const std::array<int, 3>> triangles);
SparseMatrix assemble_mass(std::span<const geometry::Point> vertices,
                           std::span<const std::array<int, 3>> triangles);
Vector assemble_load(std::span<const geometry::Point> vertices,
                     std::span<const std::array<int, 3>> triangles);

SparseMatrix assemble_stiffness(const geometry::MappedMesh& mesh);
SparseMatrix assemble_mass(const geometry::MappedMesh& mesh);
Vector assemble_load(const geometry::MappedMesh& mesh);

// (M + dt/2 A) v_{k+1} = (M - dt/2 A) v_k - dt*alpha*f with v = 0 on the
// boundary, eliminated from the unknowns. The interior system is factorized
// once and reused, which is what the inverse solver needs for the split.
class CrankNicolson {
public:
    CrankNicolson(const SparseMatrix& stiffness, const SparseMatrix& mass, Vector load,
                  std::span<const int> boundary, double dt);

    double dt() const noexcept { return dt_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(load_.size()); }

    Vector step(const Vector& v, double alpha) const;

    // Response to v alone (alpha = 0).
    Vector homogeneous(const Vector& v) const;

    // Response to the source -dt*f from v = 0 (unit alpha).
    Vector source_response() const;

    // Relative residual of the last interior solve.
    double last_residual() const noexcept { return last_residual_; }

private:
    Vector solve_interior(const Vector& rhs_full) const;

    double dt_;
    SparseMatrix explicit_part_;  // M - dt/2 A, full size
    SparseMatrix implicit_interior_;
    Vector load_;
    std::vector<int> interior_;   // full index of each interior unknown
    Eigen::SimplicialLDLT<SparseMatrix> solver_;
    mutable double last_residual_ = 0.0;
};

NodalField crank_nicolson_step(const SparseMatrix& stiffness, const SparseMatrix& mass,
                               const Vector& load, const geometry::MappedMesh& mesh,
                               const NodalField& v, double alpha, double dt);

// Area-weighted average of <grad v, n> over the triangles incident to each
// boundary vertex, with n the analytic normal of the mesh's source boundary.
BoundaryFlux boundary_flux(const geometry::MappedMesh& mesh, const Vector& v);
BoundaryFlux boundary_flux(const geometry::MappedMesh& mesh, const Vector& v,
                           const geometry::FourierBoundary& b);

// (min, max) of -dv/dn along the boundary.
std::pair<double, double> rayleigh_taylor_check(const BoundaryFlux& flux);

} // namespace stefan::fem
