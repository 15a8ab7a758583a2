#pragma once

#include "stefan/fem.hpp"
#include "stefan/forward.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stefan::inverse {

using forward::MeltingSchedule;
using forward::SpaceTimeTube;
using geometry::FourierBoundary;

struct ObservedTube {
    SpaceTimeTube tube;
    double delta = 0.0;
    std::uint64_t seed = 0;
    std::string source;
};

struct InverseParams {
    int order = 7;
    int boundary_vertices = 112;
    int rings = 18;
    int symmetry = 0;
    double um0 = 0.0;
    // Defaults to u_0 = u_m(0), i.e. v_0 = 0.
    std::optional<forward::InitialField> initial_field;

    void validate() const;
};

struct SplitFields {
    fem::Vector homogeneous;  // v^(1)
    fem::Vector source;       // v^(2)
};

SplitFields split_step(const fem::CrankNicolson& system, const fem::Vector& v);
SplitFields split_step(const geometry::MappedMesh& mesh, const fem::Vector& v, double dt);

struct AlphaFit {
    double alpha = 0.0;
    // RMS of c_i * alpha - b_i
    double residual = 0.0;
};

// Scalar least squares for c_i * alpha = b_i. Throws DegenerateSensitivity
// when sum c_i^2 < epsilon.
AlphaFit solve_scalar_least_squares(std::span<const double> c, std::span<const double> b,
                                    double epsilon = 0.0);

// Projects the per-vertex vector equation onto the radial directions.
// desired holds the target boundary points at the L equidistant angles.
AlphaFit estimate_alpha(const fem::BoundaryFlux& homogeneous_flux,
                        const fem::BoundaryFlux& source_flux, const FourierBoundary& current,
                        std::span<const geometry::Point> desired, double dt);

struct Reconstruction {
    MeltingSchedule schedule;
    std::vector<double> residuals;
};

Reconstruction reconstruct_schedule(const ObservedTube& observed, const InverseParams& params);

// Gaussian perturbation with standard deviation delta * a_{k,0} on every
// coefficient of records k >= 1. Positivity is checked at `samples` angles;
// failing draws are repeated up to 10 times.
ObservedTube add_noise(const SpaceTimeTube& tube, double delta, std::uint64_t seed,
                       std::size_t samples = 64);

} // namespace stefan::inverse
