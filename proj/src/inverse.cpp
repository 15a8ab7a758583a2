#include "stefan/inverse.hpp"

#include "stefan/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace stefan::inverse {

void InverseParams::validate() const {
    require(order >= 0, "inverse Fourier order must be nonnegative");
    require(boundary_vertices > 2 * order + 1, "inverse boundary vertex count must exceed 2M+1");
    require(rings >= 2, "inverse mesh needs at least 2 rings");
}

SplitFields split_step(const fem::CrankNicolson& system, const fem::Vector& v) {
    return {system.homogeneous(v), system.source_response()};
}

SplitFields split_step(const geometry::MappedMesh& mesh, const fem::Vector& v, double dt) {
    const fem::CrankNicolson system(fem::assemble_stiffness(mesh), fem::assemble_mass(mesh),
                                    fem::assemble_load(mesh), mesh.boundary(), dt);
    return split_step(system, v);
}

AlphaFit solve_scalar_least_squares(std::span<const double> c, std::span<const double> b,
                                    double epsilon) {
    require(c.size() == b.size() && !c.empty(), "least squares needs matching nonempty c and b");
    double cc = 0.0, cb = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        cc += c[i] * c[i];
        cb += c[i] * b[i];
    }
    if (!(cc > epsilon) || cc == 0.0) {
        std::ostringstream msg;
        msg << "source term has no observable effect on the boundary (sum c^2 = " << cc << ")";
        throw Error(ErrorKind::DegenerateSensitivity, msg.str());
    }
    AlphaFit fit;
    fit.alpha = cb / cc;
    double rss = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double r = c[i] * fit.alpha - b[i];
        rss += r * r;
    }
    fit.residual = std::sqrt(rss / static_cast<double>(c.size()));
    return fit;
}

AlphaFit estimate_alpha(const fem::BoundaryFlux& homogeneous_flux,
                        const fem::BoundaryFlux& source_flux, const FourierBoundary& current,
                        std::span<const geometry::Point> desired, double dt) {
    const std::size_t n = desired.size();
    require(homogeneous_flux.size() == n && source_flux.size() == n,
            "flux and desired boundary sizes differ");
    require(dt > 0.0, "dt must be positive");
    const auto radii = current.sample(n);

    // Forward update: r_new = r - dt * (flux1 + alpha * flux2) * <n, x_hat>.
    std::vector<double> c(n), b(n);
    double mean_r = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double factor =
            geometry::boundary_normal(current, geometry::angle_of_sample(i, n)).radial_factor;
        const double target = std::hypot(desired[i][0], desired[i][1]);
        c[i] = source_flux.values[i] * factor;
        b[i] = (radii[i] - target) / dt - homogeneous_flux.values[i] * factor;
        mean_r += radii[i];
    }
    mean_r /= static_cast<double>(n);
    const double epsilon = 1e-14 * static_cast<double>(n) * std::max(1.0, mean_r * mean_r);
    return solve_scalar_least_squares(c, b, epsilon);
}

Reconstruction reconstruct_schedule(const ObservedTube& observed, const InverseParams& params) {
    params.validate();
    const auto& tube = observed.tube;
    require(tube.records.size() >= 2, "tube needs at least two records");
    const double dt = tube.dt;
    require(dt > 0.0, "tube time step must be positive");
    for (std::size_t k = 1; k < tube.records.size(); ++k) {
        const double gap = tube.records[k].time - tube.records[k - 1].time;
        require(std::abs(gap - dt) <= 1e-9 * std::max(1.0, dt),
                "tube times are not on the declared uniform grid");
    }

    const auto ref = std::make_shared<const geometry::ReferenceMesh>(
        geometry::generate_reference_mesh(params.boundary_vertices, params.rings, params.symmetry));
    const std::size_t samples = ref->num_boundary();

    auto section = [&](std::size_t k) {
        return tube.records[k].boundary.with_order(params.order);
    };

    geometry::MappedMesh mesh;
    try {
        mesh = geometry::map_mesh(section(0), ref, 0);
    } catch (const Error& e) {
        throw e.with_step(0);
    }
    const auto field = params.initial_field.value_or(forward::InitialField::constant(params.um0));
    fem::Vector v = forward::initial_nodal_values(field, *ref, params.um0);

    const std::size_t steps = tube.records.size() - 1;
    std::vector<double> slopes(steps);
    Reconstruction out;
    out.residuals.resize(steps);

    for (std::size_t k = 0; k < steps; ++k) {
        const int step = static_cast<int>(k);
        try {
            const fem::CrankNicolson system(fem::assemble_stiffness(mesh), fem::assemble_mass(mesh),
                                            fem::assemble_load(mesh), mesh.boundary(), dt);
            const SplitFields split = split_step(system, v);
            const auto flux1 = fem::boundary_flux(mesh, split.homogeneous);
            const auto flux2 = fem::boundary_flux(mesh, split.source);

            const FourierBoundary target = section(k + 1);
            const auto target_radii = target.sample(samples);
            std::vector<geometry::Point> desired(samples);
            for (std::size_t i = 0; i < samples; ++i) {
                const int vtx = ref->boundary[i];
                desired[i] = {target_radii[i] * ref->vertices[vtx][0],
                              target_radii[i] * ref->vertices[vtx][1]};
            }
            const AlphaFit fit = estimate_alpha(flux1, flux2, mesh.source, desired, dt);
            slopes[k] = fit.alpha;
            out.residuals[k] = fit.residual;

            const fem::Vector next = split.homogeneous + fit.alpha * split.source;
            auto next_mesh = geometry::map_mesh(target, ref, step + 1);
            v = forward::kernel_interpolate(mesh.vertices, next, next_mesh.vertices, ref->boundary);
            mesh = std::move(next_mesh);
        } catch (const Error& e) {
            throw e.with_step(step);
        }
    }
    out.schedule = MeltingSchedule::from_slopes(dt, params.um0, slopes);
    return out;
}

ObservedTube add_noise(const SpaceTimeTube& tube, double delta, std::uint64_t seed,
                       std::size_t samples) {
    require(delta >= 0.0 && std::isfinite(delta), "noise level must be nonnegative");
    ObservedTube out;
    out.tube = tube;
    out.delta = delta;
    out.seed = seed;
    if (delta == 0.0) return out;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t k = 1; k < out.tube.records.size(); ++k) {
        const FourierBoundary& clean = tube.records[k].boundary;
        const double sigma = delta * clean[0];
        bool accepted = false;
        for (int attempt = 0; attempt <= 10 && !accepted; ++attempt) {
            FourierBoundary noisy = clean;
            for (int l = -clean.order(); l <= clean.order(); ++l) noisy[l] += sigma * normal(rng);
            const auto r = noisy.sample(samples);
            if (std::all_of(r.begin(), r.end(), [](double x) { return x > 0.0; })) {
                out.tube.records[k].boundary = std::move(noisy);
                accepted = true;
            }
        }
        if (!accepted) {
            throw Error(ErrorKind::NonPositiveRadius,
                        "noisy boundary at record " + std::to_string(k) +
                            " lost positivity after 10 redraws");
        }
    }
    return out;
}

} // namespace stefan::inverse
