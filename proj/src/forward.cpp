#include "stefan/forward.hpp"

#include "stefan/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace stefan::forward {

MeltingSchedule MeltingSchedule::from_values(double dt, std::vector<double> values) {
    require(dt > 0.0, "schedule time step must be positive");
    require(values.size() >= 2, "schedule needs at least two breakpoints");
    MeltingSchedule s;
    s.dt_ = dt;
    s.values_ = std::move(values);
    s.slopes_.resize(s.values_.size() - 1);
    for (std::size_t k = 0; k + 1 < s.values_.size(); ++k) {
        s.slopes_[k] = (s.values_[k + 1] - s.values_[k]) / dt;
    }
    return s;
}

MeltingSchedule MeltingSchedule::from_slopes(double dt, double initial_value,
                                             std::span<const double> slopes) {
    require(dt > 0.0, "schedule time step must be positive");
    MeltingSchedule s;
    s.dt_ = dt;
    s.slopes_.assign(slopes.begin(), slopes.end());
    s.values_.resize(slopes.size() + 1);
    s.values_[0] = initial_value;
    double acc = 0.0;
    for (std::size_t k = 0; k < slopes.size(); ++k) {
        acc += slopes[k];
        s.values_[k + 1] = initial_value + dt * acc;
    }
    return s;
}

MeltingSchedule MeltingSchedule::sample(const std::function<double(double)>& um, double dt, int steps) {
    require(steps >= 1, "schedule needs at least one step");
    std::vector<double> values(static_cast<std::size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k) values[static_cast<std::size_t>(k)] = um(k * dt);
    return from_values(dt, std::move(values));
}

MeltingSchedule MeltingSchedule::from_table(double dt, std::vector<double> values,
                                            std::vector<double> slopes) {
    require(dt > 0.0, "schedule time step must be positive");
    require(!values.empty() && slopes.size() + 1 == values.size(),
            "schedule needs one slope per interval");
    double scale = 1.0;
    for (double v : values) scale = std::max(scale, std::abs(v) / dt);
    for (std::size_t k = 0; k < slopes.size(); ++k) {
        const double secant = (values[k + 1] - values[k]) / dt;
        require(std::abs(secant - slopes[k]) <= 1e-12 * scale,
                "schedule slope " + std::to_string(k) + " disagrees with its values");
    }
    MeltingSchedule s;
    s.dt_ = dt;
    s.values_ = std::move(values);
    s.slopes_ = std::move(slopes);
    return s;
}

double MeltingSchedule::value_at(double t) const {
    if (values_.empty()) return 0.0;
    if (t <= 0.0) return values_.front();
    const double pos = t / dt_;
    const auto k = static_cast<std::size_t>(std::floor(pos));
    if (k + 1 >= values_.size()) return values_.back();
    return values_[k] + (t - static_cast<double>(k) * dt_) * slopes_[k];
}

double quadratic_melting(double t) { return (t - 2.5) * (t - 2.5) / 20.0; }

double cosine_melting(double t) { return (std::cos(2.0 * t) - 1.0) / 20.0; }

void SpaceTimeTube::validate(std::size_t samples) const {
    require(!records.empty(), "tube has no records");
    require(dt > 0.0, "tube time step must be positive");
    for (std::size_t k = 0; k < records.size(); ++k) {
        const auto& r = records[k];
        require(r.boundary.order() == order, "tube record " + std::to_string(k) + " has order " +
                                                 std::to_string(r.boundary.order()) + ", expected " +
                                                 std::to_string(order));
        const double expected = static_cast<double>(k) * dt + records.front().time;
        require(std::abs(r.time - expected) <= 1e-9 * std::max(1.0, std::abs(expected)),
                "tube times are not on a uniform grid at record " + std::to_string(k));
        r.boundary.validate(samples);
    }
}

InitialField InitialField::constant(double u0) {
    return {[u0](double) { return u0; }};
}

InitialField InitialField::radial(std::vector<std::pair<double, double>> nodes) {
    require(!nodes.empty(), "radial profile needs at least one node");
    std::sort(nodes.begin(), nodes.end());
    return {[nodes = std::move(nodes)](double s) {
        if (s <= nodes.front().first) return nodes.front().second;
        if (s >= nodes.back().first) return nodes.back().second;
        auto hi = std::upper_bound(nodes.begin(), nodes.end(), s,
                                   [](double x, const auto& n) { return x < n.first; });
        auto lo = std::prev(hi);
        const double w = (s - lo->first) / (hi->first - lo->first);
        return lo->second + w * (hi->second - lo->second);
    }};
}

fem::Vector initial_nodal_values(const InitialField& field, const geometry::ReferenceMesh& ref,
                                 double um0) {
    fem::Vector v(static_cast<Eigen::Index>(ref.num_vertices()));
    for (std::size_t i = 0; i < ref.num_vertices(); ++i) {
        v[static_cast<Eigen::Index>(i)] = field.temperature(ref.radius[i]) - um0;
    }
    for (int b : ref.boundary) v[b] = 0.0;
    return v;
}

int ForwardParams::steps() const { return static_cast<int>(std::lround(final_time / dt)); }

void ForwardParams::validate() const {
    require(dt > 0.0, "dt must be positive");
    require(final_time > 0.0, "final time must be positive");
    const double ratio = final_time / dt;
    require(std::abs(ratio - std::round(ratio)) <= 1e-9 * std::max(1.0, ratio),
            "T/dt must be an integer");
    require(order >= 0, "Fourier order must be nonnegative");
    require(boundary_vertices > 2 * order + 1, "boundary vertex count L must exceed 2M+1");
    require(rings >= 2, "mesh needs at least 2 rings");
    require(schedule.steps() >= steps(), "melting schedule is shorter than the run");
    require(std::abs(schedule.dt() - dt) <= 1e-12 * dt, "melting schedule step differs from dt");
}

FourierBoundary advance_boundary(const FourierBoundary& b, const fem::BoundaryFlux& flux, double dt,
                                 int order) {
    const std::size_t n = flux.size();
    require(n > static_cast<std::size_t>(2 * order + 1), "boundary vertex count L must exceed 2M+1");
    auto radii = b.sample(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double factor = geometry::boundary_normal(b, geometry::angle_of_sample(i, n)).radial_factor;
        radii[i] -= dt * flux.values[i] * factor;
        if (!(radii[i] > 0.0)) {
            std::ostringstream msg;
            msg << "updated radius " << radii[i] << " at boundary vertex " << i << " is not positive";
            throw Error(ErrorKind::NonPositiveRadius, msg.str());
        }
    }
    auto next = geometry::fit_fourier(radii, order);
    next.validate(n);
    return next;
}

fem::Vector kernel_interpolate(std::span<const Point> old_vertices, const fem::Vector& old_values,
                               std::span<const Point> new_vertices, std::span<const int> zero_at,
                               KernelDiagnostics* diagnostics) {
    const auto n = static_cast<Eigen::Index>(old_vertices.size());
    require(old_values.size() == n, "kernel interpolation: value count does not match vertices");
    fem::Vector out = fem::Vector::Zero(static_cast<Eigen::Index>(new_vertices.size()));
    KernelDiagnostics diag;
    if (n == 0 || old_values.isZero(0.0)) {
        diag.rcond = 1.0;
        if (diagnostics) *diagnostics = diag;
        return out;
    }

    auto kernel = [](const Point& a, const Point& b) {
        return std::exp(-std::hypot(a[0] - b[0], a[1] - b[1]));
    };

    Eigen::MatrixXd gram(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        gram(j, j) = 1.0;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            gram(i, j) = kernel(old_vertices[static_cast<std::size_t>(i)],
                                old_vertices[static_cast<std::size_t>(j)]);
        }
    }

    Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(gram);
    diag.rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
    if (llt.info() != Eigen::Success || diag.rcond < 1e-12) {
        // trace(K) = n, so the jitter is 1e-10 * trace / n
        gram.diagonal().array() += 1e-10;
        llt.compute(gram);
        diag.regularized = true;
        if (llt.info() != Eigen::Success) {
            throw Error(ErrorKind::SolverFailure,
                        "kernel matrix is not positive definite even after regularization "
                        "(duplicate vertices?)");
        }
        diag.rcond = llt.rcond();
    }
    const fem::Vector weights = llt.solve(old_values);

    for (std::size_t j = 0; j < new_vertices.size(); ++j) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            acc += kernel(new_vertices[j], old_vertices[static_cast<std::size_t>(i)]) * weights[i];
        }
        out[static_cast<Eigen::Index>(j)] = acc;
    }
    for (int b : zero_at) out[b] = 0.0;
    if (diagnostics) *diagnostics = diag;
    return out;
}

ForwardResult simulate_forward(const ForwardParams& params) {
    params.validate();
    const int steps = params.steps();
    const auto ref = std::make_shared<const geometry::ReferenceMesh>(geometry::generate_reference_mesh(
        params.boundary_vertices, params.rings, params.symmetry));
    const std::size_t samples = ref->num_boundary();
    const auto& slopes = params.schedule.slopes();
    const double um0 = params.schedule.values().front();

    ForwardResult result;
    result.tube.order = params.order;
    result.tube.dt = params.dt;

    FourierBoundary boundary = params.initial_boundary.with_order(params.order);
    boundary.validate(samples);
    result.tube.records.push_back({0.0, boundary});

    geometry::MappedMesh mesh;
    try {
        mesh = geometry::map_mesh(boundary, ref, 0);
    } catch (const Error& e) {
        throw e.with_step(0);
    }
    const InitialField field = params.initial_field.value_or(InitialField::constant(um0));
    fem::Vector v = initial_nodal_values(field, *ref, um0);

    if (params.keep_fields) result.fields.push_back({0.0, mesh.vertices, {v, 0}});

    for (int k = 0; k < steps; ++k) {
        try {
            const fem::CrankNicolson cn(fem::assemble_stiffness(mesh), fem::assemble_mass(mesh),
                                        fem::assemble_load(mesh), mesh.boundary(), params.dt);
            const fem::Vector next = cn.step(v, slopes[static_cast<std::size_t>(k)]);
            const auto flux = fem::boundary_flux(mesh, next);
            result.sign_check.push_back(fem::rayleigh_taylor_check(flux));

            boundary = advance_boundary(boundary, flux, params.dt, params.order);
            auto next_mesh = geometry::map_mesh(boundary, ref, k + 1);
            v = kernel_interpolate(mesh.vertices, next, next_mesh.vertices, ref->boundary);
            mesh = std::move(next_mesh);
        } catch (const Error& e) {
            throw e.with_step(k);
        }
        const double t = (k + 1) * params.dt;
        result.tube.records.push_back({t, boundary});
        if (params.keep_fields) result.fields.push_back({t, mesh.vertices, {v, k + 1}});
    }
    return result;
}

FourierBoundary random_star_boundary(int order, double amplitude, std::uint64_t seed) {
    FourierBoundary b(order);
    b[0] = 1.0;
    std::mt19937_64 rng(seed);
    for (int l = 1; l <= order; ++l) {
        const double bound = amplitude / (static_cast<double>(l) * l);
        std::uniform_real_distribution<double> dist(-bound, bound);
        b[l] = dist(rng);
        b[-l] = dist(rng);
    }
    return b;
}

} // namespace stefan::forward
