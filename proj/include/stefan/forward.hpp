#pragma once

#include "stefan/fem.hpp"
#include "stefan/geometry.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace stefan::forward {

using geometry::FourierBoundary;
using geometry::Point;

// Piecewise-linear melting temperature on the uniform grid t_k = k*dt.
class MeltingSchedule {
public:
    MeltingSchedule() = default;

    // Values u_m(t_k) for k = 0..steps; slopes are the secants.
    static MeltingSchedule from_values(double dt, std::vector<double> values);
    static MeltingSchedule from_slopes(double dt, double initial_value, std::span<const double> slopes);
    static MeltingSchedule sample(const std::function<double(double)>& um, double dt, int steps);
    // Values and slopes given separately; they must agree to 1e-12 (scaled).
    static MeltingSchedule from_table(double dt, std::vector<double> values, std::vector<double> slopes);

    double dt() const noexcept { return dt_; }
    int steps() const noexcept { return static_cast<int>(slopes_.size()); }
    double time(int k) const noexcept { return k * dt_; }
    const std::vector<double>& values() const noexcept { return values_; }
    const std::vector<double>& slopes() const noexcept { return slopes_; }

    // Linear interpolation between breakpoints; clamps outside [0, T].
    double value_at(double t) const;

private:
    double dt_ = 0.0;
    std::vector<double> values_;
    std::vector<double> slopes_;
};

// u_m(t) = (t - 5/2)^2 / 20
double quadratic_melting(double t);
// u_m(t) = (cos 2t - 1) / 20
double cosine_melting(double t);

struct TubeRecord {
    double time = 0.0;
    FourierBoundary boundary;
};

// Sections (t_k, Gamma_k) of the space-time tube, k = 0..K.
struct SpaceTimeTube {
    int order = 0;
    double dt = 0.0;
    std::vector<TubeRecord> records;

    std::size_t size() const { return records.size(); }
    // Throws on non-uniform times or invalid boundaries.
    void validate(std::size_t samples) const;
};

// Initial temperature u_0 as a function of the reference radius s in [0, 1]
// (a constant profile equal to u_m(0) starts from v_0 = 0).
struct InitialField {
    std::function<double(double)> temperature;

    static InitialField constant(double u0);
    // Piecewise-linear in s through the given (s, u) nodes.
    static InitialField radial(std::vector<std::pair<double, double>> nodes);
};

// v_0 = u_0 - u_m(0) at every vertex, zero on the boundary.
fem::Vector initial_nodal_values(const InitialField& field, const geometry::ReferenceMesh& ref,
                                 double um0);

struct ForwardParams {
    double dt = 0.05;
    double final_time = 5.0;
    int order = 7;
    int boundary_vertices = 64;
    int rings = 16;
    int symmetry = 0;
    FourierBoundary initial_boundary = FourierBoundary::circle(1.0, 7);
    std::optional<InitialField> initial_field;  // defaults to u_0 = u_m(0)
    MeltingSchedule schedule;
    bool keep_fields = false;

    int steps() const;
    void validate() const;
};

struct FieldSnapshot {
    double time = 0.0;
    std::vector<Point> vertices;
    fem::NodalField field;
};

struct ForwardResult {
    SpaceTimeTube tube;
    std::vector<FieldSnapshot> fields;
    // Extrema of -dv/dn per step.
    std::vector<std::pair<double, double>> sign_check;
};

// Radial update r_i <- r_i - dt * (dv/dn)_i * <n, x_hat>_i followed by a
// truncated Fourier refit.
FourierBoundary advance_boundary(const FourierBoundary& b, const fem::BoundaryFlux& flux, double dt,
                                 int order);

struct KernelDiagnostics {
    double rcond = 0.0;
    bool regularized = false;
};

// v_new = L K^{-1} v_old with kappa(x, y) = exp(-|x - y|); entries listed in
// zero_at are reset to 0 afterwards.
fem::Vector kernel_interpolate(std::span<const Point> old_vertices, const fem::Vector& old_values,
                               std::span<const Point> new_vertices,
                               std::span<const int> zero_at = {},
                               KernelDiagnostics* diagnostics = nullptr);

ForwardResult simulate_forward(const ForwardParams& params);

// a_0 = 1, a_{+-l} ~ U[-c/l^2, c/l^2] for 1 <= l <= M.
FourierBoundary random_star_boundary(int order, double amplitude, std::uint64_t seed);

} // namespace stefan::forward
