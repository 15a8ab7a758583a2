#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace stefan::geometry {

using Point = std::array<double, 2>;

// Star-shaped boundary r(phi) = a_0 + sum_l a_l cos(l phi) + a_{-l} sin(l phi).
// Coefficients are stored as [a_{-M}, ..., a_{-1}, a_0, a_1, ..., a_M].
class FourierBoundary {
public:
    FourierBoundary() : FourierBoundary(0) {}
    explicit FourierBoundary(int order);
    FourierBoundary(int order, std::vector<double> coeffs);

    static FourierBoundary circle(double radius, int order = 0);

    int order() const noexcept { return order_; }
    std::size_t size() const noexcept { return coeffs_.size(); }
    std::span<const double> coeffs() const noexcept { return coeffs_; }

    // Coefficient a_l for -M <= l <= M.
    double operator[](int l) const { return coeffs_[static_cast<std::size_t>(l + order_)]; }
    double& operator[](int l) { return coeffs_[static_cast<std::size_t>(l + order_)]; }

    double mean_radius() const { return (*this)[0]; }

    double radius(double phi) const;
    double radius_derivative(double phi) const;

    // Radii at the angles 2*pi*i/samples.
    std::vector<double> sample(std::size_t samples) const;

    // Throws NonPositiveRadius when r <= 0 at one of the sample angles, or
    // InvalidArgument on non-finite coefficients.
    void validate(std::size_t samples) const;

    // Truncate or zero-pad to another order.
    FourierBoundary with_order(int order) const;

    // Boundary of the domain rotated counterclockwise by theta.
    FourierBoundary rotated(double theta) const;

    bool operator==(const FourierBoundary&) const = default;

private:
    int order_;
    std::vector<double> coeffs_;
};

struct NormalInfo {
    Point normal;
    // <n, x_hat> = r / sqrt(r^2 + r'^2)
    double radial_factor;
};

double radius(const FourierBoundary& b, double phi);
Point map_point(const FourierBoundary& b, const Point& x);
NormalInfo boundary_normal(const FourierBoundary& b, double phi);

// Least-squares fit of a degree-M trigonometric polynomial to radii sampled
// at 2*pi*i/L via the discrete Fourier transform. Requires L > 2M+1.
FourierBoundary fit_fourier(std::span<const double> samples, int order);

double angle_of_sample(std::size_t i, std::size_t samples);

struct ReferenceMesh {
    std::vector<Point> vertices;
    // Reference polar coordinates of every vertex (angle exact by construction).
    std::vector<double> radius;
    std::vector<double> angle;
    std::vector<std::array<int, 3>> triangles;
    // Counterclockwise from angle 0, on the unit circle.
    std::vector<int> boundary;
    // Triangles incident to each vertex.
    std::vector<std::vector<int>> vertex_triangles;
    int symmetry = 1;

    std::size_t num_vertices() const { return vertices.size(); }
    std::size_t num_boundary() const { return boundary.size(); }
};

// Concentric-ring triangulation of the unit disc. Ring j sits at radius
// j/rings; every ring carries a multiple of `symmetry` vertices so the mesh is
// invariant under rotation by 2*pi/symmetry. symmetry = 0 picks a default.
ReferenceMesh generate_reference_mesh(int boundary_vertices, int rings, int symmetry = 0);

int default_symmetry(int boundary_vertices, int rings);

struct MappedMesh {
    std::shared_ptr<const ReferenceMesh> reference;
    std::vector<Point> vertices;
    FourierBoundary source;
    int time_index = 0;

    std::size_t num_vertices() const { return vertices.size(); }
    const std::vector<std::array<int, 3>>& triangles() const { return reference->triangles; }
    const std::vector<int>& boundary() const { return reference->boundary; }
};

// Throws FoldedMesh if a mapped triangle has non-positive signed area.
MappedMesh map_mesh(const FourierBoundary& b, std::shared_ptr<const ReferenceMesh> ref,
                    int time_index = 0);

double signed_area(const Point& a, const Point& b, const Point& c);

double mesh_area(std::span<const Point> vertices, std::span<const std::array<int, 3>> triangles);

} // namespace stefan::geometry
