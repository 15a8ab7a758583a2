#include "stefan/geometry.hpp"

#include "stefan/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <utility>

namespace stefan::geometry {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// cos/sin of 2*pi*num/den with the argument reduced exactly first.
std::pair<double, double> unit_root(long long num, long long den) {
    long long m = num % den;
    if (m < 0) m += den;
    const double a = kTwoPi * static_cast<double>(m) / static_cast<double>(den);
    return {std::cos(a), std::sin(a)};
}

} // namespace

FourierBoundary::FourierBoundary(int order)
    : order_(order), coeffs_(static_cast<std::size_t>(2 * order + 1), 0.0) {
    require(order >= 0, "Fourier order must be nonnegative");
}

FourierBoundary::FourierBoundary(int order, std::vector<double> coeffs)
    : order_(order), coeffs_(std::move(coeffs)) {
    require(order >= 0, "Fourier order must be nonnegative");
    require(coeffs_.size() == static_cast<std::size_t>(2 * order + 1),
            "expected 2M+1 = " + std::to_string(2 * order + 1) + " coefficients, got " +
                std::to_string(coeffs_.size()));
    for (double c : coeffs_) require(std::isfinite(c), "non-finite Fourier coefficient");
}

FourierBoundary FourierBoundary::circle(double radius, int order) {
    FourierBoundary b(order);
    b[0] = radius;
    return b;
}

double FourierBoundary::radius(double phi) const {
    double r = (*this)[0];
    for (int l = 1; l <= order_; ++l) {
        r += (*this)[l] * std::cos(l * phi) + (*this)[-l] * std::sin(l * phi);
    }
    return r;
}

double FourierBoundary::radius_derivative(double phi) const {
    double dr = 0.0;
    for (int l = 1; l <= order_; ++l) {
        dr += l * (-(*this)[l] * std::sin(l * phi) + (*this)[-l] * std::cos(l * phi));
    }
    return dr;
}

std::vector<double> FourierBoundary::sample(std::size_t samples) const {
    std::vector<double> r(samples, (*this)[0]);
    const auto n = static_cast<long long>(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        for (int l = 1; l <= order_; ++l) {
            const auto [c, s] = unit_root(static_cast<long long>(i) * l, n);
            r[i] += (*this)[l] * c + (*this)[-l] * s;
        }
    }
    return r;
}

void FourierBoundary::validate(std::size_t samples) const {
    for (double c : coeffs_) require(std::isfinite(c), "non-finite Fourier coefficient");
    const auto r = sample(samples);
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (!(r[i] > 0.0)) {
            std::ostringstream msg;
            msg << "radius " << r[i] << " at sample " << i << " of " << samples
                << " is not positive";
            throw Error(ErrorKind::NonPositiveRadius, msg.str());
        }
    }
}

FourierBoundary FourierBoundary::with_order(int order) const {
    FourierBoundary out(order);
    const int common = std::min(order, order_);
    for (int l = -common; l <= common; ++l) out[l] = (*this)[l];
    return out;
}

FourierBoundary FourierBoundary::rotated(double theta) const {
    // r'(phi) = r(phi - theta)
    FourierBoundary out(order_);
    out[0] = (*this)[0];
    for (int l = 1; l <= order_; ++l) {
        const double c = std::cos(l * theta), s = std::sin(l * theta);
        out[l] = (*this)[l] * c - (*this)[-l] * s;
        out[-l] = (*this)[l] * s + (*this)[-l] * c;
    }
    return out;
}

double radius(const FourierBoundary& b, double phi) { return b.radius(phi); }

Point map_point(const FourierBoundary& b, const Point& x) {
    const double norm = std::hypot(x[0], x[1]);
    if (norm == 0.0) return {0.0, 0.0};
    const double r = b.radius(std::atan2(x[1], x[0]));
    return {r * x[0], r * x[1]};
}

NormalInfo boundary_normal(const FourierBoundary& b, double phi) {
    const double r = b.radius(phi);
    if (!(r > 0.0)) {
        throw Error(ErrorKind::NonPositiveRadius,
                    "boundary normal requested where r = " + std::to_string(r));
    }
    const double dr = b.radius_derivative(phi);
    const double len = std::hypot(r, dr);
    const double c = std::cos(phi), s = std::sin(phi);
    // (r e_r - r' e_phi) / |.|, e_r = (c, s), e_phi = (-s, c)
    return {{(r * c + dr * s) / len, (r * s - dr * c) / len}, r / len};
}

double angle_of_sample(std::size_t i, std::size_t samples) {
    return kTwoPi * static_cast<double>(i) / static_cast<double>(samples);
}

FourierBoundary fit_fourier(std::span<const double> samples, int order) {
    const std::size_t n = samples.size();
    require(order >= 0, "Fourier order must be nonnegative");
    require(n > static_cast<std::size_t>(2 * order + 1),
            "fit_fourier needs more than 2M+1 = " + std::to_string(2 * order + 1) +
                " samples, got " + std::to_string(n));
    for (double v : samples) require(std::isfinite(v), "non-finite radius sample");

    FourierBoundary b(order);
    const auto len = static_cast<long long>(n);
    double mean = 0.0;
    for (double v : samples) mean += v;
    b[0] = mean / static_cast<double>(n);
    for (int l = 1; l <= order; ++l) {
        double sc = 0.0, ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto [c, s] = unit_root(static_cast<long long>(i) * l, len);
            sc += samples[i] * c;
            ss += samples[i] * s;
        }
        // l < n/2 here, so the discrete cos/sin norms are n/2.
        b[l] = 2.0 * sc / static_cast<double>(n);
        b[-l] = 2.0 * ss / static_cast<double>(n);
    }
    return b;
}

int default_symmetry(int boundary_vertices, int rings) {
    const int cap = std::max(8, static_cast<int>(std::lround(
                                    static_cast<double>(boundary_vertices) / rings)));
    int best = 1;
    for (int d = 1; d <= std::min(cap, boundary_vertices); ++d) {
        if (boundary_vertices % d == 0) best = d;
    }
    return best;
}

double signed_area(const Point& a, const Point& b, const Point& c) {
    return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
}

double mesh_area(std::span<const Point> vertices, std::span<const std::array<int, 3>> triangles) {
    double area = 0.0;
    for (const auto& t : triangles) area += signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
    return area;
}

ReferenceMesh generate_reference_mesh(int boundary_vertices, int rings, int symmetry) {
    require(boundary_vertices >= 8, "reference mesh needs at least 8 boundary vertices");
    require(rings >= 2, "reference mesh needs at least 2 rings");
    if (symmetry == 0) symmetry = default_symmetry(boundary_vertices, rings);
    require(symmetry >= 1 && boundary_vertices % symmetry == 0,
            "mesh symmetry must divide the boundary vertex count");
    // A ring needs at least 3 vertices to enclose the centre.
    const int base = symmetry >= 3 ? symmetry : symmetry * ((3 + symmetry - 1) / symmetry);

    ReferenceMesh mesh;
    mesh.symmetry = symmetry;
    mesh.vertices.push_back({0.0, 0.0});
    mesh.radius.push_back(0.0);
    mesh.angle.push_back(0.0);

    std::vector<int> count(static_cast<std::size_t>(rings) + 1, 1);
    std::vector<int> first(static_cast<std::size_t>(rings) + 1, 0);
    for (int j = 1; j <= rings; ++j) {
        int n;
        if (j == rings) {
            n = boundary_vertices;
        } else {
            const double ideal = static_cast<double>(boundary_vertices) * j / rings;
            n = base * std::max(1, static_cast<int>(std::lround(ideal / base)));
            n = std::min(n, boundary_vertices);
        }
        count[j] = n;
        first[j] = static_cast<int>(mesh.vertices.size());
        const double rho = static_cast<double>(j) / rings;
        for (int i = 0; i < n; ++i) {
            const auto [c, s] = unit_root(i, n);
            mesh.vertices.push_back(j == rings ? Point{c, s} : Point{rho * c, rho * s});
            mesh.radius.push_back(rho);
            mesh.angle.push_back(angle_of_sample(static_cast<std::size_t>(i),
                                                 static_cast<std::size_t>(n)));
        }
    }

    auto add = [&](int a, int b, int c) {
        if (signed_area(mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]) < 0.0) std::swap(b, c);
        mesh.triangles.push_back({a, b, c});
    };

    for (int i = 0; i < count[1]; ++i) add(0, first[1] + i, first[1] + (i + 1) % count[1]);

    // Zip neighbouring rings by angle; integer comparisons keep the pattern
    // exactly periodic under the mesh symmetry.
    for (int j = 2; j <= rings; ++j) {
        const long long na = count[j - 1], nb = count[j];
        const int fa = first[j - 1], fb = first[j];
        long long ia = 0, ib = 0;
        while (ia < na || ib < nb) {
            const bool advance_inner =
                ib >= nb || (ia < na && (ia + 1) * nb <= (ib + 1) * na);
            const int a0 = fa + static_cast<int>(ia % na);
            const int b0 = fb + static_cast<int>(ib % nb);
            if (advance_inner) {
                add(a0, fa + static_cast<int>((ia + 1) % na), b0);
                ++ia;
            } else {
                add(a0, fb + static_cast<int>((ib + 1) % nb), b0);
                ++ib;
            }
        }
    }

    for (int i = 0; i < boundary_vertices; ++i) mesh.boundary.push_back(first[rings] + i);

    mesh.vertex_triangles.assign(mesh.vertices.size(), {});
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        for (int v : mesh.triangles[t]) mesh.vertex_triangles[v].push_back(static_cast<int>(t));
    }
    return mesh;
}

MappedMesh map_mesh(const FourierBoundary& b, std::shared_ptr<const ReferenceMesh> ref,
                    int time_index) {
    require(ref != nullptr, "map_mesh needs a reference mesh");
    MappedMesh out;
    out.source = b;
    out.time_index = time_index;
    out.vertices.resize(ref->num_vertices());

    for (std::size_t i = 0; i < ref->num_vertices(); ++i) {
        const double rho = ref->radius[i];
        if (rho == 0.0) {
            out.vertices[i] = {0.0, 0.0};
            continue;
        }
        const double r = b.radius(ref->angle[i]);
        out.vertices[i] = {r * ref->vertices[i][0], r * ref->vertices[i][1]};
    }
    // Boundary radii through the exact-angle sampler so they agree bit-for-bit
    // with FourierBoundary::sample.
    const auto rb = b.sample(ref->num_boundary());
    for (std::size_t i = 0; i < rb.size(); ++i) {
        if (!(rb[i] > 0.0)) {
            throw Error(ErrorKind::NonPositiveRadius,
                        "boundary radius " + std::to_string(rb[i]) + " at vertex " +
                            std::to_string(i) + " is not positive");
        }
        const int v = ref->boundary[i];
        out.vertices[v] = {rb[i] * ref->vertices[v][0], rb[i] * ref->vertices[v][1]};
    }

    for (std::size_t t = 0; t < ref->triangles.size(); ++t) {
        const auto& tri = ref->triangles[t];
        const double area = signed_area(out.vertices[tri[0]], out.vertices[tri[1]], out.vertices[tri[2]]);
        if (!(area > 0.0)) {
            std::ostringstream msg;
            msg << "mapped triangle " << t << " has signed area " << area;
            throw Error(ErrorKind::FoldedMesh, msg.str());
        }
    }
    out.reference = std::move(ref);
    return out;
}

} // namespace stefan::geometry
