#include <doctest.h>

#include "oracles.hpp"
#include "stefan/error.hpp"
#include "stefan/inverse.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace stefan;
using namespace stefan::inverse;
using geometry::Point;
using std::numbers::pi;

namespace {

std::shared_ptr<const geometry::ReferenceMesh> reference(int L, int rings) {
    return std::make_shared<const geometry::ReferenceMesh>(geometry::generate_reference_mesh(L, rings));
}

forward::SpaceTimeTube forward_tube(double (*um)(double), double final_time, std::uint64_t shape_seed) {
    forward::ForwardParams p;
    p.final_time = final_time;
    p.initial_boundary = forward::random_star_boundary(7, 0.1, shape_seed);
    p.schedule = MeltingSchedule::sample(um, p.dt, p.steps());
    return forward::simulate_forward(p).tube;
}

InverseParams same_discretization(double um0) {
    InverseParams p;
    p.order = 7;
    p.boundary_vertices = 64;
    p.rings = 16;
    p.um0 = um0;
    return p;
}

fem::Vector bump(const geometry::MappedMesh& m) {
    fem::Vector v(static_cast<Eigen::Index>(m.num_vertices()));
    for (std::size_t i = 0; i < m.num_vertices(); ++i) {
        const auto& p = m.vertices[i];
        v[static_cast<Eigen::Index>(i)] = 0.3 * std::cos(p[0] + 2 * p[1]) - 0.1;
    }
    for (int b : m.boundary()) v[b] = 0.0;
    return v;
}

} // namespace

TEST_CASE("scalar least squares: examples") {
    const std::vector<double> c{1.0, 2.0}, b{2.0, 4.0};
    const auto fit = solve_scalar_least_squares(c, b);
    CHECK(fit.alpha == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(fit.residual == doctest::Approx(0.0));

    const auto mixed = solve_scalar_least_squares(std::vector<double>{1.0, 1.0}, std::vector<double>{1.0, 3.0});
    CHECK(mixed.alpha == doctest::Approx(2.0));
    CHECK(mixed.residual == doctest::Approx(1.0));

    try {
        (void)solve_scalar_least_squares(std::vector<double>{0.0, 0.0}, b, 1e-14);
        FAIL("expected DegenerateSensitivity");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateSensitivity);
    }
}

TEST_CASE("scalar least squares is scale invariant") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<double> c(30), b(30);
        for (auto& x : c) x = g(rng);
        for (auto& x : b) x = g(rng);
        const double lambda = std::exp(3.0 * g(rng));
        const double alpha = solve_scalar_least_squares(c, b).alpha;
        std::vector<double> cs(c), bs(b);
        for (auto& x : cs) x *= lambda;
        for (auto& x : bs) x *= lambda;
        CHECK(solve_scalar_least_squares(cs, bs).alpha == doctest::Approx(alpha).epsilon(1e-12));
    }
}

TEST_CASE("split step: zero state and linearity") {
    const auto ref = reference(64, 16);
    const auto mesh = geometry::map_mesh(forward::random_star_boundary(7, 0.1, 3), ref);
    const auto zero = split_step(mesh, fem::Vector::Zero(static_cast<Eigen::Index>(mesh.num_vertices())), 0.05);
    CHECK(zero.homogeneous.cwiseAbs().maxCoeff() == 0.0);

    const fem::CrankNicolson system(fem::assemble_stiffness(mesh), fem::assemble_mass(mesh), fem::assemble_load(mesh),
                                    mesh.boundary(), 0.05);
    const auto v = bump(mesh);
    const auto split = split_step(system, v);
    for (double alpha : {-1.0, 0.0, 0.37, 2.0}) {
        const fem::Vector full = system.step(v, alpha);
        const fem::Vector sum = split.homogeneous + alpha * split.source;
        CHECK((full - sum).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, full.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("source response is negative inside the domain") {
    const auto ref = reference(32, 6);
    const auto mesh = geometry::map_mesh(forward::random_star_boundary(7, 0.1, 4), ref);
    const auto split = split_step(mesh, fem::Vector::Zero(static_cast<Eigen::Index>(mesh.num_vertices())), 0.05);
    const auto dense = oracle::dense_fem(mesh.vertices, {mesh.triangles().begin(), mesh.triangles().end()});
    const auto expected = oracle::dense_cn_step(dense, mesh.boundary(), fem::Vector::Zero(split.source.size()), 1.0, 0.05);
    CHECK((split.source - expected).cwiseAbs().maxCoeff() <= 1e-12);
    std::vector<bool> on_boundary(mesh.num_vertices(), false);
    for (int b : mesh.boundary()) on_boundary[static_cast<std::size_t>(b)] = true;
    for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
        if (!on_boundary[i]) CHECK(split.source[static_cast<Eigen::Index>(i)] < 0.0);
    }
    // so the source flux points inward-warming: dv2/dn > 0
    for (double f : fem::boundary_flux(mesh, split.source).values) CHECK(f > 0.0);
}

TEST_CASE("estimate_alpha recovers the rate behind a forward update") {
    const auto ref = reference(64, 16);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto b = forward::random_star_boundary(7, 0.1, seed);
        const auto mesh = geometry::map_mesh(b, ref);
        const auto split = split_step(mesh, bump(mesh), 0.05);
        const auto f1 = fem::boundary_flux(mesh, split.homogeneous);
        const auto f2 = fem::boundary_flux(mesh, split.source);
        for (double alpha_true : {-0.8, 0.0, 0.25, 3.0}) {
            // per-vertex radial update with the known rate, no refit
            std::vector<Point> desired(64);
            const auto radii = b.sample(64);
            for (int i = 0; i < 64; ++i) {
                const double phi = 2 * pi * i / 64;
                const double factor = geometry::boundary_normal(b, phi).radial_factor;
                const double r = radii[i] - 0.05 * (f1.values[i] + alpha_true * f2.values[i]) * factor;
                desired[i] = {r * std::cos(phi), r * std::sin(phi)};
            }
            const auto fit = estimate_alpha(f1, f2, b, desired, 0.05);
            CHECK(std::abs(fit.alpha - alpha_true) <= 1e-9 * std::max(1.0, std::abs(alpha_true)));
            CHECK(fit.residual <= 1e-9);
        }
    }
}

TEST_CASE("estimate_alpha reports a degenerate sensitivity") {
    const auto b = geometry::FourierBoundary::circle(1.0, 7);
    std::vector<Point> desired(64);
    for (int i = 0; i < 64; ++i) desired[i] = {std::cos(2 * pi * i / 64), std::sin(2 * pi * i / 64)};
    const fem::BoundaryFlux zero{std::vector<double>(64, 0.0)};
    try {
        (void)estimate_alpha(zero, zero, b, desired, 0.05);
        FAIL("expected DegenerateSensitivity");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateSensitivity);
    }
}

TEST_CASE("a stationary tube reconstructs a zero rate") {
    forward::SpaceTimeTube tube;
    tube.order = 7;
    tube.dt = 0.05;
    const auto b = forward::random_star_boundary(7, 0.1, 8);
    for (int k = 0; k <= 40; ++k) tube.records.push_back({k * 0.05, b});
    const auto rec = reconstruct_schedule({tube, 0.0, 0, "test"}, same_discretization(0.2));
    for (double s : rec.schedule.slopes()) CHECK(std::abs(s) <= 1e-8);
    for (double u : rec.schedule.values()) CHECK(u == doctest::Approx(0.2));
}

TEST_CASE("noiseless round trip on the generating discretization") {
    for (auto preset : {forward::quadratic_melting, forward::cosine_melting}) {
        const auto tube = forward_tube(preset, 2.0, 21);
        const auto truth = MeltingSchedule::sample(preset, 0.05, 40);
        const auto rec = reconstruct_schedule({tube, 0.0, 0, "test"}, same_discretization(truth.values()[0]));
        double worst = 0.0, scale = 0.0;
        for (std::size_t k = 0; k < truth.slopes().size(); ++k) {
            worst = std::max(worst, std::abs(rec.schedule.slopes()[k] - truth.slopes()[k]));
            scale = std::max(scale, std::abs(truth.slopes()[k]));
        }
        CHECK(worst <= 1e-3 * scale);
    }
}

TEST_CASE("reconstruction rejects malformed tubes") {
    forward::SpaceTimeTube tube;
    tube.order = 7;
    tube.dt = 0.05;
    tube.records.push_back({0.0, geometry::FourierBoundary::circle(1.0, 7)});
    CHECK_THROWS_AS((void)reconstruct_schedule({tube, 0.0, 0, ""}, same_discretization(0.0)), Error);
    tube.records.push_back({0.07, geometry::FourierBoundary::circle(1.0, 7)});
    CHECK_THROWS_AS((void)reconstruct_schedule({tube, 0.0, 0, ""}, same_discretization(0.0)), Error);
}

TEST_CASE("noise: zero level, determinism and the initial record") {
    const auto tube = forward_tube(forward::cosine_melting, 0.5, 2);
    const auto clean = add_noise(tube, 0.0, 7);
    for (std::size_t k = 0; k < tube.records.size(); ++k) CHECK(clean.tube.records[k].boundary == tube.records[k].boundary);

    const auto a = add_noise(tube, 0.01, 7);
    const auto b = add_noise(tube, 0.01, 7);
    const auto c = add_noise(tube, 0.01, 8);
    CHECK(a.tube.records[0].boundary == tube.records[0].boundary);
    bool differs = false;
    for (std::size_t k = 1; k < tube.records.size(); ++k) {
        CHECK(a.tube.records[k].boundary == b.tube.records[k].boundary);
        differs = differs || !(a.tube.records[k].boundary == c.tube.records[k].boundary);
        CHECK_FALSE(a.tube.records[k].boundary == tube.records[k].boundary);
    }
    CHECK(differs);
    CHECK(a.delta == 0.01);
    CHECK(a.seed == 7);
}

TEST_CASE("noise has the requested standard deviation") {
    forward::SpaceTimeTube tube;
    tube.order = 1;
    tube.dt = 1.0;
    for (int k = 0; k <= 10000; ++k) tube.records.push_back({static_cast<double>(k), geometry::FourierBoundary(1, {0.0, 1.0, 0.0})});
    const auto noisy = add_noise(tube, 0.01, 12345);
    double sum = 0.0, sq = 0.0;
    for (std::size_t k = 1; k < noisy.tube.records.size(); ++k) {
        const double x = noisy.tube.records[k].boundary[1];
        sum += x;
        sq += x * x;
    }
    const double n = 10000.0;
    const double sd = std::sqrt((sq - sum * sum / n) / (n - 1));
    CHECK(sd >= 0.0097);
    CHECK(sd <= 0.0103);
}

TEST_CASE("noise that cannot keep the boundary positive is an error") {
    forward::SpaceTimeTube tube;
    tube.order = 3;
    tube.dt = 1.0;
    for (int k = 0; k <= 3; ++k) tube.records.push_back({static_cast<double>(k), geometry::FourierBoundary::circle(1.0, 3)});
    try {
        (void)add_noise(tube, 5.0, 1);
        FAIL("expected NonPositiveRadius");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NonPositiveRadius);
    }
    CHECK_THROWS_AS((void)add_noise(tube, -0.1, 1), Error);
}
