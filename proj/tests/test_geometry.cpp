#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "unwrap/errors.hpp"
#include "unwrap/geometry.hpp"

using namespace unwrap;
using geom::Rigid2D;
using geom::UnitQuaternion;
using geom::Vec2;
using geom::Vec3;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("wrap_angle maps into (-pi, pi]") {
    CHECK(geom::wrap_angle(0.0) == doctest::Approx(0.0));
    CHECK(geom::wrap_angle(kPi) == doctest::Approx(kPi));
    CHECK(geom::wrap_angle(-kPi) == doctest::Approx(kPi));
    CHECK(geom::wrap_angle(3 * kPi) == doctest::Approx(kPi));
    CHECK(geom::wrap_angle(2 * kPi + 0.25) == doctest::Approx(0.25));
    CHECK(geom::wrap_angle(-7.5 * kPi) == doctest::Approx(0.5 * kPi));
}

TEST_CASE("rigid transform inverse and composition") {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int i = 0; i < 50; ++i) {
        const Rigid2D a{u(rng), {u(rng), u(rng)}};
        const Rigid2D b{u(rng), {u(rng), u(rng)}};
        const Vec2 p{u(rng), u(rng)};

        const Vec2 roundtrip = a.inverse().apply(a.apply(p));
        CHECK(geom::norm(roundtrip - p) < 1e-12);

        // compose applies b first
        const Vec2 composed = geom::compose(a, b).apply(p);
        const Vec2 sequential = a.apply(b.apply(p));
        CHECK(geom::norm(composed - sequential) < 1e-12);
    }
}

TEST_CASE("chain_to_frame0 folds transforms back to frame zero") {
    // chain[j-1] maps frame j to frame j-1
    const std::vector<Rigid2D> chain = {
        {0.1, {1.0, 0.0}}, {-0.2, {0.0, 2.0}}, {0.3, {-1.0, 1.0}}};
    const Vec2 p{3.0, -2.0};

    CHECK(geom::chain_to_frame0(std::span<const Rigid2D>(chain), 0).apply(p) == p);

    Vec2 manual = p;
    for (int j = 3; j >= 1; --j) manual = chain[j - 1].apply(manual);
    const Vec2 folded = geom::chain_to_frame0(std::span<const Rigid2D>(chain), 3).apply(p);
    CHECK(geom::norm(folded - manual) < 1e-12);

    std::vector<std::optional<Rigid2D>> gappy(chain.begin(), chain.end());
    gappy[1] = std::nullopt;
    const std::span<const std::optional<Rigid2D>> s(gappy);
    CHECK_NOTHROW(geom::chain_to_frame0(s, 1));
    CHECK_THROWS_AS(geom::chain_to_frame0(s, 2), GapError);
    CHECK_THROWS_AS(geom::chain_to_frame0(s, 3), GapError);
}

TEST_CASE("quaternion rotation agrees with its matrix") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        const Vec3 axis = geom::normalized({u(rng), u(rng), u(rng) + 1.5});
        const double angle = 3.0 * u(rng);
        const auto q = UnitQuaternion::from_axis_angle(axis, angle);
        const auto m = q.to_matrix();
        const Vec3 v{u(rng), u(rng), u(rng)};
        const Vec3 rq = q.rotate(v);
        const Vec3 rm{m[0] * v.x + m[1] * v.y + m[2] * v.z,
                      m[3] * v.x + m[4] * v.y + m[5] * v.z,
                      m[6] * v.x + m[7] * v.y + m[8] * v.z};
        CHECK(geom::norm(rq - rm) < 1e-12);

        // rotation preserves length and composes with the conjugate to identity
        CHECK(geom::norm(rq) == doctest::Approx(geom::norm(v)));
        CHECK(geom::norm(q.conjugate().rotate(rq) - v) < 1e-12);
    }
}

TEST_CASE("rotation vector matches axis-angle") {
    const Vec3 axis = geom::normalized(Vec3{1.0, -2.0, 0.5});
    const double angle = 0.73;
    const auto a = UnitQuaternion::from_axis_angle(axis, angle);
    const auto b = UnitQuaternion::from_rotation_vector(axis * angle);
    CHECK(geom::rotation_angle_between(a, b) < 1e-12);
    // zero vector is the identity
    const auto id = UnitQuaternion::from_rotation_vector({0.0, 0.0, 0.0});
    CHECK(id.w == doctest::Approx(1.0));
}

TEST_CASE("slerp endpoints and constant angular velocity") {
    const auto q0 = UnitQuaternion::from_axis_angle({0, 0, 1}, 0.2);
    const auto q1 = UnitQuaternion::from_axis_angle({0, 0, 1}, 1.4);

    const auto s0 = geom::slerp(q0, q1, 0.0);
    CHECK(s0.w == q0.w);  // exact, not approximate
    CHECK(s0.z == q0.z);
    CHECK(geom::rotation_angle_between(geom::slerp(q0, q1, 1.0), q1) < 1e-12);

    // midpoint of a z-rotation pair is the mean angle
    const auto mid = geom::slerp(q0, q1, 0.5);
    CHECK(geom::rotation_angle_between(mid, UnitQuaternion::from_axis_angle({0, 0, 1}, 0.8)) <
          1e-12);

    // shorter-arc selection: antipodal representation interpolates the same rotation
    const auto q1n = -q1;
    const auto mid2 = geom::slerp(q0, q1n, 0.5);
    CHECK(geom::rotation_angle_between(mid, mid2) < 1e-12);

    // general-axis constant speed: angle grows linearly in u
    const Vec3 axis = geom::normalized(Vec3{0.3, -0.7, 0.65});
    const auto a0 = UnitQuaternion::from_axis_angle(axis, -0.4);
    const auto a1 = UnitQuaternion::from_axis_angle(axis, 0.9);
    for (const double u : {0.25, 0.5, 0.75}) {
        const auto s = geom::slerp(a0, a1, u);
        const auto expect = UnitQuaternion::from_axis_angle(axis, -0.4 + 1.3 * u);
        CHECK(geom::rotation_angle_between(s, expect) < 1e-12);
    }

    UnitQuaternion bad{2.0, 0.0, 0.0, 0.0};
    CHECK_THROWS_AS(geom::slerp(bad, q1, 0.5), NormalizationError);
}

TEST_CASE("pose transform round trip") {
    const geom::Pose3D pose{UnitQuaternion::from_axis_angle({0.1, 0.9, 0.2}, 0.8),
                            {10.0, -4.0, 80.0}};
    const Vec3 p{1.0, 2.0, 3.0};
    CHECK(geom::norm(pose.untransform(pose.transform(p)) - p) < 1e-12);
    CHECK(geom::norm(pose.transform({0, 0, 0}) - pose.position) < 1e-15);
}

TEST_CASE("plane fit recovers a synthetic plane") {
    // z = 0.5 x - 0.25 y + 3
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    std::vector<Vec3> pts;
    for (int i = 0; i < 60; ++i) {
        const double x = u(rng), y = u(rng);
        pts.push_back({x, y, 0.5 * x - 0.25 * y + 3.0});
    }
    const auto plane = geom::fit_plane(pts);
    CHECK(plane.normal.z > 0.0);  // orientation pinned up
    for (const auto& p : pts) {
        CHECK(std::abs(geom::dot(plane.normal, p) - plane.offset) < 1e-9);
    }

    // exactly planar z = 0 cloud gives the exact +z normal
    std::vector<Vec3> flat;
    for (int i = 0; i < 20; ++i) flat.push_back({u(rng), u(rng), 0.0});
    const auto fp = geom::fit_plane(flat);
    CHECK(fp.normal.x == 0.0);
    CHECK(fp.normal.y == 0.0);
    CHECK(fp.normal.z == 1.0);
    CHECK(fp.offset == 0.0);

    const std::vector<Vec3> line = {{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}};
    CHECK_THROWS_AS(geom::fit_plane(line), DegenerateGeometryError);
}

TEST_CASE("projection and back-projection are inverse on the ground plane") {
    geom::CameraIntrinsics cam;
    cam.fx = cam.fy = 3000.0;
    cam.cx = 1920.0;
    cam.cy = 1080.0;
    cam.width = 3840.0;
    cam.height = 2160.0;

    // camera looking straight down from 80 units
    const auto down = UnitQuaternion::from_axis_angle({1, 0, 0}, kPi);
    const geom::Pose3D pose{UnitQuaternion::from_axis_angle({0, 0, 1}, 0.3) * down,
                            {5.0, -2.0, 80.0}};
    const geom::Plane ground{{0, 0, 1}, 0.0};

    SUBCASE("no distortion") {
        const Vec3 world{12.0, 7.0, 0.0};
        const auto px = geom::project_point(cam, pose, world);
        REQUIRE(px.has_value());
        const auto ray = geom::pixel_to_ray(cam, pose, *px);
        const Vec3 hit = geom::ray_plane_intersect(ray, ground);
        CHECK(geom::norm(hit - world) < 1e-9);
    }

    SUBCASE("radial distortion round trip") {
        cam.k1 = -0.08;
        cam.k2 = 0.012;
        for (const Vec3 world : {Vec3{12.0, 7.0, 0.0}, Vec3{-20.0, 15.0, 0.0}, Vec3{3.0, -18.0, 0.0}}) {
            const auto px = geom::project_point(cam, pose, world);
            REQUIRE(px.has_value());
            const auto ray = geom::pixel_to_ray(cam, pose, *px);
            const Vec3 hit = geom::ray_plane_intersect(ray, ground);
            CHECK(geom::norm(hit - world) < 1e-8);
        }
    }

    SUBCASE("points behind the camera do not project") {
        CHECK_FALSE(geom::project_point(cam, pose, Vec3{5.0, -2.0, 200.0}).has_value());
    }

    SUBCASE("ray parallel to the plane throws") {
        const geom::Ray ray{{0, 0, 10}, {1, 0, 0}};
        CHECK_THROWS_AS(geom::ray_plane_intersect(ray, ground), ParallelRayError);
    }

    SUBCASE("intersection behind the origin throws") {
        const geom::Ray ray{{0, 0, 10}, {0, 0, 1}};  // pointing up, plane below
        CHECK_THROWS_AS(geom::ray_plane_intersect(ray, ground), BehindCameraError);
    }
}

TEST_CASE("pixel_in_bounds uses the sensor rectangle") {
    geom::CameraIntrinsics cam;
    cam.width = 100.0;
    cam.height = 50.0;
    CHECK(geom::pixel_in_bounds(cam, {0.0, 0.0}));
    CHECK(geom::pixel_in_bounds(cam, {99.9, 49.9}));
    CHECK_FALSE(geom::pixel_in_bounds(cam, {-0.1, 10.0}));
    CHECK_FALSE(geom::pixel_in_bounds(cam, {10.0, 50.1}));
}

TEST_CASE("plane chart coordinates are metric") {
    const geom::PlaneBasis basis{{1.0, 2.0, 0.0}, {1, 0, 0}, {0, 1, 0}};
    const Vec2 uv = geom::project_to_plane_2d({4.0, 7.0, 0.0}, basis);
    CHECK(uv.x == doctest::Approx(3.0));
    CHECK(uv.y == doctest::Approx(5.0));
}

TEST_CASE("rigid 2D fit recovers an exact motion and rejects degenerate input") {
    const Rigid2D truth{0.6, {3.0, -1.5}};
    std::vector<Vec2> src, dst;
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int i = 0; i < 8; ++i) {
        const Vec2 p{u(rng), u(rng)};
        src.push_back(p);
        dst.push_back(truth.apply(p));
    }
    const auto fit = geom::rigid_fit_2d(src, dst);
    CHECK(std::abs(geom::wrap_angle(fit.theta - truth.theta)) < 1e-12);
    CHECK(geom::norm(fit.t - truth.t) < 1e-12);

    // least-squares under noise still lands near the truth
    std::normal_distribution<double> n(0.0, 0.01);
    for (auto& d : dst) d += Vec2{n(rng), n(rng)};
    const auto noisy = geom::rigid_fit_2d(src, dst);
    CHECK(std::abs(geom::wrap_angle(noisy.theta - truth.theta)) < 0.01);

    const std::vector<Vec2> single = {{1, 1}};
    CHECK_THROWS_AS(geom::rigid_fit_2d(single, single), DegenerateGeometryError);
    const std::vector<Vec2> coincident = {{1, 1}, {1, 1}, {1, 1}};
    CHECK_THROWS_AS(geom::rigid_fit_2d(coincident, coincident), DegenerateGeometryError);
}

TEST_CASE("camera intrinsics validation") {
    geom::CameraIntrinsics cam;
    cam.fx = 0.0;
    CHECK_THROWS_AS(cam.validate(), ConfigError);
    cam.fx = 100.0;
    cam.fy = 100.0;
    cam.width = 10.0;
    cam.height = 10.0;
    CHECK_NOTHROW(cam.validate());
}
