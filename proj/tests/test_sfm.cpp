#include <cmath>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"
#include "unwrap/errors.hpp"
#include "unwrap/sfm.hpp"
#include "unwrap/synth.hpp"

using namespace unwrap;
using geom::Pose3D;
using geom::UnitQuaternion;
using geom::Vec3;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Axis-angle to OpenSfM's world-to-camera rotation vector plus translation,
// from a camera-to-world pose. Independent of the library's own conversion.
nlohmann::json shot_from_pose(const Pose3D& pose) {
    const auto q_wc = pose.rotation.conjugate();
    // rotation vector from quaternion
    const double angle = 2.0 * std::atan2(
        std::sqrt(q_wc.x * q_wc.x + q_wc.y * q_wc.y + q_wc.z * q_wc.z), q_wc.w);
    Vec3 rv{0, 0, 0};
    if (angle > 1e-14) {
        // v = axis * sin(angle / 2); rescale to axis * angle
        rv = Vec3{q_wc.x, q_wc.y, q_wc.z} * (angle / std::sin(angle / 2.0));
    }
    // t = -R_wc * position
    const Vec3 t = q_wc.rotate(pose.position) * -1.0;
    nlohmann::json shot;
    shot["rotation"] = {rv.x, rv.y, rv.z};
    shot["translation"] = {t.x, t.y, t.z};
    shot["camera"] = "cam1";
    return shot;
}

}  // namespace

TEST_CASE("reconstruction parsing recovers poses, camera and points") {
    testutil::TempDir dir("sfm_parse");

    const Pose3D p0{UnitQuaternion::from_axis_angle({0, 0, 1}, 0.4) *
                        UnitQuaternion::from_axis_angle({1, 0, 0}, kPi),
                    {3.0, -2.0, 75.0}};
    const Pose3D p1{UnitQuaternion::from_axis_angle({0, 0, 1}, 0.6) *
                        UnitQuaternion::from_axis_angle({1, 0, 0}, kPi),
                    {4.0, -1.0, 76.0}};

    nlohmann::json rec;
    rec["cameras"]["cam1"] = {{"projection_type", "perspective"},
                              {"focal", 0.85},
                              {"k1", -0.05},
                              {"k2", 0.01},
                              {"width", 3840},
                              {"height", 2160}};
    rec["shots"]["frame_000010.jpg"] = shot_from_pose(p0);
    rec["shots"]["frame_000030.jpg"] = shot_from_pose(p1);
    rec["points"]["0"] = {{"coordinates", {1.0, 2.0, 0.1}}};
    rec["points"]["1"] = {{"coordinates", {-3.0, 4.0, -0.1}}};
    testutil::spit(dir / "reconstruction.json", nlohmann::json::array({rec}).dump());

    const auto r = sfm::parse_reconstruction(dir / "reconstruction.json");
    REQUIRE(r.poses.size() == 2);
    REQUIRE(r.poses.count(10) == 1);
    REQUIRE(r.poses.count(30) == 1);

    CHECK(geom::rotation_angle_between(r.poses.at(10).rotation, p0.rotation) < 1e-10);
    CHECK(geom::norm(r.poses.at(10).position - p0.position) < 1e-9);
    CHECK(geom::rotation_angle_between(r.poses.at(30).rotation, p1.rotation) < 1e-10);

    // perspective focal scales by the larger image dimension, principal point centered
    CHECK(r.camera.fx == doctest::Approx(0.85 * 3840));
    CHECK(r.camera.fy == doctest::Approx(0.85 * 3840));
    CHECK(r.camera.cx == doctest::Approx(1920.0));
    CHECK(r.camera.cy == doctest::Approx(1080.0));
    CHECK(r.camera.k1 == doctest::Approx(-0.05));

    REQUIRE(r.points.size() == 2);
}

TEST_CASE("reconstruction parsing rejects unsupported inputs") {
    testutil::TempDir dir("sfm_reject");

    nlohmann::json rec;
    rec["cameras"]["cam1"] = {{"projection_type", "perspective"}, {"focal", 0.85},
                              {"k1", 0.0},   {"k2", 0.0},
                              {"width", 100}, {"height", 100}};
    rec["shots"]["f1.jpg"] = shot_from_pose({UnitQuaternion{}, {0, 0, 10}});
    rec["shots"]["f2.jpg"] = shot_from_pose({UnitQuaternion{}, {0, 0, 11}});

    SUBCASE("single shot") {
        auto bad = rec;
        bad["shots"].erase("f2.jpg");
        testutil::spit(dir / "r.json", bad.dump());
        CHECK_THROWS_AS(sfm::parse_reconstruction(dir / "r.json"), SchemaError);
    }
    SUBCASE("two cameras") {
        auto bad = rec;
        bad["cameras"]["cam2"] = bad["cameras"]["cam1"];
        testutil::spit(dir / "r.json", bad.dump());
        CHECK_THROWS_AS(sfm::parse_reconstruction(dir / "r.json"), SchemaError);
    }
    SUBCASE("unsupported distortion terms") {
        auto bad = rec;
        bad["cameras"]["cam1"] = {{"projection_type", "brown"}, {"focal_x", 0.9},
                                  {"focal_y", 0.9},             {"c_x", 0.0},
                                  {"c_y", 0.0},                 {"k3", 0.2},
                                  {"width", 100},               {"height", 100}};
        testutil::spit(dir / "r.json", bad.dump());
        CHECK_THROWS_AS(sfm::parse_reconstruction(dir / "r.json"), NotRepresentableError);
    }
    SUBCASE("shot name without digits") {
        auto bad = rec;
        bad["shots"]["nodigits.jpg"] = bad["shots"]["f1.jpg"];
        testutil::spit(dir / "r.json", bad.dump());
        CHECK_THROWS_AS(sfm::parse_reconstruction(dir / "r.json"), NamingError);
    }
    SUBCASE("duplicate frame numbers") {
        auto bad = rec;
        bad["shots"]["other_1.jpg"] = bad["shots"]["f1.jpg"];
        testutil::spit(dir / "r.json", bad.dump());
        CHECK_THROWS_AS(sfm::parse_reconstruction(dir / "r.json"), IntegrityError);
    }
    SUBCASE("empty array") {
        testutil::spit(dir / "r.json", "[]");
        CHECK_THROWS_AS(sfm::parse_reconstruction(dir / "r.json"), SchemaError);
    }
}

TEST_CASE("brown camera conversion") {
    testutil::TempDir dir("sfm_brown");
    nlohmann::json rec;
    rec["cameras"]["cam1"] = {{"projection_type", "brown"},
                              {"focal_x", 0.9},
                              {"focal_y", 0.88},
                              {"c_x", 0.01},
                              {"c_y", -0.02},
                              {"k1", -0.1},
                              {"k2", 0.02},
                              {"k3", 0.0},
                              {"p1", 0.0},
                              {"p2", 0.0},
                              {"width", 4000},
                              {"height", 3000}};
    rec["shots"]["a1.jpg"] = shot_from_pose({UnitQuaternion{}, {0, 0, 10}});
    rec["shots"]["a2.jpg"] = shot_from_pose({UnitQuaternion{}, {0, 0, 11}});
    testutil::spit(dir / "r.json", rec.dump());
    const auto r = sfm::parse_reconstruction(dir / "r.json");
    CHECK(r.camera.fx == doctest::Approx(0.9 * 4000));
    CHECK(r.camera.fy == doctest::Approx(0.88 * 4000));
    CHECK(r.camera.cx == doctest::Approx(2000.0 + 0.01 * 4000));
    CHECK(r.camera.cy == doctest::Approx(1500.0 - 0.02 * 4000));
}

TEST_CASE("ground model: exact chart for a flat cloud, stable basis otherwise") {
    std::vector<Vec3> flat = {{0, 0, 0}, {10, 0, 0}, {0, 10, 0}, {10, 10, 0}, {5, 5, 0}};
    const auto g = sfm::build_ground_model(flat);
    CHECK(g.basis.u_axis == Vec3{1, 0, 0});
    CHECK(g.basis.v_axis == Vec3{0, 1, 0});
    CHECK(geom::norm(g.basis.origin - Vec3{5, 5, 0}) < 1e-12);

    // tilted plane: basis stays orthonormal and right-handed with the normal
    std::vector<Vec3> tilted;
    for (int i = 0; i < 30; ++i) {
        const double x = (i % 6) * 2.0, y = (i / 6) * 3.0;
        tilted.push_back({x, y, 0.2 * x - 0.1 * y + 1.0});
    }
    const auto t = sfm::build_ground_model(tilted);
    CHECK(std::abs(geom::norm(t.basis.u_axis) - 1.0) < 1e-12);
    CHECK(std::abs(geom::dot(t.basis.u_axis, t.basis.v_axis)) < 1e-12);
    CHECK(std::abs(geom::dot(t.basis.u_axis, t.plane.normal)) < 1e-12);
    const auto n = geom::cross(t.basis.u_axis, t.basis.v_axis);
    CHECK(geom::norm(n - t.plane.normal) < 1e-12);
    // chart origin lies on the plane
    CHECK(std::abs(geom::dot(t.plane.normal, t.basis.origin) - t.plane.offset) < 1e-12);
}

TEST_CASE("slerp densification is exact for constant angular velocity") {
    synth::SceneConfig config;
    config.seed = 2;
    config.n_frames = 81;
    config.herd.n_individuals = 2;
    config.drone.mode = "cv";
    config.drone.velocity = {0.03, 0.01};
    config.drone.yaw_rate_deg = 0.25;
    const auto scene = synth::generate_scene(config);

    const auto keys = synth::keyframe_subsample(scene.poses, 20);
    REQUIRE(keys.size() == 5);  // 0, 20, 40, 60, 80
    const auto dense = sfm::densify_poses(keys, sfm::RotationMode::Slerp);

    for (const auto& [f, truth] : scene.poses) {
        REQUIRE(dense.contains(f));
        CHECK(geom::rotation_angle_between(dense.at(f).rotation, truth.rotation) < 1e-12);
        CHECK(geom::norm(dense.at(f).position - truth.position) < 1e-12);
    }
}

TEST_CASE("in-plane densification reconstructs nadir yaw exactly") {
    synth::SceneConfig config;
    config.seed = 3;
    config.n_frames = 61;
    config.herd.n_individuals = 2;
    config.drone.yaw_rate_deg = 0.5;
    config.drone.yaw_wobble_deg = 1.5;  // breaks constant angular velocity
    config.drone.yaw_wobble_period = 17.0;
    const auto scene = synth::generate_scene(config);

    const auto keys = synth::keyframe_subsample(scene.poses, 20);
    const auto deltas = synth::exact_inplane_deltas(scene, keys);
    const auto dense = sfm::densify_poses(keys, sfm::RotationMode::InPlane, &deltas);

    for (const auto& [f, truth] : scene.poses) {
        REQUIRE(dense.contains(f));
        CHECK(geom::rotation_angle_between(dense.at(f).rotation, truth.rotation) < 1e-10);
    }

    // slerp cannot track the wobble between keyframes
    const auto slerped = sfm::densify_poses(keys, sfm::RotationMode::Slerp);
    double worst = 0.0;
    for (const auto& [f, truth] : scene.poses) {
        worst = std::max(worst,
                         geom::rotation_angle_between(slerped.at(f).rotation, truth.rotation));
    }
    CHECK(worst > 1e-4);
}

TEST_CASE("in-plane mode needs deltas; frames without one get no pose") {
    sfm::KeyframePoseSet keys;
    keys[0] = {UnitQuaternion{}, {0, 0, 10}};
    keys[10] = {UnitQuaternion{}, {1, 0, 10}};
    CHECK_THROWS_AS(sfm::densify_poses(keys, sfm::RotationMode::InPlane, nullptr), ConfigError);

    std::map<int, double> deltas = {{3, 0.01}};  // only frame 3
    const auto dense = sfm::densify_poses(keys, sfm::RotationMode::InPlane, &deltas);
    CHECK(dense.contains(0));    // keyframes always present
    CHECK(dense.contains(10));
    CHECK(dense.contains(3));
    CHECK_FALSE(dense.contains(5));
    CHECK_THROWS_AS(dense.at(5), GapError);

    sfm::KeyframePoseSet empty;
    CHECK_THROWS_AS(sfm::densify_poses(empty, sfm::RotationMode::Slerp), ConfigError);
}

TEST_CASE("pose CSV and auxiliary file round trips") {
    testutil::TempDir dir("sfm_io");
    sfm::KeyframePoseSet keys;
    keys[0] = {UnitQuaternion::from_axis_angle({0, 0, 1}, 0.3) *
                   UnitQuaternion::from_axis_angle({1, 0, 0}, kPi),
               {1.0, 2.0, 70.0}};
    keys[20] = {UnitQuaternion::from_axis_angle({0, 0, 1}, 0.5) *
                    UnitQuaternion::from_axis_angle({1, 0, 0}, kPi),
                {2.0, 3.0, 71.0}};
    sfm::write_pose_csv(keys, dir / "poses.csv");
    const auto back = sfm::load_pose_csv(dir / "poses.csv");
    REQUIRE(back.size() == 2);
    CHECK(geom::rotation_angle_between(back.at(20).rotation, keys.at(20).rotation) < 1e-9);
    CHECK(geom::norm(back.at(20).position - keys.at(20).position) < 1e-9);

    geom::CameraIntrinsics cam;
    cam.fx = 3000.0;
    cam.fy = 3001.0;
    cam.cx = 1920.0;
    cam.cy = 1080.0;
    cam.k1 = -0.04;
    cam.k2 = 0.002;
    cam.width = 3840.0;
    cam.height = 2160.0;
    sfm::write_intrinsics(cam, dir / "intr.txt");
    const auto cam2 = sfm::load_intrinsics(dir / "intr.txt");
    CHECK(cam2.fx == doctest::Approx(cam.fx));
    CHECK(cam2.k2 == doctest::Approx(cam.k2));
    CHECK(cam2.height == doctest::Approx(cam.height));

    const std::vector<Vec3> pts = {{1, 2, 3}, {4, 5, 6.5}};
    sfm::write_point_cloud_csv(pts, dir / "pts.csv");
    const auto pts2 = sfm::load_point_cloud_csv(dir / "pts.csv");
    REQUIRE(pts2.size() == 2);
    CHECK(geom::norm(pts2[1] - pts[1]) < 1e-9);

    const std::map<int, double> deltas = {{1, 0.01}, {2, -0.02}};
    sfm::write_deltas_csv(deltas, dir / "d.csv");
    const auto d2 = sfm::load_deltas_csv(dir / "d.csv");
    CHECK(d2 == std::map<int, double>{{1, 0.01}, {2, -0.02}});

    // unit-norm enforcement on pose quaternions
    testutil::spit(dir / "badq.csv", "frame,qw,qx,qy,qz,x,y,z\n0,2,0,0,0,0,0,10\n");
    CHECK_THROWS_AS(sfm::load_pose_csv(dir / "badq.csv"), NormalizationError);
}

TEST_CASE("pose-based unwrap recovers the ground truth on a clean scene") {
    synth::SceneConfig config;
    config.seed = 4;
    config.n_frames = 50;
    config.herd.n_individuals = 5;
    config.n_landmarks = 12;
    config.drone.yaw_rate_deg = 0.2;
    const auto scene = synth::generate_scene(config);

    const auto ground = sfm::build_ground_model(scene.ground_points);
    sfm::DensePoses dense = sfm::densify_poses(scene.poses, sfm::RotationMode::Slerp);
    reg::UnwrapReport rep;
    const auto world =
        sfm::unwrap_tracks(scene.image_animals, dense, scene.camera, ground, Exec::Serial, &rep);
    CHECK(rep.dropped_no_pose == 0);
    CHECK(rep.dropped_degenerate == 0);

    // chart differs from the world by the cloud centroid only
    geom::Vec2 offset{};
    {
        const auto& e = world.entries.front();
        const auto* t = scene.truth_world.find(e.frame, e.individual, e.keypoint);
        REQUIRE(t != nullptr);
        offset = t->pos - e.pos;
    }
    double worst = 0.0;
    for (const auto& e : world.entries) {
        const auto* t = scene.truth_world.find(e.frame, e.individual, e.keypoint);
        REQUIRE(t != nullptr);
        worst = std::max(worst, geom::norm(e.pos + offset - t->pos));
        REQUIRE(e.world3d.has_value());
        CHECK(std::abs(e.world3d->z) < 1e-9);
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("entries at frames without a pose are dropped and counted") {
    tracks::ImageTrackSet img;
    for (int f = 0; f < 30; ++f) {
        img.entries.push_back({f, "a", tracks::Keypoint::Point, {1920.0, 1080.0}, std::nullopt,
                               std::nullopt});
    }
    img.finalize();

    sfm::KeyframePoseSet keys;
    const auto down = UnitQuaternion::from_axis_angle({1, 0, 0}, kPi);
    keys[10] = {down, {0, 0, 50}};
    keys[20] = {down, {1, 0, 50}};

    geom::CameraIntrinsics cam;
    cam.fx = cam.fy = 1000.0;
    cam.cx = 1920.0;
    cam.cy = 1080.0;
    cam.width = 3840.0;
    cam.height = 2160.0;

    const auto ground = sfm::build_ground_model({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}});
    const auto dense = sfm::densify_poses(keys, sfm::RotationMode::Slerp);
    reg::UnwrapReport rep;
    const auto world = sfm::unwrap_tracks(img, dense, cam, ground, Exec::Serial, &rep);
    CHECK(world.entries.size() == 11);  // frames 10..20
    CHECK(rep.dropped_no_pose == 19);
    CHECK(rep.missing_frames.size() == 19);
}
