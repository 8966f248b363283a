#include <cmath>
#include <numbers>

#include "doctest.h"
#include "support.hpp"
#include "unwrap/errors.hpp"
#include "unwrap/registration.hpp"
#include "unwrap/synth.hpp"

using namespace unwrap;
using geom::Rigid2D;
using geom::Vec2;
using tracks::Keypoint;

TEST_CASE("chain CSV round trip, gaps and duplicates") {
    testutil::TempDir dir("chain_io");
    reg::TransformChain chain;
    chain.transforms[1] = {0.01, {0.5, -0.25}};
    chain.transforms[2] = {-0.02, {1.0 / 3.0, 0.0}};
    chain.transforms[5] = {0.03, {0.0, 1.0}};  // frames 3, 4 missing

    const auto path = dir / "chain.csv";
    reg::write_chain(chain, path);
    const auto back = reg::load_chain(path);
    REQUIRE(back.transforms.size() == 3);
    CHECK(back.transforms.at(2).theta == doctest::Approx(-0.02));
    CHECK(back.transforms.at(2).t.x == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    CHECK(back.gaps == std::vector<int>{3, 4});

    testutil::spit(dir / "dup.csv", "frame,theta_rad,tx,ty\n1,0,0,0\n1,0.1,0,0\n");
    CHECK_THROWS_AS(reg::load_chain(dir / "dup.csv"), IntegrityError);

    testutil::spit(dir / "zero.csv", "frame,theta_rad,tx,ty\n0,0.1,0,0\n");
    CHECK_THROWS_AS(reg::load_chain(dir / "zero.csv"), ParseError);
}

TEST_CASE("cumulative transforms compose incrementally and stop at gaps") {
    reg::TransformChain chain;
    chain.transforms[1] = {0.1, {1.0, 0.0}};
    chain.transforms[2] = {0.2, {0.0, 1.0}};
    chain.transforms[4] = {0.3, {1.0, 1.0}};  // gap at 3

    const auto cum = chain.cumulative_to_frame0(4);
    REQUIRE(cum.size() == 5);
    REQUIRE(cum[0].has_value());
    CHECK(cum[0]->theta == 0.0);

    const Vec2 p{2.0, -1.0};
    const Vec2 direct = chain.transforms[1].apply(chain.transforms[2].apply(p));
    CHECK(geom::norm(cum[2]->apply(p) - direct) < 1e-12);

    CHECK_FALSE(cum[3].has_value());
    CHECK_FALSE(cum[4].has_value());  // unreachable past the gap
}

TEST_CASE("chain estimation from landmarks recovers the analytic chain") {
    synth::SceneConfig config;
    config.seed = 5;
    config.n_frames = 60;
    config.n_landmarks = 25;
    config.herd.n_individuals = 2;
    config.drone.mode = "cv";
    config.drone.velocity = {0.05, -0.02};
    config.drone.yaw_rate_deg = 0.3;
    const auto scene = synth::generate_scene(config);

    const auto truth = synth::exact_chain(scene);
    const auto fitted = reg::estimate_chain_from_landmarks(scene.image_landmarks);

    REQUIRE(fitted.transforms.size() == truth.transforms.size());
    for (const auto& [f, t] : truth.transforms) {
        REQUIRE(fitted.transforms.count(f) == 1);
        const auto& g = fitted.transforms.at(f);
        CHECK(std::abs(geom::wrap_angle(g.theta - t.theta)) < 1e-9);
        CHECK(geom::norm(g.t - t.t) < 1e-6);
    }
}

TEST_CASE("chain estimation records sparse pairs as gaps") {
    tracks::ImageTrackSet lm;
    // 3 landmarks on frames 0..2, only 2 visible on frame 3 (min_pairs = 3)
    for (int f = 0; f < 3; ++f) {
        for (int i = 0; i < 3; ++i) {
            lm.entries.push_back({f, "p" + std::to_string(i), Keypoint::Point,
                                  {i * 10.0 + f, i * 5.0 - f}, std::nullopt, std::nullopt});
        }
    }
    for (int i = 0; i < 2; ++i) {
        lm.entries.push_back(
            {3, "p" + std::to_string(i), Keypoint::Point, {i * 10.0 + 3.0, i * 5.0 - 3.0},
             std::nullopt, std::nullopt});
    }
    lm.finalize();
    const auto chain = reg::estimate_chain_from_landmarks(lm, 3);
    CHECK(chain.transforms.count(1) == 1);
    CHECK(chain.transforms.count(2) == 1);
    CHECK(chain.transforms.count(3) == 0);
    CHECK(chain.gaps == std::vector<int>{3});

    tracks::ImageTrackSet empty;
    empty.finalize();
    CHECK_THROWS_AS(reg::estimate_chain_from_landmarks(empty), EmptyChainError);
}

TEST_CASE("unwrap applies the chain in pixel space and flips axes afterwards") {
    // one entry per frame moving with a known chain
    tracks::ImageTrackSet img;
    img.entries = {
        {0, "a", Keypoint::Point, {100.0, 50.0}, std::nullopt, std::nullopt},
        {1, "a", Keypoint::Point, {110.0, 55.0}, std::nullopt, std::nullopt},
    };
    img.finalize();

    reg::TransformChain chain;
    chain.transforms[1] = {0.25, {-3.0, 7.0}};

    const auto q = reg::AxisConvention::yflip();
    reg::UnwrapReport rep;
    const auto world = reg::unwrap_tracks(img, chain, q, Exec::Serial, &rep);

    REQUIRE(world.entries.size() == 2);
    // frame 0 goes through the identity chain, so only the axis flip acts
    CHECK(geom::norm(world.entries[0].pos - q.apply(img.entries[0].pos)) < 1e-12);
    // frame 1: q (T p), the chain itself stays in pixel coordinates
    const Vec2 expect = q.apply(chain.transforms[1].apply({110.0, 55.0}));
    CHECK(geom::norm(world.entries[1].pos - expect) < 1e-12);
    CHECK(rep.total_entries == 2);
    CHECK(rep.dropped_no_transform == 0);
}

TEST_CASE("a quarter-turn chain entry lands (1,0) on (0,-1) under the y flip") {
    tracks::ImageTrackSet img;
    img.entries = {{1, "a", Keypoint::Point, {1.0, 0.0}, std::nullopt, std::nullopt}};
    img.finalize();
    reg::TransformChain chain;
    chain.transforms[1] = {std::numbers::pi / 2.0, {0.0, 0.0}};
    const auto world = reg::unwrap_tracks(img, chain, reg::AxisConvention::yflip(), Exec::Serial);
    REQUIRE(world.entries.size() == 1);
    CHECK(geom::norm(world.entries[0].pos - Vec2{0.0, -1.0}) < 1e-12);
}

TEST_CASE("static points stay put under a rotating chain for any axis convention") {
    // camera yaws 0.1 rad/frame about the pixel center; chain entries map each
    // frame's pixels onto the previous frame's
    const Vec2 center{960.0, 540.0};
    const double theta = 0.1;
    const geom::Rigid2D step{theta, center - geom::Rigid2D{theta, {0, 0}}.apply(center)};

    reg::TransformChain chain;
    tracks::ImageTrackSet img;
    const std::vector<Vec2> fixed = {{100.0, 50.0}, {1500.0, 900.0}, {700.0, 1000.0}};
    for (int f = 0; f < 30; ++f) {
        if (f >= 1) chain.transforms[f] = step;
        for (size_t k = 0; k < fixed.size(); ++k) {
            // pixel position of the fixed point: undo f steps of camera yaw
            Vec2 p = fixed[k];
            for (int j = 0; j < f; ++j) p = step.inverse().apply(p);
            img.entries.push_back({f, "p" + std::to_string(k), Keypoint::Point, p, std::nullopt,
                                   std::nullopt});
        }
    }
    img.finalize();

    for (const auto q : {reg::AxisConvention::identity(), reg::AxisConvention::yflip()}) {
        const auto world = reg::unwrap_tracks(img, chain, q, Exec::Serial);
        double worst = 0.0;
        for (const auto& e : world.entries) {
            const auto* ref = world.find(0, e.individual, e.keypoint);
            REQUIRE(ref != nullptr);
            worst = std::max(worst, geom::norm(e.pos - ref->pos));
        }
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("frames beyond a chain gap are dropped and reported") {
    tracks::ImageTrackSet img;
    for (int f = 0; f < 5; ++f) {
        img.entries.push_back({f, "a", Keypoint::Point, {1.0 * f, 0.0}, std::nullopt, std::nullopt});
    }
    img.finalize();

    reg::TransformChain chain;
    chain.transforms[1] = {0.0, {1.0, 0.0}};
    chain.transforms[2] = {0.0, {1.0, 0.0}};
    // frames 3, 4 missing entirely

    reg::UnwrapReport rep;
    const auto world =
        reg::unwrap_tracks(img, chain, reg::AxisConvention::identity(), Exec::Serial, &rep);
    CHECK(world.entries.size() == 3);
    CHECK(rep.dropped_no_transform == 2);
    CHECK(rep.missing_frames == std::vector<int>{3, 4});
}

TEST_CASE("axis convention must be orthogonal") {
    reg::AxisConvention bad{1.0, 0.0, 0.0, 2.0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_NOTHROW(reg::AxisConvention::yflip().validate());
    CHECK_NOTHROW(reg::AxisConvention::identity().validate());
}

TEST_CASE("serial and parallel unwrap agree bit for bit") {
    synth::SceneConfig config;
    config.seed = 9;
    config.n_frames = 120;
    config.herd.n_individuals = 6;
    config.drone.yaw_rate_deg = 0.4;
    const auto scene = synth::generate_scene(config);
    const auto chain = synth::exact_chain(scene);
    const auto q = reg::AxisConvention::yflip();

    const auto a = reg::unwrap_tracks(scene.image_animals, chain, q, Exec::Serial);
    const auto b = reg::unwrap_tracks(scene.image_animals, chain, q, Exec::Parallel);
    REQUIRE(a.entries.size() == b.entries.size());
    for (size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(a.entries[i].pos.x == b.entries[i].pos.x);
        CHECK(a.entries[i].pos.y == b.entries[i].pos.y);
    }
}
