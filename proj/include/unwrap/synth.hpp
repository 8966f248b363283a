#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "unwrap/geometry.hpp"
#include "unwrap/registration.hpp"
#include "unwrap/sfm.hpp"
#include "unwrap/tracks.hpp"

// Synthetic ground truth: a herd walking on the z = 0 plane, a scripted camera
// flight above it, and exact pinhole projections of every keypoint and landmark.
// Every downstream unwrapping path can be validated against the world tracks
// this module produces, and analytic per-frame transforms are available for
// camera motions that stay nadir.

namespace unwrap::synth {

// Deterministic draws seeded once; Box-Muller without spare caching so the
// draw sequence is identical across platforms.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double uniform() {  // [0, 1)
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    double gauss() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

  private:
    std::mt19937_64 eng_;
};

struct DroneConfig {
    std::string mode = "hover";  // hover | cv | orbit
    double height = 80.0;        // camera height above the plane, world units
    geom::Vec2 start;            // hover position / cv start
    geom::Vec2 velocity;         // cv: world units per frame
    std::vector<geom::Vec2> waypoints;  // cv alternative: piecewise-linear path
    double yaw0_deg = 0.0;
    double yaw_rate_deg = 0.0;         // degrees per frame
    double yaw_wobble_deg = 0.0;       // sinusoidal yaw modulation amplitude
    double yaw_wobble_period = 120.0;  // frames
    double orbit_radius = 30.0;
    double orbit_rate_deg = 0.25;  // degrees per frame
    geom::Vec2 orbit_center;
};

struct HerdConfig {
    int n_individuals = 12;
    double body_length = 2.0;   // world units
    double speed_bl_s = 0.4;    // base speed in body lengths per second
    double heading_noise = 0.06;  // radians per frame
    double wave_amplitude = 0.0;  // relative speed modulation
    double wave_period = 150.0;   // frames
    double area_radius = 18.0;    // individuals steer back inside this radius
};

struct NoiseConfig {
    double pixel_sigma = 0.0;        // detection noise, px
    double chain_theta_sigma = 0.0;  // per-frame chain rotation noise, rad
    double chain_t_sigma = 0.0;      // per-frame chain translation noise, px
    double delta_sigma = 0.0;        // in-plane delta noise, rad
    double pose_rot_sigma = 0.0;     // keyframe orientation jitter, rad
    double pose_pos_sigma = 0.0;     // keyframe position jitter, world units
};

struct SceneConfig {
    std::uint64_t seed = 1;
    int n_frames = 300;
    double fps = 29.97;
    double width = 3840.0;
    double height = 2160.0;
    double focal = 3000.0;  // fx = fy, px
    double k1 = 0.0;
    double k2 = 0.0;
    int n_landmarks = 45;
    double landmark_radius = 22.0;  // landmark spawn radius around the origin
    int n_ground_points = 400;      // reconstruction point cloud size
    int keyframe_stride = 20;
    DroneConfig drone;
    HerdConfig herd;
    NoiseConfig noise;
};

// Strict JSON: unknown keys are rejected so config typos cannot silently fall
// back to defaults.
SceneConfig parse_scene_config(const std::string& json_text, const std::string& context);
SceneConfig load_scene_config(const std::filesystem::path& path);

struct Scene {
    SceneConfig config;
    geom::CameraIntrinsics camera;
    sfm::KeyframePoseSet poses;  // truth at every frame
    tracks::WorldTrackSet truth_world;      // head/tail per individual + landmarks
    tracks::ImageTrackSet image_animals;    // projections, confidence 1
    tracks::ImageTrackSet image_landmarks;  // landmark keypoint "point"
    std::vector<geom::Vec3> ground_points;

    // analytic-oracle inputs
    std::vector<double> yaw;      // radians per frame, unwrapped
    double camera_height = 0.0;   // constant above the plane
    bool nadir = true;            // false for pitched (orbit) flight
};

// Deterministic for a given config (the seed lives inside it). Projections
// falling outside the image are absent from the image tracks; world truth
// always covers every frame.
Scene generate_scene(const SceneConfig& config);

// Frames {0, stride, 2*stride, ...} plus the last frame.
sfm::KeyframePoseSet keyframe_subsample(const sfm::KeyframePoseSet& dense, int stride);

// Closed-form per-frame image transform for a nadir, constant-height,
// distortion-free flight; anything else is not representable as a 2D rigid
// image motion and throws.
reg::TransformChain exact_chain(const Scene& scene);

// Rotation about the optical axis between each frame and its nearest preceding
// keyframe, extracted from the true poses. Keyframe frames carry no entry.
std::map<int, double> exact_inplane_deltas(const Scene& scene,
                                           const sfm::KeyframePoseSet& keyframes);

void perturb_chain(reg::TransformChain& chain, double theta_sigma, double t_sigma, Rng& rng);
void perturb_deltas(std::map<int, double>& deltas, double sigma, Rng& rng);
void perturb_poses(sfm::KeyframePoseSet& poses, double rot_sigma, double pos_sigma, Rng& rng);

// Writes truth_world.csv, image_animals.csv, image_landmarks.csv, poses.csv,
// keyframes.csv, intrinsics.txt, points.csv, deltas.csv, and chain.csv (when
// the flight is representable). Noisy variants (chain_noisy.csv,
// deltas_noisy.csv, keyframes_noisy.csv) appear when the matching sigma is
// nonzero; the extra draws come from a dedicated rng stream (seed + 1).
void write_scene(const Scene& scene, const std::filesystem::path& dir);

}  // namespace unwrap::synth
