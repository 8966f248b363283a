// Times the parallel kernels against their serial reference and checks that
// both produce bit-identical results.
#include <bit>
#include <chrono>
#include <cstdint>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "unwrap/behavior.hpp"
#include "unwrap/parallel.hpp"
#include "unwrap/registration.hpp"
#include "unwrap/sfm.hpp"
#include "unwrap/synth.hpp"
#include "unwrap/tracks.hpp"

using namespace unwrap;

namespace {

bool same_bits(double a, double b) {
    return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

bool same_bits(const std::optional<double>& a, const std::optional<double>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || same_bits(*a, *b);
}

bool same_tracks(const tracks::TrackSet& a, const tracks::TrackSet& b) {
    if (a.entries.size() != b.entries.size()) return false;
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        const auto& x = a.entries[i];
        const auto& y = b.entries[i];
        if (x.frame != y.frame || x.individual != y.individual || x.keypoint != y.keypoint)
            return false;
        if (!same_bits(x.pos.x, y.pos.x) || !same_bits(x.pos.y, y.pos.y)) return false;
        if (x.world3d.has_value() != y.world3d.has_value()) return false;
        if (x.world3d && !(same_bits(x.world3d->x, y.world3d->x) &&
                           same_bits(x.world3d->y, y.world3d->y) &&
                           same_bits(x.world3d->z, y.world3d->z)))
            return false;
    }
    return true;
}

bool same_metrics(const behavior::HerdMetrics& a, const behavior::HerdMetrics& b) {
    if (a.frames.size() != b.frames.size()) return false;
    for (std::size_t i = 0; i < a.frames.size(); ++i) {
        const auto& x = a.frames[i];
        const auto& y = b.frames[i];
        if (!same_bits(x.polarization, y.polarization)) return false;
        if (!same_bits(x.mean_pair_dist, y.mean_pair_dist)) return false;
        if (!same_bits(x.max_pair_dist, y.max_pair_dist)) return false;
        if (!same_bits(x.pearson_r, y.pearson_r)) return false;
    }
    const auto grids = {&behavior::IndividualMetrics::alignment,
                        &behavior::IndividualMetrics::speed,
                        &behavior::IndividualMetrics::dist_centroid,
                        &behavior::IndividualMetrics::nn_dist};
    for (auto g : grids) {
        const auto& ga = a.individual.*g;
        const auto& gb = b.individual.*g;
        if (ga.size() != gb.size()) return false;
        for (std::size_t i = 0; i < ga.size(); ++i)
            if (!same_bits(ga[i], gb[i])) return false;
    }
    for (std::size_t i = 0; i < a.smoothed_mean_speed.size(); ++i)
        if (!same_bits(a.smoothed_mean_speed[i], b.smoothed_mean_speed[i])) return false;
    return true;
}

template <class F>
double best_ms(int repeats, F&& f) {
    double best = 1e300;
    for (int i = 0; i < repeats; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

void print_row(const std::string& name, double serial_ms, double parallel_ms, bool identical) {
    std::cout << std::left << std::setw(16) << name << std::right << std::fixed
              << std::setprecision(2) << std::setw(12) << serial_ms << std::setw(12)
              << parallel_ms << std::setw(10) << std::setprecision(2)
              << (serial_ms / parallel_ms) << "x   " << (identical ? "identical" : "MISMATCH")
              << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Serial vs parallel kernel benchmark"};
    int frames = 3000, individuals = 40, repeats = 3, threads = 0;
    app.add_option("--frames", frames, "scene length");
    app.add_option("--individuals", individuals, "herd size");
    app.add_option("--repeats", repeats, "timing repeats, best taken");
    app.add_option("--threads", threads, "worker threads (0 = all cores)");
    CLI11_PARSE(app, argc, argv);
    set_thread_count(threads);

    synth::SceneConfig config;
    config.seed = 7;
    config.n_frames = frames;
    config.herd.n_individuals = individuals;
    config.n_landmarks = 60;
    config.drone.mode = "hover";
    config.drone.yaw_rate_deg = 0.2;
    const auto scene = synth::generate_scene(config);
    std::cout << "scene: " << frames << " frames, " << individuals << " individuals, "
              << scene.image_animals.entries.size() << " image entries, "
              << hardware_threads() << " threads\n\n";
    std::cout << std::left << std::setw(16) << "kernel" << std::right << std::setw(12)
              << "serial ms" << std::setw(12) << "parallel ms" << std::setw(11) << "speedup"
              << "\n";

    {
        const auto chain = synth::exact_chain(scene);
        const auto q = reg::AxisConvention::yflip();
        const auto ser = reg::unwrap_tracks(scene.image_animals, chain, q, Exec::Serial);
        const auto par = reg::unwrap_tracks(scene.image_animals, chain, q, Exec::Parallel);
        const double ts = best_ms(repeats, [&] {
            (void)reg::unwrap_tracks(scene.image_animals, chain, q, Exec::Serial);
        });
        const double tp = best_ms(repeats, [&] {
            (void)reg::unwrap_tracks(scene.image_animals, chain, q, Exec::Parallel);
        });
        print_row("chain unwrap", ts, tp, same_tracks(ser, par));
    }

    const auto keys = synth::keyframe_subsample(scene.poses, config.keyframe_stride);
    const auto dense = sfm::densify_poses(keys, sfm::RotationMode::Slerp);
    const auto ground = sfm::build_ground_model(scene.ground_points);
    tracks::WorldTrackSet world;
    {
        const auto ser =
            sfm::unwrap_tracks(scene.image_animals, dense, scene.camera, ground, Exec::Serial);
        const auto par =
            sfm::unwrap_tracks(scene.image_animals, dense, scene.camera, ground, Exec::Parallel);
        const double ts = best_ms(repeats, [&] {
            (void)sfm::unwrap_tracks(scene.image_animals, dense, scene.camera, ground,
                                     Exec::Serial);
        });
        const double tp = best_ms(repeats, [&] {
            (void)sfm::unwrap_tracks(scene.image_animals, dense, scene.camera, ground,
                                     Exec::Parallel);
        });
        print_row("ground unwrap", ts, tp, same_tracks(ser, par));
        world = ser;
    }

    {
        const behavior::MetricParams params;
        const auto ser = behavior::compute_herd_metrics(world, params, Exec::Serial);
        const auto par = behavior::compute_herd_metrics(world, params, Exec::Parallel);
        const double ts = best_ms(
            repeats, [&] { (void)behavior::compute_herd_metrics(world, params, Exec::Serial); });
        const double tp = best_ms(repeats, [&] {
            (void)behavior::compute_herd_metrics(world, params, Exec::Parallel);
        });
        print_row("herd metrics", ts, tp, same_metrics(ser, par));
    }
    return 0;
}
