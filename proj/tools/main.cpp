#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "unwrap/behavior.hpp"
#include "unwrap/errors.hpp"
#include "unwrap/io_util.hpp"
#include "unwrap/landmark_eval.hpp"
#include "unwrap/manifest.hpp"
#include "unwrap/parallel.hpp"
#include "unwrap/registration.hpp"
#include "unwrap/sfm.hpp"
#include "unwrap/synth.hpp"
#include "unwrap/tracks.hpp"

namespace fs = std::filesystem;
using namespace unwrap;

namespace {

template <class T>
T as_tracks(tracks::TrackSet base) {
    T out;
    static_cast<tracks::TrackSet&>(out) = std::move(base);
    return out;
}

fs::path manifest_path_for(const fs::path& out_file) {
    fs::path p = out_file;
    p += ".manifest.json";
    return p;
}

void write_unwrap_report(const reg::UnwrapReport& r, const fs::path& path) {
    nlohmann::ordered_json j;
    j["total_entries"] = r.total_entries;
    j["dropped_no_transform"] = r.dropped_no_transform;
    j["dropped_no_pose"] = r.dropped_no_pose;
    j["dropped_degenerate"] = r.dropped_degenerate;
    j["out_of_bounds_warnings"] = r.out_of_bounds_warnings;
    j["missing_frames"] = r.missing_frames;
    auto out = io::open_output(path);
    out << j.dump(2) << "\n";
}

void note_report(manifest::RunManifest& man, const reg::UnwrapReport& r) {
    const long dropped = r.dropped_no_transform + r.dropped_no_pose + r.dropped_degenerate;
    if (dropped > 0) {
        man.warnings.push_back(std::to_string(dropped) + " of " +
                               std::to_string(r.total_entries) + " entries dropped");
    }
    if (r.out_of_bounds_warnings > 0) {
        man.warnings.push_back(std::to_string(r.out_of_bounds_warnings) +
                               " detections outside the image bounds");
    }
    man.gap_count += static_cast<long>(r.missing_frames.size());
}

struct SfmInputs {
    sfm::KeyframePoseSet keys;
    geom::CameraIntrinsics camera;
    std::vector<geom::Vec3> points;
};

SfmInputs load_sfm_inputs(const std::string& poses_path, const std::string& intrinsics_path,
                          const std::string& points_path, manifest::RunManifest& man) {
    SfmInputs in;
    bool have_camera = false, have_points = false;
    man.add_input(poses_path);
    if (fs::path(poses_path).extension() == ".json") {
        auto rec = sfm::parse_reconstruction(poses_path);
        in.keys = std::move(rec.poses);
        in.camera = rec.camera;
        have_camera = true;
        if (!rec.points.empty()) {
            in.points = std::move(rec.points);
            have_points = true;
        }
    } else {
        in.keys = sfm::load_pose_csv(poses_path);
    }
    if (!intrinsics_path.empty()) {
        in.camera = sfm::load_intrinsics(intrinsics_path);
        have_camera = true;
        man.add_input(intrinsics_path);
    }
    if (!points_path.empty()) {
        in.points = sfm::load_point_cloud_csv(points_path);
        have_points = true;
        man.add_input(points_path);
    }
    if (!have_camera) {
        throw ConfigError("camera intrinsics needed: pass --intrinsics with CSV poses");
    }
    if (!have_points) {
        throw ConfigError("ground points needed: pass --points or a reconstruction with points");
    }
    return in;
}

int run_unwrap_reg(const std::string& tracks_path, const std::string& chain_path,
                   const std::string& landmarks_path, const std::string& q_name,
                   int min_pairs, const std::string& out, const std::string& report_path) {
    if (chain_path.empty() == landmarks_path.empty()) {
        throw ConfigError("provide exactly one of --chain or --landmarks");
    }
    manifest::RunManifest man;
    man.subcommand = "unwrap-reg";
    man.add_param("q", q_name);
    man.add_input(tracks_path);

    const auto img = as_tracks<tracks::ImageTrackSet>(tracks::read_tracks(tracks_path));
    reg::TransformChain chain;
    if (!chain_path.empty()) {
        chain = reg::load_chain(chain_path);
        man.add_input(chain_path);
    } else {
        man.add_param("min_pairs", static_cast<long long>(min_pairs));
        man.add_input(landmarks_path);
        const auto lm = as_tracks<tracks::ImageTrackSet>(tracks::read_tracks(landmarks_path));
        chain = reg::estimate_chain_from_landmarks(lm, min_pairs);
    }
    if (!chain.gaps.empty()) {
        man.warnings.push_back(std::to_string(chain.gaps.size()) +
                               " frames missing from the transform chain");
        man.gap_count += static_cast<long>(chain.gaps.size());
    }
    const auto q = q_name == "identity" ? reg::AxisConvention::identity()
                                        : reg::AxisConvention::yflip();
    reg::UnwrapReport rep;
    const auto world = reg::unwrap_tracks(img, chain, q, Exec::Parallel, &rep);
    tracks::write_tracks(world, out);
    if (!report_path.empty()) write_unwrap_report(rep, report_path);
    note_report(man, rep);
    man.write(manifest_path_for(out));
    std::cerr << "unwrap-reg: kept " << (rep.total_entries - rep.dropped_no_transform) << " of "
              << rep.total_entries << " entries\n";
    return 0;
}

int run_unwrap_sfm(const std::string& tracks_path, const std::string& poses_path,
                   const std::string& intrinsics_path, const std::string& points_path,
                   const std::string& rotation, const std::string& deltas_path,
                   const std::string& out, const std::string& report_path) {
    manifest::RunManifest man;
    man.subcommand = "unwrap-sfm";
    man.add_param("rotation", rotation);
    man.add_input(tracks_path);

    const auto img = as_tracks<tracks::ImageTrackSet>(tracks::read_tracks(tracks_path));
    auto in = load_sfm_inputs(poses_path, intrinsics_path, points_path, man);

    const auto mode = rotation == "slerp" ? sfm::RotationMode::Slerp : sfm::RotationMode::InPlane;
    std::map<int, double> deltas;
    if (mode == sfm::RotationMode::InPlane) {
        if (deltas_path.empty()) throw ConfigError("--rotation inplane needs --deltas");
        deltas = sfm::load_deltas_csv(deltas_path);
        man.add_input(deltas_path);
    }
    const auto dense = sfm::densify_poses(in.keys, mode,
                                          mode == sfm::RotationMode::InPlane ? &deltas : nullptr);
    const auto ground = sfm::build_ground_model(in.points);
    reg::UnwrapReport rep;
    const auto world = sfm::unwrap_tracks(img, dense, in.camera, ground, Exec::Parallel, &rep);
    tracks::write_tracks(world, out);
    if (!report_path.empty()) write_unwrap_report(rep, report_path);
    note_report(man, rep);
    man.write(manifest_path_for(out));
    std::cerr << "unwrap-sfm: kept "
              << (rep.total_entries - rep.dropped_no_pose - rep.dropped_degenerate) << " of "
              << rep.total_entries << " entries\n";
    return 0;
}

int run_eval_trees(const std::string& world_path, double body_length, const std::string& out) {
    manifest::RunManifest man;
    man.subcommand = "eval-trees";
    man.add_param("body_length", body_length);
    man.add_input(world_path);

    const auto world = as_tracks<tracks::WorldTrackSet>(tracks::read_tracks(world_path));
    const auto report = eval::evaluate_landmarks(world, body_length);
    eval::write_report_csv(report, out);
    man.write(manifest_path_for(out));
    std::cerr << "eval-trees: weighted mean dispersion " << io::format_double(report.weighted_mean)
              << " BL over " << report.rows.size() << " landmarks\n";
    return 0;
}

int run_metrics(const std::string& world_path, double fps, const std::string& out_dir,
                const behavior::MetricParams& params) {
    manifest::RunManifest man;
    man.subcommand = "metrics";
    man.add_param("min_confidence", params.clean.min_confidence);
    man.add_param("jump_factor", params.clean.jump_factor);
    man.add_param("sigma_factor", params.sigma_factor);
    man.add_param("smooth_window", static_cast<long long>(params.smooth_window));
    man.add_param("smooth_order", static_cast<long long>(params.smooth_order));
    man.add_param("bin_frames", static_cast<long long>(params.bin_frames));
    man.add_input(world_path);

    auto world = as_tracks<tracks::WorldTrackSet>(tracks::read_tracks(world_path));
    if (fps > 0.0) world.fps = fps;
    man.add_param("fps", world.fps);

    const auto m = behavior::compute_herd_metrics(world, params);
    fs::create_directories(out_dir);
    behavior::write_herd_csv(m, fs::path(out_dir) / "herd.csv");
    behavior::write_individuals_csv(m, fs::path(out_dir) / "individuals.csv");
    behavior::write_binned_csv(m, fs::path(out_dir) / "binned.csv");
    if (!m.clean.removed.empty()) {
        man.warnings.push_back(std::to_string(m.clean.removed.size()) +
                               " points removed while cleaning");
    }
    if (!m.vectors.removed.empty()) {
        man.warnings.push_back(std::to_string(m.vectors.removed.size()) +
                               " body vectors rejected");
    }
    if (m.smoothing_warned) {
        man.warnings.push_back("a series shorter than the smoothing window passed unsmoothed");
    }
    man.write(fs::path(out_dir) / "manifest.json");
    std::cerr << "metrics: " << m.clean.individuals.size() << " individuals over "
              << m.clean.n_frames << " frames, body length "
              << io::format_double(m.clean.body_length) << "\n";
    return 0;
}

int run_synth(const std::string& config_path, const std::string& out_dir, long long seed) {
    manifest::RunManifest man;
    man.subcommand = "synth";
    man.add_input(config_path);

    auto config = synth::load_scene_config(config_path);
    if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);
    man.seed = config.seed;
    const auto scene = synth::generate_scene(config);
    synth::write_scene(scene, out_dir);
    if (!scene.nadir) {
        man.warnings.push_back("pitched flight: no rigid chain representation written");
    }
    man.write(fs::path(out_dir) / "manifest.json");
    std::cerr << "synth: " << config.n_frames << " frames, " << config.herd.n_individuals
              << " individuals, " << config.n_landmarks << " landmarks -> " << out_dir << "\n";
    return 0;
}

int run_compare(const std::string& animals_path, const std::string& landmarks_path,
                const std::string& chain_path, const std::string& poses_path,
                const std::string& intrinsics_path, const std::string& points_path,
                const std::string& deltas_path, const std::string& q_name, long min_samples,
                double max_jump, const std::string& out_dir) {
    manifest::RunManifest man;
    man.subcommand = "compare";
    man.add_param("q", q_name);
    man.add_param("min_samples", static_cast<long long>(min_samples));
    man.add_param("max_jump_px", max_jump);
    man.add_input(animals_path);
    man.add_input(landmarks_path);
    man.add_input(chain_path);
    man.add_input(deltas_path);

    const auto animals = as_tracks<tracks::ImageTrackSet>(tracks::read_tracks(animals_path));
    const auto landmarks = as_tracks<tracks::ImageTrackSet>(tracks::read_tracks(landmarks_path));
    const auto filtered = tracks::filter_landmark_tracks(landmarks, min_samples, max_jump);
    if (filtered.entries.empty()) {
        throw IntegrityError("no landmark track survives the quality filter");
    }

    const auto chain = reg::load_chain(chain_path);
    const auto q = q_name == "identity" ? reg::AxisConvention::identity()
                                        : reg::AxisConvention::yflip();
    auto sfm_in = load_sfm_inputs(poses_path, intrinsics_path, points_path, man);
    auto deltas = sfm::load_deltas_csv(deltas_path);
    const auto ground = sfm::build_ground_model(sfm_in.points);
    const auto dense_slerp = sfm::densify_poses(sfm_in.keys, sfm::RotationMode::Slerp);
    const auto dense_inplane =
        sfm::densify_poses(sfm_in.keys, sfm::RotationMode::InPlane, &deltas);

    struct Row {
        std::string method;
        eval::DispersionReport report;
    };
    std::vector<Row> rows;
    const auto add_row = [&](const std::string& method, const tracks::WorldTrackSet& wa,
                             const tracks::WorldTrackSet& wl) {
        const double bl = behavior::clean_tracks(wa).body_length;
        Row row{method, eval::evaluate_landmarks(wl, bl)};
        eval::write_report_csv(row.report, fs::path(out_dir) / ("report_" + method + ".csv"));
        rows.push_back(std::move(row));
    };

    fs::create_directories(out_dir);
    add_row("registration", reg::unwrap_tracks(animals, chain, q),
            reg::unwrap_tracks(filtered, chain, q));
    add_row("sfm_slerp", sfm::unwrap_tracks(animals, dense_slerp, sfm_in.camera, ground),
            sfm::unwrap_tracks(filtered, dense_slerp, sfm_in.camera, ground));
    add_row("sfm_inplane", sfm::unwrap_tracks(animals, dense_inplane, sfm_in.camera, ground),
            sfm::unwrap_tracks(filtered, dense_inplane, sfm_in.camera, ground));

    {
        auto out = io::open_output(fs::path(out_dir) / "summary.csv");
        out << "method,weighted_mean,max,body_length,n_landmarks,samples\n";
        for (const auto& row : rows) {
            double mx = 0.0;
            long samples = 0;
            for (const auto& r : row.report.rows) {
                mx = std::max(mx, r.stats.max);
                samples += r.stats.samples;
            }
            out << row.method << ',' << io::format_double(row.report.weighted_mean) << ','
                << io::format_double(mx) << ',' << io::format_double(row.report.body_length)
                << ',' << row.report.rows.size() << ',' << samples << '\n';
        }
    }

    std::cout << std::left << std::setw(14) << "method" << std::setw(16) << "weighted_mean"
              << std::setw(16) << "max" << std::setw(16) << "body_length" << "landmarks\n";
    for (const auto& row : rows) {
        double mx = 0.0;
        for (const auto& r : row.report.rows) mx = std::max(mx, r.stats.max);
        std::cout << std::left << std::setw(14) << row.method << std::setw(16)
                  << io::format_double(row.report.weighted_mean) << std::setw(16)
                  << io::format_double(mx) << std::setw(16)
                  << io::format_double(row.report.body_length) << row.report.rows.size() << "\n";
    }

    man.write(fs::path(out_dir) / "manifest.json");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Moving-camera trajectory unwrapping and herd-metrics toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "0.1.0");
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = all cores)");

    auto* c_reg = app.add_subcommand(
        "unwrap-reg", "Unwrap image tracks through a frame-to-frame rigid chain");
    c_reg->fallthrough();
    std::string reg_tracks, reg_chain, reg_landmarks, reg_q = "yflip", reg_out, reg_report;
    int reg_min_pairs = 3;
    c_reg->add_option("--tracks", reg_tracks, "image track CSV")->required();
    c_reg->add_option("--chain", reg_chain, "chain CSV (frame,theta_rad,tx,ty)");
    c_reg->add_option("--landmarks", reg_landmarks, "landmark image tracks to fit the chain");
    c_reg->add_option("--q", reg_q, "image-to-world axis convention")
        ->check(CLI::IsMember({"yflip", "identity"}));
    c_reg->add_option("--min-pairs", reg_min_pairs, "minimum co-visible landmarks per pair");
    c_reg->add_option("--out", reg_out, "world track CSV to write")->required();
    c_reg->add_option("--report", reg_report, "unwrap report JSON");

    auto* c_sfm = app.add_subcommand(
        "unwrap-sfm", "Unwrap image tracks through camera poses and a ground plane");
    c_sfm->fallthrough();
    std::string sfm_tracks, sfm_poses, sfm_intr, sfm_points, sfm_rot = "slerp", sfm_deltas,
                sfm_out, sfm_report;
    c_sfm->add_option("--tracks", sfm_tracks, "image track CSV")->required();
    c_sfm->add_option("--poses", sfm_poses, "reconstruction JSON or pose CSV")->required();
    c_sfm->add_option("--intrinsics", sfm_intr, "intrinsics key-value file");
    c_sfm->add_option("--points", sfm_points, "ground point cloud CSV");
    c_sfm->add_option("--rotation", sfm_rot, "keyframe densification mode")
        ->check(CLI::IsMember({"slerp", "inplane"}));
    c_sfm->add_option("--deltas", sfm_deltas, "per-frame in-plane rotation CSV");
    c_sfm->add_option("--out", sfm_out, "world track CSV to write")->required();
    c_sfm->add_option("--report", sfm_report, "unwrap report JSON");

    auto* c_eval = app.add_subcommand("eval-trees",
                                      "Dispersion statistics of unwrapped landmark tracks");
    c_eval->fallthrough();
    std::string eval_world, eval_out;
    double eval_bl = 0.0;
    c_eval->add_option("--world", eval_world, "world track CSV")->required();
    c_eval->add_option("--body-length", eval_bl, "normalizer, world units")->required();
    c_eval->add_option("--out", eval_out, "report CSV to write")->required();

    auto* c_metrics = app.add_subcommand("metrics", "Herd metrics over world tracks");
    c_metrics->fallthrough();
    std::string met_world, met_dir;
    double met_fps = 0.0;
    behavior::MetricParams met_params;
    c_metrics->add_option("--world", met_world, "world track CSV")->required();
    c_metrics->add_option("--fps", met_fps, "frames per second (default: track metadata)");
    c_metrics->add_option("--out-dir", met_dir, "output directory")->required();
    c_metrics->add_option("--min-confidence", met_params.clean.min_confidence,
                          "confidence cutoff");
    c_metrics->add_option("--jump-factor", met_params.clean.jump_factor,
                          "max per-frame move, body lengths");
    c_metrics->add_option("--sigma-factor", met_params.sigma_factor,
                          "body-vector length outlier cut");
    c_metrics->add_option("--window", met_params.smooth_window, "smoothing window, frames");
    c_metrics->add_option("--order", met_params.smooth_order, "smoothing polynomial order");
    c_metrics->add_option("--bin", met_params.bin_frames, "bin width, frames");

    auto* c_synth = app.add_subcommand("synth", "Generate a synthetic scene");
    c_synth->fallthrough();
    std::string synth_config, synth_dir;
    long long synth_seed = -1;
    c_synth->add_option("--config", synth_config, "scene config JSON")->required();
    c_synth->add_option("--out-dir", synth_dir, "output directory")->required();
    c_synth->add_option("--seed", synth_seed, "override the config seed");

    auto* c_cmp = app.add_subcommand(
        "compare", "Run all three unwrapping methods and summarize landmark dispersion");
    c_cmp->fallthrough();
    std::string cmp_animals, cmp_landmarks, cmp_chain, cmp_poses, cmp_intr, cmp_points,
        cmp_deltas, cmp_q = "yflip", cmp_dir;
    long cmp_min_samples = 400;
    double cmp_max_jump = 10.0;
    c_cmp->add_option("--animals", cmp_animals, "animal image track CSV")->required();
    c_cmp->add_option("--landmarks", cmp_landmarks, "landmark image track CSV")->required();
    c_cmp->add_option("--chain", cmp_chain, "chain CSV")->required();
    c_cmp->add_option("--poses", cmp_poses, "reconstruction JSON or pose CSV")->required();
    c_cmp->add_option("--intrinsics", cmp_intr, "intrinsics key-value file");
    c_cmp->add_option("--points", cmp_points, "ground point cloud CSV");
    c_cmp->add_option("--deltas", cmp_deltas, "per-frame in-plane rotation CSV")->required();
    c_cmp->add_option("--q", cmp_q, "axis convention for the chain method")
        ->check(CLI::IsMember({"yflip", "identity"}));
    c_cmp->add_option("--min-samples", cmp_min_samples, "landmark filter: required points");
    c_cmp->add_option("--max-jump-px", cmp_max_jump, "landmark filter: max per-frame move");
    c_cmp->add_option("--out-dir", cmp_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        std::cerr << "error: " << e.what() << "\n\n" << app.help() << "\n";
        return 1;
    }
    set_thread_count(threads);

    try {
        if (c_reg->parsed()) {
            return run_unwrap_reg(reg_tracks, reg_chain, reg_landmarks, reg_q, reg_min_pairs,
                                  reg_out, reg_report);
        }
        if (c_sfm->parsed()) {
            return run_unwrap_sfm(sfm_tracks, sfm_poses, sfm_intr, sfm_points, sfm_rot,
                                  sfm_deltas, sfm_out, sfm_report);
        }
        if (c_eval->parsed()) return run_eval_trees(eval_world, eval_bl, eval_out);
        if (c_metrics->parsed()) return run_metrics(met_world, met_fps, met_dir, met_params);
        if (c_synth->parsed()) return run_synth(synth_config, synth_dir, synth_seed);
        if (c_cmp->parsed()) {
            return run_compare(cmp_animals, cmp_landmarks, cmp_chain, cmp_poses, cmp_intr,
                               cmp_points, cmp_deltas, cmp_q, cmp_min_samples, cmp_max_jump,
                               cmp_dir);
        }
        std::cerr << "error: no subcommand\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}
