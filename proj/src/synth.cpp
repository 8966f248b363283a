#include "unwrap/synth.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "unwrap/errors.hpp"
#include "unwrap/io_util.hpp"

namespace unwrap::synth {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& ctx) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::none_of(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; })) {
            throw ConfigError(ctx + ": unknown key '" + key + "'");
        }
    }
}

double get_num(const json& j, const char* key, double dflt, const std::string& ctx) {
    if (!j.contains(key)) return dflt;
    if (!j[key].is_number()) throw ConfigError(ctx + ": '" + key + "' must be a number");
    return j[key].get<double>();
}

int get_int(const json& j, const char* key, int dflt, const std::string& ctx) {
    if (!j.contains(key)) return dflt;
    if (!j[key].is_number_integer()) throw ConfigError(ctx + ": '" + key + "' must be an integer");
    return j[key].get<int>();
}

geom::Vec2 get_vec2(const json& j, const char* key, geom::Vec2 dflt, const std::string& ctx) {
    if (!j.contains(key)) return dflt;
    const auto& v = j[key];
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        throw ConfigError(ctx + ": '" + key + "' must be [x, y]");
    }
    return {v[0].get<double>(), v[1].get<double>()};
}

void validate_config(const SceneConfig& c) {
    if (c.n_frames < 2) throw ConfigError("scene needs at least 2 frames");
    if (c.fps <= 0.0) throw ConfigError("fps must be positive");
    if (c.width <= 0.0 || c.height <= 0.0 || c.focal <= 0.0) {
        throw ConfigError("image size and focal length must be positive");
    }
    if (c.n_landmarks < 0 || c.n_ground_points < 3 || c.herd.n_individuals < 0) {
        throw ConfigError("entity counts out of range (need >= 3 ground points)");
    }
    if (c.keyframe_stride < 1) throw ConfigError("keyframe stride must be at least 1");
    if (c.drone.height <= 0.0) {
        throw ConfigError("camera path intersects the ground plane (height must be positive)");
    }
    if (c.drone.mode != "hover" && c.drone.mode != "cv" && c.drone.mode != "orbit") {
        throw ConfigError("drone mode must be hover, cv, or orbit");
    }
    if (!c.drone.waypoints.empty() && c.drone.waypoints.size() < 2) {
        throw ConfigError("a waypoint path needs at least 2 waypoints");
    }
    if (c.herd.body_length <= 0.0) throw ConfigError("body length must be positive");
    if (c.herd.wave_period <= 0.0 || c.drone.yaw_wobble_period <= 0.0) {
        throw ConfigError("modulation periods must be positive");
    }
}

// Landmarks land on a 2^-10 grid: frame averages of identical dyadic doubles
// are exact, so ground-truth landmark dispersion is exactly zero.
double quantize(double x) { return std::round(x * 1024.0) / 1024.0; }

constexpr double kDegree = M_PI / 180.0;

}  // namespace

SceneConfig parse_scene_config(const std::string& json_text, const std::string& context) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(context + ": " + e.what());
    }
    if (!doc.is_object()) throw ConfigError(context + ": config must be a JSON object");
    check_keys(doc,
               {"seed", "n_frames", "fps", "width", "height", "focal", "k1", "k2", "n_landmarks",
                "landmark_radius", "n_ground_points", "keyframe_stride", "drone", "herd",
                "noise"},
               context);

    SceneConfig c;
    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_integer() || doc["seed"].get<long long>() < 0) {
            throw ConfigError(context + ": 'seed' must be a non-negative integer");
        }
        c.seed = doc["seed"].get<std::uint64_t>();
    }
    c.n_frames = get_int(doc, "n_frames", c.n_frames, context);
    c.fps = get_num(doc, "fps", c.fps, context);
    c.width = get_num(doc, "width", c.width, context);
    c.height = get_num(doc, "height", c.height, context);
    c.focal = get_num(doc, "focal", c.focal, context);
    c.k1 = get_num(doc, "k1", c.k1, context);
    c.k2 = get_num(doc, "k2", c.k2, context);
    c.n_landmarks = get_int(doc, "n_landmarks", c.n_landmarks, context);
    c.landmark_radius = get_num(doc, "landmark_radius", c.landmark_radius, context);
    c.n_ground_points = get_int(doc, "n_ground_points", c.n_ground_points, context);
    c.keyframe_stride = get_int(doc, "keyframe_stride", c.keyframe_stride, context);

    if (doc.contains("drone")) {
        const auto& d = doc["drone"];
        const std::string ctx = context + " drone";
        check_keys(d,
                   {"mode", "height", "start", "velocity", "waypoints", "yaw0_deg",
                    "yaw_rate_deg", "yaw_wobble_deg", "yaw_wobble_period", "orbit_radius",
                    "orbit_rate_deg", "orbit_center"},
                   ctx);
        if (d.contains("mode")) {
            if (!d["mode"].is_string()) throw ConfigError(ctx + ": 'mode' must be a string");
            c.drone.mode = d["mode"].get<std::string>();
        }
        c.drone.height = get_num(d, "height", c.drone.height, ctx);
        c.drone.start = get_vec2(d, "start", c.drone.start, ctx);
        c.drone.velocity = get_vec2(d, "velocity", c.drone.velocity, ctx);
        if (d.contains("waypoints")) {
            if (!d["waypoints"].is_array()) {
                throw ConfigError(ctx + ": 'waypoints' must be an array of [x, y]");
            }
            for (const auto& w : d["waypoints"]) {
                if (!w.is_array() || w.size() != 2 || !w[0].is_number() || !w[1].is_number()) {
                    throw ConfigError(ctx + ": 'waypoints' must be an array of [x, y]");
                }
                c.drone.waypoints.push_back({w[0].get<double>(), w[1].get<double>()});
            }
        }
        c.drone.yaw0_deg = get_num(d, "yaw0_deg", c.drone.yaw0_deg, ctx);
        c.drone.yaw_rate_deg = get_num(d, "yaw_rate_deg", c.drone.yaw_rate_deg, ctx);
        c.drone.yaw_wobble_deg = get_num(d, "yaw_wobble_deg", c.drone.yaw_wobble_deg, ctx);
        c.drone.yaw_wobble_period =
            get_num(d, "yaw_wobble_period", c.drone.yaw_wobble_period, ctx);
        c.drone.orbit_radius = get_num(d, "orbit_radius", c.drone.orbit_radius, ctx);
        c.drone.orbit_rate_deg = get_num(d, "orbit_rate_deg", c.drone.orbit_rate_deg, ctx);
        c.drone.orbit_center = get_vec2(d, "orbit_center", c.drone.orbit_center, ctx);
    }

    if (doc.contains("herd")) {
        const auto& h = doc["herd"];
        const std::string ctx = context + " herd";
        check_keys(h,
                   {"n_individuals", "body_length", "speed_bl_s", "heading_noise",
                    "wave_amplitude", "wave_period", "area_radius"},
                   ctx);
        c.herd.n_individuals = get_int(h, "n_individuals", c.herd.n_individuals, ctx);
        c.herd.body_length = get_num(h, "body_length", c.herd.body_length, ctx);
        c.herd.speed_bl_s = get_num(h, "speed_bl_s", c.herd.speed_bl_s, ctx);
        c.herd.heading_noise = get_num(h, "heading_noise", c.herd.heading_noise, ctx);
        c.herd.wave_amplitude = get_num(h, "wave_amplitude", c.herd.wave_amplitude, ctx);
        c.herd.wave_period = get_num(h, "wave_period", c.herd.wave_period, ctx);
        c.herd.area_radius = get_num(h, "area_radius", c.herd.area_radius, ctx);
    }

    if (doc.contains("noise")) {
        const auto& n = doc["noise"];
        const std::string ctx = context + " noise";
        check_keys(n,
                   {"pixel_sigma", "chain_theta_sigma", "chain_t_sigma", "delta_sigma",
                    "pose_rot_sigma", "pose_pos_sigma"},
                   ctx);
        c.noise.pixel_sigma = get_num(n, "pixel_sigma", 0.0, ctx);
        c.noise.chain_theta_sigma = get_num(n, "chain_theta_sigma", 0.0, ctx);
        c.noise.chain_t_sigma = get_num(n, "chain_t_sigma", 0.0, ctx);
        c.noise.delta_sigma = get_num(n, "delta_sigma", 0.0, ctx);
        c.noise.pose_rot_sigma = get_num(n, "pose_rot_sigma", 0.0, ctx);
        c.noise.pose_pos_sigma = get_num(n, "pose_pos_sigma", 0.0, ctx);
    }

    validate_config(c);
    return c;
}

SceneConfig load_scene_config(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_scene_config(text, path.string());
}

Scene generate_scene(const SceneConfig& config) {
    validate_config(config);
    Scene s;
    s.config = config;
    s.camera = {config.focal,     config.focal, config.width / 2.0, config.height / 2.0,
                config.k1,        config.k2,    config.width,       config.height};
    s.camera.validate();
    s.camera_height = config.drone.height;
    s.nadir = config.drone.mode != "orbit";

    Rng rng(config.seed);
    const int n_frames = config.n_frames;
    const int n_ind = config.herd.n_individuals;

    std::vector<geom::Vec2> landmarks(config.n_landmarks);
    for (auto& lm : landmarks) {
        const double r = config.landmark_radius * std::sqrt(rng.uniform());
        const double a = rng.uniform(0.0, 2.0 * M_PI);
        lm = {quantize(r * std::cos(a)), quantize(r * std::sin(a))};
    }
    s.ground_points.resize(config.n_ground_points);
    for (auto& p : s.ground_points) {
        const double r = config.landmark_radius * 1.15 * std::sqrt(rng.uniform());
        const double a = rng.uniform(0.0, 2.0 * M_PI);
        p = {r * std::cos(a), r * std::sin(a), 0.0};
    }

    // herd walk: smoothed random headings, a steer back inside the area, and a
    // per-individual phase on the shared speed wave
    std::vector<geom::Vec2> pos(n_ind);
    std::vector<double> heading(n_ind), phase(n_ind);
    for (int i = 0; i < n_ind; ++i) {
        const double r = config.herd.area_radius * 0.6 * std::sqrt(rng.uniform());
        const double a = rng.uniform(0.0, 2.0 * M_PI);
        pos[i] = {r * std::cos(a), r * std::sin(a)};
        heading[i] = rng.uniform(0.0, 2.0 * M_PI);
        phase[i] = rng.uniform(0.0, 2.0 * M_PI);
    }
    const double step_base = config.herd.speed_bl_s * config.herd.body_length / config.fps;
    std::vector<geom::Vec2> head(static_cast<size_t>(n_frames) * n_ind);
    std::vector<geom::Vec2> tail(static_cast<size_t>(n_frames) * n_ind);
    for (int f = 0; f < n_frames; ++f) {
        for (int i = 0; i < n_ind; ++i) {
            const geom::Vec2 dir{std::cos(heading[i]), std::sin(heading[i])};
            const geom::Vec2 half = dir * (config.herd.body_length / 2.0);
            head[static_cast<size_t>(f) * n_ind + i] = pos[i] + half;
            tail[static_cast<size_t>(f) * n_ind + i] = pos[i] - half;

            heading[i] += rng.gauss() * config.herd.heading_noise;
            if (geom::norm(pos[i]) > config.herd.area_radius) {
                heading[i] = std::atan2(-pos[i].y, -pos[i].x) + rng.gauss() * 0.3;
            }
            const double envelope = std::max(
                0.0, 1.0 + config.herd.wave_amplitude *
                               std::sin(2.0 * M_PI * f / config.herd.wave_period + phase[i]));
            pos[i] += geom::Vec2{std::cos(heading[i]), std::sin(heading[i])} *
                      (step_base * envelope);
        }
    }

    // camera path
    const auto& d = config.drone;
    const double pitch =
        d.mode == "orbit" ? std::atan2(d.orbit_radius, d.height) : 0.0;
    const geom::UnitQuaternion q_tilt =
        geom::UnitQuaternion::from_axis_angle({1, 0, 0}, M_PI - pitch);
    s.yaw.resize(n_frames);
    for (int f = 0; f < n_frames; ++f) {
        const double wobble =
            d.yaw_wobble_deg * kDegree *
            std::sin(2.0 * M_PI * static_cast<double>(f) / d.yaw_wobble_period);
        double yaw = d.yaw0_deg * kDegree + d.yaw_rate_deg * kDegree * f + wobble;
        geom::Vec2 xy = d.start;
        if (d.mode == "cv") {
            if (d.waypoints.size() >= 2) {
                const double tpos = n_frames > 1
                                        ? static_cast<double>(f) / (n_frames - 1)
                                        : 0.0;
                const int segs = static_cast<int>(d.waypoints.size()) - 1;
                const int seg = std::min(static_cast<int>(tpos * segs), segs - 1);
                const double local = tpos * segs - seg;
                xy = d.waypoints[seg] + (d.waypoints[seg + 1] - d.waypoints[seg]) * local;
            } else {
                xy = d.start + d.velocity * static_cast<double>(f);
            }
        } else if (d.mode == "orbit") {
            const double alpha = d.yaw0_deg * kDegree + d.orbit_rate_deg * kDegree * f;
            xy = d.orbit_center +
                 geom::Vec2{std::cos(alpha), std::sin(alpha)} * d.orbit_radius;
            yaw = alpha - M_PI / 2.0 + d.yaw_rate_deg * kDegree * f + wobble;
        }
        s.yaw[f] = yaw;
        geom::Pose3D pose;
        pose.rotation = geom::UnitQuaternion::from_axis_angle({0, 0, 1}, yaw) * q_tilt;
        pose.position = {xy.x, xy.y, d.height};
        s.poses.emplace(f, pose);
    }

    // truth + projections
    s.truth_world.fps = config.fps;
    s.truth_world.n_frames = n_frames;
    s.image_animals.fps = config.fps;
    s.image_animals.n_frames = n_frames;
    s.image_landmarks.fps = config.fps;
    s.image_landmarks.n_frames = n_frames;

    std::vector<std::string> ind_ids(n_ind), tree_ids(landmarks.size());
    for (int i = 0; i < n_ind; ++i) ind_ids[i] = "ind" + std::to_string(i + 1);
    for (size_t t = 0; t < landmarks.size(); ++t) tree_ids[t] = "tree" + std::to_string(t + 1);

    const auto project = [&](const geom::Pose3D& pose, geom::Vec2 world) {
        auto px = geom::project_point(s.camera, pose, {world.x, world.y, 0.0});
        if (px && config.noise.pixel_sigma > 0.0) {
            px->x += rng.gauss() * config.noise.pixel_sigma;
            px->y += rng.gauss() * config.noise.pixel_sigma;
        }
        if (px && !geom::pixel_in_bounds(s.camera, *px)) px.reset();
        return px;
    };

    for (int f = 0; f < n_frames; ++f) {
        const geom::Pose3D& pose = s.poses.at(f);
        for (int i = 0; i < n_ind; ++i) {
            const geom::Vec2 h = head[static_cast<size_t>(f) * n_ind + i];
            const geom::Vec2 t = tail[static_cast<size_t>(f) * n_ind + i];
            s.truth_world.entries.push_back(
                {f, ind_ids[i], tracks::Keypoint::Head, h, std::nullopt, std::nullopt});
            s.truth_world.entries.push_back(
                {f, ind_ids[i], tracks::Keypoint::Tail, t, std::nullopt, std::nullopt});
            if (const auto px = project(pose, h)) {
                s.image_animals.entries.push_back(
                    {f, ind_ids[i], tracks::Keypoint::Head, *px, 1.0, std::nullopt});
            }
            if (const auto px = project(pose, t)) {
                s.image_animals.entries.push_back(
                    {f, ind_ids[i], tracks::Keypoint::Tail, *px, 1.0, std::nullopt});
            }
        }
        for (size_t t = 0; t < landmarks.size(); ++t) {
            s.truth_world.entries.push_back({f, tree_ids[t], tracks::Keypoint::Point,
                                             landmarks[t], std::nullopt, std::nullopt});
            if (const auto px = project(pose, landmarks[t])) {
                s.image_landmarks.entries.push_back(
                    {f, tree_ids[t], tracks::Keypoint::Point, *px, 1.0, std::nullopt});
            }
        }
    }
    s.truth_world.finalize();
    s.image_animals.finalize();
    s.image_landmarks.finalize();
    return s;
}

sfm::KeyframePoseSet keyframe_subsample(const sfm::KeyframePoseSet& dense, int stride) {
    if (stride < 1) throw ConfigError("keyframe stride must be at least 1");
    if (dense.empty()) return {};
    sfm::KeyframePoseSet keys;
    for (const auto& [f, p] : dense) {
        if (f % stride == 0) keys.emplace(f, p);
    }
    keys.emplace(dense.rbegin()->first, dense.rbegin()->second);
    return keys;
}

reg::TransformChain exact_chain(const Scene& scene) {
    if (!scene.nadir) {
        throw NotRepresentableError("pitched flight is not a rigid 2D image motion");
    }
    if (scene.camera.k1 != 0.0 || scene.camera.k2 != 0.0) {
        throw NotRepresentableError("radial distortion breaks rigid image motion");
    }
    if (scene.camera.fx != scene.camera.fy) {
        throw NotRepresentableError("anisotropic focal lengths break rigid image motion");
    }
    // Nadir at constant height h: a ground point appears at
    //   p_f = pc + (F/h) * M * Rz(-yaw_f) * (g - c_f),   M = diag(1, -1),
    // so consecutive frames are related by the rigid map below.
    reg::TransformChain chain;
    const double scale = scene.camera.fx / scene.camera_height;
    const geom::Vec2 pc{scene.camera.cx, scene.camera.cy};
    for (int f = 1; f < scene.config.n_frames; ++f) {
        const double prev_yaw = scene.yaw[f - 1];
        const double theta = prev_yaw - scene.yaw[f];
        const auto& prev_pos = scene.poses.at(f - 1).position;
        const auto& cur_pos = scene.poses.at(f).position;
        const geom::Vec2 dc{cur_pos.x - prev_pos.x, cur_pos.y - prev_pos.y};

        const double c = std::cos(prev_yaw), sn = std::sin(prev_yaw);
        const geom::Vec2 rotated{c * dc.x + sn * dc.y, -sn * dc.x + c * dc.y};
        const geom::Vec2 mirrored{rotated.x, -rotated.y};

        geom::Rigid2D t;
        t.theta = theta;
        const double ct = std::cos(theta), st = std::sin(theta);
        t.t = pc - geom::Vec2{ct * pc.x - st * pc.y, st * pc.x + ct * pc.y} +
              mirrored * scale;
        chain.transforms[f] = t;
    }
    return chain;
}

std::map<int, double> exact_inplane_deltas(const Scene& scene,
                                           const sfm::KeyframePoseSet& keyframes) {
    std::map<int, double> deltas;
    if (keyframes.empty()) return deltas;
    for (const auto& [f, pose] : scene.poses) {
        if (keyframes.count(f)) continue;
        auto it = keyframes.lower_bound(f);
        if (it == keyframes.begin()) continue;  // before the first keyframe
        --it;
        // best-fit rotation about the optical axis between keyframe and frame
        const auto rel = it->second.rotation.conjugate() * pose.rotation;
        const auto m = rel.to_matrix();
        deltas[f] = std::atan2(m[3] - m[1], m[0] + m[4]);
    }
    return deltas;
}

void perturb_chain(reg::TransformChain& chain, double theta_sigma, double t_sigma, Rng& rng) {
    for (auto& [f, t] : chain.transforms) {
        (void)f;
        t.theta += rng.gauss() * theta_sigma;
        t.t.x += rng.gauss() * t_sigma;
        t.t.y += rng.gauss() * t_sigma;
    }
}

void perturb_deltas(std::map<int, double>& deltas, double sigma, Rng& rng) {
    for (auto& [f, d] : deltas) {
        (void)f;
        d += rng.gauss() * sigma;
    }
}

void perturb_poses(sfm::KeyframePoseSet& poses, double rot_sigma, double pos_sigma, Rng& rng) {
    for (auto& [f, p] : poses) {
        (void)f;
        const geom::Vec3 rv{rng.gauss() * rot_sigma, rng.gauss() * rot_sigma,
                            rng.gauss() * rot_sigma};
        p.rotation = (p.rotation * geom::UnitQuaternion::from_rotation_vector(rv)).normalized();
        p.position = p.position + geom::Vec3{rng.gauss() * pos_sigma, rng.gauss() * pos_sigma,
                                             rng.gauss() * pos_sigma};
    }
}

void write_scene(const Scene& scene, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    tracks::write_tracks(scene.truth_world, dir / "truth_world.csv");
    tracks::write_tracks(scene.image_animals, dir / "image_animals.csv");
    tracks::write_tracks(scene.image_landmarks, dir / "image_landmarks.csv");
    sfm::write_pose_csv(scene.poses, dir / "poses.csv");
    const auto keys = keyframe_subsample(scene.poses, scene.config.keyframe_stride);
    sfm::write_pose_csv(keys, dir / "keyframes.csv");
    sfm::write_intrinsics(scene.camera, dir / "intrinsics.txt");
    sfm::write_point_cloud_csv(scene.ground_points, dir / "points.csv");
    const auto deltas = exact_inplane_deltas(scene, keys);
    sfm::write_deltas_csv(deltas, dir / "deltas.csv");

    const auto& nz = scene.config.noise;
    Rng noise_rng(scene.config.seed + 1);
    try {
        auto chain = exact_chain(scene);
        reg::write_chain(chain, dir / "chain.csv");
        if (nz.chain_theta_sigma > 0.0 || nz.chain_t_sigma > 0.0) {
            perturb_chain(chain, nz.chain_theta_sigma, nz.chain_t_sigma, noise_rng);
            reg::write_chain(chain, dir / "chain_noisy.csv");
        }
    } catch (const NotRepresentableError&) {
        // pitched flight: no rigid chain exists, so no chain files
    }
    if (nz.delta_sigma > 0.0) {
        auto noisy = deltas;
        perturb_deltas(noisy, nz.delta_sigma, noise_rng);
        sfm::write_deltas_csv(noisy, dir / "deltas_noisy.csv");
    }
    if (nz.pose_rot_sigma > 0.0 || nz.pose_pos_sigma > 0.0) {
        auto noisy = keys;
        perturb_poses(noisy, nz.pose_rot_sigma, nz.pose_pos_sigma, noise_rng);
        sfm::write_pose_csv(noisy, dir / "keyframes_noisy.csv");
    }
}

}  // namespace unwrap::synth
