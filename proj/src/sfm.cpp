#include "unwrap/sfm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "json.hpp"
#include "unwrap/errors.hpp"
#include "unwrap/io_util.hpp"

namespace unwrap::sfm {

using nlohmann::json;

namespace {

// Last run of digits in the shot name, e.g. "cam1_frame_00042.jpg" -> 42.
int frame_from_shot_name(const std::string& name) {
    int end = -1;
    for (int i = static_cast<int>(name.size()) - 1; i >= 0; --i) {
        if (std::isdigit(static_cast<unsigned char>(name[i]))) {
            end = i;
            break;
        }
    }
    if (end < 0) throw NamingError("shot name '" + name + "' carries no frame number");
    int begin = end;
    while (begin > 0 && std::isdigit(static_cast<unsigned char>(name[begin - 1]))) --begin;
    return static_cast<int>(
        io::parse_int(name.substr(begin, end - begin + 1), "shot '" + name + "'"));
}

geom::Vec3 parse_vec3(const json& j, const std::string& ctx) {
    if (!j.is_array() || j.size() != 3) throw SchemaError(ctx + ": expected a 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

double require_number(const json& j, const char* key, const std::string& ctx) {
    if (!j.contains(key) || !j[key].is_number()) {
        throw SchemaError(ctx + ": missing numeric field '" + key + "'");
    }
    return j[key].get<double>();
}

geom::CameraIntrinsics parse_camera(const json& cj, const std::string& ctx) {
    geom::CameraIntrinsics cam;
    cam.width = require_number(cj, "width", ctx);
    cam.height = require_number(cj, "height", ctx);
    const double dim = std::max(cam.width, cam.height);
    const std::string type = cj.value("projection_type", "perspective");
    if (type == "perspective") {
        cam.fx = cam.fy = require_number(cj, "focal", ctx) * dim;
        cam.cx = cam.width / 2.0;
        cam.cy = cam.height / 2.0;
        cam.k1 = cj.value("k1", 0.0);
        cam.k2 = cj.value("k2", 0.0);
    } else if (type == "brown") {
        cam.fx = require_number(cj, "focal_x", ctx) * dim;
        cam.fy = require_number(cj, "focal_y", ctx) * dim;
        cam.cx = cam.width / 2.0 + cj.value("c_x", 0.0) * dim;
        cam.cy = cam.height / 2.0 + cj.value("c_y", 0.0) * dim;
        cam.k1 = cj.value("k1", 0.0);
        cam.k2 = cj.value("k2", 0.0);
        for (const char* key : {"k3", "p1", "p2"}) {
            if (std::abs(cj.value(key, 0.0)) > 1e-12) {
                throw NotRepresentableError(ctx + ": nonzero '" + key +
                                            "' exceeds the two-coefficient radial model");
            }
        }
    } else {
        throw SchemaError(ctx + ": unsupported projection_type '" + type + "'");
    }
    cam.validate();
    return cam;
}

}  // namespace

Reconstruction parse_reconstruction(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    const json* rec = &doc;
    if (doc.is_array()) {
        if (doc.empty()) throw SchemaError(path.string() + ": empty reconstruction array");
        rec = &doc[0];
    }
    if (!rec->is_object()) throw SchemaError(path.string() + ": reconstruction is not an object");

    if (!rec->contains("cameras") || !(*rec)["cameras"].is_object()) {
        throw SchemaError(path.string() + ": missing 'cameras'");
    }
    const json& cams = (*rec)["cameras"];
    if (cams.size() != 1) {
        throw SchemaError(path.string() + ": expected exactly one camera model, found " +
                          std::to_string(cams.size()));
    }
    Reconstruction out;
    out.camera = parse_camera(cams.begin().value(),
                              path.string() + " camera '" + cams.begin().key() + "'");

    if (!rec->contains("shots") || !(*rec)["shots"].is_object()) {
        throw SchemaError(path.string() + ": missing 'shots'");
    }
    for (const auto& [name, sj] : (*rec)["shots"].items()) {
        const std::string ctx = path.string() + " shot '" + name + "'";
        const int frame = frame_from_shot_name(name);
        // OpenSfM stores world-to-camera: Xc = R Xw + t, rotation as a Rodrigues vector.
        const auto q_wc =
            geom::UnitQuaternion::from_rotation_vector(parse_vec3(sj.at("rotation"), ctx));
        const auto t = parse_vec3(sj.at("translation"), ctx);
        geom::Pose3D pose;
        pose.rotation = q_wc.conjugate();
        pose.position = pose.rotation.rotate(t) * -1.0;
        const auto [it, fresh] = out.poses.emplace(frame, pose);
        (void)it;
        if (!fresh) {
            throw IntegrityError(ctx + ": frame " + std::to_string(frame) +
                                 " already covered by another shot");
        }
    }
    if (out.poses.size() < 2) {
        throw SchemaError(path.string() + ": need at least two shots to span frames");
    }

    if (rec->contains("points") && (*rec)["points"].is_object()) {
        for (const auto& [id, pj] : (*rec)["points"].items()) {
            out.points.push_back(
                parse_vec3(pj.at("coordinates"), path.string() + " point '" + id + "'"));
        }
    }
    return out;
}

GroundModel build_ground_model(const std::vector<geom::Vec3>& points) {
    GroundModel g;
    g.plane = geom::fit_plane(points);
    const geom::Vec3 n = g.plane.normal;
    const geom::Vec3 seed = std::abs(n.x) <= 0.9 ? geom::Vec3{1, 0, 0} : geom::Vec3{0, 1, 0};
    g.basis.u_axis = geom::normalized(seed - n * geom::dot(seed, n));
    g.basis.v_axis = geom::cross(n, g.basis.u_axis);

    geom::Vec3 c;
    for (const auto& p : points) c = c + p;
    c = c / static_cast<double>(points.size());
    g.basis.origin = c - n * (geom::dot(n, c) - g.plane.offset);
    return g;
}

const geom::Pose3D& DensePoses::at(int frame) const {
    if (!contains(frame)) throw GapError("no pose for frame " + std::to_string(frame), frame);
    return *poses[frame - first_frame];
}

DensePoses densify_poses(const KeyframePoseSet& keys, RotationMode mode,
                         const std::map<int, double>* deltas) {
    if (keys.empty()) throw ConfigError("no keyframe poses to densify");
    if (mode == RotationMode::InPlane && !deltas) {
        throw ConfigError("in-plane densification needs per-frame rotation deltas");
    }
    DensePoses dense;
    dense.first_frame = keys.begin()->first;
    dense.poses.resize(static_cast<size_t>(keys.rbegin()->first - dense.first_frame) + 1);

    for (auto it = keys.begin(); it != keys.end(); ++it) {
        dense.poses[it->first - dense.first_frame] = it->second;
        const auto next = std::next(it);
        if (next == keys.end()) break;
        const auto& [k0, p0] = *it;
        const auto& [k1, p1] = *next;
        for (int f = k0 + 1; f < k1; ++f) {
            const double u = static_cast<double>(f - k0) / static_cast<double>(k1 - k0);
            if (mode == RotationMode::Slerp) {
                dense.poses[f - dense.first_frame] = geom::interpolate_pose(p0, p1, u);
            } else {
                const auto d = deltas->find(f);
                if (d == deltas->end()) continue;  // no delta, no pose
                geom::Pose3D p;
                // Rotation about the optical axis, composed in the camera frame.
                p.rotation = p0.rotation * geom::UnitQuaternion::from_axis_angle({0, 0, 1},
                                                                                 d->second);
                p.position = p0.position + (p1.position - p0.position) * u;
                dense.poses[f - dense.first_frame] = p;
            }
        }
    }
    return dense;
}

tracks::WorldTrackSet unwrap_tracks(const tracks::ImageTrackSet& in, const DensePoses& poses,
                                    const geom::CameraIntrinsics& cam, const GroundModel& ground,
                                    Exec exec, reg::UnwrapReport* report) {
    const size_t n = in.entries.size();
    enum : unsigned char { Ok = 0, NoPose = 1, Degenerate = 2 };
    std::vector<std::optional<tracks::TrackEntry>> mapped(n);
    std::vector<unsigned char> status(n, Ok);
    std::vector<unsigned char> oob(n, 0);

    for_each_index(exec, static_cast<std::int64_t>(n), [&](std::int64_t i) {
        const tracks::TrackEntry& e = in.entries[i];
        if (!poses.contains(e.frame)) {
            status[i] = NoPose;
            return;
        }
        if (!geom::pixel_in_bounds(cam, e.pos)) oob[i] = 1;
        try {
            const geom::Ray ray = geom::pixel_to_ray(cam, poses.at(e.frame), e.pos);
            const geom::Vec3 hit = geom::ray_plane_intersect(ray, ground.plane);
            tracks::TrackEntry w = e;
            w.pos = geom::project_to_plane_2d(hit, ground.basis);
            w.world3d = hit;
            mapped[i] = std::move(w);
        } catch (const Error&) {
            // parallel ray, intersection behind the camera, or distortion
            // inversion failure: the detection has no ground-plane image
            status[i] = Degenerate;
        }
    });

    tracks::WorldTrackSet out;
    out.fps = in.fps;
    out.n_frames = in.n_frames;
    std::set<int> missing;
    long no_pose = 0, degenerate = 0, warnings = 0;
    for (size_t i = 0; i < n; ++i) {
        warnings += oob[i];
        if (mapped[i]) {
            out.entries.push_back(std::move(*mapped[i]));
        } else if (status[i] == NoPose) {
            ++no_pose;
            missing.insert(in.entries[i].frame);
        } else {
            ++degenerate;
        }
    }
    out.finalize();
    if (report) {
        report->total_entries = static_cast<long>(n);
        report->dropped_no_pose = no_pose;
        report->dropped_degenerate = degenerate;
        report->out_of_bounds_warnings = warnings;
        report->missing_frames.assign(missing.begin(), missing.end());
    }
    return out;
}

KeyframePoseSet load_pose_csv(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    std::string line;
    if (!std::getline(in, line) || io::trim(line) != "frame,qw,qx,qy,qz,x,y,z") {
        throw ParseError(path.string() + ":1: expected header 'frame,qw,qx,qy,qz,x,y,z'");
    }
    KeyframePoseSet poses;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (io::trim(line).empty()) continue;
        const std::string ctx = path.string() + ":" + std::to_string(lineno);
        const auto fields = io::split_csv(line);
        if (fields.size() != 8) {
            throw ParseError(ctx + ": expected 8 fields, got " + std::to_string(fields.size()));
        }
        const long long frame = io::parse_int(fields[0], ctx + " frame");
        if (frame < 0) throw ParseError(ctx + ": negative frame");
        geom::Pose3D pose;
        pose.rotation = {io::parse_double(fields[1], ctx + " qw"),
                         io::parse_double(fields[2], ctx + " qx"),
                         io::parse_double(fields[3], ctx + " qy"),
                         io::parse_double(fields[4], ctx + " qz")};
        if (std::abs(pose.rotation.norm() - 1.0) > 1e-6) {
            throw NormalizationError(ctx + ": quaternion is not unit length");
        }
        pose.rotation = pose.rotation.normalized();
        pose.position = {io::parse_double(fields[5], ctx + " x"),
                         io::parse_double(fields[6], ctx + " y"),
                         io::parse_double(fields[7], ctx + " z")};
        const auto [it, fresh] = poses.emplace(static_cast<int>(frame), pose);
        (void)it;
        if (!fresh) throw IntegrityError(ctx + ": duplicate frame " + std::to_string(frame));
    }
    return poses;
}

void write_pose_csv(const KeyframePoseSet& poses, const std::filesystem::path& path) {
    auto out = io::open_output(path);
    out << "frame,qw,qx,qy,qz,x,y,z\n";
    for (const auto& [frame, p] : poses) {
        out << frame << ',' << io::format_double(p.rotation.w) << ','
            << io::format_double(p.rotation.x) << ',' << io::format_double(p.rotation.y) << ','
            << io::format_double(p.rotation.z) << ',' << io::format_double(p.position.x) << ','
            << io::format_double(p.position.y) << ',' << io::format_double(p.position.z) << '\n';
    }
}

geom::CameraIntrinsics load_intrinsics(const std::filesystem::path& path) {
    const auto kv = io::read_keyvalue(path);
    geom::CameraIntrinsics cam;
    const auto get = [&](const char* key) {
        const auto it = kv.find(key);
        if (it == kv.end()) {
            throw ConfigError(path.string() + ": missing intrinsics key '" + std::string(key) +
                              "'");
        }
        return io::parse_double(it->second, path.string() + " " + key);
    };
    cam.fx = get("fx");
    cam.fy = get("fy");
    cam.cx = get("cx");
    cam.cy = get("cy");
    cam.k1 = get("k1");
    cam.k2 = get("k2");
    cam.width = get("width");
    cam.height = get("height");
    cam.validate();
    return cam;
}

void write_intrinsics(const geom::CameraIntrinsics& cam, const std::filesystem::path& path) {
    auto out = io::open_output(path);
    out << "fx=" << io::format_double(cam.fx) << '\n';
    out << "fy=" << io::format_double(cam.fy) << '\n';
    out << "cx=" << io::format_double(cam.cx) << '\n';
    out << "cy=" << io::format_double(cam.cy) << '\n';
    out << "k1=" << io::format_double(cam.k1) << '\n';
    out << "k2=" << io::format_double(cam.k2) << '\n';
    out << "width=" << io::format_double(cam.width) << '\n';
    out << "height=" << io::format_double(cam.height) << '\n';
}

std::vector<geom::Vec3> load_point_cloud_csv(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    std::string line;
    if (!std::getline(in, line) || io::trim(line) != "x,y,z") {
        throw ParseError(path.string() + ":1: expected header 'x,y,z'");
    }
    std::vector<geom::Vec3> points;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (io::trim(line).empty()) continue;
        const std::string ctx = path.string() + ":" + std::to_string(lineno);
        const auto fields = io::split_csv(line);
        if (fields.size() != 3) {
            throw ParseError(ctx + ": expected 3 fields, got " + std::to_string(fields.size()));
        }
        points.push_back({io::parse_double(fields[0], ctx + " x"),
                          io::parse_double(fields[1], ctx + " y"),
                          io::parse_double(fields[2], ctx + " z")});
    }
    return points;
}

void write_point_cloud_csv(const std::vector<geom::Vec3>& points,
                           const std::filesystem::path& path) {
    auto out = io::open_output(path);
    out << "x,y,z\n";
    for (const auto& p : points) {
        out << io::format_double(p.x) << ',' << io::format_double(p.y) << ','
            << io::format_double(p.z) << '\n';
    }
}

std::map<int, double> load_deltas_csv(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    std::string line;
    if (!std::getline(in, line) || io::trim(line) != "frame,delta_rad") {
        throw ParseError(path.string() + ":1: expected header 'frame,delta_rad'");
    }
    std::map<int, double> deltas;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (io::trim(line).empty()) continue;
        const std::string ctx = path.string() + ":" + std::to_string(lineno);
        const auto fields = io::split_csv(line);
        if (fields.size() != 2) {
            throw ParseError(ctx + ": expected 2 fields, got " + std::to_string(fields.size()));
        }
        const long long frame = io::parse_int(fields[0], ctx + " frame");
        const double delta = io::parse_double(fields[1], ctx + " delta_rad");
        const auto [it, fresh] = deltas.emplace(static_cast<int>(frame), delta);
        (void)it;
        if (!fresh) throw IntegrityError(ctx + ": duplicate frame " + std::to_string(frame));
    }
    return deltas;
}

void write_deltas_csv(const std::map<int, double>& deltas, const std::filesystem::path& path) {
    auto out = io::open_output(path);
    out << "frame,delta_rad\n";
    for (const auto& [frame, d] : deltas) {
        out << frame << ',' << io::format_double(d) << '\n';
    }
}

}  // namespace unwrap::sfm
