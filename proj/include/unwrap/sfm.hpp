#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "unwrap/geometry.hpp"
#include "unwrap/parallel.hpp"
#include "unwrap/registration.hpp"
#include "unwrap/tracks.hpp"

// Unwrapping against sparse camera poses: keyframe poses from a structure-from-motion
// reconstruction (or a pose CSV) are densified to every frame, then each detection is
// back-projected onto a ground plane fitted to the reconstruction's point cloud.

namespace unwrap::sfm {

// Camera-to-world poses keyed by frame number. Sparse: only keyframes are present.
using KeyframePoseSet = std::map<int, geom::Pose3D>;

struct Reconstruction {
    KeyframePoseSet poses;
    geom::CameraIntrinsics camera;
    std::vector<geom::Vec3> points;
};

// OpenSfM reconstruction.json: top-level array (first element used) or single object.
// Requires exactly one camera model and at least two shots. The frame number of a shot
// is the last run of digits in its name ("frame_000123.jpg" -> 123).
Reconstruction parse_reconstruction(const std::filesystem::path& path);

struct GroundModel {
    geom::Plane plane;
    geom::PlaneBasis basis;
};

// Fits a plane to the point cloud and attaches a deterministic in-plane basis:
// u is the world x axis projected into the plane (y axis when the normal is nearly x),
// v completes the right-handed frame.
GroundModel build_ground_model(const std::vector<geom::Vec3>& points);

enum class RotationMode {
    Slerp,    // interpolate orientation between bracketing keyframes
    InPlane,  // nearest preceding keyframe orientation composed with a per-frame
              // in-plane (optical axis) rotation delta
};

// Poses for every frame in [first_frame, first_frame + poses.size()).
struct DensePoses {
    int first_frame = 0;
    std::vector<std::optional<geom::Pose3D>> poses;

    bool contains(int frame) const {
        const int i = frame - first_frame;
        return i >= 0 && i < static_cast<int>(poses.size()) && poses[i].has_value();
    }
    const geom::Pose3D& at(int frame) const;
};

// Positions are interpolated linearly between bracketing keyframes in both modes.
// InPlane requires `deltas` (frame -> rotation about the optical axis relative to the
// nearest preceding keyframe, radians); a frame with no delta gets no pose.
DensePoses densify_poses(const KeyframePoseSet& keys, RotationMode mode,
                         const std::map<int, double>* deltas = nullptr);

// Back-projects each detection through its frame's pose onto the ground plane.
// Entries at frames without a pose are dropped; rays parallel to the plane or hitting
// it behind the camera are dropped as degenerate. Pixels outside the image are still
// unwrapped but counted in out_of_bounds_warnings. Output positions are plane
// coordinates in the ground basis; the 3D intersection point is kept alongside.
tracks::WorldTrackSet unwrap_tracks(const tracks::ImageTrackSet& in, const DensePoses& poses,
                                    const geom::CameraIntrinsics& cam, const GroundModel& ground,
                                    Exec exec = Exec::Parallel,
                                    reg::UnwrapReport* report = nullptr);

// CSV "frame,qw,qx,qy,qz,x,y,z": camera-to-world rotation and camera position.
KeyframePoseSet load_pose_csv(const std::filesystem::path& path);
void write_pose_csv(const KeyframePoseSet& poses, const std::filesystem::path& path);

// Key-value file with fx, fy, cx, cy, k1, k2, width, height.
geom::CameraIntrinsics load_intrinsics(const std::filesystem::path& path);
void write_intrinsics(const geom::CameraIntrinsics& cam, const std::filesystem::path& path);

// CSV "x,y,z".
std::vector<geom::Vec3> load_point_cloud_csv(const std::filesystem::path& path);
void write_point_cloud_csv(const std::vector<geom::Vec3>& points,
                           const std::filesystem::path& path);

// CSV "frame,delta_rad".
std::map<int, double> load_deltas_csv(const std::filesystem::path& path);
void write_deltas_csv(const std::map<int, double>& deltas, const std::filesystem::path& path);

}  // namespace unwrap::sfm
