#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace unwrap::geom {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }
    Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    bool operator==(const Vec2&) const = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(Vec3 o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(Vec3 o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    bool operator==(const Vec3&) const = default;
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalized(Vec3 v) { return v / norm(v); }

/// Wrap an angle into (-pi, pi].
double wrap_angle(double a);

/// 2D rotation + translation, column-vector convention: p -> R(theta) p + t.
struct Rigid2D {
    double theta = 0.0;  // radians
    Vec2 t;

    Vec2 apply(Vec2 p) const {
        const double c = std::cos(theta), s = std::sin(theta);
        return {c * p.x - s * p.y + t.x, s * p.x + c * p.y + t.y};
    }
    Rigid2D inverse() const;
    static Rigid2D identity() { return {}; }
};

/// Composition applying b first, then a: x -> R_a (R_b x + t_b) + t_a.
Rigid2D compose(const Rigid2D& a, const Rigid2D& b);

/// Transform from frame f to frame 0 by folding the per-frame chain, where
/// chain[j-1] (or the entry at index j-1) maps frame-j coordinates to
/// frame-(j-1) coordinates. f = 0 yields the identity. A missing entry at
/// j <= f raises GapError naming frame j.
Rigid2D chain_to_frame0(std::span<const std::optional<Rigid2D>> chain, int f);
Rigid2D chain_to_frame0(std::span<const Rigid2D> chain, int f);

struct UnitQuaternion {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    static UnitQuaternion from_axis_angle(Vec3 axis, double angle);
    /// Rodrigues vector: direction = axis, magnitude = angle in radians.
    static UnitQuaternion from_rotation_vector(Vec3 rv);

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
    UnitQuaternion normalized() const;
    UnitQuaternion conjugate() const { return {w, -x, -y, -z}; }
    UnitQuaternion operator-() const { return {-w, -x, -y, -z}; }

    Vec3 rotate(Vec3 v) const;
    /// Row-major 3x3 rotation matrix.
    std::array<double, 9> to_matrix() const;
};

UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b);
double quat_dot(const UnitQuaternion& a, const UnitQuaternion& b);
/// Rotation angle between the rotations represented by a and b, in [0, pi].
double rotation_angle_between(const UnitQuaternion& a, const UnitQuaternion& b);

/// Constant-angular-velocity interpolation along the shorter arc.
/// u = 0 returns q0 exactly; u = 1 returns q1 up to sign. Inputs more than
/// 1e-6 away from unit norm raise NormalizationError.
UnitQuaternion slerp(const UnitQuaternion& q0, const UnitQuaternion& q1, double u);

/// Camera pose: rotation maps camera-frame vectors to world frame,
/// position is the camera center in world units.
struct Pose3D {
    UnitQuaternion rotation;
    Vec3 position;

    Vec3 transform(Vec3 p_camera) const { return rotation.rotate(p_camera) + position; }
    Vec3 untransform(Vec3 p_world) const { return rotation.conjugate().rotate(p_world - position); }
};

/// Linear position, slerp rotation.
Pose3D interpolate_pose(const Pose3D& p0, const Pose3D& p1, double u);

/// Pinhole camera with two-coefficient radial distortion.
/// Convention: +z along the optical axis, +x right, +y down in the image.
struct CameraIntrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    double k1 = 0.0;
    double k2 = 0.0;
    double width = 0.0;
    double height = 0.0;

    void validate() const;  // throws ConfigError
};

struct Plane {
    Vec3 normal;     // unit length
    double offset;   // normal . p = offset for on-plane points
};

/// Total-least-squares plane: normal is the direction of least variance
/// about the centroid. Sign convention: normal.z >= 0, ties broken by y
/// then x. Fewer than 3 points or a rank-deficient (collinear) set raises
/// DegenerateGeometryError.
Plane fit_plane(std::span<const Vec3> points);

/// Orthonormal 2D chart on a plane.
struct PlaneBasis {
    Vec3 origin;
    Vec3 u_axis;
    Vec3 v_axis;
};

struct Ray {
    Vec3 origin;
    Vec3 direction;  // unit length
};

bool pixel_in_bounds(const CameraIntrinsics& intr, Vec2 pixel);

/// Viewing ray from the camera center through a pixel. Undistortion inverts
/// the radial model iteratively (<= 20 iterations, 1e-10 convergence;
/// bypassed when k1 = k2 = 0) and raises DistortionError on non-convergence.
Ray pixel_to_ray(const CameraIntrinsics& intr, const Pose3D& pose, Vec2 pixel);

/// Pinhole projection of a world point; nullopt when at or behind the camera.
std::optional<Vec2> project_point(const CameraIntrinsics& intr, const Pose3D& pose, Vec3 world);

/// origin + s * direction with s = (offset - n.origin)/(n.direction).
/// Raises ParallelRayError when |n.direction| < 1e-12 and BehindCameraError
/// when the intersection is not in front of the origin (s <= 0).
Vec3 ray_plane_intersect(const Ray& ray, const Plane& plane);

/// Chart coordinates ((p - origin).u, (p - origin).v). Isometric for
/// on-plane points.
Vec2 project_to_plane_2d(Vec3 point, const PlaneBasis& basis);

/// Least-squares rotation + translation (no scale, no reflection) minimizing
/// sum |dst_i - (R src_i + t)|^2. Needs >= 2 pairs of equal length with
/// finite coordinates; all-coincident src raises DegenerateFit via
/// DegenerateGeometryError.
Rigid2D rigid_fit_2d(std::span<const Vec2> src, std::span<const Vec2> dst);

}  // namespace unwrap::geom
