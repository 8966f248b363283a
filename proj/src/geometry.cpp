#include "unwrap/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "unwrap/errors.hpp"

namespace unwrap::geom {

double wrap_angle(double a) {
    const double two_pi = 2.0 * M_PI;
    a = std::fmod(a, two_pi);
    if (a <= -M_PI) a += two_pi;
    if (a > M_PI) a -= two_pi;
    return a;
}

Rigid2D Rigid2D::inverse() const {
    const double c = std::cos(theta), s = std::sin(theta);
    // R^T t, negated
    return {-theta, {-(c * t.x + s * t.y), -(-s * t.x + c * t.y)}};
}

Rigid2D compose(const Rigid2D& a, const Rigid2D& b) {
    const double c = std::cos(a.theta), s = std::sin(a.theta);
    return {a.theta + b.theta,
            {c * b.t.x - s * b.t.y + a.t.x, s * b.t.x + c * b.t.y + a.t.y}};
}

Rigid2D chain_to_frame0(std::span<const std::optional<Rigid2D>> chain, int f) {
    Rigid2D acc = Rigid2D::identity();
    for (int j = 1; j <= f; ++j) {
        if (j - 1 >= static_cast<int>(chain.size()) || !chain[j - 1]) {
            throw GapError("chain has no transform for frame " + std::to_string(j), j);
        }
        acc = compose(acc, *chain[j - 1]);
    }
    return acc;
}

Rigid2D chain_to_frame0(std::span<const Rigid2D> chain, int f) {
    Rigid2D acc = Rigid2D::identity();
    for (int j = 1; j <= f; ++j) {
        if (j - 1 >= static_cast<int>(chain.size())) {
            throw GapError("chain has no transform for frame " + std::to_string(j), j);
        }
        acc = compose(acc, chain[j - 1]);
    }
    return acc;
}

UnitQuaternion UnitQuaternion::from_axis_angle(Vec3 axis, double angle) {
    const double n = geom::norm(axis);
    if (n == 0.0) return {};
    const double h = 0.5 * angle;
    const double s = std::sin(h) / n;
    return {std::cos(h), axis.x * s, axis.y * s, axis.z * s};
}

UnitQuaternion UnitQuaternion::from_rotation_vector(Vec3 rv) {
    const double angle = geom::norm(rv);
    if (angle < 1e-300) return {};
    return from_axis_angle(rv, angle);
}

UnitQuaternion UnitQuaternion::normalized() const {
    const double n = norm();
    if (n == 0.0) throw NormalizationError("cannot normalize zero quaternion");
    return {w / n, x / n, y / n, z / n};
}

Vec3 UnitQuaternion::rotate(Vec3 v) const {
    // v' = v + 2 w (q_v x v) + 2 q_v x (q_v x v)
    const Vec3 qv{x, y, z};
    const Vec3 t = cross(qv, v) * 2.0;
    return v + t * w + cross(qv, t);
}

std::array<double, 9> UnitQuaternion::to_matrix() const {
    const double xx = x * x, yy = y * y, zz = z * z;
    const double xy = x * y, xz = x * z, yz = y * z;
    const double wx = w * x, wy = w * y, wz = w * z;
    return {1 - 2 * (yy + zz), 2 * (xy - wz),     2 * (xz + wy),
            2 * (xy + wz),     1 - 2 * (xx + zz), 2 * (yz - wx),
            2 * (xz - wy),     2 * (yz + wx),     1 - 2 * (xx + yy)};
}

UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b) {
    return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

double quat_dot(const UnitQuaternion& a, const UnitQuaternion& b) {
    return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

double rotation_angle_between(const UnitQuaternion& a, const UnitQuaternion& b) {
    // atan2 of the relative rotation keeps full precision for tiny angles,
    // where acos of the dot product bottoms out near sqrt(eps).
    const UnitQuaternion rel = a.conjugate() * b;
    const double v = std::sqrt(rel.x * rel.x + rel.y * rel.y + rel.z * rel.z);
    return 2.0 * std::atan2(v, std::abs(rel.w));
}

UnitQuaternion slerp(const UnitQuaternion& q0, const UnitQuaternion& q1, double u) {
    if (std::abs(q0.norm() - 1.0) > 1e-6 || std::abs(q1.norm() - 1.0) > 1e-6) {
        throw NormalizationError("slerp requires unit quaternions");
    }
    if (u == 0.0) return q0;

    UnitQuaternion a = q0.normalized();
    UnitQuaternion b = q1.normalized();
    double d = quat_dot(a, b);
    if (d < 0.0) {  // shorter arc
        b = -b;
        d = -d;
    }
    if (u == 1.0) return b;

    if (d > 1.0 - 1e-12) {
        // Nearly identical rotations: linear blend, renormalized.
        UnitQuaternion r{a.w + (b.w - a.w) * u, a.x + (b.x - a.x) * u,
                         a.y + (b.y - a.y) * u, a.z + (b.z - a.z) * u};
        return r.normalized();
    }
    const double omega = std::acos(std::clamp(d, -1.0, 1.0));
    const double so = std::sin(omega);
    const double c0 = std::sin((1.0 - u) * omega) / so;
    const double c1 = std::sin(u * omega) / so;
    UnitQuaternion r{c0 * a.w + c1 * b.w, c0 * a.x + c1 * b.x,
                     c0 * a.y + c1 * b.y, c0 * a.z + c1 * b.z};
    return r.normalized();
}

Pose3D interpolate_pose(const Pose3D& p0, const Pose3D& p1, double u) {
    return {slerp(p0.rotation, p1.rotation, u),
            p0.position * (1.0 - u) + p1.position * u};
}

void CameraIntrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("intrinsics: focal lengths must be positive");
    if (cx < 0.0 || cx > width || cy < 0.0 || cy > height) {
        throw ConfigError("intrinsics: principal point outside sensor");
    }
    for (double v : {fx, fy, cx, cy, k1, k2, width, height}) {
        if (!std::isfinite(v)) throw ConfigError("intrinsics: non-finite value");
    }
}

namespace {

// Cyclic Jacobi sweeps for a symmetric 3x3 matrix. A is destroyed; V ends
// up with eigenvectors in columns, d with eigenvalues (unordered).
void jacobi3(double A[3][3], double V[3][3], double d[3]) {
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) V[i][j] = (i == j) ? 1.0 : 0.0;

    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = std::abs(A[0][1]) + std::abs(A[0][2]) + std::abs(A[1][2]);
        if (off == 0.0) break;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                if (A[p][q] == 0.0) continue;
                const double diff = A[q][q] - A[p][p];
                double t;
                if (std::abs(A[p][q]) < std::abs(diff) * 1e-36) {
                    t = A[p][q] / diff;
                } else {
                    const double phi = diff / (2.0 * A[p][q]);
                    t = 1.0 / (std::abs(phi) + std::sqrt(phi * phi + 1.0));
                    if (phi < 0.0) t = -t;
                }
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);
                const double h = t * A[p][q];
                A[p][p] -= h;
                A[q][q] += h;
                A[p][q] = 0.0;
                for (int i = 0; i < 3; ++i) {
                    if (i != p && i != q) {
                        const double aip = (i < p) ? A[i][p] : A[p][i];
                        const double aiq = (i < q) ? A[i][q] : A[q][i];
                        const double nip = aip - s * (aiq + tau * aip);
                        const double niq = aiq + s * (aip - tau * aiq);
                        if (i < p) A[i][p] = nip; else A[p][i] = nip;
                        if (i < q) A[i][q] = niq; else A[q][i] = niq;
                    }
                }
                for (int i = 0; i < 3; ++i) {
                    const double vip = V[i][p], viq = V[i][q];
                    V[i][p] = vip - s * (viq + tau * vip);
                    V[i][q] = viq + s * (vip - tau * viq);
                }
            }
        }
    }
    d[0] = A[0][0];
    d[1] = A[1][1];
    d[2] = A[2][2];
}

}  // namespace

Plane fit_plane(std::span<const Vec3> points) {
    if (points.size() < 3) {
        throw DegenerateGeometryError("fit_plane needs at least 3 points, got " +
                                      std::to_string(points.size()));
    }
    Vec3 centroid{};
    for (const Vec3& p : points) centroid = centroid + p;
    centroid = centroid / static_cast<double>(points.size());

    double C[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    for (const Vec3& p : points) {
        const Vec3 d = p - centroid;
        C[0][0] += d.x * d.x; C[0][1] += d.x * d.y; C[0][2] += d.x * d.z;
        C[1][1] += d.y * d.y; C[1][2] += d.y * d.z;
        C[2][2] += d.z * d.z;
    }
    C[1][0] = C[0][1]; C[2][0] = C[0][2]; C[2][1] = C[1][2];

    double V[3][3], d[3];
    jacobi3(C, V, d);

    int order[3] = {0, 1, 2};
    std::sort(order, order + 3, [&](int a, int b) { return d[a] < d[b]; });
    const double l_min = d[order[0]], l_mid = d[order[1]], l_max = d[order[2]];
    (void)l_min;
    if (!(l_max > 0.0) || l_mid <= l_max * 1e-12) {
        throw DegenerateGeometryError("fit_plane: rank-deficient point set");
    }

    Vec3 n{V[0][order[0]], V[1][order[0]], V[2][order[0]]};
    n = normalized(n);
    if (n.z < 0.0 || (n.z == 0.0 && (n.y < 0.0 || (n.y == 0.0 && n.x < 0.0)))) {
        n = n * -1.0;
    }
    return {n, dot(n, centroid)};
}

bool pixel_in_bounds(const CameraIntrinsics& intr, Vec2 pixel) {
    return pixel.x >= 0.0 && pixel.x <= intr.width && pixel.y >= 0.0 && pixel.y <= intr.height;
}

namespace {

Vec2 undistort_normalized(const CameraIntrinsics& intr, Vec2 distorted) {
    if (intr.k1 == 0.0 && intr.k2 == 0.0) return distorted;
    Vec2 u = distorted;
    for (int it = 0; it < 20; ++it) {
        const double r2 = u.x * u.x + u.y * u.y;
        const double f = 1.0 + intr.k1 * r2 + intr.k2 * r2 * r2;
        const Vec2 next{distorted.x / f, distorted.y / f};
        const double step = std::max(std::abs(next.x - u.x), std::abs(next.y - u.y));
        u = next;
        if (step < 1e-10) return u;
    }
    throw DistortionError("distortion inversion did not converge");
}

}  // namespace

Ray pixel_to_ray(const CameraIntrinsics& intr, const Pose3D& pose, Vec2 pixel) {
    const Vec2 distorted{(pixel.x - intr.cx) / intr.fx, (pixel.y - intr.cy) / intr.fy};
    const Vec2 n = undistort_normalized(intr, distorted);
    const Vec3 dir_cam = normalized({n.x, n.y, 1.0});
    return {pose.position, pose.rotation.rotate(dir_cam)};
}

std::optional<Vec2> project_point(const CameraIntrinsics& intr, const Pose3D& pose, Vec3 world) {
    const Vec3 cam = pose.untransform(world);
    if (cam.z <= 0.0) return std::nullopt;
    const double xn = cam.x / cam.z, yn = cam.y / cam.z;
    const double r2 = xn * xn + yn * yn;
    const double f = 1.0 + intr.k1 * r2 + intr.k2 * r2 * r2;
    return Vec2{intr.fx * xn * f + intr.cx, intr.fy * yn * f + intr.cy};
}

Vec3 ray_plane_intersect(const Ray& ray, const Plane& plane) {
    const double denom = dot(plane.normal, ray.direction);
    if (std::abs(denom) < 1e-12) throw ParallelRayError("ray parallel to plane");
    const double s = (plane.offset - dot(plane.normal, ray.origin)) / denom;
    if (s <= 0.0) throw BehindCameraError("plane intersection behind the ray origin");
    return ray.origin + ray.direction * s;
}

Vec2 project_to_plane_2d(Vec3 point, const PlaneBasis& basis) {
    const Vec3 d = point - basis.origin;
    return {dot(d, basis.u_axis), dot(d, basis.v_axis)};
}

Rigid2D rigid_fit_2d(std::span<const Vec2> src, std::span<const Vec2> dst) {
    if (src.size() != dst.size()) {
        throw DegenerateGeometryError("rigid_fit_2d: point lists differ in length");
    }
    if (src.size() < 2) {
        throw DegenerateGeometryError("rigid_fit_2d needs at least 2 point pairs");
    }
    for (size_t i = 0; i < src.size(); ++i) {
        if (!std::isfinite(src[i].x) || !std::isfinite(src[i].y) ||
            !std::isfinite(dst[i].x) || !std::isfinite(dst[i].y)) {
            throw DegenerateGeometryError("rigid_fit_2d: non-finite coordinates");
        }
    }
    Vec2 cs{}, cd{};
    for (size_t i = 0; i < src.size(); ++i) {
        cs += src[i];
        cd += dst[i];
    }
    const double inv_n = 1.0 / static_cast<double>(src.size());
    cs = cs * inv_n;
    cd = cd * inv_n;

    // Cross-covariance of the centered sets. The closed-form proper-rotation
    // optimum is theta = atan2(Sxy - Syx, Sxx + Syy), which is exactly the
    // det(+1)-corrected solution of the 2x2 orthogonal Procrustes problem.
    double sxx = 0, sxy = 0, syx = 0, syy = 0, spread = 0;
    for (size_t i = 0; i < src.size(); ++i) {
        const Vec2 s = src[i] - cs;
        const Vec2 p = dst[i] - cd;
        sxx += s.x * p.x;
        sxy += s.x * p.y;
        syx += s.y * p.x;
        syy += s.y * p.y;
        spread += s.x * s.x + s.y * s.y;
    }
    if (spread == 0.0) {
        throw DegenerateGeometryError("rigid_fit_2d: all source points coincident");
    }
    const double theta = std::atan2(sxy - syx, sxx + syy);
    const double c = std::cos(theta), s = std::sin(theta);
    const Vec2 t{cd.x - (c * cs.x - s * cs.y), cd.y - (s * cs.x + c * cs.y)};
    return {theta, t};
}

}  // namespace unwrap::geom
