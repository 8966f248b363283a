#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "unwrap/geometry.hpp"
#include "unwrap/parallel.hpp"
#include "unwrap/tracks.hpp"

namespace unwrap::reg {

/// Per-frame rigid transforms: entry at frame f (>= 1) maps frame-f image
/// coordinates to frame-(f-1) image coordinates.
struct TransformChain {
    std::map<int, geom::Rigid2D> transforms;
    std::vector<int> gaps;  // interior frames with no transform, recorded at load

    int max_frame() const { return transforms.empty() ? 0 : transforms.rbegin()->first; }

    /// Cumulative frame-to-frame-0 transforms for f in [0, last]; index f
    /// holds T_{f,0}. One incremental composition per frame. Frames at or
    /// beyond the first missing entry are nullopt.
    std::vector<std::optional<geom::Rigid2D>> cumulative_to_frame0(int last) const;
};

/// Chain CSV: header `frame,theta_rad,tx,ty`, frame >= 1. Duplicate frames
/// raise IntegrityError; missing interior frames are recorded as gaps.
TransformChain load_chain(const std::filesystem::path& path);
void write_chain(const TransformChain& chain, const std::filesystem::path& path);

/// Fits one Rigid2D per consecutive frame pair from co-visible landmark
/// positions (frame f -> frame f-1). Pairs with fewer than min_pairs
/// co-visible landmarks become gaps. Raises EmptyChainError when no pair
/// anywhere has enough co-visibility.
TransformChain estimate_chain_from_landmarks(const tracks::ImageTrackSet& landmarks,
                                             int min_pairs = 3);

/// 2x2 orthogonal change of axes between image and world conventions.
struct AxisConvention {
    // row-major
    double m00 = 1.0, m01 = 0.0, m10 = 0.0, m11 = 1.0;

    static AxisConvention identity() { return {}; }
    /// Image y-down to world y-up (the default).
    static AxisConvention yflip() { return {1.0, 0.0, 0.0, -1.0}; }

    geom::Vec2 apply(geom::Vec2 p) const { return {m00 * p.x + m01 * p.y, m10 * p.x + m11 * p.y}; }
    geom::Vec2 apply_transposed(geom::Vec2 p) const {
        return {m00 * p.x + m10 * p.y, m01 * p.x + m11 * p.y};
    }
    void validate() const;  // QtQ = I within 1e-12, else ConfigError
};

struct UnwrapReport {
    long total_entries = 0;
    long dropped_no_transform = 0;   // frame outside chain coverage
    long dropped_no_pose = 0;        // pose-based path: no pose for the frame
    long dropped_degenerate = 0;     // parallel ray / behind camera
    long out_of_bounds_warnings = 0; // pixels outside the sensor, still mapped
    std::vector<int> missing_frames; // sorted, unique
};

/// Maps every entry at frame f through q . T_{f,0}: the cumulative chain acts
/// in pixel coordinates, the axis convention converts the frame-0 result to
/// world axes. Frames not covered by the chain are dropped and counted.
/// Output units stay pixels of frame 0.
tracks::WorldTrackSet unwrap_tracks(const tracks::ImageTrackSet& tracks,
                                    const TransformChain& chain, const AxisConvention& q,
                                    Exec exec = Exec::Parallel, UnwrapReport* report = nullptr);

}  // namespace unwrap::reg
