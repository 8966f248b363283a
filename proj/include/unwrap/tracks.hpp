#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "unwrap/geometry.hpp"

namespace unwrap::tracks {

enum class Keypoint { Head, Tail, Point };

std::string_view to_string(Keypoint kp);
Keypoint keypoint_from_string(std::string_view s);  // throws ParseError

struct TrackEntry {
    int frame = 0;
    std::string individual;
    Keypoint keypoint = Keypoint::Point;
    geom::Vec2 pos;
    std::optional<double> confidence;
    std::optional<geom::Vec3> world3d;  // populated by the pose-based unwrap
};

/// Canonical entry order used in files and for deterministic iteration.
bool entry_key_less(const TrackEntry& a, const TrackEntry& b);

/// Keypoint tracks keyed by (frame, individual, keypoint). Entries are kept
/// sorted in canonical order and unique per key. Immutable by convention
/// after construction; all pipeline stages produce fresh sets.
struct TrackSet {
    double fps = 29.97;
    int n_frames = 0;
    std::vector<TrackEntry> entries;

    /// Sorts entries canonically and recomputes n_frames if it is behind
    /// the data. Throws IntegrityError on duplicate keys.
    void finalize();

    const TrackEntry* find(int frame, std::string_view individual, Keypoint kp) const;
};

struct ImageTrackSet : TrackSet {};
struct WorldTrackSet : TrackSet {};

/// CSV schema: header `frame,individual_id,keypoint,x,y,confidence`;
/// confidence may be empty. A sidecar `<path>.meta` key-value file carries
/// fps and n_frames; without it fps defaults to 29.97 and n_frames to
/// max frame + 1.
TrackSet read_tracks(const std::filesystem::path& path);

/// Inverse of read_tracks: CSV plus `<path>.meta` sidecar. Coordinates are
/// serialized with 9 significant digits. When any entry carries 3D
/// coordinates, they are written to `<path stem>_3d.csv` as
/// `frame,individual_id,keypoint,x,y,z`.
void write_tracks(const TrackSet& set, const std::filesystem::path& path);

/// Landmark-track quality filter: drops whole tracks with <= min_samples
/// points, and whole tracks containing any displacement > max_jump pixels
/// between consecutive frames (frame delta of exactly 1).
ImageTrackSet filter_landmark_tracks(const ImageTrackSet& set, long min_samples = 400,
                                     double max_jump = 10.0);

/// Group entries of one (individual, keypoint) track in frame order;
/// returns indices into set.entries sorted by (individual, keypoint, frame).
struct TrackGroup {
    std::string individual;
    Keypoint keypoint;
    std::vector<size_t> entry_indices;  // ascending frame
};
std::vector<TrackGroup> group_by_track(const TrackSet& set);

}  // namespace unwrap::tracks
