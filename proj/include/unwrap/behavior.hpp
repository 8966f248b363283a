#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "unwrap/geometry.hpp"
#include "unwrap/parallel.hpp"
#include "unwrap/tracks.hpp"

// Collective-motion metrics over cleaned world-frame tracks. Every distance and
// speed is normalized by the median body length, so the metrics are independent
// of the world coordinate scale.

namespace unwrap::behavior {

struct CleanParams {
    double min_confidence = 0.9;  // entries below are dropped; missing confidence passes
    double jump_factor = 2.0;     // drop a point moving more than this many BL in one frame
};

struct Removal {
    int frame = 0;
    std::string individual;
    tracks::Keypoint keypoint = tracks::Keypoint::Head;
    std::string reason;  // "low_confidence", "jump", "degenerate", "length_outlier"
};

// Head/tail positions on a dense (frame x individual) grid. Only head and tail
// keypoint entries participate; anything else in the input is ignored.
struct CleanedTracks {
    double fps = 29.97;
    int n_frames = 0;
    double body_length = 0.0;             // median |head - tail| after the confidence pass
    std::vector<std::string> individuals;  // natural-sorted unique ids
    std::vector<std::optional<geom::Vec2>> head;  // [frame * n_individuals() + i]
    std::vector<std::optional<geom::Vec2>> tail;
    std::vector<Removal> removed;

    int n_individuals() const { return static_cast<int>(individuals.size()); }
    const std::optional<geom::Vec2>& head_at(int frame, int i) const {
        return head[static_cast<size_t>(frame) * individuals.size() + i];
    }
    const std::optional<geom::Vec2>& tail_at(int frame, int i) const {
        return tail[static_cast<size_t>(frame) * individuals.size() + i];
    }
    // Midpoint of head and tail; absent unless both survive.
    std::optional<geom::Vec2> centroid_at(int frame, int i) const {
        const auto& h = head_at(frame, i);
        const auto& t = tail_at(frame, i);
        if (!h || !t) return std::nullopt;
        return (*h + *t) / 2.0;
    }
};

// Pass order: confidence filter, then body length (median over surviving
// head-tail pairs), then the jump filter. A jump is a displacement of more than
// jump_factor * body_length between a kept point and a kept point at exactly
// the previous frame; the later point is dropped. Throws when no head-tail pair
// survives the confidence pass (body length undefined).
CleanedTracks clean_tracks(const tracks::WorldTrackSet& raw, const CleanParams& params = {});

// Unit tail-to-head vectors with length-outlier rejection.
struct BodyVectorSeries {
    int n_frames = 0;
    std::vector<std::string> individuals;
    std::vector<std::optional<geom::Vec2>> unit;  // [frame * individuals.size() + i]
    double mean_length = 0.0;
    double sigma_length = 0.0;  // population
    std::vector<Removal> removed;

    const std::optional<geom::Vec2>& at(int frame, int i) const {
        return unit[static_cast<size_t>(frame) * individuals.size() + i];
    }
};

// Zero-length vectors are dropped first ("degenerate"); the length mean and
// population sigma are then taken over the rest, and vectors outside
// [mean - sigma_factor*sigma, mean + sigma_factor*sigma] are dropped
// ("length_outlier"). Boundary lengths survive.
BodyVectorSeries body_vectors(const CleanedTracks& clean, double sigma_factor = 2.0);

struct FrameMetrics {
    int frame = 0;
    std::optional<double> polarization;    // |mean unit body vector|, needs >= 1 vector
    std::optional<geom::Vec2> mean_dir;    // unit; absent when polarization < 1e-15
    std::optional<double> mean_pair_dist;  // BL, needs >= 2 present individuals
    std::optional<double> max_pair_dist;   // BL
    std::optional<double> pearson_r;       // distance-from-centroid vs alignment
};

// Parallel arrays indexed [frame * n_individuals + i].
struct IndividualMetrics {
    std::vector<std::optional<double>> alignment;      // unit body vector . mean_dir
    std::vector<std::optional<double>> speed;          // BL/s, backward difference
    std::vector<std::optional<double>> dist_centroid;  // BL, from the herd centroid
    std::vector<std::optional<double>> nn_dist;        // BL, nearest other individual
};

struct BinnedRow {
    int bin = 0;
    int start_frame = 0;
    std::optional<double> mean_speed;         // BL/s
    std::optional<double> mean_polarization;
};

// Least-squares polynomial smoothing. Interior points take the fit value at the
// window center; the first and last half-windows take the fit over the first or
// last full window evaluated at their own positions. Absent values split the
// series into independently smoothed runs; a run shorter than the window is
// passed through unchanged and flags `warned`.
struct SmoothResult {
    std::vector<std::optional<double>> values;
    bool warned = false;
};
SmoothResult savgol_smooth(const std::vector<std::optional<double>>& series, int window = 7,
                           int order = 2);
std::vector<double> savgol_smooth(const std::vector<double>& series, int window = 7,
                                  int order = 2, bool* warned = nullptr);

// Fixed-width frame bins; the final bin may be partial. A bin with no defined
// values in a column yields an absent mean for that column.
std::vector<BinnedRow> bin_speed_polarization(
    const std::vector<std::optional<double>>& mean_speed,
    const std::vector<std::optional<double>>& polarization, int bin_frames = 30);

struct MetricParams {
    CleanParams clean;
    double sigma_factor = 2.0;
    int smooth_window = 7;
    int smooth_order = 2;
    int bin_frames = 30;
};

struct HerdMetrics {
    CleanedTracks clean;
    BodyVectorSeries vectors;
    std::vector<FrameMetrics> frames;
    IndividualMetrics individual;
    std::vector<std::optional<double>> mean_speed;  // per frame, over individuals
    std::vector<std::optional<double>> smoothed_mean_speed;
    std::vector<std::optional<double>> smoothed_polarization;
    std::vector<BinnedRow> bins;  // over the smoothed series
    bool smoothing_warned = false;
};

HerdMetrics compute_herd_metrics(const tracks::WorldTrackSet& raw,
                                 const MetricParams& params = {}, Exec exec = Exec::Parallel);

// "frame,polarization,mean_dir_x,mean_dir_y,mean_pair_dist,max_pair_dist,pearson_r";
// absent values serialize as empty fields.
void write_herd_csv(const HerdMetrics& m, const std::filesystem::path& path);
// "frame,individual_id,alignment,speed_bl_s,dist_centroid_bl,nn_dist_bl";
// one row per (frame, individual) with a surviving head-tail pair.
void write_individuals_csv(const HerdMetrics& m, const std::filesystem::path& path);
// "bin,start_frame,mean_speed_bl_s,mean_polarization".
void write_binned_csv(const HerdMetrics& m, const std::filesystem::path& path);

}  // namespace unwrap::behavior
