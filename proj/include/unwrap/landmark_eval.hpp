#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "unwrap/geometry.hpp"
#include "unwrap/parallel.hpp"
#include "unwrap/tracks.hpp"

// Unwrap quality metric: a static landmark unwrapped perfectly maps to a single
// world point, so the spread of its unwrapped positions measures residual camera
// motion. Distances are normalized by body length to stay comparable across
// coordinate systems with different scales.

namespace unwrap::eval {

struct DispersionStats {
    double mean = 0.0;
    double max = 0.0;
    double min = 0.0;
    double stddev = 0.0;  // population (divide by n)
    long samples = 0;
};

// Distances from each point to the track centroid, divided by body_length.
DispersionStats dispersion_stats(std::span<const geom::Vec2> points, double body_length);

struct DispersionRow {
    std::string tree_id;
    DispersionStats stats;
};

struct DispersionReport {
    std::vector<DispersionRow> rows;  // natural id order ("tree2" before "tree10")
    double weighted_mean = 0.0;       // sample-count weighted mean of row means
    double body_length = 0.0;
};

// Mean of row means weighted by each row's sample count.
double weighted_mean_of_rows(const std::vector<DispersionRow>& rows);

// One row per landmark track. Each individual id must map to a single keypoint
// series. body_length must be positive and in the same units as the tracks.
DispersionReport evaluate_landmarks(const tracks::WorldTrackSet& world, double body_length,
                                    Exec exec = Exec::Parallel);

// "tree_id,mean,max,min,std,samples" rows followed by "#weighted_mean=" and
// "#body_length=" footers.
void write_report_csv(const DispersionReport& report, const std::filesystem::path& path);
DispersionReport read_report_csv(const std::filesystem::path& path);

// Orders "tree2" before "tree10": digit runs compare numerically, the rest
// byte-wise.
bool natural_less(const std::string& a, const std::string& b);

}  // namespace unwrap::eval
