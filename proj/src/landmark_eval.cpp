#include "unwrap/landmark_eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "unwrap/errors.hpp"
#include "unwrap/io_util.hpp"

namespace unwrap::eval {

DispersionStats dispersion_stats(std::span<const geom::Vec2> points, double body_length) {
    if (body_length <= 0.0) throw ConfigError("body length must be positive");
    if (points.empty()) throw DegenerateGeometryError("dispersion of an empty track");

    geom::Vec2 centroid;
    for (const auto& p : points) centroid += p;
    centroid = centroid / static_cast<double>(points.size());

    DispersionStats s;
    s.samples = static_cast<long>(points.size());
    s.min = std::numeric_limits<double>::infinity();
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& p : points) {
        const double d = geom::norm(p - centroid) / body_length;
        sum += d;
        sum_sq += d * d;
        s.max = std::max(s.max, d);
        s.min = std::min(s.min, d);
    }
    const double n = static_cast<double>(s.samples);
    s.mean = sum / n;
    s.stddev = std::sqrt(std::max(0.0, sum_sq / n - s.mean * s.mean));
    return s;
}

double weighted_mean_of_rows(const std::vector<DispersionRow>& rows) {
    double num = 0.0, den = 0.0;
    for (const auto& r : rows) {
        num += r.stats.mean * static_cast<double>(r.stats.samples);
        den += static_cast<double>(r.stats.samples);
    }
    if (den == 0.0) throw DegenerateGeometryError("no samples across landmark tracks");
    return num / den;
}

bool natural_less(const std::string& a, const std::string& b) {
    size_t i = 0, j = 0;
    const auto digit = [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; };
    while (i < a.size() && j < b.size()) {
        if (digit(a[i]) && digit(b[j])) {
            size_t ia = i, jb = j;
            while (ia < a.size() && digit(a[ia])) ++ia;
            while (jb < b.size() && digit(b[jb])) ++jb;
            // strip leading zeros, compare by length then lexicographically
            size_t si = i, sj = j;
            while (si + 1 < ia && a[si] == '0') ++si;
            while (sj + 1 < jb && b[sj] == '0') ++sj;
            const size_t la = ia - si, lb = jb - sj;
            if (la != lb) return la < lb;
            const int c = a.compare(si, la, b, sj, lb);
            if (c != 0) return c < 0;
            i = ia;
            j = jb;
        } else {
            if (a[i] != b[j]) return a[i] < b[j];
            ++i;
            ++j;
        }
    }
    return (a.size() - i) < (b.size() - j);
}

DispersionReport evaluate_landmarks(const tracks::WorldTrackSet& world, double body_length,
                                    Exec exec) {
    if (body_length <= 0.0) throw ConfigError("body length must be positive");
    const auto groups = tracks::group_by_track(world);
    {
        std::map<std::string, int> per_id;
        for (const auto& g : groups) ++per_id[g.individual];
        for (const auto& [id, count] : per_id) {
            if (count > 1) {
                throw IntegrityError("landmark '" + id + "' carries " + std::to_string(count) +
                                     " keypoint series; expected one");
            }
        }
    }

    std::vector<DispersionStats> stats(groups.size());
    for_each_index(exec, static_cast<std::int64_t>(groups.size()), [&](std::int64_t g) {
        std::vector<geom::Vec2> pts;
        pts.reserve(groups[g].entry_indices.size());
        for (const size_t idx : groups[g].entry_indices) pts.push_back(world.entries[idx].pos);
        stats[g] = dispersion_stats(pts, body_length);
    });

    DispersionReport report;
    report.body_length = body_length;
    report.rows.reserve(groups.size());
    for (size_t g = 0; g < groups.size(); ++g) {
        report.rows.push_back({groups[g].individual, stats[g]});
    }
    std::sort(report.rows.begin(), report.rows.end(),
              [](const DispersionRow& a, const DispersionRow& b) {
                  return natural_less(a.tree_id, b.tree_id);
              });
    report.weighted_mean = weighted_mean_of_rows(report.rows);
    return report;
}

void write_report_csv(const DispersionReport& report, const std::filesystem::path& path) {
    auto out = io::open_output(path);
    out << "tree_id,mean,max,min,std,samples\n";
    for (const auto& r : report.rows) {
        out << r.tree_id << ',' << io::format_double(r.stats.mean) << ','
            << io::format_double(r.stats.max) << ',' << io::format_double(r.stats.min) << ','
            << io::format_double(r.stats.stddev) << ',' << r.stats.samples << '\n';
    }
    out << "#weighted_mean=" << io::format_double(report.weighted_mean) << '\n';
    out << "#body_length=" << io::format_double(report.body_length) << '\n';
}

DispersionReport read_report_csv(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    std::string line;
    if (!std::getline(in, line) || io::trim(line) != "tree_id,mean,max,min,std,samples") {
        throw ParseError(path.string() + ":1: expected header 'tree_id,mean,max,min,std,samples'");
    }
    DispersionReport report;
    bool have_weighted = false;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t{io::trim(line)};
        if (t.empty()) continue;
        const std::string ctx = path.string() + ":" + std::to_string(lineno);
        if (t[0] == '#') {
            const auto eq = t.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = t.substr(1, eq - 1);
            const std::string value = t.substr(eq + 1);
            if (key == "weighted_mean") {
                report.weighted_mean = io::parse_double(value, ctx + " weighted_mean");
                have_weighted = true;
            } else if (key == "body_length") {
                report.body_length = io::parse_double(value, ctx + " body_length");
            }
            continue;
        }
        const auto fields = io::split_csv(t);
        if (fields.size() != 6) {
            throw ParseError(ctx + ": expected 6 fields, got " + std::to_string(fields.size()));
        }
        DispersionRow row;
        row.tree_id = fields[0];
        if (row.tree_id.empty()) throw ParseError(ctx + ": empty tree_id");
        row.stats.mean = io::parse_double(fields[1], ctx + " mean");
        row.stats.max = io::parse_double(fields[2], ctx + " max");
        row.stats.min = io::parse_double(fields[3], ctx + " min");
        row.stats.stddev = io::parse_double(fields[4], ctx + " std");
        row.stats.samples = io::parse_int(fields[5], ctx + " samples");
        if (row.stats.samples < 1) throw ParseError(ctx + ": samples must be positive");
        report.rows.push_back(std::move(row));
    }
    if (report.rows.empty()) throw ParseError(path.string() + ": no landmark rows");
    if (!have_weighted) report.weighted_mean = weighted_mean_of_rows(report.rows);
    return report;
}

}  // namespace unwrap::eval
