#include "unwrap/behavior.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "unwrap/errors.hpp"
#include "unwrap/io_util.hpp"
#include "unwrap/landmark_eval.hpp"

namespace unwrap::behavior {

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

// Index map for the dense grids; ignores everything but head/tail keypoints.
struct Grid {
    std::vector<std::string> individuals;
    std::map<std::string, int> index;
    int n_frames = 0;
};

Grid build_grid(const tracks::WorldTrackSet& raw) {
    Grid g;
    for (const auto& e : raw.entries) {
        if (e.keypoint == tracks::Keypoint::Point) continue;
        if (g.index.emplace(e.individual, 0).second) g.individuals.push_back(e.individual);
        g.n_frames = std::max(g.n_frames, e.frame + 1);
    }
    g.n_frames = std::max(g.n_frames, raw.n_frames);
    std::sort(g.individuals.begin(), g.individuals.end(), eval::natural_less);
    for (size_t i = 0; i < g.individuals.size(); ++i) {
        g.index[g.individuals[i]] = static_cast<int>(i);
    }
    return g;
}

}  // namespace

CleanedTracks clean_tracks(const tracks::WorldTrackSet& raw, const CleanParams& params) {
    const Grid grid = build_grid(raw);
    CleanedTracks out;
    out.fps = raw.fps;
    out.n_frames = grid.n_frames;
    out.individuals = grid.individuals;
    const size_t cells = static_cast<size_t>(grid.n_frames) * grid.individuals.size();
    out.head.resize(cells);
    out.tail.resize(cells);

    for (const auto& e : raw.entries) {
        if (e.keypoint == tracks::Keypoint::Point) continue;
        const int i = grid.index.at(e.individual);
        if (e.confidence && *e.confidence < params.min_confidence) {
            out.removed.push_back({e.frame, e.individual, e.keypoint, "low_confidence"});
            continue;
        }
        const size_t cell = static_cast<size_t>(e.frame) * grid.individuals.size() + i;
        (e.keypoint == tracks::Keypoint::Head ? out.head : out.tail)[cell] = e.pos;
    }

    std::vector<double> lengths;
    for (size_t c = 0; c < cells; ++c) {
        if (out.head[c] && out.tail[c]) lengths.push_back(geom::norm(*out.head[c] - *out.tail[c]));
    }
    if (lengths.empty()) {
        throw DegenerateGeometryError(
            "body length undefined: no head-tail pair survives the confidence filter");
    }
    out.body_length = median(std::move(lengths));

    const double max_jump = params.jump_factor * out.body_length;
    const int n = out.n_individuals();
    for (int i = 0; i < n; ++i) {
        for (auto* grid_arr : {&out.head, &out.tail}) {
            auto& arr = *grid_arr;
            const auto kp =
                grid_arr == &out.head ? tracks::Keypoint::Head : tracks::Keypoint::Tail;
            int last_kept = -2;  // never adjacent to frame 0
            for (int f = 0; f < out.n_frames; ++f) {
                const size_t cell = static_cast<size_t>(f) * n + i;
                if (!arr[cell]) continue;
                if (f == last_kept + 1 &&
                    geom::norm(*arr[cell] - *arr[static_cast<size_t>(last_kept) * n + i]) >
                        max_jump) {
                    arr[cell].reset();
                    out.removed.push_back({f, out.individuals[i], kp, "jump"});
                    continue;  // the dropped point is not a reference for f+1
                }
                last_kept = f;
            }
        }
    }
    return out;
}

BodyVectorSeries body_vectors(const CleanedTracks& clean, double sigma_factor) {
    BodyVectorSeries out;
    out.n_frames = clean.n_frames;
    out.individuals = clean.individuals;
    const int n = clean.n_individuals();
    const size_t cells = static_cast<size_t>(clean.n_frames) * n;
    out.unit.resize(cells);

    std::vector<geom::Vec2> vec(cells);
    std::vector<unsigned char> present(cells, 0);
    double sum = 0.0, sum_sq = 0.0;
    long count = 0;
    for (int f = 0; f < clean.n_frames; ++f) {
        for (int i = 0; i < n; ++i) {
            const size_t c = static_cast<size_t>(f) * n + i;
            if (!clean.head[c] || !clean.tail[c]) continue;
            const geom::Vec2 v = *clean.head[c] - *clean.tail[c];
            const double len = geom::norm(v);
            if (len == 0.0) {
                out.removed.push_back({f, clean.individuals[i], tracks::Keypoint::Head,
                                       "degenerate"});
                continue;
            }
            vec[c] = v;
            present[c] = 1;
            sum += len;
            sum_sq += len * len;
            ++count;
        }
    }
    if (count == 0) return out;
    out.mean_length = sum / static_cast<double>(count);
    out.sigma_length =
        std::sqrt(std::max(0.0, sum_sq / static_cast<double>(count) -
                                    out.mean_length * out.mean_length));

    const double lo = out.mean_length - sigma_factor * out.sigma_length;
    const double hi = out.mean_length + sigma_factor * out.sigma_length;
    for (int f = 0; f < clean.n_frames; ++f) {
        for (int i = 0; i < n; ++i) {
            const size_t c = static_cast<size_t>(f) * n + i;
            if (!present[c]) continue;
            const double len = geom::norm(vec[c]);
            if (len < lo || len > hi) {
                out.removed.push_back({f, clean.individuals[i], tracks::Keypoint::Head,
                                       "length_outlier"});
                continue;
            }
            out.unit[c] = vec[c] / len;
        }
    }
    return out;
}

std::vector<double> savgol_smooth(const std::vector<double>& series, int window, int order,
                                  bool* warned) {
    if (window < 1 || window % 2 == 0) throw ConfigError("smoothing window must be odd");
    if (order < 0 || order >= window) {
        throw ConfigError("smoothing order must be below the window size");
    }
    if (warned) *warned = false;
    const int n = static_cast<int>(series.size());
    if (n < window) {
        if (warned) *warned = true;
        return series;
    }

    // Projection onto degree-`order` polynomials over window offsets, via the
    // normal equations of the Vandermonde system.
    const int m = order + 1;
    const int half = window / 2;
    std::vector<double> A(static_cast<size_t>(window) * m);
    for (int j = 0; j < window; ++j) {
        double p = 1.0;
        for (int k = 0; k < m; ++k) {
            A[static_cast<size_t>(j) * m + k] = p;
            p *= static_cast<double>(j - half);
        }
    }
    std::vector<double> G(static_cast<size_t>(m) * m, 0.0);
    for (int a = 0; a < m; ++a) {
        for (int b = 0; b < m; ++b) {
            double s = 0.0;
            for (int j = 0; j < window; ++j) {
                s += A[static_cast<size_t>(j) * m + a] * A[static_cast<size_t>(j) * m + b];
            }
            G[static_cast<size_t>(a) * m + b] = s;
        }
    }
    // invert G in place against the identity (Gauss-Jordan, partial pivoting)
    std::vector<double> inv(static_cast<size_t>(m) * m, 0.0);
    for (int a = 0; a < m; ++a) inv[static_cast<size_t>(a) * m + a] = 1.0;
    for (int col = 0; col < m; ++col) {
        int pivot = col;
        for (int r = col + 1; r < m; ++r) {
            if (std::abs(G[static_cast<size_t>(r) * m + col]) >
                std::abs(G[static_cast<size_t>(pivot) * m + col])) {
                pivot = r;
            }
        }
        for (int k = 0; k < m; ++k) {
            std::swap(G[static_cast<size_t>(col) * m + k], G[static_cast<size_t>(pivot) * m + k]);
            std::swap(inv[static_cast<size_t>(col) * m + k],
                      inv[static_cast<size_t>(pivot) * m + k]);
        }
        const double d = G[static_cast<size_t>(col) * m + col];
        if (d == 0.0) throw ConfigError("smoothing design matrix is singular");
        for (int k = 0; k < m; ++k) {
            G[static_cast<size_t>(col) * m + k] /= d;
            inv[static_cast<size_t>(col) * m + k] /= d;
        }
        for (int r = 0; r < m; ++r) {
            if (r == col) continue;
            const double factor = G[static_cast<size_t>(r) * m + col];
            if (factor == 0.0) continue;
            for (int k = 0; k < m; ++k) {
                G[static_cast<size_t>(r) * m + k] -= factor * G[static_cast<size_t>(col) * m + k];
                inv[static_cast<size_t>(r) * m + k] -=
                    factor * inv[static_cast<size_t>(col) * m + k];
            }
        }
    }
    // weights[e][j]: fit over a window, evaluated at window position e
    std::vector<double> weights(static_cast<size_t>(window) * window, 0.0);
    for (int e = 0; e < window; ++e) {
        for (int j = 0; j < window; ++j) {
            double s = 0.0;
            for (int a = 0; a < m; ++a) {
                for (int b = 0; b < m; ++b) {
                    s += A[static_cast<size_t>(e) * m + a] * inv[static_cast<size_t>(a) * m + b] *
                         A[static_cast<size_t>(j) * m + b];
                }
            }
            weights[static_cast<size_t>(e) * window + j] = s;
        }
    }

    std::vector<double> out(series.size());
    const auto apply = [&](int eval_pos, int window_start) {
        double s = 0.0;
        for (int j = 0; j < window; ++j) {
            s += weights[static_cast<size_t>(eval_pos) * window + j] * series[window_start + j];
        }
        return s;
    };
    for (int i = 0; i < n; ++i) {
        if (i < half) {
            out[i] = apply(i, 0);  // leading edge: first window, evaluated at i
        } else if (i >= n - half) {
            out[i] = apply(i - (n - window), n - window);  // trailing edge: last window
        } else {
            out[i] = apply(half, i - half);
        }
    }
    return out;
}

SmoothResult savgol_smooth(const std::vector<std::optional<double>>& series, int window,
                           int order) {
    SmoothResult res;
    res.values.resize(series.size());
    size_t i = 0;
    while (i < series.size()) {
        if (!series[i]) {
            ++i;
            continue;
        }
        size_t end = i;
        while (end < series.size() && series[end]) ++end;
        std::vector<double> run;
        run.reserve(end - i);
        for (size_t j = i; j < end; ++j) run.push_back(*series[j]);
        bool warned = false;
        const auto smoothed = savgol_smooth(run, window, order, &warned);
        res.warned = res.warned || warned;
        for (size_t j = i; j < end; ++j) res.values[j] = smoothed[j - i];
        i = end;
    }
    return res;
}

std::vector<BinnedRow> bin_speed_polarization(const std::vector<std::optional<double>>& mean_speed,
                                              const std::vector<std::optional<double>>& polarization,
                                              int bin_frames) {
    if (bin_frames < 1) throw ConfigError("bin width must be at least one frame");
    const size_t n = std::max(mean_speed.size(), polarization.size());
    std::vector<BinnedRow> rows;
    const auto bin_mean = [&](const std::vector<std::optional<double>>& series, size_t start,
                              size_t end) -> std::optional<double> {
        double sum = 0.0;
        long count = 0;
        for (size_t f = start; f < end && f < series.size(); ++f) {
            if (series[f]) {
                sum += *series[f];
                ++count;
            }
        }
        if (count == 0) return std::nullopt;
        return sum / static_cast<double>(count);
    };
    for (size_t start = 0; start < n; start += bin_frames) {
        const size_t end = std::min(n, start + bin_frames);
        BinnedRow row;
        row.bin = static_cast<int>(start / bin_frames);
        row.start_frame = static_cast<int>(start);
        row.mean_speed = bin_mean(mean_speed, start, end);
        row.mean_polarization = bin_mean(polarization, start, end);
        rows.push_back(row);
    }
    return rows;
}

HerdMetrics compute_herd_metrics(const tracks::WorldTrackSet& raw, const MetricParams& params,
                                 Exec exec) {
    HerdMetrics m;
    m.clean = clean_tracks(raw, params.clean);
    m.vectors = body_vectors(m.clean, params.sigma_factor);

    const int n = m.clean.n_individuals();
    const int n_frames = m.clean.n_frames;
    const double bl = m.clean.body_length;
    const double fps = m.clean.fps;
    const size_t cells = static_cast<size_t>(n_frames) * n;

    m.frames.assign(n_frames, {});
    m.individual.alignment.assign(cells, std::nullopt);
    m.individual.speed.assign(cells, std::nullopt);
    m.individual.dist_centroid.assign(cells, std::nullopt);
    m.individual.nn_dist.assign(cells, std::nullopt);
    m.mean_speed.assign(n_frames, std::nullopt);

    for_each_index(exec, n_frames, [&](std::int64_t f) {
        FrameMetrics& fm = m.frames[f];
        fm.frame = static_cast<int>(f);

        std::vector<int> present;  // individuals with a centroid this frame
        std::vector<geom::Vec2> centroid(n);
        for (int i = 0; i < n; ++i) {
            if (const auto c = m.clean.centroid_at(static_cast<int>(f), i)) {
                present.push_back(i);
                centroid[i] = *c;
            }
        }

        geom::Vec2 dir_sum;
        int n_vec = 0;
        for (int i = 0; i < n; ++i) {
            if (const auto& u = m.vectors.at(static_cast<int>(f), i)) {
                dir_sum += *u;
                ++n_vec;
            }
        }
        if (n_vec > 0) {
            const geom::Vec2 mean_vec = dir_sum / static_cast<double>(n_vec);
            const double p = geom::norm(mean_vec);
            fm.polarization = p;
            if (p >= 1e-15) {
                fm.mean_dir = mean_vec / p;
                for (int i = 0; i < n; ++i) {
                    if (const auto& u = m.vectors.at(static_cast<int>(f), i)) {
                        m.individual.alignment[f * n + i] = geom::dot(*u, *fm.mean_dir);
                    }
                }
            }
        }

        if (present.size() >= 2) {
            double sum = 0.0, mx = 0.0;
            long pairs = 0;
            for (size_t a = 0; a < present.size(); ++a) {
                for (size_t b = a + 1; b < present.size(); ++b) {
                    const double d = geom::norm(centroid[present[a]] - centroid[present[b]]) / bl;
                    sum += d;
                    mx = std::max(mx, d);
                    ++pairs;
                }
            }
            fm.mean_pair_dist = sum / static_cast<double>(pairs);
            fm.max_pair_dist = mx;

            for (const int i : present) {
                double best = std::numeric_limits<double>::infinity();
                for (const int j : present) {
                    if (j == i) continue;
                    best = std::min(best, geom::norm(centroid[i] - centroid[j]) / bl);
                }
                m.individual.nn_dist[f * n + i] = best;
            }
        }

        if (!present.empty()) {
            geom::Vec2 herd;
            for (const int i : present) herd += centroid[i];
            herd = herd / static_cast<double>(present.size());
            for (const int i : present) {
                m.individual.dist_centroid[f * n + i] = geom::norm(centroid[i] - herd) / bl;
            }
        }

        double speed_sum = 0.0;
        int speed_count = 0;
        if (f > 0) {
            for (const int i : present) {
                const auto prev = m.clean.centroid_at(static_cast<int>(f) - 1, i);
                if (!prev) continue;
                const double s = geom::norm(centroid[i] - *prev) * fps / bl;
                m.individual.speed[f * n + i] = s;
                speed_sum += s;
                ++speed_count;
            }
        }
        if (speed_count > 0) m.mean_speed[f] = speed_sum / static_cast<double>(speed_count);

        // Pearson r over individuals carrying both a centroid distance and an
        // alignment value; absent below 3 points or under zero variance.
        std::vector<double> xs, ys;
        for (const int i : present) {
            const auto& a = m.individual.alignment[f * n + i];
            const auto& d = m.individual.dist_centroid[f * n + i];
            if (a && d) {
                xs.push_back(*d);
                ys.push_back(*a);
            }
        }
        if (xs.size() >= 3) {
            const double nn = static_cast<double>(xs.size());
            double mx_ = 0.0, my_ = 0.0;
            for (size_t k = 0; k < xs.size(); ++k) {
                mx_ += xs[k];
                my_ += ys[k];
            }
            mx_ /= nn;
            my_ /= nn;
            double sxx = 0.0, syy = 0.0, sxy = 0.0;
            for (size_t k = 0; k < xs.size(); ++k) {
                sxx += (xs[k] - mx_) * (xs[k] - mx_);
                syy += (ys[k] - my_) * (ys[k] - my_);
                sxy += (xs[k] - mx_) * (ys[k] - my_);
            }
            if (sxx > 0.0 && syy > 0.0) fm.pearson_r = sxy / std::sqrt(sxx * syy);
        }
    });

    std::vector<std::optional<double>> polarization(n_frames);
    for (int f = 0; f < n_frames; ++f) polarization[f] = m.frames[f].polarization;
    auto ss = savgol_smooth(m.mean_speed, params.smooth_window, params.smooth_order);
    auto sp = savgol_smooth(polarization, params.smooth_window, params.smooth_order);
    m.smoothing_warned = ss.warned || sp.warned;
    m.smoothed_mean_speed = std::move(ss.values);
    m.smoothed_polarization = std::move(sp.values);
    m.bins = bin_speed_polarization(m.smoothed_mean_speed, m.smoothed_polarization,
                                    params.bin_frames);
    return m;
}

namespace {

std::string opt_field(const std::optional<double>& v) {
    return v ? io::format_double(*v) : std::string();
}

}  // namespace

void write_herd_csv(const HerdMetrics& m, const std::filesystem::path& path) {
    auto out = io::open_output(path);
    out << "frame,polarization,mean_dir_x,mean_dir_y,mean_pair_dist,max_pair_dist,pearson_r\n";
    for (const auto& fm : m.frames) {
        out << fm.frame << ',' << opt_field(fm.polarization) << ',';
        if (fm.mean_dir) {
            out << io::format_double(fm.mean_dir->x) << ',' << io::format_double(fm.mean_dir->y);
        } else {
            out << ',';
        }
        out << ',' << opt_field(fm.mean_pair_dist) << ',' << opt_field(fm.max_pair_dist) << ','
            << opt_field(fm.pearson_r) << '\n';
    }
}

void write_individuals_csv(const HerdMetrics& m, const std::filesystem::path& path) {
    auto out = io::open_output(path);
    out << "frame,individual_id,alignment,speed_bl_s,dist_centroid_bl,nn_dist_bl\n";
    const int n = m.clean.n_individuals();
    for (int f = 0; f < m.clean.n_frames; ++f) {
        for (int i = 0; i < n; ++i) {
            if (!m.clean.centroid_at(f, i)) continue;
            const size_t c = static_cast<size_t>(f) * n + i;
            out << f << ',' << m.clean.individuals[i] << ','
                << opt_field(m.individual.alignment[c]) << ','
                << opt_field(m.individual.speed[c]) << ','
                << opt_field(m.individual.dist_centroid[c]) << ','
                << opt_field(m.individual.nn_dist[c]) << '\n';
        }
    }
}

void write_binned_csv(const HerdMetrics& m, const std::filesystem::path& path) {
    auto out = io::open_output(path);
    out << "bin,start_frame,mean_speed_bl_s,mean_polarization\n";
    for (const auto& b : m.bins) {
        out << b.bin << ',' << b.start_frame << ',' << opt_field(b.mean_speed) << ','
            << opt_field(b.mean_polarization) << '\n';
    }
}

}  // namespace unwrap::behavior
