#include "unwrap/registration.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "unwrap/errors.hpp"
#include "unwrap/io_util.hpp"

namespace unwrap::reg {

std::vector<std::optional<geom::Rigid2D>> TransformChain::cumulative_to_frame0(int last) const {
    std::vector<std::optional<geom::Rigid2D>> cum(static_cast<size_t>(last) + 1);
    cum[0] = geom::Rigid2D::identity();
    for (int f = 1; f <= last; ++f) {
        const auto it = transforms.find(f);
        if (it == transforms.end() || !cum[f - 1]) break;  // gap: everything after stays unset
        cum[f] = geom::compose(*cum[f - 1], it->second);
    }
    return cum;
}

TransformChain load_chain(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    std::string line;
    if (!std::getline(in, line) || io::trim(line) != "frame,theta_rad,tx,ty") {
        throw ParseError(path.string() + ":1: expected header 'frame,theta_rad,tx,ty'");
    }
    TransformChain chain;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (io::trim(line).empty()) continue;
        const std::string ctx = path.string() + ":" + std::to_string(lineno);
        const auto fields = io::split_csv(line);
        if (fields.size() != 4) {
            throw ParseError(ctx + ": expected 4 fields, got " + std::to_string(fields.size()));
        }
        const long long frame = io::parse_int(fields[0], ctx + " frame");
        if (frame < 1) throw ParseError(ctx + ": chain frames start at 1");
        geom::Rigid2D t;
        t.theta = io::parse_double(fields[1], ctx + " theta_rad");
        t.t.x = io::parse_double(fields[2], ctx + " tx");
        t.t.y = io::parse_double(fields[3], ctx + " ty");
        const auto [it, fresh] = chain.transforms.emplace(static_cast<int>(frame), t);
        (void)it;
        if (!fresh) throw IntegrityError(ctx + ": duplicate frame " + std::to_string(frame));
    }
    if (!chain.transforms.empty()) {
        for (int f = chain.transforms.begin()->first; f <= chain.max_frame(); ++f) {
            if (!chain.transforms.count(f)) chain.gaps.push_back(f);
        }
    }
    return chain;
}

void write_chain(const TransformChain& chain, const std::filesystem::path& path) {
    auto out = io::open_output(path);
    out << "frame,theta_rad,tx,ty\n";
    for (const auto& [frame, t] : chain.transforms) {
        out << frame << ',' << io::format_double(t.theta) << ',' << io::format_double(t.t.x)
            << ',' << io::format_double(t.t.y) << '\n';
    }
}

TransformChain estimate_chain_from_landmarks(const tracks::ImageTrackSet& landmarks,
                                             int min_pairs) {
    // positions by frame, landmark ids sorted for a deterministic fit
    std::map<int, std::map<std::string, geom::Vec2>> by_frame;
    for (const auto& e : landmarks.entries) by_frame[e.frame][e.individual] = e.pos;

    TransformChain chain;
    bool any = false;
    for (auto it = by_frame.begin(); it != by_frame.end(); ++it) {
        const auto next = std::next(it);
        if (next == by_frame.end()) break;
        if (next->first != it->first + 1) continue;

        std::vector<geom::Vec2> src, dst;  // src: frame f, dst: frame f-1
        for (const auto& [id, pos] : next->second) {
            const auto prev = it->second.find(id);
            if (prev == it->second.end()) continue;
            src.push_back(pos);
            dst.push_back(prev->second);
        }
        if (static_cast<int>(src.size()) < min_pairs) {
            chain.gaps.push_back(next->first);
            continue;
        }
        chain.transforms[next->first] = geom::rigid_fit_2d(src, dst);
        any = true;
    }
    if (!any) {
        throw EmptyChainError("no consecutive frame pair has " + std::to_string(min_pairs) +
                              " co-visible landmarks");
    }
    return chain;
}

void AxisConvention::validate() const {
    const double a = m00 * m00 + m10 * m10;
    const double b = m01 * m01 + m11 * m11;
    const double c = m00 * m01 + m10 * m11;
    if (std::abs(a - 1.0) > 1e-12 || std::abs(b - 1.0) > 1e-12 || std::abs(c) > 1e-12) {
        throw ConfigError("axis convention matrix is not orthogonal");
    }
}

tracks::WorldTrackSet unwrap_tracks(const tracks::ImageTrackSet& in, const TransformChain& chain,
                                    const AxisConvention& q, Exec exec, UnwrapReport* report) {
    q.validate();
    int last = 0;
    for (const auto& e : in.entries) last = std::max(last, e.frame);
    const auto cum = chain.cumulative_to_frame0(last);

    const size_t n = in.entries.size();
    std::vector<std::optional<tracks::TrackEntry>> mapped(n);
    for_each_index(exec, static_cast<std::int64_t>(n), [&](std::int64_t i) {
        const tracks::TrackEntry& e = in.entries[i];
        if (!cum[e.frame]) return;
        tracks::TrackEntry w = e;
        // Unwrap in pixel space first, then change axes. Applying q inside the
        // chain would conjugate the rotations and smear static points.
        w.pos = q.apply(cum[e.frame]->apply(e.pos));
        mapped[i] = std::move(w);
    });

    tracks::WorldTrackSet out;
    out.fps = in.fps;
    out.n_frames = in.n_frames;
    std::set<int> missing;
    for (size_t i = 0; i < n; ++i) {
        if (mapped[i]) {
            out.entries.push_back(std::move(*mapped[i]));
        } else {
            missing.insert(in.entries[i].frame);
        }
    }
    out.finalize();
    if (report) {
        report->total_entries = static_cast<long>(n);
        report->dropped_no_transform = static_cast<long>(n - out.entries.size());
        report->missing_frames.assign(missing.begin(), missing.end());
    }
    return out;
}

}  // namespace unwrap::reg
