#include "unwrap/tracks.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "unwrap/errors.hpp"
#include "unwrap/io_util.hpp"

namespace unwrap::tracks {

std::string_view to_string(Keypoint kp) {
    switch (kp) {
        case Keypoint::Head: return "head";
        case Keypoint::Tail: return "tail";
        case Keypoint::Point: return "point";
    }
    return "point";
}

Keypoint keypoint_from_string(std::string_view s) {
    if (s == "head") return Keypoint::Head;
    if (s == "tail") return Keypoint::Tail;
    if (s == "point") return Keypoint::Point;
    throw ParseError("unknown keypoint '" + std::string(s) + "' (expected head|tail|point)");
}

bool entry_key_less(const TrackEntry& a, const TrackEntry& b) {
    return std::tie(a.frame, a.individual, a.keypoint) <
           std::tie(b.frame, b.individual, b.keypoint);
}

void TrackSet::finalize() {
    std::sort(entries.begin(), entries.end(), entry_key_less);
    for (size_t i = 1; i < entries.size(); ++i) {
        const TrackEntry& p = entries[i - 1];
        const TrackEntry& e = entries[i];
        if (p.frame == e.frame && p.individual == e.individual && p.keypoint == e.keypoint) {
            throw IntegrityError("duplicate entry for frame=" + std::to_string(e.frame) +
                                 " individual=" + e.individual + " keypoint=" +
                                 std::string(to_string(e.keypoint)));
        }
    }
    for (const TrackEntry& e : entries) {
        if (e.frame >= n_frames) n_frames = e.frame + 1;
    }
}

const TrackEntry* TrackSet::find(int frame, std::string_view individual, Keypoint kp) const {
    TrackEntry probe;
    probe.frame = frame;
    probe.individual = std::string(individual);
    probe.keypoint = kp;
    const auto it = std::lower_bound(entries.begin(), entries.end(), probe, entry_key_less);
    if (it == entries.end() || it->frame != frame || it->individual != individual ||
        it->keypoint != kp) {
        return nullptr;
    }
    return &*it;
}

namespace {

const char* kHeader = "frame,individual_id,keypoint,x,y,confidence";

std::filesystem::path meta_path(const std::filesystem::path& path) {
    std::filesystem::path p = path;
    p += ".meta";
    return p;
}

}  // namespace

TrackSet read_tracks(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    TrackSet set;

    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(path.string() + ": empty file, expected header '" + kHeader + "'");
    }
    if (io::trim(line) != kHeader) {
        throw ParseError(path.string() + ":1: expected header '" + std::string(kHeader) + "'");
    }

    std::map<std::tuple<int, std::string, Keypoint>, int> seen;  // key -> line number
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (io::trim(line).empty()) continue;
        const std::string ctx = path.string() + ":" + std::to_string(lineno);
        const auto fields = io::split_csv(line);
        if (fields.size() != 6) {
            throw ParseError(ctx + ": expected 6 fields, got " + std::to_string(fields.size()));
        }
        TrackEntry e;
        const long long frame = io::parse_int(fields[0], ctx + " frame");
        if (frame < 0) throw ParseError(ctx + ": frame must be non-negative");
        e.frame = static_cast<int>(frame);
        e.individual = std::string(io::trim(fields[1]));
        if (e.individual.empty()) throw ParseError(ctx + ": empty individual_id");
        e.keypoint = keypoint_from_string(io::trim(fields[2]));
        e.pos.x = io::parse_double(fields[3], ctx + " x");
        e.pos.y = io::parse_double(fields[4], ctx + " y");
        if (!std::isfinite(e.pos.x) || !std::isfinite(e.pos.y)) {
            throw ParseError(ctx + ": non-finite coordinates");
        }
        if (!io::trim(fields[5]).empty()) {
            const double c = io::parse_double(fields[5], ctx + " confidence");
            if (!(c >= 0.0 && c <= 1.0)) throw ParseError(ctx + ": confidence outside [0,1]");
            e.confidence = c;
        }
        const auto key = std::make_tuple(e.frame, e.individual, e.keypoint);
        const auto [it, fresh] = seen.emplace(key, lineno);
        if (!fresh) {
            throw IntegrityError(ctx + ": duplicate of line " + std::to_string(it->second) +
                                 " (frame=" + std::to_string(e.frame) + " individual=" +
                                 e.individual + " keypoint=" + std::string(to_string(e.keypoint)) +
                                 ")");
        }
        set.entries.push_back(std::move(e));
    }
    set.finalize();

    const auto meta = meta_path(path);
    if (std::filesystem::exists(meta)) {
        const auto kv = io::read_keyvalue(meta);
        if (const auto it = kv.find("fps"); it != kv.end()) {
            set.fps = io::parse_double(it->second, meta.string() + " fps");
        }
        if (const auto it = kv.find("n_frames"); it != kv.end()) {
            const long long n = io::parse_int(it->second, meta.string() + " n_frames");
            if (n > set.n_frames) set.n_frames = static_cast<int>(n);
        }
    }
    return set;
}

void write_tracks(const TrackSet& set, const std::filesystem::path& path) {
    std::vector<const TrackEntry*> ordered;
    ordered.reserve(set.entries.size());
    bool any3d = false;
    for (const TrackEntry& e : set.entries) {
        ordered.push_back(&e);
        if (e.world3d) any3d = true;
    }
    std::sort(ordered.begin(), ordered.end(),
              [](const TrackEntry* a, const TrackEntry* b) { return entry_key_less(*a, *b); });

    auto out = io::open_output(path);
    out << kHeader << "\n";
    for (const TrackEntry* e : ordered) {
        out << e->frame << ',' << e->individual << ',' << to_string(e->keypoint) << ','
            << io::format_double(e->pos.x) << ',' << io::format_double(e->pos.y) << ',';
        if (e->confidence) out << io::format_double(*e->confidence);
        out << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());

    io::write_keyvalue(meta_path(path), {{"fps", io::format_double(set.fps)},
                                         {"n_frames", std::to_string(set.n_frames)}});

    if (any3d) {
        std::filesystem::path p3 = path;
        p3.replace_filename(path.stem().string() + "_3d" + path.extension().string());
        auto out3 = io::open_output(p3);
        out3 << "frame,individual_id,keypoint,x,y,z\n";
        for (const TrackEntry* e : ordered) {
            if (!e->world3d) continue;
            out3 << e->frame << ',' << e->individual << ',' << to_string(e->keypoint) << ','
                 << io::format_double(e->world3d->x) << ',' << io::format_double(e->world3d->y)
                 << ',' << io::format_double(e->world3d->z) << '\n';
        }
    }
}

std::vector<TrackGroup> group_by_track(const TrackSet& set) {
    std::vector<size_t> order(set.entries.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const TrackEntry& ea = set.entries[a];
        const TrackEntry& eb = set.entries[b];
        return std::tie(ea.individual, ea.keypoint, ea.frame) <
               std::tie(eb.individual, eb.keypoint, eb.frame);
    });

    std::vector<TrackGroup> groups;
    for (size_t idx : order) {
        const TrackEntry& e = set.entries[idx];
        if (groups.empty() || groups.back().individual != e.individual ||
            groups.back().keypoint != e.keypoint) {
            groups.push_back({e.individual, e.keypoint, {}});
        }
        groups.back().entry_indices.push_back(idx);
    }
    return groups;
}

ImageTrackSet filter_landmark_tracks(const ImageTrackSet& set, long min_samples, double max_jump) {
    const auto groups = group_by_track(set);

    std::set<size_t> keep;
    for (const TrackGroup& g : groups) {
        if (static_cast<long>(g.entry_indices.size()) <= min_samples) continue;
        bool jump = false;
        for (size_t i = 1; i < g.entry_indices.size(); ++i) {
            const TrackEntry& prev = set.entries[g.entry_indices[i - 1]];
            const TrackEntry& cur = set.entries[g.entry_indices[i]];
            if (cur.frame - prev.frame != 1) continue;  // rate undefined across gaps
            if (geom::norm(cur.pos - prev.pos) > max_jump) {
                jump = true;
                break;
            }
        }
        if (jump) continue;
        keep.insert(g.entry_indices.begin(), g.entry_indices.end());
    }

    ImageTrackSet out;
    out.fps = set.fps;
    out.n_frames = set.n_frames;
    out.entries.reserve(keep.size());
    for (size_t i = 0; i < set.entries.size(); ++i) {
        if (keep.count(i)) out.entries.push_back(set.entries[i]);
    }
    out.finalize();
    return out;
}

}  // namespace unwrap::tracks
