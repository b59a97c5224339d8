// On-disk episode format (manifest.json + trace.csv + PPM frames), the
// sensor-trace boundary rule engine, and linear progress labeling.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "progressd/common.hpp"
#include "progressd/tensor.hpp"
#include "progressd/temporal.hpp"
#include "progressd/views.hpp"

namespace progressd::data {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// sensor trace
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& trace_schema() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out = {"base_linear_velocity",
                                        "base_angular_velocity"};
        for (const char* arm : {"left", "right"})
            for (const char* joint : {"waist", "shoulder", "elbow", "forearm",
                                      "wrist_angle", "wrist_rotate", "gripper"})
                for (const char* metric : {"position", "velocity", "effort"})
                    out.push_back(std::string(arm) + "_" + joint + "_" + metric);
        return out;
    }();
    return names;
}

struct SensorTrace {
    double sample_rate_hz = 0.0;
    // one series per schema channel, all equal length
    std::vector<std::vector<double>> channels;

    std::size_t length() const { return channels.empty() ? 0 : channels[0].size(); }

    int channel_index(const std::string& name) const {
        const auto& schema = trace_schema();
        for (std::size_t i = 0; i < schema.size(); ++i)
            if (schema[i] == name) return static_cast<int>(i);
        fail("trace: unknown channel '", name, "'");
    }

    const std::vector<double>& channel(const std::string& name) const {
        return channels[static_cast<std::size_t>(channel_index(name))];
    }

    void validate() const {
        check(sample_rate_hz > 0.0, "trace: sample rate must be positive");
        check(channels.size() == trace_schema().size(), "trace: expected ",
              trace_schema().size(), " channels, got ", channels.size());
        check(length() >= 2, "trace: needs at least 2 samples");
        for (std::size_t i = 0; i < channels.size(); ++i)
            check(channels[i].size() == length(), "trace: channel '",
                  trace_schema()[i], "' has ", channels[i].size(),
                  " samples, expected ", length());
    }
};

// ---------------------------------------------------------------------------
// boundary rules
// ---------------------------------------------------------------------------

struct AtomicCondition {
    std::string channel;
    char op = '>'; // '>' or '<'
    double threshold = 0.0;
    int sustain = 5; // consecutive samples the predicate must hold

    bool holds(double v) const { return op == '>' ? v > threshold : v < threshold; }
};

// Start and end conditions are OR-lists: a list fires at sample i when any
// single member holds for its whole sustain window starting at i.
struct BoundaryRule {
    std::vector<AtomicCondition> start;
    std::vector<AtomicCondition> end;
};

inline void validate(const BoundaryRule& rule) {
    check(!rule.start.empty() && !rule.end.empty(),
          "rule: start and end condition lists must be non-empty");
    for (const auto* list : {&rule.start, &rule.end})
        for (const auto& c : *list) {
            check(c.op == '>' || c.op == '<', "rule: comparator must be > or <");
            check(c.sustain >= 1, "rule: sustain window must be >= 1");
            bool known = false;
            for (const auto& name : trace_schema()) known |= name == c.channel;
            check(known, "rule: unknown channel '", c.channel, "'");
        }
}

struct NoStartError : Error {
    explicit NoStartError(const std::string& msg) : Error(msg) {}
};
struct NoEndError : Error {
    explicit NoEndError(const std::string& msg) : Error(msg) {}
};

struct Boundaries {
    std::size_t t_s = 0;
    std::size_t t_e = 0;
};

namespace detail {

// First index >= from where some member of the OR-list holds for its whole
// sustain window; npos when none exists.
inline std::size_t first_sustained(const SensorTrace& trace,
                                   const std::vector<AtomicCondition>& members,
                                   std::size_t from) {
    const std::size_t n = trace.length();
    std::size_t best = std::string::npos;
    for (const auto& m : members) {
        const auto& series = trace.channel(m.channel);
        const auto w = static_cast<std::size_t>(m.sustain);
        std::size_t run = 0;
        for (std::size_t i = from; i < n; ++i) {
            run = m.holds(series[i]) ? run + 1 : 0;
            if (run >= w) {
                std::size_t window_start = i + 1 - w;
                if (window_start < best) best = window_start;
                break;
            }
        }
    }
    return best;
}

} // namespace detail

// Boundary sample indices: the action starts at the first sample where the
// start list holds sustained, and ends at the first sample strictly after
// that where the end list holds sustained.
inline Boundaries detect_boundaries(const SensorTrace& trace,
                                    const BoundaryRule& rule) {
    trace.validate();
    validate(rule);
    std::size_t t_s = detail::first_sustained(trace, rule.start, 0);
    if (t_s == std::string::npos)
        throw NoStartError("detect_boundaries: start condition never satisfied");
    std::size_t t_e = detail::first_sustained(trace, rule.end, t_s + 1);
    if (t_e == std::string::npos)
        throw NoEndError(
            "detect_boundaries: end condition never satisfied after sample " +
            std::to_string(t_s));
    return {t_s, t_e};
}

inline BoundaryRule rule_from_json(const nlohmann::json& j) {
    BoundaryRule rule;
    auto parse_list = [&](const char* key) {
        std::vector<AtomicCondition> out;
        check(j.contains(key) && j.at(key).is_array(), "rule: missing '", key,
              "' condition list");
        for (const auto& e : j.at(key)) {
            AtomicCondition c;
            c.channel = e.at("channel").get<std::string>();
            auto op = e.at("op").get<std::string>();
            check(op == ">" || op == "<", "rule: op must be \">\" or \"<\"");
            c.op = op[0];
            c.threshold = e.at("threshold").get<double>();
            c.sustain = e.value("sustain", 5);
            out.push_back(std::move(c));
        }
        return out;
    };
    rule.start = parse_list("start");
    rule.end = parse_list("end");
    validate(rule);
    return rule;
}

inline nlohmann::json rule_to_json(const BoundaryRule& rule) {
    nlohmann::json j;
    for (auto [key, list] : {std::pair{"start", &rule.start}, {"end", &rule.end}}) {
        auto arr = nlohmann::json::array();
        for (const auto& c : *list)
            arr.push_back({{"channel", c.channel},
                           {"op", std::string(1, c.op)},
                           {"threshold", c.threshold},
                           {"sustain", c.sustain}});
        j[key] = arr;
    }
    return j;
}

// The six built-in action rules. Conditions that name a joint without an arm
// expand to an OR over both arms.
inline const std::map<std::string, BoundaryRule>& builtin_rules() {
    static const std::map<std::string, BoundaryRule> rules = [] {
        constexpr int w = 5;
        auto both_arms = [](const std::string& suffix, char op, double thr) {
            return std::vector<AtomicCondition>{
                {"left_" + suffix, op, thr, w},
                {"right_" + suffix, op, thr, w},
            };
        };
        auto joined = [](std::initializer_list<std::vector<AtomicCondition>> lists) {
            std::vector<AtomicCondition> out;
            for (const auto& l : lists) out.insert(out.end(), l.begin(), l.end());
            return out;
        };
        std::map<std::string, BoundaryRule> r;
        r["use_cabinet"] = {
            {{"base_linear_velocity", '>', 0.2, w}},
            joined({both_arms("shoulder_velocity", '<', 0.4),
                    both_arms("elbow_velocity", '<', 0.4)})};
        r["push_chair"] = {
            {{"base_angular_velocity", '>', 0.3, w}},
            both_arms("gripper_effort", '<', -500.0)};
        r["take_elevator"] = {
            {{"base_linear_velocity", '>', 0.3, w}},
            {{"base_angular_velocity", '<', 0.3, w}}};
        r["cook_shrimp"] = {
            {{"right_gripper_effort", '>', 200.0, w}},
            {{"left_gripper_effort", '<', 600.0, w}}};
        r["wash_pan"] = {
            {{"left_gripper_effort", '>', 150.0, w}},
            {{"left_gripper_effort", '<', 100.0, w}}};
        r["wipe_wine"] = {
            {{"base_linear_velocity", '>', 0.25, w}},
            joined({both_arms("shoulder_velocity", '<', 0.5),
                    both_arms("elbow_velocity", '<', 0.5),
                    both_arms("wrist_angle_velocity", '<', 0.5)})};
        return r;
    }();
    return rules;
}

// ---------------------------------------------------------------------------
// episodes
// ---------------------------------------------------------------------------

struct Image {
    int channels = 0, height = 0, width = 0;
    std::vector<std::uint8_t> pixels; // planar, channel-major

    std::uint8_t at(int c, int y, int x) const {
        return pixels[static_cast<std::size_t>((c * height + y) * width + x)];
    }
    std::uint8_t& at(int c, int y, int x) {
        return pixels[static_cast<std::size_t>((c * height + y) * width + x)];
    }
};

struct FrameBoundaries {
    int t_s = 0;
    int t_e = 0;
};

struct Episode {
    std::string id;
    std::string action;
    int n_frames = 0;
    std::vector<double> frame_timestamps;
    std::array<std::vector<Image>, 3> views; // indexed by View
    SensorTrace trace;
    std::optional<FrameBoundaries> boundaries; // frame indices, when known

    const std::vector<Image>& frames(View v) const {
        return views[static_cast<std::size_t>(v)];
    }
    std::vector<Image>& frames(View v) {
        return views[static_cast<std::size_t>(v)];
    }
};

inline void validate(const Episode& ep) {
    check(!ep.id.empty(), "episode: empty id");
    check(ep.n_frames >= 1, "episode '", ep.id, "': needs at least one frame");
    check(static_cast<int>(ep.frame_timestamps.size()) == ep.n_frames,
          "episode '", ep.id, "': ", ep.frame_timestamps.size(),
          " timestamps for ", ep.n_frames, " frames");
    for (int i = 1; i < ep.n_frames; ++i)
        check(ep.frame_timestamps[i] > ep.frame_timestamps[i - 1], "episode '",
              ep.id, "': timestamps not strictly increasing at frame ", i);
    for (View v : kAllViews) {
        const auto& fr = ep.frames(v);
        check(static_cast<int>(fr.size()) == ep.n_frames, "episode '", ep.id,
              "': view '", view_name(v), "' has ", fr.size(), " frames, expected ",
              ep.n_frames);
        for (const auto& img : fr)
            check(img.channels == 3 && img.height >= 1 && img.width >= 1 &&
                      img.pixels.size() == static_cast<std::size_t>(3) *
                                               img.height * img.width,
                  "episode '", ep.id, "': malformed frame in view '",
                  view_name(v), "'");
    }
    ep.trace.validate();
    double trace_end = ep.frame_timestamps.front() +
                       (static_cast<double>(ep.trace.length()) - 1.0) /
                           ep.trace.sample_rate_hz;
    check(trace_end >= ep.frame_timestamps.back() - 1e-9, "episode '", ep.id,
          "': trace ends at ", trace_end, "s but frames run to ",
          ep.frame_timestamps.back(), "s");
    if (ep.boundaries) {
        check(ep.boundaries->t_s >= 0 && ep.boundaries->t_s < ep.boundaries->t_e &&
                  ep.boundaries->t_e <= ep.n_frames - 1,
              "episode '", ep.id, "': boundary frames out of range");
    }
}

// ---------------------------------------------------------------------------
// ppm io
// ---------------------------------------------------------------------------

inline void write_ppm(const fs::path& path, const Image& img) {
    check(img.channels == 3, "ppm: only 3-channel images are written");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    check(out.good(), "ppm: cannot open '", path.string(), "' for writing");
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) row[x * 3 + c] = img.at(c, y, x);
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
    check(out.good(), "ppm: write to '", path.string(), "' failed");
}

inline Image read_ppm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    check(in.good(), "ppm: cannot open '", path.string(), "'");
    auto bad = [&](const std::string& what) {
        in.clear(); // a failed stream reports tellg() == -1
        fail("ppm: '", path.string(), "': ", what, " at byte ",
             static_cast<long long>(in.tellg()));
    };
    std::string magic;
    in >> magic;
    if (magic != "P6") bad("expected P6 magic");
    auto read_int = [&] {
        int v = 0;
        in >> v;
        if (!in || v <= 0) bad("expected positive integer");
        return v;
    };
    int w = read_int(), h = read_int(), maxval = read_int();
    if (maxval != 255) bad("only maxval 255 is supported");
    in.get(); // the single whitespace byte after the header
    if (!in) bad("truncated header");
    Image img;
    img.channels = 3;
    img.width = w;
    img.height = h;
    img.pixels.resize(static_cast<std::size_t>(3) * w * h);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size()));
        if (in.gcount() != static_cast<std::streamsize>(row.size()))
            bad("truncated pixel data");
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = row[x * 3 + c];
    }
    return img;
}

// ---------------------------------------------------------------------------
// episode directory io
// ---------------------------------------------------------------------------

namespace detail {

inline std::string frame_filename(int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%05d.ppm", index);
    return buf;
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

// The manifest document exactly as write_episode lays it down; exposed so a
// boundary update can rewrite the manifest without touching frames or trace.
inline nlohmann::json manifest_json(const Episode& ep) {
    nlohmann::json manifest;
    manifest["id"] = ep.id;
    manifest["action"] = ep.action;
    manifest["n_frames"] = ep.n_frames;
    manifest["views"] = {"left", "central", "right"};
    manifest["frame_timestamps"] = ep.frame_timestamps;
    manifest["trace_sample_rate_hz"] = ep.trace.sample_rate_hz;
    if (ep.boundaries)
        manifest["boundaries"] = {{"t_s_frame", ep.boundaries->t_s},
                                  {"t_e_frame", ep.boundaries->t_e}};
    return manifest;
}

inline void write_manifest(const Episode& ep, const fs::path& dir) {
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    check(out.good(), "episode: cannot write manifest in '", dir.string(), "'");
    out << manifest_json(ep).dump(2) << "\n";
}

inline void write_episode(const Episode& ep, const fs::path& dir) {
    validate(ep);
    fs::create_directories(dir);
    write_manifest(ep, dir);
    {
        std::ofstream out(dir / "trace.csv", std::ios::trunc);
        check(out.good(), "episode: cannot write trace in '", dir.string(), "'");
        const auto& schema = trace_schema();
        for (std::size_t i = 0; i < schema.size(); ++i)
            out << (i ? "," : "") << schema[i];
        out << "\n";
        for (std::size_t s = 0; s < ep.trace.length(); ++s) {
            for (std::size_t c = 0; c < schema.size(); ++c)
                out << (c ? "," : "")
                    << detail::format_double(ep.trace.channels[c][s]);
            out << "\n";
        }
        check(out.good(), "episode: trace write failed in '", dir.string(), "'");
    }
    for (View v : kAllViews) {
        fs::path vdir = dir / "frames" / view_name(v);
        fs::create_directories(vdir);
        const auto& frames = ep.frames(v);
        for (int i = 0; i < ep.n_frames; ++i)
            write_ppm(vdir / detail::frame_filename(i), frames[i]);
    }
}

inline Episode load_episode(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    std::ifstream mf(manifest_path);
    check(mf.good(), "episode: missing manifest '", manifest_path.string(), "'");
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        fail("episode: '", manifest_path.string(), "' is not valid json: ",
             e.what());
    }

    Episode ep;
    try {
        ep.id = manifest.at("id").get<std::string>();
        ep.action = manifest.at("action").get<std::string>();
        ep.n_frames = manifest.at("n_frames").get<int>();
        ep.frame_timestamps =
            manifest.at("frame_timestamps").get<std::vector<double>>();
        ep.trace.sample_rate_hz = manifest.at("trace_sample_rate_hz").get<double>();
        if (manifest.contains("boundaries")) {
            FrameBoundaries b;
            b.t_s = manifest.at("boundaries").at("t_s_frame").get<int>();
            b.t_e = manifest.at("boundaries").at("t_e_frame").get<int>();
            ep.boundaries = b;
        }
        auto views = manifest.at("views").get<std::vector<std::string>>();
        for (View v : kAllViews) {
            bool named = false;
            for (const auto& n : views) named |= n == view_name(v);
            check(named, "episode '", ep.id, "': manifest is missing view '",
                  view_name(v), "'");
        }
    } catch (const nlohmann::json::exception& e) {
        fail("episode: '", manifest_path.string(), "' field error: ", e.what());
    }

    const fs::path trace_path = dir / "trace.csv";
    std::ifstream tf(trace_path);
    check(tf.good(), "episode: missing trace '", trace_path.string(), "'");
    std::string header;
    check(static_cast<bool>(std::getline(tf, header)), "episode: empty trace '",
          trace_path.string(), "'");
    {
        std::string expected;
        const auto& schema = trace_schema();
        for (std::size_t i = 0; i < schema.size(); ++i)
            expected += (i ? "," : "") + schema[i];
        check(header == expected, "episode: '", trace_path.string(),
              "' header does not match the trace schema");
        ep.trace.channels.assign(schema.size(), {});
    }
    std::string line;
    int lineno = 1;
    while (std::getline(tf, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(ss, cell, ',')) {
            check(col < ep.trace.channels.size(), "episode: '",
                  trace_path.string(), "' line ", lineno, " has extra columns");
            // strtod over stod: stod raises out_of_range on subnormal values
            char* endp = nullptr;
            double v = std::strtod(cell.c_str(), &endp);
            if (endp != cell.c_str() + cell.size() || cell.empty() ||
                !std::isfinite(v))
                fail("episode: '", trace_path.string(), "' line ", lineno,
                     " column ", col + 1, ": '", cell, "' is not a number");
            ep.trace.channels[col].push_back(v);
            ++col;
        }
        check(col == ep.trace.channels.size(), "episode: '", trace_path.string(),
              "' line ", lineno, " has ", col, " columns, expected ",
              ep.trace.channels.size());
    }

    for (View v : kAllViews) {
        fs::path vdir = dir / "frames" / view_name(v);
        auto& frames = ep.frames(v);
        for (int i = 0; i < ep.n_frames; ++i) {
            fs::path fp = vdir / detail::frame_filename(i);
            check(fs::exists(fp), "episode '", ep.id, "': view '", view_name(v),
                  "' is missing frame ", i, " ('", fp.string(), "')");
            frames.push_back(read_ppm(fp));
        }
    }
    validate(ep);
    return ep;
}

// ---------------------------------------------------------------------------
// progress labels and index mapping
// ---------------------------------------------------------------------------

struct ProgressLabels {
    int t_s = 0; // frame indices into the episode
    int t_e = 0;
    std::vector<double> labels; // one per frame in [t_s, t_e]

    int span_frames() const { return t_e - t_s + 1; }
};

// labels[i] = (i - t_s) / (t_e - t_s) over the inclusive frame span.
inline ProgressLabels label_progress(const Episode& ep, int t_s, int t_e) {
    check(t_s < t_e, "label_progress: t_s ", t_s, " must precede t_e ", t_e);
    check(t_s >= 0 && t_e <= ep.n_frames - 1, "label_progress: span [", t_s, ",",
          t_e, "] outside episode of ", ep.n_frames, " frames");
    ProgressLabels out;
    out.t_s = t_s;
    out.t_e = t_e;
    const double denom = t_e - t_s;
    for (int i = t_s; i <= t_e; ++i)
        out.labels.push_back(static_cast<double>(i - t_s) / denom);
    return out;
}

// Nearest-timestamp mapping from a trace sample to a frame; the trace starts
// at the first frame's timestamp. Ties break toward the earlier frame.
inline int map_trace_index_to_frame(std::size_t trace_idx,
                                    const SensorTrace& trace,
                                    const std::vector<double>& timestamps) {
    check(!timestamps.empty(), "map_trace_index_to_frame: no frames");
    check(trace_idx < trace.length(), "map_trace_index_to_frame: sample ",
          trace_idx, " outside trace of ", trace.length());
    const double t = timestamps.front() +
                     static_cast<double>(trace_idx) / trace.sample_rate_hz;
    auto it = std::lower_bound(timestamps.begin(), timestamps.end(), t);
    if (it == timestamps.begin()) return 0;
    if (it == timestamps.end()) return static_cast<int>(timestamps.size()) - 1;
    auto prev = it - 1;
    // strictly closer wins; equal distance keeps the earlier frame
    double d_prev = t - *prev, d_next = *it - t;
    auto best = d_next < d_prev ? it : prev;
    return static_cast<int>(best - timestamps.begin());
}

// Runs the rule engine on the trace and maps the hits to frame indices,
// ignoring any manifest annotation.
inline FrameBoundaries detect_frame_boundaries(const Episode& ep,
                                               const BoundaryRule& rule) {
    Boundaries b = detect_boundaries(ep.trace, rule);
    FrameBoundaries fb;
    fb.t_s = map_trace_index_to_frame(b.t_s, ep.trace, ep.frame_timestamps);
    fb.t_e = map_trace_index_to_frame(b.t_e, ep.trace, ep.frame_timestamps);
    check(fb.t_s < fb.t_e, "episode '", ep.id,
          "': detected boundaries collapse to a single frame");
    return fb;
}

// Boundaries for labeling: the manifest's explicit annotation wins, else the
// rule engine runs on the trace and maps to frame indices.
inline FrameBoundaries resolve_boundaries(const Episode& ep,
                                          const BoundaryRule& rule) {
    if (ep.boundaries) return *ep.boundaries;
    return detect_frame_boundaries(ep, rule);
}

// ---------------------------------------------------------------------------
// tensor bridge
// ---------------------------------------------------------------------------

// Pixels scaled to [0,1].
inline nn::Tensor frame_tensor(const Image& img) {
    std::vector<double> data(img.pixels.size());
    for (std::size_t i = 0; i < data.size(); ++i)
        data[i] = static_cast<double>(img.pixels[i]) / 255.0;
    return nn::Tensor::from_data({img.channels, img.height, img.width},
                                 std::move(data), false);
}

inline temporal::FrameSet make_frameset(const Episode& ep, int frame_index,
                                        const ViewMask& mask) {
    check(frame_index >= 0 && frame_index < ep.n_frames,
          "make_frameset: frame ", frame_index, " outside episode of ",
          ep.n_frames);
    temporal::FrameSet fs;
    for (View v : kAllViews)
        if (mask[v])
            fs[static_cast<int>(v)] = frame_tensor(ep.frames(v)[frame_index]);
    return fs;
}

struct LabeledEpisode {
    std::shared_ptr<Episode> episode;
    ProgressLabels labels;
};

} // namespace progressd::data
