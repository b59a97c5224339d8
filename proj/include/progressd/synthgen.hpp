// Synthetic multi-view episode generator: frames visually encode ground-truth
// progress, traces are constructed so rule-based segmentation recovers the
// true boundaries exactly, and all randomness derives from per-episode seeds.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "progressd/common.hpp"
#include "progressd/episode.hpp"
#include "progressd/views.hpp"

namespace progressd::synth {

namespace fs = std::filesystem;

constexpr double kFps = 10.0;          // frame rate of the rendered views
constexpr double kTraceRate = 20.0;    // sensor samples per second
// trace samples per frame interval; boundaries land exactly on frame times
constexpr int kTracePerFrame = 2;

enum class CueStyle { filling_bar, moving_disc, rotating_dial };
enum class OcclusionMode { per_frame, contiguous_block };

inline std::string cue_style_name(CueStyle s) {
    switch (s) {
        case CueStyle::filling_bar: return "filling_bar";
        case CueStyle::moving_disc: return "moving_disc";
        case CueStyle::rotating_dial: return "rotating_dial";
    }
    fail("unreachable cue style");
}

inline CueStyle cue_style_from_name(const std::string& n) {
    if (n == "filling_bar") return CueStyle::filling_bar;
    if (n == "moving_disc") return CueStyle::moving_disc;
    if (n == "rotating_dial") return CueStyle::rotating_dial;
    fail("unknown cue style '", n,
         "' (expected filling_bar, moving_disc or rotating_dial)");
}

struct SynthConfig {
    std::uint64_t seed = 1;
    int n_episodes = 10;
    std::string action = "use_cabinet";
    int image_size = 32;
    std::array<int, 2> duration_range = {40, 120};   // action span, frames
    std::array<int, 2> idle_prefix_range = {3, 8};   // idle frames before
    std::array<int, 2> idle_suffix_range = {3, 8};   // idle frames after
    std::map<std::string, double> occlusion;         // view name -> probability
    CueStyle cue_style = CueStyle::filling_bar;
    OcclusionMode occlusion_mode = OcclusionMode::per_frame;
    double noise_level = 0.0;                        // pixel noise std, 0..255
    std::optional<data::BoundaryRule> trace_rule;    // default: built-in rule

    double occlusion_for(View v) const {
        auto it = occlusion.find(view_name(v));
        return it == occlusion.end() ? 0.0 : it->second;
    }
};

inline const data::BoundaryRule& resolve_rule(const SynthConfig& cfg) {
    if (cfg.trace_rule) return *cfg.trace_rule;
    const auto& rules = data::builtin_rules();
    auto it = rules.find(cfg.action);
    check(it != rules.end(), "synth: no built-in rule for action '", cfg.action,
          "'; provide trace_rule");
    return it->second;
}

// ---------------------------------------------------------------------------
// cue geometry
// ---------------------------------------------------------------------------

struct Rect { // half-open pixel rectangle
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

struct CueLayout {
    Rect bbox;          // cue bounding box in the central view
    int bar_width = 0;  // filling_bar
    int bar_height = 0;
    int radius = 0;     // moving_disc
    int travel = 0;
    int needle = 0;     // rotating_dial
};

inline int view_dx(const SynthConfig& cfg, View v) {
    int dx = std::max(1, cfg.image_size / 6);
    switch (v) {
        case View::left: return -dx;
        case View::central: return 0;
        case View::right: return dx;
    }
    fail("unreachable view");
}

inline CueLayout cue_layout(const SynthConfig& cfg) {
    const int s = cfg.image_size;
    CueLayout lay;
    switch (cfg.cue_style) {
        case CueStyle::filling_bar: {
            int half_w = std::max(1, s / 8);
            int margin = std::max(1, s / 8);
            lay.bbox = {s / 2 - half_w, margin, s / 2 + half_w, s - margin};
            lay.bar_width = lay.bbox.x1 - lay.bbox.x0;
            lay.bar_height = lay.bbox.y1 - lay.bbox.y0;
            check(lay.bar_width >= 1 && lay.bar_height >= 1,
                  "synth: image size ", s, " leaves the bar cue under one pixel");
            break;
        }
        case CueStyle::moving_disc: {
            lay.radius = std::max(1, s / 10);
            int x_lo = lay.radius + 1, x_hi = s - lay.radius - 2;
            lay.travel = x_hi - x_lo;
            lay.bbox = {x_lo - lay.radius, s / 2 - lay.radius - 1,
                        x_hi + lay.radius + 1, s / 2 + lay.radius + 2};
            check(lay.travel >= 1, "synth: image size ", s,
                  " leaves the disc cue under one pixel of travel");
            break;
        }
        case CueStyle::rotating_dial: {
            lay.needle = s / 2 - 2;
            int c = s / 2;
            lay.bbox = {c - lay.needle - 1, c - lay.needle - 1,
                        c + lay.needle + 2, c + lay.needle + 2};
            check(lay.needle >= 1, "synth: image size ", s,
                  " leaves the dial cue under one pixel of needle");
            break;
        }
    }
    return lay;
}

inline void validate(const SynthConfig& cfg) {
    check(cfg.n_episodes >= 1, "synth: n_episodes must be >= 1");
    check(cfg.image_size >= 6, "synth: image size must be >= 6");
    cue_layout(cfg); // cue degeneracy check
    check(cfg.duration_range[0] <= cfg.duration_range[1] &&
              cfg.duration_range[0] >= 4,
          "synth: duration range must be ordered with minimum >= 4 frames");
    for (auto [name, r] : {std::pair{"idle prefix", cfg.idle_prefix_range},
                           {"idle suffix", cfg.idle_suffix_range}})
        check(r[0] >= 1 && r[0] <= r[1], "synth: ", name,
              " range must be ordered with minimum >= 1 frame");
    for (const auto& [view, p] : cfg.occlusion) {
        view_from_name(view); // rejects unknown names
        check(p >= 0.0 && p <= 1.0, "synth: occlusion probability for '", view,
              "' must be in [0,1], got ", p);
    }
    check(cfg.noise_level >= 0.0, "synth: noise level must be >= 0");
    const auto& rule = resolve_rule(cfg);
    data::validate(rule);
    int max_start_w = 0, max_end_w = 0;
    for (const auto& c : rule.start) max_start_w = std::max(max_start_w, c.sustain);
    for (const auto& c : rule.end) max_end_w = std::max(max_end_w, c.sustain);
    check(max_start_w <= kTracePerFrame * (cfg.duration_range[0] - 1),
          "synth: start sustain ", max_start_w,
          " cannot fit inside the minimum action duration");
    check(max_end_w <= kTracePerFrame * cfg.idle_suffix_range[0] + 1,
          "synth: end sustain ", max_end_w,
          " cannot fit inside the minimum idle suffix");
}

// ---------------------------------------------------------------------------
// config json
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const SynthConfig& cfg) {
    nlohmann::json j;
    j["seed"] = cfg.seed;
    j["n_episodes"] = cfg.n_episodes;
    j["action"] = cfg.action;
    j["image_size"] = cfg.image_size;
    j["duration_range"] = cfg.duration_range;
    j["idle_prefix_range"] = cfg.idle_prefix_range;
    j["idle_suffix_range"] = cfg.idle_suffix_range;
    j["occlusion"] = cfg.occlusion;
    j["cue_style"] = cue_style_name(cfg.cue_style);
    j["occlusion_mode"] = cfg.occlusion_mode == OcclusionMode::per_frame
                              ? "per_frame"
                              : "contiguous_block";
    j["noise_level"] = cfg.noise_level;
    if (cfg.trace_rule) j["trace_rule"] = data::rule_to_json(*cfg.trace_rule);
    return j;
}

inline SynthConfig synth_config_from_json(const nlohmann::json& j) {
    SynthConfig cfg;
    try {
        cfg.seed = j.value("seed", cfg.seed);
        cfg.n_episodes = j.value("n_episodes", cfg.n_episodes);
        cfg.action = j.value("action", cfg.action);
        cfg.image_size = j.value("image_size", cfg.image_size);
        cfg.duration_range = j.value("duration_range", cfg.duration_range);
        cfg.idle_prefix_range = j.value("idle_prefix_range", cfg.idle_prefix_range);
        cfg.idle_suffix_range = j.value("idle_suffix_range", cfg.idle_suffix_range);
        cfg.occlusion = j.value("occlusion", cfg.occlusion);
        if (j.contains("cue_style"))
            cfg.cue_style = cue_style_from_name(j.at("cue_style").get<std::string>());
        if (j.contains("occlusion_mode")) {
            auto m = j.at("occlusion_mode").get<std::string>();
            check(m == "per_frame" || m == "contiguous_block",
                  "synth: unknown occlusion mode '", m, "'");
            cfg.occlusion_mode = m == "per_frame" ? OcclusionMode::per_frame
                                                  : OcclusionMode::contiguous_block;
        }
        cfg.noise_level = j.value("noise_level", cfg.noise_level);
        if (j.contains("trace_rule"))
            cfg.trace_rule = data::rule_from_json(j.at("trace_rule"));
    } catch (const nlohmann::json::exception& e) {
        fail("synth config: ", e.what());
    }
    validate(cfg);
    return cfg;
}

// ---------------------------------------------------------------------------
// drawing
// ---------------------------------------------------------------------------

using Color = std::array<std::uint8_t, 3>;

constexpr Color kBackground{28, 28, 32};
constexpr Color kBarFrame{95, 95, 105};
constexpr Color kBarUnlit{45, 45, 52};
constexpr Color kBarLit{235, 60, 50};
constexpr Color kTrack{60, 60, 70};
constexpr Color kDisc{60, 200, 240};
constexpr Color kHub{200, 200, 210};
constexpr Color kNeedle{235, 200, 60};

namespace detail {

inline void fill_rect(data::Image& img, Rect r, Color c) {
    int x0 = std::max(0, r.x0), y0 = std::max(0, r.y0);
    int x1 = std::min(img.width, r.x1), y1 = std::min(img.height, r.y1);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
            for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) = c[ch];
}

inline void draw_disc(data::Image& img, int cx, int cy, int rad, Color c) {
    for (int y = cy - rad; y <= cy + rad; ++y)
        for (int x = cx - rad; x <= cx + rad; ++x) {
            if (x < 0 || y < 0 || x >= img.width || y >= img.height) continue;
            int dx = x - cx, dy = y - cy;
            if (dx * dx + dy * dy <= rad * rad)
                for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) = c[ch];
        }
}

inline void draw_segment(data::Image& img, int x0, int y0, double x1, double y1,
                         Color c) {
    double len = std::hypot(x1 - x0, y1 - y0);
    int steps = std::max(1, static_cast<int>(std::ceil(len * 2)));
    for (int i = 0; i <= steps; ++i) {
        double t = static_cast<double>(i) / steps;
        int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
        int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
        if (x < 0 || y < 0 || x >= img.width || y >= img.height) continue;
        for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) = c[ch];
    }
}

} // namespace detail

// One view of the cue at the given fill level; deterministic (noise and
// occlusion are applied by the episode generator).
inline data::Image render_frame(const SynthConfig& cfg, View v, double progress) {
    check(progress >= 0.0 && progress <= 1.0, "render_frame: progress ",
          progress, " outside [0,1]");
    const int s = cfg.image_size;
    const int dx = view_dx(cfg, v);
    const CueLayout lay = cue_layout(cfg);
    data::Image img;
    img.channels = 3;
    img.height = img.width = s;
    img.pixels.assign(static_cast<std::size_t>(3) * s * s, 0);
    detail::fill_rect(img, {0, 0, s, s}, kBackground);
    switch (cfg.cue_style) {
        case CueStyle::filling_bar: {
            Rect bar{lay.bbox.x0 + dx, lay.bbox.y0, lay.bbox.x1 + dx, lay.bbox.y1};
            detail::fill_rect(img, {bar.x0 - 1, bar.y0 - 1, bar.x1 + 1, bar.y1 + 1},
                              kBarFrame);
            detail::fill_rect(img, bar, kBarUnlit);
            int lit = static_cast<int>(std::lround(progress * lay.bar_height));
            detail::fill_rect(img, {bar.x0, bar.y1 - lit, bar.x1, bar.y1},
                              kBarLit);
            break;
        }
        case CueStyle::moving_disc: {
            int x_lo = lay.radius + 1 + dx;
            int cy = s / 2;
            detail::fill_rect(img, {x_lo, cy, x_lo + lay.travel + 1, cy + 1},
                              kTrack);
            int cx = x_lo + static_cast<int>(std::lround(progress * lay.travel));
            detail::draw_disc(img, cx, cy, lay.radius, kDisc);
            break;
        }
        case CueStyle::rotating_dial: {
            int cx = s / 2 + dx, cy = s / 2;
            // sweeps from pointing left (progress 0) to pointing right (1)
            double angle = (1.0 - progress) * 3.14159265358979323846;
            detail::draw_segment(img, cx, cy, cx + lay.needle * std::cos(angle),
                                 cy - lay.needle * std::sin(angle),
                                 kNeedle);
            detail::draw_disc(img, cx, cy, 1, kHub);
            break;
        }
    }
    return img;
}

// ---------------------------------------------------------------------------
// trace construction
// ---------------------------------------------------------------------------

namespace detail {

struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    bool empty() const { return lo > hi; }
    void clip_lo(double v) { lo = std::max(lo, v); }
    void clip_hi(double v) { hi = std::min(hi, v); }
};

inline double rule_margin(double threshold) {
    return 0.1 * std::max(1.0, std::abs(threshold));
}

// Shrink the interval so every value in it satisfies (or violates) the
// condition with a margin.
inline void constrain(Interval& iv, const data::AtomicCondition& c, bool satisfy) {
    double m = rule_margin(c.threshold);
    bool above = (c.op == '>') == satisfy; // required side of the threshold
    if (above)
        iv.clip_lo(c.threshold + m);
    else
        iv.clip_hi(c.threshold - m);
}

// Per-phase value intervals for every channel the rule touches.
// Phases: A = idle prefix, B = action, C = idle suffix.
struct ChannelPlan {
    std::array<Interval, 3> phase;
    std::array<bool, 3> constrained{false, false, false};
};

inline std::map<std::string, ChannelPlan> plan_channels(
    const data::BoundaryRule& rule, const data::AtomicCondition& chosen_start,
    const data::AtomicCondition& chosen_end) {
    std::map<std::string, ChannelPlan> plan;
    auto apply = [&](int phase, const data::AtomicCondition& c, bool satisfy) {
        auto& p = plan[c.channel];
        constrain(p.phase[static_cast<std::size_t>(phase)], c, satisfy);
        p.constrained[static_cast<std::size_t>(phase)] = true;
    };
    for (const auto& c : rule.start) apply(0, c, false); // quiet before start
    for (const auto& c : rule.end) apply(0, c, false);
    apply(1, chosen_start, true);                        // action in progress
    for (const auto& c : rule.end) apply(1, c, false);
    apply(2, chosen_end, true);                          // action finished
    for (const auto& [name, p] : plan)
        for (int ph = 0; ph < 3; ++ph)
            check(!p.phase[static_cast<std::size_t>(ph)].empty(),
                  "synth: rule constraints on channel '", name,
                  "' are mutually unsatisfiable; trace cannot be constructed");
    return plan;
}

// A value comfortably inside the interval plus the jitter amplitude that is
// guaranteed not to escape it.
inline std::pair<double, double> base_and_amplitude(const Interval& iv) {
    bool lo_f = std::isfinite(iv.lo), hi_f = std::isfinite(iv.hi);
    if (lo_f && hi_f) {
        double room = (iv.hi - iv.lo) / 2.0;
        return {(iv.lo + iv.hi) / 2.0, room / 2.0};
    }
    if (lo_f) {
        double room = 0.25 * std::max(1.0, std::abs(iv.lo));
        return {iv.lo + room, room / 2.0};
    }
    if (hi_f) {
        double room = 0.25 * std::max(1.0, std::abs(iv.hi));
        return {iv.hi - room, room / 2.0};
    }
    return {0.0, 1.0}; // fully free
}

} // namespace detail

// ---------------------------------------------------------------------------
// episode generation
// ---------------------------------------------------------------------------

// Pure in-memory generation; the rng must be the episode's own derived stream.
inline data::Episode generate_episode(const SynthConfig& cfg, Rng& rng,
                                      const std::string& id) {
    validate(cfg);
    const auto& rule = resolve_rule(cfg);

    const int duration = static_cast<int>(
        rng.uniform_int(cfg.duration_range[0], cfg.duration_range[1]));
    const int prefix = static_cast<int>(
        rng.uniform_int(cfg.idle_prefix_range[0], cfg.idle_prefix_range[1]));
    const int suffix = static_cast<int>(
        rng.uniform_int(cfg.idle_suffix_range[0], cfg.idle_suffix_range[1]));
    const int n_frames = prefix + duration + suffix;
    const int t_s = prefix;
    const int t_e = prefix + duration - 1;

    data::Episode ep;
    ep.id = id;
    ep.action = cfg.action;
    ep.n_frames = n_frames;
    for (int f = 0; f < n_frames; ++f)
        ep.frame_timestamps.push_back(static_cast<double>(f) / kFps);
    ep.boundaries = data::FrameBoundaries{t_s, t_e};

    // --- trace: phase A quiet, phase B one start member held, phase C one
    // end member held, margins keep every predicate decision stable
    const auto& chosen_start =
        rule.start[rng.uniform_index(rule.start.size())];
    const auto& chosen_end = rule.end[rng.uniform_index(rule.end.size())];
    auto plan = detail::plan_channels(rule, chosen_start, chosen_end);

    const std::size_t trace_ts = static_cast<std::size_t>(kTracePerFrame) * t_s;
    const std::size_t trace_te = static_cast<std::size_t>(kTracePerFrame) * t_e;
    const std::size_t trace_len =
        static_cast<std::size_t>(kTracePerFrame) * (n_frames - 1) + 3;

    ep.trace.sample_rate_hz = kTraceRate;
    ep.trace.channels.assign(data::trace_schema().size(), {});
    for (std::size_t c = 0; c < data::trace_schema().size(); ++c) {
        const auto& name = data::trace_schema()[c];
        auto it = plan.find(name);
        auto& series = ep.trace.channels[c];
        series.resize(trace_len);
        if (it == plan.end()) {
            for (auto& v : series) v = rng.uniform(-1.5, 1.5);
            continue;
        }
        std::array<std::pair<double, double>, 3> ba;
        for (int ph = 0; ph < 3; ++ph)
            ba[static_cast<std::size_t>(ph)] = detail::base_and_amplitude(
                it->second.phase[static_cast<std::size_t>(ph)]);
        for (std::size_t i = 0; i < trace_len; ++i) {
            int ph = i < trace_ts ? 0 : (i < trace_te ? 1 : 2);
            auto [base, amp] = ba[static_cast<std::size_t>(ph)];
            series[i] = base + rng.uniform(-amp, amp);
        }
    }

    // --- frames: cue shows clamped progress; occlusion hides it per view
    const CueLayout lay = cue_layout(cfg);
    std::array<std::vector<bool>, 3> occluded;
    for (View v : kAllViews) {
        auto& occ = occluded[static_cast<std::size_t>(v)];
        occ.assign(static_cast<std::size_t>(n_frames), false);
        double p = cfg.occlusion_for(v);
        if (cfg.occlusion_mode == OcclusionMode::per_frame) {
            for (int f = 0; f < n_frames; ++f) occ[static_cast<std::size_t>(f)] = rng.bernoulli(p);
        } else {
            int len = static_cast<int>(std::lround(p * n_frames));
            if (len > 0) {
                int start = static_cast<int>(rng.uniform_index(
                    static_cast<std::size_t>(n_frames - len + 1)));
                for (int f = start; f < start + len; ++f)
                    occ[static_cast<std::size_t>(f)] = true;
            }
        }
    }
    for (int f = 0; f < n_frames; ++f) {
        double p = f <= t_s ? 0.0
                 : f >= t_e ? 1.0
                            : static_cast<double>(f - t_s) / (t_e - t_s);
        for (View v : kAllViews) {
            data::Image img = render_frame(cfg, v, p);
            if (occluded[static_cast<std::size_t>(v)][static_cast<std::size_t>(f)]) {
                int dx = view_dx(cfg, v);
                Rect r{lay.bbox.x0 + dx - static_cast<int>(rng.uniform_index(4)),
                       lay.bbox.y0 - static_cast<int>(rng.uniform_index(4)),
                       lay.bbox.x1 + dx + static_cast<int>(rng.uniform_index(4)),
                       lay.bbox.y1 + static_cast<int>(rng.uniform_index(4))};
                auto gray = static_cast<std::uint8_t>(rng.uniform_int(40, 200));
                detail::fill_rect(img, r, {gray, gray, gray});
            }
            if (cfg.noise_level > 0.0)
                for (auto& px : img.pixels) {
                    double noisy = px + rng.normal() * cfg.noise_level;
                    px = static_cast<std::uint8_t>(
                        std::clamp(std::lround(noisy), 0L, 255L));
                }
            ep.frames(v).push_back(std::move(img));
        }
    }
    data::validate(ep);
    return ep;
}

// ---------------------------------------------------------------------------
// datasets
// ---------------------------------------------------------------------------

struct SplitFractions {
    double train = 0.8, val = 0.1, test = 0.1;
};

struct Dataset {
    fs::path root;
    std::string action;
    std::vector<std::string> train, val, test; // episode directory names

    const std::vector<std::string>& split(const std::string& name) const {
        if (name == "train") return train;
        if (name == "val") return val;
        if (name == "test") return test;
        fail("dataset: unknown split '", name, "' (train, val or test)");
    }
};

inline std::string episode_dir_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "ep_%05d", index);
    return buf;
}

// Episodes get disjoint rng streams derived from the master seed, and the
// split is a deterministic partition by episode index.
inline Dataset generate_dataset(const SynthConfig& cfg,
                                const SplitFractions& fractions,
                                const fs::path& out_dir) {
    validate(cfg);
    check(fractions.train >= 0 && fractions.val >= 0 && fractions.test >= 0,
          "synth: split fractions must be non-negative");
    check(std::abs(fractions.train + fractions.val + fractions.test - 1.0) < 1e-9,
          "synth: split fractions must sum to 1");
    const int n = cfg.n_episodes;
    int n_train = static_cast<int>(std::lround(fractions.train * n));
    int n_val = static_cast<int>(std::lround(fractions.val * n));
    n_train = std::min(n_train, n);
    n_val = std::min(n_val, n - n_train);

    Dataset ds;
    ds.root = out_dir;
    ds.action = cfg.action;
    fs::create_directories(out_dir);
    Rng master(cfg.seed);
    for (int i = 0; i < n; ++i) {
        Rng ep_rng = master.fork(static_cast<std::uint64_t>(i));
        std::string name = episode_dir_name(i);
        data::Episode ep = generate_episode(cfg, ep_rng, name);
        data::write_episode(ep, out_dir / name);
        (i < n_train ? ds.train : i < n_train + n_val ? ds.val : ds.test)
            .push_back(name);
    }
    nlohmann::json manifest;
    manifest["action"] = cfg.action;
    manifest["n_episodes"] = n;
    manifest["seed"] = cfg.seed;
    manifest["config"] = to_json(cfg);
    manifest["splits"] = {{"train", ds.train}, {"val", ds.val}, {"test", ds.test}};
    std::ofstream out(out_dir / "dataset.json", std::ios::trunc);
    check(out.good(), "synth: cannot write dataset manifest in '",
          out_dir.string(), "'");
    out << manifest.dump(2) << "\n";
    return ds;
}

inline Dataset load_dataset(const fs::path& dir) {
    std::ifstream in(dir / "dataset.json");
    check(in.good(), "dataset: missing manifest '", (dir / "dataset.json").string(),
          "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail("dataset: '", (dir / "dataset.json").string(),
             "' is not valid json: ", e.what());
    }
    Dataset ds;
    ds.root = dir;
    try {
        ds.action = j.at("action").get<std::string>();
        ds.train = j.at("splits").at("train").get<std::vector<std::string>>();
        ds.val = j.at("splits").at("val").get<std::vector<std::string>>();
        ds.test = j.at("splits").at("test").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        fail("dataset: '", (dir / "dataset.json").string(), "' field error: ",
             e.what());
    }
    return ds;
}

// Loads a split and labels every episode, preferring manifest boundaries and
// falling back to rule-based detection.
inline std::vector<data::LabeledEpisode> load_labeled_split(
    const Dataset& ds, const std::string& split_name,
    const data::BoundaryRule& rule) {
    std::vector<data::LabeledEpisode> out;
    for (const auto& name : ds.split(split_name)) {
        auto ep = std::make_shared<data::Episode>(
            data::load_episode(ds.root / name));
        auto b = data::resolve_boundaries(*ep, rule);
        data::LabeledEpisode le;
        le.labels = data::label_progress(*ep, b.t_s, b.t_e);
        le.episode = std::move(ep);
        out.push_back(std::move(le));
    }
    return out;
}

} // namespace progressd::synth
