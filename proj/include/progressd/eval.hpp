// Reference baselines and the evaluation protocol: whole-sequence MAE,
// per-quartile MAE with fresh recurrent state, per-action MAE, reports.
#pragma once

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "progressd/common.hpp"
#include "progressd/episode.hpp"
#include "progressd/temporal.hpp"
#include "progressd/views.hpp"

namespace progressd::eval {

// ---------------------------------------------------------------------------
// predictors
// ---------------------------------------------------------------------------

// Anything that can be scored by the protocol. Sequences are independent:
// begin_sequence wipes all internal state. seq_len is the number of frames
// about to be fed; span_len is the episode's full labeled span (what a
// predictor would have seen had it watched from the start).
class ProgressPredictor {
public:
    virtual ~ProgressPredictor() = default;
    virtual void begin_sequence(int seq_len, int span_len) = 0;
    virtual double predict(const temporal::FrameSet& frames) = 0;
};

class ModelPredictor final : public ProgressPredictor {
public:
    ModelPredictor(const temporal::ProgressModel& model, ViewMask mask)
        : model_(model), mask_(mask), state_(temporal::RecurrentState::fresh()) {}

    void begin_sequence(int, int) override {
        state_ = temporal::RecurrentState::fresh();
    }

    double predict(const temporal::FrameSet& frames) override {
        nn::NoGradGuard guard;
        auto res = temporal::step(model_, state_, frames, mask_,
                                  /*train=*/false, rng_);
        state_ = std::move(res.state);
        return res.p;
    }

private:
    const temporal::ProgressModel& model_;
    ViewMask mask_;
    temporal::RecurrentState state_;
    Rng rng_{0}; // never consumed in eval mode
};

class StaticPredictor final : public ProgressPredictor {
public:
    void begin_sequence(int, int) override {}
    double predict(const temporal::FrameSet&) override { return 0.5; }
};

class RandomPredictor final : public ProgressPredictor {
public:
    explicit RandomPredictor(Rng rng) : rng_(rng) {}
    void begin_sequence(int, int) override {}
    double predict(const temporal::FrameSet&) override { return rng_.uniform01(); }

private:
    Rng rng_;
};

// Counts frames since its sequence started and assumes it has watched the
// episode from the beginning: p = i / (span - 1). Scores well when sequences
// really do start at the beginning and collapses on late partial segments,
// which is exactly the shortcut the quartile protocol is built to expose.
class FrameIndexPredictor final : public ProgressPredictor {
public:
    void begin_sequence(int, int span_len) override {
        index_ = 0;
        denom_ = std::max(1, span_len - 1);
    }
    double predict(const temporal::FrameSet&) override {
        return std::min(1.0, static_cast<double>(index_++) / denom_);
    }

private:
    int index_ = 0;
    int denom_ = 1;
};

// ---------------------------------------------------------------------------
// average-index baseline
// ---------------------------------------------------------------------------

struct AverageIndexModel {
    std::vector<double> table;  // mean progress at span index i
    std::vector<int> counts;    // training videos of span length > i
};

inline AverageIndexModel fit_average_index(
    const std::vector<data::LabeledEpisode>& train) {
    check(!train.empty(), "average_index: empty training set");
    std::size_t max_len = 0;
    for (const auto& le : train)
        max_len = std::max(max_len, le.labels.labels.size());
    AverageIndexModel m;
    std::vector<double> sums(max_len, 0.0);
    m.counts.assign(max_len, 0);
    for (const auto& le : train)
        for (std::size_t i = 0; i < le.labels.labels.size(); ++i) {
            sums[i] += le.labels.labels[i];
            ++m.counts[i];
        }
    m.table.resize(max_len);
    for (std::size_t i = 0; i < max_len; ++i)
        m.table[i] = sums[i] / m.counts[i];
    return m;
}

// Indices past the table clamp to its final entry.
inline double average_index_predict(const AverageIndexModel& m, int frame_index) {
    check(!m.table.empty(), "average_index: model is not fitted");
    check(frame_index >= 0, "average_index: negative frame index");
    auto i = std::min<std::size_t>(static_cast<std::size_t>(frame_index),
                                   m.table.size() - 1);
    return m.table[i];
}

class AverageIndexPredictor final : public ProgressPredictor {
public:
    explicit AverageIndexPredictor(const AverageIndexModel& model)
        : model_(model) {
        check(!model.table.empty(), "average_index: model is not fitted");
    }
    void begin_sequence(int, int) override { index_ = 0; }
    double predict(const temporal::FrameSet&) override {
        return average_index_predict(model_, index_++);
    }

private:
    const AverageIndexModel& model_;
    int index_ = 0;
};

enum class BaselineKind { random, static_half, average_index };

inline BaselineKind baseline_from_name(const std::string& n) {
    if (n == "random") return BaselineKind::random;
    if (n == "static") return BaselineKind::static_half;
    if (n == "average_index") return BaselineKind::average_index;
    fail("unknown baseline '", n, "' (random, static or average_index)");
}

inline double baseline_predict(BaselineKind kind, int frame_index,
                               Rng* rng = nullptr,
                               const AverageIndexModel* avg = nullptr) {
    switch (kind) {
        case BaselineKind::random:
            check(rng != nullptr, "baseline_predict: random needs an rng");
            return rng->uniform01();
        case BaselineKind::static_half: return 0.5;
        case BaselineKind::average_index:
            check(avg != nullptr, "baseline_predict: average_index needs a fitted model");
            return average_index_predict(*avg, frame_index);
    }
    fail("unreachable baseline kind");
}

// ---------------------------------------------------------------------------
// protocol
// ---------------------------------------------------------------------------

namespace detail {

inline const data::Episode& episode_of(const data::LabeledEpisode& le) {
    check(le.episode != nullptr, "evaluate: labeled episode without episode data");
    return *le.episode;
}

} // namespace detail

// Mean over episodes of the per-episode mean absolute error over the full
// labeled span, in percent. Fresh state per episode.
inline double evaluate_whole(ProgressPredictor& pred,
                             const std::vector<data::LabeledEpisode>& episodes,
                             const ViewMask& mask) {
    check(!episodes.empty(), "evaluate_whole: no episodes");
    nn::NoGradGuard guard;
    double total = 0.0;
    for (const auto& le : episodes) {
        const auto& ep = detail::episode_of(le);
        const int n = static_cast<int>(le.labels.labels.size());
        pred.begin_sequence(n, n);
        double err = 0.0;
        for (int i = 0; i < n; ++i) {
            auto fs = data::make_frameset(ep, le.labels.t_s + i, mask);
            err += std::abs(pred.predict(fs) - le.labels.labels[static_cast<std::size_t>(i)]);
        }
        total += err / n;
    }
    return 100.0 * total / static_cast<double>(episodes.size());
}

struct QuartileReport {
    std::array<double, 4> mae{}; // percent, buckets [0,.25) .. [.75,1]
    int skipped = 0;
    std::vector<std::string> warnings;
};

// Each quarter of each episode is fed as an independent sequence with fresh
// state (reset_state=false chains state across quarters, which reassembles
// the whole-sequence evaluation; only the reset variant is reported).
inline QuartileReport evaluate_quartiles(
    ProgressPredictor& pred, const std::vector<data::LabeledEpisode>& episodes,
    const ViewMask& mask, bool reset_state = true) {
    check(!episodes.empty(), "evaluate_quartiles: no episodes");
    nn::NoGradGuard guard;
    QuartileReport out;
    std::array<double, 4> sums{};
    std::array<int, 4> n_episodes{};
    for (const auto& le : episodes) {
        const auto& ep = detail::episode_of(le);
        const int n = static_cast<int>(le.labels.labels.size());
        if (n < 4) {
            ++out.skipped;
            out.warnings.push_back("episode '" + ep.id + "' span of " +
                                   std::to_string(n) +
                                   " frames is too short to quarter; skipped");
            continue;
        }
        // contiguous quarter ranges by ground-truth progress
        std::array<std::pair<int, int>, 4> ranges{}; // [first, last)
        {
            int b = 0;
            ranges[0].first = 0;
            for (int i = 0; i < n; ++i) {
                double lab = le.labels.labels[static_cast<std::size_t>(i)];
                int bucket = std::min(3, static_cast<int>(lab * 4.0));
                while (b < bucket) {
                    ranges[static_cast<std::size_t>(b)].second = i;
                    ranges[static_cast<std::size_t>(++b)].first = i;
                }
            }
            while (b < 3) {
                ranges[static_cast<std::size_t>(b)].second = n;
                ranges[static_cast<std::size_t>(++b)].first = n;
            }
            ranges[3].second = n;
        }
        if (!reset_state) pred.begin_sequence(n, n);
        for (int q = 0; q < 4; ++q) {
            auto [first, last] = ranges[static_cast<std::size_t>(q)];
            if (first == last) continue;
            if (reset_state) pred.begin_sequence(last - first, n);
            double err = 0.0;
            for (int i = first; i < last; ++i) {
                auto fs = data::make_frameset(ep, le.labels.t_s + i, mask);
                err += std::abs(pred.predict(fs) -
                                le.labels.labels[static_cast<std::size_t>(i)]);
            }
            sums[static_cast<std::size_t>(q)] += err / (last - first);
            ++n_episodes[static_cast<std::size_t>(q)];
        }
    }
    for (int q = 0; q < 4; ++q) {
        check(n_episodes[static_cast<std::size_t>(q)] > 0,
              "evaluate_quartiles: no usable episodes for quarter ", q + 1);
        out.mae[static_cast<std::size_t>(q)] =
            100.0 * sums[static_cast<std::size_t>(q)] /
            n_episodes[static_cast<std::size_t>(q)];
    }
    return out;
}

inline std::map<std::string, double> per_action_report(
    ProgressPredictor& pred, const std::vector<data::LabeledEpisode>& episodes,
    const ViewMask& mask) {
    std::map<std::string, std::vector<data::LabeledEpisode>> groups;
    for (const auto& le : episodes)
        groups[detail::episode_of(le).action].push_back(le);
    std::map<std::string, double> out;
    for (const auto& [action, group] : groups)
        out[action] = evaluate_whole(pred, group, mask);
    return out;
}

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

struct EvalReport {
    double whole = 0.0;
    std::array<double, 4> quartiles{};
    std::map<std::string, double> per_action;
    std::string config_fingerprint;
    int skipped_episodes = 0;
};

inline EvalReport make_report(ProgressPredictor& pred,
                              const std::vector<data::LabeledEpisode>& episodes,
                              const ViewMask& mask,
                              const std::string& fingerprint) {
    EvalReport r;
    r.whole = evaluate_whole(pred, episodes, mask);
    auto q = evaluate_quartiles(pred, episodes, mask);
    r.quartiles = q.mae;
    r.skipped_episodes = q.skipped;
    r.per_action = per_action_report(pred, episodes, mask);
    r.config_fingerprint = fingerprint;
    return r;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json j;
    j["whole_mae_percent"] = r.whole;
    j["quartile_mae_percent"] = r.quartiles;
    j["per_action_mae_percent"] = r.per_action;
    j["config_fingerprint"] = r.config_fingerprint;
    j["skipped_episodes"] = r.skipped_episodes;
    return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport r;
    try {
        r.whole = j.at("whole_mae_percent").get<double>();
        r.quartiles = j.at("quartile_mae_percent").get<std::array<double, 4>>();
        r.per_action =
            j.at("per_action_mae_percent").get<std::map<std::string, double>>();
        r.config_fingerprint = j.at("config_fingerprint").get<std::string>();
        r.skipped_episodes = j.at("skipped_episodes").get<int>();
    } catch (const nlohmann::json::exception& e) {
        fail("eval report: ", e.what());
    }
    return r;
}

// Table-ordered CSV: quartiles low to high, then the whole-sequence column.
inline std::string report_to_csv(const EvalReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.quartiles[0], r.quartiles[1], r.quartiles[2], r.quartiles[3],
                  r.whole);
    return std::string("[0-25],[25-50],[50-75],[75-100],whole\n") + buf;
}

} // namespace progressd::eval
