// Two stacked LSTM layers and a sigmoid head over the fused per-frame
// feature, plus the full multi-view progress model that ties the backbone,
// pyramid pooling and fusion stages together. Strictly causal: a step sees
// the current frame and the carried state, nothing else.
#pragma once

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "progressd/backbone.hpp"
#include "progressd/common.hpp"
#include "progressd/fusion.hpp"
#include "progressd/optim.hpp"
#include "progressd/tensor.hpp"
#include "progressd/views.hpp"

namespace progressd::temporal {

using nn::Tensor;

inline constexpr int kHidden = 32;
inline constexpr int kLstmLayers = 2;

struct LstmParams {
    Tensor w; // (in + hidden) x 4*hidden, gate order i, f, g, o
    Tensor b; // 1 x 4*hidden
    int in_dim = 0;
    int hidden = 0;
};

inline LstmParams init_lstm(int in_dim, int hidden, Rng& rng) {
    check(in_dim >= 1 && hidden >= 1, "lstm: dims must be positive");
    LstmParams p;
    p.in_dim = in_dim;
    p.hidden = hidden;
    const int rows = in_dim + hidden, cols = 4 * hidden;
    double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    std::vector<double> w(static_cast<std::size_t>(rows) * cols);
    for (auto& v : w) v = rng.uniform(-bound, bound);
    p.w = Tensor::from_data({rows, cols}, std::move(w), true);
    // forget-gate bias starts at 1 so early cells keep their memory
    std::vector<double> b(static_cast<std::size_t>(cols), 0.0);
    for (int j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;
    p.b = Tensor::from_data({1, cols}, std::move(b), true);
    return p;
}

// One cell update: gates from [x, h] through a single affine map, then the
// usual sigmoid/sigmoid/tanh/sigmoid split. Returns (h', c').
inline std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h,
                                           const Tensor& c, const LstmParams& p) {
    check(x.shape() == nn::Shape({1, p.in_dim}), "lstm_cell: input shape ",
          nn::shape_str(x.shape()), " does not match in_dim ", p.in_dim);
    check(h.shape() == nn::Shape({1, p.hidden}) &&
              c.shape() == nn::Shape({1, p.hidden}),
          "lstm_cell: state shape does not match hidden size ", p.hidden);
    const int hd = p.hidden;
    Tensor gates = nn::affine(nn::concat({x, h}, 1), p.w, p.b);
    Tensor i = nn::sigmoid(nn::slice2d(gates, 0, 1, 0, hd));
    Tensor f = nn::sigmoid(nn::slice2d(gates, 0, 1, hd, 2 * hd));
    Tensor g = nn::tanh_act(nn::slice2d(gates, 0, 1, 2 * hd, 3 * hd));
    Tensor o = nn::sigmoid(nn::slice2d(gates, 0, 1, 3 * hd, 4 * hd));
    Tensor c_next = nn::add(nn::mul(f, c), nn::mul(i, g));
    Tensor h_next = nn::mul(o, nn::tanh_act(c_next));
    return {h_next, c_next};
}

struct RecurrentState {
    std::array<Tensor, kLstmLayers> h;
    std::array<Tensor, kLstmLayers> c;
    std::int64_t frames_seen = 0;

    static RecurrentState fresh() {
        RecurrentState s;
        for (int l = 0; l < kLstmLayers; ++l) {
            s.h[l] = Tensor::zeros({1, kHidden});
            s.c[l] = Tensor::zeros({1, kHidden});
        }
        return s;
    }
};

struct ModelConfig {
    backbone::BackboneConfig backbone;
    bool share_backbone = true;
    double dropout = 0.5;
};

struct ProgressModel {
    ModelConfig config;
    std::vector<backbone::BackboneParams> backbones; // 1 if shared, else 3
    std::array<fusion::EmbedParams, 3> embeds;       // left, central, right
    fusion::FuseParams fuse;
    LstmParams lstm1, lstm2;
    Tensor head_w, head_b;
};

inline ProgressModel build_model(const ModelConfig& cfg, Rng& rng) {
    backbone::validate(cfg.backbone);
    check(cfg.dropout >= 0.0 && cfg.dropout < 1.0,
          "model: dropout must be in [0,1), got ", cfg.dropout);
    const int grid = backbone::out_extent(cfg.backbone);
    check(grid >= 3, "model: backbone grid ", grid, "x", grid,
          " is too small for the 3x3 pyramid level");
    ProgressModel m;
    m.config = cfg;
    const int n_backbones = cfg.share_backbone ? 1 : 3;
    for (int i = 0; i < n_backbones; ++i)
        m.backbones.push_back(backbone::init_params(cfg.backbone, rng));
    const int spp_len =
        fusion::kPyramidFactor * backbone::out_channels(cfg.backbone);
    for (View v : kAllViews)
        m.embeds[static_cast<int>(v)] = fusion::init_embed_params(spp_len, rng);
    m.fuse = fusion::init_fuse_params(rng);
    m.lstm1 = init_lstm(fusion::kFusedWidth, kHidden, rng);
    m.lstm2 = init_lstm(kHidden, kHidden, rng);
    double bound = 1.0 / std::sqrt(static_cast<double>(kHidden));
    std::vector<double> hw(kHidden);
    for (auto& v : hw) v = rng.uniform(-bound, bound);
    m.head_w = Tensor::from_data({kHidden, 1}, std::move(hw), true);
    m.head_b = Tensor::zeros({1, 1}, true);
    return m;
}

inline const backbone::BackboneParams& backbone_for(const ProgressModel& m,
                                                    View v) {
    return m.config.share_backbone ? m.backbones[0]
                                   : m.backbones[static_cast<int>(v)];
}

// Every parameter, for checkpointing.
inline nn::ParamList model_params(const ProgressModel& m) {
    nn::ParamList out;
    if (m.config.share_backbone) {
        backbone::append_params(out, "backbone", m.config.backbone,
                                m.backbones[0]);
    } else {
        for (View v : kAllViews)
            backbone::append_params(out, std::string("backbone.") + view_name(v),
                                    m.config.backbone,
                                    m.backbones[static_cast<int>(v)]);
    }
    for (View v : kAllViews) {
        const auto& e = m.embeds[static_cast<int>(v)];
        out.push_back({std::string("embed.") + view_name(v) + ".w", e.w});
        out.push_back({std::string("embed.") + view_name(v) + ".b", e.b});
    }
    out.push_back({"fuse.w", m.fuse.w});
    out.push_back({"fuse.b", m.fuse.b});
    out.push_back({"lstm1.w", m.lstm1.w});
    out.push_back({"lstm1.b", m.lstm1.b});
    out.push_back({"lstm2.w", m.lstm2.w});
    out.push_back({"lstm2.b", m.lstm2.b});
    out.push_back({"head.w", m.head_w});
    out.push_back({"head.b", m.head_b});
    return out;
}

// Parameters that actually receive gradients when training under the given
// view mask; embeddings (and unshared backbones) of inactive views never
// enter the graph and would trip the optimizer's missing-gradient check.
inline nn::ParamList trainable_params(const ProgressModel& m,
                                      const ViewMask& mask) {
    check(mask.count() > 0, "model: empty view mask");
    nn::ParamList out;
    if (m.config.share_backbone) {
        backbone::append_params(out, "backbone", m.config.backbone,
                                m.backbones[0]);
    } else {
        for (View v : kAllViews)
            if (mask[v])
                backbone::append_params(out,
                                        std::string("backbone.") + view_name(v),
                                        m.config.backbone,
                                        m.backbones[static_cast<int>(v)]);
    }
    for (View v : kAllViews) {
        if (!mask[v]) continue;
        const auto& e = m.embeds[static_cast<int>(v)];
        out.push_back({std::string("embed.") + view_name(v) + ".w", e.w});
        out.push_back({std::string("embed.") + view_name(v) + ".b", e.b});
    }
    out.push_back({"fuse.w", m.fuse.w});
    out.push_back({"fuse.b", m.fuse.b});
    out.push_back({"lstm1.w", m.lstm1.w});
    out.push_back({"lstm1.b", m.lstm1.b});
    out.push_back({"lstm2.w", m.lstm2.w});
    out.push_back({"lstm2.b", m.lstm2.b});
    out.push_back({"head.w", m.head_w});
    out.push_back({"head.b", m.head_b});
    return out;
}

using FrameSet = std::array<Tensor, 3>; // indexed by View; active slots defined

struct StepResult {
    RecurrentState state;
    Tensor p_tensor; // 1x1, inside the graph when training
    double p = 0.0;  // same value, clamped into the open interval
};

namespace detail {

// The reported estimate stays inside (0,1) even when the sigmoid rounds to
// an endpoint in double precision.
inline double clamp_open_unit(double p) {
    if (p <= 0.0) return std::nextafter(0.0, 1.0);
    if (p >= 1.0) return std::nextafter(1.0, 0.0);
    return p;
}

} // namespace detail

inline StepResult step(const ProgressModel& m, const RecurrentState& state,
                       const FrameSet& frames, const ViewMask& mask, bool train,
                       Rng& rng) {
    check(mask.count() > 0, "step: empty view mask");
    check(state.frames_seen >= 0, "step: corrupt recurrent state");
    for (int l = 0; l < kLstmLayers; ++l)
        check(state.h[l].defined() && state.c[l].defined() &&
                  state.h[l].shape() == nn::Shape({1, kHidden}) &&
                  state.c[l].shape() == nn::Shape({1, kHidden}),
              "step: recurrent state does not match the model's hidden size");
    std::vector<fusion::ViewEmbedding> embeddings;
    for (View v : kAllViews) {
        if (!mask[v]) continue;
        const Tensor& frame = frames[static_cast<int>(v)];
        check(frame.defined(), "step: no frame supplied for active view '",
              view_name(v), "'");
        Tensor grid = backbone::forward(frame, m.config.backbone, backbone_for(m, v));
        Tensor pooled = fusion::spp(grid);
        embeddings.push_back(fusion::embed_view(v, pooled,
                                                m.embeds[static_cast<int>(v)],
                                                train, m.config.dropout, rng));
    }
    Tensor fused =
        fusion::fuse_views(embeddings, mask, m.fuse, train, m.config.dropout, rng);
    StepResult out;
    auto [h1, c1] = lstm_cell(fused, state.h[0], state.c[0], m.lstm1);
    auto [h2, c2] = lstm_cell(h1, state.h[1], state.c[1], m.lstm2);
    out.state.h = {h1, h2};
    out.state.c = {c1, c2};
    out.state.frames_seen = state.frames_seen + 1;
    out.p_tensor = nn::sigmoid(nn::affine(h2, m.head_w, m.head_b));
    out.p = detail::clamp_open_unit(out.p_tensor.item());
    return out;
}

struct SequenceResult {
    std::vector<double> probs;
    std::vector<Tensor> prob_tensors;
};

// Literal fold of step over the frames from a fresh state.
inline SequenceResult run_sequence(const ProgressModel& m,
                                   const std::vector<FrameSet>& frames,
                                   const ViewMask& mask, bool train, Rng& rng) {
    check(!frames.empty(), "run_sequence: empty frame sequence");
    SequenceResult out;
    RecurrentState state = RecurrentState::fresh();
    for (const auto& fs : frames) {
        StepResult r = step(m, state, fs, mask, train, rng);
        state = std::move(r.state);
        out.probs.push_back(r.p);
        out.prob_tensors.push_back(std::move(r.p_tensor));
    }
    return out;
}

} // namespace progressd::temporal
