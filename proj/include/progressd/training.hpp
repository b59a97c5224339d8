// Shortcut-resistant training: variable frame-rate and segment augmentations
// that keep global progress labels attached to frames, sequence MAE loss,
// and the Adam epoch loop with best-validation checkpointing.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "progressd/checkpoint.hpp"
#include "progressd/common.hpp"
#include "progressd/episode.hpp"
#include "progressd/eval.hpp"
#include "progressd/optim.hpp"
#include "progressd/temporal.hpp"

namespace progressd::training {

struct TrainConfig {
    int epochs = 20;
    std::uint64_t seed = 1;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    bool segment_training = true;
    bool framerate_aug = true;
    std::array<double, 2> segment_length_range = {0.2, 1.0}; // span fraction
    std::array<double, 2> framerate_factor_range = {0.5, 2.0};
    std::array<int, 2> chunks_per_video = {2, 5};
    ViewMask view_mask = ViewMask::all();
};

inline void validate(const TrainConfig& cfg) {
    check(cfg.epochs >= 0, "train config: epochs must be >= 0");
    check(cfg.lr > 0.0, "train config: lr must be positive");
    check(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 &&
              cfg.beta2 < 1.0,
          "train config: betas must be in [0,1)");
    check(cfg.segment_length_range[0] > 0.0 &&
              cfg.segment_length_range[0] <= cfg.segment_length_range[1] &&
              cfg.segment_length_range[1] <= 1.0,
          "train config: segment length range must be ordered fractions in (0,1]");
    check(cfg.framerate_factor_range[0] > 0.0 &&
              cfg.framerate_factor_range[0] <= cfg.framerate_factor_range[1],
          "train config: framerate factor range must be ordered and positive");
    check(cfg.chunks_per_video[0] >= 1 &&
              cfg.chunks_per_video[0] <= cfg.chunks_per_video[1],
          "train config: chunks per video range must be ordered with minimum 1");
    check(cfg.view_mask.count() >= 1, "train config: empty view mask");
}

inline nlohmann::json to_json(const TrainConfig& cfg) {
    return {{"epochs", cfg.epochs},
            {"seed", cfg.seed},
            {"lr", cfg.lr},
            {"beta1", cfg.beta1},
            {"beta2", cfg.beta2},
            {"segment_training", cfg.segment_training},
            {"framerate_aug", cfg.framerate_aug},
            {"segment_length_range", cfg.segment_length_range},
            {"framerate_factor_range", cfg.framerate_factor_range},
            {"chunks_per_video", cfg.chunks_per_video},
            {"view_mask", cfg.view_mask.str()}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    try {
        cfg.epochs = j.value("epochs", cfg.epochs);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.lr = j.value("lr", cfg.lr);
        cfg.beta1 = j.value("beta1", cfg.beta1);
        cfg.beta2 = j.value("beta2", cfg.beta2);
        cfg.segment_training = j.value("segment_training", cfg.segment_training);
        cfg.framerate_aug = j.value("framerate_aug", cfg.framerate_aug);
        cfg.segment_length_range =
            j.value("segment_length_range", cfg.segment_length_range);
        cfg.framerate_factor_range =
            j.value("framerate_factor_range", cfg.framerate_factor_range);
        cfg.chunks_per_video = j.value("chunks_per_video", cfg.chunks_per_video);
        if (j.contains("view_mask"))
            cfg.view_mask = ViewMask::parse(j.at("view_mask").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        fail("train config: ", e.what());
    }
    validate(cfg);
    return cfg;
}

// model config json, used by the cli and checkpoint sidecars
inline nlohmann::json to_json(const temporal::ModelConfig& cfg) {
    nlohmann::json b;
    b["kind"] = cfg.backbone.kind == backbone::Kind::vit ? "vit" : "cnn";
    b["image_size"] = cfg.backbone.image_size;
    b["channels_in"] = cfg.backbone.channels_in;
    b["patch_size"] = cfg.backbone.patch_size;
    b["embed_dim"] = cfg.backbone.embed_dim;
    b["depth"] = cfg.backbone.depth;
    b["heads"] = cfg.backbone.heads;
    b["cnn_widths"] = cfg.backbone.cnn_widths;
    return {{"backbone", b},
            {"share_backbone", cfg.share_backbone},
            {"dropout", cfg.dropout}};
}

inline temporal::ModelConfig model_config_from_json(const nlohmann::json& j) {
    temporal::ModelConfig cfg;
    try {
        if (j.contains("backbone")) {
            const auto& b = j.at("backbone");
            if (b.contains("kind")) {
                auto k = b.at("kind").get<std::string>();
                check(k == "vit" || k == "cnn",
                      "model config: backbone kind must be vit or cnn, got '", k,
                      "'");
                cfg.backbone.kind =
                    k == "vit" ? backbone::Kind::vit : backbone::Kind::cnn;
            }
            cfg.backbone.image_size = b.value("image_size", cfg.backbone.image_size);
            cfg.backbone.channels_in =
                b.value("channels_in", cfg.backbone.channels_in);
            cfg.backbone.patch_size = b.value("patch_size", cfg.backbone.patch_size);
            cfg.backbone.embed_dim = b.value("embed_dim", cfg.backbone.embed_dim);
            cfg.backbone.depth = b.value("depth", cfg.backbone.depth);
            cfg.backbone.heads = b.value("heads", cfg.backbone.heads);
            cfg.backbone.cnn_widths =
                b.value("cnn_widths", cfg.backbone.cnn_widths);
        }
        cfg.share_backbone = j.value("share_backbone", cfg.share_backbone);
        cfg.dropout = j.value("dropout", cfg.dropout);
    } catch (const nlohmann::json::exception& e) {
        fail("model config: ", e.what());
    }
    backbone::validate(cfg.backbone);
    return cfg;
}

// ---------------------------------------------------------------------------
// training samples and augmentations
// ---------------------------------------------------------------------------

// A training sequence: episode frame indices plus the global progress label
// each frame keeps no matter how the sequence was resampled or cut.
struct TrainingSample {
    std::vector<int> frame_indices;
    std::vector<double> labels;
};

inline TrainingSample full_span_sample(const data::ProgressLabels& labels) {
    TrainingSample s;
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        s.frame_indices.push_back(labels.t_s + static_cast<int>(i));
        s.labels.push_back(labels.labels[i]);
    }
    return s;
}

// Splits the sequence into k chunks and stretches or compresses each by an
// independent factor, choosing source frames by nearest index. A factor f
// turns a chunk of length L into floor((L-1)/f)+1 frames, so f > 1 plays the
// chunk faster. Labels travel with their frames.
inline TrainingSample variable_framerate_resample(const TrainingSample& in,
                                                  const TrainConfig& cfg,
                                                  Rng& rng) {
    const int n = static_cast<int>(in.frame_indices.size());
    check(n >= 4, "variable_framerate_resample: span of ", n,
          " frames is too short (need >= 4)");
    int k = static_cast<int>(
        rng.uniform_int(cfg.chunks_per_video[0], cfg.chunks_per_video[1]));
    k = std::min(k, n);
    // k-1 distinct cut positions, uniform over the interior
    std::vector<int> interior;
    for (int i = 1; i < n; ++i) interior.push_back(i);
    for (int i = 0; i < k - 1; ++i) {
        auto j = i + static_cast<int>(rng.uniform_index(interior.size() -
                                                        static_cast<std::size_t>(i)));
        std::swap(interior[static_cast<std::size_t>(i)],
                  interior[static_cast<std::size_t>(j)]);
    }
    std::vector<int> cuts(interior.begin(), interior.begin() + (k - 1));
    std::sort(cuts.begin(), cuts.end());
    cuts.push_back(n);

    TrainingSample out;
    int chunk_start = 0;
    for (int cut : cuts) {
        const int len = cut - chunk_start;
        const double f = rng.uniform(cfg.framerate_factor_range[0],
                                     cfg.framerate_factor_range[1]);
        const int m = len <= 1
                          ? 1
                          : static_cast<int>(std::floor((len - 1) / f)) + 1;
        for (int j = 0; j < m; ++j) {
            auto src = static_cast<std::size_t>(
                chunk_start + static_cast<int>(std::lround(j * f)));
            out.frame_indices.push_back(in.frame_indices[src]);
            out.labels.push_back(in.labels[src]);
        }
        chunk_start = cut;
    }
    return out;
}

// A contiguous run whose length fraction and starting point are uniform;
// frames keep their original global labels, so a run starting mid-action
// begins with a label well above zero.
inline TrainingSample sample_segment(const TrainingSample& in,
                                     const TrainConfig& cfg, Rng& rng) {
    const int n = static_cast<int>(in.frame_indices.size());
    check(n >= 2, "sample_segment: sequence of ", n,
          " frames is too short (need >= 2)");
    const double frac = rng.uniform(cfg.segment_length_range[0],
                                    cfg.segment_length_range[1]);
    const int len = std::clamp(static_cast<int>(std::lround(frac * n)), 1, n);
    const int start = static_cast<int>(
        rng.uniform_index(static_cast<std::size_t>(n - len + 1)));
    TrainingSample out;
    out.frame_indices.assign(in.frame_indices.begin() + start,
                             in.frame_indices.begin() + start + len);
    out.labels.assign(in.labels.begin() + start, in.labels.begin() + start + len);
    return out;
}

inline std::vector<temporal::FrameSet> materialize(
    const data::Episode& ep, const std::vector<int>& frame_indices,
    const ViewMask& mask) {
    std::vector<temporal::FrameSet> out;
    out.reserve(frame_indices.size());
    for (int idx : frame_indices) out.push_back(data::make_frameset(ep, idx, mask));
    return out;
}

// ---------------------------------------------------------------------------
// loss and epochs
// ---------------------------------------------------------------------------

inline nn::Tensor sequence_loss(const std::vector<nn::Tensor>& prob_tensors,
                                const std::vector<double>& labels) {
    check(!prob_tensors.empty(), "sequence_loss: empty prediction sequence");
    check(prob_tensors.size() == labels.size(),
          "sequence_loss: ", prob_tensors.size(), " predictions vs ",
          labels.size(), " labels");
    nn::Tensor preds = prob_tensors.size() == 1
                           ? prob_tensors[0]
                           : nn::concat(prob_tensors, 0);
    auto target = nn::Tensor::from_data(
        preds.shape(), std::vector<double>(labels), /*requires_grad=*/false);
    return nn::mean_abs_error(preds, target);
}

// One pass over the episodes in rng-shuffled order, one Adam step per
// episode over its whole (augmented) sequence. Returns the mean loss.
inline double train_epoch(temporal::ProgressModel& model,
                          const std::vector<data::LabeledEpisode>& episodes,
                          const TrainConfig& cfg, Rng& rng,
                          nn::AdamState& adam, nn::ParamList& params,
                          int epoch_index = 0) {
    check(!episodes.empty(), "train_epoch: no episodes");
    std::vector<std::size_t> order(episodes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        auto j = i + rng.uniform_index(order.size() - i);
        std::swap(order[i], order[j]);
    }
    double total = 0.0;
    for (std::size_t pos : order) {
        const auto& le = episodes[pos];
        check(le.episode != nullptr, "train_epoch: unlabeled episode");
        TrainingSample sample = full_span_sample(le.labels);
        if (cfg.framerate_aug &&
            sample.frame_indices.size() >= 4) // precondition of the resampler
            sample = variable_framerate_resample(sample, cfg, rng);
        if (cfg.segment_training && sample.frame_indices.size() >= 2)
            sample = sample_segment(sample, cfg, rng);
        auto frames = materialize(*le.episode, sample.frame_indices,
                                  cfg.view_mask);
        auto seq = temporal::run_sequence(model, frames, cfg.view_mask,
                                          /*train=*/true, rng);
        nn::Tensor loss = sequence_loss(seq.prob_tensors, sample.labels);
        const double loss_value = loss.item();
        check(std::isfinite(loss_value),
              "train_epoch: non-finite loss at epoch ", epoch_index,
              " on episode '", le.episode->id, "'");
        nn::backward(loss);
        nn::adam_step(params, adam);
        total += loss_value;
    }
    return total / static_cast<double>(episodes.size());
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct EpochMetrics {
    int epoch = 0;        // 1-based
    double train_mae = 0; // percent, mean training loss over the epoch
    double val_mae = 0;   // percent, full-span eval-mode protocol
};

struct FitResult {
    std::vector<EpochMetrics> metrics;
    int best_epoch = -1; // 1-based; -1 when no epochs ran
    double best_val = std::numeric_limits<double>::infinity();
};

inline std::string metrics_csv(const std::vector<EpochMetrics>& metrics) {
    std::string out = "epoch,train_mae,val_mae\n";
    char buf[128];
    for (const auto& m : metrics) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", m.epoch, m.train_mae,
                      m.val_mae);
        out += buf;
    }
    return out;
}

// Runs the epoch loop; validation uses un-augmented full spans in eval mode.
// On return the model holds the best-validation parameters (the initial
// parameters when epochs == 0), and the checkpoint at ckpt_path holds those
// same values. Pass an empty path to skip checkpointing.
inline FitResult fit(temporal::ProgressModel& model,
                     const std::vector<data::LabeledEpisode>& train_set,
                     const std::vector<data::LabeledEpisode>& val_set,
                     const TrainConfig& cfg,
                     const std::filesystem::path& ckpt_path = {}) {
    validate(cfg);
    FitResult result;
    auto save = [&] {
        if (!ckpt_path.empty())
            nn::save_checkpoint(ckpt_path, temporal::model_params(model));
    };
    if (cfg.epochs == 0) {
        save();
        return result;
    }
    check(!train_set.empty(), "fit: empty training set");
    check(!val_set.empty(), "fit: empty validation set");
    nn::ParamList params = temporal::trainable_params(model, cfg.view_mask);
    nn::AdamState adam = nn::adam_init(params, cfg.lr, cfg.beta1, cfg.beta2);
    Rng rng(cfg.seed);
    std::vector<std::vector<double>> best_values;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double train_loss =
            train_epoch(model, train_set, cfg, rng, adam, params, epoch);
        eval::ModelPredictor pred(model, cfg.view_mask);
        double val_mae = eval::evaluate_whole(pred, val_set, cfg.view_mask);
        result.metrics.push_back({epoch, 100.0 * train_loss, val_mae});
        if (val_mae < result.best_val) {
            result.best_val = val_mae;
            result.best_epoch = epoch;
            best_values.clear();
            for (const auto& p : temporal::model_params(model))
                best_values.push_back(p.tensor.value());
        }
    }
    check(!best_values.empty(), "fit: no epoch produced a finite validation error");
    auto all = temporal::model_params(model);
    for (std::size_t i = 0; i < all.size(); ++i)
        all[i].tensor.value_mut() = std::move(best_values[i]);
    save();
    return result;
}

} // namespace progressd::training
