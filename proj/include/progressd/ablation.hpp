// Camera ablation: retrains the model under each view mask from identical
// initial parameters and scores every run on the same test set.
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "progressd/eval.hpp"
#include "progressd/training.hpp"

namespace progressd::eval {

inline std::vector<ViewMask> default_ablation_masks() {
    return {ViewMask::parse("left"), ViewMask::parse("right"),
            ViewMask::parse("central"), ViewMask::all()};
}

struct AblationEntry {
    EvalReport report;            // best-validation model on the test set
    training::FitResult training; // per-epoch trajectory of this mask's run
};

inline std::string mask_slug(const ViewMask& mask) {
    std::string s = mask.str();
    for (char& c : s)
        if (c == ',') c = '-';
    return s;
}

// One model per mask, initialized from Rng(cfg.seed) so every run starts
// from identical parameters; trained with the test set as the validation
// monitor and evaluated in its best-validation state. When ckpt_dir is
// non-empty, each run's parameters land in ckpt_dir/model_<mask>.ckpt.
inline std::map<std::string, AblationEntry> camera_ablation(
    const std::vector<data::LabeledEpisode>& train_set,
    const std::vector<data::LabeledEpisode>& test_set,
    const temporal::ModelConfig& model_cfg, const training::TrainConfig& cfg,
    const std::vector<ViewMask>& masks = default_ablation_masks(),
    const std::filesystem::path& ckpt_dir = {}) {
    check(!masks.empty(), "camera_ablation: empty mask list");
    std::map<std::string, AblationEntry> out;
    for (const auto& mask : masks) {
        check(out.find(mask.str()) == out.end(),
              "camera_ablation: mask '", mask.str(), "' listed twice");
        auto run_cfg = cfg;
        run_cfg.view_mask = mask;
        Rng init(cfg.seed);
        auto model = temporal::build_model(model_cfg, init);
        std::filesystem::path ckpt;
        if (!ckpt_dir.empty())
            ckpt = ckpt_dir / ("model_" + mask_slug(mask) + ".ckpt");
        AblationEntry entry;
        entry.training = training::fit(model, train_set, test_set, run_cfg, ckpt);
        ModelPredictor pred(model, mask);
        entry.report = make_report(pred, test_set, mask,
                                   "ablation mask=" + mask.str() +
                                       " seed=" + std::to_string(cfg.seed));
        out.emplace(mask.str(), std::move(entry));
    }
    return out;
}

inline nlohmann::json ablation_to_json(
    const std::map<std::string, AblationEntry>& ablation) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [mask, entry] : ablation)
        j[mask] = report_to_json(entry.report);
    return j;
}

} // namespace progressd::eval
