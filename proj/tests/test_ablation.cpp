#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "progressd/ablation.hpp"

using namespace progressd;
using namespace progressd::eval;
using Catch::Matchers::ContainsSubstring;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("progressd_abl_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

data::LabeledEpisode make_labeled(const std::string& id, int span, Rng& rng) {
    const int image_size = 6;
    auto ep = std::make_shared<data::Episode>();
    ep->id = id;
    ep->action = "use_cabinet";
    ep->n_frames = span;
    for (int f = 0; f < span; ++f) ep->frame_timestamps.push_back(f / 10.0);
    for (View v : kAllViews) {
        auto& frames = ep->frames(v);
        for (int f = 0; f < span; ++f) {
            data::Image img;
            img.channels = 3;
            img.height = image_size;
            img.width = image_size;
            img.pixels.resize(static_cast<std::size_t>(3 * image_size * image_size));
            for (auto& px : img.pixels)
                px = static_cast<std::uint8_t>(rng.uniform_index(256));
            frames.push_back(std::move(img));
        }
    }
    ep->trace.sample_rate_hz = 20.0;
    ep->trace.channels.assign(
        data::trace_schema().size(),
        std::vector<double>(static_cast<std::size_t>(2 * (span - 1) + 3), 0.0));
    auto labels = data::label_progress(*ep, 0, span - 1);
    return {ep, labels};
}

temporal::ModelConfig tiny_model_config() {
    temporal::ModelConfig cfg;
    cfg.backbone.kind = backbone::Kind::vit;
    cfg.backbone.image_size = 6;
    cfg.backbone.patch_size = 2;
    cfg.backbone.embed_dim = 8;
    cfg.backbone.depth = 1;
    cfg.backbone.heads = 2;
    return cfg;
}

training::TrainConfig tiny_train_config() {
    training::TrainConfig cfg;
    cfg.epochs = 2;
    cfg.seed = 5;
    cfg.lr = 1e-3;
    return cfg;
}

} // namespace

TEST_CASE("camera ablation") {
    Rng rng(71);
    std::vector<data::LabeledEpisode> train_set, test_set;
    for (int i = 0; i < 3; ++i)
        train_set.push_back(make_labeled("tr" + std::to_string(i), 6 + i, rng));
    for (int i = 0; i < 2; ++i)
        test_set.push_back(make_labeled("te" + std::to_string(i), 7, rng));

    SECTION("default masks produce one scored entry per mask") {
        auto abl = camera_ablation(train_set, test_set, tiny_model_config(),
                                   tiny_train_config());
        REQUIRE(abl.size() == 4);
        CHECK(abl.count("left") == 1);
        CHECK(abl.count("right") == 1);
        CHECK(abl.count("central") == 1);
        CHECK(abl.count("left,central,right") == 1);
        for (const auto& [mask, entry] : abl) {
            CHECK((entry.report.whole >= 0.0 && entry.report.whole <= 100.0));
            CHECK(entry.training.metrics.size() == 2);
            CHECK_THAT(entry.report.config_fingerprint, ContainsSubstring(mask));
        }
        // different masks see different pixels, so their runs diverge
        CHECK(abl.at("left").report.whole != abl.at("central").report.whole);
    }

    SECTION("single-mask list and determinism across invocations") {
        std::vector<ViewMask> one = {ViewMask::parse("central")};
        auto a = camera_ablation(train_set, test_set, tiny_model_config(),
                                 tiny_train_config(), one);
        auto b = camera_ablation(train_set, test_set, tiny_model_config(),
                                 tiny_train_config(), one);
        REQUIRE(a.size() == 1);
        REQUIRE(b.size() == 1);
        CHECK(a.at("central").report.whole == b.at("central").report.whole);
        CHECK(a.at("central").report.quartiles == b.at("central").report.quartiles);
        for (std::size_t e = 0; e < a.at("central").training.metrics.size(); ++e) {
            CHECK(a.at("central").training.metrics[e].train_mae ==
                  b.at("central").training.metrics[e].train_mae);
            CHECK(a.at("central").training.metrics[e].val_mae ==
                  b.at("central").training.metrics[e].val_mae);
        }
    }

    SECTION("saved checkpoints reproduce the reported test error") {
        TempDir tmp;
        std::vector<ViewMask> masks = {ViewMask::all()};
        auto abl = camera_ablation(train_set, test_set, tiny_model_config(),
                                   tiny_train_config(), masks, tmp.path);
        auto ckpt = tmp.path / "model_left-central-right.ckpt";
        REQUIRE(fs::exists(ckpt));
        Rng mr(99);
        auto model = temporal::build_model(tiny_model_config(), mr);
        auto params = temporal::model_params(model);
        nn::load_checkpoint(ckpt, params);
        ModelPredictor pred(model, ViewMask::all());
        auto report = make_report(pred, test_set, ViewMask::all(), "reload");
        CHECK(report.whole == abl.at("left,central,right").report.whole);
        CHECK(report.quartiles == abl.at("left,central,right").report.quartiles);
    }

    SECTION("duplicate masks are rejected") {
        std::vector<ViewMask> twice = {ViewMask::parse("left"),
                                       ViewMask::parse("left")};
        CHECK_THROWS_WITH(camera_ablation(train_set, test_set,
                                          tiny_model_config(),
                                          tiny_train_config(), twice),
                          ContainsSubstring("twice"));
        CHECK_THROWS_WITH(camera_ablation(train_set, test_set,
                                          tiny_model_config(),
                                          tiny_train_config(), {}),
                          ContainsSubstring("empty mask list"));
    }

    SECTION("ablation json carries one report per mask") {
        std::vector<ViewMask> one = {ViewMask::parse("right")};
        auto abl = camera_ablation(train_set, test_set, tiny_model_config(),
                                   tiny_train_config(), one);
        auto j = ablation_to_json(abl);
        REQUIRE(j.contains("right"));
        auto back = report_from_json(j.at("right"));
        CHECK(back.whole == abl.at("right").report.whole);
    }
}
