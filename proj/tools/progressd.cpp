// progressd: the pipeline as one binary.
//   generate  synthesize a multi-view episode dataset
//   segment   run boundary detection over episodes
//   train     fit the progress model on a dataset
//   eval      score a model or baseline with the full protocol
//   plot      emit a progress-curve SVG + CSV for one episode
//
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
// Seeds obey flag > PROGRESSD_SEED env var > config file.

#include <CLI11.hpp>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "progressd/ablation.hpp"
#include "progressd/svg.hpp"
#include "progressd/synthgen.hpp"

namespace {

using namespace progressd;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

// ---------------------------------------------------------------------------
// small file helpers
// ---------------------------------------------------------------------------

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    check(in.good(), "cannot open '", p.string(), "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    check(!in.bad(), "cannot read '", p.string(), "'");
    return buf.str();
}

void write_file_atomic(const fs::path& p, const std::string& content) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    fs::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        check(out.good(), "cannot write '", tmp.string(), "'");
        out << content;
        out.flush();
        check(out.good(), "failed writing '", tmp.string(), "'");
    }
    fs::rename(tmp, p);
}

nlohmann::json load_json_file(const fs::path& p) {
    std::ifstream in(p);
    check(in.good(), "cannot open '", p.string(), "'");
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        fail("'", p.string(), "' is not valid json: ", e.what());
    }
}

std::string iso_utc_now() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// ---------------------------------------------------------------------------
// run manifest
// ---------------------------------------------------------------------------

struct RunManifest {
    std::string subcommand;
    std::string config; // path as given, empty when the command takes none
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::optional<std::uint64_t> seed;
    std::map<std::string, std::string> hashes; // artifact label -> fnv1a64 hex
};

void hash_file(RunManifest& m, const fs::path& p) {
    m.hashes[p.string()] = fnv1a64_hex(read_file(p));
}

// Deterministic digest of a directory tree: every regular file's relative
// path and content hash, sorted, hashed again. The run manifest itself is
// excluded so rewriting it cannot change the digest it reports.
std::string tree_digest(const fs::path& root) {
    std::vector<std::string> lines;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        fs::path rel = fs::relative(entry.path(), root);
        if (rel == "run_manifest.json") continue;
        lines.push_back(rel.generic_string() + ":" +
                        fnv1a64_hex(read_file(entry.path())));
    }
    std::sort(lines.begin(), lines.end());
    std::string all;
    for (const auto& l : lines) all += l + "\n";
    return fnv1a64_hex(all);
}

void write_run_manifest(const fs::path& dest, const RunManifest& m) {
    nlohmann::json j;
    j["subcommand"] = m.subcommand;
    if (m.config.empty())
        j["config"] = nullptr;
    else
        j["config"] = m.config;
    j["inputs"] = m.inputs;
    j["outputs"] = m.outputs;
    if (m.seed)
        j["seed"] = *m.seed;
    else
        j["seed"] = nullptr;
    j["timestamp"] = iso_utc_now();
    j["artifact_hashes"] = m.hashes;
    write_file_atomic(dest, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// seeds
// ---------------------------------------------------------------------------

std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("PROGRESSD_SEED");
    if (s == nullptr || *s == '\0') return std::nullopt;
    char* end = nullptr;
    errno = 0;
    unsigned long long v = std::strtoull(s, &end, 10);
    check(errno == 0 && end != s && *end == '\0',
          "PROGRESSD_SEED must be a non-negative integer, got '", s, "'");
    return static_cast<std::uint64_t>(v);
}

// flag > env > config-file value
std::uint64_t effective_seed(const std::optional<std::uint64_t>& flag,
                             std::uint64_t file_value) {
    if (flag) return *flag;
    if (auto env = env_seed()) return *env;
    return file_value;
}

// ---------------------------------------------------------------------------
// shared loading
// ---------------------------------------------------------------------------

data::BoundaryRule rule_for_action(const std::string& action) {
    const auto& rules = data::builtin_rules();
    auto it = rules.find(action);
    check(it != rules.end(), "no built-in boundary rule for action '", action,
          "'");
    return it->second;
}

ViewMask mask_from_flag(const std::string& text) {
    if (text == "all") return ViewMask::all();
    return ViewMask::parse(text);
}

struct LoadedModel {
    temporal::ModelConfig config;
    temporal::ProgressModel model;
};

// Rebuilds a checkpointed model from its json sidecar + binary parameters.
LoadedModel load_model(const fs::path& ckpt_path) {
    fs::path sidecar = ckpt_path;
    sidecar += ".json";
    check(fs::exists(sidecar), "model sidecar '", sidecar.string(),
          "' not found (expected next to the checkpoint)");
    auto j = load_json_file(sidecar);
    check(j.contains("model"), "model sidecar '", sidecar.string(),
          "' has no 'model' section");
    auto cfg = training::model_config_from_json(j.at("model"));
    Rng init(0); // every value is overwritten by the checkpoint
    LoadedModel out{cfg, temporal::build_model(cfg, init)};
    auto params = temporal::model_params(out.model);
    nn::load_checkpoint(ckpt_path, params);
    return out;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateArgs {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

int cmd_generate(const GenerateArgs& args) {
    synth::SynthConfig cfg;
    synth::SplitFractions fractions;
    try {
        auto j = load_json_file(args.config);
        cfg = synth::synth_config_from_json(j);
        cfg.seed = effective_seed(args.seed, cfg.seed);
        if (j.contains("splits")) {
            const auto& s = j.at("splits");
            fractions.train = s.value("train", fractions.train);
            fractions.val = s.value("val", fractions.val);
            fractions.test = s.value("test", fractions.test);
        }
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    try {
        auto ds = synth::generate_dataset(cfg, fractions, args.out);
        std::cout << "generated " << cfg.n_episodes << " episodes in '"
                  << args.out << "' (train " << ds.train.size() << ", val "
                  << ds.val.size() << ", test " << ds.test.size() << ")\n";
        RunManifest m;
        m.subcommand = "generate";
        m.config = args.config;
        m.inputs = {args.config};
        m.outputs = {args.out};
        m.seed = cfg.seed;
        hash_file(m, fs::path(args.out) / "dataset.json");
        m.hashes["tree:" + args.out] = tree_digest(args.out);
        write_run_manifest(fs::path(args.out) / "run_manifest.json", m);
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

// ---------------------------------------------------------------------------
// segment
// ---------------------------------------------------------------------------

struct SegmentArgs {
    std::string episodes;
    std::string rules; // empty: built-in table
    bool write_boundaries = false;
};

int cmd_segment(const SegmentArgs& args) {
    std::map<std::string, data::BoundaryRule> rules;
    try {
        if (args.rules.empty()) {
            rules = data::builtin_rules();
        } else {
            auto j = load_json_file(args.rules);
            check(j.is_object(), "rules file '", args.rules,
                  "' must be a json object mapping action name to rule");
            for (const auto& [action, rule_json] : j.items()) {
                auto rule = data::rule_from_json(rule_json);
                data::validate(rule);
                rules.emplace(action, std::move(rule));
            }
            check(!rules.empty(), "rules file '", args.rules, "' is empty");
        }
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: rules file '" << args.rules
                  << "': " << e.what() << "\n";
        return kExitConfig;
    }
    try {
        std::vector<fs::path> dirs;
        check(fs::is_directory(args.episodes), "'", args.episodes,
              "' is not a directory");
        for (const auto& entry : fs::directory_iterator(args.episodes))
            if (entry.is_directory() &&
                fs::exists(entry.path() / "manifest.json"))
                dirs.push_back(entry.path());
        std::sort(dirs.begin(), dirs.end());
        check(!dirs.empty(), "no episodes found in '", args.episodes, "'");

        int warnings = 0;
        for (const auto& dir : dirs) {
            auto ep = data::load_episode(dir);
            auto it = rules.find(ep.action);
            check(it != rules.end(), "no boundary rule for action '", ep.action,
                  "' (episode '", ep.id, "')");
            try {
                auto fb = data::detect_frame_boundaries(ep, it->second);
                std::cout << ep.id << "\t" << fb.t_s << "\t" << fb.t_e << "\n";
                if (args.write_boundaries) {
                    ep.boundaries = fb;
                    data::write_manifest(ep, dir);
                }
            } catch (const data::NoStartError&) {
                std::cout << ep.id << "\tno-start\t-\n";
                std::cerr << "warning: episode '" << ep.id
                          << "': no start condition fired\n";
                ++warnings;
            } catch (const data::NoEndError&) {
                std::cout << ep.id << "\tno-end\t-\n";
                std::cerr << "warning: episode '" << ep.id
                          << "': no end condition fired\n";
                ++warnings;
            }
        }
        std::cerr << dirs.size() << " episodes, " << warnings << " warnings\n";

        RunManifest m;
        m.subcommand = "segment";
        m.config = args.rules;
        m.inputs = {args.episodes};
        if (!args.rules.empty()) m.inputs.push_back(args.rules);
        if (args.write_boundaries) {
            m.outputs = {args.episodes};
            m.hashes["tree:" + args.episodes] = tree_digest(args.episodes);
        }
        write_run_manifest(fs::path(args.episodes) / "run_manifest.json", m);
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs;
};

int cmd_train(const TrainArgs& args) {
    temporal::ModelConfig model_cfg;
    training::TrainConfig train_cfg;
    try {
        auto j = load_json_file(args.config);
        model_cfg = training::model_config_from_json(
            j.value("model", nlohmann::json::object()));
        train_cfg = training::train_config_from_json(
            j.value("train", nlohmann::json::object()));
        train_cfg.seed = effective_seed(args.seed, train_cfg.seed);
        if (args.epochs) {
            check(*args.epochs >= 0, "--epochs must be >= 0");
            train_cfg.epochs = *args.epochs;
        }
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    try {
        auto ds = synth::load_dataset(args.data);
        auto rule = rule_for_action(ds.action);
        auto train_set = synth::load_labeled_split(ds, "train", rule);
        auto val_set = synth::load_labeled_split(ds, "val", rule);
        std::cout << "training on " << train_set.size() << " episodes, validating on "
                  << val_set.size() << "\n";

        Rng init(train_cfg.seed);
        auto model = temporal::build_model(model_cfg, init);
        auto res = training::fit(model, train_set, val_set, train_cfg, args.out);
        for (const auto& em : res.metrics)
            std::cout << "epoch " << em.epoch << "  train_mae " << em.train_mae
                      << "  val_mae " << em.val_mae << "\n";
        if (res.best_epoch > 0)
            std::cout << "best epoch " << res.best_epoch << " (val_mae "
                      << res.best_val << ")\n";

        fs::path sidecar = fs::path(args.out);
        sidecar += ".json";
        nlohmann::json sc;
        sc["model"] = training::to_json(model_cfg);
        sc["train"] = training::to_json(train_cfg);
        write_file_atomic(sidecar, sc.dump(2) + "\n");

        fs::path metrics = fs::path(args.out);
        metrics += ".metrics.csv";
        write_file_atomic(metrics, training::metrics_csv(res.metrics));

        RunManifest m;
        m.subcommand = "train";
        m.config = args.config;
        m.inputs = {args.data, args.config};
        m.outputs = {args.out, sidecar.string(), metrics.string()};
        m.seed = train_cfg.seed;
        hash_file(m, args.out);
        hash_file(m, sidecar);
        hash_file(m, metrics);
        fs::path run = fs::path(args.out);
        run += ".run.json";
        write_run_manifest(run, m);
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string data;
    std::string model;    // checkpoint path, or
    std::string baseline; // one of random/static/average_index
    std::string mask = "all";
    std::string report;
    std::string split = "test";
    std::optional<std::uint64_t> seed;
};

int cmd_eval(const EvalArgs& args) {
    ViewMask mask = ViewMask::all();
    eval::BaselineKind baseline_kind = eval::BaselineKind::static_half;
    std::uint64_t seed = 0;
    try {
        mask = mask_from_flag(args.mask);
        check(args.model.empty() != args.baseline.empty(),
              "exactly one of --model and --baseline is required");
        if (!args.baseline.empty())
            baseline_kind = eval::baseline_from_name(args.baseline);
        check(args.split == "train" || args.split == "val" ||
                  args.split == "test",
              "--split must be train, val or test, got '", args.split, "'");
        seed = effective_seed(args.seed, 1);
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    try {
        auto ds = synth::load_dataset(args.data);
        auto rule = rule_for_action(ds.action);
        auto episodes = synth::load_labeled_split(ds, args.split, rule);

        // the predictor and a fingerprint tying the report to its inputs
        std::string subject;
        std::unique_ptr<eval::ProgressPredictor> pred;
        eval::AverageIndexModel avg;
        if (!args.model.empty()) {
            auto loaded = std::make_shared<LoadedModel>(load_model(args.model));
            subject = "model:" + fnv1a64_hex(read_file(args.model));
            struct OwningModelPredictor final : eval::ProgressPredictor {
                std::shared_ptr<LoadedModel> keep;
                eval::ModelPredictor inner;
                OwningModelPredictor(std::shared_ptr<LoadedModel> lm, ViewMask mk)
                    : keep(std::move(lm)), inner(keep->model, mk) {}
                void begin_sequence(int a, int b) override {
                    inner.begin_sequence(a, b);
                }
                double predict(const temporal::FrameSet& f) override {
                    return inner.predict(f);
                }
            };
            pred = std::make_unique<OwningModelPredictor>(loaded, mask);
        } else {
            switch (baseline_kind) {
                case eval::BaselineKind::static_half:
                    subject = "baseline:static";
                    pred = std::make_unique<eval::StaticPredictor>();
                    break;
                case eval::BaselineKind::random:
                    subject = "baseline:random:" + std::to_string(seed);
                    pred = std::make_unique<eval::RandomPredictor>(Rng(seed));
                    break;
                case eval::BaselineKind::average_index: {
                    auto train_split =
                        synth::load_labeled_split(ds, "train", rule);
                    avg = eval::fit_average_index(train_split);
                    subject = "baseline:average_index";
                    pred = std::make_unique<eval::AverageIndexPredictor>(avg);
                    break;
                }
            }
        }
        std::string fingerprint =
            fnv1a64_hex(subject + "|" + mask.str() + "|" + args.split);
        auto report = eval::make_report(*pred, episodes, mask, fingerprint);

        write_file_atomic(args.report,
                          eval::report_to_json(report).dump(2) + "\n");
        fs::path csv_path = fs::path(args.report);
        csv_path.replace_extension(".csv");
        write_file_atomic(csv_path, eval::report_to_csv(report));
        std::cout << eval::report_to_csv(report);
        if (report.skipped_episodes > 0)
            std::cerr << "warning: " << report.skipped_episodes
                      << " episodes too short to quarter\n";

        RunManifest m;
        m.subcommand = "eval";
        m.inputs = {args.data};
        if (!args.model.empty()) m.inputs.push_back(args.model);
        m.outputs = {args.report, csv_path.string()};
        if (!args.baseline.empty() &&
            baseline_kind == eval::BaselineKind::random)
            m.seed = seed;
        hash_file(m, args.report);
        hash_file(m, csv_path);
        fs::path run = fs::path(args.report);
        run += ".run.json";
        write_run_manifest(run, m);
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

// ---------------------------------------------------------------------------
// plot
// ---------------------------------------------------------------------------

struct PlotArgs {
    std::string data;
    std::string model;
    std::string model2;
    std::string episode;
    std::string out;
    std::string mask = "all";
};

// Finds the directory whose manifest carries the requested episode id.
fs::path find_episode_dir(const synth::Dataset& ds, const std::string& id) {
    for (const char* split : {"train", "val", "test"}) {
        for (const auto& name : ds.split(split)) {
            auto manifest = load_json_file(ds.root / name / "manifest.json");
            if (manifest.value("id", "") == id) return ds.root / name;
        }
    }
    fail("episode '", id, "' not found in dataset '", ds.root.string(), "'");
}

int cmd_plot(const PlotArgs& args) {
    ViewMask mask = ViewMask::all();
    try {
        mask = mask_from_flag(args.mask);
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    try {
        auto ds = synth::load_dataset(args.data);
        auto rule = rule_for_action(ds.action);
        auto ep = data::load_episode(find_episode_dir(ds, args.episode));
        auto fb = data::resolve_boundaries(ep, rule);
        auto labels = data::label_progress(ep, fb.t_s, fb.t_e);

        auto curve = [&](const fs::path& ckpt) {
            auto loaded = load_model(ckpt);
            eval::ModelPredictor pred(loaded.model, mask);
            const int n = static_cast<int>(labels.labels.size());
            pred.begin_sequence(n, n);
            plot::Series s;
            s.name = ckpt.stem().string();
            for (int i = 0; i < n; ++i)
                s.values.push_back(pred.predict(
                    data::make_frameset(ep, labels.t_s + i, mask)));
            return s;
        };
        std::vector<plot::Series> series;
        series.push_back(curve(args.model));
        if (!args.model2.empty()) {
            series.push_back(curve(args.model2));
            if (series[1].name == series[0].name) series[1].name += " (2)";
        }

        auto svg = plot::progress_svg("episode " + args.episode + " (" +
                                          ds.action + ")",
                                      labels.labels, series);
        write_file_atomic(args.out, svg);
        fs::path csv_path = fs::path(args.out);
        csv_path.replace_extension(".csv");
        write_file_atomic(csv_path, plot::series_csv(labels.labels, series));
        std::cout << "wrote '" << args.out << "' and '" << csv_path.string()
                  << "' (" << labels.labels.size() << " frames)\n";

        RunManifest m;
        m.subcommand = "plot";
        m.inputs = {args.data, args.model};
        if (!args.model2.empty()) m.inputs.push_back(args.model2);
        m.outputs = {args.out, csv_path.string()};
        hash_file(m, args.out);
        hash_file(m, csv_path);
        fs::path run = fs::path(args.out);
        run += ".run.json";
        write_run_manifest(run, m);
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-view action progress estimation pipeline"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* sc_gen = app.add_subcommand("generate",
                                      "synthesize a multi-view episode dataset");
    sc_gen->add_option("--config", gen.config, "synthesis config json")
        ->required();
    sc_gen->add_option("--out", gen.out, "output dataset directory")->required();
    sc_gen->add_option("--seed", gen.seed, "override the config seed");

    SegmentArgs seg;
    auto* sc_seg =
        app.add_subcommand("segment", "detect action boundaries per episode");
    sc_seg->add_option("--episodes", seg.episodes, "directory of episode dirs")
        ->required();
    sc_seg->add_option("--rules", seg.rules,
                       "json map of action name to boundary rule "
                       "(default: built-in table)");
    sc_seg->add_flag("--write-boundaries", seg.write_boundaries,
                     "write detected boundaries back into episode manifests");

    TrainArgs tr;
    auto* sc_tr = app.add_subcommand("train", "fit the progress model");
    sc_tr->add_option("--data", tr.data, "dataset directory")->required();
    sc_tr->add_option("--config", tr.config,
                      "json with 'model' and 'train' sections")
        ->required();
    sc_tr->add_option("--out", tr.out, "checkpoint output path")->required();
    sc_tr->add_option("--seed", tr.seed, "override the config seed");
    sc_tr->add_option("--epochs", tr.epochs, "override the config epoch count");

    EvalArgs ev;
    auto* sc_ev =
        app.add_subcommand("eval", "score a model or baseline on a split");
    sc_ev->add_option("--data", ev.data, "dataset directory")->required();
    sc_ev->add_option("--model", ev.model, "model checkpoint path");
    sc_ev->add_option("--baseline", ev.baseline,
                      "baseline instead of a model: random, static or "
                      "average_index");
    sc_ev->add_option("--mask", ev.mask,
                      "view mask: all, central, left, right or a "
                      "comma-separated list");
    sc_ev->add_option("--report", ev.report, "report json output path")
        ->required();
    sc_ev->add_option("--split", ev.split, "dataset split (default test)");
    sc_ev->add_option("--seed", ev.seed, "seed for the random baseline");

    PlotArgs pl;
    auto* sc_pl = app.add_subcommand(
        "plot", "emit a progress-curve svg + csv for one episode");
    sc_pl->add_option("--data", pl.data, "dataset directory")->required();
    sc_pl->add_option("--model", pl.model, "model checkpoint path")->required();
    sc_pl->add_option("--model2", pl.model2, "second checkpoint to overlay");
    sc_pl->add_option("--episode", pl.episode, "episode id")->required();
    sc_pl->add_option("--out", pl.out, "svg output path")->required();
    sc_pl->add_option("--mask", pl.mask, "view mask (default all)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    if (sc_gen->parsed()) return cmd_generate(gen);
    if (sc_seg->parsed()) return cmd_segment(seg);
    if (sc_tr->parsed()) return cmd_train(tr);
    if (sc_ev->parsed()) return cmd_eval(ev);
    if (sc_pl->parsed()) return cmd_plot(pl);
    std::cerr << "error: no subcommand\n";
    return kExitConfig;
}
