// ssae: scale-space autoencoder pipeline driver.
// Subcommands: synth | train | segment | eval | pyramid.
// Exit codes: 0 ok, 2 config error, 3 data error, 4 shape error,
// 5 training divergence, 1 anything else.

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ssae/anomaly.hpp"
#include "ssae/image_io.hpp"
#include "ssae/manifest.hpp"
#include "ssae/metrics.hpp"
#include "ssae/models.hpp"
#include "ssae/svg.hpp"
#include "ssae/synth.hpp"
#include "ssae/training.hpp"

namespace {

using namespace ssae;
using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitShape = 4;
constexpr int kExitDivergence = 5;

json read_json_file(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path.string());
    f << j.dump(2) << "\n";
}

// Config file -> flags merge: flags win, file fills the rest. Each option
// registers how to pull its value out of the config JSON.
class ConfigMerge {
public:
    void bind(CLI::Option* opt, const std::string& key, const std::function<void(const json&)>& set) {
        entries_.push_back({opt, key, set});
    }

    void apply(const json& config) {
        for (const auto& e : entries_) {
            if (e.opt->count() == 0 && config.contains(e.key)) {
                e.set(config.at(e.key));
            }
        }
    }

    template <typename T>
    void add(CLI::App* cmd, const std::string& flag, const std::string& key, T& value,
             const std::string& help) {
        CLI::Option* opt = cmd->add_option(flag, value, help);
        bind(opt, key, [&value](const json& j) { value = j.get<T>(); });
    }

    void add_flag(CLI::App* cmd, const std::string& flag, const std::string& key, bool& value,
                  const std::string& help) {
        CLI::Option* opt = cmd->add_flag(flag, value, help);
        bind(opt, key, [&value](const json& j) { value = j.get<bool>(); });
    }

private:
    struct Entry {
        CLI::Option* opt;
        std::string key;
        std::function<void(const json&)> set;
    };
    std::vector<Entry> entries_;
};

fs::path resolve_out(const std::string& out) {
    fs::path p(out);
    if (p.is_relative()) {
        if (const char* root = std::getenv("SSAE_OUT_ROOT")) {
            return fs::path(root) / p;
        }
    }
    return p;
}

Image load_image_any(const fs::path& path) {
    if (path.extension() == ".pgm") return data::load_pgm(path);
    return data::load_raw_f64(path);
}

// ---------------------------------------------------------------- synth ---

struct SynthOpts {
    std::string config_path;
    std::string out = "dataset";
    int count = 100;
    int anomalous_count = 0;
    int size = 64;
    std::string kind = "small-multifocal";
    double anomaly_delta = 0.30;
    std::uint64_t seed = 1;
    bool pgm = false;
};

json synth_resolved(const SynthOpts& o) {
    return json{{"out", o.out},
                {"count", o.count},
                {"anomalous_count", o.anomalous_count},
                {"size", o.size},
                {"kind", o.kind},
                {"anomaly_delta", o.anomaly_delta},
                {"seed", o.seed},
                {"pgm", o.pgm}};
}

int run_synth(const SynthOpts& o) {
    if (o.count < 1 || o.anomalous_count < 0 || o.anomalous_count > o.count) {
        throw ConfigError("synth: need count >= 1 and 0 <= anomalous-count <= count");
    }
    const data::AnomalyKind kind = data::anomaly_kind_from_name(o.kind);
    const fs::path out = resolve_out(o.out);
    fs::create_directories(out / "images");
    if (o.anomalous_count > 0) fs::create_directories(out / "masks");
    if (o.pgm) fs::create_directories(out / "previews");

    data::Manifest manifest;
    for (int i = 0; i < o.count; ++i) {
        data::SynthConfig cfg;
        cfg.size = o.size;
        cfg.seed = o.seed + static_cast<std::uint64_t>(i);
        cfg.anomaly_delta = o.anomaly_delta;
        const bool anomalous = i >= o.count - o.anomalous_count;
        cfg.anomaly = anomalous ? kind : data::AnomalyKind::kNone;

        data::Sample sample = data::synth_healthy(cfg);
        if (anomalous) sample = data::inject_anomaly(sample, cfg);

        std::ostringstream name;
        name << "img_" << std::setw(4) << std::setfill('0') << i;
        data::ManifestEntry entry;
        entry.path = "images/" + name.str() + ".f64";
        entry.seed = cfg.seed;
        entry.kind = cfg.anomaly;
        data::save_raw_f64(out / entry.path, sample.image, "input");
        if (sample.gt_mask.has_value()) {
            entry.gt_path = "masks/" + name.str() + "_gt.f64";
            data::save_raw_f64(out / *entry.gt_path, *sample.gt_mask, "gt");
        }
        if (o.pgm) {
            data::save_pgm(out / "previews" / (name.str() + ".pgm"), sample.image, 16);
        }
        manifest.entries.push_back(std::move(entry));
    }
    data::save_manifest(out / "manifest.json", manifest);
    write_json_file(out / "config.resolved.json", synth_resolved(o));
    std::cout << "synth: wrote " << o.count << " samples (" << o.anomalous_count
              << " anomalous) to " << out.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------- train ---

struct TrainOpts {
    std::string config_path;
    std::string data;
    std::string out = "model";
    std::string variant = "dense";
    int levels = 3;
    bool baseline = false;
    bool model_base = true;
    int epochs = 200;
    int batch_size = 8;
    double lr = 1e-3;
    int patience = 10;
    double min_delta = 1e-3;
    double val_fraction = 0.1;
    int latent_width = 16;
    double kernel_coverage = 0.99;
    std::uint64_t seed = 1;
};

json train_resolved(const TrainOpts& o) {
    return json{{"data", o.data},          {"out", o.out},
                {"variant", o.variant},    {"levels", o.levels},
                {"baseline", o.baseline},  {"model_base", o.model_base},
                {"epochs", o.epochs},      {"batch_size", o.batch_size},
                {"lr", o.lr},              {"patience", o.patience},
                {"min_delta", o.min_delta},{"val_fraction", o.val_fraction},
                {"latent_width", o.latent_width},
                {"kernel_coverage", o.kernel_coverage},
                {"seed", o.seed}};
}

json stage_to_json(const training::StageReport& s) {
    return json{{"level", s.level},
                {"lambda", s.lambda},
                {"train_curve", s.train_curve},
                {"val_curve", s.val_curve},
                {"init_val_loss", s.init_val_loss},
                {"best_val_loss", s.best_val_loss},
                {"best_epoch", s.best_epoch},
                {"stopped_epoch", s.stopped_epoch}};
}

json report_to_json(const training::TrainReport& r) {
    json stages = json::array();
    for (const auto& s : r.stages) stages.push_back(stage_to_json(s));
    return json{{"stage_order", r.stage_order},
                {"stages", std::move(stages)},
                {"final_val_loss_per_level", r.final_val_loss_per_level},
                {"seed", r.seed}};
}

json stats_to_json(const metrics::ReconErrorStats& s) {
    return json{{"mean", s.mean}, {"median", s.median}, {"q1", s.q1}, {"q3", s.q3}};
}

std::vector<Image> healthy_images(const data::LoadedDataset& ds) {
    std::vector<Image> images;
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        if (ds.entries[i].kind == data::AnomalyKind::kNone) images.push_back(ds.images[i]);
    }
    return images;
}

int run_train(const TrainOpts& o) {
    if (o.data.empty()) throw ConfigError("train: --data manifest is required");
    const data::LoadedDataset ds = data::load_dataset(o.data);
    const std::vector<Image> images = healthy_images(ds);
    if (images.empty()) throw DataError("train: no healthy samples in " + o.data);
    const int native = images.front().width();
    for (const Image& img : images) {
        if (img.width() != native || img.height() != native) {
            throw ShapeError("train: dataset images must share one square size");
        }
    }

    const models::Variant variant = models::variant_from_name(o.variant);
    models::ModelConfig mcfg;
    mcfg.latent_width = o.latent_width;
    mcfg.model_base = o.model_base;
    mcfg.kernel_coverage = o.kernel_coverage;

    training::TrainConfig tcfg;
    tcfg.lr = o.lr;
    tcfg.batch_size = o.batch_size;
    tcfg.patience = o.patience;
    tcfg.min_delta = o.min_delta;
    tcfg.max_epochs = o.epochs;
    tcfg.val_fraction = o.val_fraction;
    tcfg.seed = o.seed;

    const fs::path out = resolve_out(o.out);
    fs::create_directories(out);

    // Validation split for the fidelity section (same split as the trainer).
    std::vector<std::size_t> train_idx, val_idx;
    training::split_dataset(images.size(), tcfg.val_fraction, tcfg.seed, train_idx, val_idx);
    std::vector<Image> val_images;
    for (std::size_t i : val_idx) val_images.push_back(images[i]);

    training::TrainReport report;
    json fidelity = json::array();
    if (o.baseline) {
        models::EncoderDecoder model =
            models::build_matched_baseline(variant, native, o.levels, mcfg, o.seed);
        report = training::train_baseline(model, images, tcfg);
        models::save_baseline_bundle(out, model, o.levels);
        std::vector<Image> recons;
        for (const Image& v : val_images) recons.push_back(model.reconstruct(v));
        fidelity.push_back({{"resolution", 0},
                            {"l1", stats_to_json(metrics::recon_error_stats(val_images, recons))}});
        std::cout << "train: baseline " << o.variant << " ("
                  << model.parameter_count() << " params)\n";
    } else {
        models::ScaleSpaceModel model =
            models::ScaleSpaceModel::build(variant, native, o.levels, mcfg, o.seed);
        report = training::train_all(model, images, tcfg, [&](int k) {
            std::cout << "train: stage " << k << " done\n";
        });
        model.save_bundle(out);
        // Per-resolution fidelity on the validation split.
        const auto kernel = model.kernel();
        for (int k = 0; k <= model.levels(); ++k) {
            std::vector<Image> inputs, recons;
            for (const Image& v : val_images) {
                const auto levels_v = pyramid::level_images(v, model.levels(), kernel);
                const auto recon_v = model.reconstruct_levels(v);
                inputs.push_back(levels_v[k]);
                recons.push_back(recon_v[k]);
            }
            fidelity.push_back(
                {{"resolution", k},
                 {"l1", stats_to_json(metrics::recon_error_stats(inputs, recons))}});
        }
        std::cout << "train: ssae " << o.variant << " ("
                  << model.total_parameter_count() << " params), stage order";
        for (int k : report.stage_order) std::cout << " " << k;
        std::cout << "\n";
    }

    json jreport = report_to_json(report);
    jreport["fidelity"] = std::move(fidelity);
    jreport["kind"] = o.baseline ? "baseline" : "ssae";
    jreport["variant"] = o.variant;
    write_json_file(out / "train_report.json", jreport);
    write_json_file(out / "config.resolved.json", train_resolved(o));
    return 0;
}

// -------------------------------------------------------------- segment ---

struct SegmentOpts {
    std::string config_path;
    std::string model;
    std::string data;
    std::string out = "segmentation";
    std::string resolution = "all";  // 0..K, "aggregated", or "all"
    int filter_radius = 2;
    std::string score_mode = "abs";
    double threshold = std::numeric_limits<double>::quiet_NaN();
    bool pgm = false;
};

anomaly::ScoreMode score_mode_from(const std::string& name) {
    if (name == "abs") return anomaly::ScoreMode::kAbsolute;
    if (name == "positive") return anomaly::ScoreMode::kPositivePart;
    throw ConfigError("unknown score mode '" + name + "' (abs|positive)");
}

// A loaded model of either bundle kind behind one scoring interface.
struct ScoringModel {
    std::string kind;
    std::string variant;
    int levels = 0;
    std::optional<models::ScaleSpaceModel> ssae;
    std::optional<models::EncoderDecoder> baseline;

    static ScoringModel load(const fs::path& dir) {
        ScoringModel m;
        m.kind = models::bundle_kind(dir);
        if (m.kind == "ssae") {
            m.ssae = models::ScaleSpaceModel::load_bundle(dir);
            m.levels = m.ssae->levels();
            m.variant = models::variant_name(m.ssae->variant());
        } else {
            m.baseline = models::load_baseline_bundle(dir);
            m.levels = 0;
            m.variant = models::variant_name(m.baseline->variant());
        }
        return m;
    }

    // Signed residuals r_0..r_K (baseline: just r_0 = x - M(x)).
    anomaly::ResidualStack residuals(const Image& x) const {
        if (ssae.has_value()) return anomaly::residual_stack(*ssae, x);
        anomaly::ResidualStack stack;
        const Image recon = baseline->reconstruct(x);
        Image r(x.width(), x.height());
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = x[i] - recon[i];
        stack.residuals.push_back(std::move(r));
        return stack;
    }
};

std::vector<std::string> selected_resolutions(const ScoringModel& model,
                                              const std::string& request) {
    std::vector<std::string> out;
    if (request == "all") {
        for (int k = 0; k <= model.levels; ++k) out.push_back(std::to_string(k));
        if (model.kind == "ssae") out.push_back("aggregated");
        return out;
    }
    std::stringstream ss(request);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        if (item != "aggregated" && (item.find_first_not_of("0123456789") != std::string::npos ||
                                     std::stoi(item) > model.levels)) {
            throw ConfigError("resolution '" + item + "' not available for this model");
        }
        if (item == "aggregated" && model.kind != "ssae") {
            throw ConfigError("aggregated scoring requires a scale-space bundle");
        }
        out.push_back(item);
    }
    if (out.empty()) throw ConfigError("no resolutions selected");
    return out;
}

Image score_for(const anomaly::ResidualStack& stack, const std::string& resolution,
                int filter_radius, anomaly::ScoreMode mode) {
    if (resolution == "aggregated") {
        return anomaly::score_map(anomaly::aggregate(stack), filter_radius, mode).scores;
    }
    const int k = std::stoi(resolution);
    return anomaly::score_map(stack.residuals.at(k), filter_radius, mode).scores;
}

int run_segment(const SegmentOpts& o) {
    if (o.model.empty() || o.data.empty()) {
        throw ConfigError("segment: --model and --data are required");
    }
    const ScoringModel model = ScoringModel::load(o.model);
    const data::LoadedDataset ds = data::load_dataset(o.data);
    const anomaly::ScoreMode mode = score_mode_from(o.score_mode);
    const std::vector<std::string> resolutions = selected_resolutions(model, o.resolution);
    const bool with_masks = !std::isnan(o.threshold);

    const fs::path out = resolve_out(o.out);
    fs::create_directories(out);

    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        const anomaly::ResidualStack stack = model.residuals(ds.images[i]);
        const fs::path stem = fs::path(ds.entries[i].path).stem();
        for (const std::string& res : resolutions) {
            const Image scores = score_for(stack, res, o.filter_radius, mode);
            const std::string provenance = res == "aggregated" ? "aggregated" : "level_" + res;
            const std::string base = stem.string() + "_" + provenance;
            data::save_raw_f64(out / (base + ".f64"), scores, provenance,
                               with_masks ? std::optional<double>(o.threshold) : std::nullopt);
            if (o.pgm) data::save_pgm(out / (base + ".pgm"), scores, 16);
            if (with_masks) {
                anomaly::ScoreMap map;
                map.scores = scores;
                const auto mask = anomaly::binarize(map, o.threshold);
                data::save_raw_f64(out / (base + "_mask.f64"), mask.mask, provenance + "/mask",
                                   o.threshold);
            }
        }
    }
    write_json_file(out / "config.resolved.json",
                    json{{"model", o.model},
                         {"data", o.data},
                         {"out", o.out},
                         {"resolution", o.resolution},
                         {"filter_radius", o.filter_radius},
                         {"score_mode", o.score_mode},
                         {"threshold", with_masks ? json(o.threshold) : json()},
                         {"pgm", o.pgm}});
    std::cout << "segment: scored " << ds.images.size() << " images at "
              << resolutions.size() << " resolutions\n";
    return 0;
}

// ----------------------------------------------------------------- eval ---

struct EvalOpts {
    std::string config_path;
    std::vector<std::string> model_dirs;
    std::string data;
    std::string out = "eval";
    std::string resolutions = "all";
    int filter_radius = 0;
    std::string score_mode = "abs";
    bool rectified_aggregation = false;
    bool svg = false;
};

Image decimate_mask(Image mask, int times) {
    for (int i = 0; i < times; ++i) mask = pyramid::downsample(mask);
    return mask;
}

int run_eval(const EvalOpts& o) {
    if (o.model_dirs.empty() || o.data.empty()) {
        throw ConfigError("eval: --model and --data are required");
    }
    const data::LoadedDataset ds = data::load_dataset(o.data);
    const anomaly::ScoreMode mode = score_mode_from(o.score_mode);
    const fs::path out = resolve_out(o.out);
    fs::create_directories(out);

    json results = json::array();
    std::ostringstream csv;
    csv << "variant,kind,resolution,auprc,ceiling_dice,best_threshold,mean_l1,pixels,positives\n";

    for (const std::string& model_dir : o.model_dirs) {
        const ScoringModel model = ScoringModel::load(model_dir);
        const std::vector<std::string> resolutions = selected_resolutions(model, o.resolutions);

        for (const std::string& res : resolutions) {
            std::vector<double> scores;
            std::vector<std::uint8_t> labels;
            double l1_sum = 0.0;
            std::size_t l1_count = 0;

            for (std::size_t i = 0; i < ds.images.size(); ++i) {
                const anomaly::ResidualStack stack = model.residuals(ds.images[i]);
                Image score_img(1, 1);
                if (res == "aggregated") {
                    score_img = o.rectified_aggregation
                                    ? anomaly::aggregate_rectified(stack, mode)
                                    : anomaly::aggregate(stack);
                    score_img = anomaly::score_map(score_img, o.filter_radius, mode).scores;
                } else {
                    score_img = score_for(stack, res, o.filter_radius, mode);
                }
                // Mean |r_k| doubles as the fidelity figure at this resolution.
                const int k = res == "aggregated" ? 0 : std::stoi(res);
                for (double v : stack.residuals.at(k).data()) l1_sum += std::abs(v);
                l1_count += stack.residuals.at(k).size();

                Image gt(score_img.width(), score_img.height(), 0.0);
                if (ds.masks[i].has_value()) {
                    gt = decimate_mask(*ds.masks[i], res == "aggregated" ? 0 : k);
                }
                if (!gt.same_shape(score_img)) {
                    throw ShapeError("eval: ground truth does not match score map size");
                }
                for (std::size_t p = 0; p < score_img.size(); ++p) {
                    scores.push_back(score_img[p]);
                    labels.push_back(gt[p] != 0.0 ? 1 : 0);
                }
            }

            std::size_t positives = 0;
            for (std::uint8_t l : labels) positives += l;
            json row{{"model", model_dir},
                     {"variant", model.variant},
                     {"kind", model.kind},
                     {"resolution", res},
                     {"pixels", scores.size()},
                     {"positives", positives},
                     {"mean_l1", l1_sum / static_cast<double>(l1_count)}};
            if (positives > 0) {
                const metrics::PRCurve curve = metrics::pr_curve(scores, labels);
                const auto [best_dice, threshold] = metrics::ceiling_dice(scores, labels);
                row["auprc"] = curve.auprc;
                row["ceiling_dice"] = best_dice;
                row["best_threshold"] = threshold;
                csv << model.variant << "," << model.kind << "," << res << "," << curve.auprc
                    << "," << best_dice << "," << threshold << ","
                    << row["mean_l1"].get<double>() << "," << scores.size() << "," << positives
                    << "\n";
                if (o.svg) {
                    report::write_pr_curve_svg(
                        out / ("pr_" + model.variant + "_" + model.kind + "_" + res + ".svg"),
                        curve, model.variant + " " + model.kind + " @" + res);
                }
            } else {
                row["auprc"] = nullptr;
                row["note"] = "no positive pixels at this resolution";
                csv << model.variant << "," << model.kind << "," << res << ",,,,"
                    << row["mean_l1"].get<double>() << "," << scores.size() << ",0\n";
            }
            results.push_back(std::move(row));
        }
    }

    json report{{"settings",
                 {{"filter_radius", o.filter_radius},
                  {"score_mode", o.score_mode},
                  {"rectified_aggregation", o.rectified_aggregation},
                  {"images", ds.images.size()}}},
                {"results", std::move(results)}};
    write_json_file(out / "eval_report.json", report);
    std::ofstream csvf(out / "eval.csv");
    if (!csvf) throw DataError("cannot write eval.csv");
    csvf << csv.str();
    write_json_file(out / "config.resolved.json",
                    json{{"model", o.model_dirs},
                         {"data", o.data},
                         {"out", o.out},
                         {"resolutions", o.resolutions},
                         {"filter_radius", o.filter_radius},
                         {"score_mode", o.score_mode},
                         {"rectified_aggregation", o.rectified_aggregation},
                         {"svg", o.svg}});
    std::cout << "eval: wrote report for " << o.model_dirs.size() << " model(s)\n";
    return 0;
}

// -------------------------------------------------------------- pyramid ---

struct PyramidOpts {
    std::string config_path;
    std::string input;
    std::string out = "pyramid";
    int levels = 3;
    double coverage = 0.99;
    bool pgm = true;
};

int run_pyramid(const PyramidOpts& o) {
    if (o.input.empty()) throw ConfigError("pyramid: --input is required");
    const Image x = load_image_any(o.input);
    const auto kernel = pyramid::gaussian_kernel(o.coverage);
    const auto pyr = pyramid::build_pyramid(x, o.levels, kernel);
    const Image recon = pyramid::reconstruct(pyr);

    const fs::path out = resolve_out(o.out);
    fs::create_directories(out);

    json bands = json::array();
    auto dump_level = [&](const Image& img, const std::string& name, bool is_band) {
        data::save_raw_f64(out / (name + ".f64"), img, name);
        if (o.pgm) {
            Image preview = img;
            if (is_band) {  // bands are signed; bias for an 8-bit preview
                for (std::size_t i = 0; i < preview.size(); ++i) preview[i] = preview[i] + 0.5;
            }
            data::save_pgm(out / (name + ".pgm"), preview, 16);
        }
        double energy = 0.0;
        for (double v : img.data()) energy += v * v;
        energy /= static_cast<double>(img.size());
        bands.push_back({{"name", name},
                         {"width", img.width()},
                         {"height", img.height()},
                         {"mean_square_energy", energy}});
    };
    for (int k = 0; k < pyr.levels; ++k) {
        dump_level(pyr.highs[k], "high_" + std::to_string(k), true);
    }
    dump_level(pyr.base, "base", false);
    dump_level(recon, "reconstruction", false);

    const double err = max_abs_diff(recon, x);
    write_json_file(out / "pyramid_report.json",
                    json{{"input", o.input},
                         {"levels", o.levels},
                         {"kernel_sigma", kernel.sigma},
                         {"round_trip_max_abs_error", err},
                         {"bands", std::move(bands)}});
    write_json_file(out / "config.resolved.json",
                    json{{"input", o.input},
                         {"out", o.out},
                         {"levels", o.levels},
                         {"coverage", o.coverage},
                         {"pgm", o.pgm}});
    std::cout << "pyramid: round-trip max abs error " << err << "\n";
    return 0;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"scale-space autoencoder toolkit"};
    app.require_subcommand(1);

    SynthOpts so;
    ConfigMerge sm;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic phantom dataset");
    synth->add_option("--config", so.config_path, "JSON config file");
    sm.add(synth, "--out", "out", so.out, "output dataset directory");
    sm.add(synth, "--count", "count", so.count, "total number of samples");
    sm.add(synth, "--anomalous-count", "anomalous_count", so.anomalous_count,
           "how many trailing samples carry anomalies");
    sm.add(synth, "--size", "size", so.size, "image side length");
    sm.add(synth, "--kind", "kind", so.kind, "anomaly kind for anomalous samples");
    sm.add(synth, "--anomaly-delta", "anomaly_delta", so.anomaly_delta, "lesion intensity bump");
    sm.add(synth, "--seed", "seed", so.seed, "base seed; sample i uses seed+i");
    sm.add_flag(synth, "--pgm", "pgm", so.pgm, "write 16-bit PGM previews");

    TrainOpts to;
    ConfigMerge tm;
    CLI::App* train = app.add_subcommand("train", "train a scale-space model or baseline");
    train->add_option("--config", to.config_path, "JSON config file");
    tm.add(train, "--data", "data", to.data, "dataset manifest.json");
    tm.add(train, "--out", "out", to.out, "output bundle directory");
    tm.add(train, "--variant", "variant", to.variant, "dense|spatial|variational");
    tm.add(train, "--levels", "levels", to.levels, "pyramid levels K");
    tm.add_flag(train, "--baseline", "baseline", to.baseline,
                "train a single budget-matched autoencoder instead");
    tm.add_flag(train, "--model-base", "model_base", to.model_base,
                "pass the low-pass base through its own network");
    tm.add(train, "--epochs", "epochs", to.epochs, "max epochs per stage");
    tm.add(train, "--batch", "batch_size", to.batch_size, "batch size");
    tm.add(train, "--lr", "lr", to.lr, "Adam learning rate");
    tm.add(train, "--patience", "patience", to.patience, "early-stop patience (rounds)");
    tm.add(train, "--min-delta", "min_delta", to.min_delta, "relative improvement threshold");
    tm.add(train, "--val-fraction", "val_fraction", to.val_fraction, "validation split");
    tm.add(train, "--latent", "latent_width", to.latent_width, "dense/variational latent width");
    tm.add(train, "--coverage", "kernel_coverage", to.kernel_coverage,
           "gaussian kernel coverage");
    tm.add(train, "--seed", "seed", to.seed, "training seed");

    SegmentOpts go;
    ConfigMerge gm;
    CLI::App* segment = app.add_subcommand("segment", "score images and emit maps/masks");
    segment->add_option("--config", go.config_path, "JSON config file");
    gm.add(segment, "--model", "model", go.model, "model bundle directory");
    gm.add(segment, "--data", "data", go.data, "dataset manifest.json");
    gm.add(segment, "--out", "out", go.out, "output directory");
    gm.add(segment, "--resolution", "resolution", go.resolution,
           "comma list of levels, 'aggregated', or 'all'");
    gm.add(segment, "--filter-radius", "filter_radius", go.filter_radius,
           "median filter radius (0 = off)");
    gm.add(segment, "--score-mode", "score_mode", go.score_mode, "abs|positive");
    gm.add(segment, "--threshold", "threshold", go.threshold,
           "also write binary masks at this threshold");
    gm.add_flag(segment, "--pgm", "pgm", go.pgm, "write PGM previews of score maps");

    EvalOpts eo;
    ConfigMerge em;
    CLI::App* eval = app.add_subcommand("eval", "evaluate models against ground truth");
    eval->add_option("--config", eo.config_path, "JSON config file");
    {
        CLI::Option* opt = eval->add_option("--model", eo.model_dirs,
                                            "model bundle directory (repeatable)");
        em.bind(opt, "model", [&eo](const json& j) {
            if (j.is_array()) {
                eo.model_dirs = j.get<std::vector<std::string>>();
            } else {
                eo.model_dirs = {j.get<std::string>()};
            }
        });
    }
    em.add(eval, "--data", "data", eo.data, "test dataset manifest.json");
    em.add(eval, "--out", "out", eo.out, "output directory");
    em.add(eval, "--resolutions", "resolutions", eo.resolutions,
           "comma list of levels, 'aggregated', or 'all'");
    em.add(eval, "--filter-radius", "filter_radius", eo.filter_radius,
           "median filter radius applied to scores");
    em.add(eval, "--score-mode", "score_mode", eo.score_mode, "abs|positive");
    em.add_flag(eval, "--rectified-aggregation", "rectified_aggregation",
                eo.rectified_aggregation, "rectify residuals per level before aggregating");
    em.add_flag(eval, "--svg", "svg", eo.svg, "emit PR-curve SVG plots");

    PyramidOpts po;
    ConfigMerge pm;
    CLI::App* pyramid_cmd = app.add_subcommand("pyramid", "decompose and reconstruct one image");
    pyramid_cmd->add_option("--config", po.config_path, "JSON config file");
    pm.add(pyramid_cmd, "--input", "input", po.input, "input image (.f64 or .pgm)");
    pm.add(pyramid_cmd, "--out", "out", po.out, "output directory");
    pm.add(pyramid_cmd, "--levels", "levels", po.levels, "pyramid levels K");
    pm.add(pyramid_cmd, "--coverage", "coverage", po.coverage, "gaussian kernel coverage");
    pm.add_flag(pyramid_cmd, "--pgm", "pgm", po.pgm, "write PGM previews");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    auto merge = [](const std::string& path, ConfigMerge& m) {
        if (!path.empty()) m.apply(read_json_file(path));
    };
    if (synth->parsed()) {
        merge(so.config_path, sm);
        return run_synth(so);
    }
    if (train->parsed()) {
        merge(to.config_path, tm);
        return run_train(to);
    }
    if (segment->parsed()) {
        merge(go.config_path, gm);
        return run_segment(go);
    }
    if (eval->parsed()) {
        merge(eo.config_path, em);
        return run_eval(eo);
    }
    if (pyramid_cmd->parsed()) {
        merge(po.config_path, pm);
        return run_pyramid(po);
    }
    return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ShapeError& e) {
        std::cerr << "shape error: " << e.what() << "\n";
        return kExitShape;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
