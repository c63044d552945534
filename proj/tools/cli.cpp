#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rbrnet/checkpoint.hpp"
#include "rbrnet/dataset.hpp"
#include "rbrnet/image.hpp"
#include "rbrnet/metrics.hpp"
#include "rbrnet/model.hpp"
#include "rbrnet/optim.hpp"
#include "rbrnet/tsne.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rbrnet::cli {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOptions {
    std::string data_dir;
    std::string config_file;
    std::string out_path;
    std::string cache_path;
    std::uint64_t seed = 0;
    int epochs = 40;
    int batch_size = 16;
    double lr = 1e-4;
    double decay = 0.95;  // squared-gradient decay factor
    double eps = 1e-8;
    double lr_drop_factor = 0.4;
    int lr_drop_period = 10;
    double train_fraction = 0.8;
    double val_fraction = 0.1;
    int input_size = 0;  // 0 = preset default
    int channels = 0;    // 0 = preset default
    std::string preset = "canonical";
    bool augment = true;
};

void overlay_config_file(TrainOptions& opt, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValueError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValueError(std::string("malformed config file: ") + e.what());
    }
    opt.seed = j.value("seed", opt.seed);
    opt.epochs = j.value("epochs", opt.epochs);
    opt.batch_size = j.value("batch_size", opt.batch_size);
    opt.lr = j.value("lr", opt.lr);
    opt.decay = j.value("decay", opt.decay);
    opt.eps = j.value("eps", opt.eps);
    opt.lr_drop_factor = j.value("lr_drop_factor", opt.lr_drop_factor);
    opt.lr_drop_period = j.value("lr_drop_period", opt.lr_drop_period);
    opt.train_fraction = j.value("train_fraction", opt.train_fraction);
    opt.val_fraction = j.value("val_fraction_of_train", opt.val_fraction);
    opt.input_size = j.value("input_size", opt.input_size);
    opt.channels = j.value("channels", opt.channels);
    opt.preset = j.value("preset", opt.preset);
    opt.augment = j.value("augment", opt.augment);
}

void validate_train_options(const TrainOptions& opt) {
    if (opt.epochs < 0) throw ValueError("epochs must be >= 0");
    if (opt.batch_size < 1) throw ValueError("batch size must be >= 1");
    if (opt.lr <= 0.0) throw ValueError("learning rate must be > 0");
    if (opt.decay <= 0.0 || opt.decay >= 1.0) throw ValueError("decay must lie in (0, 1)");
    if (opt.eps <= 0.0) throw ValueError("eps must be > 0");
    if (opt.lr_drop_factor <= 0.0 || opt.lr_drop_factor >= 1.0) {
        throw ValueError("lr drop factor must lie in (0, 1)");
    }
    if (opt.lr_drop_period < 1) throw ValueError("lr drop period must be >= 1");
    if (opt.train_fraction <= 0.0 || opt.train_fraction >= 1.0) {
        throw ValueError("train fraction must lie in (0, 1)");
    }
    if (opt.val_fraction < 0.0 || opt.val_fraction >= 1.0) {
        throw ValueError("validation fraction must lie in [0, 1)");
    }
    if (opt.input_size < 0 || opt.channels < 0) throw ValueError("bad input dims");
    if (opt.preset != "canonical" && opt.preset != "desk") {
        throw ValueError("preset must be 'canonical' or 'desk'");
    }
}

ResBRNetConfig config_from_options(const TrainOptions& opt, std::int64_t num_classes) {
    ResBRNetConfig cfg =
        opt.preset == "desk" ? ResBRNetConfig::desk() : ResBRNetConfig::canonical();
    if (opt.input_size > 0) {
        cfg.in_height = opt.input_size;
        cfg.in_width = opt.input_size;
    }
    if (opt.channels > 0) cfg.in_channels = opt.channels;
    cfg.num_classes = num_classes;
    return cfg;
}

LabeledDataset load_dataset(const std::string& data_dir, const IngestTarget& target,
                            const std::string& cache_path) {
    if (cache_path.empty()) return ingest(data_dir, target);
    const std::uint64_t hash = dataset_tree_hash(data_dir);
    if (auto cached = load_dataset_cache(cache_path, hash)) {
        if (cached->channels == target.channels && cached->height == target.height &&
            cached->width == target.width) {
            return *cached;
        }
        std::cerr << "cache shape differs from requested target, rebuilding\n";
    }
    LabeledDataset ds = ingest(data_dir, target);
    save_dataset_cache(ds, cache_path, hash);
    return ds;
}

struct EpochEval {
    double loss = 0.0;
    double accuracy = 0.0;
};

EpochEval infer_accuracy(Model& model, const LabeledDataset& ds) {
    EpochEval out;
    if (ds.samples.empty()) {
        out.accuracy = std::nan("");
        return out;
    }
    BatchStream stream(ds, 64, 0, 0, nullptr);
    std::int64_t correct = 0;
    for (std::int64_t b = 0; b < stream.batch_count(); ++b) {
        auto batch = stream.get(b);
        auto logits = model.forward(nullptr, batch.images, Mode::infer);
        const std::int64_t bs = logits.dim(0), k = logits.dim(1);
        for (std::int64_t i = 0; i < bs; ++i) {
            const auto row = logits.data().subspan(i * k, k);
            const std::int64_t pred = std::max_element(row.begin(), row.end()) - row.begin();
            correct += pred == batch.labels[static_cast<std::size_t>(i)];
        }
    }
    out.accuracy = static_cast<double>(correct) / static_cast<double>(ds.samples.size());
    return out;
}

int cmd_train(const TrainOptions& opt) {
    LabeledDataset ds;
    try {
        ds = load_dataset(opt.data_dir,
                          [&] {
                              ResBRNetConfig probe = config_from_options(opt, 2);
                              return IngestTarget{probe.in_channels, probe.in_height,
                                                  probe.in_width};
                          }(),
                          opt.cache_path);
    } catch (const DataError& e) {
        std::cerr << "dataset error: " << e.what() << "\n";
        return kExitDataError;
    }

    SplitSpec split_spec;
    split_spec.train_fraction = opt.train_fraction;
    split_spec.val_fraction_of_train = opt.val_fraction;
    split_spec.seed = opt.seed;
    SplitResult parts;
    try {
        parts = split(ds, split_spec);
    } catch (const DataError& e) {
        std::cerr << "dataset error: " << e.what() << "\n";
        return kExitDataError;
    }

    const ResBRNetConfig cfg =
        config_from_options(opt, static_cast<std::int64_t>(ds.class_names.size()));
    Model model = Model::build(cfg, opt.seed);
    auto params = model.named_tensors();
    auto state = RmsPropState<float>::init(params, static_cast<float>(opt.decay),
                                           static_cast<float>(opt.eps));
    LrSchedule schedule{opt.lr, opt.lr_drop_factor, opt.lr_drop_period};

    AugmentSpec aug;
    const AugmentSpec* aug_ptr = opt.augment ? &aug : nullptr;

    std::ofstream log(opt.out_path + ".trainlog.csv", std::ios::trunc);
    if (!log) {
        std::cerr << "cannot write train log next to " << opt.out_path << "\n";
        return kExitBadArgs;
    }
    const std::string header = "epoch,lr,train_loss,train_acc,val_acc";
    std::cout << header << "\n";
    log << header << "\n";

    // Best-validation snapshot (ties keep the earlier epoch).
    std::vector<std::vector<float>> best_values;
    double best_val = -1.0;
    int best_epoch = -1;
    double final_lr = opt.lr;
    auto snapshot = [&] {
        best_values.clear();
        for (auto& p : model.named_tensors()) {
            best_values.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
        }
    };

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        const double lr = schedule.at(epoch);
        final_lr = lr;
        BatchStream stream(parts.train, opt.batch_size, epoch, opt.seed, aug_ptr);
        double loss_sum = 0.0;
        std::int64_t correct = 0;
        for (std::int64_t b = 0; b < stream.batch_count(); ++b) {
            auto batch = stream.get(b);
            Tape<float> tape;
            model.zero_grad();
            const std::uint64_t step_seed =
                mix_seed(opt.seed, static_cast<std::uint64_t>(epoch) * 1000003ULL +
                                       static_cast<std::uint64_t>(b));
            auto logits = model.forward(&tape, batch.images, Mode::train, step_seed);
            auto result = softmax_cross_entropy(&tape, logits, batch.labels);
            const float loss = result.loss.item();
            if (!std::isfinite(loss)) {
                std::cerr << "numeric divergence: non-finite loss at epoch " << epoch << "\n";
                return kExitNumericDivergence;
            }
            const std::int64_t bs = logits.dim(0), k = logits.dim(1);
            loss_sum += static_cast<double>(loss) * static_cast<double>(bs);
            for (std::int64_t i = 0; i < bs; ++i) {
                const auto row = result.probs.data().subspan(i * k, k);
                const std::int64_t pred = std::max_element(row.begin(), row.end()) - row.begin();
                correct += pred == batch.labels[static_cast<std::size_t>(i)];
            }
            tape.backward(result.loss);
            try {
                rmsprop_step(params, state, static_cast<float>(lr));
            } catch (const NumericError& e) {
                std::cerr << "numeric divergence: " << e.what() << "\n";
                return kExitNumericDivergence;
            }
        }
        const double train_loss = loss_sum / static_cast<double>(parts.train.samples.size());
        const double train_acc =
            static_cast<double>(correct) / static_cast<double>(parts.train.samples.size());
        const double val_acc = infer_accuracy(model, parts.val).accuracy;

        const std::string line = std::to_string(epoch) + "," + fmt(lr) + "," + fmt(train_loss) +
                                 "," + fmt(train_acc) + "," + fmt(val_acc);
        std::cout << line << "\n";
        log << line << "\n";

        const double selection = std::isnan(val_acc) ? train_acc : val_acc;
        if (selection > best_val) {
            best_val = selection;
            best_epoch = epoch;
            snapshot();
        }
    }

    if (best_epoch >= 0) {
        auto current = model.named_tensors();
        for (std::size_t i = 0; i < current.size(); ++i) {
            std::copy(best_values[i].begin(), best_values[i].end(),
                      current[i].tensor.data().begin());
        }
    }

    CheckpointMeta meta;
    meta.config = cfg;
    meta.class_names = ds.class_names;
    meta.epochs_run = opt.epochs;
    meta.final_lr = final_lr;
    meta.seed = opt.seed;
    meta.train_fraction = opt.train_fraction;
    meta.val_fraction_of_train = opt.val_fraction;
    meta.best_epoch = best_epoch;
    meta.best_val_acc = best_val < 0.0 ? 0.0 : best_val;
    try {
        save_checkpoint(model, meta, opt.out_path);
    } catch (const CheckpointError& e) {
        std::cerr << "cannot save checkpoint: " << e.what() << "\n";
        return kExitBadCheckpoint;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval / predict / embed share checkpoint + dataset loading
// ---------------------------------------------------------------------------

struct EvalInputs {
    LoadedCheckpoint ckpt;
    LabeledDataset subset;  // held-out test split, or the whole tree with --all
};

int load_eval_inputs(const std::string& ckpt_path, const std::string& data_dir, bool all,
                     std::optional<std::uint64_t> seed_override, const std::string& cache_path,
                     EvalInputs& out) {
    try {
        out.ckpt = load_checkpoint(ckpt_path);
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return kExitBadCheckpoint;
    }
    const auto& cfg = out.ckpt.meta.config;
    LabeledDataset ds;
    try {
        ds = load_dataset(data_dir, IngestTarget{cfg.in_channels, cfg.in_height, cfg.in_width},
                          cache_path);
        if (ds.class_names != out.ckpt.meta.class_names) {
            throw DataError("dataset classes do not match the checkpoint's class names");
        }
        if (all) {
            out.subset = std::move(ds);
        } else {
            SplitSpec spec;
            spec.train_fraction = out.ckpt.meta.train_fraction;
            spec.val_fraction_of_train = out.ckpt.meta.val_fraction_of_train;
            spec.seed = seed_override.value_or(out.ckpt.meta.seed);
            out.subset = split(ds, spec).test;
        }
    } catch (const DataError& e) {
        std::cerr << "dataset error: " << e.what() << "\n";
        return kExitDataError;
    }
    return kExitOk;
}

json class_metrics_json(const ClassMetrics& m) {
    return json{{"sensitivity", m.sensitivity},
                {"precision", m.precision},
                {"specificity", m.specificity},
                {"f1", m.f1},
                {"flagged", m.flagged}};
}

void write_curve_csv(const std::string& path, const Curve& curve, const char* header) {
    std::ofstream out(path, std::ios::trunc);
    out << header << "\n";
    for (const auto& p : curve.points) {
        out << fmt(p.x) << "," << fmt(p.y) << "," << fmt(p.threshold) << "\n";
    }
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir,
             const std::string& report_path, const std::string& curves_prefix, bool all,
             std::optional<std::uint64_t> seed_override, const std::string& cache_path) {
    EvalInputs in;
    if (int rc = load_eval_inputs(ckpt_path, data_dir, all, seed_override, cache_path, in)) {
        return rc;
    }
    if (in.subset.samples.empty()) {
        std::cerr << "dataset error: evaluation split is empty\n";
        return kExitDataError;
    }

    Model& model = in.ckpt.model;
    const auto& class_names = in.ckpt.meta.class_names;
    BatchStream stream(in.subset, 64, 0, 0, nullptr);
    std::vector<std::vector<double>> probs;
    std::vector<int> labels;
    for (std::int64_t b = 0; b < stream.batch_count(); ++b) {
        auto batch = stream.get(b);
        auto logits = model.forward(nullptr, batch.images, Mode::infer);
        auto sm = softmax_cross_entropy<float>(nullptr, logits, batch.labels);
        const std::int64_t bs = logits.dim(0), k = logits.dim(1);
        for (std::int64_t i = 0; i < bs; ++i) {
            std::vector<double> row(static_cast<std::size_t>(k));
            for (std::int64_t c = 0; c < k; ++c) {
                row[static_cast<std::size_t>(c)] = static_cast<double>(sm.probs.data()[i * k + c]);
            }
            probs.push_back(std::move(row));
            labels.push_back(batch.labels[static_cast<std::size_t>(i)]);
        }
    }

    const EvalReport report = evaluate(probs, labels, class_names);

    json doc;
    doc["accuracy_percent"] = report.scalars.accuracy_percent;
    doc["evaluated_samples"] = report.cm.total();
    doc["class_names"] = class_names;
    doc["confusion"] = report.cm.counts;
    json per_class;
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        json entry = class_metrics_json(report.scalars.per_class[c]);
        const auto& curves = report.curves.per_class[c];
        entry["curves_present"] = curves.present;
        if (curves.present) {
            entry["roc_auc"] = curves.roc.auc;
            entry["pr_auc"] = curves.pr.auc;
        }
        per_class[class_names[c]] = entry;
    }
    doc["per_class"] = per_class;
    json macro = class_metrics_json(report.scalars.macro);
    macro["roc_auc"] = report.curves.macro_roc_auc;
    macro["pr_auc"] = report.curves.macro_pr_auc;
    doc["macro"] = macro;

    if (!report_path.empty()) {
        std::ofstream out(report_path, std::ios::trunc);
        if (!out) {
            std::cerr << "cannot write report " << report_path << "\n";
            return kExitBadArgs;
        }
        out << doc.dump(2) << "\n";
    }
    if (!curves_prefix.empty()) {
        for (std::size_t c = 0; c < class_names.size(); ++c) {
            if (!report.curves.per_class[c].present) continue;
            write_curve_csv(curves_prefix + ".roc." + class_names[c] + ".csv",
                            report.curves.per_class[c].roc, "fpr,tpr,threshold");
            write_curve_csv(curves_prefix + ".pr." + class_names[c] + ".csv",
                            report.curves.per_class[c].pr, "recall,precision,threshold");
        }
    }
    std::cout << doc.dump(2) << "\n";
    return kExitOk;
}

int cmd_predict(const std::string& ckpt_path, const std::string& image_path) {
    LoadedCheckpoint ckpt;
    try {
        ckpt = load_checkpoint(ckpt_path);
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return kExitBadCheckpoint;
    }
    const auto& cfg = ckpt.meta.config;
    Tensor<float> input;
    try {
        Image img = decode_image(image_path);
        img = cfg.in_channels == 1 ? to_luminance(img) : to_rgb(img);
        img = resize_bilinear(img, cfg.in_height, cfg.in_width);
        input = image_to_tensor(img).reshape({1, cfg.in_channels, cfg.in_height, cfg.in_width});
    } catch (const DataError& e) {
        std::cerr << "image error: " << e.what() << "\n";
        return kExitDataError;
    }

    auto logits = ckpt.model.forward(nullptr, input, Mode::infer);
    const std::int64_t k = logits.dim(1);
    // stable softmax over the single row
    float mx = logits.data()[0];
    for (std::int64_t c = 1; c < k; ++c) mx = std::max(mx, logits.data()[c]);
    double z = 0.0;
    std::vector<double> probs(static_cast<std::size_t>(k));
    for (std::int64_t c = 0; c < k; ++c) {
        probs[static_cast<std::size_t>(c)] = std::exp(static_cast<double>(logits.data()[c] - mx));
        z += probs[static_cast<std::size_t>(c)];
    }
    for (auto& p : probs) p /= z;

    const std::int64_t argmax =
        std::max_element(probs.begin(), probs.end()) - probs.begin();
    json doc;
    doc["class"] = ckpt.meta.class_names[static_cast<std::size_t>(argmax)];
    json pj;
    for (std::int64_t c = 0; c < k; ++c) {
        pj[ckpt.meta.class_names[static_cast<std::size_t>(c)]] =
            probs[static_cast<std::size_t>(c)];
    }
    doc["probs"] = pj;
    std::cout << doc.dump(2) << "\n";
    return kExitOk;
}

int cmd_embed(const std::string& ckpt_path, const std::string& data_dir,
              const std::string& out_path, double perplexity, int iterations, bool all,
              std::optional<std::uint64_t> seed_override, std::uint64_t tsne_seed,
              const std::string& cache_path) {
    EvalInputs in;
    if (int rc = load_eval_inputs(ckpt_path, data_dir, all, seed_override, cache_path, in)) {
        return rc;
    }
    const std::int64_t n = static_cast<std::int64_t>(in.subset.samples.size());
    if (static_cast<double>(n) < 3.0 * perplexity) {
        std::cerr << "perplexity " << perplexity << " infeasible for " << n
                  << " samples (need n >= 3*perplexity)\n";
        return kExitPerplexityInfeasible;
    }

    FeatureMatrix features = extract_features(in.ckpt.model, in.subset);
    TsneConfig cfg;
    cfg.perplexity = perplexity;
    cfg.iterations = iterations;
    cfg.seed = tsne_seed;
    const TsneResult result = tsne(features, cfg);

    std::ofstream out(out_path, std::ios::trunc);
    if (!out) {
        std::cerr << "cannot write " << out_path << "\n";
        return kExitBadArgs;
    }
    out << "x,y,label,class_name\n";
    for (std::int64_t i = 0; i < n; ++i) {
        const int label = features.labels[static_cast<std::size_t>(i)];
        out << fmt(result.coords[i * 2]) << "," << fmt(result.coords[i * 2 + 1]) << "," << label
            << "," << in.ckpt.meta.class_names[static_cast<std::size_t>(label)] << "\n";
    }
    return kExitOk;
}

int cmd_ingest_cache(const std::string& data_dir, const std::string& out_path, int input_size,
                     int channels) {
    try {
        const std::uint64_t hash = dataset_tree_hash(data_dir);
        LabeledDataset ds = ingest(data_dir, IngestTarget{channels, input_size, input_size});
        save_dataset_cache(ds, out_path, hash);
        std::cout << "cached " << ds.samples.size() << " samples to " << out_path << "\n";
    } catch (const DataError& e) {
        std::cerr << "dataset error: " << e.what() << "\n";
        return kExitDataError;
    }
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Res-BRNet: residual/regional CNN training and evaluation"};
    app.require_subcommand(1);

    // --- train ---
    auto* train = app.add_subcommand("train", "Train on a directory-per-class image tree");
    TrainOptions topt;
    std::optional<std::uint64_t> t_seed;
    std::optional<int> t_epochs, t_batch, t_input, t_channels, t_drop_period;
    std::optional<double> t_lr, t_decay, t_drop_factor, t_train_frac, t_val_frac;
    std::optional<std::string> t_preset;
    bool t_no_augment = false;
    train->add_option("--data", topt.data_dir, "dataset root")->required();
    train->add_option("--out", topt.out_path, "checkpoint output path")->required();
    train->add_option("--config", topt.config_file, "JSON run config; flags override it");
    train->add_option("--cache", topt.cache_path, "decoded-image cache file");
    train->add_option("--seed", t_seed, "run seed (init, split, shuffles, dropout, augment)");
    train->add_option("--epochs", t_epochs, "training epochs (default 40)");
    train->add_option("--batch-size", t_batch, "mini-batch size (default 16)");
    train->add_option("--lr", t_lr, "initial learning rate (default 1e-4)");
    train->add_option("--decay", t_decay, "RMSprop squared-gradient decay (default 0.95)");
    train->add_option("--lr-drop-factor", t_drop_factor, "schedule drop factor (default 0.4)");
    train->add_option("--lr-drop-period", t_drop_period, "epochs between drops (default 10)");
    train->add_option("--train-fraction", t_train_frac, "train fraction (default 0.8)");
    train->add_option("--val-fraction", t_val_frac, "validation fraction of train (default 0.1)");
    train->add_option("--input-size", t_input, "square input size override");
    train->add_option("--channels", t_channels, "input channels override (1 or 3)");
    train->add_option("--preset", t_preset, "architecture preset: canonical | desk");
    train->add_flag("--no-augment", t_no_augment, "disable training-time augmentation");

    // --- eval ---
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the held-out test split");
    std::string e_ckpt, e_data, e_report, e_curves, e_cache;
    std::optional<std::uint64_t> e_seed;
    bool e_all = false;
    eval->add_option("--ckpt", e_ckpt, "checkpoint file")->required();
    eval->add_option("--data", e_data, "dataset root")->required();
    eval->add_option("--report", e_report, "write the evaluation report JSON here");
    eval->add_option("--curves", e_curves, "prefix for per-class ROC/PR CSV files");
    eval->add_option("--seed", e_seed, "split seed override (defaults to the checkpoint's)");
    eval->add_option("--cache", e_cache, "decoded-image cache file");
    eval->add_flag("--all", e_all, "evaluate the whole tree instead of the test split");

    // --- predict ---
    auto* predict = app.add_subcommand("predict", "Classify one image");
    std::string p_ckpt, p_image;
    predict->add_option("--ckpt", p_ckpt, "checkpoint file")->required();
    predict->add_option("--image", p_image, "image file (PNG or JPEG)")->required();

    // --- embed ---
    auto* embed = app.add_subcommand("embed", "t-SNE projection of penultimate features");
    std::string m_ckpt, m_data, m_out, m_cache;
    std::optional<std::uint64_t> m_seed;
    double m_perplexity = 30.0;
    int m_iterations = 1000;
    std::uint64_t m_tsne_seed = 0;
    bool m_all = false;
    embed->add_option("--ckpt", m_ckpt, "checkpoint file")->required();
    embed->add_option("--data", m_data, "dataset root")->required();
    embed->add_option("--out", m_out, "output CSV (x,y,label,class_name)")->required();
    embed->add_option("--perplexity", m_perplexity, "t-SNE perplexity (default 30)");
    embed->add_option("--iterations", m_iterations, "t-SNE iterations (default 1000)");
    embed->add_option("--tsne-seed", m_tsne_seed, "embedding init seed");
    embed->add_option("--seed", m_seed, "split seed override (defaults to the checkpoint's)");
    embed->add_option("--cache", m_cache, "decoded-image cache file");
    embed->add_flag("--all", m_all, "embed the whole tree instead of the test split");

    // --- ingest-cache ---
    auto* cache = app.add_subcommand("ingest-cache", "Decode a tree into a binary tensor cache");
    std::string c_data, c_out;
    int c_input = 227, c_channels = 1;
    cache->add_option("--data", c_data, "dataset root")->required();
    cache->add_option("--out", c_out, "cache file to write")->required();
    cache->add_option("--input-size", c_input, "square target size (default 227)");
    cache->add_option("--channels", c_channels, "target channels (default 1)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitBadArgs;
    }

    try {
        if (train->parsed()) {
            if (!topt.config_file.empty()) overlay_config_file(topt, topt.config_file);
            if (t_seed) topt.seed = *t_seed;
            if (t_epochs) topt.epochs = *t_epochs;
            if (t_batch) topt.batch_size = *t_batch;
            if (t_lr) topt.lr = *t_lr;
            if (t_decay) topt.decay = *t_decay;
            if (t_drop_factor) topt.lr_drop_factor = *t_drop_factor;
            if (t_drop_period) topt.lr_drop_period = *t_drop_period;
            if (t_train_frac) topt.train_fraction = *t_train_frac;
            if (t_val_frac) topt.val_fraction = *t_val_frac;
            if (t_input) topt.input_size = *t_input;
            if (t_channels) topt.channels = *t_channels;
            if (t_preset) topt.preset = *t_preset;
            if (t_no_augment) topt.augment = false;
            validate_train_options(topt);
            return cmd_train(topt);
        }
        if (eval->parsed()) {
            return cmd_eval(e_ckpt, e_data, e_report, e_curves, e_all, e_seed, e_cache);
        }
        if (predict->parsed()) {
            return cmd_predict(p_ckpt, p_image);
        }
        if (embed->parsed()) {
            return cmd_embed(m_ckpt, m_data, m_out, m_perplexity, m_iterations, m_all, m_seed,
                             m_tsne_seed, m_cache);
        }
        if (cache->parsed()) {
            return cmd_ingest_cache(c_data, c_out, c_input, c_channels);
        }
    } catch (const ValueError& e) {
        std::cerr << "invalid arguments: " << e.what() << "\n";
        return kExitBadArgs;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return kExitBadCheckpoint;
    } catch (const DataError& e) {
        std::cerr << "dataset error: " << e.what() << "\n";
        return kExitDataError;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadArgs;
    }
    return kExitBadArgs;
}

}  // namespace rbrnet::cli
