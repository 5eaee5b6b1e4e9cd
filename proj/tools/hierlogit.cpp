#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <utility>
#include <vector>

#include "hierlogit/hierlogit.hpp"

namespace fs = std::filesystem;
using namespace hierlogit;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open '" + path + "' for reading");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) {
        throw Error("read failed for '" + path + "'");
    }
    return ss.str();
}

/// Collects outputs in temporary files and renames them into place only once
/// every output of the command is written. Anything staged is removed if the
/// command fails before commit.
class Outputs {
public:
    Outputs() = default;
    Outputs(const Outputs&) = delete;
    Outputs& operator=(const Outputs&) = delete;

    ~Outputs() {
        std::error_code ec;
        for (const auto& [tmp, dest] : staged_) {
            fs::remove(tmp, ec);
        }
    }

    void stage(const std::string& dest, const std::string& content) {
        const std::string tmp = dest + ".tmp." + std::to_string(::getpid());
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) {
                throw Error("cannot open '" + dest + "' for writing");
            }
            staged_.emplace_back(tmp, dest);
            out << content;
            out.flush();
            if (!out) {
                throw Error("write failed for '" + dest + "'");
            }
        }
    }

    void commit() {
        for (const auto& [tmp, dest] : staged_) {
            fs::rename(tmp, dest);
        }
        staged_.clear();
    }

private:
    std::vector<std::pair<std::string, std::string>> staged_;
};

LabelHierarchy load_hierarchy(const std::string& path) { return parse_hierarchy(read_file(path)); }

LogitDataset load_csv(const std::string& path) { return load_dataset(read_file(path)); }

void check_hierarchy_labels(const LabelHierarchy& h, const std::vector<std::string>& labels) {
    const auto names = h.terminal_names();
    if (!std::equal(names.begin(), names.end(), labels.begin(), labels.end())) {
        throw InvalidArgument("hierarchy terminals do not match the dataset labels (names and order must agree)");
    }
}

std::vector<std::size_t> parse_size_list(const std::vector<std::string>& items, const char* what) {
    std::vector<std::size_t> out;
    for (const auto& s : items) {
        const auto v = detail::parse_int<std::size_t>(s);
        if (!v || *v == 0) {
            throw InvalidArgument(std::string(what) + " entries must be positive integers, got '" + s + "'");
        }
        out.push_back(*v);
    }
    return out;
}

// Options shared by several subcommands.
struct Flags {
    std::string hierarchy, val, test, model, predictions, out, csv;
    std::string scheme = "confusion";
    std::string level;
    std::string mode = "tree";
    double threshold = 0.9;
    std::uint64_t seed = 0;
    std::size_t kfold = 0;
    std::vector<std::string> schemes, sizes, levels;
    // synth
    std::size_t classes = 0;
    double separation = 3.0;
    std::size_t dim = 8;
    std::vector<double> scales{3.0, 1.0};
    std::size_t val_per_class = 100;
    std::size_t test_per_class = 100;
    double temperature = 1.0;
};

RunConfig to_run_config(const Flags& f) {
    RunConfig rc;
    if (!f.hierarchy.empty()) {
        rc.hierarchy = f.hierarchy;
    }
    if (!f.val.empty()) {
        rc.validation = f.val;
    }
    if (!f.out.empty()) {
        rc.out = f.out;
    }
    rc.scheme = parse_scheme(f.scheme);
    if (!f.level.empty()) {
        rc.level = LevelSetting::parse(f.level);
    }
    rc.threshold = f.threshold;
    rc.seed = f.seed;
    rc.mode = parse_inference_mode(f.mode);
    rc.validate();
    return rc;
}

int cmd_fit(const Flags& f) {
    const auto rc = to_run_config(f);
    const auto v = load_csv(f.val);
    std::optional<LabelHierarchy> h;
    if (rc.hierarchy) {
        h = load_hierarchy(*rc.hierarchy);
        check_hierarchy_labels(*h, v.label_names());
    }
    const LabelHierarchy* hp = h ? &*h : nullptr;
    std::size_t level = 0;
    if (rc.level) {
        if (rc.level->fixed) {
            level = *rc.level->fixed;
        } else {
            SelectionOptions opt;
            opt.scheme = rc.scheme;
            opt.threshold = rc.threshold;
            opt.mode = rc.mode;
            opt.seed = rc.seed;
            if (f.kfold > 0) {
                opt.folds = f.kfold;
            }
            const auto cands = default_level_candidates(v);
            level = loocv_select(v, hp, cands, opt).chosen;
            std::cout << "selected level " << level << (opt.folds ? " (k-fold, approximate)" : " (loocv)") << "\n";
        }
    }
    const auto model = fit_estimators(v, fit_compressor(rc.scheme, level, v, hp));
    Outputs outs;
    outs.stage(f.out, serialize_model(model));
    outs.commit();

    std::cout << "scheme " << to_string(rc.scheme);
    if (takes_level(rc.scheme)) {
        std::cout << " level " << level;
    }
    std::cout << "\n";
    for (std::size_t i = 0; i < model.num_labels(); ++i) {
        std::cout << "label " << model.label_names()[i] << " |V_i|=" << model.subset_size(i)
                  << (model.is_fallback(i) ? " fallback" : "") << "\n";
    }
    std::cout << "fallback rows " << model.fallback_count() << "\n";
    return 0;
}

int cmd_infer(const Flags& f) {
    const auto mode = parse_inference_mode(f.mode);
    detail::check_threshold(f.threshold);
    const auto model = parse_model(read_file(f.model));
    const auto test = load_csv(f.test);
    if (test.label_names() != model.label_names()) {
        throw InvalidArgument("test labels do not match the model labels");
    }
    std::optional<LabelHierarchy> h;
    if (!f.hierarchy.empty()) {
        h = load_hierarchy(f.hierarchy);
        check_hierarchy_labels(*h, test.label_names());
    }
    if (mode == InferenceMode::Tree && !h) {
        throw InvalidArgument("tree inference requires --hierarchy");
    }
    const LabelHierarchy* hp = h ? &*h : nullptr;
    const auto preds = predict_all(model, hp, test, f.threshold, mode);
    Outputs outs;
    outs.stage(f.out, serialize_predictions(preds, test.label_names(), hp));
    outs.commit();
    return 0;
}

int cmd_evaluate(const Flags& f) {
    detail::check_threshold(f.threshold);
    const auto test = load_csv(f.test);
    std::optional<LabelHierarchy> h;
    if (!f.hierarchy.empty()) {
        h = load_hierarchy(f.hierarchy);
        check_hierarchy_labels(*h, test.label_names());
    }
    auto preds = parse_predictions(read_file(f.predictions), test.label_names(), h ? &*h : nullptr);
    if (preds.size() != test.size()) {
        throw InvalidArgument("prediction count " + std::to_string(preds.size()) + " differs from test size " +
                              std::to_string(test.size()));
    }
    for (std::size_t k = 0; k < preds.size(); ++k) {
        preds[k].base_prediction = argmax_label(test[k]);
    }
    const auto report = evaluate_predictions(preds, test, f.threshold);
    Outputs outs;
    if (f.out.empty()) {
        std::cout << report_key_values(report);
    } else {
        outs.stage(f.out, report_key_values(report));
    }
    if (!f.csv.empty()) {
        outs.stage(f.csv, report_csv_header() + "\n" + report_csv_row(report) + "\n");
    }
    outs.commit();
    return 0;
}

int cmd_sweep(const Flags& f) {
    SweepConfig cfg;
    for (const auto& s : f.schemes) {
        cfg.schemes.push_back(parse_scheme(s));
    }
    cfg.sizes = parse_size_list(f.sizes, "--sizes");
    cfg.levels = parse_size_list(f.levels, "--levels");
    cfg.threshold = f.threshold;
    cfg.mode = parse_inference_mode(f.mode);
    cfg.seed = f.seed;
    detail::check_threshold(cfg.threshold);
    for (Scheme s : cfg.schemes) {
        if (takes_level(s) && cfg.levels.empty()) {
            throw InvalidArgument("scheme '" + std::string(to_string(s)) + "' needs --levels");
        }
    }
    const auto v = load_csv(f.val);
    const auto test = load_csv(f.test);
    std::optional<LabelHierarchy> h;
    if (!f.hierarchy.empty()) {
        h = load_hierarchy(f.hierarchy);
        check_hierarchy_labels(*h, v.label_names());
    }
    for (Scheme s : cfg.schemes) {
        if (s == Scheme::Tree && !h) {
            throw InvalidArgument("scheme 'tree' requires --hierarchy");
        }
    }
    if (cfg.mode == InferenceMode::Tree && !h) {
        throw InvalidArgument("tree inference requires --hierarchy");
    }
    const auto rows = run_sweep(v, test, h ? &*h : nullptr, cfg);
    Outputs outs;
    outs.stage(f.out, serialize_sweep(rows));
    outs.commit();
    return 0;
}

int cmd_loocv(const Flags& f) {
    SelectionOptions opt;
    opt.scheme = parse_scheme(f.scheme);
    opt.threshold = f.threshold;
    opt.mode = parse_inference_mode(f.mode);
    opt.seed = f.seed;
    if (f.kfold > 0) {
        opt.folds = f.kfold;
    }
    detail::check_threshold(opt.threshold);
    const auto v = load_csv(f.val);
    std::optional<LabelHierarchy> h;
    if (!f.hierarchy.empty()) {
        h = load_hierarchy(f.hierarchy);
        check_hierarchy_labels(*h, v.label_names());
    }
    const auto cands = f.levels.empty() ? default_level_candidates(v) : parse_size_list(f.levels, "--levels");
    const auto result = loocv_select(v, h ? &*h : nullptr, cands, opt);
    Outputs outs;
    outs.stage(f.out, serialize_level_search(result));
    outs.commit();
    std::cout << "chosen level " << result.chosen << "\n";
    return 0;
}

std::string oracle_csv(const SyntheticData& d) {
    std::string out = "split,example_index";
    for (const auto& n : d.validation.label_names()) {
        out += "," + detail::csv_field(n);
    }
    out += "\n";
    auto rows = [&](const char* split, const std::vector<std::vector<double>>& posts) {
        for (std::size_t k = 0; k < posts.size(); ++k) {
            out += std::string(split) + "," + std::to_string(k);
            for (double p : posts[k]) {
                out += "," + detail::format_double(p);
            }
            out += "\n";
        }
    };
    rows("validation", d.validation_oracle);
    rows("test", d.test_oracle);
    return out;
}

int cmd_synth(const Flags& f) {
    GeneratorConfig cfg;
    if (!f.hierarchy.empty()) {
        const auto h = load_hierarchy(f.hierarchy);
        cfg.means = hierarchy_means(h, f.dim, f.scales, f.seed);
        cfg.label_names.assign(h.terminal_names().begin(), h.terminal_names().end());
    } else {
        if (f.classes < 2) {
            throw InvalidArgument("synth needs --classes >= 2 or --hierarchy");
        }
        cfg.means = separated_means(f.classes, f.separation);
    }
    cfg.validation_per_class = f.val_per_class;
    cfg.test_per_class = f.test_per_class;
    cfg.temperature = f.temperature;
    const auto data = generate_synthetic(cfg, f.seed);
    fs::create_directories(f.out);
    const fs::path dir(f.out);
    Outputs outs;
    outs.stage((dir / "val.csv").string(), serialize_dataset(data.validation));
    outs.stage((dir / "test.csv").string(), serialize_dataset(data.test));
    outs.stage((dir / "oracle.csv").string(), oracle_csv(data));
    outs.commit();
    return 0;
}

int cmd_shuffle_tree(const Flags& f) {
    const auto h = load_hierarchy(f.hierarchy);
    Outputs outs;
    outs.stage(f.out, serialize_hierarchy(shuffle_terminals(h, f.seed)));
    outs.commit();
    return 0;
}

/// Splices `key=value` lines from --config in front of the real flags of the
/// chosen subcommand, so flags given on the command line win.
std::vector<std::string> expand_config(std::vector<std::string> args, const CLI::App& app) {
    std::optional<std::string> config;
    std::vector<std::string> rest;
    for (std::size_t k = 0; k < args.size(); ++k) {
        if (args[k] == "--config") {
            if (k + 1 >= args.size()) {
                throw InvalidArgument("--config needs a path");
            }
            config = args[++k];
        } else if (args[k].rfind("--config=", 0) == 0) {
            config = args[k].substr(9);
        } else {
            rest.push_back(args[k]);
        }
    }
    if (!config || rest.empty()) {
        return rest;
    }
    const CLI::App* sub = nullptr;
    try {
        sub = app.get_subcommand(rest.front());
    } catch (const CLI::OptionNotFound&) {
        return rest;
    }
    std::vector<std::string> injected;
    for (const auto& [key, value] : parse_key_values(read_file(*config))) {
        const std::string flag = "--" + key;
        if (sub->get_option_no_throw(flag) == nullptr) {
            continue;
        }
        const bool given = std::any_of(rest.begin() + 1, rest.end(), [&](const std::string& a) {
            return a == flag || a.rfind(flag + "=", 0) == 0;
        });
        if (given) {
            continue;
        }
        injected.push_back("--" + key + "=" + value);
    }
    rest.insert(rest.begin() + 1, injected.begin(), injected.end());
    return rest;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Post-hoc hierarchical calibration of classifier logits"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    Flags f;

    auto add_hierarchy = [&](CLI::App* s, bool required) {
        auto* o = s->add_option("--hierarchy", f.hierarchy, "Label hierarchy file");
        if (required) {
            o->required();
        }
    };
    auto add_inference = [&](CLI::App* s) {
        s->add_option("--threshold", f.threshold, "Confidence threshold T in [0, 1]")->capture_default_str();
        s->add_option("--mode", f.mode, "Inference mode: tree or set")->capture_default_str();
    };
    auto add_list = [&](CLI::App* s, const char* name, std::vector<std::string>& dest, const char* help) {
        s->add_option(name, dest, help)->delimiter(',')->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    };

    auto* fit = app.add_subcommand("fit", "Fit posterior estimators on a validation CSV");
    add_hierarchy(fit, false);
    fit->add_option("--val", f.val, "Validation logits CSV")->required();
    fit->add_option("--scheme", f.scheme, "Compression scheme")->capture_default_str();
    fit->add_option("--level", f.level, "Compression level or 'auto'");
    add_inference(fit);
    fit->add_option("--seed", f.seed, "Seed for k-fold level selection")->capture_default_str();
    fit->add_option("--kfold", f.kfold, "Approximate level selection with k folds");
    fit->add_option("--out", f.out, "Model output path")->required();

    auto* infer = app.add_subcommand("infer", "Produce hierarchical predictions");
    add_hierarchy(infer, false);
    infer->add_option("--model", f.model, "Fitted model file")->required();
    infer->add_option("--test", f.test, "Test logits CSV")->required();
    add_inference(infer);
    infer->add_option("--seed", f.seed, "Unused; accepted for uniform configs");
    infer->add_option("--out", f.out, "Predictions CSV output path")->required();

    auto* evaluate = app.add_subcommand("evaluate", "Score predictions against test labels");
    add_hierarchy(evaluate, false);
    evaluate->add_option("--predictions", f.predictions, "Predictions CSV")->required();
    evaluate->add_option("--test", f.test, "Test logits CSV with ground truth")->required();
    evaluate->add_option("--threshold", f.threshold, "Confidence threshold T")->capture_default_str();
    evaluate->add_option("--out", f.out, "key=value report path (stdout when absent)");
    evaluate->add_option("--csv", f.csv, "CSV report path");

    auto* sweep = app.add_subcommand("sweep", "Grid over validation sizes, schemes and levels");
    add_hierarchy(sweep, false);
    sweep->add_option("--val", f.val, "Validation logits CSV")->required();
    sweep->add_option("--test", f.test, "Test logits CSV")->required();
    add_list(sweep, "--schemes", f.schemes, "Comma-separated schemes");
    add_list(sweep, "--sizes", f.sizes, "Comma-separated examples per class");
    add_list(sweep, "--levels", f.levels, "Comma-separated compression levels");
    add_inference(sweep);
    sweep->add_option("--seed", f.seed, "Subsampling seed")->capture_default_str();
    sweep->add_option("--out", f.out, "Sweep CSV output path")->required();
    sweep->get_option("--schemes")->required();
    sweep->get_option("--sizes")->required();

    auto* loocv = app.add_subcommand("loocv", "Select the compression level by cross validation");
    add_hierarchy(loocv, false);
    loocv->add_option("--val", f.val, "Validation logits CSV")->required();
    loocv->add_option("--scheme", f.scheme, "Compression scheme")->capture_default_str();
    add_list(loocv, "--levels", f.levels, "Candidate levels (default 1..min(|C|, per-class count))");
    add_inference(loocv);
    loocv->add_option("--seed", f.seed, "Fold seed for --kfold")->capture_default_str();
    loocv->add_option("--kfold", f.kfold, "Use k folds instead of leave-one-out");
    loocv->add_option("--out", f.out, "Level search CSV output path")->required();

    auto* synth = app.add_subcommand("synth", "Generate Gaussian synthetic logits");
    add_hierarchy(synth, false);
    synth->add_option("--classes", f.classes, "Number of classes (without --hierarchy)");
    synth->add_option("--separation", f.separation, "Distance of class means from the origin")->capture_default_str();
    synth->add_option("--dim", f.dim, "Feature dimension with --hierarchy")->capture_default_str();
    synth->add_option("--scales", f.scales, "Offset scale per depth with --hierarchy")
        ->delimiter(',')
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    synth->add_option("--val-per-class", f.val_per_class, "Validation examples per class")->capture_default_str();
    synth->add_option("--test-per-class", f.test_per_class, "Test examples per class")->capture_default_str();
    synth->add_option("--temperature", f.temperature, "Logit distortion factor")->capture_default_str();
    synth->add_option("--seed", f.seed, "Generator seed")->capture_default_str();
    synth->add_option("--out", f.out, "Output directory")->required();

    auto* shuffle = app.add_subcommand("shuffle-tree", "Randomly reassign terminal labels of a hierarchy");
    add_hierarchy(shuffle, true);
    shuffle->add_option("--seed", f.seed, "Shuffle seed")->capture_default_str();
    shuffle->add_option("--out", f.out, "Output hierarchy path")->required();

    app.set_version_flag("--version", "hierlogit 0.1.0");
    app.footer("Config: --config FILE with key=value lines; command-line flags override.\n"
               "Threads: HIERLOGIT_THREADS (default 1).");

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = expand_config(std::move(args), app);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (fit->parsed()) return cmd_fit(f);
        if (infer->parsed()) return cmd_infer(f);
        if (evaluate->parsed()) return cmd_evaluate(f);
        if (sweep->parsed()) return cmd_sweep(f);
        if (loocv->parsed()) return cmd_loocv(f);
        if (synth->parsed()) return cmd_synth(f);
        if (shuffle->parsed()) return cmd_shuffle_tree(f);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
