#include "nsotree/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "nsotree/coxloss.hpp"
#include "nsotree/math.hpp"
#include "nsotree/metrics.hpp"
#include "nsotree/tree.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace nsotree::runner {

const char* kToolVersion = "0.1.0";

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << content;
    if (!f) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path prepare_out_dir(const std::string& out_dir) {
    if (out_dir.empty()) throw std::invalid_argument("output directory is required");
    fs::path p(out_dir);
    fs::create_directories(p);
    return p;
}

Schema schema_for(const std::string& schema_file, const std::string& csv_path) {
    if (!schema_file.empty()) return parse_schema_file(schema_file);
    std::ifstream f(csv_path);
    if (!f) throw std::runtime_error("cannot open: " + csv_path);
    std::string header;
    if (!std::getline(f, header)) throw std::runtime_error(csv_path + ": empty file");
    if (!header.empty() && header.back() == '\r') header.pop_back();
    std::vector<std::string> names;
    std::size_t start = 0;
    while (true) {
        const auto pos = header.find(',', start);
        if (pos == std::string::npos) {
            names.push_back(header.substr(start));
            break;
        }
        names.push_back(header.substr(start, pos - start));
        start = pos + 1;
    }
    return default_schema(names);
}

void write_manifest(const fs::path& out_dir, const std::string& command, const json& config,
                    const std::vector<std::string>& input_paths,
                    const std::vector<std::string>& output_names, std::uint64_t seed) {
    json m;
    m["tool"] = "nsotree";
    m["version"] = kToolVersion;
    m["command"] = command;
    m["seed"] = seed;
    m["config"] = config;
    json inputs = json::object();
    for (const auto& p : input_paths) inputs[p] = file_hash_hex(p);
    m["inputs"] = inputs;
    m["outputs"] = output_names;
    write_text_file((out_dir / "manifest.json").string(), m.dump(2) + "\n");
}

json train_config_json(const TrainConfig& c) {
    json j;
    j["model"] = to_string(c.model);
    j["depth"] = c.depth;
    j["d_h"] = c.d_h;
    j["learning_rate"] = c.learning_rate;
    j["batch_size"] = c.batch_size;
    j["lambda"] = c.lambda;
    j["max_epochs"] = c.max_epochs;
    j["patience"] = c.patience;
    j["activation"] = to_string(c.train_activation);
    j["optimizer"] = c.optimizer == OptimizerKind::Adam ? "adam" : "sgd";
    return j;
}

}  // namespace

std::string file_hash_hex(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot hash missing file: " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (f) {
        f.read(buf, sizeof buf);
        const std::streamsize got = f.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    char out[20];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

std::string run_simulate(const SimulateOptions& opt) {
    SimConfig cfg;
    cfg.risk = opt.risk;
    cfg.n_train = opt.n_train;
    cfg.n_valid = std::max(1, opt.n_train / 4);
    cfg.n_test = std::max(1, opt.n_train / 4);
    cfg.d = opt.d;
    cfg.censor_frac = opt.censor_frac;
    cfg.lambda_max = opt.lambda_max;
    cfg.r = opt.r;
    cfg.seed = opt.seed;

    const SimResult sim = simulate(cfg);
    const fs::path out = prepare_out_dir(opt.out_dir);

    save_csv(sim.train.data, (out / "train.csv").string());
    save_csv(sim.valid.data, (out / "valid.csv").string());
    save_csv(sim.test.data, (out / "test.csv").string());

    json meta;
    meta["risk"] = to_string(cfg.risk);
    meta["d"] = cfg.d;
    meta["n_train"] = cfg.n_train;
    meta["n_valid"] = cfg.n_valid;
    meta["n_test"] = cfg.n_test;
    meta["lambda_max"] = cfg.lambda_max;
    meta["r"] = cfg.r;
    meta["baseline_rate"] = cfg.baseline_rate;
    meta["censor_frac"] = cfg.censor_frac;
    meta["censoring_rate"] = sim.censoring_rate;
    meta["empirical_censoring"] = sim.empirical_censoring;
    meta["seed"] = cfg.seed;
    meta["true_risk"] = {{"train", sim.train.true_risks},
                         {"valid", sim.valid.true_risks},
                         {"test", sim.test.true_risks}};
    write_text_file((out / "sim_meta.json").string(), meta.dump(2) + "\n");

    json cfg_json;
    cfg_json["risk"] = to_string(cfg.risk);
    cfg_json["n_train"] = cfg.n_train;
    cfg_json["d"] = cfg.d;
    cfg_json["censor_frac"] = cfg.censor_frac;
    cfg_json["lambda_max"] = cfg.lambda_max;
    cfg_json["r"] = cfg.r;
    write_manifest(out, "simulate", cfg_json, {},
                   {"train.csv", "valid.csv", "test.csv", "sim_meta.json"}, cfg.seed);
    return (out / "manifest.json").string();
}

namespace {

struct LoadedPair {
    SurvivalDataset train;
    SurvivalDataset valid;
    std::optional<Standardization> stats;
};

LoadedPair load_train_valid(const TrainOptions& opt) {
    const Schema schema = schema_for(opt.schema_file, opt.train_csv);
    LoadedPair out;
    auto train_load = load_csv(opt.train_csv, schema);
    out.train = std::move(train_load.data);
    auto valid_load = load_csv(opt.valid_csv, schema, train_load.encodings);
    out.valid = std::move(valid_load.data);
    if (opt.standardize) out.stats = standardize(out.train, {&out.valid});
    return out;
}

}  // namespace

std::string run_train(const TrainOptions& opt) {
    if (opt.train_csv.empty() || opt.valid_csv.empty())
        throw std::invalid_argument("train: --train and --valid are required");
    LoadedPair data = load_train_valid(opt);

    const TrainReport report = train(data.train, data.valid, opt.config);

    Checkpoint ckpt;
    ckpt.model_kind = to_string(opt.config.model);
    ckpt.activation = opt.config.train_activation;
    ckpt.params = report.params;
    ckpt.train_data_path = opt.train_csv;
    ckpt.feature_names = data.train.feature_names;
    ckpt.standardization = data.stats;

    const fs::path out = prepare_out_dir(opt.out_dir);
    save_checkpoint(ckpt, (out / "checkpoint.txt").string());
    save_report(report, (out / "report.csv").string());

    json cfg = train_config_json(opt.config);
    cfg["standardize"] = opt.standardize;
    cfg["train"] = opt.train_csv;
    cfg["valid"] = opt.valid_csv;
    if (!opt.schema_file.empty()) cfg["schema"] = opt.schema_file;
    std::vector<std::string> inputs{opt.train_csv, opt.valid_csv};
    if (!opt.schema_file.empty()) inputs.push_back(opt.schema_file);
    write_manifest(out, "train", cfg, inputs, {"checkpoint.txt", "report.csv"}, opt.config.seed);
    return (out / "manifest.json").string();
}

namespace {

// Loads a CSV for evaluation against a checkpoint: columns are aligned to
// the checkpoint's feature list and its standardization is applied.
SurvivalDataset load_for_checkpoint(const std::string& csv_path, const std::string& schema_file,
                                    const Checkpoint& ckpt) {
    const Schema schema = schema_for(schema_file, csv_path);
    auto loaded = load_csv(csv_path, schema);
    SurvivalDataset ds = std::move(loaded.data);
    if (!ckpt.feature_names.empty() && ds.feature_names != ckpt.feature_names)
        ds = select_features(ds, ckpt.feature_names);
    if (ds.d != ckpt.params.d)
        throw std::runtime_error(csv_path + ": covariate dimension " + std::to_string(ds.d) +
                                 " does not match checkpoint d=" + std::to_string(ckpt.params.d));
    if (ckpt.standardization) apply_standardization(ds, *ckpt.standardization);
    return ds;
}

}  // namespace

std::string run_eval(const EvalOptions& opt) {
    if (opt.checkpoint.empty() || opt.test_csv.empty())
        throw std::invalid_argument("eval: --checkpoint and --test are required");
    const Checkpoint ckpt = load_checkpoint(opt.checkpoint);

    const std::string train_path = opt.train_csv.empty() ? ckpt.train_data_path : opt.train_csv;
    if (train_path.empty())
        throw std::runtime_error(
            "eval: checkpoint does not record its training data; pass --train to locate the "
            "baseline-hazard reference");

    SurvivalDataset test_ds = load_for_checkpoint(opt.test_csv, opt.schema_file, ckpt);
    SurvivalDataset train_ds = load_for_checkpoint(train_path, opt.schema_file, ckpt);

    // ReLU-mode inference: exact tree semantics.
    const auto train_scores = score_dataset(ckpt.params, train_ds, Activation::ReLU);
    const auto test_scores = score_dataset(ckpt.params, test_ds, Activation::ReLU);

    const StepFunction baseline = breslow_baseline(train_ds, train_scores);
    std::vector<StepFunction> curves;
    curves.reserve(test_ds.size());
    for (double s : test_scores) curves.push_back(survival_curve(baseline, s));

    const double cindex = concordance_index(test_scores, test_ds.time, test_ds.event);
    std::optional<MetricResult> cindex_ci;
    if (opt.bootstrap > 0) {
        auto metric = [&](const std::vector<int>& idx) {
            std::vector<double> s, t;
            std::vector<std::uint8_t> e;
            s.reserve(idx.size());
            for (int i : idx) {
                s.push_back(test_scores[static_cast<std::size_t>(i)]);
                t.push_back(test_ds.time[static_cast<std::size_t>(i)]);
                e.push_back(test_ds.event[static_cast<std::size_t>(i)]);
            }
            return concordance_index(s, t, e);
        };
        cindex_ci = bootstrap_ci(metric, test_ds.size(), opt.bootstrap, opt.bootstrap_seed);
    }

    const auto grid = default_ibs_grid(test_ds);
    const StepFunction censor_km = kaplan_meier(test_ds, KmTarget::Censorings);
    std::vector<double> brier(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        brier[i] = brier_score(curves, test_ds, grid[i], censor_km, nullptr);
    const double ibs = integrated_brier(curves, test_ds, grid);

    std::optional<double> pearson;
    if (!opt.truth_sidecar.empty()) {
        const json meta = json::parse(read_text_file(opt.truth_sidecar));
        if (!meta.contains("true_risk") || !meta["true_risk"].contains(opt.truth_split))
            throw std::runtime_error(opt.truth_sidecar + ": no true_risk entry for split '" +
                                     opt.truth_split + "'");
        const auto truth = meta["true_risk"][opt.truth_split].get<std::vector<double>>();
        if (truth.size() != test_scores.size())
            throw std::runtime_error("eval: truth split size " + std::to_string(truth.size()) +
                                     " does not match test set size " +
                                     std::to_string(test_scores.size()));
        pearson = pearson_correlation(test_scores, truth);
    }

    const fs::path out = prepare_out_dir(opt.out_dir);
    {
        std::ostringstream os;
        os << "metric,value,lower,upper\n";
        os << "cindex," << fmt17(cindex) << ",";
        if (cindex_ci && cindex_ci->interval)
            os << fmt17(cindex_ci->interval->first) << "," << fmt17(cindex_ci->interval->second);
        else
            os << ",";
        os << "\n";
        os << "ibs," << fmt17(ibs) << ",,\n";
        if (pearson) os << "pearson_r," << fmt17(*pearson) << ",,\n";
        write_text_file((out / "metrics.csv").string(), os.str());
    }
    {
        std::ostringstream os;
        os << "time,brier\n";
        for (std::size_t i = 0; i < grid.size(); ++i)
            os << fmt17(grid[i]) << "," << fmt17(brier[i]) << "\n";
        write_text_file((out / "brier_curve.csv").string(), os.str());
    }

    json cfg;
    cfg["checkpoint"] = opt.checkpoint;
    cfg["test"] = opt.test_csv;
    cfg["train"] = train_path;
    cfg["bootstrap"] = opt.bootstrap;
    if (!opt.truth_sidecar.empty()) {
        cfg["truth"] = opt.truth_sidecar;
        cfg["truth_split"] = opt.truth_split;
    }
    std::vector<std::string> inputs{opt.checkpoint, opt.test_csv, train_path};
    if (!opt.truth_sidecar.empty()) inputs.push_back(opt.truth_sidecar);
    write_manifest(out, "eval", cfg, inputs, {"metrics.csv", "brier_curve.csv"},
                   opt.bootstrap_seed);
    return (out / "manifest.json").string();
}

std::string run_extract(const ExtractOptions& opt) {
    if (opt.checkpoint.empty()) throw std::invalid_argument("extract: --checkpoint is required");
    const Checkpoint ckpt = load_checkpoint(opt.checkpoint);
    ObliqueTree tree = extract_tree(ckpt.params);
    tree.feature_names = ckpt.feature_names;

    bool annotated = false;
    if (!opt.data_csv.empty()) {
        const SurvivalDataset ds = load_for_checkpoint(opt.data_csv, opt.schema_file, ckpt);
        tree = annotate_splits(tree, ds);
        annotated = true;
    }

    const TreeFormat format = tree_format_from_string(opt.format);
    const fs::path out = prepare_out_dir(opt.out_dir);
    std::vector<std::string> outputs;
    if (format == TreeFormat::GraphDescription) {
        write_text_file((out / "tree.dot").string(),
                        export_tree(tree, format, opt.layers, opt.expand));
        outputs.push_back("tree.dot");
    } else {
        write_text_file((out / "tree.txt").string(), export_tree(tree, format));
        outputs.push_back("tree.txt");
    }
    if (annotated) {
        const int levels = (opt.layers < 0 || opt.layers > tree.depth ? tree.depth : opt.layers) *
                           tree.d_h;
        std::ostringstream os;
        os << "layer,unit,statistic,p_value,n_on,n_off,degenerate\n";
        for (int k = 0; k < levels; ++k) {
            const auto& s = tree.splits[static_cast<std::size_t>(k)];
            const auto& a = *s.annotation;
            os << (s.layer + 1) << "," << (s.unit + 1) << ",";
            if (a.degenerate) os << ",";
            else os << fmt17(a.statistic) << "," << fmt17(a.p_value);
            os << "," << a.n_on << "," << a.n_off << "," << (a.degenerate ? 1 : 0) << "\n";
        }
        write_text_file((out / "splits.csv").string(), os.str());
        outputs.push_back("splits.csv");
    }

    json cfg;
    cfg["checkpoint"] = opt.checkpoint;
    if (!opt.data_csv.empty()) cfg["data"] = opt.data_csv;
    cfg["layers"] = opt.layers;
    cfg["format"] = opt.format;
    cfg["expand"] = opt.expand;
    std::vector<std::string> inputs{opt.checkpoint};
    if (!opt.data_csv.empty()) inputs.push_back(opt.data_csv);
    write_manifest(out, "extract", cfg, inputs, outputs, 0);
    return (out / "manifest.json").string();
}

std::string run_sweep(const SweepOptions& opt) {
    if (opt.train_csv.empty() || opt.valid_csv.empty() || opt.test_csv.empty())
        throw std::invalid_argument("sweep: --train, --valid and --test are required");
    if (opt.values.empty()) throw std::invalid_argument("sweep: --values is required");

    const Schema schema = schema_for(opt.schema_file, opt.train_csv);
    auto train_load = load_csv(opt.train_csv, schema);
    auto valid_load = load_csv(opt.valid_csv, schema, train_load.encodings);
    auto test_load = load_csv(opt.test_csv, schema, train_load.encodings);
    SurvivalDataset train_ds = std::move(train_load.data);
    SurvivalDataset valid_ds = std::move(valid_load.data);
    SurvivalDataset test_ds = std::move(test_load.data);
    if (opt.standardize) standardize(train_ds, {&valid_ds, &test_ds});

    const fs::path out = prepare_out_dir(opt.out_dir);
    std::ostringstream os;
    if (opt.kind == "depth") {
        std::vector<int> depths;
        for (double v : opt.values) depths.push_back(static_cast<int>(std::llround(v)));
        const auto rows = depth_sweep(train_ds, valid_ds, test_ds, depths, opt.config);
        os << "depth,test_cindex\n";
        for (const auto& r : rows) os << r.depth << "," << fmt17(r.test_cindex) << "\n";
    } else if (opt.kind == "lambda") {
        const auto rows = lambda_sweep(train_ds, valid_ds, test_ds, opt.values, opt.config);
        os << "lambda,sparsity,test_cindex\n";
        for (const auto& r : rows)
            os << fmt17(r.lambda) << "," << fmt17(r.sparsity) << "," << fmt17(r.test_cindex) << "\n";
    } else {
        throw std::invalid_argument("sweep: unknown kind '" + opt.kind + "'");
    }
    write_text_file((out / "sweep.csv").string(), os.str());

    json cfg = train_config_json(opt.config);
    cfg["kind"] = opt.kind;
    cfg["values"] = opt.values;
    cfg["standardize"] = opt.standardize;
    write_manifest(out, "sweep", cfg, {opt.train_csv, opt.valid_csv, opt.test_csv}, {"sweep.csv"},
                   opt.config.seed);
    return (out / "manifest.json").string();
}

std::string run_crossval(const CrossvalOptions& opt) {
    if (opt.data_csv.empty()) throw std::invalid_argument("crossval: --data is required");
    const Schema schema = schema_for(opt.schema_file, opt.data_csv);
    auto loaded = load_csv(opt.data_csv, schema);

    const CrossValResult cv = cross_validate(loaded.data, opt.folds, opt.config);

    const fs::path out = prepare_out_dir(opt.out_dir);
    std::ostringstream os;
    os << "fold,cindex\n";
    for (std::size_t f = 0; f < cv.fold_cindex.size(); ++f)
        os << (f + 1) << "," << fmt17(cv.fold_cindex[f]) << "\n";
    os << "mean," << fmt17(cv.mean) << "\n";
    os << "std," << fmt17(cv.stddev) << "\n";
    write_text_file((out / "crossval.csv").string(), os.str());

    json cfg = train_config_json(opt.config);
    cfg["folds"] = opt.folds;
    cfg["data"] = opt.data_csv;
    write_manifest(out, "crossval", cfg, {opt.data_csv}, {"crossval.csv"}, opt.config.seed);
    return (out / "manifest.json").string();
}

}  // namespace nsotree::runner
