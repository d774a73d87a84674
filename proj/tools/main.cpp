// nsotree command-line front end. Exit codes: 0 success, 1 runtime
// failure, 2 usage error.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nsotree/runner.hpp"

namespace {

using namespace nsotree;

std::string resolve_out_dir(std::string out, const std::string& command) {
    if (!out.empty()) return out;
    if (const char* env = std::getenv("NSOTREE_OUT"))
        return std::string(env) + "/" + command;
    throw CLI::ValidationError("--out", "output directory required (flag or NSOTREE_OUT)");
}

void add_train_config_flags(CLI::App* sub, TrainConfig& cfg, std::string& model,
                            std::string& optimizer) {
    sub->add_option("--model", model, "risk model: nsotree or linear")
        ->check(CLI::IsMember({"nsotree", "linear"}));
    sub->add_option("--depth", cfg.depth, "tree depth L (layers)");
    sub->add_option("--dh", cfg.d_h, "hidden units per layer");
    sub->add_option("--lr", cfg.learning_rate, "learning rate");
    sub->add_option("--batch", cfg.batch_size, "mini-batch size");
    sub->add_option("--lambda", cfg.lambda, "soft-threshold strength per step");
    sub->add_option("--epochs", cfg.max_epochs, "maximum training epochs");
    sub->add_option("--patience", cfg.patience, "early-stopping patience (epochs)");
    sub->add_option("--seed", cfg.seed, "random seed");
    sub->add_option("--optimizer", optimizer, "sgd or adam")
        ->check(CLI::IsMember({"sgd", "adam"}));
    sub->add_flag("--verbose", cfg.verbose, "log per-epoch progress to stderr");
}

void finish_train_config(TrainConfig& cfg, const std::string& model, const std::string& optimizer) {
    cfg.model = model_kind_from_string(model);
    cfg.optimizer = optimizer == "adam" ? OptimizerKind::Adam : OptimizerKind::SGD;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural survival oblique tree: Cox risk models trained as oblique trees"};
    app.require_subcommand(1);
    app.set_config("--config");

    int rc = 0;
    auto guard = [&rc](auto&& fn) {
        try {
            fn();
        } catch (const CLI::ParseError&) {
            throw;  // usage errors surface through app.parse()
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            rc = 1;
        }
    };

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate a synthetic survival benchmark");
    runner::SimulateOptions sim_opt;
    std::string sim_risk = "linear";
    sim->add_option("--risk", sim_risk, "risk surface: linear or gaussian")
        ->check(CLI::IsMember({"linear", "gaussian"}));
    sim->add_option("--n", sim_opt.n_train, "training rows (valid/test are n/4 each)");
    sim->add_option("--d", sim_opt.d, "covariate dimension");
    sim->add_option("--censor-frac", sim_opt.censor_frac, "target censoring fraction");
    sim->add_option("--lambda-max", sim_opt.lambda_max, "gaussian risk peak rate");
    sim->add_option("--r", sim_opt.r, "gaussian risk length scale");
    sim->add_option("--seed", sim_opt.seed, "random seed");
    sim->add_option("--out", sim_opt.out_dir, "output directory");
    sim->callback([&] {
        guard([&] {
            sim_opt.risk = risk_kind_from_string(sim_risk);
            sim_opt.out_dir = resolve_out_dir(sim_opt.out_dir, "simulate");
            runner::run_simulate(sim_opt);
        });
    });

    // train
    auto* tr = app.add_subcommand("train", "fit a model and write a checkpoint");
    runner::TrainOptions tr_opt;
    std::string tr_model = "nsotree", tr_optimizer = "sgd";
    bool tr_no_std = false;
    tr->add_option("--train", tr_opt.train_csv, "training CSV")->required();
    tr->add_option("--valid", tr_opt.valid_csv, "validation CSV")->required();
    tr->add_option("--schema", tr_opt.schema_file, "column-role schema file");
    tr->add_flag("--no-standardize", tr_no_std, "skip covariate standardization");
    add_train_config_flags(tr, tr_opt.config, tr_model, tr_optimizer);
    tr->add_option("--out", tr_opt.out_dir, "output directory");
    tr->callback([&] {
        guard([&] {
            finish_train_config(tr_opt.config, tr_model, tr_optimizer);
            tr_opt.standardize = !tr_no_std;
            tr_opt.out_dir = resolve_out_dir(tr_opt.out_dir, "train");
            runner::run_train(tr_opt);
        });
    });

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a test set");
    runner::EvalOptions ev_opt;
    ev->add_option("--checkpoint", ev_opt.checkpoint, "checkpoint file")->required();
    ev->add_option("--test", ev_opt.test_csv, "test CSV")->required();
    ev->add_option("--train", ev_opt.train_csv, "baseline-hazard training CSV override");
    ev->add_option("--schema", ev_opt.schema_file, "column-role schema file");
    ev->add_option("--bootstrap", ev_opt.bootstrap, "bootstrap resamples for the C-index CI");
    ev->add_option("--bootstrap-seed", ev_opt.bootstrap_seed, "bootstrap seed");
    ev->add_option("--truth", ev_opt.truth_sidecar, "simulation metadata with true risks");
    ev->add_option("--truth-split", ev_opt.truth_split, "which true_risk split to compare");
    ev->add_option("--out", ev_opt.out_dir, "output directory");
    ev->callback([&] {
        guard([&] {
            ev_opt.out_dir = resolve_out_dir(ev_opt.out_dir, "eval");
            runner::run_eval(ev_opt);
        });
    });

    // extract
    auto* ex = app.add_subcommand("extract", "export the oblique tree of a checkpoint");
    runner::ExtractOptions ex_opt;
    ex->add_option("--checkpoint", ex_opt.checkpoint, "checkpoint file")->required();
    ex->add_option("--data", ex_opt.data_csv, "dataset for per-split log-rank annotation");
    ex->add_option("--schema", ex_opt.schema_file, "column-role schema file");
    ex->add_option("--layers", ex_opt.layers, "layers to render (graph/table); -1 = all");
    ex->add_option("--format", ex_opt.format, "graph or text")
        ->check(CLI::IsMember({"graph", "text", "graph-description", "structured-text", "dot"}));
    ex->add_flag("--expand", ex_opt.expand, "render the full binary tree (<= 12 levels)");
    ex->add_option("--out", ex_opt.out_dir, "output directory");
    ex->callback([&] {
        guard([&] {
            ex_opt.out_dir = resolve_out_dir(ex_opt.out_dir, "extract");
            runner::run_extract(ex_opt);
        });
    });

    // sweep
    auto* sw = app.add_subcommand("sweep", "depth or lambda ablation over a fixed split");
    runner::SweepOptions sw_opt;
    std::string sw_model = "nsotree", sw_optimizer = "sgd", sw_range;
    bool sw_no_std = false;
    sw->add_option("--kind", sw_opt.kind, "depth or lambda")
        ->check(CLI::IsMember({"depth", "lambda"}));
    sw->add_option("--train", sw_opt.train_csv, "training CSV")->required();
    sw->add_option("--valid", sw_opt.valid_csv, "validation CSV")->required();
    sw->add_option("--test", sw_opt.test_csv, "test CSV")->required();
    sw->add_option("--schema", sw_opt.schema_file, "column-role schema file");
    sw->add_option("--values", sw_opt.values, "sweep values")->delimiter(',');
    sw->add_option("--range", sw_range, "sweep range lo:hi:step (alternative to --values)");
    sw->add_flag("--no-standardize", sw_no_std, "skip covariate standardization");
    add_train_config_flags(sw, sw_opt.config, sw_model, sw_optimizer);
    sw->add_option("--out", sw_opt.out_dir, "output directory");
    sw->callback([&] {
        guard([&] {
            finish_train_config(sw_opt.config, sw_model, sw_optimizer);
            sw_opt.standardize = !sw_no_std;
            if (!sw_range.empty()) {
                double lo = 0, hi = 0, step = 0;
                if (std::sscanf(sw_range.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 || step <= 0)
                    throw std::invalid_argument("--range expects lo:hi:step with step > 0");
                for (double v = lo; v <= hi + 1e-12; v += step) sw_opt.values.push_back(v);
            }
            sw_opt.out_dir = resolve_out_dir(sw_opt.out_dir, "sweep");
            runner::run_sweep(sw_opt);
        });
    });

    // crossval
    auto* cv = app.add_subcommand("crossval", "k-fold cross-validation on one CSV");
    runner::CrossvalOptions cv_opt;
    std::string cv_model = "nsotree", cv_optimizer = "sgd";
    cv->add_option("--data", cv_opt.data_csv, "dataset CSV")->required();
    cv->add_option("--schema", cv_opt.schema_file, "column-role schema file");
    cv->add_option("--k", cv_opt.folds, "number of folds");
    add_train_config_flags(cv, cv_opt.config, cv_model, cv_optimizer);
    cv->add_option("--out", cv_opt.out_dir, "output directory");
    cv->callback([&] {
        guard([&] {
            finish_train_config(cv_opt.config, cv_model, cv_optimizer);
            cv_opt.out_dir = resolve_out_dir(cv_opt.out_dir, "crossval");
            runner::run_crossval(cv_opt);
        });
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        std::cerr << "run with --help for usage\n";
        return 2;
    }
    return rc;
}
