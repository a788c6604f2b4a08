#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "scovreg/error.hpp"
#include "scovreg_cli/commands.hpp"

namespace scovreg::cli {
namespace {

void error_line(int code, const std::string& kind, const std::string& message) {
    nlohmann::ordered_json j;
    j["status"] = "error";
    j["exit_code"] = code;
    j["kind"] = kind;
    j["message"] = message;
    std::cerr << j.dump() << '\n';
}

void add_data_options(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--y", cfg.y_csv, "Response CSV (n x p, header row)")->required()->check(CLI::ExistingFile);
    sub->add_option("--x", cfg.x_csv, "Covariate CSV (n x q, header row); omit for no covariates")->check(CLI::ExistingFile);
    sub->add_option("--mean", cfg.mean, "Mean model for the responses")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, MeanMode>{{"colmean", MeanMode::ColumnMean}, {"linreg", MeanMode::LinearRegression}},
            CLI::ignore_case));
}

void add_common(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--out", cfg.out_dir, "Output directory");
    sub->add_option("--threads", cfg.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", cfg.seed, "Seed for every random choice");
}

void add_grid(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--alphas", cfg.alphas, "Mixing weights, comma separated")->delimiter(',');
    sub->add_option("--nlam", cfg.nlam, "Number of log-spaced lambda* values in [0.01, 1]");
    sub->add_option("--folds", cfg.folds, "Cross-validation folds");
}

} // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Sparse covariance regression"};
    app.set_config("--config", "", "Read options from a TOML/INI file");
    app.require_subcommand(1);
    RunConfig cfg;

    auto* fit = app.add_subcommand("fit", "Fit at fixed (lambda, lambda_g)");
    add_data_options(fit, cfg);
    add_common(fit, cfg);
    fit->add_option("--lambda", cfg.lambda, "Entrywise penalty")->check(CLI::NonNegativeNumber);
    fit->add_option("--lambda-g", cfg.lambda_g, "Group penalty")->check(CLI::NonNegativeNumber);
    fit->add_flag("--subjects", cfg.subjects, "Also write per-subject covariance matrices");

    auto* cv = app.add_subcommand("cv", "Select (lambda, lambda_g) by cross-validation and refit");
    add_data_options(cv, cfg);
    add_common(cv, cfg);
    add_grid(cv, cfg);

    auto* inf = app.add_subcommand("infer", "Debiased confidence intervals and edge detection");
    add_data_options(inf, cfg);
    add_common(inf, cfg);
    inf->add_option("--coef", cfg.coef_csv, "coefficients.csv from fit or cv")->required()->check(CLI::ExistingFile);
    inf->add_option("--alpha", cfg.alpha, "Significance level");
    inf->add_option("--correction", cfg.correction, "Multiplicity correction")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, Correction>{{"none", Correction::None}, {"bonferroni", Correction::BonferroniEdges}},
            CLI::ignore_case));

    auto* sim = app.add_subcommand("simulate", "Simulation study tables and scatter data");
    add_common(sim, cfg);
    add_grid(sim, cfg);
    sim->add_option("--structure", cfg.structure, "ma1, clique or hub");
    sim->add_option("--setting", cfg.setting, "continuous or binary");
    sim->add_option("--n", cfg.n, "Sample size");
    sim->add_option("--p", cfg.p, "Responses");
    sim->add_option("--q", cfg.q, "Covariates");
    sim->add_option("--reps", cfg.reps, "Replicates");
    sim->add_option("--methods", cfg.methods, "SparseCovReg,DenseSample,SparseSample,DenseCovReg")->delimiter(',');
    sim->add_option("--alpha", cfg.alpha, "Confidence level for coverage");
    bool no_inference = false;
    sim->add_flag("--no-inference", no_inference, "Skip confidence intervals");

    auto* stab = app.add_subcommand("stability", "Selection stability over random half splits");
    add_data_options(stab, cfg);
    add_common(stab, cfg);
    add_grid(stab, cfg);
    stab->add_option("--splits", cfg.splits, "Number of random splits");
    stab->add_option("--threshold", cfg.threshold, "Co-selection fraction reported as stable");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        error_line(2, "usage", e.what());
        return 2;
    }
    cfg.inference = !no_inference;

    try {
        if (fit->parsed()) {
            cfg.command = "fit";
            cmd_fit(cfg);
        } else if (cv->parsed()) {
            cfg.command = "cv";
            cmd_cv(cfg);
        } else if (inf->parsed()) {
            cfg.command = "infer";
            cmd_infer(cfg);
        } else if (sim->parsed()) {
            cfg.command = "simulate";
            cmd_simulate(cfg);
        } else if (stab->parsed()) {
            cfg.command = "stability";
            cmd_stability(cfg);
        }
    } catch (const InputError& e) {
        error_line(2, "input", e.what());
        return 2;
    } catch (const NumericalError& e) {
        error_line(3, "numerical", e.what());
        return 3;
    } catch (const std::exception& e) {
        error_line(3, "internal", e.what());
        return 3;
    }
    return 0;
}

} // namespace scovreg::cli
