#include "scovreg_cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "scovreg/error.hpp"
#include "scovreg/estimator.hpp"
#include "scovreg/normal.hpp"
#include "scovreg/parallel.hpp"
#include "scovreg/simulate.hpp"
#include "scovreg_cli/csv.hpp"

#ifndef SCOVREG_VERSION
#define SCOVREG_VERSION "unknown"
#endif

namespace scovreg::cli {
namespace {

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

constexpr const char* kInterceptName = "(intercept)";

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::filesystem::path prepare_out(const RunConfig& cfg) {
    std::filesystem::path dir(cfg.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw InputError(cfg.out_dir + ": cannot create output directory (" + ec.message() + ")");
    }
    return dir;
}

void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) {
        throw InputError(path.string() + ": cannot open for writing");
    }
    out << j.dump(2) << '\n';
}

std::string to_string(Correction c) { return c == Correction::None ? "none" : "bonferroni"; }

std::string to_string(MeanMode m) { return m == MeanMode::ColumnMean ? "colmean" : "linreg"; }

json config_json(const RunConfig& cfg) {
    json j;
    j["y"] = cfg.y_csv;
    j["x"] = cfg.x_csv;
    if (!cfg.coef_csv.empty()) {
        j["coef"] = cfg.coef_csv;
    }
    j["out"] = cfg.out_dir;
    j["lambda"] = cfg.lambda;
    j["lambda_g"] = cfg.lambda_g;
    j["alphas"] = cfg.alphas;
    if (cfg.nlam) {
        j["nlam"] = *cfg.nlam;
    }
    j["folds"] = cfg.folds;
    j["alpha"] = cfg.alpha;
    j["correction"] = to_string(cfg.correction);
    j["mean"] = to_string(cfg.mean);
    j["threads"] = cfg.threads;
    if (cfg.command == "simulate") {
        j["structure"] = cfg.structure;
        j["setting"] = cfg.setting;
        j["n"] = cfg.n;
        j["p"] = cfg.p;
        j["q"] = cfg.q;
        j["reps"] = cfg.reps;
        j["methods"] = cfg.methods;
        j["inference"] = cfg.inference;
    }
    if (cfg.command == "stability") {
        j["splits"] = cfg.splits;
        j["threshold"] = cfg.threshold;
    }
    return j;
}

void write_manifest(const std::filesystem::path& dir, const RunConfig& cfg, std::uint64_t seed, const json& timings,
                    const std::vector<std::string>& outputs) {
    json m;
    m["command"] = cfg.command;
    m["config"] = config_json(cfg);
    m["seed"] = seed;
    m["versions"] = {
        {"scovreg", SCOVREG_VERSION},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"compiler", __VERSION__},
    };
    m["timings"] = timings;
    m["outputs"] = outputs;
    write_json(dir / "manifest.json", m);
}

std::vector<std::string> layer_names(const std::vector<std::string>& x_names) {
    std::vector<std::string> out{kInterceptName};
    out.insert(out.end(), x_names.begin(), x_names.end());
    return out;
}

std::vector<std::string> effective_covariates(const CoefficientStack& stack, const std::vector<std::string>& x_names) {
    std::vector<std::string> out;
    for (std::size_t l = 1; l < stack.layers(); ++l) {
        if (!stack.layer_is_zero(l)) {
            out.push_back(x_names[l - 1]);
        }
    }
    return out;
}

json fit_summary(const FitResult& fr, const CoefficientStack& original, const std::vector<std::string>& x_names,
                 const Dataset& data) {
    json s;
    s["n"] = data.y.rows();
    s["p"] = data.y.cols();
    s["q"] = data.x.cols();
    s["objective_trace"] = fr.objective_trace;
    s["iterations"] = fr.iters;
    s["converged"] = fr.converged;
    s["delta"] = fr.delta;
    json nz = json::array();
    for (std::size_t l = 0; l < original.layers(); ++l) {
        nz.push_back((original.layer(l).array() != 0.0).count());
    }
    s["nonzeros_per_layer"] = nz;
    const auto eff = effective_covariates(original, x_names);
    s["effective_covariates"] = eff.size();
    s["effective_covariate_names"] = eff;
    return s;
}

void write_subject_sigmas(const std::filesystem::path& path, const CoefficientStack& original, const Dataset& data) {
    CsvWriter w(path.string());
    w.cell("subject").cell("j_name").cell("k_name").cell("value").end_row();
    const std::size_t p = original.p();
    for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
        const Matrix s = evaluate_sigma(original, data.x.row(i).transpose());
        for (std::size_t j = 0; j < p; ++j) {
            for (std::size_t k = j; k < p; ++k) {
                w.cell(static_cast<std::size_t>(i + 1)).cell(data.y_names[j]).cell(data.y_names[k]);
                w.cell(s(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k))).end_row();
            }
        }
    }
    w.close();
}

std::vector<double> log_spaced(std::size_t count, double lo, double hi) {
    if (count == 1) {
        return {hi};
    }
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(count - 1);
        out[i] = std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
    }
    return out;
}

std::uint64_t seed_or_default(const RunConfig& cfg) { return cfg.seed.value_or(1); }

} // namespace

Dataset load_dataset(const std::string& y_csv, const std::string& x_csv) {
    NumericTable y = read_numeric_csv(y_csv);
    NumericTable x;
    if (x_csv.empty()) {
        x.values.resize(y.values.rows(), 0);
    } else {
        x = read_numeric_csv(x_csv);
    }
    if (y.values.rows() != x.values.rows()) {
        throw InputError("row mismatch: " + y_csv + " has " + std::to_string(y.values.rows()) + " data rows, " +
                         x_csv + " has " + std::to_string(x.values.rows()));
    }
    if (y.header.size() < 2) {
        throw InputError(y_csv + ": at least two response columns are required");
    }
    return {std::move(y.values), std::move(x.values), std::move(y.header), std::move(x.header)};
}

CvGrid grid_from(const RunConfig& cfg, bool reduced_default) {
    CvGrid grid = reduced_default && cfg.alphas.empty() && !cfg.nlam ? CvGrid::reduced() : CvGrid::standard();
    if (!cfg.alphas.empty()) {
        grid.alphas = cfg.alphas;
    }
    if (cfg.nlam) {
        if (*cfg.nlam < 1) {
            throw InputError("--nlam must be at least 1");
        }
        grid.lambda_stars = log_spaced(*cfg.nlam, 0.01, 1.0);
    }
    grid.folds = cfg.folds;
    grid.validate();
    return grid;
}

void write_coefficients(const std::string& path, const CoefficientStack& stack, const std::vector<std::string>& x_names,
                        const std::vector<std::string>& y_names) {
    const auto names = layer_names(x_names);
    CsvWriter w(path);
    w.cell("layer").cell("l_name").cell("j_name").cell("k_name").cell("value").end_row();
    for (std::size_t l = 0; l < stack.layers(); ++l) {
        for (std::size_t j = 0; j < stack.p(); ++j) {
            for (std::size_t k = j; k < stack.p(); ++k) {
                const double v = stack(l, j, k);
                if (v != 0.0 || (l == 0 && j == k)) {
                    w.cell(l).cell(names[l]).cell(y_names[j]).cell(y_names[k]).cell(v).end_row();
                }
            }
        }
    }
    w.close();
}

CoefficientStack read_coefficients(const std::string& path, const std::vector<std::string>& x_names,
                                   const std::vector<std::string>& y_names) {
    const TextTable t = read_text_csv(path);
    const std::vector<std::string> expected{"layer", "l_name", "j_name", "k_name", "value"};
    if (t.header != expected) {
        throw InputError(path + ":1:1: expected header layer,l_name,j_name,k_name,value");
    }
    const auto names = layer_names(x_names);
    std::map<std::string, std::size_t> y_index;
    for (std::size_t j = 0; j < y_names.size(); ++j) {
        y_index.emplace(y_names[j], j);
    }
    CoefficientStack stack(y_names.size(), x_names.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string where = path + ":" + std::to_string(t.lines[r]);
        const double layer = parse_double(row[0], where + ":1");
        if (layer < 0 || layer != std::floor(layer) || layer >= static_cast<double>(names.size())) {
            throw InputError(where + ":1: layer " + row[0] + " does not exist for " + std::to_string(x_names.size()) +
                             " covariates (coefficient/data shape mismatch)");
        }
        const auto l = static_cast<std::size_t>(layer);
        if (row[1] != names[l]) {
            throw InputError(where + ":2: covariate name '" + row[1] + "' does not match data column '" + names[l] +
                             "'");
        }
        const auto j = y_index.find(row[2]);
        const auto k = y_index.find(row[3]);
        if (j == y_index.end() || k == y_index.end()) {
            throw InputError(where + ":" + (j == y_index.end() ? "3" : "4") +
                             ": response name not present in the data (coefficient/data shape mismatch)");
        }
        stack.set(l, j->second, k->second, parse_double(row[4], where + ":5"));
    }
    return stack;
}

std::vector<std::vector<std::size_t>> stability_split(std::size_t n, std::uint64_t seed, std::size_t split) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, 7, split));
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::size_t> a(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n / 2));
    std::vector<std::size_t> b(perm.begin() + static_cast<std::ptrdiff_t>(n / 2), perm.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return {a, b};
}

void cmd_fit(const RunConfig& cfg) {
    const auto t0 = Clock::now();
    const auto dir = prepare_out(cfg);
    const Dataset data = load_dataset(cfg.y_csv, cfg.x_csv);
    const CenteredDesign design = center_data(data.y, data.x, cfg.mean);
    const double t_load = seconds_since(t0);

    FitConfig fc;
    fc.penalty = {cfg.lambda, cfg.lambda_g};
    const auto t1 = Clock::now();
    const FitResult fr = fit(design, fc);
    const double t_fit = seconds_since(t1);
    const CoefficientStack original = to_original_scale(fr.stack, design.centering);

    std::vector<std::string> outputs{"coefficients.csv", "summary.json"};
    write_coefficients((dir / "coefficients.csv").string(), original, data.x_names, data.y_names);
    json summary = fit_summary(fr, original, data.x_names, data);
    summary["lambda"] = cfg.lambda;
    summary["lambda_g"] = cfg.lambda_g;
    write_json(dir / "summary.json", summary);
    if (cfg.subjects) {
        write_subject_sigmas(dir / "sigma_subjects.csv", original, data);
        outputs.push_back("sigma_subjects.csv");
    }
    write_manifest(dir, cfg, seed_or_default(cfg),
                   {{"load_seconds", t_load}, {"fit_seconds", t_fit}, {"total_seconds", seconds_since(t0)}}, outputs);
}

void cmd_cv(const RunConfig& cfg) {
    const auto t0 = Clock::now();
    const auto dir = prepare_out(cfg);
    const Dataset data = load_dataset(cfg.y_csv, cfg.x_csv);
    const CvGrid grid = grid_from(cfg);
    const std::uint64_t seed = seed_or_default(cfg);

    CvOptions opts;
    opts.mean_mode = cfg.mean;
    opts.threads = cfg.threads;
    const auto t1 = Clock::now();
    const CvResult cv = cv_select(data.y, data.x, grid, seed, opts);
    const double t_cv = seconds_since(t1);

    CsvWriter w((dir / "cv_surface.csv").string());
    w.cell("alpha").cell("lambda_star").cell("lambda").cell("lambda_g").cell("mean_loss").cell("se");
    for (std::size_t f = 0; f < grid.folds; ++f) {
        w.cell("fold_" + std::to_string(f + 1));
    }
    w.end_row();
    for (std::size_t a = 0; a < cv.alphas.size(); ++a) {
        for (std::size_t l = 0; l < cv.lambda_stars.size(); ++l) {
            const double al = cv.alphas[a];
            const double ls = cv.lambda_stars[l];
            w.cell(al).cell(ls).cell(al * ls).cell((1.0 - al) * ls);
            w.cell(cv.loss_surface[a][l]).cell(cv.se_surface[a][l]);
            for (double v : cv.per_fold_losses[a][l]) {
                w.cell(v);
            }
            w.end_row();
        }
    }
    w.close();

    json sel;
    sel["alpha"] = cv.best.alpha;
    sel["lambda_star"] = cv.best.lambda_star;
    sel["lambda"] = cv.best.penalty.lambda;
    sel["lambda_g"] = cv.best.penalty.lambda_g;
    sel["folds"] = grid.folds;
    sel["seed"] = seed;
    sel["diagnostics"] = cv.diagnostics;
    write_json(dir / "selected.json", sel);

    const CenteredDesign design = center_data(data.y, data.x, cfg.mean);
    FitConfig fc;
    fc.penalty = cv.best.penalty;
    const auto t2 = Clock::now();
    const FitResult fr = fit(design, fc);
    const double t_fit = seconds_since(t2);
    const CoefficientStack original = to_original_scale(fr.stack, design.centering);
    write_coefficients((dir / "coefficients.csv").string(), original, data.x_names, data.y_names);
    json summary = fit_summary(fr, original, data.x_names, data);
    summary["lambda"] = fc.penalty.lambda;
    summary["lambda_g"] = fc.penalty.lambda_g;
    write_json(dir / "summary.json", summary);

    write_manifest(dir, cfg, seed,
                   {{"cv_seconds", t_cv}, {"refit_seconds", t_fit}, {"total_seconds", seconds_since(t0)}},
                   {"cv_surface.csv", "selected.json", "coefficients.csv", "summary.json"});
}

void cmd_infer(const RunConfig& cfg) {
    const auto t0 = Clock::now();
    const auto dir = prepare_out(cfg);
    if (cfg.coef_csv.empty()) {
        throw InputError("infer needs --coef (a coefficients.csv written by fit or cv)");
    }
    const Dataset data = load_dataset(cfg.y_csv, cfg.x_csv);
    const CenteredDesign design = center_data(data.y, data.x, cfg.mean);
    const CoefficientStack original = read_coefficients(cfg.coef_csv, data.x_names, data.y_names);
    const CoefficientStack scaled = to_scaled(original, design.centering);

    InferenceOptions io;
    io.alpha = cfg.alpha;
    const auto t1 = Clock::now();
    const DebiasResult res = infer(design, scaled, io);
    const std::vector<Edge> edges = detect_edges(res, cfg.alpha, cfg.correction);
    const double t_inf = seconds_since(t1);

    const std::size_t p = original.p();
    const double tests = static_cast<double>(p * (p - 1) / 2);
    const double level = cfg.correction == Correction::BonferroniEdges ? cfg.alpha / tests : cfg.alpha;
    const double z = normal_quantile(1.0 - level / 2.0);
    const auto names = layer_names(data.x_names);

    std::size_t flagged = 0;
    CsvWriter w((dir / "inference.csv").string());
    w.cell("layer").cell("l_name").cell("j_name").cell("k_name").cell("estimate").cell("debiased").cell("se");
    w.cell("ci_lower").cell("ci_upper").cell("significant").cell("degenerate").end_row();
    for (std::size_t l = 0; l < original.layers(); ++l) {
        for (std::size_t j = 0; j < p; ++j) {
            for (std::size_t k = j; k < p; ++k) {
                const auto li = static_cast<Eigen::Index>(l);
                const auto idx = static_cast<Eigen::Index>(vech_index(p, j, k));
                const double bu = res.debiased.packed()(li, idx);
                const double half = z * res.se(li, idx);
                const bool degenerate = res.degenerate(li, idx);
                const bool significant = !degenerate && half > 0.0 && std::abs(bu) > half;
                flagged += significant ? 1 : 0;
                w.cell(l).cell(names[l]).cell(data.y_names[j]).cell(data.y_names[k]);
                w.cell(res.estimate.packed()(li, idx)).cell(bu).cell(res.se(li, idx));
                w.cell(res.lower(li, idx)).cell(res.upper(li, idx));
                w.cell(significant ? "1" : "0").cell(degenerate ? "1" : "0").end_row();
            }
        }
    }
    w.close();

    CsvWriter e((dir / "edges.csv").string());
    e.cell("layer").cell("l_name").cell("j_name").cell("k_name").cell("debiased").cell("ci_lower").cell("ci_upper");
    e.end_row();
    for (const Edge& edge : edges) {
        e.cell(edge.l).cell(names[edge.l]).cell(data.y_names[edge.j]).cell(data.y_names[edge.k]);
        e.cell(edge.estimate).cell(edge.lower).cell(edge.upper).end_row();
    }
    e.close();

    json summary;
    summary["alpha"] = cfg.alpha;
    summary["correction"] = to_string(cfg.correction);
    summary["per_test_level"] = level;
    summary["significant_entries"] = flagged;
    summary["edges"] = edges.size();
    summary["degenerate_entries"] = res.degenerate.count();
    if (res.program) {
        summary["mu"] = res.program->mu;
        summary["beta"] = res.program->beta;
        std::size_t relax = 0;
        for (const auto& r : res.program->rows) {
            relax = std::max(relax, r.relaxations);
        }
        summary["max_relaxations"] = relax;
    }
    write_json(dir / "inference_summary.json", summary);
    write_manifest(dir, cfg, seed_or_default(cfg), {{"inference_seconds", t_inf}, {"total_seconds", seconds_since(t0)}},
                   {"inference.csv", "edges.csv", "inference_summary.json"});
}

void cmd_simulate(const RunConfig& cfg) {
    const auto t0 = Clock::now();
    if (!cfg.seed) {
        throw InputError("simulate requires --seed");
    }
    if (cfg.reps < 1) {
        throw InputError("--reps must be at least 1");
    }
    Scenario sc;
    sc.structure = parse_structure(cfg.structure);
    sc.setting = parse_setting(cfg.setting);
    sc.n = cfg.n;
    sc.p = cfg.p;
    sc.q = cfg.q;
    sc.seed = *cfg.seed;
    sc.validate();

    ExperimentOptions opts;
    if (!cfg.methods.empty()) {
        opts.methods.clear();
        for (const auto& m : cfg.methods) {
            opts.methods.push_back(parse_method(m));
        }
    } else {
        opts.methods = {Method::SparseCovReg, Method::DenseSample, Method::SparseSample, Method::DenseCovReg};
    }
    opts.grid = grid_from(cfg, true);
    opts.inference = cfg.inference &&
                     std::find(opts.methods.begin(), opts.methods.end(), Method::SparseCovReg) != opts.methods.end();
    opts.alpha = cfg.alpha;
    opts.threads = cfg.threads;
    opts.collect_scatter = true;
    const auto dir = prepare_out(cfg);

    const ExperimentResult res = run_experiment(sc, cfg.reps, opts);
    const double t_run = seconds_since(t0);

    auto scenario_cells = [&](CsvWriter& w) {
        w.cell(to_string(sc.structure)).cell(to_string(sc.setting)).cell(sc.n).cell(sc.p).cell(sc.q);
    };
    auto se = [](const MetricSummary& m) { return m.count > 0 ? m.sd / std::sqrt(static_cast<double>(m.count)) : 0.0; };

    CsvWriter t1((dir / "table1.csv").string());
    t1.cell("structure").cell("setting").cell("n").cell("p").cell("q").cell("method").cell("replicates");
    t1.cell("avg_frobenius_mean").cell("avg_frobenius_sd").cell("avg_frobenius_se").end_row();
    for (const auto& ms : res.summary) {
        scenario_cells(t1);
        t1.cell(to_string(ms.method)).cell(ms.avg_frobenius.count);
        t1.cell(ms.avg_frobenius.mean).cell(ms.avg_frobenius.sd).cell(se(ms.avg_frobenius)).end_row();
    }
    t1.close();

    CsvWriter t2((dir / "table2.csv").string());
    t2.cell("structure").cell("setting").cell("n").cell("p").cell("q").cell("method").cell("rsse_mean").cell("rsse_sd");
    t2.cell("rsse_se").cell("tpr_mean").cell("fpr_mean").end_row();
    for (const auto& ms : res.summary) {
        if (!ms.rsse) {
            continue;
        }
        scenario_cells(t2);
        t2.cell(to_string(ms.method)).cell(ms.rsse->mean).cell(ms.rsse->sd).cell(se(*ms.rsse));
        if (ms.tpr) {
            t2.cell(ms.tpr->mean).cell(ms.fpr->mean);
        } else {
            t2.cell("").cell("");
        }
        t2.end_row();
    }
    t2.close();

    std::vector<std::string> outputs{"table1.csv", "table2.csv"};
    if (opts.inference) {
        CsvWriter t3((dir / "table3.csv").string());
        t3.cell("structure").cell("setting").cell("n").cell("p").cell("q").cell("variance").cell("overall");
        t3.cell("support").cell("complement").end_row();
        for (const auto& ms : res.summary) {
            if (!ms.coverage) {
                continue;
            }
            scenario_cells(t3);
            t3.cell("empirical").cell(ms.coverage->overall).cell(ms.coverage->support);
            t3.cell(ms.coverage->complement).end_row();
            if (ms.coverage_true) {
                scenario_cells(t3);
                t3.cell("true").cell(ms.coverage_true->overall).cell(ms.coverage_true->support);
                t3.cell(ms.coverage_true->complement).end_row();
            }
        }
        t3.close();
        outputs.push_back("table3.csv");
    }

    CsvWriter rep((dir / "replicates.csv").string());
    rep.cell("replicate").cell("method").cell("avg_frobenius").cell("rsse").cell("tpr").cell("fpr");
    rep.cell("coverage").cell("coverage_true").cell("lambda").cell("lambda_g").cell("delta").end_row();
    auto opt_cell = [](CsvWriter& w, const std::optional<double>& v) {
        if (v) {
            w.cell(*v);
        } else {
            w.cell("");
        }
    };
    for (const auto& r : res.per_replicate) {
        for (std::size_t m = 0; m < r.methods.size(); ++m) {
            const MetricsReport& mr = r.reports[m];
            rep.cell(r.replicate).cell(to_string(r.methods[m])).cell(mr.avg_frobenius);
            opt_cell(rep, mr.rsse);
            opt_cell(rep, mr.tpr);
            opt_cell(rep, mr.fpr);
            opt_cell(rep, mr.coverage ? std::optional<double>(mr.coverage->overall) : std::nullopt);
            opt_cell(rep, mr.coverage_true ? std::optional<double>(mr.coverage_true->overall) : std::nullopt);
            const bool sparse = r.methods[m] == Method::SparseCovReg;
            opt_cell(rep, sparse ? std::optional<double>(r.selected.penalty.lambda) : std::nullopt);
            opt_cell(rep, sparse ? std::optional<double>(r.selected.penalty.lambda_g) : std::nullopt);
            opt_cell(rep, sparse ? std::optional<double>(r.delta) : std::nullopt);
            rep.end_row();
        }
    }
    rep.close();
    outputs.push_back("replicates.csv");

    CsvWriter sw((dir / "scatter.csv").string());
    sw.cell("replicate").cell("subject").cell("method").cell("truth").cell("estimate").end_row();
    for (const auto& pt : res.scatter) {
        sw.cell(pt.replicate).cell(pt.subject + 1).cell(to_string(pt.method)).cell(pt.truth).cell(pt.estimate).end_row();
    }
    sw.close();
    outputs.push_back("scatter.csv");

    write_manifest(dir, cfg, *cfg.seed, {{"total_seconds", t_run}}, outputs);
}

void cmd_stability(const RunConfig& cfg) {
    const auto t0 = Clock::now();
    if (cfg.splits < 2) {
        throw InputError("--splits must be at least 2");
    }
    if (!(cfg.threshold >= 0.0 && cfg.threshold <= 1.0)) {
        throw InputError("--threshold must lie in [0, 1]");
    }
    const auto dir = prepare_out(cfg);
    const Dataset data = load_dataset(cfg.y_csv, cfg.x_csv);
    const std::size_t n = static_cast<std::size_t>(data.y.rows());
    const std::size_t q = static_cast<std::size_t>(data.x.cols());
    if (q == 0) {
        throw InputError("stability needs at least one covariate (--x)");
    }
    const CvGrid grid = grid_from(cfg, true);
    if (n / 2 < 2 * grid.folds) {
        throw InputError("n = " + std::to_string(n) + " is too small to split into halves with " +
                         std::to_string(grid.folds) + "-fold cross-validation (need n >= " +
                         std::to_string(4 * grid.folds) + ")");
    }
    const std::uint64_t seed = seed_or_default(cfg);

    struct HalfOutcome {
        std::size_t size = 0;
        PenaltyConfig penalty;
        std::vector<std::size_t> selected;
    };
    auto run_half = [&](const std::vector<std::size_t>& rows, std::uint64_t cv_seed) {
        Matrix y(static_cast<Eigen::Index>(rows.size()), data.y.cols());
        Matrix xall(static_cast<Eigen::Index>(rows.size()), data.x.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            y.row(static_cast<Eigen::Index>(i)) = data.y.row(static_cast<Eigen::Index>(rows[i]));
            xall.row(static_cast<Eigen::Index>(i)) = data.x.row(static_cast<Eigen::Index>(rows[i]));
        }
        // Covariates constant on this half cannot be estimated there; they are left out.
        std::vector<std::size_t> keep;
        for (std::size_t l = 0; l < q; ++l) {
            const auto col = xall.col(static_cast<Eigen::Index>(l));
            if (col.maxCoeff() > col.minCoeff()) {
                keep.push_back(l);
            }
        }
        if (keep.empty()) {
            throw InputError("every covariate is constant on a stability half");
        }
        Matrix x(xall.rows(), static_cast<Eigen::Index>(keep.size()));
        for (std::size_t c = 0; c < keep.size(); ++c) {
            x.col(static_cast<Eigen::Index>(c)) = xall.col(static_cast<Eigen::Index>(keep[c]));
        }
        CvOptions opts;
        opts.mean_mode = cfg.mean;
        const CvResult cv = cv_select(y, x, grid, cv_seed, opts);
        FitConfig fc;
        fc.penalty = cv.best.penalty;
        const FitResult fr = fit(center_data(y, x, cfg.mean), fc);
        HalfOutcome out;
        out.size = rows.size();
        out.penalty = cv.best.penalty;
        for (std::size_t c = 0; c < keep.size(); ++c) {
            if (!fr.stack.layer_is_zero(c + 1)) {
                out.selected.push_back(keep[c]);
            }
        }
        return out;
    };

    const auto outcomes = parallel_map(cfg.splits, cfg.threads, [&](std::size_t s) {
        const auto halves = stability_split(n, seed, s);
        return std::array<HalfOutcome, 2>{run_half(halves[0], derive_seed(seed, 8, 2 * s)),
                                          run_half(halves[1], derive_seed(seed, 8, 2 * s + 1))};
    });

    std::vector<std::size_t> first(q, 0), second(q, 0), both(q, 0);
    CsvWriter w((dir / "splits.csv").string());
    w.cell("split").cell("half").cell("size").cell("lambda").cell("lambda_g").cell("selected").end_row();
    for (std::size_t s = 0; s < outcomes.size(); ++s) {
        std::set<std::size_t> sel[2];
        for (std::size_t h = 0; h < 2; ++h) {
            const HalfOutcome& o = outcomes[s][h];
            std::string joined;
            for (std::size_t l : o.selected) {
                joined += (joined.empty() ? "" : ";") + data.x_names[l];
                sel[h].insert(l);
                (h == 0 ? first : second)[l] += 1;
            }
            w.cell(s + 1).cell(h + 1).cell(o.size).cell(o.penalty.lambda).cell(o.penalty.lambda_g).cell(joined);
            w.end_row();
        }
        for (std::size_t l : sel[0]) {
            both[l] += sel[1].count(l);
        }
    }
    w.close();

    CsvWriter sm((dir / "stability_summary.csv").string());
    sm.cell("covariate").cell("selected_first").cell("selected_second").cell("coselected").cell("coselected_fraction");
    sm.end_row();
    json stable = json::array();
    for (std::size_t l = 0; l < q; ++l) {
        const double frac = static_cast<double>(both[l]) / static_cast<double>(cfg.splits);
        sm.cell(data.x_names[l]).cell(first[l]).cell(second[l]).cell(both[l]).cell(frac).end_row();
        if (both[l] > 0 && frac >= cfg.threshold) {
            stable.push_back({{"covariate", data.x_names[l]}, {"coselected", both[l]}, {"fraction", frac}});
        }
    }
    sm.close();
    write_json(dir / "coselected.json", {{"splits", cfg.splits}, {"threshold", cfg.threshold}, {"covariates", stable}});
    write_manifest(dir, cfg, seed, {{"total_seconds", seconds_since(t0)}},
                   {"splits.csv", "stability_summary.csv", "coselected.json"});
}

} // namespace scovreg::cli
