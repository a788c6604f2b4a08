#include "scovreg/simulate.hpp"

#include <cmath>
#include <map>
#include <random>
#include <string>

#include <Eigen/Cholesky>

#include "scovreg/baselines.hpp"
#include "scovreg/error.hpp"
#include "scovreg/estimator.hpp"
#include "scovreg/normal.hpp"
#include "scovreg/parallel.hpp"

namespace scovreg {
namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

MetricSummary summarize(const std::vector<double>& values) {
    MetricSummary s;
    s.count = values.size();
    if (values.empty()) {
        return s;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) {
            ss += (v - s.mean) * (v - s.mean);
        }
        s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

Coverage tally_coverage(const CoefficientStack& truth, const Matrix& center, const Matrix& half) {
    const std::size_t p = truth.p();
    std::size_t hit_s = 0, n_s = 0, hit_c = 0, n_c = 0;
    for (std::size_t l = 0; l < truth.layers(); ++l) {
        for (std::size_t j = 0; j < p; ++j) {
            for (std::size_t k = j + 1; k < p; ++k) {
                const auto li = static_cast<Eigen::Index>(l);
                const auto idx = static_cast<Eigen::Index>(vech_index(p, j, k));
                const double t = truth(l, j, k);
                const bool covered = center(li, idx) - half(li, idx) <= t && t <= center(li, idx) + half(li, idx);
                if (t != 0.0) {
                    ++n_s;
                    hit_s += covered ? 1 : 0;
                } else {
                    ++n_c;
                    hit_c += covered ? 1 : 0;
                }
            }
        }
    }
    auto frac = [](std::size_t a, std::size_t b) {
        return b == 0 ? std::nan("") : static_cast<double>(a) / static_cast<double>(b);
    };
    return {frac(hit_s + hit_c, n_s + n_c), frac(hit_s, n_s), frac(hit_c, n_c)};
}

CoefficientStack constant_stack(const Matrix& sigma, std::size_t q) {
    CoefficientStack out(static_cast<std::size_t>(sigma.rows()), q);
    out.layer(0) = vech(sigma).transpose();
    return out;
}

} // namespace

Structure parse_structure(std::string_view name) {
    if (name == "ma1" || name == "MA1") {
        return Structure::MA1;
    }
    if (name == "clique") {
        return Structure::Clique;
    }
    if (name == "hub") {
        return Structure::Hub;
    }
    throw InputError("unknown structure '" + std::string(name) + "' (expected ma1, clique or hub)");
}

Setting parse_setting(std::string_view name) {
    if (name == "continuous" || name == "1") {
        return Setting::Continuous;
    }
    if (name == "binary" || name == "2") {
        return Setting::Binary;
    }
    throw InputError("unknown setting '" + std::string(name) + "' (expected continuous or binary)");
}

std::string to_string(Structure s) {
    switch (s) {
    case Structure::MA1: return "ma1";
    case Structure::Clique: return "clique";
    case Structure::Hub: return "hub";
    }
    return "?";
}

std::string to_string(Setting s) { return s == Setting::Continuous ? "continuous" : "binary"; }

std::string to_string(Method m) {
    switch (m) {
    case Method::SparseCovReg: return "SparseCovReg";
    case Method::DenseSample: return "DenseSample";
    case Method::SparseSample: return "SparseSample";
    case Method::DenseCovReg: return "DenseCovReg";
    }
    return "?";
}

Method parse_method(std::string_view name) {
    for (Method m : {Method::SparseCovReg, Method::DenseSample, Method::SparseSample, Method::DenseCovReg}) {
        std::string a = to_string(m);
        std::string b(name);
        for (auto& c : a) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        for (auto& c : b) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (a == b) {
            return m;
        }
    }
    throw InputError("unknown method '" + std::string(name) + "'");
}

void Scenario::validate() const {
    if (p < 2) {
        throw InputError("scenario: p must be at least 2");
    }
    if (q < 1) {
        throw InputError("scenario: q must be at least 1");
    }
    if (n < 2) {
        throw InputError("scenario: n must be at least 2");
    }
    if (structure == Structure::Clique && p % 10 != 0) {
        throw InputError("scenario: clique structure needs p divisible by 10");
    }
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t counter) noexcept {
    return splitmix64(splitmix64(splitmix64(master) ^ stream) + counter);
}

Matrix gen_covariates(std::size_t n, std::size_t q, Setting setting, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(q));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index l = 0; l < x.cols(); ++l) {
            x(i, l) = setting == Setting::Continuous ? unif(rng) : (coin(rng) ? 1.0 : 0.0);
        }
    }
    return x;
}

Matrix true_sigma(Structure structure, double x1, std::size_t p) {
    const auto pi = static_cast<Eigen::Index>(p);
    Matrix s = Matrix::Identity(pi, pi) * (0.5 + 0.5 * x1);
    switch (structure) {
    case Structure::MA1:
        for (Eigen::Index j = 0; j + 1 < pi; ++j) {
            s(j, j + 1) = s(j + 1, j) = 0.5 * x1;
        }
        break;
    case Structure::Clique:
        if (p % 10 != 0) {
            throw InputError("clique structure needs p divisible by 10");
        }
        for (Eigen::Index b = 0; b < pi; b += 10) {
            for (Eigen::Index j = b; j < b + 10; ++j) {
                for (Eigen::Index k = b; k < b + 10; ++k) {
                    if (j != k) {
                        s(j, k) = 0.5 * x1;
                    }
                }
            }
        }
        break;
    case Structure::Hub:
        // 1-based rows j with j mod 5 == 1 connect to j+1..j+4.
        for (Eigen::Index j = 0; j < pi; j += 5) {
            for (Eigen::Index k = j + 1; k <= j + 4 && k < pi; ++k) {
                s(j, k) = s(k, j) = 0.4 * x1;
            }
        }
        break;
    }
    return s;
}

CoefficientStack true_stack(Structure structure, std::size_t p, std::size_t q) {
    if (q < 1) {
        throw InputError("true_stack: q must be at least 1");
    }
    std::vector<Matrix> mats(q + 1, Matrix::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)));
    mats[0] = true_sigma(structure, 0.0, p);
    mats[1] = true_sigma(structure, 1.0, p) - mats[0];
    return CoefficientStack::from_matrices(mats);
}

ResponseDraw gen_responses(const Matrix& xraw, Structure structure, std::size_t p, std::uint64_t seed) {
    if (xraw.cols() < 1) {
        throw InputError("gen_responses: at least one covariate is required");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    ResponseDraw out;
    out.y.resize(xraw.rows(), static_cast<Eigen::Index>(p));
    std::map<double, std::pair<Matrix, bool>> factors;
    Vector g(static_cast<Eigen::Index>(p));
    for (Eigen::Index i = 0; i < xraw.rows(); ++i) {
        const double x1 = xraw(i, 0);
        auto it = factors.find(x1);
        if (it == factors.end()) {
            Matrix sigma = true_sigma(structure, x1, p);
            Eigen::LLT<Matrix> llt(sigma);
            bool jitter = false;
            if (llt.info() != Eigen::Success) {
                sigma.diagonal().array() += 1e-10;
                llt.compute(sigma);
                jitter = true;
                if (llt.info() != Eigen::Success) {
                    throw NumericalError("gen_responses: covariance at x1 = " + std::to_string(x1) +
                                         " is not positive semidefinite");
                }
            }
            it = factors.emplace(x1, std::make_pair(Matrix(llt.matrixL()), jitter)).first;
        }
        for (Eigen::Index j = 0; j < g.size(); ++j) {
            g(j) = normal(rng);
        }
        out.y.row(i) = (it->second.first * g).transpose();
        out.jittered += it->second.second ? 1 : 0;
    }
    return out;
}

MetricsReport score_replicate(const CoefficientStack& estimate, const CoefficientStack& truth, const Matrix& xraw,
                              const DebiasResult* debias, const Matrix* true_variances) {
    if (estimate.p() != truth.p() || estimate.q() != truth.q() ||
        static_cast<std::size_t>(xraw.cols()) != truth.q()) {
        throw InputError("score_replicate: dimension mismatch");
    }
    const std::size_t p = truth.p();
    const Matrix diff = estimate.packed() - truth.packed();

    Matrix design(xraw.rows(), xraw.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(xraw.cols()) = xraw;
    const Matrix per_subject = design * diff; // n x p(p+1)/2
    std::vector<char> is_diag(vech_size(p), 0);
    for (std::size_t j = 0; j < p; ++j) {
        is_diag[vech_index(p, j, j)] = 1;
    }
    double frob_sum = 0.0;
    for (Eigen::Index i = 0; i < per_subject.rows(); ++i) {
        double ss = 0.0;
        for (Eigen::Index c = 0; c < per_subject.cols(); ++c) {
            const double v = per_subject(i, c) * per_subject(i, c);
            ss += is_diag[static_cast<std::size_t>(c)] ? v : 2.0 * v;
        }
        frob_sum += std::sqrt(ss);
    }

    MetricsReport r;
    r.avg_frobenius = frob_sum / static_cast<double>(per_subject.rows());
    r.rsse = diff.norm();

    std::size_t tp = 0, pos = 0, fp = 0, neg = 0;
    for (Eigen::Index l = 1; l < diff.rows(); ++l) {
        for (Eigen::Index c = 0; c < diff.cols(); ++c) {
            const bool selected = estimate.packed()(l, c) != 0.0;
            if (truth.packed()(l, c) != 0.0) {
                ++pos;
                tp += selected ? 1 : 0;
            } else {
                ++neg;
                fp += selected ? 1 : 0;
            }
        }
    }
    r.tpr = pos == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(pos);
    r.fpr = neg == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(neg);

    if (debias != nullptr) {
        const double z = normal_quantile(1.0 - debias->alpha / 2.0);
        r.coverage = tally_coverage(truth, debias->debiased.packed(), z * debias->se);
        if (true_variances != nullptr) {
            const Matrix half =
                z * (true_variances->cwiseMax(0.0) / static_cast<double>(debias->n)).cwiseSqrt();
            r.coverage_true = tally_coverage(truth, debias->debiased.packed(), half);
        }
    }
    return r;
}

Matrix true_w_variances(const CenteredDesign& design, const Matrix& directions, const CoefficientStack& truth,
                        const Matrix& xraw) {
    const std::size_t p = truth.p();
    Matrix raw_design(xraw.rows(), xraw.cols() + 1);
    raw_design.col(0).setOnes();
    raw_design.rightCols(xraw.cols()) = xraw;
    const Matrix sig = raw_design * truth.packed(); // n x p(p+1)/2, vech(Sigma*(x_i)) per row

    Matrix fourth(sig.rows(), sig.cols());
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t k = j; k < p; ++k) {
            const auto c = static_cast<Eigen::Index>(vech_index(p, j, k));
            const auto cj = static_cast<Eigen::Index>(vech_index(p, j, j));
            const auto ck = static_cast<Eigen::Index>(vech_index(p, k, k));
            fourth.col(c) = sig.col(cj).cwiseProduct(sig.col(ck)) + sig.col(c).cwiseAbs2();
        }
    }
    const Matrix a = design.x * directions.transpose();
    return a.cwiseAbs2().transpose() * fourth / static_cast<double>(design.n());
}

ReplicateOutcome run_replicate(const Scenario& scenario, std::size_t replicate, const ExperimentOptions& options,
                               std::vector<ScatterPoint>* scatter) {
    scenario.validate();
    const Matrix xraw = gen_covariates(scenario.n, scenario.q, scenario.setting, derive_seed(scenario.seed, 1, replicate));
    const Matrix y = gen_responses(xraw, scenario.structure, scenario.p, derive_seed(scenario.seed, 2, replicate)).y;
    const std::uint64_t cv_seed = derive_seed(scenario.seed, 3, replicate);
    const CenteredDesign design = center_data(y, xraw);
    const CoefficientStack truth = true_stack(scenario.structure, scenario.p, scenario.q);

    ReplicateOutcome out;
    out.replicate = replicate;
    for (Method method : options.methods) {
        CoefficientStack est;
        MetricsReport report;
        switch (method) {
        case Method::SparseCovReg: {
            CvOptions cvo;
            const CvResult cv = cv_select(y, xraw, options.grid, cv_seed, cvo);
            FitConfig cfg;
            cfg.penalty = cv.best.penalty;
            const FitResult fr = fit(design, cfg);
            out.selected = cv.best;
            out.delta = fr.delta;
            est = to_original_scale(fr.stack, design.centering);
            if (options.inference) {
                InferenceOptions io;
                io.alpha = options.alpha;
                const DebiasResult dr = infer(design, fr.stack, io);
                const Matrix tv = true_w_variances(design, dr.directions, truth, xraw);
                report = score_replicate(est, truth, xraw, &dr, &tv);
            } else {
                report = score_replicate(est, truth, xraw);
            }
            break;
        }
        case Method::DenseSample:
            est = constant_stack(dense_sample(design.z), scenario.q);
            report = score_replicate(est, truth, xraw);
            break;
        case Method::SparseSample: {
            const SparseSampleCv tuned = tune_sparse_sample(y, options.grid.lambda_stars, options.grid.folds, cv_seed);
            est = constant_stack(sparse_sample(design.z, tuned.lambda), scenario.q);
            report = score_replicate(est, truth, xraw);
            break;
        }
        case Method::DenseCovReg:
            est = to_original_scale(dense_covreg(design), design.centering);
            report = score_replicate(est, truth, xraw);
            break;
        }
        if (method != Method::SparseCovReg) {
            report.tpr.reset();
            report.fpr.reset();
        }
        if (method == Method::DenseSample || method == Method::SparseSample) {
            report.rsse.reset();
        }
        out.methods.push_back(method);
        out.reports.push_back(report);

        if (scatter != nullptr) {
            for (Eigen::Index i = 0; i < xraw.rows(); ++i) {
                const Vector xi = xraw.row(i).transpose();
                const double t = evaluate_sigma(truth, xi)(static_cast<Eigen::Index>(options.scatter_j),
                                                           static_cast<Eigen::Index>(options.scatter_k));
                const double e = evaluate_sigma(est, xi)(static_cast<Eigen::Index>(options.scatter_j),
                                                         static_cast<Eigen::Index>(options.scatter_k));
                scatter->push_back({replicate, static_cast<std::size_t>(i), method, t, e});
            }
        }
    }
    return out;
}

ExperimentResult run_experiment(const Scenario& scenario, std::size_t replicates, const ExperimentOptions& options) {
    if (replicates < 1) {
        throw InputError("run_experiment: at least one replicate is required");
    }
    scenario.validate();
    struct Slot {
        ReplicateOutcome outcome;
        std::vector<ScatterPoint> scatter;
    };
    auto slots = parallel_map(replicates, options.threads, [&](std::size_t r) {
        Slot s;
        try {
            s.outcome = run_replicate(scenario, r, options, options.collect_scatter ? &s.scatter : nullptr);
        } catch (const std::exception& e) {
            throw NumericalError("replicate " + std::to_string(r) + ": " + e.what());
        }
        return s;
    });

    ExperimentResult res;
    res.scenario = scenario;
    res.replicates = replicates;
    for (auto& s : slots) {
        res.per_replicate.push_back(std::move(s.outcome));
        res.scatter.insert(res.scatter.end(), s.scatter.begin(), s.scatter.end());
    }

    for (std::size_t mi = 0; mi < options.methods.size(); ++mi) {
        MethodSummary ms;
        ms.method = options.methods[mi];
        std::vector<double> frob, rsse, tpr, fpr;
        std::vector<Coverage> cov, cov_true;
        for (const auto& rep : res.per_replicate) {
            const MetricsReport& m = rep.reports[mi];
            frob.push_back(m.avg_frobenius);
            if (m.rsse) rsse.push_back(*m.rsse);
            if (m.tpr) tpr.push_back(*m.tpr);
            if (m.fpr) fpr.push_back(*m.fpr);
            if (m.coverage) cov.push_back(*m.coverage);
            if (m.coverage_true) cov_true.push_back(*m.coverage_true);
        }
        ms.avg_frobenius = summarize(frob);
        if (!rsse.empty()) ms.rsse = summarize(rsse);
        if (!tpr.empty()) ms.tpr = summarize(tpr);
        if (!fpr.empty()) ms.fpr = summarize(fpr);
        auto average = [](const std::vector<Coverage>& v) {
            Coverage c;
            for (const auto& x : v) {
                c.overall += x.overall / static_cast<double>(v.size());
                c.support += x.support / static_cast<double>(v.size());
                c.complement += x.complement / static_cast<double>(v.size());
            }
            return c;
        };
        if (!cov.empty()) ms.coverage = average(cov);
        if (!cov_true.empty()) ms.coverage_true = average(cov_true);
        res.summary.push_back(ms);
    }
    return res;
}

} // namespace scovreg
