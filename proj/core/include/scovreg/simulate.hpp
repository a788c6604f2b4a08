#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scovreg/inference.hpp"
#include "scovreg/tuning.hpp"

namespace scovreg {

enum class Structure { MA1, Clique, Hub };
enum class Setting {
    Continuous, ///< covariates ~ Uniform(0, 1)
    Binary,     ///< covariates ~ Bernoulli(0.5)
};

Structure parse_structure(std::string_view name);
Setting parse_setting(std::string_view name);
std::string to_string(Structure s);
std::string to_string(Setting s);

struct Scenario {
    Structure structure = Structure::MA1;
    Setting setting = Setting::Continuous;
    std::size_t n = 500;
    std::size_t p = 50;
    std::size_t q = 30;
    std::uint64_t seed = 1;

    void validate() const;
};

/// splitmix64 of (master, stream, counter); independent seed per replicate and purpose.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t counter) noexcept;

Matrix gen_covariates(std::size_t n, std::size_t q, Setting setting, std::uint64_t seed);

/// Covariance template as a function of the single effective covariate x1.
Matrix true_sigma(Structure structure, double x1, std::size_t p);

/// B0 = Sigma(0), B1 = Sigma(1) - Sigma(0), Bl = 0 for l >= 2.
CoefficientStack true_stack(Structure structure, std::size_t p, std::size_t q);

struct ResponseDraw {
    Matrix y;
    /// Subjects whose covariance needed the 1e-10 jitter to factor.
    std::size_t jittered = 0;
};

/// Rows y_i ~ N(0, Sigma(x_i1)) via Cholesky.
ResponseDraw gen_responses(const Matrix& xraw, Structure structure, std::size_t p, std::uint64_t seed);

enum class Method { SparseCovReg, DenseSample, SparseSample, DenseCovReg };
std::string to_string(Method m);
Method parse_method(std::string_view name);

/// Coverage of off-diagonal parameters, all / true support / true zeros.
struct Coverage {
    double overall = 0.0;
    double support = 0.0;
    double complement = 0.0;
};

struct MetricsReport {
    double avg_frobenius = 0.0;
    std::optional<double> rsse;
    std::optional<double> tpr;
    std::optional<double> fpr;
    std::optional<Coverage> coverage;      ///< empirical variances
    std::optional<Coverage> coverage_true; ///< true variances
};

/// Scores one estimate against the truth on the raw covariate scale.
///   avg_frobenius = (1/n) sum_i |Sigma_hat(x_i) - Sigma*(x_i)|_F
///   rsse          = sqrt(sum_{l, j<=k} (B* - B_hat)^2)
///   tpr / fpr     over (l >= 1, j <= k)
/// Coverage uses off-diagonal entries of every layer.
MetricsReport score_replicate(const CoefficientStack& estimate, const CoefficientStack& truth, const Matrix& xraw,
                              const DebiasResult* debias = nullptr, const Matrix* true_variances = nullptr);

/// Per-subject covariance entry used for scatter output.
struct ScatterPoint {
    std::size_t replicate = 0;
    std::size_t subject = 0;
    Method method = Method::SparseCovReg;
    double truth = 0.0;
    double estimate = 0.0;
};

struct ReplicateOutcome {
    std::size_t replicate = 0;
    std::vector<Method> methods;
    std::vector<MetricsReport> reports;
    CvPoint selected;
    double delta = 0.0;
};

struct MetricSummary {
    double mean = 0.0;
    double sd = 0.0;
    std::size_t count = 0;
};

struct MethodSummary {
    Method method = Method::SparseCovReg;
    MetricSummary avg_frobenius;
    std::optional<MetricSummary> rsse;
    std::optional<MetricSummary> tpr;
    std::optional<MetricSummary> fpr;
    std::optional<Coverage> coverage;
    std::optional<Coverage> coverage_true;
};

struct ExperimentOptions {
    std::vector<Method> methods = {Method::SparseCovReg, Method::DenseSample, Method::SparseSample};
    CvGrid grid = CvGrid::reduced();
    bool inference = false;  ///< debias SparseCovReg and record coverage
    double alpha = 0.05;
    std::size_t threads = 1;
    /// Scatter entry (j, k), 0-based; defaults to Sigma_12.
    std::size_t scatter_j = 0;
    std::size_t scatter_k = 1;
    bool collect_scatter = false;
};

struct ExperimentResult {
    Scenario scenario;
    std::size_t replicates = 0;
    std::vector<ReplicateOutcome> per_replicate;
    std::vector<MethodSummary> summary;
    std::vector<ScatterPoint> scatter;
};

/// Runs one replicate; all randomness derives from (scenario.seed, replicate).
ReplicateOutcome run_replicate(const Scenario& scenario, std::size_t replicate, const ExperimentOptions& options,
                               std::vector<ScatterPoint>* scatter = nullptr);

ExperimentResult run_experiment(const Scenario& scenario, std::size_t replicates, const ExperimentOptions& options);

/// Per-subject true variance of W_{l,jk}: (1/n) sum_i (X d_l)_i^2 sigma*_ijk^2
/// with sigma*_ijk^2 = Sigma_jj Sigma_kk + Sigma_jk^2 (Gaussian fourth moments).
Matrix true_w_variances(const CenteredDesign& design, const Matrix& directions, const CoefficientStack& truth,
                        const Matrix& xraw);

} // namespace scovreg
