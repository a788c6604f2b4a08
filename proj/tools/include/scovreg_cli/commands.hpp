#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scovreg/inference.hpp"
#include "scovreg/model.hpp"
#include "scovreg/tuning.hpp"

namespace scovreg::cli {

struct RunConfig {
    std::string command;
    std::string y_csv;
    std::string x_csv;
    std::string coef_csv;
    std::string out_dir = ".";

    double lambda = 0.1;
    double lambda_g = 0.1;
    std::vector<double> alphas;
    std::optional<std::size_t> nlam;
    std::size_t folds = 5;
    std::optional<std::uint64_t> seed;
    double alpha = 0.05;
    Correction correction = Correction::None;
    MeanMode mean = MeanMode::ColumnMean;
    std::size_t threads = 1;
    bool subjects = false;

    std::string structure = "ma1";
    std::string setting = "continuous";
    std::size_t n = 500;
    std::size_t p = 50;
    std::size_t q = 30;
    std::size_t reps = 1;
    std::vector<std::string> methods;
    bool inference = true;

    std::size_t splits = 100;
    double threshold = 0.5;
};

/// Data as read from the two input files, with column names.
struct Dataset {
    Matrix y;
    Matrix x;
    std::vector<std::string> y_names;
    std::vector<std::string> x_names;
};

Dataset load_dataset(const std::string& y_csv, const std::string& x_csv);

/// Grid from --alphas / --nlam / --folds; the 3 x 100 grid when neither is given.
CvGrid grid_from(const RunConfig& cfg, bool reduced_default = false);

void write_coefficients(const std::string& path, const CoefficientStack& stack, const std::vector<std::string>& x_names,
                        const std::vector<std::string>& y_names);
CoefficientStack read_coefficients(const std::string& path, const std::vector<std::string>& x_names,
                                   const std::vector<std::string>& y_names);

/// Random equal halves for split s; the same seed gives the same sequence.
std::vector<std::vector<std::size_t>> stability_split(std::size_t n, std::uint64_t seed, std::size_t split);

void cmd_fit(const RunConfig& cfg);
void cmd_cv(const RunConfig& cfg);
void cmd_infer(const RunConfig& cfg);
void cmd_simulate(const RunConfig& cfg);
void cmd_stability(const RunConfig& cfg);

/// Parses argv and dispatches. Returns the process exit code.
int run_cli(int argc, char** argv);

} // namespace scovreg::cli
