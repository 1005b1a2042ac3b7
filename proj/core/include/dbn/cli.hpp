#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dbn/search.hpp"

namespace dbn {

/// Exit codes of run_command.
enum ExitCode {
    kOk = 0,
    kUsage = 1,
    kDataError = 2,
    kNumericError = 3,
    kInternalError = 4,
};

struct RunConfig {
    std::string command; // generate|learn-params|learn-struct|discover|eval|infer
    std::string model_path;
    std::string data_path;
    std::string test_data_path;
    std::string out_path;
    std::uint64_t seed = 1;

    ScoreKind score = ScoreKind::Bic;
    double bde_ess = 1.0;
    int max_indegree = 3;
    int max_lag = 1;
    bool allow_intra_slice = true;
    int stages = 3;
    int candidates_per_child = 8;
    double pseudocount = 1.0;

    std::string partition_spec = "singletons"; // or a JSON cluster file
    int buckets = 7;
    std::vector<std::string> continuous;
    double split_fraction = 0.75;
    int subsample = 1;

    int iterations = 2; // discovery structural iterations
    double epsilon = 0.3;
    double rho = 0.5;
    int depth_cap = 3;
    std::vector<int> fhmm_sizes; // extra FHMM baselines for discover

    double em_tolerance = 1e-4;
    int em_max_iters = 30;

    int sequences = 1; // generate
    int length = 1000;
    bool include_hidden = false;
};

/// Dispatches one batch command; artifacts are written atomically and the
/// returned code follows ExitCode. Errors print to stderr.
int run_command(const RunConfig& config);

} // namespace dbn
