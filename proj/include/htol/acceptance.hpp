#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace htol::acceptance {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    bool stochastic = true;
    std::string detail;
    std::uint64_t raw_hash = 0;  // digest of every raw number the verdict was computed from
    double seconds = 0.0;
    double budget_seconds = 0.0;
};

struct SuiteOptions {
    std::uint64_t seed = 20231;
    int threads = 1;
    int rerun_threads = 0;  // thread count for the determinism reruns; 0 picks threads + 2
    std::vector<int> only;  // empty runs 1..11
    std::function<void(const CriterionResult&)> on_result;
};

struct SuiteReport {
    std::vector<CriterionResult> results;
    bool all_pass() const;
};

int criterion_count();
const char* criterion_name(int id);

// Runs criteria 1..10 one at a time; 3 and 4 share one stationary sample when run together.
std::vector<CriterionResult> run_criteria(const std::vector<int>& ids, std::uint64_t seed, int threads);

// Criterion 11 reruns every stochastic criterion that was run at another thread count and compares digests.
SuiteReport run_suite(const SuiteOptions& opt);

std::string format_line(const CriterionResult& r);

}  // namespace htol::acceptance
