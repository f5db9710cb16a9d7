// Prints one PASS/FAIL line per acceptance criterion; exit status 0 only when all pass.
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <string>

#include "htol/acceptance.hpp"
#include "htol/parallel.hpp"

int main(int argc, char** argv) {
    htol::acceptance::SuiteOptions opt;
    opt.threads = 1;
    std::string report_path;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--seed" && i + 1 < argc) opt.seed = std::strtoull(argv[++i], nullptr, 10);
        else if (a == "--threads" && i + 1 < argc) opt.threads = std::atoi(argv[++i]);
        else if (a == "--rerun-threads" && i + 1 < argc) opt.rerun_threads = std::atoi(argv[++i]);
        else if (a == "--only" && i + 1 < argc) opt.only.push_back(std::atoi(argv[++i]));
        else if (a == "--report" && i + 1 < argc) report_path = argv[++i];
        else {
            std::cerr << "usage: htol_acceptance [--seed N] [--threads N] [--rerun-threads N] [--only ID]... [--report FILE]\n";
            return 1;
        }
    }
    // ctest hides the output of passing tests, so the lines also go to a file when asked
    std::ofstream report;
    if (!report_path.empty()) report.open(report_path);
    opt.on_result = [&report](const htol::acceptance::CriterionResult& r) {
        const std::string line = htol::acceptance::format_line(r);
        std::cout << line << std::endl;
        if (report) report << line << std::endl;
    };
    const auto rep = htol::acceptance::run_suite(opt);
    int passed = 0;
    for (const auto& r : rep.results) passed += r.pass ? 1 : 0;
    std::cout << "acceptance suite complete: " << passed << "/" << rep.results.size() << " passed" << std::endl;
    if (report) report << "acceptance suite complete: " << passed << "/" << rep.results.size() << " passed" << std::endl;
    return rep.all_pass() ? 0 : 1;
}
