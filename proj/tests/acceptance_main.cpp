// Acceptance suite: runs every verification check at full strength and
// prints one pass/fail line per criterion.

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <string>
#include <thread>

#include "dbl/verify.hpp"

int main(int argc, char** argv) {
    dbl::verify::Options options;
    options.mc_paths = 20000;
    options.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--paths" && i + 1 < argc) options.mc_paths = std::atoi(argv[++i]);
        if (arg == "--threads" && i + 1 < argc) options.threads = std::atoi(argv[++i]);
    }

    const auto results = dbl::verify::run_full(options);
    int failures = 0;
    for (const auto& r : results) {
        std::cout << (r.pass ? "PASS" : "FAIL") << "  criterion " << std::setw(2) << r.id << ": "
                  << r.name << "  [" << std::fixed << std::setprecision(2) << r.seconds << "s]\n";
        std::cout << "      " << r.detail << "\n";
        if (!r.pass) ++failures;
    }
    if (failures > 0) {
        std::cout << failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all " << results.size() << " criteria passed\n";
    return 0;
}
