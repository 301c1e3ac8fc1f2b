#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dbl::verify {

struct CheckResult {
    std::string id;
    std::string name;
    bool pass = false;
    double seconds = 0.0;
    std::string detail;
};

struct Options {
    int mc_paths = 20000;
    int threads = 1;
    std::uint64_t seed = 91701;
};

/// Closed-form identities and oracle equivalences (seconds).
std::vector<CheckResult> run_quick(const Options& options);

/// Quick checks plus the Monte-Carlo distribution and ordering checks
/// (minutes at full path counts).
std::vector<CheckResult> run_full(const Options& options);

/// Spearman rank correlation (no tie handling; inputs assumed distinct).
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace dbl::verify
