#pragma once

// How far a category distribution q is from the assumed second-level null p,
// and what that implies for the usable second sample size N.

#include "nistlimit/exactdist.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace nistlimit {

/// Tolerance on |sum - 1| for distributions handed to the functions below.
inline constexpr double kProbabilitySumTolerance = 1e-9;
/// Looser tolerance for vectors re-entered from 7-digit printed tables.
inline constexpr double kPrintedSumTolerance = 1e-6;

std::vector<double> uniform_probs(int nu);

/// delta = sum (q_i - p_i)^2 / p_i. Throws std::invalid_argument on length
/// mismatch, p_i <= 0, or a sum outside tolerance.
double chi2_discrepancy(std::span<const double> q, std::span<const double> p,
                        double sum_tolerance = kProbabilitySumTolerance);
/// u = max |1 - q_i / p_i|.
double max_ratio_dev(std::span<const double> q, std::span<const double> p,
                     double sum_tolerance = kProbabilitySumTolerance);

struct SampleSizes {
    /// Empty when chi2_isf(nu, alpha_safe) - nu - u nu <= 0.
    std::optional<std::int64_t> n_safe;
    std::int64_t n_risky = 0;
    double quantile_safe = 0.0;
    double quantile_risky = 0.0;
};

/// n_safe = floor((chi2_isf(nu, alpha_safe) - nu - u nu) / delta),
/// n_risky = ceil((chi2_isf(nu, alpha_risky) - nu + u nu) / delta).
/// Throws std::invalid_argument for delta <= 0 and std::overflow_error when
/// a size does not fit in 64 bits.
SampleSizes risky_safe_sizes(double delta, double u, int nu = 9,
                             double alpha_risky = 1e-4, double alpha_safe = 0.25);

/// (nu + N delta - nu u, nu + N delta + nu u): the range E[chi2] lies in.
std::pair<double, double> expected_chi2_window(std::int64_t N, double delta, double u, int nu = 9);

/// P(noncentral chi2(nu, lambda) > chi2_isf(nu, significance)).
double rejection_probability(int nu, double lambda, double significance);

struct DiscrepancyReport {
    double delta = 0.0;
    double u = 0.0;
    int nu = 9;
    /// Both empty when delta == 0.
    std::optional<std::int64_t> n_safe;
    std::optional<std::int64_t> n_risky;
    Provenance q_source = Provenance::Exact;
    double alpha_safe = 0.25;
    double alpha_risky = 1e-4;
    double quantile_safe = 0.0;
    double quantile_risky = 0.0;
};

/// Report for q against p (uniform over nu+1 bins when p is empty).
DiscrepancyReport make_discrepancy_report(const CategoryDistribution& q, std::span<const double> p = {},
                                          double alpha_risky = 1e-4, double alpha_safe = 0.25,
                                          double sum_tolerance = kProbabilitySumTolerance);

}  // namespace nistlimit
