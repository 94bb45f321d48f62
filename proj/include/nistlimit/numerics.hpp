#pragma once

// Special functions and distributions behind every p-value and sample-size
// computation: log-gamma, the regularized upper incomplete gamma function,
// erfc, central and noncentral chi-squared tails, and multinomial masses.
//
// All functions are pure and may be called concurrently.

#include <cstdint>
#include <span>
#include <vector>

namespace nistlimit {

/// Compensated (Kahan-Babuska-Neumaier) accumulator.
///
/// `sum` and `comp` are kept separately so partial results can be persisted
/// and merged without losing the low-order part.
struct CompensatedSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double x) noexcept {
        const double t = sum + x;
        if ((sum >= 0 ? sum : -sum) >= (x >= 0 ? x : -x)) {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }

    /// Folds another accumulator in; used for fixed-order merges.
    void merge(const CompensatedSum& other) noexcept {
        add(other.sum);
        add(other.comp);
    }

    [[nodiscard]] double value() const noexcept { return sum + comp; }
};

/// ln Gamma(x) for x > 0. Throws std::domain_error otherwise.
double log_gamma(double x);

/// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
/// Series for x < a + 1, continued fraction otherwise.
double igamc(double a, double x);

/// Complementary error function.
double erfc(double x);

/// Upper tail of the chi-squared distribution with `nu` degrees of freedom.
double chi2_sf(int nu, double x);

/// Upper 100*alpha-th percentile: the x with chi2_sf(nu, x) == alpha.
double chi2_isf(int nu, double alpha);

/// Density of the chi-squared distribution (used by quantile refinement).
double chi2_pdf(int nu, double x);

/// Upper tail of the noncentral chi-squared distribution, evaluated as a
/// Poisson mixture of central tails. The series is truncated once the
/// remaining Poisson mass is below 1e-14.
double noncentral_chi2_sf(int nu, double lambda, double x);

/// log of the multinomial probability of `counts` given `probs`, where
/// `n` must equal the sum of the counts.
double log_multinomial_pmf(std::int64_t n, std::span<const std::int64_t> counts,
                           std::span<const double> probs);

/// Table of ln(k!) for k = 0..max, for hot loops that evaluate many
/// multinomial masses with the same block count.
class LogFactorialTable {
public:
    explicit LogFactorialTable(std::int64_t max);

    [[nodiscard]] double operator()(std::int64_t k) const { return table_[static_cast<std::size_t>(k)]; }
    [[nodiscard]] std::int64_t max() const noexcept { return static_cast<std::int64_t>(table_.size()) - 1; }

private:
    std::vector<double> table_;
};

}  // namespace nistlimit
