#include "nistlimit/discrepancy.hpp"

#include "nistlimit/numerics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace nistlimit {

namespace {

void check_pair(std::span<const double> q, std::span<const double> p, double tol) {
    if (q.size() != p.size() || q.empty()) {
        throw std::invalid_argument("distribution lengths differ (" + std::to_string(q.size()) + " vs " +
                                    std::to_string(p.size()) + ")");
    }
    CompensatedSum sq;
    CompensatedSum sp;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (!(p[i] > 0.0)) {
            throw std::invalid_argument("null probability " + std::to_string(i) + " is not positive");
        }
        if (!(q[i] >= 0.0)) {
            throw std::invalid_argument("probability " + std::to_string(i) + " is negative");
        }
        sq.add(q[i]);
        sp.add(p[i]);
    }
    if (std::abs(sq.value() - 1.0) > tol || std::abs(sp.value() - 1.0) > tol) {
        throw std::invalid_argument("probabilities do not sum to 1");
    }
}

std::int64_t to_size(double x) {
    if (!(x < 9.2e18)) {
        throw std::overflow_error("sample size does not fit in 64 bits");
    }
    return static_cast<std::int64_t>(x);
}

}  // namespace

std::vector<double> uniform_probs(int nu) {
    if (nu < 1) {
        throw std::invalid_argument("nu must be >= 1");
    }
    return std::vector<double>(static_cast<std::size_t>(nu) + 1, 1.0 / (nu + 1));
}

double chi2_discrepancy(std::span<const double> q, std::span<const double> p, double sum_tolerance) {
    check_pair(q, p, sum_tolerance);
    CompensatedSum s;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double d = q[i] - p[i];
        s.add(d * d / p[i]);
    }
    return s.value();
}

double max_ratio_dev(std::span<const double> q, std::span<const double> p, double sum_tolerance) {
    check_pair(q, p, sum_tolerance);
    double u = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        u = std::max(u, std::abs(1.0 - q[i] / p[i]));
    }
    return u;
}

SampleSizes risky_safe_sizes(double delta, double u, int nu, double alpha_risky, double alpha_safe) {
    if (!(delta > 0.0)) {
        throw std::invalid_argument("delta must be positive");
    }
    if (!(u >= 0.0)) {
        throw std::invalid_argument("u must be non-negative");
    }
    SampleSizes out;
    out.quantile_safe = chi2_isf(nu, alpha_safe);
    out.quantile_risky = chi2_isf(nu, alpha_risky);
    const double safe_num = out.quantile_safe - nu - u * nu;
    if (safe_num > 0.0) {
        out.n_safe = to_size(std::floor(safe_num / delta));
    }
    out.n_risky = to_size(std::ceil((out.quantile_risky - nu + u * nu) / delta));
    return out;
}

std::pair<double, double> expected_chi2_window(std::int64_t N, double delta, double u, int nu) {
    const double centre = nu + static_cast<double>(N) * delta;
    return {centre - nu * u, centre + nu * u};
}

double rejection_probability(int nu, double lambda, double significance) {
    return noncentral_chi2_sf(nu, lambda, chi2_isf(nu, significance));
}

DiscrepancyReport make_discrepancy_report(const CategoryDistribution& q, std::span<const double> p,
                                          double alpha_risky, double alpha_safe, double sum_tolerance) {
    std::vector<double> uniform;
    if (p.empty()) {
        uniform = uniform_probs(q.nu);
        p = uniform;
    }
    DiscrepancyReport r;
    r.nu = static_cast<int>(p.size()) - 1;
    r.q_source = q.provenance;
    r.alpha_risky = alpha_risky;
    r.alpha_safe = alpha_safe;
    r.delta = chi2_discrepancy(q.q, p, sum_tolerance);
    r.u = max_ratio_dev(q.q, p, sum_tolerance);
    r.quantile_safe = chi2_isf(r.nu, alpha_safe);
    r.quantile_risky = chi2_isf(r.nu, alpha_risky);
    if (r.delta > 0.0) {
        const SampleSizes s = risky_safe_sizes(r.delta, r.u, r.nu, alpha_risky, alpha_safe);
        r.n_safe = s.n_safe;
        r.n_risky = s.n_risky;
    }
    return r;
}

}  // namespace nistlimit
