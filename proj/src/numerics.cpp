#include "nistlimit/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <math.h>
#include <stdexcept>
#include <string>

namespace nistlimit {

namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;
constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr int kMaxIterations = 100000;

// log1p(t) - t, accurate for small |t|.
double log1pmx(double t) {
    if (std::abs(t) > 0.1) {
        return std::log1p(t) - t;
    }
    double term = t;
    double sum = 0.0;
    for (int k = 2; k < 60; ++k) {
        term *= -t;
        const double add = term / k;
        sum += add;
        if (std::abs(add) < 1e-18 * std::abs(sum)) {
            break;
        }
    }
    return sum;
}

// lnGamma(a) - [(a - 1/2) ln a - a + ln sqrt(2 pi)] for a >= 10.
double stirling_error(double a) {
    const double r = 1.0 / a;
    const double r2 = r * r;
    return r * (1.0 / 12 - r2 * (1.0 / 360 - r2 * (1.0 / 1260 - r2 * (1.0 / 1680 - r2 / 1188))));
}

// ln(x^a e^-x / Gamma(a)).
double log_gamma_prefix(double a, double x) {
    if (a < 10.0) {
        return a * std::log(x) - x - log_gamma(a);
    }
    const double t = (x - a) / a;
    return a * log1pmx(t) + 0.5 * std::log(a) - kHalfLog2Pi - stirling_error(a);
}

double lower_series(double a, double x) {
    double ap = a;
    double del = 1.0 / a;
    double sum = del;
    for (int n = 0; n < kMaxIterations; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * kEps) {
            break;
        }
    }
    return sum * std::exp(log_gamma_prefix(a, x));
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
double upper_fraction(double a, double x) {
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIterations; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) {
            break;
        }
    }
    return std::exp(log_gamma_prefix(a, x)) * h;
}

}  // namespace

double log_gamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw std::domain_error("log_gamma: argument must be positive and finite, got " + std::to_string(x));
    }
    int sign = 0;
    return ::lgamma_r(x, &sign);
}

double igamc(double a, double x) {
    if (!(a > 0.0) || !(x >= 0.0) || std::isnan(a) || std::isnan(x)) {
        throw std::domain_error("igamc: requires a > 0 and x >= 0");
    }
    if (x == 0.0) {
        return 1.0;
    }
    if (std::isinf(x)) {
        return 0.0;
    }
    if (x < a + 1.0) {
        return std::clamp(1.0 - lower_series(a, x), 0.0, 1.0);
    }
    return std::clamp(upper_fraction(a, x), 0.0, 1.0);
}

double erfc(double x) { return std::erfc(x); }

double chi2_sf(int nu, double x) {
    if (nu < 1) {
        throw std::domain_error("chi2_sf: degrees of freedom must be >= 1");
    }
    return igamc(0.5 * nu, 0.5 * x);
}

double chi2_pdf(int nu, double x) {
    if (x <= 0.0) {
        return nu == 2 ? 0.5 : 0.0;
    }
    return std::exp(log_gamma_prefix(0.5 * nu, 0.5 * x)) / x;
}

double chi2_isf(int nu, double alpha) {
    if (nu < 1) {
        throw std::domain_error("chi2_isf: degrees of freedom must be >= 1");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::domain_error("chi2_isf: alpha must lie in (0, 1)");
    }
    double lo = 0.0;
    double hi = std::max(1.0, static_cast<double>(nu));
    while (chi2_sf(nu, hi) > alpha) {
        lo = hi;
        hi *= 2.0;
    }
    // The bracket [lo, hi] always satisfies sf(lo) > alpha >= sf(hi).
    for (int i = 0; i < 40; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (chi2_sf(nu, mid) > alpha) lo = mid; else hi = mid;
    }
    double x = 0.5 * (lo + hi);
    for (int i = 0; i < 8; ++i) {
        const double f = chi2_sf(nu, x) - alpha;
        if (std::abs(f) <= 1e-15 * alpha) {
            break;
        }
        const double step = f / chi2_pdf(nu, x);
        double next = x + step;
        if (!(next > lo && next < hi)) {
            next = 0.5 * (lo + hi);
        }
        if (chi2_sf(nu, next) > alpha) lo = next; else hi = next;
        x = next;
    }
    return x;
}

double noncentral_chi2_sf(int nu, double lambda, double x) {
    if (!(lambda >= 0.0)) {
        throw std::domain_error("noncentral_chi2_sf: lambda must be >= 0");
    }
    if (lambda == 0.0) {
        return chi2_sf(nu, x);
    }
    const double mean = 0.5 * lambda;
    const auto mode = static_cast<std::int64_t>(std::floor(mean));
    const auto log_weight = [&](std::int64_t j) {
        return -mean + static_cast<double>(j) * std::log(mean) - log_gamma(static_cast<double>(j) + 1.0);
    };

    CompensatedSum total;
    CompensatedSum weight_total;
    for (std::int64_t j = mode;; ++j) {
        const double w = std::exp(log_weight(j));
        total.add(w * chi2_sf(nu + 2 * static_cast<int>(j), x));
        weight_total.add(w);
        if (j > mode && w < 1e-17) {
            break;
        }
    }
    for (std::int64_t j = mode - 1; j >= 0; --j) {
        const double w = std::exp(log_weight(j));
        total.add(w * chi2_sf(nu + 2 * static_cast<int>(j), x));
        weight_total.add(w);
        if (1.0 - weight_total.value() < 1e-14 && w < 1e-17) {
            break;
        }
    }
    return std::clamp(total.value(), 0.0, 1.0);
}

double log_multinomial_pmf(std::int64_t n, std::span<const std::int64_t> counts,
                           std::span<const double> probs) {
    if (counts.size() != probs.size()) {
        throw std::domain_error("log_multinomial_pmf: counts and probs differ in length");
    }
    std::int64_t total = 0;
    CompensatedSum prob_total;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] < 0) {
            throw std::domain_error("log_multinomial_pmf: negative count");
        }
        if (probs[i] < 0.0) {
            throw std::domain_error("log_multinomial_pmf: negative probability");
        }
        if (counts[i] > 0 && probs[i] == 0.0) {
            throw std::domain_error("log_multinomial_pmf: positive count in zero-probability class");
        }
        total += counts[i];
        prob_total.add(probs[i]);
    }
    if (total != n) {
        throw std::domain_error("log_multinomial_pmf: counts do not sum to n");
    }
    if (std::abs(prob_total.value() - 1.0) > 1e-12) {
        throw std::domain_error("log_multinomial_pmf: probabilities do not sum to 1");
    }
    CompensatedSum acc;
    acc.add(log_gamma(static_cast<double>(n) + 1.0));
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] == 0) {
            continue;
        }
        const auto c = static_cast<double>(counts[i]);
        acc.add(-log_gamma(c + 1.0));
        acc.add(c * std::log(probs[i]));
    }
    return acc.value();
}

LogFactorialTable::LogFactorialTable(std::int64_t max) {
    if (max < 0) {
        throw std::domain_error("LogFactorialTable: negative size");
    }
    table_.resize(static_cast<std::size_t>(max) + 1);
    table_[0] = 0.0;
    for (std::int64_t k = 1; k <= max; ++k) {
        table_[static_cast<std::size_t>(k)] = log_gamma(static_cast<double>(k) + 1.0);
    }
}

}  // namespace nistlimit
