#include "nistlimit/mcdist.hpp"

#include "nistlimit/discrepancy.hpp"
#include "nistlimit/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace nistlimit {

namespace {

// Stirling series remainder ln k! - [(k + 1/2) ln(k + 1) - (k + 1) + ln sqrt(2 pi)].
double stirling_tail(std::int64_t k) {
    static constexpr double table[10] = {
        0.08106146679532726, 0.04134069595540929, 0.02767792568499834, 0.02079067210376509,
        0.01664469118982119, 0.01387612882307075, 0.01189670994589177, 0.01041126526197209,
        0.009255462182712733, 0.008330563433362871,
    };
    if (k < 10) return table[k];
    const double kp1 = static_cast<double>(k + 1);
    const double r = 1.0 / (kp1 * kp1);
    return (1.0 / 12 - (1.0 / 360 - r / 1260) * r) / kp1;
}

std::int64_t binomial_inversion(std::int64_t n, double p, BitSource& src) {
    const double q = 1.0 - p;
    const double s = p / q;
    const double a = static_cast<double>(n + 1) * s;
    const double r0 = std::pow(q, static_cast<double>(n));
    for (;;) {
        double u = src.next_uniform();
        double r = r0;
        std::int64_t x = 0;
        while (u > r) {
            u -= r;
            ++x;
            if (x > n) break;
            r *= a / static_cast<double>(x) - s;
        }
        if (x <= n) return x;
    }
}

// Hormann's BTRD for p <= 1/2 and n p >= 10.
std::int64_t binomial_btrd(std::int64_t n, double p, BitSource& src) {
    const double nd = static_cast<double>(n);
    const double q = 1.0 - p;
    const double spq = std::sqrt(nd * p * q);
    const double b = 1.15 + 2.53 * spq;
    const double a = -0.0873 + 0.0248 * b + 0.01 * p;
    const double c = nd * p + 0.5;
    const double alpha = (2.83 + 5.1 / b) * spq;
    const double vr = 0.92 - 4.2 / b;
    const double urvr = 0.86 * vr;
    const auto m = static_cast<std::int64_t>(std::floor((nd + 1.0) * p));
    const double r = p / q;
    const double nr = (nd + 1.0) * r;
    const double npq = nd * p * q;

    for (;;) {
        double v = src.next_uniform();
        double u;
        if (v <= urvr) {
            u = v / vr - 0.43;
            return static_cast<std::int64_t>(std::floor((2.0 * a / (0.5 - std::abs(u)) + b) * u + c));
        }
        if (v >= vr) {
            u = src.next_uniform() - 0.5;
        } else {
            u = v / vr - 0.93;
            u = (u < 0 ? -0.5 : 0.5) - u;
            v = src.next_uniform() * vr;
        }
        const double us = 0.5 - std::abs(u);
        const double kd = std::floor((2.0 * a / us + b) * u + c);
        if (kd < 0.0 || kd > nd) continue;
        const auto k = static_cast<std::int64_t>(kd);
        v = v * alpha / (a / (us * us) + b);
        const std::int64_t km = std::llabs(k - m);
        if (km <= 15) {
            double f = 1.0;
            if (m < k) {
                for (std::int64_t i = m + 1; i <= k; ++i) f *= nr / static_cast<double>(i) - r;
            } else if (m > k) {
                for (std::int64_t i = k + 1; i <= m; ++i) v *= nr / static_cast<double>(i) - r;
            }
            if (v <= f) return k;
            continue;
        }
        v = std::log(v);
        const double kmd = static_cast<double>(km);
        const double rho = (kmd / npq) * (((kmd / 3.0 + 0.625) * kmd + 1.0 / 6.0) / npq + 0.5);
        const double t = -kmd * kmd / (2.0 * npq);
        if (v < t - rho) return k;
        if (v > t + rho) continue;
        const double nm = nd - static_cast<double>(m) + 1.0;
        const double h = (static_cast<double>(m) + 0.5) * std::log((static_cast<double>(m) + 1.0) / (r * nm)) +
                         stirling_tail(m) + stirling_tail(n - m);
        const double nk = nd - kd + 1.0;
        if (v <= h + (nd + 1.0) * std::log(nm / nk) + (kd + 0.5) * std::log(nk * r / (kd + 1.0)) -
                     stirling_tail(k) - stirling_tail(n - k)) {
            return k;
        }
    }
}

std::int64_t binomial_fair(std::int64_t n, BitSource& src) {
    std::int64_t total = 0;
    std::int64_t left = n;
    while (left >= 64) {
        total += std::popcount(src.next_u64());
        left -= 64;
    }
    if (left > 0) {
        total += std::popcount(src.next_u64() >> (64 - left));
    }
    return total;
}

std::uint64_t samples_of_stream(std::uint64_t upto, std::size_t s, std::size_t streams) {
    return upto > s ? (upto - s - 1) / streams + 1 : 0;
}

struct Estimate {
    double delta;
    double u;
};

Estimate estimate(std::span<const std::uint64_t> counts, std::uint64_t total, int nu) {
    std::vector<double> q(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        q[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
    }
    const auto p = uniform_probs(nu);
    return {chi2_discrepancy(q, p), max_ratio_dev(q, p)};
}

}  // namespace

std::int64_t binomial_sample(std::int64_t n, double p, BitSource& source) {
    if (n < 0 || !(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("binomial_sample: need n >= 0 and 0 <= p <= 1");
    }
    if (n == 0 || p == 0.0) return 0;
    if (p == 1.0) return n;
    if (p == 0.5 && n <= 4096) return binomial_fair(n, source);
    const bool flip = p > 0.5;
    const double pp = flip ? 1.0 - p : p;
    const std::int64_t x = static_cast<double>(n) * pp < 10.0 ? binomial_inversion(n, pp, source)
                                                              : binomial_btrd(n, pp, source);
    return flip ? n - x : x;
}

ClassCounts multinomial_sample(std::int64_t n, std::span<const double> probs, BitSource& source) {
    if (probs.empty()) {
        throw std::invalid_argument("multinomial_sample: no classes");
    }
    std::vector<double> tail(probs.size());
    CompensatedSum acc;
    for (std::size_t i = probs.size(); i-- > 0;) {
        if (!(probs[i] >= 0.0)) {
            throw std::invalid_argument("multinomial_sample: negative probability");
        }
        acc.add(probs[i]);
        tail[i] = acc.value();
    }
    if (std::abs(tail[0] - 1.0) > 1e-12) {
        throw std::invalid_argument("multinomial_sample: probabilities do not sum to 1");
    }
    ClassCounts x(probs.size(), 0);
    std::int64_t left = n;
    for (std::size_t i = 0; i + 1 < probs.size() && left > 0; ++i) {
        const double pc = tail[i] > 0.0 ? std::min(1.0, probs[i] / tail[i]) : 0.0;
        x[i] = binomial_sample(left, pc, source);
        left -= x[i];
    }
    x.back() += left;
    return x;
}

MCTrace run_monte_carlo(const std::string& test, std::uint64_t M, std::vector<BitSource> streams,
                        const std::function<PValueSampler()>& make_sampler, const MCOptions& options) {
    if (M == 0) {
        throw std::invalid_argument("Monte Carlo sample count must be positive");
    }
    if (streams.empty()) {
        throw std::invalid_argument("at least one stream is required");
    }
    const int nu = options.nu;
    const std::size_t bins = static_cast<std::size_t>(nu) + 1;
    const std::size_t S = streams.size();
    const std::uint64_t every = options.checkpoint_every ? options.checkpoint_every : std::max<std::uint64_t>(1, M / 100);

    std::vector<std::uint64_t> marks;
    for (std::uint64_t c = every; c < M; c += every) marks.push_back(c);
    marks.push_back(M);

    // snaps[s][c * bins + i]
    std::vector<std::vector<std::uint64_t>> snaps(S, std::vector<std::uint64_t>(marks.size() * bins, 0));

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t s = next.fetch_add(1);
            if (s >= S) return;
            try {
                PValueSampler sampler = make_sampler();
                std::vector<std::uint64_t> counts(bins, 0);
                std::uint64_t done = 0;
                std::size_t c = 0;
                auto record = [&] {
                    while (c < marks.size() && samples_of_stream(marks[c], s, S) == done) {
                        std::copy(counts.begin(), counts.end(), snaps[s].begin() + static_cast<std::ptrdiff_t>(c * bins));
                        ++c;
                    }
                };
                record();
                const std::uint64_t mine = samples_of_stream(M, s, S);
                while (done < mine) {
                    const double p = sampler(streams[s]);
                    ++counts[static_cast<std::size_t>(interval_index(p, nu))];
                    ++done;
                    record();
                }
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(S);
                return;
            }
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(S)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    MCTrace trace;
    trace.test = test;
    trace.samples = M;
    trace.streams = S;
    for (std::size_t c = 0; c < marks.size(); ++c) {
        std::vector<std::uint64_t> total(bins, 0);
        for (std::size_t s = 0; s < S; ++s) {
            for (std::size_t i = 0; i < bins; ++i) total[i] += snaps[s][c * bins + i];
        }
        MCCheckpoint cp;
        cp.samples = marks[c];
        const Estimate e = estimate(total, marks[c], nu);
        cp.delta = e.delta;
        cp.u = e.u;
        cp.q.resize(bins);
        for (std::size_t i = 0; i < bins; ++i) {
            cp.q[i] = static_cast<double>(total[i]) / static_cast<double>(marks[c]);
        }
        trace.checkpoints.push_back(std::move(cp));
        if (c + 1 == marks.size()) trace.counts = std::move(total);
    }

    const MCCheckpoint& last = trace.checkpoints.back();
    trace.delta = last.delta;
    trace.u = last.u;
    trace.delta_bias = static_cast<double>(nu) / static_cast<double>(M);
    trace.final.q = last.q;
    trace.final.nu = nu;
    trace.final.provenance = Provenance::MonteCarlo;
    trace.final.mass_accounted = 1.0;
    std::vector<double> se(bins);
    for (std::size_t i = 0; i < bins; ++i) {
        se[i] = std::sqrt(last.q[i] * (1.0 - last.q[i]) / static_cast<double>(M));
    }
    trace.final.stderr_ = std::move(se);

    if (S >= 2) {
        std::vector<double> jd;
        std::vector<double> ju;
        const std::size_t cl = marks.size() - 1;
        for (std::size_t s = 0; s < S; ++s) {
            const std::uint64_t rest = M - samples_of_stream(M, s, S);
            if (rest == 0) continue;
            std::vector<std::uint64_t> others(bins);
            for (std::size_t i = 0; i < bins; ++i) others[i] = trace.counts[i] - snaps[s][cl * bins + i];
            const Estimate e = estimate(others, rest, nu);
            jd.push_back(e.delta);
            ju.push_back(e.u);
        }
        auto spread = [](const std::vector<double>& v) {
            if (v.size() < 2) return 0.0;
            double mean = 0.0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            double ss = 0.0;
            for (double x : v) ss += (x - mean) * (x - mean);
            const double g = static_cast<double>(v.size());
            return std::sqrt((g - 1.0) / g * ss);
        };
        trace.delta_sd = spread(jd);
        trace.u_sd = spread(ju);
    }
    return trace;
}

MCTrace mc_class_q(const TestSpec& spec, std::uint64_t M, const MCOptions& options) {
    spec.validate();
    const BitSource parent = BitSource::generator(options.generator, options.seed);
    auto factory = [&spec]() -> PValueSampler {
        return [&spec](BitSource& src) {
            const ClassCounts x = multinomial_sample(spec.blocks, spec.null_probs, src);
            return chi2_class_p_value(x, spec);
        };
    };
    MCTrace t = run_monte_carlo(spec.name, M, parent.jump_streams(options.streams), factory, options);
    t.source = parent.describe();
    return t;
}

MCTrace mc_block_frequency_q(std::int64_t n, std::int64_t m, std::uint64_t M, const MCOptions& options) {
    if (m < 1 || n < m) {
        throw std::invalid_argument("mc_block_frequency_q: need 1 <= m <= n");
    }
    const std::int64_t nb = n / m;
    const BitSource parent = BitSource::generator(options.generator, options.seed);
    auto factory = [nb, m]() -> PValueSampler {
        return [nb, m, ones = std::vector<std::int64_t>(static_cast<std::size_t>(nb))](BitSource& src) mutable {
            for (auto& x : ones) x = binomial_sample(m, 0.5, src);
            const double t = block_frequency_statistic(ones, m);
            return igamc(static_cast<double>(nb) / 2.0, t / 2.0);
        };
    };
    MCTrace t = run_monte_carlo("block-frequency", M, parent.jump_streams(options.streams), factory, options);
    t.source = parent.describe();
    return t;
}

MCTrace mc_sequence_q(const std::string& test, std::int64_t n, std::uint64_t M, const BitSource& source,
                      const std::function<double(const BitBlock&)>& one_level, const MCOptions& options) {
    if (n < 1) {
        throw std::invalid_argument("mc_sequence_q: n must be positive");
    }
    auto factory = [n, &one_level]() -> PValueSampler {
        return [n, &one_level](BitSource& src) { return one_level(src.next_block(static_cast<std::size_t>(n))); };
    };
    MCTrace t = run_monte_carlo(test, M, source.jump_streams(options.streams), factory, options);
    t.source = source.describe();
    return t;
}

void write_trace_csv(const MCTrace& trace, std::ostream& out) {
    out << "M,delta,u";
    const std::size_t bins = trace.final.q.size();
    for (std::size_t i = 0; i < bins; ++i) out << ",q" << i;
    out << '\n';
    out << std::setprecision(15);
    for (const auto& cp : trace.checkpoints) {
        out << cp.samples << ',' << cp.delta << ',' << cp.u;
        for (double q : cp.q) out << ',' << q;
        out << '\n';
    }
}

}  // namespace nistlimit
