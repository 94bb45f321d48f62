#include "nistlimit/twolevel.hpp"

#include "nistlimit/exactdist.hpp"
#include "nistlimit/numerics.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace nistlimit {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace

std::string_view to_string(NullKind kind) {
    switch (kind) {
        case NullKind::Uniform: return "uniform";
        case NullKind::Exact: return "exact";
        case NullKind::MC: return "mc";
    }
    return "unknown";
}

SecondLevelNull SecondLevelNull::uniform(int nu) {
    require(nu >= 1, "nu must be >= 1");
    return {NullKind::Uniform, std::vector<double>(static_cast<std::size_t>(nu) + 1, 1.0 / (nu + 1))};
}

SecondLevelNull SecondLevelNull::from_probs(NullKind kind, std::vector<double> p) {
    require(p.size() >= 2, "null needs at least two bins");
    CompensatedSum s;
    for (std::size_t i = 0; i < p.size(); ++i) {
        require(p[i] > 0.0, "null probability of bin " + std::to_string(i) + " is not positive");
        s.add(p[i]);
    }
    require(std::abs(s.value() - 1.0) <= 1e-9, "null probabilities do not sum to 1");
    return {kind, std::move(p)};
}

std::vector<std::int64_t> bin_pvalues(std::span<const double> pvals, int nu) {
    std::vector<std::int64_t> hist(static_cast<std::size_t>(nu) + 1, 0);
    for (double p : pvals) ++hist[static_cast<std::size_t>(interval_index(p, nu))];
    return hist;
}

GofResult gof_chi2(std::span<const std::int64_t> hist, const SecondLevelNull& null) {
    require(hist.size() == null.p.size(), "histogram and null have different bin counts");
    std::int64_t N = 0;
    for (auto y : hist) N += y;
    require(N >= 1, "empty histogram");
    CompensatedSum chi;
    for (std::size_t i = 0; i < hist.size(); ++i) {
        require(null.p[i] > 0.0, "null probability of bin " + std::to_string(i) + " is zero");
        const double e = static_cast<double>(N) * null.p[i];
        const double d = static_cast<double>(hist[i]) - e;
        chi.add(d * d / e);
    }
    GofResult r;
    r.chi2 = chi.value();
    r.p_second = chi2_sf(null.nu(), r.chi2);
    return r;
}

std::string_view to_string(TestId id) {
    switch (id) {
        case TestId::Frequency: return "frequency";
        case TestId::BlockFrequency: return "block-frequency";
        case TestId::Longest: return "longest";
        case TestId::Overlap: return "overlap";
        case TestId::Linear: return "linear";
        case TestId::Excursion: return "excursion";
        case TestId::Dft: return "dft";
    }
    return "unknown";
}

TestId parse_test_id(std::string_view name) {
    if (name == "frequency") return TestId::Frequency;
    if (name == "block-frequency" || name == "blockfreq") return TestId::BlockFrequency;
    if (name == "longest") return TestId::Longest;
    if (name == "overlap") return TestId::Overlap;
    if (name == "linear") return TestId::Linear;
    if (name == "excursion" || name == "excursions") return TestId::Excursion;
    if (name == "dft") return TestId::Dft;
    throw std::invalid_argument("unknown test '" + std::string(name) + "'");
}

void TestConfig::validate() const {
    require(n >= 1, "n must be positive");
    switch (id) {
        case TestId::Frequency:
            require(n >= 100, "frequency needs n >= 100");
            break;
        case TestId::BlockFrequency:
            require(m >= 1 && n >= m, "block-frequency needs 1 <= m <= n");
            break;
        case TestId::Longest:
            longest_run_boundaries(m);
            require(n >= m, "longest needs n >= m");
            break;
        case TestId::Overlap:
            require(n >= kOverlapBlockSize, "overlap needs n >= 1032");
            break;
        case TestId::Linear:
            require(m >= 500 && m <= 5000 && n >= m, "linear needs 500 <= m <= 5000 and n >= m");
            break;
        case TestId::Excursion:
            break;
        case TestId::Dft:
            require(n >= 2 && n % 2 == 0, "dft needs an even n");
            break;
    }
}

std::vector<std::string> TestConfig::series_labels() const {
    if (id != TestId::Excursion) return {std::string(to_string(id))};
    std::vector<std::string> out;
    for (int x : kExcursionStates) out.push_back("x=" + std::to_string(x));
    return out;
}

std::optional<std::vector<double>> run_one_level(const TestConfig& test, const BitBlock& segment) {
    switch (test.id) {
        case TestId::Frequency: return std::vector<double>{frequency_test(segment)};
        case TestId::BlockFrequency: return std::vector<double>{block_frequency_test(segment, test.m)};
        case TestId::Longest: return std::vector<double>{longest_run_test(segment, test.m)};
        case TestId::Overlap: return std::vector<double>{overlapping_template_test(segment)};
        case TestId::Linear: return std::vector<double>{linear_complexity_test(segment, test.m)};
        case TestId::Dft: return std::vector<double>{dft_test(segment, test.sigma)};
        case TestId::Excursion: {
            const auto r = random_excursions_test(segment);
            if (!r) return std::nullopt;
            return std::vector<double>(r->p_values.begin(), r->p_values.end());
        }
    }
    return std::nullopt;
}

PValueCollection collect_pvalues(BitSource& source, const TestConfig& test, std::int64_t N, int nu,
                                 unsigned threads) {
    test.validate();
    require(N >= 1, "N must be positive");
    PValueCollection c;
    c.test = test;
    c.nu = nu;
    c.N = N;
    c.labels = test.series_labels();
    c.histograms.assign(c.labels.size(), std::vector<std::int64_t>(static_cast<std::size_t>(nu) + 1, 0));
    c.source = source.describe();

    constexpr std::int64_t kBatch = 256;
    std::int64_t accepted = 0;
    std::vector<BitBlock> batch;
    std::vector<std::optional<std::vector<double>>> results;
    while (accepted < N) {
        const std::int64_t want = std::min(kBatch, N - accepted);
        batch.clear();
        for (std::int64_t i = 0; i < want; ++i) batch.push_back(source.next_block(static_cast<std::size_t>(test.n)));
        c.segments += static_cast<std::uint64_t>(want);
        results.assign(batch.size(), std::nullopt);

        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto worker = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= batch.size()) return;
                try {
                    results[i] = run_one_level(test, batch[i]);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        };
        const unsigned t = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(batch.size())));
        if (t == 1) {
            worker();
        } else {
            std::vector<std::jthread> pool;
            for (unsigned k = 0; k < t; ++k) pool.emplace_back(worker);
        }
        if (failure) std::rethrow_exception(failure);

        for (const auto& r : results) {
            if (!r) {
                ++c.discarded;
                continue;
            }
            for (std::size_t s = 0; s < r->size(); ++s) {
                ++c.histograms[s][static_cast<std::size_t>(interval_index((*r)[s], nu))];
            }
            ++accepted;
        }
    }
    return c;
}

TwoLevelResult evaluate_two_level(const PValueCollection& collection, std::span<const SecondLevelNull> nulls) {
    const std::size_t S = collection.histograms.size();
    require(nulls.size() == 1 || nulls.size() == S, "need one null or one per series");
    TwoLevelResult r;
    r.test = collection.test;
    r.N = collection.N;
    r.discarded = collection.discarded;
    r.nulls.assign(nulls.begin(), nulls.end());
    r.source = collection.source;
    for (std::size_t s = 0; s < S; ++s) {
        const SecondLevelNull& null = nulls.size() == 1 ? nulls[0] : nulls[s];
        require(null.nu() == collection.nu, "null bin count differs from the collection");
        const GofResult g = gof_chi2(collection.histograms[s], null);
        r.series.push_back({collection.labels[s], collection.histograms[s], g.chi2, g.p_second});
    }
    return r;
}

TwoLevelResult run_two_level(BitSource& source, const TestConfig& test, std::int64_t N,
                             std::span<const SecondLevelNull> nulls, unsigned threads) {
    require(!nulls.empty(), "no null given");
    const PValueCollection c = collect_pvalues(source, test, N, nulls[0].nu(), threads);
    return evaluate_two_level(c, nulls);
}

}  // namespace nistlimit
