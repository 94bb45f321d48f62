#include "nistlimit/onelevel.hpp"

#include "nistlimit/numerics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace nistlimit {

namespace {

double sum_of(std::span<const double> v) {
    CompensatedSum s;
    for (double x : v) s.add(x);
    return s.value();
}

void require(bool cond, const char* what) {
    if (!cond) throw std::invalid_argument(what);
}

}  // namespace

void TestSpec::validate() const {
    require(block_size >= 1, "TestSpec: block size must be positive");
    require(blocks >= 1, "TestSpec: need at least one block");
    require(df >= 1, "TestSpec: df must be positive");
    require(class_probs.size() == static_cast<std::size_t>(df) + 1 &&
                null_probs.size() == class_probs.size(),
            "TestSpec: probability vectors must have k+1 entries");
    for (std::size_t i = 0; i < class_probs.size(); ++i) {
        require(class_probs[i] > 0.0 && null_probs[i] > 0.0, "TestSpec: probabilities must be positive");
    }
    // The published constants are rounded to six decimals; the null must be exact.
    require(std::abs(sum_of(class_probs) - 1.0) <= 1e-5, "TestSpec: class probabilities do not sum to 1");
    require(std::abs(sum_of(null_probs) - 1.0) <= 1e-12, "TestSpec: null probabilities do not sum to 1");
}

double chi2_class_statistic(std::span<const std::int64_t> counts, const TestSpec& spec) {
    require(counts.size() == spec.class_probs.size(), "chi2_class_statistic: count vector has wrong length");
    const double nb = static_cast<double>(spec.blocks);
    double t = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double e = nb * spec.class_probs[i];
        const double d = static_cast<double>(counts[i]) - e;
        t += d * d / e;
    }
    return t;
}

double chi2_class_p_value(std::span<const std::int64_t> counts, const TestSpec& spec) {
    return chi2_sf(spec.df, chi2_class_statistic(counts, spec));
}

// ---------------------------------------------------------------------------
// Frequency

double frequency_p_value(std::int64_t ones, std::int64_t n) {
    require(n >= 1 && ones >= 0 && ones <= n, "frequency_p_value: invalid counts");
    const double s = static_cast<double>(2 * ones - n);
    return erfc(std::abs(s) / std::sqrt(2.0 * static_cast<double>(n)));
}

double frequency_test(const BitBlock& block, std::size_t min_bits) {
    if (block.size() < std::max<std::size_t>(min_bits, 1)) {
        throw std::invalid_argument("frequency_test: block too short");
    }
    const auto n = static_cast<std::int64_t>(block.size());
    return frequency_p_value(static_cast<std::int64_t>(block.count_ones(0, block.size())), n);
}

// ---------------------------------------------------------------------------
// Frequency within a Block

double block_frequency_statistic(std::span<const std::int64_t> ones, std::int64_t m) {
    // Integer numerator, one rounding at the end.
    unsigned __int128 acc = 0;
    for (std::int64_t x : ones) {
        const std::int64_t d = 2 * x - m;
        acc += static_cast<unsigned __int128>(d * d);
    }
    return static_cast<double>(static_cast<long double>(acc) / static_cast<long double>(m));
}

double block_frequency_test(const BitBlock& block, std::int64_t m) {
    require(m >= 1, "block_frequency_test: m must be positive");
    const auto nb = static_cast<std::int64_t>(block.size()) / m;
    require(nb >= 1, "block_frequency_test: fewer than one block");
    std::vector<std::int64_t> ones(static_cast<std::size_t>(nb));
    for (std::int64_t b = 0; b < nb; ++b) {
        ones[static_cast<std::size_t>(b)] = static_cast<std::int64_t>(
            block.count_ones(static_cast<std::size_t>(b * m), static_cast<std::size_t>(m)));
    }
    const double t = block_frequency_statistic(ones, m);
    return igamc(static_cast<double>(nb) / 2.0, t / 2.0);
}

// ---------------------------------------------------------------------------
// Longest Run of Ones

std::uint64_t count_longest_run_at_most(int m, int t) {
    require(m >= 0 && m <= 63 && t >= 0, "count_longest_run_at_most: need 0 <= m <= 63");
    if (t >= m) return std::uint64_t{1} << m;
    // state r = length of the trailing run of ones, 0..t
    std::vector<std::uint64_t> cur(static_cast<std::size_t>(t) + 1, 0), next(cur.size());
    cur[0] = 1;
    for (int step = 0; step < m; ++step) {
        std::fill(next.begin(), next.end(), 0);
        for (int r = 0; r <= t; ++r) {
            next[0] += cur[r];
            if (r < t) next[r + 1] += cur[r];
        }
        cur.swap(next);
    }
    std::uint64_t total = 0;
    for (auto c : cur) total += c;
    return total;
}

double prob_longest_run_at_most(std::int64_t m, std::int64_t t) {
    require(m >= 0 && t >= 0, "prob_longest_run_at_most: negative argument");
    if (t >= m) return 1.0;
    // Same state machine as the counting version, on probabilities.
    std::vector<double> cur(static_cast<std::size_t>(t) + 1, 0.0), next(cur.size());
    cur[0] = 1.0;
    for (std::int64_t step = 0; step < m; ++step) {
        CompensatedSum zero;
        for (double c : cur) zero.add(c);
        next[0] = 0.5 * zero.value();
        for (std::size_t r = 0; r + 1 < cur.size(); ++r) next[r + 1] = 0.5 * cur[r];
        cur.swap(next);
    }
    return sum_of(cur);
}

std::vector<double> longest_run_class_probs(std::int64_t m, std::span<const std::int64_t> boundaries) {
    require(!boundaries.empty(), "longest_run_class_probs: no boundaries");
    for (std::size_t i = 1; i < boundaries.size(); ++i) {
        require(boundaries[i] > boundaries[i - 1], "longest_run_class_probs: boundaries must increase");
    }
    std::vector<double> out;
    double prev = 0.0;
    for (std::int64_t b : boundaries) {
        const double cdf = prob_longest_run_at_most(m, b);
        out.push_back(cdf - prev);
        prev = cdf;
    }
    out.push_back(1.0 - prev);
    return out;
}

std::vector<std::int64_t> longest_run_boundaries(std::int64_t m) {
    switch (m) {
        case 8: return {1, 2, 3};
        case 128: return {4, 5, 6, 7, 8};
        case 10000: return {10, 11, 12, 13, 14, 15};
        default: throw std::invalid_argument("longest_run: no class layout for m = " + std::to_string(m));
    }
}

TestSpec longest_run_spec(std::int64_t n, std::int64_t m) {
    const auto bounds = longest_run_boundaries(m);
    TestSpec spec;
    spec.name = "longest";
    spec.block_size = m;
    spec.blocks = n / m;
    spec.class_probs = longest_run_class_probs(m, bounds);
    spec.null_probs = spec.class_probs;
    spec.df = static_cast<int>(bounds.size());
    spec.validate();
    return spec;
}

std::int64_t longest_run_of_ones(const BitBlock& block, std::size_t begin, std::size_t length) {
    std::int64_t best = 0;
    std::int64_t run = 0;  // run of ones reaching the end of the previous chunk
    std::size_t pos = begin;
    const std::size_t end = begin + length;
    while (pos < end) {
        const auto take = static_cast<unsigned>(std::min<std::size_t>(64, end - pos));
        std::uint64_t w = block.word_at(pos);
        if (take < 64) w &= ~std::uint64_t{0} << (64 - take);
        pos += take;
        const auto lead = static_cast<unsigned>(std::countl_one(w));
        if (lead >= take) {
            run += take;
            best = std::max(best, run);
            continue;
        }
        best = std::max(best, run + lead);
        int inner = 0;
        for (std::uint64_t x = w; x != 0; x &= x << 1) ++inner;
        best = std::max<std::int64_t>(best, inner);
        run = std::countr_one(w >> (64 - take));
    }
    return best;
}

ClassCounts longest_run_counts(const BitBlock& block, std::int64_t m) {
    const auto bounds = longest_run_boundaries(m);
    const auto nb = static_cast<std::int64_t>(block.size()) / m;
    ClassCounts counts(bounds.size() + 1, 0);
    for (std::int64_t b = 0; b < nb; ++b) {
        const auto run = longest_run_of_ones(block, static_cast<std::size_t>(b * m), static_cast<std::size_t>(m));
        const auto cls = std::lower_bound(bounds.begin(), bounds.end(), run) - bounds.begin();
        ++counts[static_cast<std::size_t>(cls)];
    }
    return counts;
}

double longest_run_test(const BitBlock& block, std::int64_t m) {
    const auto spec = longest_run_spec(static_cast<std::int64_t>(block.size()), m);
    return chi2_class_p_value(longest_run_counts(block, m), spec);
}

// ---------------------------------------------------------------------------
// Overlapping Template Matching

std::vector<double> overlapping_template_published_probs() {
    return {0.364091, 0.185659, 0.139381, 0.100571, 0.070432, 0.139865};
}

std::vector<double> overlapping_template_exact_probs(std::int64_t m, int template_length, int max_class) {
    require(m >= template_length && template_length >= 1 && max_class >= 1,
            "overlapping_template_exact_probs: invalid parameters");
    // state (trailing ones capped at template_length - 1, matches capped at max_class)
    const int runs = template_length;
    const int classes = max_class + 1;
    std::vector<double> cur(static_cast<std::size_t>(runs * classes), 0.0), next(cur.size());
    cur[0] = 1.0;
    for (std::int64_t step = 0; step < m; ++step) {
        std::fill(next.begin(), next.end(), 0.0);
        for (int r = 0; r < runs; ++r) {
            for (int c = 0; c < classes; ++c) {
                const double p = 0.5 * cur[static_cast<std::size_t>(r * classes + c)];
                if (p == 0.0) continue;
                next[static_cast<std::size_t>(c)] += p;  // a zero resets the run
                if (r + 1 < runs) {
                    next[static_cast<std::size_t>((r + 1) * classes + c)] += p;
                } else {
                    next[static_cast<std::size_t>(r * classes + std::min(c + 1, max_class))] += p;
                }
            }
        }
        cur.swap(next);
    }
    std::vector<double> out(static_cast<std::size_t>(classes));
    for (int c = 0; c < classes; ++c) {
        CompensatedSum s;
        for (int r = 0; r < runs; ++r) s.add(cur[static_cast<std::size_t>(r * classes + c)]);
        out[static_cast<std::size_t>(c)] = s.value();
    }
    return out;
}

TestSpec overlapping_template_spec(std::int64_t n) {
    TestSpec spec;
    spec.name = "overlap";
    spec.block_size = kOverlapBlockSize;
    spec.blocks = n / kOverlapBlockSize;
    spec.class_probs = overlapping_template_published_probs();
    spec.null_probs = overlapping_template_exact_probs(kOverlapBlockSize, kOverlapTemplateLength, 5);
    spec.df = 5;
    spec.validate();
    return spec;
}

std::int64_t count_template_matches(const BitBlock& block, std::size_t begin, std::size_t length, int template_length) {
    std::int64_t matches = 0;
    std::int64_t run = 0;
    for (std::size_t i = begin; i < begin + length; ++i) {
        if (block[i]) {
            if (++run >= template_length) ++matches;
        } else {
            run = 0;
        }
    }
    return matches;
}

ClassCounts overlapping_template_counts(const BitBlock& block) {
    const auto nb = static_cast<std::int64_t>(block.size()) / kOverlapBlockSize;
    ClassCounts counts(6, 0);
    for (std::int64_t b = 0; b < nb; ++b) {
        const auto w = count_template_matches(block, static_cast<std::size_t>(b * kOverlapBlockSize),
                                              static_cast<std::size_t>(kOverlapBlockSize), kOverlapTemplateLength);
        ++counts[static_cast<std::size_t>(std::min<std::int64_t>(w, 5))];
    }
    return counts;
}

double overlapping_template_test(const BitBlock& block) {
    const auto spec = overlapping_template_spec(static_cast<std::int64_t>(block.size()));
    return chi2_class_p_value(overlapping_template_counts(block), spec);
}

// ---------------------------------------------------------------------------
// Linear Complexity

std::int64_t berlekamp_massey(const BitBlock& block, std::size_t begin, std::size_t length) {
    if (length == 0) return 0;
    const std::size_t n = length;
    const std::size_t words = n / 64 + 2;
    // r_j = s_{n-1-j}, least-significant-bit-first, so that sum_i c_i s_{N-i}
    // is a word-wise AND against r starting at n-1-N.
    std::vector<std::uint64_t> r(words + 1, 0);
    for (std::size_t j = 0; j < n; ++j) {
        if (block[begin + n - 1 - j]) r[j >> 6] |= std::uint64_t{1} << (j & 63);
    }
    auto window = [&](std::size_t pos) {
        const std::size_t w = pos >> 6;
        const unsigned s = pos & 63;
        std::uint64_t v = r[w] >> s;
        if (s != 0) v |= r[w + 1] << (64 - s);
        return v;
    };

    std::vector<std::uint64_t> c(words, 0), b(words, 0), t(words, 0);
    c[0] = b[0] = 1;
    std::size_t c_words = 1, b_words = 1;
    std::int64_t L = 0;
    std::size_t shift = 1;
    for (std::size_t N = 0; N < n; ++N) {
        const std::size_t offset = n - 1 - N;
        std::uint64_t acc = 0;
        const std::size_t last = static_cast<std::size_t>(L) >> 6;
        for (std::size_t w = 0; w <= last && w < c_words; ++w) {
            std::uint64_t cw = c[w];
            if (w == last && ((static_cast<std::size_t>(L) + 1) & 63) != 0) {
                cw &= (std::uint64_t{1} << ((static_cast<std::size_t>(L) + 1) & 63)) - 1;
            }
            acc ^= cw & window(offset + 64 * w);
        }
        if ((std::popcount(acc) & 1) == 0) {
            ++shift;
            continue;
        }
        const bool grow = 2 * L <= static_cast<std::int64_t>(N);
        if (grow) std::copy(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(c_words), t.begin());
        const std::size_t t_words = c_words;
        const std::size_t ws = shift >> 6;
        const unsigned bs = shift & 63;
        for (std::size_t w = 0; w < b_words && w + ws < words; ++w) {
            c[w + ws] ^= b[w] << bs;
            if (bs != 0 && w + ws + 1 < words) c[w + ws + 1] ^= b[w] >> (64 - bs);
        }
        c_words = std::min(words, std::max(c_words, b_words + ws + 1));
        if (grow) {
            L = static_cast<std::int64_t>(N) + 1 - L;
            std::fill(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(b_words), 0);
            std::copy(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(t_words), b.begin());
            b_words = t_words;
            shift = 1;
        } else {
            ++shift;
        }
    }
    return L;
}

std::vector<double> linear_complexity_class_probs() {
    return {0.010417, 0.03125, 0.125, 0.5, 0.25, 0.0625, 0.020833};
}

TestSpec linear_complexity_spec(std::int64_t n, std::int64_t m) {
    require(m >= 500 && m <= 5000, "linear_complexity: m must lie in [500, 5000]");
    TestSpec spec;
    spec.name = "linear";
    spec.block_size = m;
    spec.blocks = n / m;
    spec.class_probs = linear_complexity_class_probs();
    spec.null_probs = spec.class_probs;
    spec.df = 6;
    spec.validate();
    return spec;
}

int linear_complexity_class(std::int64_t complexity, std::int64_t m) {
    const double md = static_cast<double>(m);
    const double sign_next = (m + 1) % 2 == 0 ? 1.0 : -1.0;  // (-1)^{m+1}
    const double mean = md / 2.0 + (9.0 + sign_next) / 36.0 - (md / 3.0 + 2.0 / 9.0) / std::pow(2.0, md);
    const double sign = m % 2 == 0 ? 1.0 : -1.0;
    const double t = sign * (static_cast<double>(complexity) - mean) + 2.0 / 9.0;
    if (t <= -2.5) return 0;
    if (t <= -1.5) return 1;
    if (t <= -0.5) return 2;
    if (t <= 0.5) return 3;
    if (t <= 1.5) return 4;
    if (t <= 2.5) return 5;
    return 6;
}

ClassCounts linear_complexity_counts(const BitBlock& block, std::int64_t m) {
    const auto nb = static_cast<std::int64_t>(block.size()) / m;
    ClassCounts counts(7, 0);
    for (std::int64_t b = 0; b < nb; ++b) {
        const auto L = berlekamp_massey(block, static_cast<std::size_t>(b * m), static_cast<std::size_t>(m));
        ++counts[static_cast<std::size_t>(linear_complexity_class(L, m))];
    }
    return counts;
}

double linear_complexity_test(const BitBlock& block, std::int64_t m) {
    const auto spec = linear_complexity_spec(static_cast<std::int64_t>(block.size()), m);
    return chi2_class_p_value(linear_complexity_counts(block, m), spec);
}

// ---------------------------------------------------------------------------
// Random Excursions

std::vector<double> excursion_class_probs(int x) {
    require(x != 0 && std::abs(x) <= 4, "excursion_class_probs: state must be in +-1..4");
    const double a = 1.0 / (2.0 * std::abs(x));
    std::vector<double> pi(6);
    pi[0] = 1.0 - a;
    for (int j = 1; j <= 4; ++j) {
        pi[static_cast<std::size_t>(j)] = 1.0 / (4.0 * x * x) * std::pow(1.0 - a, j - 1);
    }
    pi[5] = a * std::pow(1.0 - a, 4);
    return pi;
}

TestSpec random_excursion_spec(int x) {
    TestSpec spec;
    spec.name = "excursion" + std::string(x < 0 ? "-" : "+") + std::to_string(std::abs(x));
    spec.block_size = 1;  // cycles, not fixed-length blocks
    spec.blocks = kExcursionCycles;
    spec.class_probs = excursion_class_probs(x);
    spec.null_probs = spec.class_probs;
    spec.df = 5;
    spec.validate();
    return spec;
}

std::optional<ExcursionResult> random_excursions_test(const BitBlock& block) {
    ExcursionResult out;
    for (auto& c : out.counts) c.assign(6, 0);
    std::array<int, 9> visits{};  // index x + 4
    std::int64_t s = 0;
    int cycles = 0;
    for (std::size_t i = 0; i < block.size(); ++i) {
        s += block[i] ? 1 : -1;
        if (s != 0) {
            if (s >= -4 && s <= 4) ++visits[static_cast<std::size_t>(s + 4)];
            continue;
        }
        for (std::size_t k = 0; k < kExcursionStates.size(); ++k) {
            const int v = visits[static_cast<std::size_t>(kExcursionStates[k] + 4)];
            ++out.counts[k][static_cast<std::size_t>(std::min(v, 5))];
        }
        visits.fill(0);
        if (++cycles == kExcursionCycles) {
            out.consumed_bits = i + 1;
            break;
        }
    }
    if (cycles < kExcursionCycles) return std::nullopt;
    for (std::size_t k = 0; k < kExcursionStates.size(); ++k) {
        out.p_values[k] = chi2_class_p_value(out.counts[k], random_excursion_spec(kExcursionStates[k]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Discrete Fourier Transform

std::string_view to_string(DftVariance v) {
    switch (v) {
        case DftVariance::Sigma0: return "sigma0";
        case DftVariance::Sigma1: return "sigma1";
        case DftVariance::Sigma2: return "sigma2";
    }
    return "?";
}

DftVariance parse_dft_variance(std::string_view name) {
    if (name == "sigma0" || name == "0") return DftVariance::Sigma0;
    if (name == "sigma1" || name == "1") return DftVariance::Sigma1;
    if (name == "sigma2" || name == "2") return DftVariance::Sigma2;
    throw std::invalid_argument("unknown DFT variance variant: " + std::string(name));
}

double dft_variance(std::int64_t n, DftVariance variant) {
    const double base = 0.05 * 0.95 * static_cast<double>(n);
    switch (variant) {
        case DftVariance::Sigma0: return base / 2.0;
        case DftVariance::Sigma1: return base / 4.0;
        case DftVariance::Sigma2: return base / 3.8;
    }
    return base;
}

double dft_p_value(std::int64_t count, std::int64_t n, DftVariance variant) {
    const double mu = 0.95 * static_cast<double>(n) / 2.0;
    const double d = (static_cast<double>(count) - mu) / std::sqrt(dft_variance(n, variant));
    return erfc(std::abs(d) / std::sqrt(2.0));
}

namespace {

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// One plan and buffer pair per thread and length; the planner itself is not
// thread-safe, execution is.
class FftWorkspace {
public:
    explicit FftWorkspace(std::size_t n) : n_(n) {
        in_ = fftw_alloc_real(n);
        out_ = fftw_alloc_complex(n / 2 + 1);
        if (in_ == nullptr || out_ == nullptr) throw std::bad_alloc();
        std::lock_guard lock(fftw_planner_mutex());
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
    }
    ~FftWorkspace() {
        {
            std::lock_guard lock(fftw_planner_mutex());
            fftw_destroy_plan(plan_);
        }
        fftw_free(in_);
        fftw_free(out_);
    }
    FftWorkspace(const FftWorkspace&) = delete;
    FftWorkspace& operator=(const FftWorkspace&) = delete;

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    double* input() noexcept { return in_; }
    const fftw_complex* run() {
        fftw_execute(plan_);
        return out_;
    }

private:
    std::size_t n_;
    double* in_ = nullptr;
    fftw_complex* out_ = nullptr;
    fftw_plan plan_ = nullptr;
};

FftWorkspace& workspace_for(std::size_t n) {
    thread_local std::unique_ptr<FftWorkspace> ws;
    if (!ws || ws->size() != n) {
        ws.reset();
        ws = std::make_unique<FftWorkspace>(n);
    }
    return *ws;
}

const fftw_complex* transform(const BitBlock& block) {
    if (block.size() == 0 || block.size() % 2 != 0) {
        throw std::invalid_argument("dft_test: block length must be even and positive");
    }
    auto& ws = workspace_for(block.size());
    double* in = ws.input();
    for (std::size_t i = 0; i < block.size(); ++i) in[i] = block[i] ? 1.0 : -1.0;
    return ws.run();
}

}  // namespace

std::vector<double> dft_magnitudes(const BitBlock& block) {
    const fftw_complex* f = transform(block);
    std::vector<double> mags(block.size() / 2);
    for (std::size_t i = 0; i < mags.size(); ++i) {
        mags[i] = std::sqrt(f[i][0] * f[i][0] + f[i][1] * f[i][1]);
    }
    return mags;
}

std::int64_t dft_count_below_threshold(const BitBlock& block) {
    const fftw_complex* f = transform(block);
    const double h = std::sqrt(2.995732274 * static_cast<double>(block.size()));
    std::int64_t count = 0;
    for (std::size_t i = 0; i < block.size() / 2; ++i) {
        if (std::sqrt(f[i][0] * f[i][0] + f[i][1] * f[i][1]) < h) ++count;
    }
    return count;
}

double dft_test(const BitBlock& block, DftVariance variant) {
    const auto count = dft_count_below_threshold(block);
    return dft_p_value(count, static_cast<std::int64_t>(block.size()), variant);
}

}  // namespace nistlimit
