#include "nistlimit/discrepancy.hpp"
#include "nistlimit/mcdist.hpp"
#include "nistlimit/numerics.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace nistlimit;

namespace {

double binomial_pmf(std::int64_t n, std::int64_t k, double p) {
    return std::exp(log_gamma(n + 1.0) - log_gamma(k + 1.0) - log_gamma(n - k + 1.0) + k * std::log(p) +
                    (n - k) * std::log1p(-p));
}

// Chi-squared GOF p-value of observed counts against expected masses,
// pooling adjacent cells until each expects at least 20.
double gof_p(const std::vector<double>& observed, const std::vector<double>& expected) {
    double chi = 0.0;
    int cells = 0;
    double o = 0.0;
    double e = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        o += observed[i];
        e += expected[i];
        if (e >= 20.0) {
            chi += (o - e) * (o - e) / e;
            ++cells;
            o = e = 0.0;
        }
    }
    if (e > 0.0) {
        chi += (o - e) * (o - e) / e;
        ++cells;
    }
    return chi2_sf(cells - 1, chi);
}

void check_binomial(std::int64_t n, double p, std::uint64_t seed) {
    auto src = BitSource::generator(GeneratorKind::SplitStream, seed_from_u64(seed));
    const int draws = 100000;
    std::vector<double> obs(static_cast<std::size_t>(n) + 1, 0.0);
    for (int i = 0; i < draws; ++i) {
        const auto x = binomial_sample(n, p, src);
        REQUIRE(x >= 0);
        REQUIRE(x <= n);
        obs[static_cast<std::size_t>(x)] += 1.0;
    }
    std::vector<double> exp(obs.size());
    for (std::int64_t k = 0; k <= n; ++k) exp[static_cast<std::size_t>(k)] = draws * binomial_pmf(n, k, p);
    CAPTURE(n);
    CAPTURE(p);
    CHECK(gof_p(obs, exp) > 1e-4);
}

}  // namespace

TEST_CASE("binomial sampler matches the pmf") {
    check_binomial(20, 0.3, 11);     // inversion
    check_binomial(60, 0.05, 12);    // inversion
    check_binomial(128, 0.5, 13);    // bit counting
    check_binomial(1000, 0.3, 14);   // BTRD
    check_binomial(200, 0.93, 15);   // BTRD on 1 - p
    check_binomial(5000, 0.5, 16);   // BTRD at p = 1/2 beyond the bit path
    check_binomial(40, 0.26, 17);    // BTRD, n p just above 10
}

TEST_CASE("binomial sampler moments at large n") {
    auto src = BitSource::generator(GeneratorKind::SplitStream, seed_from_u64(21));
    const std::int64_t n = 1'000'000'000;
    const double p = 0.37;
    const int draws = 20000;
    double sum = 0.0;
    double sq = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double x = static_cast<double>(binomial_sample(n, p, src));
        sum += x;
        sq += x * x;
    }
    const double mean = sum / draws;
    const double var = sq / draws - mean * mean;
    const double true_var = n * p * (1 - p);
    CHECK(std::abs(mean - n * p) < 5.0 * std::sqrt(true_var / draws));
    CHECK(std::abs(var / true_var - 1.0) < 5.0 * std::sqrt(2.0 / draws));
}

TEST_CASE("binomial sampler edge cases") {
    auto src = BitSource::generator(GeneratorKind::SplitStream, seed_from_u64(3));
    CHECK(binomial_sample(0, 0.4, src) == 0);
    CHECK(binomial_sample(10, 0.0, src) == 0);
    CHECK(binomial_sample(10, 1.0, src) == 10);
    CHECK_THROWS_AS(binomial_sample(-1, 0.5, src), std::invalid_argument);
    CHECK_THROWS_AS(binomial_sample(5, 1.5, src), std::invalid_argument);
}

TEST_CASE("multinomial with a point mass") {
    auto src = BitSource::generator(GeneratorKind::SplitStream, seed_from_u64(4));
    const std::vector<double> probs = {1.0, 0.0, 0.0, 0.0};
    const auto x = multinomial_sample(17, probs, src);
    CHECK(x == ClassCounts{17, 0, 0, 0});
    CHECK_THROWS_AS(multinomial_sample(5, std::vector<double>{0.5, 0.4}, src), std::invalid_argument);
}

TEST_CASE("multinomial cell means") {
    auto src = BitSource::generator(GeneratorKind::SplitStream, seed_from_u64(5));
    const std::vector<double> probs(6, 1.0 / 6.0);
    const int draws = 1'000'000;
    std::vector<double> sum(6, 0.0);
    for (int i = 0; i < draws; ++i) {
        const auto x = multinomial_sample(6, probs, src);
        for (int j = 0; j < 6; ++j) sum[j] += static_cast<double>(x[j]);
    }
    // Each cell is Binom(6, 1/6) per draw.
    const double sd = std::sqrt(draws * 6.0 * (1.0 / 6.0) * (5.0 / 6.0));
    for (int j = 0; j < 6; ++j) {
        CHECK(std::abs(sum[j] - draws) < 5.0 * sd);
    }
}

TEST_CASE("multinomial goodness of fit on a small case") {
    auto src = BitSource::generator(GeneratorKind::SplitStream, seed_from_u64(6));
    const std::vector<double> probs = {0.2, 0.3, 0.5};
    const std::int64_t n = 5;
    std::vector<double> obs(36, 0.0);
    std::vector<double> expv(36, 0.0);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        const auto x = multinomial_sample(n, probs, src);
        REQUIRE(x[0] + x[1] + x[2] == n);
        obs[static_cast<std::size_t>(x[0] * 6 + x[1])] += 1.0;
    }
    for (std::int64_t a = 0; a <= n; ++a) {
        for (std::int64_t b = 0; a + b <= n; ++b) {
            const std::int64_t c[3] = {a, b, n - a - b};
            expv[static_cast<std::size_t>(a * 6 + b)] = draws * std::exp(log_multinomial_pmf(n, c, probs));
        }
    }
    CHECK(gof_p(obs, expv) > 1e-4);
}

TEST_CASE("class-count Monte Carlo agrees with enumeration") {
    const TestSpec spec = longest_run_spec(128 * 20, 128);
    const auto exact = enumerate_q(spec);
    MCOptions opt;
    opt.seed = seed_from_u64(77);
    const auto t = mc_class_q(spec, 200000, opt);
    REQUIRE(t.final.stderr_.has_value());
    for (std::size_t i = 0; i < exact.q.size(); ++i) {
        CAPTURE(i);
        CHECK(std::abs(t.final.q[i] - exact.q[i]) <= 5.0 * (*t.final.stderr_)[i]);
    }
    double s = 0.0;
    for (double q : t.final.q) s += q;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(t.checkpoints.size() == 100);
    CHECK(t.checkpoints.back().samples == 200000);
    CHECK(t.delta_bias == doctest::Approx(9.0 / 200000));
    CHECK(t.delta_sd > 0.0);
}

TEST_CASE("Monte Carlo traces are reproducible and thread independent") {
    const TestSpec spec = longest_run_spec(8 * 16, 8);
    MCOptions a;
    a.seed = seed_from_u64(9);
    a.checkpoint_every = 700;
    MCOptions b = a;
    b.threads = 3;
    const auto t1 = mc_class_q(spec, 5000, a);
    const auto t2 = mc_class_q(spec, 5000, a);
    const auto t3 = mc_class_q(spec, 5000, b);
    CHECK(t1.counts == t2.counts);
    CHECK(t1.counts == t3.counts);
    REQUIRE(t1.checkpoints.size() == t3.checkpoints.size());
    for (std::size_t c = 0; c < t1.checkpoints.size(); ++c) {
        CHECK(t1.checkpoints[c].q == t3.checkpoints[c].q);
        CHECK(t1.checkpoints[c].delta == t3.checkpoints[c].delta);
    }
    CHECK(t1.delta_sd == t3.delta_sd);
    MCOptions c = a;
    c.seed = seed_from_u64(10);
    CHECK(mc_class_q(spec, 5000, c).counts != t1.counts);
}

TEST_CASE("single-sample trace is an indicator") {
    const auto src = BitSource::generator(GeneratorKind::Mt19937, seed_from_u64(2));
    MCOptions opt;
    opt.streams = 1;
    const auto t = mc_sequence_q("dft", 1024, 1, src, [](const BitBlock& b) { return dft_test(b, DftVariance::Sigma2); },
                                 opt);
    int ones = 0;
    for (double q : t.final.q) {
        CHECK((q == 0.0 || q == 1.0));
        ones += q == 1.0;
    }
    CHECK(ones == 1);
    CHECK_THROWS_AS(mc_sequence_q("dft", 1024, 0, src, [](const BitBlock&) { return 0.5; }, opt),
                    std::invalid_argument);
}

TEST_CASE("sequence Monte Carlo propagates file exhaustion") {
    auto gen = BitSource::generator(GeneratorKind::Mt19937, seed_from_u64(2));
    const auto bits = gen.next_block(4096);
    const auto src = BitSource::from_bits(bits);
    MCOptions opt;
    opt.streams = 2;
    CHECK_THROWS_AS(mc_sequence_q("frequency", 1024, 5, src, [](const BitBlock& b) { return frequency_test(b); }, opt),
                    SourceExhausted);
    const auto ok = mc_sequence_q("frequency", 1024, 4, src, [](const BitBlock& b) { return frequency_test(b); }, opt);
    CHECK(ok.samples == 4);
}

TEST_CASE("block frequency Monte Carlo on the 3x3 outcome table") {
    // m = 2, n_b = 2: X_i in {0, 1, 2} with masses 1/4, 1/2, 1/4,
    // T = sum (2 X_i - 2)^2 / 2 and p = igamc(1, T/2).
    std::vector<double> exact(10, 0.0);
    const double w[3] = {0.25, 0.5, 0.25};
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            const double t = ((2.0 * a - 2) * (2.0 * a - 2) + (2.0 * b - 2) * (2.0 * b - 2)) / 2.0;
            exact[static_cast<std::size_t>(interval_index(igamc(1.0, t / 2.0), 9))] += w[a] * w[b];
        }
    }
    MCOptions opt;
    opt.seed = seed_from_u64(31);
    const auto t = mc_block_frequency_q(4, 2, 100000, opt);
    for (std::size_t i = 0; i < 10; ++i) {
        CAPTURE(i);
        const double se = std::sqrt(exact[i] * (1 - exact[i]) / 100000);
        CHECK(std::abs(t.final.q[i] - exact[i]) <= 5.0 * se + 1e-15);
    }
}

TEST_CASE("block frequency Monte Carlo at n = 10^6, m = 128") {
    // tests/oracles/blockfreq_oracle.py (FFT power of the one-block law)
    const double exact[] = {0.0991241560432, 0.0999322901325, 0.100293441113, 0.100281748589, 0.100418453036,
                            0.100387925868,  0.100267573604,  0.100237197669, 0.0999561179979, 0.099101095946};
    constexpr std::uint64_t M = 100000;
    MCOptions opt;
    opt.seed = seed_from_u64(77);
    const auto t = mc_block_frequency_q(1'000'000, 128, M, opt);
    double sum_z2 = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
        CAPTURE(i);
        const double z = (t.final.q[i] - exact[i]) / std::sqrt(exact[i] * (1 - exact[i]) / M);
        CHECK(std::abs(z) <= 4.5);
        sum_z2 += z * z;
    }
    CHECK(sum_z2 <= chi2_isf(9, 1e-4));
}

TEST_CASE("stderr halves when M quadruples") {
    MCOptions opt;
    opt.seed = seed_from_u64(41);
    const auto a = mc_block_frequency_q(128 * 40, 128, 10000, opt);
    const auto b = mc_block_frequency_q(128 * 40, 128, 40000, opt);
    for (std::size_t i = 0; i < 10; ++i) {
        const double ratio = (*a.final.stderr_)[i] / (*b.final.stderr_)[i];
        CHECK(ratio == doctest::Approx(2.0).epsilon(0.2));
    }
}

TEST_CASE("plug-in delta bias is close to nu / M") {
    const std::uint64_t M = 100000;
    double mean = 0.0;
    const int runs = 40;
    for (int r = 0; r < runs; ++r) {
        MCOptions opt;
        opt.seed = seed_from_u64(1000 + r);
        const BitSource parent = BitSource::generator(opt.generator, opt.seed);
        auto factory = [] { return PValueSampler([](BitSource& s) { return s.next_uniform(); }); };
        mean += run_monte_carlo("uniform", M, parent.jump_streams(opt.streams), factory, opt).delta;
    }
    mean /= runs;
    CHECK(mean == doctest::Approx(9.0 / M).epsilon(0.2));
}

TEST_CASE("trace CSV layout") {
    const TestSpec spec = longest_run_spec(8 * 16, 8);
    MCOptions opt;
    opt.checkpoint_every = 250;
    const auto t = mc_class_q(spec, 1000, opt);
    std::ostringstream out;
    write_trace_csv(t, out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "M,delta,u,q0,q1,q2,q3,q4,q5,q6,q7,q8,q9");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 4);
}

TEST_CASE("DFT model gap at small n") {
    // The binomial model assumes independent |F_i|; the simulated
    // distribution differs. Only record the gap.
    const auto model = binomial_scan_q(BinomialModel::Dft, 64, DftVariance::Sigma0);
    const auto src = BitSource::generator(GeneratorKind::Mt19937, seed_from_u64(8));
    const auto sim = mc_sequence_q("dft", 64, 100000, src,
                                   [](const BitBlock& b) { return dft_test(b, DftVariance::Sigma0); });
    double gap = 0.0;
    for (std::size_t i = 0; i < 10; ++i) gap = std::max(gap, std::abs(model.q[i] - sim.final.q[i]));
    MESSAGE("max |q_model - q_sim| at n = 64: " << gap);
    CHECK(gap >= 0.0);
}
