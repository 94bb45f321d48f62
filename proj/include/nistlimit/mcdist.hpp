#pragma once

// Monte Carlo estimates q'_i of the category distribution, with convergence
// traces. Work is split over independent streams: sample j is drawn from
// stream j mod S and per-stream counts are merged in stream order, so a
// trace depends on (seed, streams, M, checkpoint_every) and not on threads.

#include "nistlimit/bitgen.hpp"
#include "nistlimit/exactdist.hpp"
#include "nistlimit/onelevel.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace nistlimit {

/// One draw from Binom(n, p). Inversion when min(p, 1-p) n < 10, BTRD
/// otherwise; p = 1/2 with n <= 4096 counts the ones in n source bits.
std::int64_t binomial_sample(std::int64_t n, double p, BitSource& source);

/// One draw from Multi(n; probs) as a chain of conditional binomials.
/// Throws std::invalid_argument when probs does not sum to 1 within 1e-12.
ClassCounts multinomial_sample(std::int64_t n, std::span<const double> probs, BitSource& source);

struct MCCheckpoint {
    std::uint64_t samples = 0;
    double delta = 0.0;
    double u = 0.0;
    std::vector<double> q;
};

struct MCTrace {
    std::string test;
    std::vector<MCCheckpoint> checkpoints;
    /// q' with stderr_i = sqrt(q'_i (1 - q'_i) / M).
    CategoryDistribution final;
    std::vector<std::uint64_t> counts;
    std::uint64_t samples = 0;
    std::size_t streams = 0;
    /// Against the uniform null.
    double delta = 0.0;
    double u = 0.0;
    /// Jackknife over streams; zero with a single stream.
    double delta_sd = 0.0;
    double u_sd = 0.0;
    /// nu / M, the expected plug-in excess of delta at q = p.
    double delta_bias = 0.0;
    std::string source;
};

struct MCOptions {
    int nu = 9;
    std::size_t streams = 10;
    /// 0 selects M / 100 (at least 1).
    std::uint64_t checkpoint_every = 0;
    unsigned threads = 1;
    GeneratorKind generator = GeneratorKind::SplitStream;
    Seed seed = seed_from_u64(1);
};

/// Draws one sample from the stream and returns its p-value.
using PValueSampler = std::function<double(BitSource&)>;

/// Shared driver: `make_sampler` is called once per stream so samplers may
/// keep scratch state.
MCTrace run_monte_carlo(const std::string& test, std::uint64_t M, std::vector<BitSource> streams,
                        const std::function<PValueSampler()>& make_sampler, const MCOptions& options);

/// Multinomial class counts under spec.null_probs, scored with the test's
/// statistic and chi2_sf(k, T).
MCTrace mc_class_q(const TestSpec& spec, std::uint64_t M, const MCOptions& options = {});

/// n_b = n/m draws of Binom(m, 1/2) per sample, p = igamc(n_b/2, T/2).
MCTrace mc_block_frequency_q(std::int64_t n, std::int64_t m, std::uint64_t M, const MCOptions& options = {});

/// Sequence-level simulation: M disjoint n-bit blocks from `source`
/// (split into options.streams streams) through a one-level test.
MCTrace mc_sequence_q(const std::string& test, std::int64_t n, std::uint64_t M, const BitSource& source,
                      const std::function<double(const BitBlock&)>& one_level, const MCOptions& options = {});

/// Columns M, delta, u, q0..q_nu.
void write_trace_csv(const MCTrace& trace, std::ostream& out);

}  // namespace nistlimit
