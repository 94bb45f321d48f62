#pragma once

// Exact distribution {q_i} of approximated p-values over the intervals
// I_i = [i/(nu+1), (i+1)/(nu+1)), I_nu closed on the right.
//
// Multinomial-class tests are handled by enumerating every composition of
// n_b into k+1 classes; Frequency and DFT reduce to a scan over a binomial.

#include "nistlimit/onelevel.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace nistlimit {

enum class Provenance { Exact, MonteCarlo };

std::string_view to_string(Provenance p);

struct CategoryDistribution {
    std::vector<double> q;
    int nu = 9;
    Provenance provenance = Provenance::Exact;
    std::optional<std::vector<double>> stderr_;
    double mass_accounted = 0.0;
};

/// Index of the interval containing p; boundaries belong to the upper
/// interval and p = 1 maps to nu.
int interval_index(double p, int nu);

/// Walks S = {x : sum x_i = n_b} in colexicographic order, x_k being the
/// most significant coordinate: (n_b,0,..,0), (n_b-1,1,0,..), ..., (0,..,0,n_b).
class CompositionCursor {
public:
    CompositionCursor(int k, std::int64_t n_b);

    [[nodiscard]] const ClassCounts& current() const noexcept { return x_; }
    [[nodiscard]] bool exhausted() const noexcept { return exhausted_; }
    void next();

private:
    ClassCounts x_;
    bool exhausted_ = false;
};

/// C(n_b + k, k), saturating at UINT64_MAX.
std::uint64_t estimate_workload(const TestSpec& spec);
std::uint64_t binomial_saturating(std::uint64_t n, std::uint64_t k);

class BudgetExceeded : public std::runtime_error {
public:
    BudgetExceeded(std::uint64_t estimated, std::uint64_t budget);
    std::uint64_t estimated;
    std::uint64_t budget;
};

/// Raised when a run stops early on request; the checkpoint is on disk.
class EnumerationInterrupted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CheckpointMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The checkpoint file could not be read or written.
class CheckpointIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EnumerationProgress {
    std::uint64_t compositions_done = 0;
    std::uint64_t compositions_total = 0;
    std::size_t slices_done = 0;
    std::size_t slices_total = 0;
};

struct EnumerationOptions {
    int nu = 9;
    std::size_t partitions = 1;
    unsigned threads = 1;
    std::uint64_t budget = 10'000'000'000ull;
    /// Enables resumable runs; an existing compatible file is resumed.
    std::optional<std::filesystem::path> checkpoint;
    std::uint64_t checkpoint_every = 100'000'000ull;
    /// Stop (with EnumerationInterrupted) after this many slices complete
    /// in this invocation.
    std::optional<std::size_t> stop_after_slices;
    std::function<void(const EnumerationProgress&)> progress;
};

/// Exact q for a multinomial-class test. Per composition: T as the test
/// computes it, p = chi2_sf(k, T), pmf under spec.null_probs added into bin
/// interval_index(p). Bins are accumulated per cell (the two leading
/// coordinates) and cells are folded in fixed order, so the result does not
/// depend on partitions or threads.
CategoryDistribution enumerate_q(const TestSpec& spec, const EnumerationOptions& options = {});

/// Reference implementation: cursor walk calling chi2_class_statistic,
/// chi2_sf and log_multinomial_pmf for every composition.
CategoryDistribution enumerate_q_naive(const TestSpec& spec, int nu = 9);

enum class BinomialModel { Frequency, Dft };

/// Frequency: j ~ Binom(n, 1/2) ones, p = erfc(|2j-n|/sqrt(2n)).
/// DFT: j ~ Binom(n/2, 0.95) coefficients below threshold, p from dft_p_value.
CategoryDistribution binomial_scan_q(BinomialModel model, std::int64_t n,
                                     DftVariance variant = DftVariance::Sigma0, int nu = 9);

}  // namespace nistlimit
