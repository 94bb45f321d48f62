#pragma once

// One-level tests: each maps an n-bit block to one approximated p-value
// (eight for Random Excursions) the way SP800-22 computes it.

#include "nistlimit/bitgen.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nistlimit {

using ClassCounts = std::vector<std::int64_t>;

/// Description of a multinomial-class one-level test.
///
/// `class_probs` are the probabilities the test statistic uses. `null_probs`
/// is the actual distribution of the class counts under the ideal-bit null;
/// it equals `class_probs` except where the suite's published constants are
/// rounded (Overlapping Template), in which case exact values are used.
struct TestSpec {
    std::string name;
    std::int64_t block_size = 0;  // m
    std::int64_t blocks = 0;      // n_b
    std::vector<double> class_probs;
    std::vector<double> null_probs;
    int df = 0;                   // k

    [[nodiscard]] int categories() const noexcept { return df + 1; }
    /// Throws std::invalid_argument when an invariant does not hold.
    void validate() const;
};

/// T = sum_i (X_i - n_b pi_i)^2 / (n_b pi_i), summed in class order.
double chi2_class_statistic(std::span<const std::int64_t> counts, const TestSpec& spec);
/// chi2_sf(k, T) of the counts.
double chi2_class_p_value(std::span<const std::int64_t> counts, const TestSpec& spec);

// -- Frequency ---------------------------------------------------------------

/// p = erfc(|S| / sqrt(2n)) for S = sum(2 b_i - 1).
double frequency_p_value(std::int64_t ones, std::int64_t n);
/// Throws std::invalid_argument when the block is shorter than `min_bits`.
double frequency_test(const BitBlock& block, std::size_t min_bits = 100);

// -- Frequency within a Block ------------------------------------------------

/// Statistic from per-block one counts: sum (2 X_i - m)^2 / m.
double block_frequency_statistic(std::span<const std::int64_t> ones, std::int64_t m);
double block_frequency_test(const BitBlock& block, std::int64_t m);

// -- Longest Run of Ones in a Block ------------------------------------------

/// Number of m-bit strings whose longest run of ones is at most t (m <= 63).
std::uint64_t count_longest_run_at_most(int m, int t);
/// P(longest run of ones in m fair bits <= t).
double prob_longest_run_at_most(std::int64_t m, std::int64_t t);
/// Class probabilities for classes {<= b_0}, {b_0+1..b_1}, ..., {> b_last}.
std::vector<double> longest_run_class_probs(std::int64_t m, std::span<const std::int64_t> boundaries);
/// Class boundaries of the SP800-22 layouts (m = 8, 128, 10000).
std::vector<std::int64_t> longest_run_boundaries(std::int64_t m);
TestSpec longest_run_spec(std::int64_t n, std::int64_t m);
std::int64_t longest_run_of_ones(const BitBlock& block, std::size_t begin, std::size_t length);
ClassCounts longest_run_counts(const BitBlock& block, std::int64_t m);
double longest_run_test(const BitBlock& block, std::int64_t m);

// -- Overlapping Template Matching -------------------------------------------

inline constexpr std::int64_t kOverlapBlockSize = 1032;
inline constexpr int kOverlapTemplateLength = 9;
/// The suite's published constants (used by the statistic).
std::vector<double> overlapping_template_published_probs();
/// Exact class probabilities for `template_length` ones in an m-bit block.
std::vector<double> overlapping_template_exact_probs(std::int64_t m, int template_length, int max_class);
TestSpec overlapping_template_spec(std::int64_t n);
/// Overlapping matches of the all-ones template inside [begin, begin+length).
std::int64_t count_template_matches(const BitBlock& block, std::size_t begin, std::size_t length, int template_length);
ClassCounts overlapping_template_counts(const BitBlock& block);
double overlapping_template_test(const BitBlock& block);

// -- Linear Complexity -------------------------------------------------------

/// Shortest LFSR length generating bits [begin, begin+length) of the block.
std::int64_t berlekamp_massey(const BitBlock& block, std::size_t begin, std::size_t length);
inline std::int64_t berlekamp_massey(const BitBlock& block) { return berlekamp_massey(block, 0, block.size()); }
std::vector<double> linear_complexity_class_probs();
TestSpec linear_complexity_spec(std::int64_t n, std::int64_t m);
/// Class of one block from its linear complexity.
int linear_complexity_class(std::int64_t complexity, std::int64_t m);
ClassCounts linear_complexity_counts(const BitBlock& block, std::int64_t m);
double linear_complexity_test(const BitBlock& block, std::int64_t m);

// -- Random Excursions -------------------------------------------------------

inline constexpr int kExcursionCycles = 500;
inline constexpr std::array<int, 8> kExcursionStates = {-4, -3, -2, -1, 1, 2, 3, 4};

/// Probabilities that a cycle visits state x exactly 0..4 and >= 5 times.
std::vector<double> excursion_class_probs(int x);
/// Spec for state x over exactly 500 cycles.
TestSpec random_excursion_spec(int x);

struct ExcursionResult {
    std::array<double, 8> p_values{};
    std::array<ClassCounts, 8> counts;
    std::size_t consumed_bits = 0;
};

/// Scans the walk until 500 cycles complete and ignores the remaining bits.
/// Returns nothing when the block holds fewer than 500 complete cycles.
std::optional<ExcursionResult> random_excursions_test(const BitBlock& block);

// -- Discrete Fourier Transform ----------------------------------------------

enum class DftVariance { Sigma0, Sigma1, Sigma2 };

std::string_view to_string(DftVariance v);
DftVariance parse_dft_variance(std::string_view name);
double dft_variance(std::int64_t n, DftVariance variant);
/// p-value for an observed count of |F_i| below the threshold.
double dft_p_value(std::int64_t count, std::int64_t n, DftVariance variant);
/// |F_i| for i = 0..n/2-1.
std::vector<double> dft_magnitudes(const BitBlock& block);
std::int64_t dft_count_below_threshold(const BitBlock& block);
double dft_test(const BitBlock& block, DftVariance variant);

}  // namespace nistlimit
