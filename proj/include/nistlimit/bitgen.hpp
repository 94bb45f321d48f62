#pragma once

// Deterministic bit sources: the generators under test (MT19937, the SHA-1
// G-function generator, WELL19937a), a counter-based stream for Monte Carlo
// engines, and file-backed input.
//
// Bit order is fixed: generator words are emitted most-significant bit first,
// and earlier words precede later ones. Changing this breaks reproducibility
// of every stored result.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nistlimit {

using Seed = std::vector<std::uint8_t>;

/// Packed bit vector; bit i lives in word i/64 at position 63 - i%64.
class BitBlock {
public:
    BitBlock() = default;
    explicit BitBlock(std::size_t n) : words_((n + 63) / 64, 0), size_(n) {}

    /// Parses '0'/'1' characters, ignoring whitespace. Throws on anything else.
    static BitBlock from_string(std::string_view text);
    static BitBlock from_words(std::vector<std::uint64_t> words, std::size_t n);

    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    [[nodiscard]] bool operator[](std::size_t i) const noexcept {
        return (words_[i >> 6] >> (63 - (i & 63))) & 1u;
    }
    void set(std::size_t i, bool value) noexcept {
        const std::uint64_t mask = std::uint64_t{1} << (63 - (i & 63));
        if (value) words_[i >> 6] |= mask; else words_[i >> 6] &= ~mask;
    }

    [[nodiscard]] std::span<const std::uint64_t> words() const noexcept { return words_; }

    /// The 64 bits starting at `offset`, zero-filled past the end.
    [[nodiscard]] std::uint64_t word_at(std::size_t offset) const noexcept;
    [[nodiscard]] std::size_t count_ones(std::size_t begin, std::size_t length) const noexcept;
    [[nodiscard]] BitBlock slice(std::size_t begin, std::size_t length) const;
    void append(const BitBlock& other);
    [[nodiscard]] std::string to_string() const;

    friend bool operator==(const BitBlock& a, const BitBlock& b) noexcept {
        return a.size_ == b.size_ && a.words_ == b.words_;
    }

private:
    std::vector<std::uint64_t> words_;
    std::size_t size_ = 0;
};

enum class GeneratorKind { Mt19937, Sha1G, Well19937a, File, SplitStream };
enum class FileFormat { Auto, Binary, Ascii };

std::string_view to_string(GeneratorKind kind);
GeneratorKind parse_generator_kind(std::string_view name);

class SourceExhausted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Big-endian 8-byte encoding of an integer seed.
Seed seed_from_u64(std::uint64_t value);
/// Seed used for experiment number `s` (keyed hash of s).
Seed experiment_seed(std::uint64_t s);
/// Seed of stream `index` derived from `parent`; a keyed SHA-1 of both.
Seed derive_stream_seed(const Seed& parent, std::uint64_t index);
std::string to_hex(std::span<const std::uint8_t> bytes);
Seed from_hex(std::string_view hex);

/// Default XKEY of the NIST suite's SHA-1 generator.
Seed sha1g_default_key();

/// Produces a stream of 64-bit words (first bit = most-significant bit).
class WordEngine {
public:
    virtual ~WordEngine() = default;
    virtual void fill(std::span<std::uint64_t> out) = 0;
};

/// Single-owner bit stream. Consecutive reads return contiguous, disjoint
/// segments; parallel consumers obtain their own sources via jump_streams.
class BitSource {
public:
    /// MT19937: a 4-byte seed is used with init_genrand, any other length is
    /// split into big-endian 32-bit words for init_by_array. WELL19937a takes
    /// its 624-word state from MT19937 seeded the same way. SHA1G uses a
    /// 20-byte seed as XKEY and hashes other seeds to 20 bytes.
    static BitSource generator(GeneratorKind kind, Seed seed);
    static BitSource from_file(const std::filesystem::path& path, FileFormat format = FileFormat::Auto);
    static BitSource from_bits(BitBlock bits);

    BitSource(BitSource&&) noexcept;
    BitSource& operator=(BitSource&&) noexcept;
    ~BitSource();

    BitBlock next_block(std::size_t n);
    std::uint64_t next_u64();
    /// Uniform double in [0, 1) with 53 random bits.
    double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// `count` sources with pairwise non-overlapping output. Generators
    /// derive stream seeds by keyed hash of (seed, index); file sources
    /// split the remaining bits into contiguous ranges.
    [[nodiscard]] std::vector<BitSource> jump_streams(std::size_t count) const;

    [[nodiscard]] GeneratorKind kind() const noexcept { return kind_; }
    [[nodiscard]] const Seed& seed() const noexcept { return seed_; }
    [[nodiscard]] std::uint64_t position() const noexcept { return position_; }
    [[nodiscard]] std::optional<std::uint64_t> remaining_bits() const;
    /// Provenance string recorded in reports.
    [[nodiscard]] std::string describe() const;

private:
    struct FileData;

    BitSource(GeneratorKind kind, Seed seed, std::unique_ptr<WordEngine> engine);
    std::uint64_t pull_word();

    GeneratorKind kind_;
    Seed seed_;
    std::string derivation_;
    std::unique_ptr<WordEngine> engine_;
    std::shared_ptr<const FileData> file_;
    std::uint64_t file_begin_ = 0;
    std::uint64_t file_end_ = 0;
    std::uint64_t position_ = 0;
    std::uint64_t buffer_ = 0;
    unsigned buffered_ = 0;
};

/// Raw 32-bit MT19937 engine, exposed for reference-vector tests.
class Mt19937 {
public:
    explicit Mt19937(std::uint32_t seed);
    explicit Mt19937(std::span<const std::uint32_t> key);
    std::uint32_t operator()();
    [[nodiscard]] const std::uint32_t* state() const noexcept { return mt_; }

private:
    void init_genrand(std::uint32_t s);
    void twist();
    std::uint32_t mt_[624];
    int mti_ = 625;
};

/// WELL19937a (untempered) on a caller-provided 624-word state.
class Well19937a {
public:
    explicit Well19937a(std::span<const std::uint32_t, 624> init);
    std::uint32_t operator()();

private:
    std::uint32_t state_[624];
    unsigned index_ = 0;
};

}  // namespace nistlimit
