#include "nistlimit/bitgen.hpp"

#include "nistlimit/sha1.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <fstream>
#include <iterator>
#include <sstream>

namespace nistlimit {

// ---------------------------------------------------------------------------
// BitBlock

BitBlock BitBlock::from_string(std::string_view text) {
    std::size_t n = 0;
    for (char c : text) {
        if (c == '0' || c == '1') {
            ++n;
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            throw std::invalid_argument("BitBlock::from_string: unexpected character");
        }
    }
    BitBlock out(n);
    std::size_t i = 0;
    for (char c : text) {
        if (c == '0' || c == '1') {
            out.set(i++, c == '1');
        }
    }
    return out;
}

BitBlock BitBlock::from_words(std::vector<std::uint64_t> words, std::size_t n) {
    if (words.size() < (n + 63) / 64) {
        throw std::invalid_argument("BitBlock::from_words: not enough words");
    }
    words.resize((n + 63) / 64);
    if (n % 64 != 0) {
        words.back() &= ~std::uint64_t{0} << (64 - n % 64);
    }
    BitBlock out;
    out.words_ = std::move(words);
    out.size_ = n;
    return out;
}

std::uint64_t BitBlock::word_at(std::size_t offset) const noexcept {
    if (offset >= size_) {
        return 0;
    }
    const std::size_t w = offset >> 6;
    const unsigned shift = offset & 63;
    std::uint64_t value = words_[w] << shift;
    if (shift != 0 && w + 1 < words_.size()) {
        value |= words_[w + 1] >> (64 - shift);
    }
    return value;
}

std::size_t BitBlock::count_ones(std::size_t begin, std::size_t length) const noexcept {
    std::size_t total = 0;
    std::size_t pos = begin;
    const std::size_t end = begin + length;
    if ((begin & 63) == 0) {
        const std::size_t first = begin >> 6;
        const std::size_t whole = length >> 6;
        for (std::size_t w = 0; w < whole; ++w) {
            total += static_cast<std::size_t>(std::popcount(words_[first + w]));
        }
        pos += whole << 6;
    }
    while (pos < end) {
        const std::size_t take = std::min<std::size_t>(64, end - pos);
        std::uint64_t w = word_at(pos);
        if (take < 64) {
            w &= ~std::uint64_t{0} << (64 - take);
        }
        total += static_cast<std::size_t>(std::popcount(w));
        pos += take;
    }
    return total;
}

BitBlock BitBlock::slice(std::size_t begin, std::size_t length) const {
    if (begin + length > size_) {
        throw std::out_of_range("BitBlock::slice: range exceeds block");
    }
    std::vector<std::uint64_t> words((length + 63) / 64);
    for (std::size_t i = 0; i < words.size(); ++i) {
        words[i] = word_at(begin + 64 * i);
    }
    return from_words(std::move(words), length);
}

void BitBlock::append(const BitBlock& other) {
    BitBlock joined((size_ + other.size_));
    for (std::size_t i = 0; i < words_.size(); ++i) {
        joined.words_[i] = words_[i];
    }
    for (std::size_t i = 0; i < other.size_; i += 64) {
        const std::uint64_t w = other.word_at(i);
        const std::size_t pos = size_ + i;
        const unsigned shift = pos & 63;
        joined.words_[pos >> 6] |= w >> shift;
        if (shift != 0 && (pos >> 6) + 1 < joined.words_.size()) {
            joined.words_[(pos >> 6) + 1] |= w << (64 - shift);
        }
    }
    if (joined.size_ % 64 != 0) {
        joined.words_.back() &= ~std::uint64_t{0} << (64 - joined.size_ % 64);
    }
    *this = std::move(joined);
}

std::string BitBlock::to_string() const {
    std::string out(size_, '0');
    for (std::size_t i = 0; i < size_; ++i) {
        if ((*this)[i]) out[i] = '1';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Seeds

std::string_view to_string(GeneratorKind kind) {
    switch (kind) {
        case GeneratorKind::Mt19937: return "mt19937";
        case GeneratorKind::Sha1G: return "sha1";
        case GeneratorKind::Well19937a: return "well19937a";
        case GeneratorKind::File: return "file";
        case GeneratorKind::SplitStream: return "splitstream";
    }
    return "unknown";
}

GeneratorKind parse_generator_kind(std::string_view name) {
    if (name == "mt" || name == "mt19937") return GeneratorKind::Mt19937;
    if (name == "sha1" || name == "sha1g") return GeneratorKind::Sha1G;
    if (name == "well" || name == "well19937a") return GeneratorKind::Well19937a;
    if (name == "split" || name == "splitstream") return GeneratorKind::SplitStream;
    if (name == "file") return GeneratorKind::File;
    throw std::invalid_argument("unknown generator '" + std::string(name) + "'");
}

Seed seed_from_u64(std::uint64_t value) {
    Seed out(8);
    for (int i = 0; i < 8; ++i) {
        out[i] = static_cast<std::uint8_t>(value >> (56 - 8 * i));
    }
    return out;
}

namespace {

Seed keyed_hash(std::string_view tag, const Seed& key, std::uint64_t index) {
    Seed message(tag.begin(), tag.end());
    message.insert(message.end(), key.begin(), key.end());
    const Seed idx = seed_from_u64(index);
    message.insert(message.end(), idx.begin(), idx.end());
    const auto digest = sha1::hash(message);
    return Seed(digest.begin(), digest.end());
}

}  // namespace

Seed experiment_seed(std::uint64_t s) { return keyed_hash("nistlimit/experiment", seed_from_u64(s), 0); }

Seed derive_stream_seed(const Seed& parent, std::uint64_t index) {
    return keyed_hash("nistlimit/stream", parent, index);
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 15]);
    }
    return out;
}

Seed from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) {
        throw std::invalid_argument("from_hex: odd number of digits");
    }
    const auto digit = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw std::invalid_argument("from_hex: bad digit");
    };
    Seed out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<std::uint8_t>(digit(hex[2 * i]) * 16 + digit(hex[2 * i + 1]));
    }
    return out;
}

Seed sha1g_default_key() { return from_hex("ec822a619d6ed5d9492218a7a4c5b15d57c61601"); }

// ---------------------------------------------------------------------------
// MT19937

Mt19937::Mt19937(std::uint32_t seed) { init_genrand(seed); }

Mt19937::Mt19937(std::span<const std::uint32_t> key) {
    init_genrand(19650218u);
    constexpr int n = 624;
    int i = 1;
    std::size_t j = 0;
    const std::size_t len = key.empty() ? 1 : key.size();
    for (std::size_t k = std::max<std::size_t>(n, len); k > 0; --k) {
        const std::uint32_t kj = key.empty() ? 0u : key[j];
        mt_[i] = (mt_[i] ^ ((mt_[i - 1] ^ (mt_[i - 1] >> 30)) * 1664525u)) + kj + static_cast<std::uint32_t>(j);
        ++i;
        ++j;
        if (i >= n) {
            mt_[0] = mt_[n - 1];
            i = 1;
        }
        if (j >= len) j = 0;
    }
    for (int k = n - 1; k > 0; --k) {
        mt_[i] = (mt_[i] ^ ((mt_[i - 1] ^ (mt_[i - 1] >> 30)) * 1566083941u)) - static_cast<std::uint32_t>(i);
        ++i;
        if (i >= n) {
            mt_[0] = mt_[n - 1];
            i = 1;
        }
    }
    mt_[0] = 0x80000000u;
    mti_ = n;
}

void Mt19937::init_genrand(std::uint32_t s) {
    mt_[0] = s;
    for (int i = 1; i < 624; ++i) {
        mt_[i] = 1812433253u * (mt_[i - 1] ^ (mt_[i - 1] >> 30)) + static_cast<std::uint32_t>(i);
    }
    mti_ = 624;
}

void Mt19937::twist() {
    constexpr int n = 624;
    constexpr int m = 397;
    constexpr std::uint32_t upper = 0x80000000u;
    constexpr std::uint32_t lower = 0x7fffffffu;
    constexpr std::uint32_t matrix_a = 0x9908b0dfu;
    auto step = [&](int kk, int next, int far) {
        const std::uint32_t y = (mt_[kk] & upper) | (mt_[next] & lower);
        mt_[kk] = mt_[far] ^ (y >> 1) ^ ((y & 1u) ? matrix_a : 0u);
    };
    int kk = 0;
    for (; kk < n - m; ++kk) step(kk, kk + 1, kk + m);
    for (; kk < n - 1; ++kk) step(kk, kk + 1, kk + m - n);
    step(n - 1, 0, m - 1);
    mti_ = 0;
}

std::uint32_t Mt19937::operator()() {
    if (mti_ >= 624) {
        twist();
    }
    std::uint32_t y = mt_[mti_++];
    y ^= y >> 11;
    y ^= (y << 7) & 0x9d2c5680u;
    y ^= (y << 15) & 0xefc60000u;
    y ^= y >> 18;
    return y;
}

// ---------------------------------------------------------------------------
// WELL19937a

Well19937a::Well19937a(std::span<const std::uint32_t, 624> init) {
    std::copy(init.begin(), init.end(), state_);
}

std::uint32_t Well19937a::operator()() {
    constexpr unsigned r = 624;
    constexpr unsigned m1 = 70, m2 = 179, m3 = 449;
    constexpr std::uint32_t mask_lower = 0x80000000u;
    constexpr std::uint32_t mask_upper = 0x7fffffffu;
    const unsigned i = index_;
    const std::uint32_t v0 = state_[i];
    auto wrap = [](unsigned j) { return j >= r ? j - r : j; };
    const std::uint32_t vm1 = state_[wrap(i + m1)];
    const std::uint32_t vm2 = state_[wrap(i + m2)];
    const std::uint32_t vm3 = state_[wrap(i + m3)];
    const std::uint32_t vrm1 = state_[wrap(i + r - 1)];
    const std::uint32_t vrm2 = state_[wrap(i + r - 2)];

    const std::uint32_t z0 = (vrm1 & mask_lower) | (vrm2 & mask_upper);
    const std::uint32_t z1 = (v0 ^ (v0 << 25)) ^ (vm1 ^ (vm1 >> 27));
    const std::uint32_t z2 = (vm2 >> 9) ^ (vm3 ^ (vm3 >> 1));
    const std::uint32_t new_v1 = z1 ^ z2;
    state_[i] = new_v1;
    const unsigned prev = wrap(i + r - 1);
    state_[prev] = z0 ^ (z1 ^ (z1 << 9)) ^ (z2 ^ (z2 << 21)) ^ (new_v1 ^ (new_v1 >> 21));
    index_ = prev;
    return state_[index_];
}

// ---------------------------------------------------------------------------
// Engines

namespace {

std::vector<std::uint32_t> seed_words(const Seed& seed) {
    std::vector<std::uint32_t> words((seed.size() + 3) / 4, 0);
    for (std::size_t i = 0; i < seed.size(); ++i) {
        words[i / 4] |= std::uint32_t{seed[i]} << (24 - 8 * (i % 4));
    }
    return words;
}

Mt19937 make_mt(const Seed& seed) {
    const auto words = seed_words(seed);
    if (seed.size() == 4) {
        return Mt19937(words[0]);
    }
    return Mt19937(std::span<const std::uint32_t>(words));
}

template <class Gen32>
class Word32Engine final : public WordEngine {
public:
    explicit Word32Engine(Gen32 gen) : gen_(std::move(gen)) {}
    void fill(std::span<std::uint64_t> out) override {
        for (auto& w : out) {
            const std::uint64_t hi = gen_();
            w = (hi << 32) | gen_();
        }
    }

private:
    Gen32 gen_;
};

// NIST SP800-22 "G using SHA-1": G = compress(IV, XKEY || 0^352);
// XKEY = (XKEY + G + 1) mod 2^160.
class Sha1GEngine final : public WordEngine {
public:
    explicit Sha1GEngine(const Seed& seed) {
        if (seed.size() == 20) {
            std::copy(seed.begin(), seed.end(), xkey_.begin());
        } else {
            const auto digest = sha1::hash(seed);
            std::copy(digest.begin(), digest.end(), xkey_.begin());
        }
    }

    void fill(std::span<std::uint64_t> out) override {
        for (auto& w : out) {
            const std::uint64_t hi = next32();
            w = (hi << 32) | next32();
        }
    }

private:
    std::uint32_t next32() {
        if (cursor_ == 5) {
            refill();
        }
        return g_[cursor_++];
    }

    void refill() {
        std::array<std::uint8_t, 64> block{};
        std::copy(xkey_.begin(), xkey_.end(), block.begin());
        sha1::State state = sha1::kInitialState;
        sha1::compress(state, block);
        g_ = state;
        // XKEY += G + 1, big-endian over 20 bytes.
        unsigned carry = 1;
        for (int byte = 19; byte >= 0; --byte) {
            const unsigned g_byte = (g_[byte / 4] >> (24 - 8 * (byte % 4))) & 0xffu;
            const unsigned sum = xkey_[byte] + g_byte + carry;
            xkey_[byte] = static_cast<std::uint8_t>(sum);
            carry = sum >> 8;
        }
        cursor_ = 0;
    }

    std::array<std::uint8_t, 20> xkey_{};
    sha1::State g_{};
    int cursor_ = 5;
};

constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Counter-based: word(c) = mix(mix(c + k1) ^ k2), a keyed bijection of c.
class SplitStreamEngine final : public WordEngine {
public:
    explicit SplitStreamEngine(const Seed& seed) {
        const auto digest = sha1::hash(seed);
        for (int i = 0; i < 8; ++i) {
            k1_ = (k1_ << 8) | digest[i];
            k2_ = (k2_ << 8) | digest[8 + i];
        }
    }
    void fill(std::span<std::uint64_t> out) override {
        for (auto& w : out) {
            w = mix64(mix64(counter_++ + k1_) ^ k2_);
        }
    }

private:
    std::uint64_t k1_ = 0;
    std::uint64_t k2_ = 0;
    std::uint64_t counter_ = 0;
};

std::unique_ptr<WordEngine> make_engine(GeneratorKind kind, const Seed& seed) {
    switch (kind) {
        case GeneratorKind::Mt19937: return std::make_unique<Word32Engine<Mt19937>>(make_mt(seed));
        case GeneratorKind::Well19937a: {
            Mt19937 mt = make_mt(seed);
            std::array<std::uint32_t, 624> init{};
            for (auto& w : init) w = mt();
            return std::make_unique<Word32Engine<Well19937a>>(Well19937a(init));
        }
        case GeneratorKind::Sha1G: return std::make_unique<Sha1GEngine>(seed);
        case GeneratorKind::SplitStream: return std::make_unique<SplitStreamEngine>(seed);
        case GeneratorKind::File: break;
    }
    throw std::invalid_argument("make_engine: file sources are created with BitSource::from_file");
}

}  // namespace

struct BitSource::FileData {
    BitBlock bits;
    std::string origin;
};

namespace {

class FileEngine final : public WordEngine {
public:
    FileEngine(std::shared_ptr<const BitBlock> bits, std::uint64_t offset) : bits_(std::move(bits)), offset_(offset) {}
    void fill(std::span<std::uint64_t> out) override {
        for (auto& w : out) {
            w = bits_->word_at(offset_);
            offset_ += 64;
        }
    }

private:
    std::shared_ptr<const BitBlock> bits_;
    std::uint64_t offset_;
};

}  // namespace

// ---------------------------------------------------------------------------
// BitSource

BitSource::BitSource(GeneratorKind kind, Seed seed, std::unique_ptr<WordEngine> engine)
    : kind_(kind), seed_(std::move(seed)), engine_(std::move(engine)) {}

BitSource::BitSource(BitSource&&) noexcept = default;
BitSource& BitSource::operator=(BitSource&&) noexcept = default;
BitSource::~BitSource() = default;

BitSource BitSource::generator(GeneratorKind kind, Seed seed) {
    auto engine = make_engine(kind, seed);
    BitSource out(kind, std::move(seed), std::move(engine));
    out.derivation_ = "root";
    return out;
}

BitSource BitSource::from_bits(BitBlock bits) {
    auto data = std::make_shared<FileData>();
    data->bits = std::move(bits);
    data->origin = "memory";
    // Aliasing pointer: the engine sees only the bit vector but keeps the
    // whole record alive.
    std::shared_ptr<const BitBlock> view(data, &data->bits);
    BitSource out(GeneratorKind::File, {}, std::make_unique<FileEngine>(view, 0));
    out.file_end_ = data->bits.size();
    out.file_ = std::move(data);
    out.derivation_ = "root";
    return out;
}

BitSource BitSource::from_file(const std::filesystem::path& path, FileFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open bit file '" + path.string() + "'");
    }
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (format == FileFormat::Auto) {
        const bool ascii = !bytes.empty() && std::all_of(bytes.begin(), bytes.end(), [](char c) {
            return c == '0' || c == '1' || std::isspace(static_cast<unsigned char>(c));
        });
        format = ascii ? FileFormat::Ascii : FileFormat::Binary;
    }
    BitBlock bits;
    if (format == FileFormat::Ascii) {
        bits = BitBlock::from_string(bytes);
    } else {
        std::vector<std::uint64_t> words((bytes.size() + 7) / 8, 0);
        for (std::size_t i = 0; i < bytes.size(); ++i) {
            words[i / 8] |= std::uint64_t{static_cast<std::uint8_t>(bytes[i])} << (56 - 8 * (i % 8));
        }
        bits = BitBlock::from_words(std::move(words), bytes.size() * 8);
    }
    BitSource out = from_bits(std::move(bits));
    std::const_pointer_cast<FileData>(out.file_)->origin = path.string();
    return out;
}

std::optional<std::uint64_t> BitSource::remaining_bits() const {
    if (kind_ != GeneratorKind::File) {
        return std::nullopt;
    }
    return file_end_ - file_begin_ - position_;
}

std::uint64_t BitSource::pull_word() {
    std::uint64_t w = 0;
    engine_->fill(std::span<std::uint64_t>(&w, 1));
    return w;
}

std::uint64_t BitSource::next_u64() {
    if (kind_ == GeneratorKind::File && *remaining_bits() < 64) {
        throw SourceExhausted("bit source exhausted");
    }
    position_ += 64;
    if (buffered_ == 0) {
        return pull_word();
    }
    const std::uint64_t fresh = pull_word();
    const std::uint64_t out = buffer_ | (fresh >> buffered_);
    buffer_ = fresh << (64 - buffered_);
    return out;
}

BitBlock BitSource::next_block(std::size_t n) {
    if (n == 0) {
        throw std::invalid_argument("next_block: n must be positive");
    }
    if (kind_ == GeneratorKind::File && *remaining_bits() < n) {
        throw SourceExhausted("bit source exhausted: requested " + std::to_string(n) + " bits, " +
                              std::to_string(*remaining_bits()) + " remain");
    }
    std::vector<std::uint64_t> words((n + 63) / 64);
    const std::size_t full = n / 64;
    if (buffered_ == 0) {
        engine_->fill(std::span<std::uint64_t>(words.data(), full));
        position_ += 64 * full;
    } else {
        for (std::size_t i = 0; i < full; ++i) {
            words[i] = next_u64();
        }
    }
    const unsigned rest = static_cast<unsigned>(n % 64);
    if (rest != 0) {
        std::uint64_t w = 0;
        if (buffered_ >= rest) {
            w = buffer_;
            buffer_ = rest == 64 ? 0 : buffer_ << rest;
            buffered_ -= rest;
        } else {
            const std::uint64_t fresh = pull_word();
            w = buffer_ | (buffered_ == 0 ? fresh : fresh >> buffered_);
            const unsigned used = rest - buffered_;
            buffer_ = fresh << used;
            buffered_ = 64 - used;
        }
        words[full] = w;
        position_ += rest;
    }
    return BitBlock::from_words(std::move(words), n);
}

std::vector<BitSource> BitSource::jump_streams(std::size_t count) const {
    if (count == 0) {
        throw std::invalid_argument("jump_streams: count must be positive");
    }
    std::vector<BitSource> out;
    out.reserve(count);
    if (kind_ == GeneratorKind::File) {
        const std::uint64_t start = file_begin_ + position_;
        const std::uint64_t total = file_end_ - start;
        std::shared_ptr<const BitBlock> view(file_, &file_->bits);
        for (std::size_t s = 0; s < count; ++s) {
            const std::uint64_t b = start + total * s / count;
            const std::uint64_t e = start + total * (s + 1) / count;
            BitSource src(GeneratorKind::File, {}, std::make_unique<FileEngine>(view, b));
            src.file_ = file_;
            src.file_begin_ = b;
            src.file_end_ = e;
            src.derivation_ = derivation_ + "/range[" + std::to_string(b) + "," + std::to_string(e) + ")";
            out.push_back(std::move(src));
        }
        return out;
    }
    for (std::size_t s = 0; s < count; ++s) {
        Seed child = derive_stream_seed(seed_, s);
        auto engine = make_engine(kind_, child);
        BitSource src(kind_, std::move(child), std::move(engine));
        src.derivation_ = derivation_ + "/sha1-stream[" + std::to_string(s) + "]";
        out.push_back(std::move(src));
    }
    return out;
}

std::string BitSource::describe() const {
    std::ostringstream os;
    os << to_string(kind_);
    if (kind_ == GeneratorKind::File) {
        os << " origin=" << file_->origin << " range=[" << file_begin_ << "," << file_end_ << ")";
    } else {
        os << " seed=" << to_hex(seed_);
    }
    os << " derivation=" << derivation_ << " position=" << position_;
    return os.str();
}

}  // namespace nistlimit
