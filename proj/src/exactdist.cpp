#include "nistlimit/exactdist.hpp"

#include "nistlimit/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace nistlimit {

std::string_view to_string(Provenance p) {
    return p == Provenance::Exact ? "exact" : "monte-carlo";
}

int interval_index(double p, int nu) {
    if (!(p >= 0.0) || p > 1.0) {
        throw std::invalid_argument("interval_index: p outside [0, 1]");
    }
    const double width = static_cast<double>(nu + 1);
    int i = static_cast<int>(std::floor(p * width));
    i = std::clamp(i, 0, nu);
    // p * width can round across a boundary; settle against the boundary
    // values i/(nu+1) as doubles, which is what the threshold tables use.
    while (i > 0 && p < static_cast<double>(i) / width) --i;
    while (i < nu && p >= static_cast<double>(i + 1) / width) ++i;
    return i;
}

// ---------------------------------------------------------------------------
// Compositions

CompositionCursor::CompositionCursor(int k, std::int64_t n_b) {
    if (k < 0 || n_b < 0) throw std::invalid_argument("CompositionCursor: negative size");
    x_.assign(static_cast<std::size_t>(k) + 1, 0);
    x_[0] = n_b;
}

void CompositionCursor::next() {
    if (exhausted_) return;
    std::size_t j = 0;
    while (j < x_.size() && x_[j] == 0) ++j;
    if (j + 1 >= x_.size()) {
        exhausted_ = true;
        return;
    }
    const std::int64_t s = x_[j];
    x_[j] = 0;
    ++x_[j + 1];
    x_[0] = s - 1;
}

std::uint64_t binomial_saturating(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 c = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        c = c * (n - k + i) / i;  // exact: c * (n-k+i) is divisible by i
        if (c > UINT64_MAX) return UINT64_MAX;
    }
    return static_cast<std::uint64_t>(c);
}

std::uint64_t estimate_workload(const TestSpec& spec) {
    return binomial_saturating(static_cast<std::uint64_t>(spec.blocks) + static_cast<std::uint64_t>(spec.df),
                               static_cast<std::uint64_t>(spec.df));
}

BudgetExceeded::BudgetExceeded(std::uint64_t est, std::uint64_t bud)
    : std::runtime_error("enumeration needs " + std::to_string(est) + " compositions, budget is " +
                         std::to_string(bud) + " (raise the budget or enable checkpointing)"),
      estimated(est),
      budget(bud) {}

// ---------------------------------------------------------------------------
// Enumeration kernel

namespace {

// exp() of anything below this is exactly zero, so skipping is lossless.
constexpr double kUnderflow = -746.0;
constexpr double kBand = 1e-9;

struct Cell {
    std::int64_t lead = 0;    // x_k
    std::int64_t second = 0;  // x_{k-1} (unused when k == 1)
    std::uint64_t compositions = 0;
};

class Kernel {
public:
    Kernel(const TestSpec& spec, int nu) : spec_(spec), k_(spec.df), nb_(spec.blocks), nu_(nu) {
        const LogFactorialTable lf(nb_);
        const double nbd = static_cast<double>(nb_);
        stat_.resize(static_cast<std::size_t>(k_) + 1);
        logw_.resize(stat_.size());
        for (int i = 0; i <= k_; ++i) {
            const double e = nbd * spec.class_probs[static_cast<std::size_t>(i)];
            const double lp = std::log(spec.null_probs[static_cast<std::size_t>(i)]);
            auto& s = stat_[static_cast<std::size_t>(i)];
            auto& w = logw_[static_cast<std::size_t>(i)];
            s.resize(static_cast<std::size_t>(nb_) + 1);
            w.resize(s.size());
            for (std::int64_t x = 0; x <= nb_; ++x) {
                const double d = static_cast<double>(x) - e;
                s[static_cast<std::size_t>(x)] = d * d / e;
                w[static_cast<std::size_t>(x)] = static_cast<double>(x) * lp - lf(x);
            }
        }
        log_nb_fact_ = lf(nb_);
        // p >= i/(nu+1)  <=>  T <= chi2_isf(k, i/(nu+1))
        thresholds_.assign(static_cast<std::size_t>(nu_) + 2, 0.0);
        thresholds_[0] = HUGE_VAL;
        for (int i = 1; i <= nu_; ++i) {
            thresholds_[static_cast<std::size_t>(i)] =
                chi2_isf(k_, static_cast<double>(i) / static_cast<double>(nu_ + 1));
        }
        thresholds_[static_cast<std::size_t>(nu_) + 1] = -HUGE_VAL;
        x_.assign(static_cast<std::size_t>(k_) + 1, 0);
    }

    void run_cell(const Cell& cell, CompensatedSum* acc) {
        acc_ = acc;
        if (k_ == 1) {
            const std::int64_t rest = nb_ - cell.lead;
            x_[1] = cell.lead;
            x_[0] = rest;
            visit(stat_[1][idx(cell.lead)] + stat_[0][idx(rest)],
                  log_nb_fact_ + logw_[1][idx(cell.lead)] + logw_[0][idx(rest)]);
            return;
        }
        const auto k = static_cast<std::size_t>(k_);
        x_[k] = cell.lead;
        x_[k - 1] = cell.second;
        const double t = stat_[k][idx(cell.lead)] + stat_[k - 1][idx(cell.second)];
        const double lw = log_nb_fact_ + logw_[k][idx(cell.lead)] + logw_[k - 1][idx(cell.second)];
        recurse(k_ - 2, nb_ - cell.lead - cell.second, t, lw);
    }

private:
    static std::size_t idx(std::int64_t x) { return static_cast<std::size_t>(x); }

    void recurse(int c, std::int64_t rem, double t, double lw) {
        if (c == 0) {
            x_[0] = rem;
            visit(t + stat_[0][idx(rem)], lw + logw_[0][idx(rem)]);
            return;
        }
        if (c == 1) {
            const double* s1 = stat_[1].data();
            const double* s0 = stat_[0].data();
            const double* w1 = logw_[1].data();
            const double* w0 = logw_[0].data();
            for (std::int64_t v = 0; v <= rem; ++v) {
                const double lwv = lw + w1[v] + w0[rem - v];
                if (lwv < kUnderflow) continue;
                x_[1] = v;
                x_[0] = rem - v;
                visit(t + s1[v] + s0[rem - v], lwv);
            }
            return;
        }
        const auto& sc = stat_[static_cast<std::size_t>(c)];
        const auto& wc = logw_[static_cast<std::size_t>(c)];
        for (std::int64_t v = 0; v <= rem; ++v) {
            x_[static_cast<std::size_t>(c)] = v;
            recurse(c - 1, rem - v, t + sc[idx(v)], lw + wc[idx(v)]);
        }
    }

    void visit(double t, double lw) {
        if (lw < kUnderflow) return;
        acc_[bin_of(t)].add(std::exp(lw));
    }

    int bin_of(double t) const {
        int bin = 0;
        for (int i = 1; i <= nu_; ++i) bin += t <= thresholds_[static_cast<std::size_t>(i)];
        const double upper = thresholds_[static_cast<std::size_t>(bin)];
        const double lower = thresholds_[static_cast<std::size_t>(bin) + 1];
        const bool near = (bin >= 1 && upper - t <= kBand * upper) || (bin < nu_ && t - lower <= kBand * lower);
        if (!near) return bin;
        // Near a boundary the summation order matters: use exactly what the
        // one-level test computes.
        const double exact_t = chi2_class_statistic(x_, spec_);
        return interval_index(chi2_sf(k_, exact_t), nu_);
    }

    const TestSpec& spec_;
    int k_;
    std::int64_t nb_;
    int nu_;
    std::vector<std::vector<double>> stat_;
    std::vector<std::vector<double>> logw_;
    double log_nb_fact_ = 0.0;
    std::vector<double> thresholds_;
    ClassCounts x_;
    CompensatedSum* acc_ = nullptr;
};

std::vector<Cell> make_cells(const TestSpec& spec) {
    std::vector<Cell> cells;
    const std::int64_t nb = spec.blocks;
    if (spec.df == 1) {
        for (std::int64_t a = 0; a <= nb; ++a) cells.push_back({a, 0, 1});
        return cells;
    }
    const auto inner = static_cast<std::uint64_t>(spec.df - 2);
    for (std::int64_t a = 0; a <= nb; ++a) {
        for (std::int64_t b = 0; a + b <= nb; ++b) {
            const auto rem = static_cast<std::uint64_t>(nb - a - b);
            cells.push_back({a, b, binomial_saturating(rem + inner, inner)});
        }
    }
    return cells;
}

// slice s covers cells [bounds[s], bounds[s+1])
std::vector<std::size_t> make_slices(const std::vector<Cell>& cells, std::size_t partitions) {
    partitions = std::clamp<std::size_t>(partitions, 1, cells.size());
    long double total = 0;
    for (const auto& c : cells) total += static_cast<long double>(c.compositions);
    std::vector<std::size_t> bounds{0};
    long double cum = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        cum += static_cast<long double>(cells[i].compositions);
        const std::size_t made = bounds.size();
        const std::size_t cells_left = cells.size() - (i + 1);
        const std::size_t slices_left = partitions - made;
        if (made < partitions && cells_left >= slices_left &&
            (cum >= total * static_cast<long double>(made) / static_cast<long double>(partitions) ||
             cells_left == slices_left)) {
            bounds.push_back(i + 1);
        }
    }
    bounds.push_back(cells.size());
    return bounds;
}

std::uint64_t spec_hash(const TestSpec& spec) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    mix(spec.name.data(), spec.name.size());
    mix(&spec.block_size, sizeof spec.block_size);
    mix(&spec.blocks, sizeof spec.blocks);
    mix(&spec.df, sizeof spec.df);
    mix(spec.class_probs.data(), spec.class_probs.size() * sizeof(double));
    mix(spec.null_probs.data(), spec.null_probs.size() * sizeof(double));
    return h;
}

struct SliceResult {
    std::uint64_t compositions = 0;
    std::vector<CompensatedSum> cells;  // cell-major, nu+1 bins per cell
};

constexpr char kMagic[8] = {'N', 'L', 'Q', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint32_t kByteOrder = 0x01020304u;

struct RunState {
    std::uint64_t hash = 0;
    std::uint32_t nu = 0;
    std::uint64_t slices = 0;
    std::uint64_t cells = 0;
    std::uint64_t folded = 0;  // slices [0, folded) are merged
    std::uint64_t compositions_done = 0;
    std::vector<CompensatedSum> merged;
    std::map<std::uint64_t, SliceResult> pending;
};

template <class T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw CheckpointIoError("checkpoint file truncated");
    return v;
}

void put_sums(std::ostream& out, const std::vector<CompensatedSum>& sums) {
    for (const auto& s : sums) {
        put(out, s.sum);
        put(out, s.comp);
    }
}

std::vector<CompensatedSum> get_sums(std::istream& in, std::size_t n) {
    std::vector<CompensatedSum> sums(n);
    for (auto& s : sums) {
        s.sum = get<double>(in);
        s.comp = get<double>(in);
    }
    return sums;
}

void write_checkpoint(const std::filesystem::path& path, const RunState& st) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointIoError("cannot write checkpoint '" + tmp.string() + "'");
        out.write(kMagic, sizeof kMagic);
        put(out, kCheckpointVersion);
        put(out, kByteOrder);
        put(out, st.hash);
        put(out, st.nu);
        put(out, st.slices);
        put(out, st.cells);
        put(out, st.folded);
        put(out, st.compositions_done);
        put_sums(out, st.merged);
        put(out, static_cast<std::uint64_t>(st.pending.size()));
        for (const auto& [index, r] : st.pending) {
            put(out, index);
            put(out, r.compositions);
            put(out, static_cast<std::uint64_t>(r.cells.size()));
            put_sums(out, r.cells);
        }
        out.flush();
        if (!out) throw CheckpointIoError("failed writing checkpoint '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

void read_checkpoint(const std::filesystem::path& path, RunState& st) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointIoError("cannot read checkpoint '" + path.string() + "'");
    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw CheckpointMismatch("'" + path.string() + "' is not an enumeration checkpoint");
    }
    if (get<std::uint32_t>(in) != kCheckpointVersion || get<std::uint32_t>(in) != kByteOrder) {
        throw CheckpointMismatch("checkpoint version or byte order differs");
    }
    const auto hash = get<std::uint64_t>(in);
    const auto nu = get<std::uint32_t>(in);
    const auto slices = get<std::uint64_t>(in);
    const auto cells = get<std::uint64_t>(in);
    if (hash != st.hash || nu != st.nu || slices != st.slices || cells != st.cells) {
        throw CheckpointMismatch("checkpoint was written for a different test, nu or partition count");
    }
    st.folded = get<std::uint64_t>(in);
    st.compositions_done = get<std::uint64_t>(in);
    st.merged = get_sums(in, st.nu + 1);
    const auto pending = get<std::uint64_t>(in);
    st.pending.clear();
    for (std::uint64_t p = 0; p < pending; ++p) {
        const auto index = get<std::uint64_t>(in);
        SliceResult r;
        r.compositions = get<std::uint64_t>(in);
        r.cells = get_sums(in, get<std::uint64_t>(in));
        st.pending.emplace(index, std::move(r));
    }
}

void fold_ready(RunState& st) {
    for (auto it = st.pending.find(st.folded); it != st.pending.end(); it = st.pending.find(st.folded)) {
        const auto& cells = it->second.cells;
        for (std::size_t i = 0; i < cells.size(); ++i) st.merged[i % st.merged.size()].merge(cells[i]);
        st.pending.erase(it);
        ++st.folded;
    }
}

CategoryDistribution finish(const std::vector<CompensatedSum>& bins, int nu) {
    CategoryDistribution out;
    out.nu = nu;
    out.provenance = Provenance::Exact;
    CompensatedSum mass;
    for (const auto& b : bins) {
        out.q.push_back(b.value());
        mass.add(b.value());
    }
    out.mass_accounted = mass.value();
    return out;
}

}  // namespace

CategoryDistribution enumerate_q(const TestSpec& spec, const EnumerationOptions& options) {
    spec.validate();
    if (options.nu < 1) throw std::invalid_argument("enumerate_q: nu must be positive");
    const std::uint64_t workload = estimate_workload(spec);
    if (workload > options.budget && !options.checkpoint) {
        throw BudgetExceeded(workload, options.budget);
    }

    const auto cells = make_cells(spec);
    const auto bounds = make_slices(cells, options.partitions);
    const std::size_t slice_count = bounds.size() - 1;
    const auto bins = static_cast<std::size_t>(options.nu) + 1;

    RunState st;
    st.hash = spec_hash(spec);
    st.nu = static_cast<std::uint32_t>(options.nu);
    st.slices = slice_count;
    st.cells = cells.size();
    st.merged.assign(bins, CompensatedSum{});
    if (options.checkpoint && std::filesystem::exists(*options.checkpoint)) {
        read_checkpoint(*options.checkpoint, st);
    }

    std::vector<std::size_t> todo;
    for (std::size_t s = st.folded; s < slice_count; ++s) {
        if (!st.pending.count(s)) todo.push_back(s);
    }

    std::mutex mu;
    std::atomic<std::size_t> next{0};
    std::size_t finished_here = 0;
    std::uint64_t since_write = 0;
    bool stop = false;
    std::exception_ptr error;

    auto report = [&] {
        if (!options.progress) return;
        EnumerationProgress pr;
        pr.compositions_done = st.compositions_done;
        pr.compositions_total = workload;
        pr.slices_done = st.folded + st.pending.size();
        pr.slices_total = slice_count;
        options.progress(pr);
    };

    auto worker = [&] {
        try {
            Kernel kernel(spec, options.nu);
            for (;;) {
                {
                    std::lock_guard lock(mu);
                    if (stop || error) return;
                }
                const std::size_t t = next.fetch_add(1);
                if (t >= todo.size()) return;
                const std::size_t s = todo[t];
                SliceResult r;
                r.cells.assign((bounds[s + 1] - bounds[s]) * bins, CompensatedSum{});
                for (std::size_t c = bounds[s]; c < bounds[s + 1]; ++c) {
                    kernel.run_cell(cells[c], r.cells.data() + (c - bounds[s]) * bins);
                    r.compositions += cells[c].compositions;
                }
                std::lock_guard lock(mu);
                st.compositions_done += r.compositions;
                since_write += r.compositions;
                st.pending.emplace(s, std::move(r));
                fold_ready(st);
                ++finished_here;
                if (options.stop_after_slices && finished_here >= *options.stop_after_slices) stop = true;
                if (options.checkpoint && since_write >= options.checkpoint_every) {
                    write_checkpoint(*options.checkpoint, st);
                    since_write = 0;
                }
                report();
            }
        } catch (...) {
            std::lock_guard lock(mu);
            if (!error) error = std::current_exception();
        }
    };

    const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(todo.size())));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);

    fold_ready(st);
    if (st.folded < slice_count) {
        if (options.checkpoint) write_checkpoint(*options.checkpoint, st);
        throw EnumerationInterrupted("enumeration stopped after " + std::to_string(st.folded + st.pending.size()) +
                                     " of " + std::to_string(slice_count) + " slices");
    }
    if (options.checkpoint) write_checkpoint(*options.checkpoint, st);
    return finish(st.merged, options.nu);
}

CategoryDistribution enumerate_q_naive(const TestSpec& spec, int nu) {
    spec.validate();
    std::vector<CompensatedSum> bins(static_cast<std::size_t>(nu) + 1);
    for (CompositionCursor cur(spec.df, spec.blocks); !cur.exhausted(); cur.next()) {
        const auto& x = cur.current();
        const double p = chi2_sf(spec.df, chi2_class_statistic(x, spec));
        bins[static_cast<std::size_t>(interval_index(p, nu))].add(
            std::exp(log_multinomial_pmf(spec.blocks, x, spec.null_probs)));
    }
    return finish(bins, nu);
}

// ---------------------------------------------------------------------------
// Binomial scans

CategoryDistribution binomial_scan_q(BinomialModel model, std::int64_t n, DftVariance variant, int nu) {
    if (n < 1) throw std::invalid_argument("binomial_scan_q: n must be positive");
    if (model == BinomialModel::Dft && n % 2 != 0) throw std::invalid_argument("binomial_scan_q: DFT needs even n");
    const auto bins = static_cast<std::size_t>(nu) + 1;

    auto p_of = [&](std::int64_t j) {
        return model == BinomialModel::Frequency ? frequency_p_value(j, n) : dft_p_value(j, n, variant);
    };

    if (model == BinomialModel::Frequency && n <= 60) {
        // Integer binomial coefficients: bin masses are exact dyadic rationals.
        std::vector<std::uint64_t> counts(bins, 0);
        std::uint64_t c = 1;
        for (std::int64_t j = 0; j <= n; ++j) {
            counts[static_cast<std::size_t>(interval_index(p_of(j), nu))] += c;
            c = c * static_cast<std::uint64_t>(n - j) / static_cast<std::uint64_t>(j + 1);
        }
        std::vector<CompensatedSum> sums(bins);
        for (std::size_t b = 0; b < bins; ++b) sums[b].add(std::ldexp(static_cast<double>(counts[b]), -static_cast<int>(n)));
        return finish(sums, nu);
    }

    const std::int64_t trials = model == BinomialModel::Frequency ? n : n / 2;
    const double prob = model == BinomialModel::Frequency ? 0.5 : 0.95;
    const double odds = prob / (1.0 - prob);
    // Weights relative to the mode via pmf ratios, normalized at the end; the
    // mode's absolute pmf from lgamma would carry ~1e-9 relative error.
    const auto mode = std::min<std::int64_t>(trials, static_cast<std::int64_t>(std::floor((trials + 1) * prob)));
    std::vector<CompensatedSum> sums(bins);
    CompensatedSum total;
    auto add = [&](std::int64_t j, double w) {
        sums[static_cast<std::size_t>(interval_index(p_of(j), nu))].add(w);
        total.add(w);
    };
    add(mode, 1.0);
    double w = 1.0;
    for (std::int64_t j = mode; j < trials && w > 0.0; ++j) {
        w *= static_cast<double>(trials - j) / static_cast<double>(j + 1) * odds;
        if (w > 0.0) add(j + 1, w);
    }
    w = 1.0;
    for (std::int64_t j = mode; j > 0 && w > 0.0; --j) {
        w *= static_cast<double>(j) / static_cast<double>(trials - j + 1) / odds;
        if (w > 0.0) add(j - 1, w);
    }
    const double norm = total.value();
    std::vector<CompensatedSum> scaled(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        scaled[b].sum = sums[b].sum / norm;
        scaled[b].comp = sums[b].comp / norm;
    }
    return finish(scaled, nu);
}

}  // namespace nistlimit
