#include "cli_common.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace nistlimit::cli {

namespace {

using nlohmann::json;

std::string fixed(double x, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

std::string distribution_table(const json& dist) {
    std::vector<std::vector<std::string>> rows;
    const auto& q = dist.at("q");
    const bool se = dist.contains("stderr") && dist.at("stderr").is_array();
    for (std::size_t i = 0; i < q.size(); ++i) {
        std::vector<std::string> r = {"q" + std::to_string(i), format_number(q[i])};
        if (se) r.push_back(format_number(dist.at("stderr")[i]));
        rows.push_back(std::move(r));
    }
    std::vector<std::string> header = {"bin", "q"};
    if (se) header.push_back("stderr");
    return render_table(header, rows);
}

std::string report_table(const json& report) {
    std::vector<std::vector<std::string>> rows = {
        {"delta", format_number(report.at("delta"))},
        {"u", format_number(report.at("u"))},
        {"N_0.25 (safe)", format_number(report.at("n_safe"))},
        {"N_0.0001 (risky)", format_number(report.at("n_risky"))},
        {"chi2 quantile (safe)", format_number(report.at("quantile_safe"))},
        {"chi2 quantile (risky)", format_number(report.at("quantile_risky"))},
        {"q source", format_number(report.at("q_source"))},
    };
    return render_table({"quantity", "value"}, rows);
}

std::function<double(const BitBlock&)> sequence_test(TestId id, std::int64_t m, DftVariance sigma) {
    TestConfig cfg{id, 0, m, sigma};
    return [cfg](const BitBlock& b) {
        TestConfig local = cfg;
        local.n = static_cast<std::int64_t>(b.size());
        const auto r = run_one_level(local, b);
        if (!r) throw std::invalid_argument("segment yields no p-value");
        return r->front();
    };
}

BitSource open_source(const std::string& gen, const std::string& input, const std::string& format, const Seed& seed) {
    const GeneratorKind kind = parse_generator_kind(gen);
    if (kind != GeneratorKind::File) return BitSource::generator(kind, seed);
    if (input.empty()) throw UsageError("--gen file needs --input");
    const FileFormat ff = format == "binary" ? FileFormat::Binary : format == "ascii" ? FileFormat::Ascii : FileFormat::Auto;
    try {
        return BitSource::from_file(input, ff);
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::exception& e) {
        throw IoError(e.what());
    }
}

// ---------------------------------------------------------------------------

struct ExactQArgs {
    std::string test;
    double n = 1e6;
    double m = 0;
    int x = 0;
    std::string sigma = "sigma0";
    int nu = 9;
    double partitions = 64;
    double budget = 1e10;
    std::string checkpoint;
    double checkpoint_every = 1e8;
    std::string out;
};

int run_exact_q(const Context& ctx, const ExactQArgs& a) {
    const TestId id = parse_test_id(a.test);
    const auto n = static_cast<std::int64_t>(to_count(a.n, "--n"));
    const auto m = static_cast<std::int64_t>(to_count(a.m, "--m", true));
    json config = {{"test", a.test}, {"n", n}, {"m", m}, {"x", a.x}, {"sigma", a.sigma}, {"nu", a.nu},
                   {"partitions", a.partitions}, {"budget", a.budget}, {"checkpoint", a.checkpoint},
                   {"checkpoint_every", a.checkpoint_every}, {"threads", ctx.threads}};

    auto enumerate = [&](const TestSpec& spec, const std::string& suffix) {
        EnumerationOptions opt;
        opt.nu = a.nu;
        opt.partitions = to_count(a.partitions, "--partitions");
        opt.threads = ctx.threads;
        opt.budget = to_count(a.budget, "--budget");
        opt.checkpoint_every = to_count(a.checkpoint_every, "--checkpoint-every");
        if (!a.checkpoint.empty()) opt.checkpoint = a.checkpoint + suffix;
        int last_decile = -1;
        opt.progress = [&](const EnumerationProgress& p) {
            const int decile = p.compositions_total ? static_cast<int>(10.0 * p.compositions_done / p.compositions_total) : 10;
            if (decile != last_decile) {
                last_decile = decile;
                note(ctx, spec.name + ": " + std::to_string(p.compositions_done) + " / " +
                              std::to_string(p.compositions_total) + " compositions");
            }
        };
        return enumerate_q(spec, opt);
    };

    json result;
    std::string text;
    auto describe = [&](const CategoryDistribution& d, const std::string& label) {
        json entry = to_json(d);
        entry["label"] = label;
        const auto rep = make_discrepancy_report(d);
        entry["discrepancy"] = to_json(rep);
        text += label + "\n" + distribution_table(entry) + "\n" + report_table(entry["discrepancy"]) + "\n";
        return entry;
    };

    if (id == TestId::BlockFrequency) {
        throw std::invalid_argument("block-frequency has no exact enumeration here; use mc-q");
    }
    if (id == TestId::Frequency || id == TestId::Dft) {
        const auto model = id == TestId::Frequency ? BinomialModel::Frequency : BinomialModel::Dft;
        const auto sigma = parse_dft_variance(a.sigma);
        const auto d = binomial_scan_q(model, n, sigma, a.nu);
        result = describe(d, a.test);
        result["method"] = "binomial-scan";
    } else if (id == TestId::Excursion) {
        if (a.x < 0 || a.x > 4) throw std::invalid_argument("--x must be 1..4, or 0 for all");
        std::vector<int> xs;
        if (a.x == 0) {
            xs = {1, 2, 3, 4};
        } else {
            xs = {a.x};
        }
        json dists = json::array();
        for (int x : xs) {
            const TestSpec spec = random_excursion_spec(x);
            config["workload_x" + std::to_string(x)] = estimate_workload(spec);
            const auto d = enumerate(spec, ".x" + std::to_string(x));
            for (int sign : {-1, 1}) {
                dists.push_back(describe(d, "x=" + std::to_string(sign * x)));
            }
        }
        std::sort(dists.begin(), dists.end(), [](const json& l, const json& r) {
            return std::stoi(l["label"].get<std::string>().substr(2)) < std::stoi(r["label"].get<std::string>().substr(2));
        });
        result["distributions"] = std::move(dists);
        result["method"] = "enumeration";
    } else {
        const TestSpec spec = build_spec(id, n, m, 0);
        config["workload"] = estimate_workload(spec);
        config["spec"] = to_json(spec);
        const auto d = enumerate(spec, "");
        result = describe(d, a.test);
        result["method"] = "enumeration";
    }

    std::cout << text;
    const std::string name = a.out.empty() ? "exact_q_" + a.test + ".json" : a.out;
    emit_json(ctx, name, envelope("exact-q", config, result));
    return kSuccess;
}

// ---------------------------------------------------------------------------

struct McQArgs {
    std::string test;
    double n = 1e6;
    double m = 0;
    int x = 1;
    double M = 0;
    double streams = 10;
    double seed = 1;
    std::string gen;
    std::string sigma = "sigma2";
    double checkpoint_every = 0;
    int nu = 9;
    std::string out;
};

int run_mc_q(const Context& ctx, const McQArgs& a) {
    const TestId id = parse_test_id(a.test);
    const auto n = static_cast<std::int64_t>(to_count(a.n, "--n"));
    const auto m = static_cast<std::int64_t>(to_count(a.m, "--m", true));
    const std::uint64_t M = to_count(a.M, "--M");
    const std::uint64_t seed_index = to_count(a.seed, "--seed", true);
    MCOptions opt;
    opt.nu = a.nu;
    opt.streams = to_count(a.streams, "--streams");
    opt.checkpoint_every = to_count(a.checkpoint_every, "--checkpoint-every", true);
    opt.threads = ctx.threads;
    opt.seed = experiment_seed(seed_index);
    json config = {{"test", a.test}, {"n", n}, {"m", m}, {"x", a.x}, {"M", M}, {"streams", opt.streams},
                   {"seed", seed_index}, {"seed_hex", to_hex(opt.seed)}, {"sigma", a.sigma},
                   {"checkpoint_every", opt.checkpoint_every}, {"nu", a.nu}, {"threads", ctx.threads}};

    MCTrace trace;
    if (id == TestId::BlockFrequency) {
        if (m < 1) throw std::invalid_argument("block-frequency needs --m");
        opt.generator = a.gen.empty() ? GeneratorKind::SplitStream : parse_generator_kind(a.gen);
        trace = mc_block_frequency_q(n, m, M, opt);
    } else if (id == TestId::Dft || id == TestId::Frequency) {
        const std::string gen = a.gen.empty() ? "mt" : a.gen;
        const BitSource src = open_source(gen, "", "auto", opt.seed);
        TestConfig check{id, n, m, parse_dft_variance(a.sigma)};
        check.validate();
        trace = mc_sequence_q(a.test, n, M, src, sequence_test(id, m, check.sigma), opt);
    } else {
        opt.generator = a.gen.empty() ? GeneratorKind::SplitStream : parse_generator_kind(a.gen);
        const TestSpec spec = build_spec(id, n, m, a.x);
        config["spec"] = to_json(spec);
        trace = mc_class_q(spec, M, opt);
    }
    config["generator"] = trace.source;

    json result = to_json(trace);
    result["discrepancy"] = to_json(make_discrepancy_report(trace.final));
    std::cout << distribution_table(result["final"]) << '\n' << report_table(result["discrepancy"])
              << "delta_sd (jackknife)  " << format_number(result["delta_sd"]) << "\n"
              << "u_sd (jackknife)      " << format_number(result["u_sd"]) << "\n"
              << "delta bias nu/M       " << format_number(result["delta_bias"]) << "\n";

    const std::string stem = a.out.empty() ? "mc_q_" + a.test : a.out;
    std::ostringstream csv;
    write_trace_csv(trace, csv);
    emit_text(ctx, stem + "_trace.csv", csv.str());
    emit_json(ctx, stem + ".json", envelope("mc-q", config, result));
    return kSuccess;
}

// ---------------------------------------------------------------------------

struct LimitsArgs {
    std::string dist;
    std::vector<double> q;
    double delta = 0;
    int nu = 9;
    double alpha_risky = 1e-4;
    double alpha_safe = 0.25;
    bool printed = false;
    std::string label;
    std::string out;
};

int run_limits(const Context& ctx, const LimitsArgs& a) {
    CategoryDistribution d;
    json config = {{"alpha_risky", a.alpha_risky}, {"alpha_safe", a.alpha_safe}, {"nu", a.nu}, {"printed", a.printed}};
    if (!a.dist.empty()) {
        const json j = read_json_file(a.dist);
        const json& body = j.contains("result") ? j.at("result") : j;
        if (body.contains("distributions")) {
            if (a.label.empty()) throw UsageError("file holds several distributions; pick one with --label");
            bool found = false;
            for (const auto& e : body.at("distributions")) {
                if (e.value("label", std::string()) == a.label) {
                    d = distribution_from_json(e);
                    found = true;
                }
            }
            if (!found) throw std::invalid_argument("no distribution labelled " + a.label);
        } else {
            d = distribution_from_json(body);
        }
        config["dist"] = a.dist;
    } else if (!a.q.empty()) {
        d.q = a.q;
        d.nu = static_cast<int>(a.q.size()) - 1;
        config["q"] = a.q;
    } else {
        throw UsageError("limits needs --dist or --q");
    }
    if (d.nu != a.nu) throw std::invalid_argument("distribution has " + std::to_string(d.q.size()) + " bins, expected " + std::to_string(a.nu + 1));

    const double tol = a.printed ? kPrintedSumTolerance : kProbabilitySumTolerance;
    DiscrepancyReport rep = make_discrepancy_report(d, {}, a.alpha_risky, a.alpha_safe, tol);
    if (a.delta > 0.0) {
        config["delta_override"] = a.delta;
        rep.delta = a.delta;
        const SampleSizes s = risky_safe_sizes(rep.delta, rep.u, rep.nu, a.alpha_risky, a.alpha_safe);
        rep.n_safe = s.n_safe;
        rep.n_risky = s.n_risky;
    }
    const json result = to_json(rep);
    std::cout << report_table(result);
    const std::string name = a.out.empty() ? "limits.json" : a.out;
    emit_json(ctx, name, envelope("limits", config, result));
    if (rep.delta == 0.0) {
        std::cout << "no finite limits (delta=0)\n";
        return kValidation;
    }
    if (!rep.n_safe) std::cout << "no safe size: u nu exceeds chi2 quantile - nu\n";
    return kSuccess;
}

// ---------------------------------------------------------------------------

struct TwoLevelArgs {
    std::string gen = "mt";
    std::string input;
    std::string format = "auto";
    double seed = 1;
    double seeds = 1;
    std::string test;
    double n = 1e6;
    double m = 0;
    std::string sigma = "sigma2";
    double N = 0;
    std::string null_spec = "uniform";
    int nu = 9;
    std::string out;
};

int run_two_level_cmd(const Context& ctx, const TwoLevelArgs& a) {
    TestConfig test;
    test.id = parse_test_id(a.test);
    test.n = static_cast<std::int64_t>(to_count(a.n, "--n"));
    test.m = static_cast<std::int64_t>(to_count(a.m, "--m", true));
    test.sigma = parse_dft_variance(a.sigma);
    test.validate();
    const auto N = static_cast<std::int64_t>(to_count(a.N, "--N"));
    const std::uint64_t first = to_count(a.seed, "--seed", true);
    const std::uint64_t count = to_count(a.seeds, "--seeds");
    if (a.gen == "file" && count != 1) throw UsageError("a file source supports one run");

    const auto nulls = load_nulls(a.null_spec, test.series_labels(), a.nu);
    json config = {{"gen", a.gen}, {"input", a.input}, {"seed", first}, {"seeds", count}, {"test", a.test},
                   {"n", test.n}, {"m", test.m}, {"sigma", a.sigma}, {"N", N}, {"null", a.null_spec},
                   {"nu", a.nu}, {"threads", ctx.threads}};

    json runs = json::array();
    std::vector<std::vector<std::string>> rows;
    for (std::uint64_t s = first; s < first + count; ++s) {
        BitSource src = open_source(a.gen, a.input, a.format, experiment_seed(s));
        const json seed = seed_record(s, src);
        note(ctx, "two-level " + a.test + " N=" + std::to_string(N) + " seed " + std::to_string(s));
        const TwoLevelResult r = run_two_level(src, test, N, nulls, ctx.threads);
        json entry = to_json(r);
        entry["seed"] = seed;
        for (const auto& series : entry["series"]) {
            rows.push_back({std::to_string(s), series["label"].get<std::string>(), format_number(series["chi2"]),
                            format_number(series["p_second"])});
        }
        runs.push_back(std::move(entry));
    }
    std::cout << render_table({"seed", "series", "chi2", "p_second"}, rows);
    const std::string name = a.out.empty() ? "two_level_" + a.test + ".json" : a.out;
    emit_json(ctx, name, envelope("two-level", config, {{"runs", runs}}));
    return kSuccess;
}

// ---------------------------------------------------------------------------

struct GenArgs {
    std::string gen = "mt";
    double seed = 1;
    double bits = 1e6;
    std::string format = "binary";
    std::string out;
};

int run_gen(const Context& ctx, const GenArgs& a) {
    const std::uint64_t s = to_count(a.seed, "--seed", true);
    const std::uint64_t bits = to_count(a.bits, "--bits");
    if (a.gen == "file") throw UsageError("gen needs a generator, not a file");
    BitSource src = BitSource::generator(parse_generator_kind(a.gen), experiment_seed(s));
    const json seed = seed_record(s, src);
    const std::filesystem::path path =
        a.out.empty() ? ctx.out_dir / ("gen_" + a.gen + "_" + std::to_string(s) + (a.format == "ascii" ? ".txt" : ".bin"))
                      : std::filesystem::path(a.out);
    std::string payload;
    constexpr std::uint64_t kChunk = 1u << 20;
    for (std::uint64_t done = 0; done < bits; done += kChunk) {
        const std::uint64_t take = std::min(kChunk, bits - done);
        const BitBlock b = src.next_block(static_cast<std::size_t>(take));
        if (a.format == "ascii") {
            payload += b.to_string();
        } else {
            for (std::size_t i = 0; i < take; i += 8) {
                unsigned char byte = 0;
                for (std::size_t k = 0; k < 8; ++k) {
                    byte = static_cast<unsigned char>(byte << 1);
                    if (i + k < take && b[i + k]) byte |= 1;
                }
                payload.push_back(static_cast<char>(byte));
            }
        }
    }
    if (a.format == "ascii") payload.push_back('\n');
    write_text_file(path, payload);
    const json config = {{"gen", a.gen}, {"seed", seed}, {"bits", bits}, {"format", a.format}, {"path", path.string()}};
    emit_json(ctx, path.filename().string() + ".json", envelope("gen", config, {{"bits", bits}}));
    note(ctx, "wrote " + path.string());
    return kSuccess;
}

}  // namespace

void add_exact_q(CLI::App& app, Context& ctx) {
    auto args = std::make_shared<ExactQArgs>();
    auto* sub = app.add_subcommand("exact-q", "Exact distribution of approximated p-values");
    sub->add_option("--test", args->test, "One-level test")->required()->check(CLI::IsMember(test_names()));
    sub->add_option("--n", args->n, "Sequence length in bits")->capture_default_str();
    sub->add_option("--m", args->m, "Block length");
    sub->add_option("--x", args->x, "Random excursion state |x| (0 = all)")->capture_default_str();
    sub->add_option("--sigma", args->sigma, "DFT variance variant")->check(CLI::IsMember({"sigma0", "sigma1", "sigma2"}))->capture_default_str();
    sub->add_option("--nu", args->nu, "Number of intervals minus one")->capture_default_str();
    sub->add_option("--partitions", args->partitions, "Work slices")->capture_default_str();
    sub->add_option("--budget", args->budget, "Maximum compositions without a checkpoint")->capture_default_str();
    sub->add_option("--checkpoint", args->checkpoint, "Checkpoint file (enables resume)");
    sub->add_option("--checkpoint-every", args->checkpoint_every, "Compositions between checkpoint writes")->capture_default_str();
    sub->add_option("--out", args->out, "Output file name");
    sub->callback([&ctx, args] { ctx.exit_code = guarded([&] { return run_exact_q(ctx, *args); }); });
}

void add_mc_q(CLI::App& app, Context& ctx) {
    auto args = std::make_shared<McQArgs>();
    auto* sub = app.add_subcommand("mc-q", "Monte Carlo estimate of the distribution with a convergence trace");
    sub->add_option("--test", args->test, "One-level test")->required()->check(CLI::IsMember(test_names()));
    sub->add_option("--n", args->n, "Sequence length in bits")->capture_default_str();
    sub->add_option("--m", args->m, "Block length");
    sub->add_option("--x", args->x, "Random excursion state")->capture_default_str();
    sub->add_option("--M", args->M, "Number of samples")->required();
    sub->add_option("--streams", args->streams, "Independent streams")->capture_default_str();
    sub->add_option("--seed", args->seed, "Experiment seed index")->capture_default_str();
    sub->add_option("--gen", args->gen, "Generator")->check(CLI::IsMember({"mt", "sha1", "well", "split"}));
    sub->add_option("--sigma", args->sigma, "DFT variance variant")->check(CLI::IsMember({"sigma0", "sigma1", "sigma2"}))->capture_default_str();
    sub->add_option("--checkpoint-every", args->checkpoint_every, "Samples between trace points (0 = M/100)");
    sub->add_option("--nu", args->nu, "Number of intervals minus one")->capture_default_str();
    sub->add_option("--out", args->out, "Output file stem");
    sub->callback([&ctx, args] { ctx.exit_code = guarded([&] { return run_mc_q(ctx, *args); }); });
}

void add_limits(CLI::App& app, Context& ctx) {
    auto args = std::make_shared<LimitsArgs>();
    auto* sub = app.add_subcommand("limits", "Discrepancy and safe/risky second-level sample sizes");
    sub->add_option("--dist", args->dist, "Distribution JSON (exact-q or mc-q output, or {\"q\": [...]})");
    sub->add_option("--q", args->q, "Distribution given inline")->delimiter(',');
    sub->add_option("--label", args->label, "Distribution label in a multi-distribution file");
    sub->add_option("--delta", args->delta, "Use this delta instead of the recomputed one");
    sub->add_option("--nu", args->nu, "Number of intervals minus one")->capture_default_str();
    sub->add_option("--alpha-risky", args->alpha_risky, "Risky significance")->capture_default_str();
    sub->add_option("--alpha-safe", args->alpha_safe, "Safe significance")->capture_default_str();
    sub->add_flag("--printed", args->printed, "Accept 7-digit rounded input (sum within 1e-6)");
    sub->add_option("--out", args->out, "Output file name");
    sub->callback([&ctx, args] { ctx.exit_code = guarded([&] { return run_limits(ctx, *args); }); });
}

void add_two_level(CLI::App& app, Context& ctx) {
    auto args = std::make_shared<TwoLevelArgs>();
    auto* sub = app.add_subcommand("two-level", "Second-level chi-squared test on a generator");
    sub->add_option("--gen", args->gen, "Generator")->check(CLI::IsMember(generator_names()))->capture_default_str();
    sub->add_option("--input", args->input, "Bit file for --gen file");
    sub->add_option("--format", args->format, "Bit file format")->check(CLI::IsMember({"auto", "binary", "ascii"}));
    sub->add_option("--seed", args->seed, "First experiment seed index")->capture_default_str();
    sub->add_option("--seeds", args->seeds, "Number of runs with consecutive seeds")->capture_default_str();
    sub->add_option("--test", args->test, "One-level test")->required()->check(CLI::IsMember(test_names()));
    sub->add_option("--n", args->n, "First sample size (bits)")->capture_default_str();
    sub->add_option("--m", args->m, "Block length");
    sub->add_option("--sigma", args->sigma, "DFT variance variant")->check(CLI::IsMember({"sigma0", "sigma1", "sigma2"}))->capture_default_str();
    sub->add_option("--N", args->N, "Second sample size")->required();
    sub->add_option("--null", args->null_spec, "uniform | exact:<file> | mc:<file>")->capture_default_str();
    sub->add_option("--nu", args->nu, "Number of intervals minus one")->capture_default_str();
    sub->add_option("--out", args->out, "Output file name");
    sub->callback([&ctx, args] { ctx.exit_code = guarded([&] { return run_two_level_cmd(ctx, *args); }); });
}

void add_gen(CLI::App& app, Context& ctx) {
    auto args = std::make_shared<GenArgs>();
    auto* sub = app.add_subcommand("gen", "Dump generator output to a file");
    sub->add_option("--gen", args->gen, "Generator")->check(CLI::IsMember({"mt", "sha1", "well", "split"}))->capture_default_str();
    sub->add_option("--seed", args->seed, "Experiment seed index")->capture_default_str();
    sub->add_option("--bits", args->bits, "Number of bits")->capture_default_str();
    sub->add_option("--format", args->format, "binary (MSB first) or ascii")->check(CLI::IsMember({"binary", "ascii"}))->capture_default_str();
    sub->add_option("--out", args->out, "Output path");
    sub->callback([&ctx, args] { ctx.exit_code = guarded([&] { return run_gen(ctx, *args); }); });
}

}  // namespace nistlimit::cli
