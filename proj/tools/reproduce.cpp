#include "cli_common.hpp"

#include <cmath>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

namespace nistlimit::cli {

namespace {

using nlohmann::json;

struct ReproduceArgs {
    std::string target;
    std::string reference;
    int x = 0;
    double M = 0;
    double seeds = 5;
    double seed = 1;
    int row = -1;
    bool enumerate = false;
    bool long_run = false;
    double budget = 1e10;
    double bit_budget = 1e11;
    std::string out;
};

std::string flag(bool ok) { return ok ? "match" : "MISMATCH"; }

bool within_one(const json& ours, std::int64_t published) {
    return !ours.is_null() && std::llabs(ours.get<std::int64_t>() - published) <= 1;
}

std::vector<double> normalized(std::vector<double> q) {
    const double s = std::accumulate(q.begin(), q.end(), 0.0);
    for (double& v : q) v /= s;
    return q;
}

// Round-trip of one printed column: q -> (delta, u) -> sample sizes.
json round_trip(const json& column, std::vector<std::vector<std::string>>& rows) {
    const auto q = column.at("q").get<std::vector<double>>();
    const auto p = uniform_probs(static_cast<int>(q.size()) - 1);
    const double delta = chi2_discrepancy(q, p, kPrintedSumTolerance);
    const double u = max_ratio_dev(q, p, kPrintedSumTolerance);
    const double printed_delta = column.at("delta").get<double>();
    const SampleSizes from_printed = risky_safe_sizes(printed_delta, u);
    const SampleSizes from_recomputed = risky_safe_sizes(delta, u);
    const auto safe = column.at("n_safe").get<std::int64_t>();
    const auto risky = column.at("n_risky").get<std::int64_t>();
    json out = {{"id", column.at("id")},
                {"delta_recomputed", round_significant(delta)},
                {"delta_printed", printed_delta},
                {"delta_match", std::fabs(delta - printed_delta) <= 1e-8},
                {"u", round_significant(u)},
                {"n_safe", from_printed.n_safe ? json(*from_printed.n_safe) : json(nullptr)},
                {"n_risky", from_printed.n_risky},
                {"n_safe_recomputed_delta", from_recomputed.n_safe ? json(*from_recomputed.n_safe) : json(nullptr)},
                {"n_risky_recomputed_delta", from_recomputed.n_risky},
                {"published", {safe, risky}}};
    out["sizes_match"] = within_one(out["n_safe"], safe) && within_one(out["n_risky"], risky);
    rows.push_back({column.at("id").get<std::string>(), format_number(out["delta_recomputed"]),
                    format_number(out["delta_printed"]), format_number(out["u"]), format_number(out["n_safe"]),
                    std::to_string(safe), format_number(out["n_risky"]), std::to_string(risky),
                    flag(out["delta_match"].get<bool>() && out["sizes_match"].get<bool>())});
    return out;
}

const std::vector<std::string> kRoundTripHeader = {"column", "delta",   "delta (printed)", "u",     "N_0.25",
                                                   "published", "N_0.0001", "published",       "status"};

json enumerate_column(const Context& ctx, const ReproduceArgs& a, const TestSpec& spec, const json& column) {
    EnumerationOptions opt;
    opt.partitions = 64;
    opt.threads = ctx.threads;
    opt.budget = a.long_run ? std::numeric_limits<std::uint64_t>::max() : to_count(a.budget, "--budget");
    note(ctx, "enumerating " + spec.name + " (" + std::to_string(estimate_workload(spec)) + " compositions)");
    const CategoryDistribution d = enumerate_q(spec, opt);
    const auto printed = column.at("q").get<std::vector<double>>();
    double worst = 0.0;
    for (std::size_t i = 0; i < printed.size(); ++i) worst = std::max(worst, std::fabs(d.q[i] - printed[i]));
    json j = to_json(d);
    j["max_abs_diff"] = round_significant(worst);
    j["within_5e-7"] = worst <= 5e-7;
    return j;
}

int table_round_trip(const Context& ctx, const ReproduceArgs& a, const json& ref, const std::string& table) {
    std::vector<std::vector<std::string>> rows;
    json columns = json::array();
    bool all_ok = true;
    for (const auto& column : ref.at(table).at("columns")) {
        if (table == "T3" && a.x != 0 && column.at("x").get<int>() != a.x) continue;
        json entry = round_trip(column, rows);
        all_ok = all_ok && entry["delta_match"].get<bool>() && entry["sizes_match"].get<bool>();
        if (a.enumerate) {
            const std::string test = column.at("test");
            const TestSpec spec = test == "excursion"
                                      ? random_excursion_spec(column.at("x").get<int>())
                                      : build_spec(parse_test_id(test), column.at("n").get<std::int64_t>(),
                                                   column.value("m", std::int64_t{0}), 0);
            entry["enumeration"] = enumerate_column(ctx, a, spec, column);
        }
        columns.push_back(std::move(entry));
    }
    if (columns.empty()) throw std::invalid_argument("--x must be 1..4, or 0 for all");
    std::cout << render_table(kRoundTripHeader, rows);
    for (const auto& c : columns) {
        if (c.contains("enumeration")) {
            std::cout << c["id"].get<std::string>() << ": enumeration max |q - printed| = "
                      << format_number(c["enumeration"]["max_abs_diff"]) << '\n';
        }
    }
    const json config = {{"target", table}, {"x", a.x}, {"enumerate", a.enumerate}, {"long_run", a.long_run}};
    emit_json(ctx, a.out.empty() ? "reproduce_" + table + ".json" : a.out,
              envelope("reproduce", config, {{"columns", columns}, {"all_match", all_ok}}));
    return kSuccess;
}

int dft_limits(const Context& ctx, const ReproduceArgs& a, const json& ref) {
    const json& mc = ref.at("monte_carlo").at("dft_sigma2");
    const SampleSizes s = risky_safe_sizes(mc.at("delta").get<double>(), mc.at("u").get<double>());
    std::vector<std::vector<std::string>> rows;
    json result = json::object();
    rows.push_back({"monte carlo q' (sigma2)", std::to_string(*s.n_safe), std::to_string(s.n_risky),
                    std::to_string(mc.at("n_safe").get<std::int64_t>()), std::to_string(mc.at("n_risky").get<std::int64_t>())});
    result["monte_carlo"] = {{"n_safe", *s.n_safe}, {"n_risky", s.n_risky}};
    const json& scan = ref.at("scan").at("dft");
    for (auto sigma : {DftVariance::Sigma0, DftVariance::Sigma1, DftVariance::Sigma2}) {
        const auto d = binomial_scan_q(BinomialModel::Dft, scan.at("n").get<std::int64_t>(), sigma);
        const auto rep = make_discrepancy_report(d);
        const std::string label = "binomial scan (" + std::string(to_string(sigma)) + ")";
        result[std::string(to_string(sigma))] = to_json(rep);
        rows.push_back({label, format_number(result[std::string(to_string(sigma))]["n_safe"]),
                        format_number(result[std::string(to_string(sigma))]["n_risky"]), std::to_string(scan.at("n_safe").get<std::int64_t>()),
                        std::to_string(scan.at("n_risky").get<std::int64_t>())});
    }
    std::cout << render_table({"source", "N_0.25", "N_0.0001", "published N_0.25", "published N_0.0001"}, rows);
    emit_json(ctx, a.out.empty() ? "reproduce_T8-limits.json" : a.out,
              envelope("reproduce", {{"target", "T8-limits"}}, result));
    return kSuccess;
}

// F1/F2 Linear m=500, F3/F4 Block Frequency m=128, F5/F6 DFT: delta and u traces.
int trace_target(const Context& ctx, const ReproduceArgs& a, const json& ref, int number) {
    const int pair = (number - 1) / 2;
    static const char* keys[] = {"linear_m500", "block_frequency_m128", "dft_sigma2"};
    static const double desk_M[] = {1e6, 1e5, 1e3};
    const json& stored = ref.at("monte_carlo").at(keys[pair]);
    const std::uint64_t M = a.M > 0 ? to_count(a.M, "--M") : static_cast<std::uint64_t>(desk_M[pair]);
    constexpr std::uint64_t kDeskLimit = 100'000'000;
    if (M > kDeskLimit && !a.long_run) {
        std::cerr << "M = " << M << " is beyond desk scale (" << kDeskLimit << "); pass --long-run\n";
        return kValidation;
    }
    MCOptions opt;
    opt.threads = ctx.threads;
    opt.seed = experiment_seed(to_count(a.seed, "--seed", true));
    MCTrace trace;
    if (pair == 0) {
        trace = mc_class_q(linear_complexity_spec(1'000'000, 500), M, opt);
    } else if (pair == 1) {
        trace = mc_block_frequency_q(1'000'000, 128, M, opt);
    } else {
        const BitSource src = BitSource::generator(GeneratorKind::Mt19937, opt.seed);
        trace = mc_sequence_q("dft", 1'000'000, M, src,
                              [](const BitBlock& b) { return dft_test(b, DftVariance::Sigma2); }, opt);
    }
    const double ref_delta = stored.at("delta").get<double>();
    const double ref_u = stored.at("u").get<double>();
    // The plug-in delta carries a positive bias of about nu/M.
    const double z_delta = trace.delta_sd > 0 ? (trace.delta - trace.delta_bias - ref_delta) / trace.delta_sd : 0.0;
    const double z_u = trace.u_sd > 0 ? (trace.u - ref_u) / trace.u_sd : 0.0;
    json result = to_json(trace);
    result["reference"] = stored;
    result["z_delta"] = round_significant(z_delta);
    result["z_u"] = round_significant(z_u);
    result["consistent"] = std::fabs(z_delta) <= 4.0;
    std::vector<std::vector<std::string>> rows = {
        {"delta", format_number(result["delta"]), format_number(result["delta_sd"]), format_number(result["delta_bias"]),
         format_number(stored.at("delta")), format_number(result["z_delta"])},
        {"u", format_number(result["u"]), format_number(result["u_sd"]), "-", format_number(stored.at("u")),
         format_number(result["z_u"])}};
    std::cout << render_table({"quantity", "estimate", "sd", "bias", "reference", "z"}, rows);
    const std::string stem = a.out.empty() ? "reproduce_F" + std::to_string(number) : a.out;
    std::ostringstream csv;
    write_trace_csv(trace, csv);
    emit_text(ctx, stem + "_trace.csv", csv.str());
    const json config = {{"target", "F" + std::to_string(number)}, {"M", M}, {"seed_hex", to_hex(opt.seed)}};
    emit_json(ctx, stem + ".json", envelope("reproduce", config, result));
    return kSuccess;
}

// Null distributions for the corrected second-level tests, from the stored
// printed q vectors (renormalized, since they carry 7-digit rounding).
std::vector<SecondLevelNull> stored_nulls(const json& ref, const json& row, const TestConfig& test) {
    const std::string kind = row.at("null");
    if (kind == "uniform") return {SecondLevelNull::uniform(9)};
    const NullKind nk = kind == "mc" ? NullKind::MC : NullKind::Exact;
    auto find_t1 = [&](const std::string& id, std::int64_t m) {
        for (const auto& c : ref.at("T1").at("columns")) {
            if (c.at("test") == id && (id == "overlap" || c.value("m", std::int64_t{0}) == m)) {
                return c.at("q").get<std::vector<double>>();
            }
        }
        throw std::invalid_argument("no stored distribution for " + id);
    };
    if (nk == NullKind::MC) {
        const std::string key = test.id == TestId::Linear ? "linear_m500"
                                : test.id == TestId::BlockFrequency ? "block_frequency_m128"
                                                                    : "dft_sigma2";
        return {SecondLevelNull::from_probs(nk, normalized(ref.at("T11").at(key).get<std::vector<double>>()))};
    }
    if (test.id == TestId::Excursion) {
        std::vector<SecondLevelNull> out;
        for (const auto& label : test.series_labels()) {
            const int x = std::abs(std::stoi(label.substr(2)));
            for (const auto& c : ref.at("T3").at("columns")) {
                if (c.at("x").get<int>() == x) {
                    out.push_back(SecondLevelNull::from_probs(nk, normalized(c.at("q").get<std::vector<double>>())));
                }
            }
        }
        return out;
    }
    return {SecondLevelNull::from_probs(nk, normalized(find_t1(std::string(to_string(test.id)), test.m)))};
}

int qualitative(const Context& ctx, const ReproduceArgs& a, const json& ref, const std::string& table) {
    const json& rows = ref.at("two_level").at(table);
    const std::uint64_t seeds = to_count(a.seeds, "--seeds");
    const std::uint64_t first = to_count(a.seed, "--seed", true);
    std::vector<std::size_t> selected;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (a.row < 0 || static_cast<std::size_t>(a.row) == i) selected.push_back(i);
    }
    if (selected.empty()) throw std::invalid_argument("--row out of range");

    // Excursion rows differ only by x and share one run.
    auto run_key = [](const json& r) {
        return r.at("test").get<std::string>() + "|" + std::to_string(r.value("m", 0)) + "|" + r.value("sigma", "") +
               "|" + r.at("gen").get<std::string>() + "|" + r.at("null").get<std::string>() + "|" +
               std::to_string(r.at("N").get<std::int64_t>());
    };
    std::map<std::string, json> runs;
    double bits = 0.0;
    for (auto i : selected) {
        const json& r = rows[i];
        if (!runs.count(run_key(r))) {
            runs[run_key(r)] = nullptr;
            bits += static_cast<double>(r.at("N").get<std::int64_t>()) * 1e6 * static_cast<double>(seeds);
        }
    }
    const double bit_budget = a.bit_budget;
    if (bits > bit_budget && !a.long_run) {
        std::cerr << table << " needs about " << bits << " generated bits (budget " << bit_budget
                  << "); pass --long-run, or select a row with --row\n";
        return kValidation;
    }

    std::vector<std::vector<std::string>> text;
    json report = json::array();
    for (auto i : selected) {
        const json& r = rows[i];
        TestConfig test;
        test.id = parse_test_id(r.at("test").get<std::string>());
        test.n = 1'000'000;
        test.m = r.value("m", std::int64_t{0});
        if (r.contains("sigma")) test.sigma = parse_dft_variance(r.at("sigma").get<std::string>());
        test.validate();
        const auto N = r.at("N").get<std::int64_t>();
        json& cached = runs[run_key(r)];
        if (cached.is_null()) {
            const auto nulls = stored_nulls(ref, r, test);
            cached = json::array();
            for (std::uint64_t s = first; s < first + seeds; ++s) {
                BitSource src = BitSource::generator(parse_generator_kind(r.at("gen").get<std::string>()), experiment_seed(s));
                note(ctx, table + " row " + std::to_string(i) + " seed " + std::to_string(s));
                json res = to_json(run_two_level(src, test, N, nulls, ctx.threads));
                res["seed"] = seed_record(s, src);
                cached.push_back(std::move(res));
            }
        }
        // Our p-values for this row's series.
        std::vector<double> ours;
        std::vector<std::string> series_of_min;
        for (const auto& run : cached) {
            double chosen = 1.0;
            std::string where;
            for (const auto& s : run.at("series")) {
                const std::string label = s.at("label");
                const double p = s.at("p_second");
                if (r.contains("x")) {
                    if (label == "x=" + std::to_string(r.at("x").get<int>())) chosen = p;
                } else if (r.contains("rejections")) {
                    if (p < chosen) {
                        chosen = p;
                        where = label;
                    }
                } else {
                    chosen = p;
                }
            }
            ours.push_back(chosen);
            series_of_min.push_back(where);
        }
        // Qualitative summary: runs below 1e-3 (Bonferroni over eight series for T10-style rows).
        const double level = r.contains("rejections") ? 1e-4 : 1e-3;
        int ours_rejected = 0;
        for (double p : ours) ours_rejected += p < level;
        int published_rejected = 0;
        if (r.contains("rejections")) {
            for (const auto& e : r.at("rejections")) published_rejected += !e.is_null();
        } else {
            for (const auto& p : r.at("p")) published_rejected += p.get<double>() < level;
        }
        const bool agree = (2 * ours_rejected > static_cast<int>(ours.size())) ==
                           (2 * published_rejected > static_cast<int>(r.contains("p") ? r.at("p").size() : 5));
        json entry = {{"row", i}, {"published", r}, {"p_second", ours}, {"level", level},
                      {"rejected", ours_rejected}, {"published_rejected", published_rejected},
                      {"pattern_agrees", agree}};
        report.push_back(entry);
        std::ostringstream ps;
        for (std::size_t k = 0; k < ours.size(); ++k) ps << (k ? " " : "") << format_number(round_significant(ours[k], 3));
        text.push_back({std::to_string(i), r.at("test").get<std::string>() + (r.contains("x") ? " x=" + std::to_string(r.at("x").get<int>()) : ""),
                        r.at("gen").get<std::string>(), r.at("null").get<std::string>(), std::to_string(N), ps.str(),
                        std::to_string(ours_rejected) + "/" + std::to_string(published_rejected),
                        agree ? "agrees" : "differs"});
    }
    std::cout << render_table({"row", "test", "gen", "null", "N", "p_second", "rejected ours/ref", "pattern"}, text);
    const json config = {{"target", "qualitative:" + table}, {"seeds", seeds}, {"seed", first}, {"row", a.row},
                         {"long_run", a.long_run}, {"threads", ctx.threads}};
    emit_json(ctx, a.out.empty() ? "reproduce_" + table + ".json" : a.out, envelope("reproduce", config, {{"rows", report}}));
    return kSuccess;
}

int run_reproduce(const Context& ctx, const ReproduceArgs& a) {
    const json ref = read_json_file(a.reference.empty() ? default_reference_file() : std::filesystem::path(a.reference));
    const std::string& t = a.target;
    if (t == "T1" || t == "T3") return table_round_trip(ctx, a, ref, t);
    if (t == "T8-limits") return dft_limits(ctx, a, ref);
    if (t.size() == 2 && t[0] == 'F' && t[1] >= '1' && t[1] <= '6') return trace_target(ctx, a, ref, t[1] - '0');
    const std::string prefix = "qualitative:";
    if (t.rfind(prefix, 0) == 0) {
        const std::string table = t.substr(prefix.size());
        if (table == "T3" || !ref.at("two_level").contains(table)) throw UsageError("no qualitative data for " + table);
        return qualitative(ctx, a, ref, table);
    }
    throw UsageError("unknown target '" + t + "'; expected T1, T3, T8-limits, F1..F6 or qualitative:T2, T4..T12");
}

}  // namespace

void add_reproduce(CLI::App& app, Context& ctx) {
    auto args = std::make_shared<ReproduceArgs>();
    auto* sub = app.add_subcommand("reproduce", "Recompute a stored reference result and compare");
    sub->add_option("target", args->target, "T1, T3, T8-limits, F1..F6 or qualitative:T2, T4..T12")->required();
    sub->add_option("--reference", args->reference, "Reference values file");
    sub->add_option("--x", args->x, "T3 column |x| (0 = all)")->capture_default_str();
    sub->add_option("--M", args->M, "Monte Carlo samples for F1..F6 (default: desk scale)");
    sub->add_option("--seeds", args->seeds, "Runs per qualitative row")->capture_default_str();
    sub->add_option("--seed", args->seed, "First experiment seed index")->capture_default_str();
    sub->add_option("--row", args->row, "Only this row of a qualitative table");
    sub->add_flag("--enumerate", args->enumerate, "Also enumerate the exact q of T1/T3 columns");
    sub->add_flag("--long-run", args->long_run, "Lift the desk-scale limits");
    sub->add_option("--budget", args->budget, "Composition budget for --enumerate")->capture_default_str();
    sub->add_option("--bit-budget", args->bit_budget, "Generated-bit budget for qualitative tables")->capture_default_str();
    sub->add_option("--out", args->out, "Output file name or stem");
    sub->callback([&ctx, args] { ctx.exit_code = guarded([&] { return run_reproduce(ctx, *args); }); });
}

}  // namespace nistlimit::cli
