#include "nistlimit/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace nistlimit {

using nlohmann::json;

namespace {

json reals(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(round_significant(x));
    return a;
}

template <typename T>
json optional_int(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

}  // namespace

double round_significant(double x, int digits) {
    if (!std::isfinite(x) || x == 0.0) return x;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return std::strtod(buf, nullptr);
}

json to_json(const CategoryDistribution& d) {
    json j;
    j["q"] = reals(d.q);
    j["nu"] = d.nu;
    j["provenance"] = std::string(to_string(d.provenance));
    j["mass_accounted"] = round_significant(d.mass_accounted);
    j["stderr"] = d.stderr_ ? reals(*d.stderr_) : json(nullptr);
    return j;
}

json to_json(const DiscrepancyReport& r) {
    json j;
    j["delta"] = round_significant(r.delta);
    j["u"] = round_significant(r.u);
    j["nu"] = r.nu;
    j["n_safe"] = optional_int(r.n_safe);
    j["n_risky"] = optional_int(r.n_risky);
    j["q_source"] = std::string(to_string(r.q_source));
    j["alpha_safe"] = r.alpha_safe;
    j["alpha_risky"] = r.alpha_risky;
    j["quantile_safe"] = round_significant(r.quantile_safe);
    j["quantile_risky"] = round_significant(r.quantile_risky);
    return j;
}

json to_json(const MCTrace& t) {
    json j;
    j["test"] = t.test;
    j["samples"] = t.samples;
    j["streams"] = t.streams;
    j["delta"] = round_significant(t.delta);
    j["u"] = round_significant(t.u);
    j["delta_sd"] = round_significant(t.delta_sd);
    j["u_sd"] = round_significant(t.u_sd);
    j["delta_bias"] = round_significant(t.delta_bias);
    j["counts"] = t.counts;
    j["final"] = to_json(t.final);
    j["source"] = t.source;
    json cps = json::array();
    for (const auto& c : t.checkpoints) {
        cps.push_back({{"M", c.samples}, {"delta", round_significant(c.delta)}, {"u", round_significant(c.u)}});
    }
    j["checkpoints"] = std::move(cps);
    return j;
}

json to_json(const SecondLevelNull& n) {
    return {{"kind", std::string(to_string(n.kind))}, {"p", reals(n.p)}};
}

json to_json(const TwoLevelResult& r) {
    json j;
    j["test"] = std::string(to_string(r.test.id));
    j["n"] = r.test.n;
    if (r.test.m) j["m"] = r.test.m;
    if (r.test.id == TestId::Dft) j["sigma"] = std::string(to_string(r.test.sigma));
    j["N"] = r.N;
    j["discarded"] = r.discarded;
    json nulls = json::array();
    for (const auto& n : r.nulls) nulls.push_back(to_json(n));
    j["null"] = std::move(nulls);
    json series = json::array();
    for (const auto& s : r.series) {
        series.push_back({{"label", s.label},
                          {"histogram", s.histogram},
                          {"chi2", round_significant(s.chi2)},
                          {"p_second", round_significant(s.p_second)}});
    }
    j["series"] = std::move(series);
    j["source"] = r.source;
    return j;
}

json to_json(const TestSpec& s) {
    return {{"name", s.name},         {"block_size", s.block_size},     {"blocks", s.blocks},
            {"df", s.df},             {"class_probs", reals(s.class_probs)}, {"null_probs", reals(s.null_probs)}};
}

CategoryDistribution distribution_from_json(const json& j) {
    try {
        const json& outer = j.contains("result") ? j.at("result") : j;
        const json& body = outer.contains("final") ? outer.at("final") : outer;
        CategoryDistribution d;
        d.q = body.at("q").get<std::vector<double>>();
        d.nu = body.value("nu", static_cast<int>(d.q.size()) - 1);
        const std::string prov = body.value("provenance", std::string("exact"));
        d.provenance = prov == "monte-carlo" ? Provenance::MonteCarlo : Provenance::Exact;
        d.mass_accounted = body.value("mass_accounted", 1.0);
        if (body.contains("stderr") && body.at("stderr").is_array()) {
            d.stderr_ = body.at("stderr").get<std::vector<double>>();
        }
        if (static_cast<int>(d.q.size()) != d.nu + 1) {
            throw IoError("distribution has " + std::to_string(d.q.size()) + " bins but nu = " + std::to_string(d.nu));
        }
        return d;
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed distribution: ") + e.what());
    }
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw IoError("cannot parse " + path.string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << text;
        if (!out.flush()) throw IoError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

std::vector<SecondLevelNull> load_nulls(std::string_view spec, const std::vector<std::string>& labels, int nu) {
    if (spec == "uniform") return {SecondLevelNull::uniform(nu)};
    const auto colon = spec.find(':');
    if (colon == std::string_view::npos) {
        throw std::invalid_argument("null must be uniform, exact:<file> or mc:<file>");
    }
    const std::string_view kind_name = spec.substr(0, colon);
    NullKind kind;
    if (kind_name == "exact") {
        kind = NullKind::Exact;
    } else if (kind_name == "mc") {
        kind = NullKind::MC;
    } else {
        throw std::invalid_argument("unknown null kind '" + std::string(kind_name) + "'");
    }
    const std::filesystem::path file{std::string(spec.substr(colon + 1))};
    const json doc = read_json_file(file);
    const json& j = doc.contains("result") ? doc.at("result") : doc;
    std::vector<SecondLevelNull> out;
    if (j.contains("distributions")) {
        for (const auto& label : labels) {
            const json* found = nullptr;
            for (const auto& d : j.at("distributions")) {
                if (d.value("label", std::string()) == label) found = &d;
            }
            if (!found) throw IoError(file.string() + " has no distribution for " + label);
            out.push_back(SecondLevelNull::from_probs(kind, distribution_from_json(*found).q));
        }
    } else {
        out.push_back(SecondLevelNull::from_probs(kind, distribution_from_json(j).q));
    }
    for (const auto& n : out) {
        if (n.nu() != nu) throw std::invalid_argument("null in " + file.string() + " has a different bin count");
    }
    return out;
}

std::string format_number(const json& value) {
    if (value.is_null()) return "-";
    if (value.is_number_integer() || value.is_number_unsigned()) return value.dump();
    if (value.is_number_float()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.15g", value.get<double>());
        return buf;
    }
    if (value.is_string()) return value.get<std::string>();
    return value.dump();
}

std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width(header.size(), 0);
    for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
    }
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < width.size(); ++c) {
            const std::string cell = c < cells.size() ? cells[c] : "";
            if (c) out << "  ";
            out << cell;
            if (c + 1 < width.size()) out << std::string(width[c] - cell.size(), ' ');
        }
        out << '\n';
    };
    line(header);
    std::size_t total = 0;
    for (auto w : width) total += w;
    out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    for (const auto& r : rows) line(r);
    return out.str();
}

}  // namespace nistlimit
