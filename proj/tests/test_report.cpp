#include "nistlimit/report.hpp"

#include <doctest.h>

#include <filesystem>

using namespace nistlimit;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "nistlimit_report_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("rounding to significant digits") {
    CHECK(round_significant(0.1234567890123456789) == 0.123456789012346);
    CHECK(round_significant(0.0) == 0.0);
    CHECK(round_significant(-2.5e-300, 3) == -2.5e-300);
}

TEST_CASE("distribution round trip through a file") {
    CategoryDistribution d;
    d.q = {0.1, 0.2, 0.3, 0.4};
    d.nu = 3;
    d.provenance = Provenance::MonteCarlo;
    d.stderr_ = std::vector<double>{0.01, 0.02, 0.03, 0.04};
    d.mass_accounted = 1.0;
    const auto path = scratch("dist.json");
    write_json_file(path, to_json(d));
    const auto back = distribution_from_json(read_json_file(path));
    CHECK(back.q == d.q);
    CHECK(back.nu == 3);
    CHECK(back.provenance == Provenance::MonteCarlo);
    REQUIRE(back.stderr_.has_value());
    CHECK(*back.stderr_ == *d.stderr_);
}

TEST_CASE("nulls from files") {
    CHECK(load_nulls("uniform", {"longest"}).at(0).kind == NullKind::Uniform);
    CHECK_THROWS_AS(load_nulls("mc:/nonexistent/trace.json", {"dft"}), IoError);
    CHECK_THROWS_AS(load_nulls("bogus", {"dft"}), std::invalid_argument);

    CategoryDistribution d;
    d.q = std::vector<double>(10, 0.1);
    d.q[0] = 0.09;
    d.q[9] = 0.11;
    const auto single = scratch("single.json");
    write_json_file(single, to_json(d));
    const auto one = load_nulls("exact:" + single.string(), {"longest"});
    REQUIRE(one.size() == 1);
    CHECK(one[0].kind == NullKind::Exact);
    CHECK(one[0].p[0] == 0.09);

    nlohmann::json multi;
    multi["distributions"] = nlohmann::json::array();
    for (const char* label : {"x=-1", "x=1"}) {
        auto j = to_json(d);
        j["label"] = label;
        multi["distributions"].push_back(j);
    }
    const auto mpath = scratch("multi.json");
    write_json_file(mpath, multi);
    CHECK(load_nulls("mc:" + mpath.string(), {"x=1", "x=-1"}).size() == 2);
    CHECK_THROWS_AS(load_nulls("mc:" + mpath.string(), {"x=2"}), IoError);

    const auto wrapped = scratch("wrapped.json");
    write_json_file(wrapped, {{"tool", {{"name", "nistlimit"}}}, {"config", nlohmann::json::object()}, {"result", multi}});
    CHECK(load_nulls("exact:" + wrapped.string(), {"x=-1", "x=1"}).size() == 2);
    write_json_file(wrapped, {{"config", nlohmann::json::object()}, {"result", to_json(d)}});
    CHECK(load_nulls("exact:" + wrapped.string(), {"longest"}).at(0).p[9] == 0.11);
}

TEST_CASE("trace JSON carries the final distribution") {
    const TestSpec spec = longest_run_spec(8 * 16, 8);
    const auto t = mc_class_q(spec, 1000);
    const auto j = to_json(t);
    CHECK(j.at("samples") == 1000);
    const auto d = distribution_from_json(j);
    CHECK(d.provenance == Provenance::MonteCarlo);
    CHECK(d.q.size() == 10);
}

TEST_CASE("table rendering") {
    const auto text = render_table({"a", "bbb"}, {{"1", "2"}, {"333", "4"}});
    CHECK(text == "a    bbb\n--------\n1    2\n333  4\n");
    CHECK(format_number(nlohmann::json(0.25)) == "0.25");
    CHECK(format_number(nlohmann::json(12)) == "12");
    CHECK(format_number(nlohmann::json(nullptr)) == "-");
}
