#pragma once

// JSON and text serialization of results. Reals are rounded to 15
// significant digits before they are stored, and text tables are rendered
// from the same JSON values.

#include "nistlimit/discrepancy.hpp"
#include "nistlimit/exactdist.hpp"
#include "nistlimit/mcdist.hpp"
#include "nistlimit/twolevel.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nistlimit {

inline constexpr std::string_view kToolName = "nistlimit";
inline constexpr std::string_view kToolVersion = "1.0.0";

/// Raised for unreadable, unwritable or malformed files.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

double round_significant(double x, int digits = 15);

nlohmann::json to_json(const CategoryDistribution& d);
nlohmann::json to_json(const DiscrepancyReport& r);
nlohmann::json to_json(const MCTrace& t);
nlohmann::json to_json(const SecondLevelNull& n);
nlohmann::json to_json(const TwoLevelResult& r);
nlohmann::json to_json(const TestSpec& s);

/// Accepts a distribution object ({"q": [...]}) or an MC trace ({"final": {...}}),
/// either bare or inside a tool output envelope ({"result": ...}).
CategoryDistribution distribution_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_text_file(const std::filesystem::path& path, std::string_view text);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

/// "uniform", "exact:<file>" or "mc:<file>". A file holds one distribution
/// or {"distributions": [{"label": ..., "q": [...]}, ...]}; in the second
/// form the nulls follow `labels`. Tool output files are unwrapped first.
/// Missing files raise IoError.
std::vector<SecondLevelNull> load_nulls(std::string_view spec, const std::vector<std::string>& labels, int nu = 9);

/// Fixed-width rendering helpers shared by the command-line tool.
std::string format_number(const nlohmann::json& value);
std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

}  // namespace nistlimit
