#pragma once

#include "nistlimit/report.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>

namespace nistlimit::cli {

enum ExitCode : int { kSuccess = 0, kUsage = 1, kValidation = 2, kIo = 3 };

inline constexpr const char* kOutDirEnv = "NISTLIMIT_OUT_DIR";
inline constexpr const char* kReferenceEnv = "NISTLIMIT_REFERENCE";

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Context {
    std::filesystem::path out_dir;
    unsigned threads = 1;
    bool quiet = false;
    /// Set by the subcommand that ran.
    int exit_code = kSuccess;
};

std::filesystem::path default_out_dir();
std::filesystem::path default_reference_file();
unsigned default_threads();

/// Integral, non-negative value given as a real ("1e6" is accepted).
std::uint64_t to_count(double value, const std::string& name, bool allow_zero = false);

/// {"tool": ..., "config": ..., "result": ...} wrapper every output uses.
nlohmann::json envelope(const std::string& subcommand, nlohmann::json config, nlohmann::json result);

/// Writes `doc` under the output directory and reports the path on stderr.
std::filesystem::path emit_json(const Context& ctx, const std::string& name, const nlohmann::json& doc);
std::filesystem::path emit_text(const Context& ctx, const std::string& name, const std::string& text);

/// Runs `body` and maps exceptions to exit codes, printing the message.
int guarded(const std::function<int()>& body);

/// Progress line on stderr unless quiet.
void note(const Context& ctx, const std::string& message);

nlohmann::json seed_record(std::uint64_t index, const BitSource& source);

TestSpec build_spec(TestId id, std::int64_t n, std::int64_t m, int x);

/// Allowed --test values.
const std::vector<std::string>& test_names();
const std::vector<std::string>& generator_names();

void add_exact_q(CLI::App& app, Context& ctx);
void add_mc_q(CLI::App& app, Context& ctx);
void add_limits(CLI::App& app, Context& ctx);
void add_two_level(CLI::App& app, Context& ctx);
void add_gen(CLI::App& app, Context& ctx);
void add_reproduce(CLI::App& app, Context& ctx);

}  // namespace nistlimit::cli
