#include "cli_common.hpp"

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <thread>

namespace nistlimit::cli {

std::filesystem::path default_out_dir() {
    if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
    return ".";
}

std::filesystem::path default_reference_file() {
    if (const char* env = std::getenv(kReferenceEnv); env && *env) return env;
    return NISTLIMIT_REFERENCE_FILE;
}

unsigned default_threads() {
    return std::max(1u, std::thread::hardware_concurrency());
}

std::uint64_t to_count(double value, const std::string& name, bool allow_zero) {
    if (!std::isfinite(value) || value < 0.0 || std::floor(value) != value || value > 9.2e18) {
        throw std::invalid_argument(name + " must be a non-negative integer");
    }
    if (!allow_zero && value == 0.0) {
        throw std::invalid_argument(name + " must be positive");
    }
    return static_cast<std::uint64_t>(value);
}

nlohmann::json envelope(const std::string& subcommand, nlohmann::json config, nlohmann::json result) {
    config["subcommand"] = subcommand;
    return {{"tool", {{"name", kToolName}, {"version", kToolVersion}}},
            {"config", std::move(config)},
            {"result", std::move(result)}};
}

std::filesystem::path emit_json(const Context& ctx, const std::string& name, const nlohmann::json& doc) {
    const auto path = ctx.out_dir / name;
    write_json_file(path, doc);
    note(ctx, "wrote " + path.string());
    return path;
}

std::filesystem::path emit_text(const Context& ctx, const std::string& name, const std::string& text) {
    const auto path = ctx.out_dir / name;
    write_text_file(path, text);
    note(ctx, "wrote " + path.string());
    return path;
}

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const BudgetExceeded& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const EnumerationInterrupted& e) {
        std::cerr << "interrupted: " << e.what() << '\n';
        return kValidation;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kIo;
    } catch (const CheckpointIoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kIo;
    } catch (const SourceExhausted& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    }
}

void note(const Context& ctx, const std::string& message) {
    if (!ctx.quiet) std::cerr << message << '\n';
}

nlohmann::json seed_record(std::uint64_t index, const BitSource& source) {
    return {{"index", index},
            {"seed_hex", to_hex(source.seed())},
            {"derivation", "experiment_seed(" + std::to_string(index) + ")"},
            {"source", source.describe()}};
}

TestSpec build_spec(TestId id, std::int64_t n, std::int64_t m, int x) {
    switch (id) {
        case TestId::Longest: return longest_run_spec(n, m);
        case TestId::Overlap: return overlapping_template_spec(n);
        case TestId::Linear: return linear_complexity_spec(n, m);
        case TestId::Excursion: return random_excursion_spec(x);
        default: break;
    }
    throw std::invalid_argument(std::string(to_string(id)) + " has no class-count specification");
}

const std::vector<std::string>& test_names() {
    static const std::vector<std::string> names = {"frequency", "block-frequency", "longest", "overlap",
                                                    "linear",    "excursion",       "dft"};
    return names;
}

const std::vector<std::string>& generator_names() {
    static const std::vector<std::string> names = {"mt", "sha1", "well", "split", "file"};
    return names;
}

}  // namespace nistlimit::cli
