#include "cli_common.hpp"

#include <iostream>

int main(int argc, char** argv) {
    using namespace nistlimit::cli;
    Context ctx;
    CLI::App app{"Second-level sample-size limits for SP800-22 style tests"};
    app.require_subcommand(1);
    std::string out_dir = default_out_dir().string();
    ctx.threads = default_threads();
    app.add_option("--out-dir", out_dir, "Output directory (default $" + std::string(kOutDirEnv) + " or .)");
    app.add_option("--threads", ctx.threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--quiet", ctx.quiet, "Suppress progress messages");
    app.set_version_flag("--version", std::string(nistlimit::kToolVersion));
    app.parse_complete_callback([&] { ctx.out_dir = out_dir; });

    add_exact_q(app, ctx);
    add_mc_q(app, ctx);
    add_limits(app, ctx);
    add_two_level(app, ctx);
    add_reproduce(app, ctx);
    add_gen(app, ctx);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kSuccess : kUsage;
    }
    return ctx.exit_code;
}
