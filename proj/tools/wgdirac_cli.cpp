#include <wgdirac/pipeline.hpp>

#include <CLI11.hpp>

#include <iostream>

using namespace wgdirac;

int main(int argc, char** argv)
{
    CLI::App app{"Dirac point and interface mode solver for a waveguide with dimerized obstacles"};
    std::string command, config_path, out_dir;
    int jobs = 1;
    bool verify = false;
    app.add_option("command", command, "bands, dirac, gap, interface, oracle or all")
        ->required()
        ->check(CLI::IsMember({"bands", "dirac", "gap", "interface", "oracle", "all"}));
    app.add_option("--config", config_path, "key = value configuration file");
    app.add_option("--out", out_dir, "output directory (overrides output.directory)");
    app.add_option("--jobs", jobs, "worker threads")->check(CLI::Range(1, 256));
    app.add_flag("--verify", verify, "run the invariant checks and fail on violations");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        RunConfig cfg = config_path.empty() ? parse_config("") : load_config(config_path);
        if (!out_dir.empty()) cfg.output.directory = out_dir;
        const std::filesystem::path out = cfg.output.directory;
        Pipeline pipe(cfg, out, jobs, verify, std::cerr);
        pipe.run(command);
        for (const auto& f : pipe.written()) std::cout << (out / f).string() << "\n";
        if (!pipe.failures().empty()) {
            std::cerr << pipe.failures().size() << " invariant check(s) failed\n";
            return kExitCertification;
        }
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCertification;
    }
}
