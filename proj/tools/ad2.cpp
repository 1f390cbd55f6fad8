// Command-line workbench: closed-loop simulation under camera attacks,
// dataset generation, detector training, evaluation and benchmarking.
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ad2/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"ad2 - desk-scale adversarial evaluation workbench for camera-based driving"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string axis;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::vector<std::string> overrides;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "seed override")->each([&](const std::string&) { seed_set = true; });
        sub->add_option("--override", overrides, "dotted-path config override key=value")
            ->take_all();
    };

    CLI::App* simulate = app.add_subcommand("simulate", "run one closed-loop episode");
    CLI::App* sweep = app.add_subcommand("sweep", "sweep an attack parameter axis");
    sweep->add_option("--axis", axis, "axis spec: d=1,4,11 | epsilon=4,8 | severity=low,med,high")
        ->required();
    CLI::App* gen = app.add_subcommand("gen-dataset", "record benign runs and build the labeled dataset");
    CLI::App* train = app.add_subcommand("train", "train the detector (or the difference-CNN baseline)");
    CLI::App* eval = app.add_subcommand("eval", "evaluate detectors on the test split");
    CLI::App* bench = app.add_subcommand("bench", "measure per-instance inference time");
    for (CLI::App* sub : {simulate, sweep, gen, train, eval, bench}) add_common(sub);

    CLI11_PARSE(app, argc, argv);

    ad2::json doc = ad2::json::object();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) {
            std::fprintf(stderr, "config error: cannot open config '%s'\n", config_path.c_str());
            return 2;
        }
        try {
            doc = ad2::json::parse(in);
        } catch (const ad2::json::exception& e) {
            std::fprintf(stderr, "config error: invalid JSON in '%s': %s\n", config_path.c_str(),
                         e.what());
            return 2;
        }
    }
    if (seed_set) doc["seed"] = seed;

    const std::string command = app.get_subcommands().front()->get_name();
    return ad2::cli::run_command(command, std::move(doc), out_dir, overrides, axis);
}
