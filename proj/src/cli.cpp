#include "meshvae/cli.hpp"

#include "meshvae/apps.hpp"
#include "meshvae/error.hpp"
#include "meshvae/log.hpp"
#include "meshvae/toy.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <optional>

namespace meshvae {

namespace {

namespace fs = std::filesystem;

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

apps::RunConfig load_config(const Globals& g)
{
    if (g.config.empty())
        throw InputError("--config is required");
    auto cfg = apps::RunConfig::load(g.config);
    if (g.seed)
        cfg.train.seed = *g.seed;
    if (!g.out.empty())
        cfg.output_dir = g.out;
    return cfg;
}

void write_toy(const std::string& kind, std::size_t count, const fs::path& dir, std::uint64_t seed, std::ostream& out)
{
    toy::Dataset data;
    std::string model_extra, train_extra;
    if (kind == "bent") {
        data = toy::bent_cylinders(count, seed);
        train_extra = "batch_size = 4\n";
    } else if (kind == "bar") {
        data = toy::rotating_bar(count);
    } else if (kind == "two-class") {
        data = toy::two_class(count, seed);
        model_extra = "classes = 2\n";
    } else {
        throw InputError("unknown toy kind '" + kind + "' (bent, bar, two-class)");
    }
    const auto names = toy::write_dataset(dir / "data", data);
    std::ofstream cfg(dir / "config.ini");
    cfg << "[dataset]\ndir = data\nreference = " << names.front() << '\n';
    if (!data.labels.empty())
        cfg << "labels = labels.txt\n";
    cfg << "\n[hierarchy]\nlevels = 1\nlambda = 0.001\n";
    cfg << "\n[model]\nlayers = CCPC\n" << model_extra;
    cfg << "\n[train]\nepochs = 100\nseed = " << seed << '\n' << train_extra;
    cfg << "\n[output]\ndir = out\n";
    cfg.flush();
    if (!cfg)
        throw InputError("cannot write " + (dir / "config.ini").string());
    out << "wrote " << names.size() << " shapes and config.ini to " << dir.string() << '\n';
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Mesh variational auto-encoder with contraction pooling"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    std::uint64_t seed_value = 0;
    app.add_option("--config", g.config, "Run configuration (INI)");
    auto* seed_opt = app.add_option("--seed", seed_value, "Override the random seed");
    app.add_option("--out", g.out, "Override the output directory");

    auto* hierarchy = app.add_subcommand("hierarchy", "Build the mesh hierarchy of the reference mesh");
    std::string lambda_mode;
    hierarchy->add_option("--lambda-mode", lambda_mode, "absolute, or bbox to scale lambda by the bbox diagonal")
        ->check(CLI::IsMember({"absolute", "bbox"}));
    auto* features = app.add_subcommand("features", "Extract scaled deformation features of the dataset");
    auto* train = app.add_subcommand("train", "Train the model");

    auto* generate = app.add_subcommand("generate", "Decode random latent codes to meshes");
    apps::GenerateOptions gen;
    std::size_t gen_label = 0;
    generate->add_option("-n,--count", gen.count, "Number of shapes")->check(CLI::PositiveNumber);
    auto* gen_label_opt = generate->add_option("--label", gen_label, "Class of a conditional model");
    generate->add_flag("--mean", gen.mean, "Decode z = 0");

    auto* interpolate = app.add_subcommand("interpolate", "Decode a linear path between two shapes' codes");
    apps::InterpolateOptions interp;
    std::size_t interp_label = 0;
    interpolate->add_option("--from", interp.from, "Start shape (file name or index)")->required();
    interpolate->add_option("--to", interp.to, "End shape (file name or index)")->required();
    interpolate->add_option("--steps", interp.steps, "Number of frames, at least 2");
    auto* interp_label_opt = interpolate->add_option("--label", interp_label, "Class of a conditional model");

    auto* embed = app.add_subcommand("embed", "2D embedding from the two highest-variance latent dimensions");
    auto* eval = app.add_subcommand("eval", "Reconstruction RMS on a set of meshes");
    std::string eval_dir;
    eval->add_option("--data", eval_dir, "Directory of held-out meshes (default: training set)");

    auto* toy_cmd = app.add_subcommand("toy", "Write a procedural dataset and a config for it");
    std::string toy_kind = "bent";
    std::size_t toy_count = 20;
    std::string toy_dir = "toy";
    toy_cmd->add_option("--kind", toy_kind, "bent, bar or two-class");
    toy_cmd->add_option("--count", toy_count, "Shapes (frames for bar, per class for two-class)");
    toy_cmd->add_option("--dir", toy_dir, "Destination directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }
    if (*seed_opt)
        g.seed = seed_value;

    log::ScopedSink sink([&err](const std::string& msg) { err << "warning: " << msg << '\n'; });
    try {
        if (toy_cmd->parsed()) {
            write_toy(toy_kind, toy_count, toy_dir, g.seed.value_or(0), out);
            return 0;
        }
        auto cfg = load_config(g);
        if (!lambda_mode.empty())
            cfg.lambda_mode = lambda_mode == "bbox" ? apps::LambdaMode::bbox : apps::LambdaMode::absolute;
        if (hierarchy->parsed()) {
            apps::cmd_hierarchy(cfg, out);
        } else if (features->parsed()) {
            apps::cmd_features(cfg, out);
        } else if (train->parsed()) {
            apps::cmd_train(cfg, out);
        } else if (generate->parsed()) {
            gen.seed = cfg.train.seed;
            if (*gen_label_opt)
                gen.label = gen_label;
            apps::cmd_generate(cfg, gen, out);
        } else if (interpolate->parsed()) {
            if (*interp_label_opt)
                interp.label = interp_label;
            apps::cmd_interpolate(cfg, interp, out);
        } else if (embed->parsed()) {
            apps::cmd_embed(cfg, out);
        } else if (eval->parsed()) {
            std::optional<fs::path> dir;
            if (!eval_dir.empty())
                dir = eval_dir;
            apps::cmd_eval(cfg, dir, out);
        }
        return 0;
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return 3;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "numerical error: " << e.what() << '\n';
        return 3;
    }
}

} // namespace meshvae
