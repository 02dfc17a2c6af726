#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "commands.hpp"

using namespace advgrid::cli;

namespace {

// Turns the leftover "--a.b value" / "--a.b=value" arguments into overrides.
bool collect_overrides(const std::vector<std::string>& extras,
                       std::vector<std::pair<std::string, std::string>>& out) {
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const auto& arg = extras[i];
        if (arg.rfind("--", 0) != 0 || arg.size() < 3) {
            std::cerr << "error: unexpected argument '" << arg << "'\n";
            return false;
        }
        auto key = arg.substr(2);
        const auto eq = key.find('=');
        if (eq != std::string::npos) {
            out.emplace_back(key.substr(0, eq), key.substr(eq + 1));
            continue;
        }
        if (i + 1 >= extras.size()) {
            std::cerr << "error: --" << key << " needs a value\n";
            return false;
        }
        out.emplace_back(key, extras[++i]);
    }
    return true;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Black-box grid perturbation attacks on pedestrian detectors"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    Common common;
    std::string config_path;
    std::string oracle_kind, oracle_cmd, oracle_url, out_dir;
    std::uint64_t seed = 0;
    int jobs = 1;

    auto add_common = [&](CLI::App* sub) {
        sub->allow_extras();
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--oracle.kind", oracle_kind,
                        "synthetic-monotone | synthetic-rugged | subprocess | http");
        sub->add_option("--oracle.cmd", oracle_cmd, "adapter command (subprocess oracle)");
        sub->add_option("--oracle.url", oracle_url, "adapter base URL (http oracle)");
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("--jobs", jobs, "scenes attacked in parallel")->check(CLI::PositiveNumber);
        sub->add_option("--out", out_dir, "output directory");
    };

    AttackArgs attack;
    auto* attack_cmd = app.add_subcommand("attack", "attack one image, write the adversarial PNG and result JSON");
    add_common(attack_cmd);
    attack_cmd->add_option("--image", attack.image, "clean grayscale PNG")->required();
    attack_cmd->add_option("--bbox", attack.bbox, "target box x,y,w,h in pixels (default: sibling .txt)");

    auto* evaluate_cmd = app.add_subcommand("evaluate", "attack every sample of io.dataset and write a report");
    add_common(evaluate_cmd);

    AblateArgs ablate;
    auto* ablate_cmd = app.add_subcommand("ablate", "sweep one grid parameter over the dataset");
    add_common(ablate_cmd);
    ablate_cmd->add_option("--axis", ablate.axis, "color | dimension | width_ratio")->required();
    ablate_cmd->add_option("--values", ablate.values, "sweep values")->required()->delimiter(',');

    RenderArgs render;
    auto* render_cmd = app.add_subcommand("render", "compose a genome into an image");
    add_common(render_cmd);
    render_cmd->add_option("--image", render.image, "clean grayscale PNG")->required();
    render_cmd->add_option("--bbox", render.bbox, "target box x,y,w,h (default: sibling .txt)");
    render_cmd->add_option("--genome", render.genome, "bit string or @file")->required();
    render_cmd->add_option("-o,--output", render.output, "output PNG (default: <out>/<stem>_render.png)");

    SpliceArgs splice;
    auto* splice_cmd = app.add_subcommand("splice", "export a tiled garment texture for a genome");
    add_common(splice_cmd);
    splice_cmd->add_option("--genome", splice.genome, "bit string or @file")->required();
    splice_cmd->add_option("--tiles-x", splice.tiles_x)->check(CLI::PositiveNumber);
    splice_cmd->add_option("--tiles-y", splice.tiles_y)->check(CLI::PositiveNumber);
    splice_cmd->add_option("--offset-x", splice.offset_x)->check(CLI::NonNegativeNumber);
    splice_cmd->add_option("--offset-y", splice.offset_y)->check(CLI::NonNegativeNumber);
    splice_cmd->add_option("--cell-px", splice.cell_px)->check(CLI::PositiveNumber);
    splice_cmd->add_option("-o,--output", splice.output, "output PNG (default: <out>/texture.png)");

    OracleCheckArgs check;
    auto* check_cmd = app.add_subcommand("oracle-check", "protocol conformance test for a subprocess/HTTP adapter");
    add_common(check_cmd);
    check_cmd->add_option("--round-trips", check.round_trips)->check(CLI::PositiveNumber);
    check_cmd->add_option("--echo-images", check.echo_images)->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    auto* sub = app.get_subcommands().front();
    if (!collect_overrides(sub->remaining(), common.overrides)) {
        return kUsage;
    }
    if (!config_path.empty()) {
        common.config_path = config_path;
    }
    auto flag = [&](const char* name, const std::string& key, const std::string& value) {
        if (sub->count(name) > 0) {
            common.overrides.emplace_back(key, value);
        }
    };
    flag("--oracle.kind", "oracle.kind", oracle_kind);
    flag("--oracle.cmd", "oracle.cmd", oracle_cmd);
    flag("--oracle.url", "oracle.url", oracle_url);
    flag("--seed", "seed", std::to_string(seed));
    flag("--jobs", "jobs", std::to_string(jobs));
    flag("--out", "io.out", out_dir);

    if (sub == attack_cmd) return run_attack_cmd(common, attack);
    if (sub == evaluate_cmd) return run_evaluate_cmd(common);
    if (sub == ablate_cmd) return run_ablate_cmd(common, ablate);
    if (sub == render_cmd) return run_render_cmd(common, render);
    if (sub == splice_cmd) return run_splice_cmd(common, splice);
    return run_oracle_check_cmd(common, check);
}
