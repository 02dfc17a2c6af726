#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace advgrid::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kTransport = 2,
    kBudgetExhausted = 3,
};

struct Common {
    std::optional<std::string> config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
};

struct AttackArgs {
    std::string image;
    std::string bbox; // "x,y,w,h"; empty means the sibling .txt annotation
};

struct RenderArgs {
    std::string image;
    std::string bbox;
    std::string genome; // bit string, or @path to a file holding one
    std::string output;
};

struct SpliceArgs {
    std::string genome;
    int tiles_x = 2;
    int tiles_y = 2;
    int offset_x = 0;
    int offset_y = 0;
    int cell_px = 10;
    std::string output;
};

struct AblateArgs {
    std::string axis;
    std::vector<double> values;
};

struct OracleCheckArgs {
    int round_trips = 50;
    int echo_images = 20;
};

int run_attack_cmd(const Common& common, const AttackArgs& args);
int run_evaluate_cmd(const Common& common);
int run_ablate_cmd(const Common& common, const AblateArgs& args);
int run_render_cmd(const Common& common, const RenderArgs& args);
int run_splice_cmd(const Common& common, const SpliceArgs& args);
int run_oracle_check_cmd(const Common& common, const OracleCheckArgs& args);

} // namespace advgrid::cli
