#pragma once

#include "mvcwm/evaluate.hpp"
#include "mvcwm/model.hpp"
#include "mvcwm/simulate.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace mvcwm {

enum class Command { Fit, Select, Simulate, Study };

/// Everything a run needs. Every flag has a config-file twin with the same
/// name (dashes become underscores); flags given on the command line win.
struct RunConfig {
    Command command = Command::Select;
    std::string data;
    /// "COV-RESP" pairs, response codes (with fmr), or "all".
    std::vector<std::string> families{"all"};
    int g_min = 1;
    int g_max = 3;
    bool fmr = false;
    FitControls controls;
    std::string out = "out";
    int jobs = 1;

    // simulate / study
    std::string scenario;
    std::string kind = "recovery";  ///< study kind: recovery or classification
    int n = 0;                      ///< 0 keeps the scenario default
    double epsilon = 0.0;           ///< 0 disables the skewing transform
    double separation = 30.0;
    int replicates = 10;
};

/// Overlays the keys of a config document onto `config`; unknown keys and
/// ill-typed values raise ValidationError.
void apply_config_json(RunConfig& config, const nlohmann::json& doc);

/// Throws ValidationError on an empty G range, unknown family codes,
/// non-positive replicate counts and the like.
void validate_config(const RunConfig& config);

/// The (family pair, G) grid, in a fixed order: families as listed, G ascending.
[[nodiscard]] std::vector<ModelSpec> expand_grid(const RunConfig& config, int p, int q, int r);

/// Reads the long-format data file.
[[nodiscard]] ThreeWayData ingest(const std::string& data_path);

struct SelectOutcome {
    SelectionReport report;
    std::vector<std::optional<FitResult>> fits;  ///< parallel to report.entries
    std::vector<ModelSpec> specs;
};

/// Fits every grid entry (each with the full multi-start protocol and the
/// master seed, so results do not depend on `jobs`). Individual failures
/// are recorded in the report and the run continues.
[[nodiscard]] SelectOutcome run_select(const RunConfig& config, const ThreeWayData& data);

/// Writes <out>/<pair>_G<g>/result.json for each successful fit and the
/// ranked <out>/summary.csv (plus summary.json).
void write_select_outputs(const SelectOutcome& outcome, const std::string& out_dir);

/// Entry point of the command-line tool; returns the process exit code
/// (0 success, 2 validation error, 3 every fit failed numerically).
int run_cli(int argc, const char* const* argv);

}  // namespace mvcwm
