#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mm/bootstrap.hpp"
#include "mm/config.hpp"
#include "mm/decomposition.hpp"

namespace mm {

// A module error raised inside a pipeline stage, prefixed with the stage name.
struct StageError : Error {
    StageError(const std::string& stage, const std::string& what)
        : Error("stage '" + stage + "': " + what), stage(stage) {}
    std::string stage;
};

// One measured quantity against its threshold.
//   "<=": value <= tolerance;  ">=": value >= tolerance;  "==": value == tolerance;
//   "in": tolerance <= value <= upper.
struct CheckItem {
    std::string name;
    double value = 0;
    std::string relation = "<=";
    double tolerance = 0;
    double upper = 0;
    std::string detail;

    bool pass() const;
    // How far past the threshold, 0 at the threshold, negative inside; used to
    // pick the item shown on the summary line.
    double excess() const;
};

struct Check {
    int id = 0;
    std::string name;
    std::string provenance;  // where the expected values come from
    std::vector<CheckItem> items;
    bool complete = true;    // false when part of the check was skipped
    std::string note;

    bool pass() const;
    const CheckItem* worst() const;
};

struct AcceptanceReport {
    json config;
    std::vector<Check> checks;  // ids 1..10, each exactly once
    json stages;                // per-stage measurements (terms, chain, series)
    bool all_pass() const;
    json to_json() const;
    static AcceptanceReport from_json(const json& j);
};

using Logger = std::function<void(const std::string&)>;

// solve -> velocity side -> bootstrap -> microrotation side -> monitors, then
// the grid-independent oracle checks when config.synthetic is set. Throws
// StageError naming the stage on any module error.
AcceptanceReport run_pipeline(const ExperimentConfig& config, const Logger& log = {});

// Velocity-side measurements on a solved history; the microrotation stage
// takes this report as input, so the stages cannot run out of order.
struct VelocityStage {
    UDecomposition decomposition;
    Expansion expansion;
    HypothesisReport hypothesis;
    MorreyParams term_exponents;
    json to_json() const;
};
struct MicrorotationStage {
    WDecomposition decomposition;
    Expansion w1a, w1b, w1c;
    MorreyParams term_exponents;
    json to_json() const;
};

VelocityStage velocity_stage(const ExperimentConfig& c, const RunResult& run);
// Throws StageError unless the velocity stage reported finite conclusion norms.
MicrorotationStage microrotation_stage(const ExperimentConfig& c, const RunResult& run,
                                       const VelocityStage& velocity);

// Grid-independent oracle checks. Each returns the filled Check with its id.
Check check_identities(const ExperimentConfig& c);       // 1
Check check_morrey_oracles(const ExperimentConfig& c);   // 3
Check check_scaling(const ExperimentConfig& c);          // 4
Check check_holder_pairs(const ExperimentConfig& c);     // 5
Check check_exponents(const ExperimentConfig& c);        // 6
Check check_duhamel(const ExperimentConfig& c);          // 8
// Items of check 7 that run on small dedicated configurations.
std::vector<CheckItem> solver_oracle_items(const ExperimentConfig& c);

void write_report(const AcceptanceReport& r, const std::string& dir);
AcceptanceReport read_report(const std::string& path);
std::string checks_csv(const AcceptanceReport& r);
// "[PASS] 3 name: measured ... (<= tol)".
std::string summary_line(const Check& c);

// CSV tables behind the plots plus a manifest.json naming each file with its
// annotations: Morrey norm against plan refinement, bootstrap chain, CKN series
// with its log-log slope. Missing stages give an empty bundle with a manifest.
// Returns the written file names.
std::vector<std::string> emit_plots(const AcceptanceReport& r, const std::string& dir);

}  // namespace mm
