#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "xens/config.hpp"

namespace xens {

// One CLI invocation. `command` is a subcommand name; `out_dir` is the
// experiment directory every command reads from and writes into, so the
// pipeline composes through the filesystem:
//
//   gen-data        -> data/{train,test,ood}.ds
//   train-pool      -> models/<id>.json, models/kappa_matrix.csv,
//                      reports/pool_report.*
//   rank-ensembles  -> ensembles.json
//   attack          -> attacks/<tag>.jsonl, reports/attack_report.*
//   defend          -> verdicts/<source>.jsonl, reports/defense_report.*,
//                      reports/defense_summary.*
//   ood             -> reports/ood_report.*, reports/ood_scores.dat
//   threat          -> reports/threat_report.*
//   report          -> reports/summary.{json,csv,txt}
//
// Reports are written as .csv, .json and a gnuplot-friendly .dat;
// `format` only selects what is echoed to stdout (text, csv or json).
struct RunOptions {
    std::string command;
    std::string config_path;  // empty = built-in defaults
    std::string out_dir;
    std::optional<uint64_t> seed;  // overrides the config seed
    std::optional<int> workers;    // overrides the config worker count
    std::string format = "text";
    bool quiet = false;            // suppress the stdout echo entirely
};

// Dispatches to the cmd_* function for opt.command. Throws Error on
// config problems (ErrorKind::Config) or missing/invalid artifacts
// (other kinds); the CLI maps those to exit codes 2 and 3.
void run_command(const RunOptions& opt);

// Individual pipeline stages, exposed for tests.
void cmd_gen_data(const ExperimentConfig& cfg, const RunOptions& opt);
void cmd_train_pool(const ExperimentConfig& cfg, const RunOptions& opt);
void cmd_rank_ensembles(const ExperimentConfig& cfg, const RunOptions& opt);
void cmd_attack(const ExperimentConfig& cfg, const RunOptions& opt);
void cmd_defend(const ExperimentConfig& cfg, const RunOptions& opt);
void cmd_ood(const ExperimentConfig& cfg, const RunOptions& opt);
void cmd_threat(const ExperimentConfig& cfg, const RunOptions& opt);
void cmd_report(const ExperimentConfig& cfg, const RunOptions& opt);

}  // namespace xens
