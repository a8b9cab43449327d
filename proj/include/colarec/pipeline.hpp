#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "colarec/beam.hpp"
#include "colarec/config.hpp"
#include "colarec/lightgcn.hpp"
#include "colarec/metrics.hpp"
#include "colarec/training.hpp"

namespace colarec {

/// Fixed artifact locations inside a run directory; explicit keys override.
struct RunPaths {
    std::filesystem::path run;
    std::filesystem::path data;
    std::filesystem::path cf;
    std::filesystem::path gids;
    std::filesystem::path model;
    std::filesystem::path report;
    std::filesystem::path sweep;
    std::filesystem::path train_log;
};

RunPaths run_paths(const RunConfig& config);

CfConfig cf_config(const RunConfig& config);
TrainConfig train_config(const RunConfig& config);
ModelConfig model_config(const RunConfig& config, std::size_t vocab_size, const GidAssignment& gids);
SplitRatios split_ratios(const RunConfig& config);

/// Writes interactions.tsv and content.tsv into `dir`.
void run_synthetic(const RunConfig& config, const std::filesystem::path& dir, std::ostream& log);
/// Ingest, k-core filter, split; writes the prepared data directory.
void run_prepare(const RunConfig& config, std::ostream& log);
void run_pretrain_cf(const RunConfig& config, std::ostream& log);
void run_build_gid(const RunConfig& config, std::ostream& log);
TrainResult run_train(const RunConfig& config, std::ostream& log);
RankedList run_recommend(const RunConfig& config, std::size_t user, std::ostream& log);
EvalReport run_evaluate(const RunConfig& config, std::ostream& log);

struct SweepRow {
    std::string axis;
    std::string value;
    EvalReport report;
};

/// Variant settings for one sweep value, applied on top of `base`.
RunConfig sweep_variant(const RunConfig& base, const std::string& axis, const std::string& value,
                        std::size_t n_items);
std::vector<std::string> sweep_values(const std::string& axis, const std::string& values);

/// Shares the base run's prepared data and CF checkpoint; each variant gets
/// its own subdirectory under <run>/sweep/. Writes the sweep table.
std::vector<SweepRow> run_sweep(const RunConfig& config, std::ostream& log);
std::string sweep_table(const std::vector<SweepRow>& rows, const RunConfig& config);

}  // namespace colarec
