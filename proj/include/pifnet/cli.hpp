#pragma once

#include <string>
#include <vector>

#include "pifnet/config.hpp"
#include "pifnet/model.hpp"
#include "pifnet/train.hpp"

namespace pifnet::cli {

// Exit codes shared by every subcommand.
enum ExitCode {
    kOk = 0,
    kFailure = 1,
    kConfigError = 2,
    kShapeError = 3,
    kIoError = 4,
    kNumericalError = 5,
};

struct ResolvedExperiment {
    std::vector<ModelSpec> specs;  // one model, or a baseline/pif pair
    TrainConfig train;
    KeyValueConfig resolved;  // fully resolved settings for the echo file
};

// Shared between the train and params commands: model.preset or model.pair,
// pif.* overrides, train.* and augment.mode with defaults filled in.
ResolvedExperiment resolve_experiment(KeyValueConfig& cfg);

// Entry point; args excludes the program name.
int run(const std::vector<std::string>& args);

}  // namespace pifnet::cli
