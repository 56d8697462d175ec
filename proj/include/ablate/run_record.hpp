#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "ablate/core.hpp"
#include "ablate/executor.hpp"

namespace ablate {

// One executed (or failed) candidate with its provenance. Reward is present
// exactly when the metrics record is a success.
struct RunRecord {
    CandidateSpec candidate;
    int round = 0;
    MetricsRecord metrics;
    std::optional<double> reward;
    std::string workspace_id;  // "simulated" for the simulated executor
    std::int64_t started_ms = 0;
    std::int64_t ended_ms = 0;
};

}  // namespace ablate
