#pragma once

#include "tftsim/config.hpp"
#include "tftsim/distortion.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace tft {

const char* tftsim_version();

const std::vector<ExperimentDef>& experiment_registry();

// Runs one experiment and writes its artifacts, a report.json and a manifest.json
// into rc.out_dir. Nothing is written there unless the run succeeds. Returns the manifest.
Json run_experiment(const RunConfig& rc);

// Channel model file:
// {"full_scale_mv": 1000, "cplr": [stage...], "qb2": [stage...],
//  "cplr_to_qb2": [term...], "qb2_to_cplr": [term...]}
// with stage/term = {"exp": [[A_mV, tau_us], ...], "osc": [[A_mV, tau_us, T_us, phase_rad], ...]}.
ChannelSet parse_channel_file(const Json& j);

} // namespace tft
