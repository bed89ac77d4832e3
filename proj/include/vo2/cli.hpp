#pragma once

#include <string>
#include <vector>

#include "vo2/features.hpp"
#include "vo2/ingest.hpp"
#include "vo2/protocol.hpp"

namespace vo2 {

// Entry point behind the vo2kit binary. Returns 0 on success, 1 on data or
// validation failures, 2 on usage errors.
int run_cli(const std::vector<std::string>& args);

// Runs every session referenced by the manifest through the protocol machine
// and feature extraction. Participants are independent, so rows may be
// computed in parallel; output order always follows the manifest.
std::vector<FeatureVector> cohort_features(const CohortManifest& manifest,
                                           const CpsjtConfig& cfg, int threads = 1);

}  // namespace vo2
