#pragma once

#include <string>

#include "vo2/eval.hpp"

namespace vo2 {

// Tagged JSON for trained models; train writes it, predict reads it back.
std::string fitted_model_to_json(const FittedModel& fit, const ModelSpec& spec);

struct LoadedModel {
  FittedModel fit;
  std::string model;  // kind name
};

LoadedModel fitted_model_from_json(const std::string& text);

}  // namespace vo2
