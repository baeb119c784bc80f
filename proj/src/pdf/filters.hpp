#pragma once

#include <string>

namespace ccs::pdf {

struct PredictorParams {
  int predictor = 1;
  int colors = 1;
  int bits = 8;
  int columns = 1;
};

/// Undoes PNG row predictors (Predictor >= 10). TIFF prediction is outside
/// the supported subset.
std::string apply_predictor(std::string data, const PredictorParams& params);

}  // namespace ccs::pdf
