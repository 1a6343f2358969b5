#include "fedsysid/time_series.hpp"

#include <string>

#include "fedsysid/error.hpp"

namespace fedsysid {

void validate(const TimeSeriesDataset& data) {
  require(data.inputs.cols() == data.outputs.cols(),
          "dataset inputs and outputs have different lengths");
  require(data.inputs.rows() > 0 && data.outputs.rows() > 0,
          "dataset needs at least one input and one output channel");
  require(data.inputs.allFinite() && data.outputs.allFinite(),
          "dataset has non-finite entries");
}

void check_compatible(const StateSpaceModel& model,
                      const TimeSeriesDataset& data) {
  require(data.nu() == model.nu() && data.ny() == model.ny(),
          "dataset has " + std::to_string(data.nu()) + " inputs / " +
              std::to_string(data.ny()) + " outputs, model expects " +
              std::to_string(model.nu()) + " / " + std::to_string(model.ny()));
  require(data.inputs.cols() == data.outputs.cols(),
          "dataset inputs and outputs have different lengths");
}

bool has_recommended_length(const TimeSeriesDataset& data, int nx) {
  return data.length() >= static_cast<Eigen::Index>(nx) * (data.nu() + data.ny());
}

}  // namespace fedsysid
