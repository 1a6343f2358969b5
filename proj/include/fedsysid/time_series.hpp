#pragma once

#include "fedsysid/state_space.hpp"

namespace fedsysid {

/// Paired input/output record. Column k of each matrix is sample k.
struct TimeSeriesDataset {
  Matrix inputs;   // nu x K
  Matrix outputs;  // ny x K

  Eigen::Index length() const { return inputs.cols(); }
  int nu() const { return static_cast<int>(inputs.rows()); }
  int ny() const { return static_cast<int>(outputs.rows()); }
};

/// Throws kContractViolation on unequal lengths or non-finite entries.
void validate(const TimeSeriesDataset& data);

/// Throws kContractViolation if the dataset channel counts differ from the
/// model's.
void check_compatible(const StateSpaceModel& model,
                      const TimeSeriesDataset& data);

/// True when K >= nx * (nu + ny), the minimum sample count the local solver
/// expects for a well-posed fit.
bool has_recommended_length(const TimeSeriesDataset& data, int nx);

}  // namespace fedsysid
