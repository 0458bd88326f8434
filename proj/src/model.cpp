#include "psmooth/model.hpp"

#include <cmath>
#include <stdexcept>

namespace psmooth {

void ObservationRecord::validate() const {
  if (obs_dim < 1) throw std::invalid_argument("ObservationRecord: obs_dim must be >= 1");
  if (values.empty()) throw std::invalid_argument("ObservationRecord: need at least one observation");
  if (values.size() % static_cast<std::size_t>(obs_dim) != 0)
    throw std::invalid_argument("ObservationRecord: length not a multiple of obs_dim");
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("ObservationRecord: entries must be finite");
}

}  // namespace psmooth
