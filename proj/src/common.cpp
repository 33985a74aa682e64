#include "sweepnet/common.hpp"

namespace sweepnet {

bool& checked_mode() {
  static bool enabled = false;
  return enabled;
}

}  // namespace sweepnet
