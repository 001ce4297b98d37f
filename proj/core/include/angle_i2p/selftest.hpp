#pragma once

#include <iosfwd>

namespace angle_i2p {

/// Quick numerical checks of the core invariants against the scalar
/// references. Prints one line per check; true when all pass.
bool run_selftest(std::ostream& out);

}  // namespace angle_i2p
