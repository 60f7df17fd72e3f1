#pragma once

#include <ostream>

namespace qednet::selftest {

// Runs the library's invariant suite (gate fidelity, norm preservation,
// gradient agreement, range bounds, threshold/metric/index oracles,
// container round-trips) with fixed seeds. Prints one line per check and
// returns the number of failures.
int run(std::ostream& out);

}  // namespace qednet::selftest
