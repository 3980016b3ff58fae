#pragma once

#include <functional>
#include <string>

namespace probstl {

// Runs fn(0..count-1), splitting the range over at most `threads` workers.
// Work items must not depend on each other; results should be written to
// per-index slots so the outcome is independent of scheduling.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

// Inverse standard normal CDF.  Acklam's rational approximation refined with
// one Halley step against erfc; accurate to ~1e-14 over (0, 1).
double normal_quantile(double p);

// Shortest decimal representation of x that round-trips through parsing.
std::string format_double(double x);

}  // namespace probstl
