#pragma once

#include <algorithm>
#include <span>

namespace nowcast {

// Sums after sorting, so the result depends only on the multiset of values,
// never on traversal order. Geometry actions permute pixels and kernel taps;
// reductions that must be exactly invariant under those permutations go
// through here.
inline double multiset_sum(std::span<double> scratch) {
  std::sort(scratch.begin(), scratch.end());
  double acc = 0.0;
  for (double v : scratch) acc += v;
  return acc;
}

}  // namespace nowcast
