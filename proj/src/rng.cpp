#include "refswap/rng.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace refswap {

std::uint64_t derive_instance_seed(std::uint64_t run_seed,
                                   std::string_view instance_id,
                                   unsigned attempt) {
  std::uint64_t h = 0;
  if (attempt == 0) {
    h = fnv1a64(instance_id);
  } else {
    std::string salted(instance_id);
    salted += "#" + std::to_string(attempt);
    h = fnv1a64(salted);
  }
  SplitMix64 rng(run_seed ^ h);
  return rng.next();
}

std::vector<std::size_t> sample_indices(std::size_t population, std::size_t n,
                                        std::uint64_t seed) {
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(population - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace refswap
