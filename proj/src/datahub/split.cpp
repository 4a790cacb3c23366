#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "avaca/datahub.hpp"
#include "avaca/error.hpp"
#include "avaca/rng.hpp"

namespace avaca {
namespace {

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Hamilton apportionment of m items over the three ratios; ties in the
// remainder go to train, then val, then test.
std::array<std::size_t, 3> apportion(std::size_t m, const std::array<double, 3>& ratios) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double quota = ratios[i] * static_cast<double>(m);
    counts[i] = static_cast<std::size_t>(std::floor(quota));
    remainders[i] = quota - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t i = 0; assigned < m; i = (i + 1) % 3, ++assigned) ++counts[order[i]];
  return counts;
}

}  // namespace

Manifest stratified_split(const Manifest& manifest, SplitRatios ratios, std::uint64_t seed) {
  if (manifest.records.empty()) throw ContractError("stratified_split: empty manifest");
  const std::array<double, 3> r{ratios.train, ratios.val, ratios.test};
  for (double v : r) {
    if (!(v >= 0.0)) throw ParameterError("split ratios must be non-negative");
  }
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) throw ParameterError("split ratios must sum to 1");

  // Strata are (scene, class) pairs; members keep manifest order before shuffling.
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& rec = manifest.records[i];
    strata[{rec.scene, rec.class_name}].push_back(i);
  }

  Manifest out = manifest;
  for (auto& [key, members] : strata) {
    Rng rng(derive_seed(seed, fnv1a(key.first + "\x1f" + key.second)));
    rng.shuffle(members);
    const std::size_t m = members.size();
    std::array<std::size_t, 3> counts{};
    if (m == 1) {
      counts = {1, 0, 0};
    } else if (m == 2) {
      counts = {1, 0, 1};
    } else {
      counts = apportion(m, r);
    }
    std::size_t pos = 0;
    const std::array<Split, 3> splits{Split::kTrain, Split::kVal, Split::kTest};
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t n = 0; n < counts[s]; ++n) out.records[members[pos++]].split = splits[s];
    }
  }
  return out;
}

}  // namespace avaca
