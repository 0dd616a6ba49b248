#include "nfadetect/nfa.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <queue>
#include <stdexcept>
#include <unordered_map>

#include "nfadetect/errors.hpp"

namespace nfadetect {

namespace {

struct FrontierEntry {
  double d2;
  int x;
  int y;
};

/// Max-heap on d²; ties resolved in row-major order.
struct FrontierLess {
  bool operator()(const FrontierEntry& a, const FrontierEntry& b) const {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    if (a.y != b.y) return a.y > b.y;
    return a.x > b.x;
  }
};

}  // namespace

NfaMap nfa_pixel(const DistanceMap& dist) {
  if (!(dist.degrees_of_freedom >= 1.0))
    throw std::invalid_argument("nfa_pixel: degrees of freedom must be >= 1");
  const int w = dist.d2.width;
  const int h = dist.d2.height;
  NfaMap out;
  out.strategy = "pixel";
  out.log10_nfa = GridD(w, h);
  out.num_tests = static_cast<double>(w) * h;
  const double log_nt = std::log10(out.num_tests);
  const double df = dist.degrees_of_freedom;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out.log10_nfa.at(x, y) = log_nt + chi2_sf_log10(dist.d2.at(x, y), df);
  return out;
}

NfaMap nfa_block(const DistanceMap& dist, const BlockNfaConfig& cfg,
                 std::vector<double>* block_values) {
  const int w = dist.d2.width;
  const int h = dist.d2.height;
  const int bs = cfg.block_size;
  if (bs < 1 || cfg.stride < 1)
    throw std::invalid_argument("nfa_block: block size and stride must be positive");
  if (w < bs || h < bs) throw std::invalid_argument("nfa_block: image smaller than the block");
  const double s = dist.independence_len;
  if (bs < s)
    throw std::invalid_argument("nfa_block: block smaller than the independence length");

  const double tau = chi2_quantile(1.0 - cfg.tail_p, dist.degrees_of_freedom);

  // Summed-area table of over-threshold candidates.
  std::vector<std::int64_t> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0);
  for (int y = 0; y < h; ++y) {
    std::int64_t rowsum = 0;
    for (int x = 0; x < w; ++x) {
      rowsum += dist.d2.at(x, y) > tau ? 1 : 0;
      sat[static_cast<std::size_t>(y + 1) * (w + 1) + (x + 1)] =
          sat[static_cast<std::size_t>(y) * (w + 1) + (x + 1)] + rowsum;
    }
  }
  auto block_count = [&](int x0, int y0) {
    const std::size_t stride = w + 1;
    return sat[(y0 + bs) * stride + (x0 + bs)] - sat[(y0 + bs) * stride + x0] -
           sat[y0 * stride + (x0 + bs)] + sat[y0 * stride + x0];
  };

  // Grid positions at the configured stride plus edge-clamped final rows and
  // columns so every pixel is covered by at least one block.
  std::vector<int> xs, ys;
  for (int x = 0; x + bs <= w; x += cfg.stride) xs.push_back(x);
  if (xs.back() != w - bs) xs.push_back(w - bs);
  for (int y = 0; y + bs <= h; y += cfg.stride) ys.push_back(y);
  if (ys.back() != h - bs) ys.push_back(h - bs);

  const double s2 = s * s;
  const double n_sub = static_cast<double>(bs) * bs / s2;
  const double log_nt = std::log10(static_cast<double>(w) * h * s2 / (static_cast<double>(bs) * bs));

  NfaMap out;
  out.strategy = "block";
  out.log10_nfa = GridD(w, h, std::numeric_limits<double>::infinity());
  out.num_tests = static_cast<double>(w) * h * s2 / (static_cast<double>(bs) * bs);
  std::unordered_map<std::int64_t, double> tail_cache;
  for (int y0 : ys) {
    for (int x0 : xs) {
      const std::int64_t count = block_count(x0, y0);
      auto it = tail_cache.find(count);
      if (it == tail_cache.end())
        it = tail_cache.emplace(count, log_nt + binomial_tail_log10(n_sub, count / s2, cfg.tail_p))
                 .first;
      const double value = it->second;
      if (block_values) block_values->push_back(value);
      for (int y = y0; y < y0 + bs; ++y)
        for (int x = x0; x < x0 + bs; ++x)
          out.log10_nfa.at(x, y) = std::min(out.log10_nfa.at(x, y), value);
    }
  }
  return out;
}

double region_log10_nfa(double n_pixels, double sum_d2, double independence_len,
                        double image_pixels, const RegionNfaConfig& cfg) {
  const double st2 = independence_len * independence_len;
  const double n = n_pixels / st2;
  const double x = sum_d2 / st2;
  return std::log10(image_pixels / st2) + std::log10(cfg.alpha) + n * std::log10(cfg.beta) -
         std::log10(n) + chi2_sf_log10(x, n);
}

std::pair<RegionSet, NfaMap> nfa_region(const DistanceMap& dist, const RegionNfaConfig& cfg) {
  if (dist.degrees_of_freedom != 1.0)
    throw std::invalid_argument("nfa_region: needs a single-component (df=1) distance map");
  const int w = dist.d2.width;
  const int h = dist.d2.height;
  const double hw = static_cast<double>(w) * h;
  const double st = dist.independence_len;
  const double tau = chi2_quantile(1.0 - cfg.tail_p, 1.0);

  auto d2 = [&](int x, int y) { return dist.d2.at(x, y); };

  // Seeds: 4-neighborhood local maxima above tau, visited in descending-d²
  // order (row-major on ties).
  std::vector<FrontierEntry> seeds;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = d2(x, y);
      if (v <= tau) continue;
      if (x > 0 && d2(x - 1, y) > v) continue;
      if (x + 1 < w && d2(x + 1, y) > v) continue;
      if (y > 0 && d2(x, y - 1) > v) continue;
      if (y + 1 < h && d2(x, y + 1) > v) continue;
      seeds.push_back({v, x, y});
    }
  }
  std::sort(seeds.begin(), seeds.end(), [](const FrontierEntry& a, const FrontierEntry& b) {
    if (a.d2 != b.d2) return a.d2 > b.d2;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });

  std::vector<std::int32_t> claimed(static_cast<std::size_t>(w) * h, -1);
  std::vector<std::int32_t> pushed(static_cast<std::size_t>(w) * h, -1);
  auto idx = [&](int x, int y) { return static_cast<std::size_t>(y) * w + x; };

  RegionSet set;
  for (const FrontierEntry& seed : seeds) {
    if (claimed[idx(seed.x, seed.y)] >= 0) continue;
    const std::int32_t rid = static_cast<std::int32_t>(set.regions.size());

    Region reg;
    reg.pixels.push_back({seed.x, seed.y});
    reg.sum_d2 = seed.d2;
    claimed[idx(seed.x, seed.y)] = rid;
    double current = region_log10_nfa(1.0, reg.sum_d2, st, hw, cfg);
    reg.growth_trace.push_back(current);

    std::priority_queue<FrontierEntry, std::vector<FrontierEntry>, FrontierLess> frontier;
    auto push_neighbors = [&](int x, int y) {
      const int nx[4] = {x - 1, x + 1, x, x};
      const int ny[4] = {y, y, y - 1, y + 1};
      for (int k = 0; k < 4; ++k) {
        if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) continue;
        const std::size_t i = idx(nx[k], ny[k]);
        if (claimed[i] >= 0 || pushed[i] == rid) continue;
        pushed[i] = rid;
        frontier.push({d2(nx[k], ny[k]), nx[k], ny[k]});
      }
    };
    push_neighbors(seed.x, seed.y);

    while (!frontier.empty()) {
      const FrontierEntry f = frontier.top();
      frontier.pop();
      if (claimed[idx(f.x, f.y)] >= 0) continue;
      const double candidate =
          region_log10_nfa(static_cast<double>(reg.pixels.size() + 1), reg.sum_d2 + f.d2, st, hw,
                           cfg);
      // The candidate NFA is monotone in the added d², so once the best
      // frontier pixel fails no remaining pixel can succeed.
      if (!(candidate < current)) break;
      current = candidate;
      reg.sum_d2 += f.d2;
      reg.pixels.push_back({f.x, f.y});
      reg.growth_trace.push_back(current);
      claimed[idx(f.x, f.y)] = rid;
      push_neighbors(f.x, f.y);
    }

    reg.log10_nfa = current;
    std::sort(reg.pixels.begin(), reg.pixels.end(),
              [](const std::pair<int, int>& a, const std::pair<int, int>& b) {
                return a.second != b.second ? a.second < b.second : a.first < b.first;
              });
    set.regions.push_back(std::move(reg));
  }

  // Pixels outside every region get the largest NFA computed; with no
  // regions at all, the ceiling of a trivial single-pixel region.
  double fill;
  if (set.regions.empty()) {
    fill = region_log10_nfa(1.0, 0.0, st, hw, cfg);
  } else {
    fill = set.regions[0].log10_nfa;
    for (const Region& r : set.regions) fill = std::max(fill, r.log10_nfa);
  }

  NfaMap map;
  map.strategy = "region";
  map.log10_nfa = GridD(w, h, fill);
  map.num_tests = hw / (st * st);
  for (std::size_t r = 0; r < set.regions.size(); ++r)
    for (const auto& [x, y] : set.regions[r].pixels)
      map.log10_nfa.at(x, y) = set.regions[r].log10_nfa;
  return {std::move(set), std::move(map)};
}

NfaMap min_combine(const std::vector<NfaMap>& maps) {
  if (maps.empty()) throw std::invalid_argument("min_combine: no maps");
  NfaMap out = maps[0];
  for (std::size_t i = 1; i < maps.size(); ++i) {
    const NfaMap& m = maps[i];
    if (m.log10_nfa.width != out.log10_nfa.width || m.log10_nfa.height != out.log10_nfa.height)
      throw std::invalid_argument("min_combine: size mismatch");
    for (std::size_t p = 0; p < out.log10_nfa.size(); ++p)
      out.log10_nfa.v[p] = std::min(out.log10_nfa.v[p], m.log10_nfa.v[p]);
    out.num_tests += m.num_tests;
  }
  if (maps.size() > 1) out.component_index = -1;
  return out;
}

std::string regions_to_string(const RegionSet& set) {
  std::string out;
  char buf[64];
  for (const Region& r : set.regions) {
    std::snprintf(buf, sizeof(buf), "%d %.9g ", r.size(), r.log10_nfa);
    out += buf;
    for (std::size_t i = 0; i < r.pixels.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%d,%d", r.pixels[i].first, r.pixels[i].second);
      out += buf;
      if (i + 1 < r.pixels.size()) out += ';';
    }
    out += '\n';
  }
  return out;
}

void write_regions(const std::string& path, const RegionSet& set) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open for writing: " + path);
  f << regions_to_string(set);
  if (!f) throw io_error("failed writing: " + path);
}

}  // namespace nfadetect
