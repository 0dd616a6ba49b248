#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>

#include "nfadetect/features.hpp"
#include "nfadetect/nfa.hpp"
#include "nfadetect/stats.hpp"
#include "support.hpp"

using namespace nfadetect;

namespace {

DistanceMap make_dist(int w, int h, double fill, double df, double indep) {
  DistanceMap d;
  d.d2 = GridD(w, h, fill);
  d.degrees_of_freedom = df;
  d.independence_len = indep;
  return d;
}

}  // namespace

TEST_CASE("nfa_pixel: zero distance gives the test count") {
  const DistanceMap d = make_dist(20, 10, 0.0, 3.0, 1.0);
  const NfaMap m = nfa_pixel(d);
  for (double v : m.log10_nfa.v) CHECK(v == doctest::Approx(std::log10(200.0)).epsilon(1e-12));
}

TEST_CASE("nfa_pixel closed form at df=2") {
  // d^2 = -2 ln(1e-4): the chi2(2) tail is exactly 1e-4, so over a 100x100
  // image NFA = 1e4 * 1e-4 = 1.
  const double d2 = -2.0 * std::log(1e-4);
  const DistanceMap d = make_dist(100, 100, d2, 2.0, 1.0);
  const NfaMap m = nfa_pixel(d);
  CHECK(m.log10_nfa.at(50, 50) == doctest::Approx(0.0).epsilon(1e-9));

  SUBCASE("doubling the area adds log10(2)") {
    const DistanceMap dd = make_dist(200, 100, d2, 2.0, 1.0);
    CHECK(nfa_pixel(dd).log10_nfa.at(0, 0) ==
          doctest::Approx(std::log10(2.0)).epsilon(1e-9));
  }
}

TEST_CASE("nfa_pixel is strictly decreasing in d2") {
  DistanceMap d = make_dist(8, 1, 0.0, 5.0, 1.0);
  for (int x = 0; x < 8; ++x) d.d2.at(x, 0) = 2.0 * x;
  const NfaMap m = nfa_pixel(d);
  for (int x = 1; x < 8; ++x) CHECK(m.log10_nfa.at(x, 0) < m.log10_nfa.at(x - 1, 0));
  CHECK_THROWS_AS(nfa_pixel(make_dist(4, 4, 0.0, 0.5, 1.0)), std::invalid_argument);
}

TEST_CASE("nfa_block: no candidates saturate at HW s^2/w^2") {
  DistanceMap d = make_dist(1024, 1024, 0.0, 45.0, 17.0);
  BlockNfaConfig cfg;
  cfg.block_size = 51;
  cfg.stride = 10;
  const NfaMap m = nfa_block(d, cfg);
  const double expect = std::log10(1024.0 * 1024.0 * 289.0 / 2601.0);
  CHECK(std::pow(10.0, expect) == doctest::Approx(116508.444444).epsilon(1e-9));
  for (int i = 0; i < 64; ++i)
    CHECK(m.log10_nfa.v[i * 16001] == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("nfa_block: fully saturated blocks hit the k=n tail") {
  DistanceMap d = make_dist(64, 64, 1e9, 2.0, 4.0);
  BlockNfaConfig cfg;
  cfg.block_size = 16;
  cfg.stride = 8;
  cfg.tail_p = 0.01;
  const NfaMap m = nfa_block(d, cfg);
  const double n_sub = 256.0 / 16.0;
  const double expect = std::log10(64.0 * 64.0 * 16.0 / 256.0) + n_sub * std::log10(0.01);
  for (double v : m.log10_nfa.v) CHECK(v == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("nfa_block is nonincreasing in the candidate count") {
  // Left block has more over-threshold pixels than the right one.
  DistanceMap d = make_dist(32, 16, 0.0, 1.0, 2.0);
  const double tau = chi2_quantile(0.99, 1.0);
  for (int y = 4; y < 12; ++y)
    for (int x = 2; x < 10; ++x) d.d2.at(x, y) = tau + 1.0;
  for (int y = 6; y < 9; ++y)
    for (int x = 20; x < 23; ++x) d.d2.at(x, y) = tau + 1.0;
  BlockNfaConfig cfg;
  cfg.block_size = 16;
  cfg.stride = 16;
  const NfaMap m = nfa_block(d, cfg);
  CHECK(m.log10_nfa.at(5, 8) < m.log10_nfa.at(21, 8));

  SUBCASE("validation") {
    CHECK_THROWS_AS(nfa_block(make_dist(8, 8, 0.0, 1.0, 2.0), cfg), std::invalid_argument);
    BlockNfaConfig small = cfg;
    small.block_size = 1;
    CHECK_THROWS_AS(nfa_block(d, small), std::invalid_argument);
  }
}

TEST_CASE("region configuration term") {
  RegionNfaConfig cfg;
  // N/st^2 = 1 with a unit test count isolates alpha * beta^1 / 1.
  const double log_term = region_log10_nfa(1.0, 0.0, 1.0, 1.0, cfg);
  CHECK(std::pow(10.0, log_term) ==
        doctest::Approx(0.316915 * 4.062570).epsilon(1e-9));
}

TEST_CASE("region NFA of a single seed at the threshold") {
  RegionNfaConfig cfg;
  const double tau = chi2_quantile(0.99, 1.0);
  const double v = region_log10_nfa(1.0, tau, 1.0, 64.0 * 64.0, cfg);
  // 4096 * (alpha beta) * 0.01
  CHECK(std::pow(10.0, v) ==
        doctest::Approx(4096.0 * 0.316915 * 4.062570 * 0.01).epsilon(1e-6));
}

TEST_CASE("region growth recovers an isolated plateau exactly") {
  DistanceMap d = make_dist(32, 32, 0.0, 1.0, 1.0);
  std::set<std::pair<int, int>> plateau;
  for (int y = 8; y <= 10; ++y)
    for (int x = 10; x <= 13; ++x) {
      d.d2.at(x, y) = 50.0;
      plateau.insert({x, y});
    }
  const auto [set, map] = nfa_region(d, RegionNfaConfig{});
  REQUIRE(set.regions.size() == 1);
  const Region& r = set.regions[0];
  CHECK(r.size() == 12);
  std::set<std::pair<int, int>> got(r.pixels.begin(), r.pixels.end());
  CHECK(got == plateau);

  SUBCASE("growth trace is strictly decreasing") {
    REQUIRE(r.growth_trace.size() == 12);
    for (std::size_t i = 1; i < r.growth_trace.size(); ++i)
      CHECK(r.growth_trace[i] < r.growth_trace[i - 1]);
    CHECK(r.log10_nfa == r.growth_trace.back());
    CHECK(r.log10_nfa <= r.growth_trace.front());
  }
  SUBCASE("map: plateau pixels get the region value, the rest the maximum") {
    CHECK(map.log10_nfa.at(11, 9) == r.log10_nfa);
    CHECK(map.log10_nfa.at(0, 0) == r.log10_nfa);  // single region: fill = its value
  }
  SUBCASE("region pixels are 4-connected") {
    // Every pixel except the first reaches another region pixel.
    for (const auto& [x, y] : r.pixels) {
      if (r.size() == 1) break;
      bool connected = false;
      for (const auto& [x2, y2] : r.pixels)
        if (std::abs(x - x2) + std::abs(y - y2) == 1) connected = true;
      CHECK(connected);
    }
  }
}

TEST_CASE("two separated plateaus give two disjoint regions") {
  DistanceMap d = make_dist(40, 20, 0.0, 1.0, 1.0);
  for (int y = 4; y < 7; ++y)
    for (int x = 4; x < 8; ++x) d.d2.at(x, y) = 80.0;
  for (int y = 12; y < 15; ++y)
    for (int x = 30; x < 33; ++x) d.d2.at(x, y) = 60.0;
  const auto [set, map] = nfa_region(d, RegionNfaConfig{});
  REQUIRE(set.regions.size() == 2);
  std::set<std::pair<int, int>> seen;
  for (const Region& r : set.regions)
    for (const auto& px : r.pixels) CHECK(seen.insert(px).second);  // disjoint
  // Map fill outside both regions is the larger (worse) of the two values.
  const double worst = std::max(set.regions[0].log10_nfa, set.regions[1].log10_nfa);
  CHECK(map.log10_nfa.at(0, 19) == worst);
}

TEST_CASE("nfa_region rejects joint distance maps") {
  CHECK_THROWS_AS(nfa_region(make_dist(8, 8, 0.0, 3.0, 1.0), RegionNfaConfig{}),
                  std::invalid_argument);
}

TEST_CASE("nfa_region on an empty map yields no regions and a finite fill") {
  const auto [set, map] = nfa_region(make_dist(16, 16, 0.0, 1.0, 1.0), RegionNfaConfig{});
  CHECK(set.regions.empty());
  for (double v : map.log10_nfa.v) {
    CHECK(std::isfinite(v));
    CHECK(v == map.log10_nfa.v[0]);
  }
}

TEST_CASE("min_combine algebra") {
  auto random_map = [](int seed) {
    NfaMap m;
    m.strategy = "pixel";
    m.log10_nfa = GridD(6, 5);
    auto rng = testsupport::rng(seed);
    std::uniform_real_distribution<double> dist(-5.0, 5.0);
    for (double& v : m.log10_nfa.v) v = dist(rng);
    return m;
  };
  const NfaMap a = random_map(1), b = random_map(2), c = random_map(3);

  SUBCASE("single map is the identity") {
    const NfaMap r = min_combine({a});
    CHECK(r.log10_nfa.v == a.log10_nfa.v);
  }
  SUBCASE("idempotent at bit level") {
    CHECK(min_combine({a, a}).log10_nfa.v == a.log10_nfa.v);
  }
  SUBCASE("commutative and associative at bit level") {
    const auto ab_c = min_combine({min_combine({a, b}), c});
    const auto a_bc = min_combine({a, min_combine({b, c})});
    const auto cba = min_combine({c, b, a});
    CHECK(ab_c.log10_nfa.v == a_bc.log10_nfa.v);
    CHECK(ab_c.log10_nfa.v == cba.log10_nfa.v);
  }
  SUBCASE("disjoint low regions combine into the union") {
    NfaMap lo1, lo2;
    lo1.log10_nfa = GridD(4, 4, 5.0);
    lo2.log10_nfa = GridD(4, 4, 5.0);
    lo1.log10_nfa.at(0, 0) = -3.0;
    lo2.log10_nfa.at(3, 3) = -2.0;
    const NfaMap r = min_combine({lo1, lo2});
    CHECK(r.log10_nfa.at(0, 0) == -3.0);
    CHECK(r.log10_nfa.at(3, 3) == -2.0);
    CHECK(r.log10_nfa.at(1, 2) == 5.0);
  }
  SUBCASE("size mismatch throws") {
    NfaMap small;
    small.log10_nfa = GridD(3, 3, 0.0);
    CHECK_THROWS_AS(min_combine({a, small}), std::invalid_argument);
  }
}

TEST_CASE("region serialization format") {
  DistanceMap d = make_dist(8, 8, 0.0, 1.0, 1.0);
  d.d2.at(2, 3) = 100.0;
  d.d2.at(3, 3) = 90.0;
  const auto [set, map] = nfa_region(d, RegionNfaConfig{});
  REQUIRE(set.regions.size() == 1);
  const std::string text = regions_to_string(set);
  CHECK(text.substr(0, 2) == "2 ");
  CHECK(text.find("2,3;3,3\n") != std::string::npos);
}

TEST_CASE("pixel NFA under the null model stays below the epsilon budget") {
  // Mean count of NFA < 1 pixels over seeded noise images; the contract
  // allows 2x slack on epsilon = 1.
  long long total = 0;
  const int trials = 25;
  for (int t = 0; t < trials; ++t) {
    const ImageStack img = testsupport::gaussian_plane(64, 64, 900 + t);
    PatchPcaConfig cfg;
    cfg.patch_size = 5;
    cfg.num_components = 8;
    const FilterBank bank = fit_patch_pca(img.plane(0), cfg);
    const FeatureStack feat = apply_bank(img.plane(0), bank);
    const NfaMap m = nfa_pixel(mahalanobis_map(feat, fit_normality(feat)));
    for (double v : m.log10_nfa.v)
      if (v < 0.0) ++total;
  }
  CHECK(static_cast<double>(total) / trials <= 2.0);
}
