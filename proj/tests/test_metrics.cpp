#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <vector>

#include "vcstar/metrics.hpp"
#include "vcstar/rng.hpp"
#include "vcstar/synthetic.hpp"

using namespace vcstar;
namespace mx = vcstar::metrics;

namespace {

feature_sequence seq_from(const std::vector<std::vector<double>>& dims) {
  feature_sequence s = feature_sequence::zeros(dims.size(), dims[0].size());
  for (std::size_t d = 0; d < dims.size(); ++d)
    for (std::size_t t = 0; t < dims[d].size(); ++t) s.mc(d, t) = dims[d][t];
  for (std::size_t t = 0; t < s.t; ++t) {
    s.voiced[t] = 1;
    s.log_f0[t] = 5.0;
  }
  return s;
}

feature_sequence random_seq(std::size_t q, std::size_t t, rng& r) {
  feature_sequence s = feature_sequence::zeros(q, t);
  for (auto& v : s.mcep) v = r.normal();
  for (std::size_t i = 0; i < t; ++i) {
    s.voiced[i] = 1;
    s.log_f0[i] = 5.0;
  }
  return s;
}

// Exhaustive-search DTW: enumerate every monotone path with steps
// {(1,0),(0,1),(1,1)} and keep the cheapest. Independent of the DP code.
void enumerate_paths(const feature_sequence& a, const feature_sequence& b,
                     std::size_t i, std::size_t j, double cost,
                     std::vector<mx::path_node>& current, double& best_cost,
                     std::vector<mx::path_node>& best_path) {
  cost += mx::frame_distance(a, i, b, j);
  current.emplace_back(i, j);
  if (i + 1 == a.t && j + 1 == b.t) {
    if (cost < best_cost) {
      best_cost = cost;
      best_path = current;
    }
  } else {
    if (i + 1 < a.t && j + 1 < b.t)
      enumerate_paths(a, b, i + 1, j + 1, cost, current, best_cost, best_path);
    if (i + 1 < a.t)
      enumerate_paths(a, b, i + 1, j, cost, current, best_cost, best_path);
    if (j + 1 < b.t)
      enumerate_paths(a, b, i, j + 1, cost, current, best_cost, best_path);
  }
  current.pop_back();
}

std::vector<mx::path_node> brute_force_dtw(const feature_sequence& a,
                                           const feature_sequence& b) {
  std::vector<mx::path_node> current, best;
  double best_cost = std::numeric_limits<double>::infinity();
  enumerate_paths(a, b, 0, 0, 0.0, current, best_cost, best);
  return best;
}

double path_cost(const feature_sequence& a, const feature_sequence& b,
                 const std::vector<mx::path_node>& path) {
  double acc = 0.0;
  for (const auto& [i, j] : path) acc += mx::frame_distance(a, i, b, j);
  return acc;
}

// Independent log-modulation-spectrum oracle: textbook complex DFT of the
// periodic-Hann-windowed signal, long double accumulation.
std::vector<double> oracle_log_ms(const std::vector<double>& x) {
  const std::size_t L = mx::ms_window;
  REQUIRE(x.size() >= L);
  const std::size_t windows = (x.size() - L) / mx::ms_hop + 1;
  std::vector<double> avg(mx::ms_bins, 0.0);
  for (std::size_t w = 0; w < windows; ++w) {
    for (std::size_t k = 0; k < mx::ms_bins; ++k) {
      std::complex<long double> acc{0.0L, 0.0L};
      for (std::size_t n = 0; n < L; ++n) {
        const long double hann =
            0.5L * (1.0L - std::cos(2.0L * std::numbers::pi_v<long double> *
                                    static_cast<long double>(n) /
                                    static_cast<long double>(L)));
        const long double ang = -2.0L * std::numbers::pi_v<long double> *
                                static_cast<long double>(k * n) /
                                static_cast<long double>(L);
        acc += static_cast<long double>(x[w * mx::ms_hop + n]) * hann *
               std::complex<long double>{std::cos(ang), std::sin(ang)};
      }
      avg[k] += static_cast<double>(std::abs(acc));
    }
  }
  for (auto& v : avg)
    v = std::log10(std::max(v / static_cast<double>(windows), mx::ms_log_floor));
  return avg;
}

}  // namespace

TEST_CASE("dtw on identical sequences is the diagonal", "[metrics]") {
  rng r(3);
  const feature_sequence a = random_seq(3, 9, r);
  const auto path = mx::dtw_align(a, a);
  REQUIRE(path.size() == 9);
  for (std::size_t k = 0; k < 9; ++k) {
    CHECK(path[k].first == k);
    CHECK(path[k].second == k);
  }
}

TEST_CASE("dtw absorbs a duplicated frame with one extra step", "[metrics]") {
  rng r(5);
  const feature_sequence a = random_seq(2, 6, r);
  feature_sequence b = feature_sequence::zeros(2, 7);
  const std::size_t dup = 3;
  for (std::size_t d = 0; d < 2; ++d) {
    std::size_t out = 0;
    for (std::size_t t = 0; t < 6; ++t) {
      b.mc(d, out++) = a.mc(d, t);
      if (t == dup) b.mc(d, out++) = a.mc(d, t);
    }
  }
  const auto path = mx::dtw_align(a, b);
  const auto oracle = brute_force_dtw(a, b);
  CHECK(path.size() == 7);  // Ta + 1 nodes
  CHECK(path == oracle);
  CHECK(path_cost(a, b, path) == Catch::Approx(0.0).margin(1e-12));
  std::size_t horizontal = 0;
  for (std::size_t k = 1; k < path.size(); ++k)
    if (path[k].first == path[k - 1].first) ++horizontal;
  CHECK(horizontal == 1);
}

TEST_CASE("dtw matches exhaustive search on 100 random pairs", "[metrics]") {
  rng r(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t ta = 2 + r.next_below(5);  // up to 6
    const std::size_t tb = 2 + r.next_below(5);
    const feature_sequence a = random_seq(2, ta, r);
    const feature_sequence b = random_seq(2, tb, r);
    const auto dp = mx::dtw_align(a, b);
    const auto oracle = brute_force_dtw(a, b);
    // Continuous random costs make the optimum unique almost surely.
    CHECK(dp == oracle);
    CHECK(path_cost(a, b, dp) == Catch::Approx(path_cost(a, b, oracle)).margin(1e-12));
    // Monotone, endpoint-pinned.
    CHECK(dp.front() == mx::path_node{0, 0});
    CHECK(dp.back() == mx::path_node{ta - 1, tb - 1});
    for (std::size_t k = 1; k < dp.size(); ++k) {
      CHECK(dp[k].first >= dp[k - 1].first);
      CHECK(dp[k].second >= dp[k - 1].second);
    }
  }
}

TEST_CASE("mcd closed forms", "[metrics]") {
  SECTION("identical sequences score zero") {
    rng r(11);
    const feature_sequence a = random_seq(4, 12, r);
    CHECK(mx::mcd(a, a, true) == 0.0);
    CHECK(mx::mcd(a, a, false) == 0.0);
  }

  SECTION("single frame differing by 1 in one dimension") {
    const feature_sequence a = seq_from({{0.0}, {0.0}});
    const feature_sequence b = seq_from({{1.0}, {0.0}});
    const double expected = 10.0 / std::numbers::ln10 * std::sqrt(2.0);
    CHECK(mx::mcd(a, b, false) == Catch::Approx(6.1419).margin(1e-3));
    CHECK(mx::mcd(a, b, false) == Catch::Approx(expected).margin(1e-12));
  }

  SECTION("symmetry without alignment") {
    rng r(13);
    const feature_sequence a = random_seq(3, 10, r);
    const feature_sequence b = random_seq(3, 10, r);
    CHECK(mx::mcd(a, b, false) == Catch::Approx(mx::mcd(b, a, false)).margin(1e-12));
  }

  SECTION("pre-aligned equal-length inputs use the frame-mean formula") {
    rng r(17);
    const feature_sequence a = random_seq(3, 5, r);
    const feature_sequence b = random_seq(3, 5, r);
    double expected = 0.0;
    for (std::size_t t = 0; t < 5; ++t) {
      double acc = 0.0;
      for (std::size_t d = 0; d < 3; ++d) {
        const double diff = a.mc(d, t) - b.mc(d, t);
        acc += diff * diff;
      }
      expected += 10.0 / std::numbers::ln10 * std::sqrt(2.0 * acc);
    }
    expected /= 5.0;
    CHECK(mx::mcd(a, b, false) == Catch::Approx(expected).margin(1e-12));
  }

  SECTION("dimension mismatch rejected") {
    rng r(19);
    const feature_sequence a = random_seq(3, 5, r);
    const feature_sequence b = random_seq(2, 5, r);
    CHECK_THROWS_AS(mx::mcd(a, b, false), data_error);
  }
}

TEST_CASE("modulation spectrum shape and spectral placement", "[metrics]") {
  SECTION("constant sequence concentrates at the zero-frequency bin") {
    feature_sequence c = feature_sequence::zeros(2, 128);
    for (auto& v : c.mcep) v = 3.0;
    const tensor ms = mx::modulation_spectrum(c);
    REQUIRE(ms.shape() == std::vector<std::size_t>{2, 65});
    const double floor_log = std::log10(mx::ms_log_floor);
    for (std::size_t d = 0; d < 2; ++d) {
      // Bin 0 dominates; the Hann mainlobe also reaches bin 1, every other
      // bin of the periodic window is exactly zero and lands on the floor.
      CHECK(ms.at(d, 0) > ms.at(d, 1));
      for (std::size_t k = 2; k < 65; ++k)
        CHECK(ms.at(d, k) == Catch::Approx(floor_log).margin(1e-9));
    }
  }

  SECTION("pure sinusoid peaks at its own bin") {
    for (std::size_t bin : {3u, 17u, 40u}) {
      feature_sequence s = feature_sequence::zeros(1, 128);
      for (std::size_t t = 0; t < 128; ++t)
        s.mc(0, t) = std::sin(2.0 * std::numbers::pi * static_cast<double>(bin * t) /
                              128.0);
      const tensor ms = mx::modulation_spectrum(s);
      std::size_t argmax = 1;
      for (std::size_t k = 1; k < 65; ++k)
        if (ms.at(0, k) > ms.at(0, argmax)) argmax = k;
      CHECK(argmax == bin);
    }
  }

  SECTION("matches the independent DFT oracle") {
    rng r(23);
    feature_sequence s = random_seq(2, 192, r);
    const tensor ms = mx::modulation_spectrum(s);
    for (std::size_t d = 0; d < 2; ++d) {
      std::vector<double> x(s.t);
      for (std::size_t t = 0; t < s.t; ++t) x[t] = s.mc(d, t);
      const auto oracle = oracle_log_ms(x);
      for (std::size_t k = 0; k < 65; ++k)
        CHECK(ms.at(d, k) == Catch::Approx(oracle[k]).margin(1e-9));
    }
  }

  SECTION("too-short input rejected") {
    feature_sequence s = feature_sequence::zeros(1, 100);
    CHECK_THROWS_AS(mx::modulation_spectrum(s), data_error);
  }
}

TEST_CASE("msd closed forms and symmetry", "[metrics]") {
  SECTION("identical inputs score zero") {
    rng r(29);
    const feature_sequence a = random_seq(2, 160, r);
    CHECK(mx::msd(a, a) == 0.0);
  }

  SECTION("symmetry within 1e-9") {
    rng r(31);
    const feature_sequence a = random_seq(2, 160, r);
    const feature_sequence b = random_seq(2, 160, r);
    CHECK(mx::msd(a, b) == Catch::Approx(mx::msd(b, a)).margin(1e-9));
  }

  SECTION("two constants: RMS of the oracle log-MS difference") {
    feature_sequence a = feature_sequence::zeros(1, 128);
    feature_sequence b = feature_sequence::zeros(1, 128);
    for (auto& v : a.mcep) v = 2.0;
    for (auto& v : b.mcep) v = 5.0;
    const auto ma = oracle_log_ms(std::vector<double>(128, 2.0));
    const auto mb = oracle_log_ms(std::vector<double>(128, 5.0));
    double acc = 0.0;
    for (std::size_t k = 0; k < 65; ++k) {
      const double d = ma[k] - mb[k];
      acc += d * d;
    }
    const double expected = 10.0 * std::sqrt(acc / 65.0);
    CHECK(mx::msd(a, b) == Catch::Approx(expected).margin(1e-9));
  }
}

TEST_CASE("synthetic renderings measured by mcd", "[metrics][synthetic]") {
  auto corpus = synth_corpus(2, 1, 140, 13, 4);
  // Distinct domain transforms of the same latent are measurably apart.
  CHECK(mx::mcd(corpus.by_domain[1][0], corpus.by_domain[2][0], true) > 0.0);
  // Re-rendering a domain reproduces its ground truth exactly.
  auto again = synth_corpus(2, 1, 140, 13, 4);
  CHECK(mx::mcd(corpus.ground_truth(1, 0), again.by_domain[1][0], true) == 0.0);
}

TEST_CASE("corpus evaluation against parallel ground truth", "[metrics]") {
  auto corpus = synth_corpus(3, 2, 160, 77, 4);

  SECTION("oracle conversion scores zero everywhere") {
    auto oracle = [&](const feature_sequence&, int, int tgt) {
      return corpus.by_domain[tgt][0];
    };
    // Single-utterance view so the oracle can ignore the utterance index.
    domain_corpus view;
    for (auto& [d, seqs] : corpus.by_domain) view[d] = {seqs[0]};
    const auto report = mx::evaluate_corpus(view, oracle);
    CHECK(report.count == 6);  // N(N-1) pairs, 1 utterance
    for (const auto& row : report.rows) {
      CHECK(row.mcd_db == 0.0);
      CHECK(row.msd_db == 0.0);
    }
    CHECK(report.mcd_mean == 0.0);
    CHECK(report.msd_mean == 0.0);
  }

  SECTION("identity conversion is strictly worse than the oracle") {
    auto identity = [](const feature_sequence& x, int, int) { return x; };
    const auto report = mx::evaluate_corpus(corpus.by_domain, identity);
    CHECK(report.count == 3 * 2 * 2);  // N(N-1) pairs x utterances
    CHECK(report.mcd_mean > 0.0);
    CHECK(report.msd_mean > 0.0);
  }

  SECTION("missing parallel reference rejected") {
    domain_corpus broken = corpus.by_domain;
    broken[2].pop_back();
    auto identity = [](const feature_sequence& x, int, int) { return x; };
    CHECK_THROWS_AS(mx::evaluate_corpus(broken, identity), data_error);
  }

  SECTION("row count is N(N-1) x utterances") {
    auto identity = [](const feature_sequence& x, int, int) { return x; };
    const auto report = mx::evaluate_corpus(corpus.by_domain, identity);
    CHECK(report.rows.size() == 12);
    CHECK(report.per_pair.size() == 6);
  }
}
