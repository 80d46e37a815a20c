#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "vcstar/feature_io.hpp"
#include "vcstar/synthetic.hpp"

using namespace vcstar;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  auto p = fs::temp_directory_path() / "vcstar_io_test";
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

}  // namespace

TEST_CASE("feature file round trip is bit exact", "[feature_io]") {
  auto corpus = synth_corpus(2, 1, 130, 99, 3);
  const feature_sequence& x = corpus.by_domain[1][0];
  const auto path = temp_dir() / "roundtrip.vcf";
  feature_io_save(x, path, {"spk1", "test"});
  const feature_sequence y = feature_io_load(path);
  CHECK(y.q == x.q);
  CHECK(y.t == x.t);
  CHECK(y.mcep == x.mcep);  // synthetic features sit on the f32 grid
  CHECK(y.log_f0 == x.log_f0);
  CHECK(y.voiced == x.voiced);
  CHECK(y.frame_period_ms == x.frame_period_ms);
  CHECK(y.ap_ref == x.ap_ref);
  CHECK(fs::exists(temp_dir() / "roundtrip.meta.json"));

  SECTION("save-load-save produces identical bytes") {
    const auto path2 = temp_dir() / "roundtrip2.vcf";
    feature_io_save(y, path2, {"spk1", "test"});
    CHECK(slurp(path) == slurp(path2));
  }
}

TEST_CASE("feature file error taxonomy", "[feature_io]") {
  auto corpus = synth_corpus(2, 1, 130, 7, 2);
  const auto path = temp_dir() / "damage.vcf";
  feature_io_save(corpus.by_domain[1][0], path);
  const std::string good = slurp(path);

  SECTION("corrupted magic") {
    std::string bad = good;
    bad[0] = 'X';
    spit(path, bad);
    try {
      feature_io_load(path);
      FAIL("expected feature_io_error");
    } catch (const feature_io_error& e) {
      CHECK(e.code == io_errc::bad_magic);
    }
  }

  SECTION("truncated payload") {
    spit(path, good.substr(0, good.size() / 2));
    try {
      feature_io_load(path);
      FAIL("expected feature_io_error");
    } catch (const feature_io_error& e) {
      CHECK(e.code == io_errc::size_mismatch);
    }
  }

  SECTION("trailing garbage") {
    spit(path, good + "xx");
    try {
      feature_io_load(path);
      FAIL("expected feature_io_error");
    } catch (const feature_io_error& e) {
      CHECK(e.code == io_errc::size_mismatch);
    }
  }

  SECTION("non-finite payload") {
    std::string bad = good;
    const float nan_v = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(bad.data() + 20, &nan_v, sizeof(float));  // first mcep value
    spit(path, bad);
    try {
      feature_io_load(path);
      FAIL("expected feature_io_error");
    } catch (const feature_io_error& e) {
      CHECK(e.code == io_errc::non_finite);
    }
  }
}

TEST_CASE("speaker stats JSON round trip", "[feature_io]") {
  speaker_stats s;
  s.mcep_mean = {0.25, -1.5};
  s.mcep_std = {1.0, 2.5};
  s.logf0_mean = 5.01;
  s.logf0_std = 0.11;
  const auto path = temp_dir() / "stats.json";
  stats_save(s, path);
  auto r = stats_load(path);
  CHECK(r.mcep_mean == s.mcep_mean);
  CHECK(r.mcep_std == s.mcep_std);
  CHECK(r.logf0_mean == s.logf0_mean);
  CHECK(r.logf0_std == s.logf0_std);
}

TEST_CASE("synthetic corpus determinism and structure", "[synthetic]") {
  auto a = synth_corpus(3, 2, 140, 11, 4);
  auto b = synth_corpus(3, 2, 140, 11, 4);

  SECTION("same seed gives identical corpora") {
    for (int d = 1; d <= 3; ++d)
      for (int u = 0; u < 2; ++u) {
        CHECK(a.by_domain[d][u].mcep == b.by_domain[d][u].mcep);
        CHECK(a.by_domain[d][u].log_f0 == b.by_domain[d][u].log_f0);
        CHECK(a.by_domain[d][u].voiced == b.by_domain[d][u].voiced);
      }
  }

  SECTION("different domains render the same latent differently") {
    CHECK(a.by_domain[1][0].mcep != a.by_domain[2][0].mcep);
  }

  SECTION("different seeds give different corpora") {
    auto c = synth_corpus(3, 2, 140, 12, 4);
    CHECK(a.by_domain[1][0].mcep != c.by_domain[1][0].mcep);
  }

  SECTION("voicing shared across domains") {
    CHECK(a.by_domain[1][1].voiced == a.by_domain[3][1].voiced);
  }

  SECTION("ground truth accessor aliases the domain rendering") {
    CHECK(a.ground_truth(2, 1).mcep == a.by_domain[2][1].mcep);
  }

  SECTION("has voiced and unvoiced frames") {
    const auto& v = a.by_domain[1][0].voiced;
    CHECK(std::count(v.begin(), v.end(), 1) > 2);
    CHECK(std::count(v.begin(), v.end(), 0) > 0);
  }

  SECTION("too-short frames rejected") {
    CHECK_THROWS_AS(synth_corpus(2, 1, 100, 1, 4), data_error);
    CHECK_THROWS_AS(synth_corpus(1, 1, 140, 1, 4), data_error);
  }

  SECTION("sequences validate") {
    for (int d = 1; d <= 3; ++d)
      for (int u = 0; u < 2; ++u) CHECK_NOTHROW(a.by_domain[d][u].validate());
  }
}
