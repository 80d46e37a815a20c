#pragma once

#include <json.hpp>

#include <cmath>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

#include "vcstar/features.hpp"
#include "vcstar/tensor.hpp"

namespace vcstar::metrics {

// Conventions fixed by this artifact (the evaluation protocol leaves them
// open): symmetric-step DTW under per-frame Euclidean MCEP distance for MCD
// alignment; 128-point periodic Hann windows with 50% overlap, magnitude
// averaging, and a 1e-10 floor before log10 for modulation spectra.
inline constexpr std::size_t ms_window = 128;
inline constexpr std::size_t ms_hop = 64;
inline constexpr std::size_t ms_bins = ms_window / 2 + 1;
inline constexpr double ms_log_floor = 1e-10;

inline nlohmann::json conventions() {
  return {{"alignment", "dtw, symmetric steps, euclidean mcep frame distance"},
          {"ms_window", ms_window},
          {"ms_hop", ms_hop},
          {"ms_bins", ms_bins},
          {"ms_log_floor", ms_log_floor},
          {"mcd_scale", "10/ln10 * sqrt(2 * sum_d diff^2)"},
          {"mcd_dims", "all stored dimensions"}};
}

using path_node = std::pair<std::size_t, std::size_t>;

inline double frame_distance(const feature_sequence& a, std::size_t i,
                             const feature_sequence& b, std::size_t j) {
  double acc = 0.0;
  for (std::size_t d = 0; d < a.q; ++d) {
    const double diff = a.mc(d, i) - b.mc(d, j);
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

// Dynamic time warping with steps {(1,0),(0,1),(1,1)}, endpoints pinned.
// Ties prefer the diagonal, then advancing the first sequence.
inline std::vector<path_node> dtw_align(const feature_sequence& a,
                                        const feature_sequence& b) {
  if (a.q != b.q) throw data_error("dtw_align: dimension mismatch");
  if (a.t == 0 || b.t == 0) throw data_error("dtw_align: empty sequence");
  const std::size_t n = a.t, m = b.t;
  std::vector<double> cost(n * m);
  std::vector<std::uint8_t> step(n * m);  // 0 diag, 1 up (i-1), 2 left (j-1)
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = frame_distance(a, i, b, j);
      if (i == 0 && j == 0) {
        cost[0] = d;
        continue;
      }
      double best = std::numeric_limits<double>::infinity();
      std::uint8_t how = 0;
      if (i > 0 && j > 0 && cost[(i - 1) * m + (j - 1)] < best) {
        best = cost[(i - 1) * m + (j - 1)];
        how = 0;
      }
      if (i > 0 && cost[(i - 1) * m + j] < best) {
        best = cost[(i - 1) * m + j];
        how = 1;
      }
      if (j > 0 && cost[i * m + (j - 1)] < best) {
        best = cost[i * m + (j - 1)];
        how = 2;
      }
      cost[i * m + j] = best + d;
      step[i * m + j] = how;
    }
  }
  std::vector<path_node> path;
  std::size_t i = n - 1, j = m - 1;
  path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    switch (step[i * m + j]) {
      case 0: --i; --j; break;
      case 1: --i; break;
      default: --j; break;
    }
    path.emplace_back(i, j);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

inline double mcd_frame_db(const feature_sequence& a, std::size_t i,
                           const feature_sequence& b, std::size_t j) {
  double acc = 0.0;
  for (std::size_t d = 0; d < a.q; ++d) {
    const double diff = a.mc(d, i) - b.mc(d, j);
    acc += diff * diff;
  }
  return 10.0 / std::numbers::ln10 * std::sqrt(2.0 * acc);
}

// Mel-cepstral distortion in dB, averaged per aligned frame pair. With
// align == false both sequences must have equal length and frames pair by
// index.
inline double mcd(const feature_sequence& target, const feature_sequence& converted,
                  bool align = true) {
  if (target.q != converted.q) throw data_error("mcd: dimension mismatch");
  if (align) {
    const auto path = dtw_align(target, converted);
    double acc = 0.0;
    for (const auto& [i, j] : path) acc += mcd_frame_db(target, i, converted, j);
    return acc / static_cast<double>(path.size());
  }
  if (target.t != converted.t)
    throw data_error("mcd: unaligned sequences must have equal length");
  double acc = 0.0;
  for (std::size_t i = 0; i < target.t; ++i)
    acc += mcd_frame_db(target, i, converted, i);
  return acc / static_cast<double>(target.t);
}

// Log modulation spectrum per MCEP dimension: Hann-windowed DFT magnitude
// over time, averaged across 50%-overlapping windows, then log10. Q x 65.
inline tensor modulation_spectrum(const feature_sequence& x) {
  if (x.t < ms_window) throw data_error("modulation_spectrum: sequence shorter than window");
  const std::size_t windows = (x.t - ms_window) / ms_hop + 1;
  static const auto hann = [] {
    std::vector<double> w(ms_window);
    for (std::size_t n = 0; n < ms_window; ++n)
      w[n] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                   static_cast<double>(ms_window)));
    return w;
  }();
  static const auto tables = [] {
    std::vector<double> c(ms_bins * ms_window), s(ms_bins * ms_window);
    for (std::size_t k = 0; k < ms_bins; ++k)
      for (std::size_t n = 0; n < ms_window; ++n) {
        const double ang = 2.0 * std::numbers::pi * static_cast<double>(k * n) /
                           static_cast<double>(ms_window);
        c[k * ms_window + n] = std::cos(ang);
        s[k * ms_window + n] = std::sin(ang);
      }
    return std::pair(std::move(c), std::move(s));
  }();

  tensor out({x.q, ms_bins});
  std::vector<double> seg(ms_window);
  for (std::size_t d = 0; d < x.q; ++d) {
    std::vector<double> acc(ms_bins, 0.0);
    for (std::size_t w = 0; w < windows; ++w) {
      const std::size_t off = w * ms_hop;
      for (std::size_t n = 0; n < ms_window; ++n)
        seg[n] = x.mc(d, off + n) * hann[n];
      for (std::size_t k = 0; k < ms_bins; ++k) {
        double re = 0.0, im = 0.0;
        const double* ct = tables.first.data() + k * ms_window;
        const double* st = tables.second.data() + k * ms_window;
        for (std::size_t n = 0; n < ms_window; ++n) {
          re += seg[n] * ct[n];
          im -= seg[n] * st[n];
        }
        acc[k] += std::sqrt(re * re + im * im);
      }
    }
    for (std::size_t k = 0; k < ms_bins; ++k)
      out.at(d, k) =
          std::log10(std::max(acc[k] / static_cast<double>(windows), ms_log_floor));
  }
  return out;
}

// Modulation spectra distance: RMS of the log-MS difference over all
// dimensions and bins, scaled by 10 to report dB of log10 power difference.
inline double msd(const feature_sequence& target, const feature_sequence& converted) {
  if (target.q != converted.q) throw data_error("msd: dimension mismatch");
  const tensor mt = modulation_spectrum(target);
  const tensor mc = modulation_spectrum(converted);
  double acc = 0.0;
  for (std::size_t i = 0; i < mt.numel(); ++i) {
    const double d = mt[i] - mc[i];
    acc += d * d;
  }
  return 10.0 * std::sqrt(acc / static_cast<double>(mt.numel()));
}

// ---------------------------------------------------------------------------
// Corpus-level evaluation against parallel ground truth
// ---------------------------------------------------------------------------

using convert_fn =
    std::function<feature_sequence(const feature_sequence&, int, int)>;

struct eval_row {
  int source = 0;
  int target = 0;
  std::size_t utterance = 0;
  double mcd_db = 0.0;
  double msd_db = 0.0;
  std::size_t path_len = 0;
};

struct pair_aggregate {
  int source = 0;
  int target = 0;
  std::size_t count = 0;
  double mcd_mean = 0.0;
  double msd_mean = 0.0;
  double path_len_mean = 0.0;
};

struct eval_report {
  std::vector<eval_row> rows;
  std::vector<pair_aggregate> per_pair;
  std::size_t count = 0;
  double mcd_mean = 0.0;
  double msd_mean = 0.0;
};

// Converts every utterance of every source domain into every other domain and
// scores it against the parallel target-domain rendering.
inline eval_report evaluate_corpus(const domain_corpus& eval_set,
                                   const convert_fn& convert) {
  if (eval_set.size() < 2) throw data_error("evaluate_corpus: need at least 2 domains");
  const std::size_t utts = eval_set.begin()->second.size();
  for (const auto& [d, seqs] : eval_set)
    if (seqs.size() != utts)
      throw data_error("evaluate_corpus: missing parallel reference for domain " +
                       std::to_string(d));
  eval_report report;
  for (const auto& [src, src_seqs] : eval_set) {
    for (const auto& [tgt, tgt_seqs] : eval_set) {
      if (src == tgt) continue;
      pair_aggregate agg;
      agg.source = src;
      agg.target = tgt;
      for (std::size_t u = 0; u < utts; ++u) {
        const feature_sequence converted = convert(src_seqs[u], src, tgt);
        const feature_sequence& truth = tgt_seqs[u];
        eval_row row;
        row.source = src;
        row.target = tgt;
        row.utterance = u;
        const auto path = dtw_align(truth, converted);
        double acc = 0.0;
        for (const auto& [i, j] : path) acc += mcd_frame_db(truth, i, converted, j);
        row.mcd_db = acc / static_cast<double>(path.size());
        row.msd_db = msd(truth, converted);
        row.path_len = path.size();
        agg.count += 1;
        agg.mcd_mean += row.mcd_db;
        agg.msd_mean += row.msd_db;
        agg.path_len_mean += static_cast<double>(row.path_len);
        report.rows.push_back(row);
      }
      if (agg.count > 0) {
        agg.mcd_mean /= static_cast<double>(agg.count);
        agg.msd_mean /= static_cast<double>(agg.count);
        agg.path_len_mean /= static_cast<double>(agg.count);
        report.per_pair.push_back(agg);
      }
    }
  }
  report.count = report.rows.size();
  for (const auto& row : report.rows) {
    report.mcd_mean += row.mcd_db;
    report.msd_mean += row.msd_db;
  }
  if (report.count > 0) {
    report.mcd_mean /= static_cast<double>(report.count);
    report.msd_mean /= static_cast<double>(report.count);
  }
  return report;
}

inline nlohmann::json to_json(const eval_report& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"source", row.source},
                    {"target", row.target},
                    {"utterance", row.utterance},
                    {"mcd_db", row.mcd_db},
                    {"msd_db", row.msd_db},
                    {"path_len", row.path_len}});
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : r.per_pair)
    pairs.push_back({{"source", p.source},
                     {"target", p.target},
                     {"count", p.count},
                     {"mcd_mean", p.mcd_mean},
                     {"msd_mean", p.msd_mean},
                     {"path_len_mean", p.path_len_mean}});
  return {{"rows", rows},
          {"per_pair", pairs},
          {"overall", {{"count", r.count}, {"mcd_mean", r.mcd_mean},
                       {"msd_mean", r.msd_mean}}},
          {"conventions", conventions()}};
}

inline std::string to_csv(const eval_report& r) {
  std::string out = "source,target,utterance,mcd_db,msd_db,path_len\n";
  char line[160];
  for (const auto& row : r.rows) {
    std::snprintf(line, sizeof(line), "%d,%d,%zu,%.17g,%.17g,%zu\n", row.source,
                  row.target, row.utterance, row.mcd_db, row.msd_db, row.path_len);
    out += line;
  }
  return out;
}

}  // namespace vcstar::metrics
