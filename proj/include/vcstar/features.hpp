#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vcstar/common.hpp"
#include "vcstar/rng.hpp"

namespace vcstar {

// Floor applied to every standard deviation so constant dimensions cannot
// divide by zero downstream.
inline constexpr double eps_std = 1e-8;

// Unvoiced frames carry this sentinel in log_f0 and a 0 in the voicing mask.
inline constexpr double unvoiced_log_f0 = 0.0;

struct domain_code {
  int id = 1;  // 1-based
};

struct domain_pair {
  int source = 1;
  int target = 1;
};

// Acoustic feature sequence: Q x T cepstral matrix (dimension-major rows),
// per-frame log F0 with voicing mask, and an opaque aperiodicity reference
// that conversion passes through untouched.
struct feature_sequence {
  std::size_t q = 0;
  std::size_t t = 0;
  std::vector<double> mcep;       // q * t, row-major (dimension-major)
  std::vector<double> log_f0;     // t
  std::vector<std::uint8_t> voiced;  // t, 1 = voiced
  double frame_period_ms = 5.0;
  std::string ap_ref;

  static feature_sequence zeros(std::size_t q, std::size_t t) {
    feature_sequence s;
    s.q = q;
    s.t = t;
    s.mcep.assign(q * t, 0.0);
    s.log_f0.assign(t, unvoiced_log_f0);
    s.voiced.assign(t, 0);
    return s;
  }

  double& mc(std::size_t d, std::size_t frame) { return mcep[d * t + frame]; }
  double mc(std::size_t d, std::size_t frame) const { return mcep[d * t + frame]; }

  void validate() const {
    if (q < 1 || t < 1) throw data_error("feature_sequence: empty dimensions");
    if (mcep.size() != q * t || log_f0.size() != t || voiced.size() != t)
      throw data_error("feature_sequence: inconsistent buffer sizes");
    for (double v : mcep)
      if (!is_finite(v)) throw data_error("feature_sequence: non-finite mcep");
    for (std::size_t i = 0; i < t; ++i)
      if (voiced[i] && !is_finite(log_f0[i]))
        throw data_error("feature_sequence: non-finite voiced log F0");
  }
};

struct speaker_stats {
  std::vector<double> mcep_mean;  // Q
  std::vector<double> mcep_std;   // Q, >= eps_std
  double logf0_mean = 0.0;        // voiced frames only
  double logf0_std = eps_std;
};

// Population (1/N) moments over every frame of every sequence; log F0 moments
// use voiced frames only.
inline speaker_stats compute_speaker_stats(const std::vector<feature_sequence>& corpus) {
  if (corpus.empty()) throw data_error("compute_speaker_stats: empty corpus");
  const std::size_t q = corpus.front().q;
  std::vector<double> sum(q, 0.0), sum_sq(q, 0.0);
  double f0_sum = 0.0, f0_sum_sq = 0.0;
  std::size_t frames = 0, voiced_frames = 0;
  for (const auto& seq : corpus) {
    if (seq.q != q) throw data_error("compute_speaker_stats: mixed dimensions");
    for (std::size_t d = 0; d < q; ++d)
      for (std::size_t i = 0; i < seq.t; ++i) {
        const double v = seq.mc(d, i);
        sum[d] += v;
        sum_sq[d] += v * v;
      }
    frames += seq.t;
    for (std::size_t i = 0; i < seq.t; ++i) {
      if (!seq.voiced[i]) continue;
      f0_sum += seq.log_f0[i];
      f0_sum_sq += seq.log_f0[i] * seq.log_f0[i];
      ++voiced_frames;
    }
  }
  if (voiced_frames == 0) throw data_error("compute_speaker_stats: no voiced frames");
  speaker_stats s;
  s.mcep_mean.resize(q);
  s.mcep_std.resize(q);
  const double invN = 1.0 / static_cast<double>(frames);
  for (std::size_t d = 0; d < q; ++d) {
    s.mcep_mean[d] = sum[d] * invN;
    const double var = std::max(0.0, sum_sq[d] * invN - s.mcep_mean[d] * s.mcep_mean[d]);
    s.mcep_std[d] = std::max(std::sqrt(var), eps_std);
  }
  const double invV = 1.0 / static_cast<double>(voiced_frames);
  s.logf0_mean = f0_sum * invV;
  const double f0_var = std::max(0.0, f0_sum_sq * invV - s.logf0_mean * s.logf0_mean);
  s.logf0_std = std::max(std::sqrt(f0_var), eps_std);
  return s;
}

// (x - mean) / std per cepstral dimension; log F0 and the AP reference are
// left alone (pitch has its own transform).
inline feature_sequence normalize(const feature_sequence& x, const speaker_stats& s) {
  if (x.q != s.mcep_mean.size())
    throw data_error("normalize: dimension mismatch with stats");
  feature_sequence out = x;
  for (std::size_t d = 0; d < x.q; ++d) {
    const double m = s.mcep_mean[d], sd = s.mcep_std[d];
    for (std::size_t i = 0; i < x.t; ++i) out.mc(d, i) = (x.mc(d, i) - m) / sd;
  }
  return out;
}

inline feature_sequence denormalize(const feature_sequence& x, const speaker_stats& s) {
  if (x.q != s.mcep_mean.size())
    throw data_error("denormalize: dimension mismatch with stats");
  feature_sequence out = x;
  for (std::size_t d = 0; d < x.q; ++d) {
    const double m = s.mcep_mean[d], sd = s.mcep_std[d];
    for (std::size_t i = 0; i < x.t; ++i) out.mc(d, i) = x.mc(d, i) * sd + m;
  }
  return out;
}

// Log-Gaussian normalized pitch transform on voiced frames; unvoiced
// sentinels pass through.
inline std::vector<double> convert_log_f0(const std::vector<double>& log_f0,
                                          const std::vector<std::uint8_t>& voiced,
                                          const speaker_stats& src,
                                          const speaker_stats& tgt) {
  if (log_f0.size() != voiced.size())
    throw data_error("convert_log_f0: mask length mismatch");
  std::vector<double> out = log_f0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!voiced[i]) continue;
    out[i] = (log_f0[i] - src.logf0_mean) / src.logf0_std * tgt.logf0_std +
             tgt.logf0_mean;
  }
  return out;
}

// Contiguous window of exactly `length` frames at an offset drawn uniformly
// over the valid range.
inline feature_sequence crop_segment(const feature_sequence& x, std::size_t length,
                                     rng& r) {
  if (x.t < length) throw data_error("crop_segment: sequence shorter than segment");
  const std::size_t offset =
      static_cast<std::size_t>(r.next_below(x.t - length + 1));
  feature_sequence out;
  out.q = x.q;
  out.t = length;
  out.frame_period_ms = x.frame_period_ms;
  out.ap_ref = x.ap_ref;
  out.mcep.resize(x.q * length);
  for (std::size_t d = 0; d < x.q; ++d)
    std::copy(x.mcep.begin() + static_cast<long>(d * x.t + offset),
              x.mcep.begin() + static_cast<long>(d * x.t + offset + length),
              out.mcep.begin() + static_cast<long>(d * length));
  out.log_f0.assign(x.log_f0.begin() + static_cast<long>(offset),
                    x.log_f0.begin() + static_cast<long>(offset + length));
  out.voiced.assign(x.voiced.begin() + static_cast<long>(offset),
                    x.voiced.begin() + static_cast<long>(offset + length));
  return out;
}

using domain_corpus = std::map<int, std::vector<feature_sequence>>;

}  // namespace vcstar
