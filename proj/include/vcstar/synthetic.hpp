#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "vcstar/features.hpp"
#include "vcstar/rng.hpp"

namespace vcstar {

// Desk-scale stand-in for a multi-speaker corpus: every "speaker" is a fixed
// per-dimension affine map plus a temporal smoothing filter applied to shared
// latent trajectories. Rendering the same latent under every domain yields
// parallel ground truth for the metric oracles.
struct synth_config {
  int n_domains = 4;
  int n_utterances = 8;
  std::size_t frames = 192;
  std::size_t q = 8;
  std::uint64_t seed = 1;
};

inline constexpr std::size_t synth_min_frames = 128;

namespace synth_detail {

struct domain_transform {
  std::vector<double> scale;   // per dimension
  std::vector<double> offset;  // per dimension
  double smooth_alpha = 0.0;   // 3-tap kernel [a, 1-2a, a]
  double logf0_mean = 0.0;
  double logf0_std = 0.1;
};

inline domain_transform make_domain(const synth_config& cfg, int domain) {
  rng r = rng::derive(cfg.seed, 0xD0, static_cast<std::uint64_t>(domain));
  domain_transform d;
  d.scale.resize(cfg.q);
  d.offset.resize(cfg.q);
  for (std::size_t i = 0; i < cfg.q; ++i) {
    d.scale[i] = std::exp(0.15 * r.normal());
    d.offset[i] = 1.2 * r.normal();
  }
  d.smooth_alpha = r.uniform(0.05, 0.30);
  d.logf0_mean = std::log(150.0) + 0.25 * r.normal();
  d.logf0_std = 0.12 * std::exp(0.3 * r.normal());
  return d;
}

struct latent_utterance {
  std::vector<double> traj;    // q * frames, dimension-major
  std::vector<double> pitch;   // frames, ~unit scale
  std::vector<std::uint8_t> voiced;
};

inline latent_utterance make_latent(const synth_config& cfg, int utt) {
  rng r = rng::derive(cfg.seed, 0x17, static_cast<std::uint64_t>(utt));
  const std::size_t T = cfg.frames;
  latent_utterance u;
  u.traj.assign(cfg.q * T, 0.0);
  for (std::size_t d = 0; d < cfg.q; ++d) {
    double amp[3], freq[3], phase[3];
    for (int j = 0; j < 3; ++j) {
      amp[j] = r.uniform(0.3, 0.8);
      freq[j] = r.uniform(1.5, 12.0) / static_cast<double>(T);
      phase[j] = r.uniform(0.0, 2.0 * std::numbers::pi);
    }
    double ar = 0.0;
    const double rho = 0.95, drive = std::sqrt(1.0 - rho * rho);
    for (std::size_t t = 0; t < T; ++t) {
      ar = rho * ar + drive * r.normal();
      double v = 0.3 * ar;
      for (int j = 0; j < 3; ++j)
        v += amp[j] * std::sin(2.0 * std::numbers::pi * freq[j] *
                                   static_cast<double>(t) +
                               phase[j]);
      u.traj[d * T + t] = v;
    }
  }
  // Pitch latent: one slow oscillation plus drift.
  {
    const double f = r.uniform(0.8, 2.5) / static_cast<double>(T);
    const double ph = r.uniform(0.0, 2.0 * std::numbers::pi);
    double ar = 0.0;
    u.pitch.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
      ar = 0.97 * ar + 0.24 * r.normal();
      u.pitch[t] = 0.8 * std::sin(2.0 * std::numbers::pi * f *
                                      static_cast<double>(t) +
                                  ph) +
                   0.2 * ar;
    }
  }
  // Alternating voiced / unvoiced runs, starting voiced.
  u.voiced.assign(T, 0);
  std::size_t t = 0;
  bool v = true;
  while (t < T) {
    const std::size_t run =
        v ? 20 + r.next_below(41) : 5 + r.next_below(11);
    for (std::size_t k = 0; k < run && t < T; ++k, ++t) u.voiced[t] = v ? 1 : 0;
    v = !v;
  }
  return u;
}

inline double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

inline feature_sequence render(const synth_config& cfg, const latent_utterance& u,
                               const domain_transform& d, int domain, int utt) {
  const std::size_t T = cfg.frames;
  feature_sequence s = feature_sequence::zeros(cfg.q, T);
  std::vector<double> smoothed(T);
  const double a = d.smooth_alpha, c = 1.0 - 2.0 * d.smooth_alpha;
  for (std::size_t dim = 0; dim < cfg.q; ++dim) {
    const double* src = u.traj.data() + dim * T;
    for (std::size_t t = 0; t < T; ++t) {
      const double prev = src[t == 0 ? 1 : t - 1];
      const double next = src[t + 1 == T ? T - 2 : t + 1];
      smoothed[t] = a * prev + c * src[t] + a * next;
    }
    for (std::size_t t = 0; t < T; ++t)
      s.mc(dim, t) = to_f32(d.scale[dim] * smoothed[t] + d.offset[dim]);
  }
  for (std::size_t t = 0; t < T; ++t) {
    s.voiced[t] = u.voiced[t];
    s.log_f0[t] = u.voiced[t]
                      ? to_f32(d.logf0_mean + d.logf0_std * u.pitch[t])
                      : unvoiced_log_f0;
  }
  s.frame_period_ms = 5.0;
  s.ap_ref = "ap:d" + std::to_string(domain) + ":u" + std::to_string(utt);
  return s;
}

}  // namespace synth_detail

struct synth_corpus_result {
  synth_config config;
  domain_corpus by_domain;  // by_domain[d][u]; renderings of latent u

  // The corpus is parallel by construction: the ground truth for converting
  // any rendering of utterance u into domain `target` is by_domain[target][u].
  const feature_sequence& ground_truth(int target, std::size_t utt) const {
    return by_domain.at(target).at(utt);
  }
};

inline synth_corpus_result synth_corpus(const synth_config& cfg) {
  if (cfg.n_domains < 2) throw data_error("synth_corpus: need at least 2 domains");
  if (cfg.frames < synth_min_frames)
    throw data_error("synth_corpus: frames below segment length");
  if (cfg.q < 1 || cfg.n_utterances < 1)
    throw data_error("synth_corpus: empty configuration");
  synth_corpus_result out;
  out.config = cfg;
  std::vector<synth_detail::domain_transform> domains;
  domains.reserve(static_cast<std::size_t>(cfg.n_domains));
  for (int d = 1; d <= cfg.n_domains; ++d)
    domains.push_back(synth_detail::make_domain(cfg, d));
  for (int u = 0; u < cfg.n_utterances; ++u) {
    const auto latent = synth_detail::make_latent(cfg, u);
    for (int d = 1; d <= cfg.n_domains; ++d)
      out.by_domain[d].push_back(
          synth_detail::render(cfg, latent, domains[static_cast<std::size_t>(d - 1)], d, u));
  }
  return out;
}

inline synth_corpus_result synth_corpus(int n_domains, int n_utterances,
                                        std::size_t frames, std::uint64_t seed,
                                        std::size_t q = 8) {
  synth_config cfg;
  cfg.n_domains = n_domains;
  cfg.n_utterances = n_utterances;
  cfg.frames = frames;
  cfg.seed = seed;
  cfg.q = q;
  return synth_corpus(cfg);
}

}  // namespace vcstar
