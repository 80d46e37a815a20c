#pragma once

#include <json.hpp>

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "vcstar/autodiff.hpp"
#include "vcstar/features.hpp"
#include "vcstar/nn_ops.hpp"
#include "vcstar/rng.hpp"
#include "vcstar/tensor.hpp"

namespace vcstar {

inline constexpr double eps_cin = 1e-5;

// ---------------------------------------------------------------------------
// Parameter registry: named tensors in a stable insertion order. Checkpoints,
// the optimizer, and gradient checks all walk this order.
// ---------------------------------------------------------------------------
class param_set {
 public:
  tensor& add(const std::string& name, tensor init) {
    if (index_.count(name)) throw data_error("param_set: duplicate name " + name);
    index_.emplace(name, values_.size());
    names_.push_back(name);
    values_.push_back(std::move(init));
    return values_.back();
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  tensor& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw data_error("param_set: unknown name " + name);
    return values_[it->second];
  }

  const tensor& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw data_error("param_set: unknown name " + name);
    return values_[it->second];
  }

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  tensor& value(std::size_t i) { return values_[i]; }
  const tensor& value(std::size_t i) const { return values_[i]; }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& t : values_) n += t.numel();
    return n;
  }

 private:
  std::vector<std::string> names_;
  std::vector<tensor> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Leaves for every tensor of a param_set on one tape.
struct bound_params {
  const param_set* src = nullptr;
  std::vector<ad::var> vars;

  ad::var at(const std::string& name) const {
    for (std::size_t i = 0; i < src->size(); ++i)
      if (src->name(i) == name) return vars[i];
    throw data_error("bound_params: unknown name " + name);
  }
};

inline bound_params bind(ad::graph& g, const param_set& p, bool trainable) {
  bound_params b;
  b.src = &p;
  b.vars.reserve(p.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    b.vars.push_back(g.leaf(p.value(i), trainable));
  return b;
}

// ---------------------------------------------------------------------------
// Configurations
// ---------------------------------------------------------------------------
enum class conditioning_mode { modulation_based, channel_wise };
enum class conditioning_scope { target_only, source_and_target };

inline std::string to_string(conditioning_mode m) {
  return m == conditioning_mode::modulation_based ? "modulation_based" : "channel_wise";
}
inline conditioning_mode conditioning_mode_from_string(const std::string& s) {
  if (s == "modulation_based") return conditioning_mode::modulation_based;
  if (s == "channel_wise") return conditioning_mode::channel_wise;
  throw usage_error("unknown conditioning mode: " + s);
}
inline std::string to_string(conditioning_scope s) {
  return s == conditioning_scope::target_only ? "target_only" : "source_and_target";
}
inline conditioning_scope conditioning_scope_from_string(const std::string& s) {
  if (s == "target_only") return conditioning_scope::target_only;
  if (s == "source_and_target") return conditioning_scope::source_and_target;
  throw usage_error("unknown conditioning scope: " + s);
}

// 2-1-2D generator: two stride-2 2D downsampling convolutions, a 1D GLU
// bottleneck without residual skips, pixel-shuffler upsampling back to the
// input shape. Conditioning is either modulation-based (pair-indexed
// conditional instance normalization) or channel-wise (one-hot planes
// concatenated at the input, plain instance normalization elsewhere).
struct generator_config {
  int n_domains = 4;
  std::size_t q = 8;
  conditioning_mode mode = conditioning_mode::modulation_based;
  conditioning_scope scope = conditioning_scope::source_and_target;
  std::size_t base_channels = 16;        // width after the input GLU
  std::size_t down_channels = 32;        // width in the downsampled 2D stage
  std::size_t bottleneck_channels = 64;  // width of the 1D stage
  std::size_t n_blocks = 2;

  std::size_t q_padded() const { return (q + 3) / 4 * 4; }

  std::size_t norm_rows() const {
    return mode == conditioning_mode::modulation_based
               ? static_cast<std::size_t>(n_domains) * static_cast<std::size_t>(n_domains)
               : 1;
  }

  std::size_t code_planes() const {
    if (mode != conditioning_mode::channel_wise) return 0;
    return scope == conditioning_scope::source_and_target
               ? 2 * static_cast<std::size_t>(n_domains)
               : static_cast<std::size_t>(n_domains);
  }

  void validate() const {
    if (n_domains < 2) throw usage_error("generator config: n_domains must be >= 2");
    if (q < 1) throw usage_error("generator config: q must be >= 1");
    if (base_channels < 1 || down_channels < 1 || bottleneck_channels < 1)
      throw usage_error("generator config: channel widths must be positive");
  }
};

struct discriminator_config {
  int n_domains = 4;
  conditioning_scope scope = conditioning_scope::source_and_target;
  std::size_t base_channels = 16;
  std::size_t down_channels = 32;
  std::size_t feature_channels = 32;

  std::size_t embed_rows() const {
    return scope == conditioning_scope::target_only
               ? static_cast<std::size_t>(n_domains)
               : static_cast<std::size_t>(n_domains) * static_cast<std::size_t>(n_domains);
  }

  void validate() const {
    if (n_domains < 2) throw usage_error("discriminator config: n_domains must be >= 2");
    if (base_channels < 1 || down_channels < 1 || feature_channels < 1)
      throw usage_error("discriminator config: channel widths must be positive");
  }
};

struct classifier_config {
  int n_domains = 4;
  std::size_t channels = 16;

  void validate() const {
    if (n_domains < 2) throw usage_error("classifier config: n_domains must be >= 2");
    if (channels < 1) throw usage_error("classifier config: channels must be positive");
  }
};

struct model_config {
  generator_config gen;
  discriminator_config dis;
  classifier_config cls;

  void validate() const {
    gen.validate();
    dis.validate();
    cls.validate();
    if (gen.n_domains != dis.n_domains || gen.n_domains != cls.n_domains)
      throw usage_error("model config: inconsistent domain counts");
  }
};

struct model_params {
  param_set gen;
  param_set dis;
  param_set cls;
};

// ---------------------------------------------------------------------------
// Condition-row helpers
// ---------------------------------------------------------------------------
inline void check_pair(int n_domains, domain_pair pr) {
  if (pr.source < 1 || pr.source > n_domains || pr.target < 1 || pr.target > n_domains)
    throw data_error("unknown domain code in pair");
}

// Modulation tables always carry N^2 rows; target-only conditioning reads the
// diagonal so the source code cannot leak into baseline variants.
inline std::size_t generator_norm_row(const generator_config& cfg, domain_pair pr) {
  if (cfg.mode == conditioning_mode::channel_wise) return 0;
  check_pair(cfg.n_domains, pr);
  const int src = cfg.scope == conditioning_scope::target_only ? pr.target : pr.source;
  return static_cast<std::size_t>(src - 1) * static_cast<std::size_t>(cfg.n_domains) +
         static_cast<std::size_t>(pr.target - 1);
}

inline std::size_t discriminator_embed_row(const discriminator_config& cfg,
                                           domain_pair pr) {
  check_pair(cfg.n_domains, pr);
  if (cfg.scope == conditioning_scope::target_only)
    return static_cast<std::size_t>(pr.target - 1);
  return static_cast<std::size_t>(pr.source - 1) *
             static_cast<std::size_t>(cfg.n_domains) +
         static_cast<std::size_t>(pr.target - 1);
}

// One-hot code planes expanded to the feature-map size (channel-wise
// conditioning). Pair scope stacks the source planes before the target planes.
inline tensor code_planes(const generator_config& cfg,
                          const std::vector<domain_pair>& pairs, std::size_t H,
                          std::size_t W) {
  const std::size_t B = pairs.size(), P = cfg.code_planes();
  tensor planes({B, P, H, W});
  const std::size_t N = static_cast<std::size_t>(cfg.n_domains);
  for (std::size_t b = 0; b < B; ++b) {
    check_pair(cfg.n_domains, pairs[b]);
    auto set_plane = [&](std::size_t p) {
      double* dst = planes.data() + (b * P + p) * H * W;
      std::fill(dst, dst + H * W, 1.0);
    };
    if (cfg.scope == conditioning_scope::source_and_target) {
      set_plane(static_cast<std::size_t>(pairs[b].source - 1));
      set_plane(N + static_cast<std::size_t>(pairs[b].target - 1));
    } else {
      set_plane(static_cast<std::size_t>(pairs[b].target - 1));
    }
  }
  return planes;
}

// ---------------------------------------------------------------------------
// Initialization: variance-scaled normals for convolution / linear weights,
// zero biases, gamma = 1 / beta = 0 tables, small normal embedding.
// ---------------------------------------------------------------------------
namespace model_detail {

inline tensor conv_init(std::size_t cout, std::size_t cin, std::size_t kh,
                        std::size_t kw, rng& r) {
  tensor w({cout, cin, kh, kw});
  const double scale = std::sqrt(2.0 / static_cast<double>(cin * kh * kw));
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = scale * r.normal();
  return w;
}

inline tensor linear_init(std::size_t mout, std::size_t k, rng& r) {
  tensor w({mout, k});
  const double scale = std::sqrt(1.0 / static_cast<double>(k));
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = scale * r.normal();
  return w;
}

inline void add_conv(param_set& p, const std::string& prefix, std::size_t cout,
                     std::size_t cin, std::size_t kh, std::size_t kw, rng& r) {
  p.add(prefix + ".w", conv_init(cout, cin, kh, kw, r));
  p.add(prefix + ".b", tensor::zeros({cout}));
}

inline void add_norm(param_set& p, const std::string& prefix, std::size_t rows,
                     std::size_t channels) {
  p.add(prefix + ".gamma", tensor::full({rows, channels}, 1.0));
  p.add(prefix + ".beta", tensor::zeros({rows, channels}));
}

}  // namespace model_detail

inline param_set init_generator(const generator_config& cfg, rng& r) {
  cfg.validate();
  using namespace model_detail;
  param_set p;
  const std::size_t c1 = cfg.base_channels, c2 = cfg.down_channels,
                    cb = cfg.bottleneck_channels, rows = cfg.norm_rows();
  const std::size_t qp4 = cfg.q_padded() / 4;
  const std::size_t in_ch = 1 + cfg.code_planes();
  add_conv(p, "in", 2 * c1, in_ch, 3, 3, r);
  add_conv(p, "down1", 2 * c2, c1, 3, 3, r);
  add_norm(p, "down1.norm", rows, 2 * c2);
  add_conv(p, "down2", 2 * c2, c2, 3, 3, r);
  add_norm(p, "down2.norm", rows, 2 * c2);
  add_conv(p, "to1d", cb, c2 * qp4, 1, 1, r);
  add_norm(p, "to1d.norm", rows, cb);
  for (std::size_t i = 0; i < cfg.n_blocks; ++i) {
    const std::string prefix = "block" + std::to_string(i);
    add_conv(p, prefix, 2 * cb, cb, 1, 5, r);
    add_norm(p, prefix + ".norm", rows, 2 * cb);
  }
  add_conv(p, "from1d", c2 * qp4, cb, 1, 1, r);
  add_norm(p, "from1d.norm", rows, c2 * qp4);
  add_conv(p, "up1", 8 * c1, c2, 3, 3, r);
  add_norm(p, "up1.norm", rows, 2 * c1);
  add_conv(p, "up2", 8 * c1, c1, 3, 3, r);
  add_norm(p, "up2.norm", rows, 2 * c1);
  add_conv(p, "out", 1, c1, 3, 3, r);
  return p;
}

inline param_set init_discriminator(const discriminator_config& cfg, rng& r) {
  cfg.validate();
  using namespace model_detail;
  param_set p;
  const std::size_t c1 = cfg.base_channels, c2 = cfg.down_channels,
                    cf = cfg.feature_channels;
  add_conv(p, "in", 2 * c1, 1, 3, 3, r);
  add_conv(p, "d1", 2 * c2, c1, 3, 3, r);
  add_norm(p, "d1.norm", 1, 2 * c2);
  add_conv(p, "d2", 2 * c2, c2, 3, 3, r);
  add_norm(p, "d2.norm", 1, 2 * c2);
  add_conv(p, "feat", 2 * cf, c2, 3, 3, r);
  p.add("head.w", linear_init(1, cf, r));
  p.add("head.b", tensor::zeros({1}));
  tensor emb({cfg.embed_rows(), cf});
  for (std::size_t i = 0; i < emb.numel(); ++i) emb[i] = 0.02 * r.normal();
  p.add("embed", std::move(emb));
  return p;
}

inline param_set init_classifier(const classifier_config& cfg, rng& r) {
  cfg.validate();
  using namespace model_detail;
  param_set p;
  const std::size_t c = cfg.channels;
  add_conv(p, "c1", 2 * c, 1, 3, 3, r);
  add_conv(p, "c2", 2 * c, c, 3, 3, r);
  add_conv(p, "c3", 2 * c, c, 3, 3, r);
  p.add("head.w", linear_init(static_cast<std::size_t>(cfg.n_domains), c, r));
  p.add("head.b", tensor::zeros({static_cast<std::size_t>(cfg.n_domains)}));
  return p;
}

// ---------------------------------------------------------------------------
// Forward passes (tape-based; wrap in a throwaway graph for inference)
// ---------------------------------------------------------------------------
namespace models {

// Conditional instance normalization (Eq.-10-style): whiten per instance and
// channel, then scale/shift with the table row selected by the domain pair.
inline ad::var cin_forward(ad::graph& g, ad::var f, ad::var gamma, ad::var beta,
                           const std::vector<std::size_t>& rows) {
  return ad::instance_norm_affine(f, gamma, beta, rows, eps_cin);
}

inline std::vector<std::size_t> generator_rows(const generator_config& cfg,
                                               const std::vector<domain_pair>& pairs) {
  std::vector<std::size_t> rows(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i)
    rows[i] = generator_norm_row(cfg, pairs[i]);
  return rows;
}

inline ad::var generator_apply(ad::graph& g, const bound_params& p,
                               const generator_config& cfg, ad::var x,
                               const std::vector<domain_pair>& pairs) {
  const tensor& vx = g.value(x);
  if (vx.rank() != 4 || vx.dim(1) != 1) throw data_error("generator: input must be [B,1,Q,T]");
  const std::size_t B = vx.dim(0), Q = vx.dim(2), T = vx.dim(3);
  if (Q != cfg.q) throw data_error("generator: feature dimension mismatch");
  if (pairs.size() != B) throw data_error("generator: pair count mismatch");
  if (T % 4 != 0 || T < 8)
    throw data_error(
        "generator: sequence length must be a multiple of 4 and at least 8; "
        "pad the input (reflect padding) and crop the output");

  const auto rows = generator_rows(cfg, pairs);
  auto norm = [&](ad::var h, const std::string& prefix) {
    return cin_forward(g, h, p.at(prefix + ".norm.gamma"), p.at(prefix + ".norm.beta"),
                       rows);
  };
  auto conv = [&](ad::var h, const std::string& prefix, std::size_t sh,
                  std::size_t sw, std::size_t ph, std::size_t pw) {
    return ad::conv2d(h, p.at(prefix + ".w"), p.at(prefix + ".b"), sh, sw, ph, pw);
  };

  ad::var h = x;
  if (cfg.mode == conditioning_mode::channel_wise)
    h = ad::concat_channels(h, g.constant(code_planes(cfg, pairs, Q, T)));
  const std::size_t qp = cfg.q_padded();
  h = ad::pad_rows_reflect(h, qp - Q);

  h = ad::glu(conv(h, "in", 1, 1, 1, 1));                       // [B,c1,qp,T]
  h = ad::glu(norm(conv(h, "down1", 2, 2, 1, 1), "down1"));     // [B,c2,qp/2,T/2]
  h = ad::glu(norm(conv(h, "down2", 2, 2, 1, 1), "down2"));     // [B,c2,qp/4,T/4]

  const std::size_t c2 = cfg.down_channels, qp4 = qp / 4, t4 = T / 4;
  h = ad::reshape(h, {B, c2 * qp4, 1, t4});
  h = norm(conv(h, "to1d", 1, 1, 0, 0), "to1d");                // [B,cb,1,T/4]
  for (std::size_t i = 0; i < cfg.n_blocks; ++i) {
    const std::string prefix = "block" + std::to_string(i);
    h = ad::glu(norm(conv(h, prefix, 1, 1, 0, 2), prefix));     // k5 along time
  }
  h = norm(conv(h, "from1d", 1, 1, 0, 0), "from1d");            // [B,c2*qp4,1,T/4]
  h = ad::reshape(h, {B, c2, qp4, t4});

  h = ad::glu(norm(ad::pixel_shuffle(conv(h, "up1", 1, 1, 1, 1), 2), "up1"));
  h = ad::glu(norm(ad::pixel_shuffle(conv(h, "up2", 1, 1, 1, 1), 2), "up2"));
  h = conv(h, "out", 1, 1, 1, 1);                               // [B,1,qp,T]
  return ad::crop_rows(h, Q);
}

// Projection discriminator: unconditional head plus an inner product of the
// condition embedding with globally sum-pooled features.
inline ad::var discriminator_apply(ad::graph& g, const bound_params& p,
                                   const discriminator_config& cfg, ad::var x,
                                   const std::vector<domain_pair>& conditions) {
  const tensor& vx = g.value(x);
  if (vx.rank() != 4 || vx.dim(1) != 1)
    throw data_error("discriminator: input must be [B,1,Q,T]");
  const std::size_t B = vx.dim(0);
  if (conditions.size() != B) throw data_error("discriminator: condition count mismatch");
  std::vector<std::size_t> rows(B);
  for (std::size_t i = 0; i < B; ++i)
    rows[i] = discriminator_embed_row(cfg, conditions[i]);
  const std::vector<std::size_t> zero_rows(B, 0);

  auto conv = [&](ad::var h, const std::string& prefix, std::size_t sh,
                  std::size_t sw) {
    return ad::conv2d(h, p.at(prefix + ".w"), p.at(prefix + ".b"), sh, sw, 1, 1);
  };
  ad::var h = ad::glu(conv(x, "in", 1, 1));
  h = ad::glu(ad::instance_norm_affine(conv(h, "d1", 2, 2), p.at("d1.norm.gamma"),
                                       p.at("d1.norm.beta"), zero_rows, eps_cin));
  h = ad::glu(ad::instance_norm_affine(conv(h, "d2", 2, 2), p.at("d2.norm.gamma"),
                                       p.at("d2.norm.beta"), zero_rows, eps_cin));
  h = ad::glu(conv(h, "feat", 1, 1));
  ad::var psi = ad::global_sum_pool(h);  // [B, cf]
  ad::var head = ad::reshape(ad::linear(psi, p.at("head.w"), p.at("head.b")), {B});
  ad::var proj = ad::embed_dot(psi, p.at("embed"), rows);
  return ad::add(head, proj);  // [B]
}

inline ad::var classifier_apply(ad::graph& g, const bound_params& p,
                                const classifier_config& cfg, ad::var x) {
  const tensor& vx = g.value(x);
  if (vx.rank() != 4 || vx.dim(1) != 1)
    throw data_error("classifier: input must be [B,1,Q,T]");
  auto conv = [&](ad::var h, const std::string& prefix) {
    return ad::conv2d(h, p.at(prefix + ".w"), p.at(prefix + ".b"), 2, 2, 1, 1);
  };
  ad::var h = ad::glu(conv(x, "c1"));
  h = ad::glu(conv(h, "c2"));
  h = ad::glu(conv(h, "c3"));
  ad::var pooled = ad::global_avg_pool(h);
  return ad::log_softmax(ad::linear(pooled, p.at("head.w"), p.at("head.b")));
}

// Inference-only wrappers.
inline tensor generator_forward(const param_set& params, const generator_config& cfg,
                                const tensor& x, const std::vector<domain_pair>& pairs) {
  ad::graph g;
  bound_params b = bind(g, params, false);
  return g.value(generator_apply(g, b, cfg, g.constant(x), pairs));
}

inline tensor discriminator_forward(const param_set& params,
                                    const discriminator_config& cfg, const tensor& x,
                                    const std::vector<domain_pair>& conditions) {
  ad::graph g;
  bound_params b = bind(g, params, false);
  return g.value(discriminator_apply(g, b, cfg, g.constant(x), conditions));
}

inline tensor classifier_forward(const param_set& params, const classifier_config& cfg,
                                 const tensor& x) {
  ad::graph g;
  bound_params b = bind(g, params, false);
  return g.value(classifier_apply(g, b, cfg, g.constant(x)));
}

}  // namespace models

// ---------------------------------------------------------------------------
// Inference-time length helpers: reflect-pad T to the next multiple of 4 and
// crop back after conversion.
// ---------------------------------------------------------------------------
inline std::size_t padded_time_length(std::size_t t) {
  const std::size_t base = std::max<std::size_t>(t, 8);
  return (base + 3) / 4 * 4;
}

inline tensor mcep_to_tensor(const feature_sequence& x) {
  tensor out({1, 1, x.q, x.t});
  std::copy(x.mcep.begin(), x.mcep.end(), out.data());
  return out;
}

inline tensor pad_time_reflect(const tensor& x, std::size_t new_t) {
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (new_t <= W) return x;
  tensor out({B, C, H, new_t});
  for (std::size_t bch = 0; bch < B * C * H; ++bch) {
    const double* src = x.data() + bch * W;
    double* dst = out.data() + bch * new_t;
    std::copy(src, src + W, dst);
    for (std::size_t k = 0; k + W < new_t; ++k)
      dst[W + k] = src[ad::detail::reflect_index(W, k)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON (de)serialization of configurations, used by checkpoints and the CLI.
// ---------------------------------------------------------------------------
inline nlohmann::json to_json(const generator_config& c) {
  return {{"n_domains", c.n_domains},
          {"q", c.q},
          {"mode", to_string(c.mode)},
          {"scope", to_string(c.scope)},
          {"base_channels", c.base_channels},
          {"down_channels", c.down_channels},
          {"bottleneck_channels", c.bottleneck_channels},
          {"n_blocks", c.n_blocks}};
}

inline generator_config generator_config_from_json(const nlohmann::json& j) {
  generator_config c;
  c.n_domains = j.at("n_domains").get<int>();
  c.q = j.at("q").get<std::size_t>();
  c.mode = conditioning_mode_from_string(j.at("mode").get<std::string>());
  c.scope = conditioning_scope_from_string(j.at("scope").get<std::string>());
  c.base_channels = j.at("base_channels").get<std::size_t>();
  c.down_channels = j.at("down_channels").get<std::size_t>();
  c.bottleneck_channels = j.at("bottleneck_channels").get<std::size_t>();
  c.n_blocks = j.at("n_blocks").get<std::size_t>();
  return c;
}

inline nlohmann::json to_json(const discriminator_config& c) {
  return {{"n_domains", c.n_domains},
          {"scope", to_string(c.scope)},
          {"base_channels", c.base_channels},
          {"down_channels", c.down_channels},
          {"feature_channels", c.feature_channels}};
}

inline discriminator_config discriminator_config_from_json(const nlohmann::json& j) {
  discriminator_config c;
  c.n_domains = j.at("n_domains").get<int>();
  c.scope = conditioning_scope_from_string(j.at("scope").get<std::string>());
  c.base_channels = j.at("base_channels").get<std::size_t>();
  c.down_channels = j.at("down_channels").get<std::size_t>();
  c.feature_channels = j.at("feature_channels").get<std::size_t>();
  return c;
}

inline nlohmann::json to_json(const classifier_config& c) {
  return {{"n_domains", c.n_domains}, {"channels", c.channels}};
}

inline classifier_config classifier_config_from_json(const nlohmann::json& j) {
  classifier_config c;
  c.n_domains = j.at("n_domains").get<int>();
  c.channels = j.at("channels").get<std::size_t>();
  return c;
}

inline nlohmann::json to_json(const model_config& c) {
  return {{"generator", to_json(c.gen)},
          {"discriminator", to_json(c.dis)},
          {"classifier", to_json(c.cls)}};
}

inline model_config model_config_from_json(const nlohmann::json& j) {
  model_config c;
  c.gen = generator_config_from_json(j.at("generator"));
  c.dis = discriminator_config_from_json(j.at("discriminator"));
  c.cls = classifier_config_from_json(j.at("classifier"));
  return c;
}

}  // namespace vcstar
