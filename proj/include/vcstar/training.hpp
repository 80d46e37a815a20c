#pragma once

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "vcstar/feature_io.hpp"
#include "vcstar/features.hpp"
#include "vcstar/metrics.hpp"
#include "vcstar/models.hpp"
#include "vcstar/objectives.hpp"
#include "vcstar/rng.hpp"
#include "vcstar/synthetic.hpp"

namespace vcstar {

// ---------------------------------------------------------------------------
// Training configuration (recipe values follow the published setup: Adam with
// beta1 = 0.5, batches of 8 randomly cropped 128-frame segments, generator /
// discriminator learning rates 2e-4 / 1e-4, identity loss for the first 1e4
// iterations only).
// ---------------------------------------------------------------------------
struct training_config {
  int batch_size = 8;
  std::size_t segment_len = 128;
  std::int64_t iterations = 2000;
  double lr_g = 2e-4;
  double lr_d = 1e-4;
  double adam_beta1 = 0.5;
  loss_weights weights;
  objective_variant variant = objective_variant::st_adv;
  conditioning_mode conditioning = conditioning_mode::modulation_based;
  std::uint64_t seed = 1;
  std::int64_t id_cutoff = 10000;
  std::int64_t checkpoint_every = 1000;

  // Model sizing.
  int n_domains = 2;
  std::size_t q = 8;
  std::size_t gen_base = 16;
  std::size_t gen_down = 32;
  std::size_t gen_bottleneck = 64;
  std::size_t gen_blocks = 2;
  std::size_t dis_base = 16;
  std::size_t dis_down = 32;
  std::size_t dis_feat = 32;
  std::size_t cls_channels = 16;

  void validate() const {
    if (batch_size < 1) throw usage_error("training config: batch_size must be positive");
    if (segment_len < 8 || segment_len % 4 != 0)
      throw usage_error("training config: segment_len must be a multiple of 4, >= 8");
    if (iterations < 0) throw usage_error("training config: iterations must be >= 0");
    if (lr_g <= 0 && lr_g != 0.0) throw usage_error("training config: lr_g must be >= 0");
    if (lr_d <= 0 && lr_d != 0.0) throw usage_error("training config: lr_d must be >= 0");
    if (adam_beta1 < 0 || adam_beta1 >= 1)
      throw usage_error("training config: adam_beta1 must be in [0, 1)");
    if (id_cutoff < 0) throw usage_error("training config: id_cutoff must be >= 0");
    if (checkpoint_every < 1)
      throw usage_error("training config: checkpoint_every must be positive");
    weights.validate();
  }

  model_config make_model_config() const {
    model_config m;
    m.gen.n_domains = n_domains;
    m.gen.q = q;
    m.gen.mode = conditioning;
    m.gen.scope = scope_for(variant);
    m.gen.base_channels = gen_base;
    m.gen.down_channels = gen_down;
    m.gen.bottleneck_channels = gen_bottleneck;
    m.gen.n_blocks = gen_blocks;
    m.dis.n_domains = n_domains;
    m.dis.scope = scope_for(variant);
    m.dis.base_channels = dis_base;
    m.dis.down_channels = dis_down;
    m.dis.feature_channels = dis_feat;
    m.cls.n_domains = n_domains;
    m.cls.channels = cls_channels;
    m.validate();
    return m;
  }

  // Desk-scale preset: small widths, minutes on a CPU.
  static training_config desk_preset() { return training_config{}; }

  // Full-scale preset echoing the published recipe on 34-dimensional MCEPs
  // with four domains. Not intended for the test environment.
  static training_config paper_preset() {
    training_config c;
    c.batch_size = 8;
    c.segment_len = 128;
    c.iterations = 300000;
    c.lr_g = 0.0002;
    c.lr_d = 0.0001;
    c.adam_beta1 = 0.5;
    c.weights = loss_weights{1.0, 10.0, 5.0};
    c.variant = objective_variant::st_adv;
    c.conditioning = conditioning_mode::modulation_based;
    c.id_cutoff = 10000;
    c.checkpoint_every = 10000;
    c.n_domains = 4;
    c.q = 34;
    c.gen_base = 64;
    c.gen_down = 128;
    c.gen_bottleneck = 256;
    c.gen_blocks = 6;
    c.dis_base = 64;
    c.dis_down = 128;
    c.dis_feat = 128;
    c.cls_channels = 32;
    return c;
  }
};

inline nlohmann::json to_json(const training_config& c) {
  return {{"batch_size", c.batch_size},
          {"segment_len", c.segment_len},
          {"iterations", c.iterations},
          {"lr_g", c.lr_g},
          {"lr_d", c.lr_d},
          {"adam_beta1", c.adam_beta1},
          {"weights",
           {{"lambda_cls", c.weights.lambda_cls},
            {"lambda_cyc", c.weights.lambda_cyc},
            {"lambda_id", c.weights.lambda_id}}},
          {"variant", to_string(c.variant)},
          {"conditioning_mode", to_string(c.conditioning)},
          {"seed", c.seed},
          {"id_cutoff", c.id_cutoff},
          {"checkpoint_every", c.checkpoint_every},
          {"n_domains", c.n_domains},
          {"q", c.q},
          {"gen_base", c.gen_base},
          {"gen_down", c.gen_down},
          {"gen_bottleneck", c.gen_bottleneck},
          {"gen_blocks", c.gen_blocks},
          {"dis_base", c.dis_base},
          {"dis_down", c.dis_down},
          {"dis_feat", c.dis_feat},
          {"cls_channels", c.cls_channels}};
}

inline training_config training_config_from_json(const nlohmann::json& j) {
  training_config c;
  c.batch_size = j.at("batch_size").get<int>();
  c.segment_len = j.at("segment_len").get<std::size_t>();
  c.iterations = j.at("iterations").get<std::int64_t>();
  c.lr_g = j.at("lr_g").get<double>();
  c.lr_d = j.at("lr_d").get<double>();
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.weights.lambda_cls = j.at("weights").at("lambda_cls").get<double>();
  c.weights.lambda_cyc = j.at("weights").at("lambda_cyc").get<double>();
  c.weights.lambda_id = j.at("weights").at("lambda_id").get<double>();
  c.variant = objective_variant_from_string(j.at("variant").get<std::string>());
  c.conditioning =
      conditioning_mode_from_string(j.at("conditioning_mode").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  c.id_cutoff = j.at("id_cutoff").get<std::int64_t>();
  c.checkpoint_every = j.at("checkpoint_every").get<std::int64_t>();
  c.n_domains = j.at("n_domains").get<int>();
  c.q = j.at("q").get<std::size_t>();
  c.gen_base = j.at("gen_base").get<std::size_t>();
  c.gen_down = j.at("gen_down").get<std::size_t>();
  c.gen_bottleneck = j.at("gen_bottleneck").get<std::size_t>();
  c.gen_blocks = j.at("gen_blocks").get<std::size_t>();
  c.dis_base = j.at("dis_base").get<std::size_t>();
  c.dis_down = j.at("dis_down").get<std::size_t>();
  c.dis_feat = j.at("dis_feat").get<std::size_t>();
  c.cls_channels = j.at("cls_channels").get<std::size_t>();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Adam (beta2 = 0.999, eps = 1e-8, bias-corrected)
// ---------------------------------------------------------------------------
struct adam_state {
  std::vector<tensor> m;
  std::vector<tensor> v;
  std::int64_t step = 0;

  static adam_state like(const param_set& p) {
    adam_state s;
    s.m.reserve(p.size());
    s.v.reserve(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      s.m.push_back(tensor::zeros(p.value(i).shape()));
      s.v.push_back(tensor::zeros(p.value(i).shape()));
    }
    return s;
  }
};

inline constexpr double adam_beta2 = 0.999;
inline constexpr double adam_eps = 1e-8;

inline void adam_update(param_set& params, const std::vector<tensor>& grads,
                        adam_state& st, double lr, double beta1) {
  if (grads.size() != params.size() || st.m.size() != params.size())
    throw data_error("adam_update: state size mismatch");
  st.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(adam_beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    tensor& p = params.value(i);
    const tensor& g = grads[i];
    tensor& m = st.m[i];
    tensor& v = st.v[i];
    for (std::size_t j = 0; j < p.numel(); ++j) {
      m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
      v[j] = adam_beta2 * v[j] + (1.0 - adam_beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + adam_eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Train state
// ---------------------------------------------------------------------------
struct train_state {
  std::int64_t iteration = 0;
  model_params models;
  adam_state opt_g;
  adam_state opt_d;
  adam_state opt_c;
  rng rand;
};

inline train_state init_train_state(const training_config& cfg) {
  cfg.validate();
  const model_config mc = cfg.make_model_config();
  train_state st;
  rng init_rng = rng::derive(cfg.seed, 0x1417, 0);
  st.models.gen = init_generator(mc.gen, init_rng);
  if (uses_discriminator(cfg.variant))
    st.models.dis = init_discriminator(mc.dis, init_rng);
  if (uses_classifier(cfg.variant)) st.models.cls = init_classifier(mc.cls, init_rng);
  st.opt_g = adam_state::like(st.models.gen);
  st.opt_d = adam_state::like(st.models.dis);
  st.opt_c = adam_state::like(st.models.cls);
  st.rand = rng::derive(cfg.seed, 0x5EED, 0);
  return st;
}

// ---------------------------------------------------------------------------
// Corpus preparation and batch assembly. Training runs in speaker-normalized
// space: each domain's sequences are normalized with that domain's own stats.
// ---------------------------------------------------------------------------
struct prepared_corpus {
  std::vector<int> domain_ids;  // sorted, must be exactly 1..N
  std::map<int, speaker_stats> stats;
  domain_corpus normalized;
};

inline prepared_corpus prepare_corpus(const domain_corpus& raw,
                                      std::size_t segment_len) {
  if (raw.size() < 2) throw data_error("training corpus needs at least 2 domains");
  prepared_corpus out;
  int expect = 1;
  for (const auto& [id, seqs] : raw) {
    if (id != expect++)
      throw data_error("training corpus: domain codes must be contiguous from 1");
    if (seqs.empty()) throw data_error("training corpus: empty domain");
    for (const auto& s : seqs)
      if (s.t < segment_len)
        throw data_error("training corpus: utterance shorter than segment length");
    out.domain_ids.push_back(id);
    out.stats[id] = compute_speaker_stats(seqs);
    auto& norm = out.normalized[id];
    norm.reserve(seqs.size());
    for (const auto& s : seqs) norm.push_back(normalize(s, out.stats[id]));
  }
  return out;
}

// Per instance: uniform speaker, uniform utterance, uniform crop offset,
// uniform conversion target (the target may equal the source).
inline training_batch sample_batch(const prepared_corpus& corpus,
                                   const training_config& cfg, rng& r) {
  const std::size_t B = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t N = corpus.domain_ids.size();
  training_batch batch;
  batch.x = tensor({B, 1, cfg.q, cfg.segment_len});
  batch.sources.resize(B);
  batch.targets.resize(B);
  for (std::size_t i = 0; i < B; ++i) {
    const int domain = corpus.domain_ids[r.next_below(N)];
    const auto& seqs = corpus.normalized.at(domain);
    const auto& utt = seqs[r.next_below(seqs.size())];
    if (utt.q != cfg.q) throw data_error("sample_batch: corpus dimension mismatch");
    const feature_sequence seg = crop_segment(utt, cfg.segment_len, r);
    std::copy(seg.mcep.begin(), seg.mcep.end(),
              batch.x.data() + i * cfg.q * cfg.segment_len);
    batch.sources[i] = domain;
    batch.targets[i] = corpus.domain_ids[r.next_below(N)];
  }
  return batch;
}

// ---------------------------------------------------------------------------
// One optimization step: discriminator update, then classifier (when the
// variant has one), then generator. Returns the loss breakdown for logging.
// ---------------------------------------------------------------------------
struct loss_row {
  std::int64_t iteration = 0;
  objectives::loss_breakdown losses;
};

inline objectives::loss_breakdown train_step(train_state& st,
                                             const training_batch& batch,
                                             const training_config& cfg,
                                             const model_config& mc) {
  objectives::loss_breakdown bd;
  const bool id_active = st.iteration < cfg.id_cutoff;

  if (uses_discriminator(cfg.variant)) {
    ad::graph g;
    objective_context ctx = bind_models(g, mc, st.models, false, true, false);
    ad::var loss = objectives::discriminator_objective(g, ctx, batch, cfg.variant, &bd);
    if (!is_finite(bd.total_d))
      throw numeric_error("non-finite discriminator loss at iteration " +
                          std::to_string(st.iteration));
    g.backward(loss);
    std::vector<tensor> grads;
    grads.reserve(ctx.dis.vars.size());
    for (ad::var v : ctx.dis.vars) grads.push_back(g.grad(v));
    adam_update(st.models.dis, grads, st.opt_d, cfg.lr_d, cfg.adam_beta1);
  }

  if (uses_classifier(cfg.variant)) {
    ad::graph g;
    objective_context ctx = bind_models(g, mc, st.models, false, false, true);
    ad::var loss = objectives::classifier_objective(g, ctx, batch, cfg.weights, &bd);
    if (!is_finite(bd.total_c))
      throw numeric_error("non-finite classifier loss at iteration " +
                          std::to_string(st.iteration));
    g.backward(loss);
    std::vector<tensor> grads;
    grads.reserve(ctx.cls.vars.size());
    for (ad::var v : ctx.cls.vars) grads.push_back(g.grad(v));
    adam_update(st.models.cls, grads, st.opt_c, cfg.lr_d, cfg.adam_beta1);
  }

  {
    ad::graph g;
    objective_context ctx = bind_models(g, mc, st.models, true, false, false);
    ad::var loss = objectives::generator_objective(g, ctx, batch, cfg.variant,
                                                   cfg.weights, id_active, &bd);
    if (!is_finite(bd.total_g))
      throw numeric_error("non-finite generator loss at iteration " +
                          std::to_string(st.iteration));
    g.backward(loss);
    std::vector<tensor> grads;
    grads.reserve(ctx.gen.vars.size());
    for (ad::var v : ctx.gen.vars) grads.push_back(g.grad(v));
    adam_update(st.models.gen, grads, st.opt_g, cfg.lr_g, cfg.adam_beta1);
  }

  if (!bd.all_finite())
    throw numeric_error("non-finite loss components at iteration " +
                        std::to_string(st.iteration));
  st.iteration += 1;
  return bd;
}

// ---------------------------------------------------------------------------
// Loss log formatting (full precision so identical runs produce identical
// bytes).
// ---------------------------------------------------------------------------
inline std::string loss_csv_header(const training_config& cfg) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "# variant=%s conditioning=%s lambda_cls=%g lambda_cyc=%g lambda_id=%g\n",
                to_string(cfg.variant).c_str(), to_string(cfg.conditioning).c_str(),
                cfg.weights.lambda_cls, cfg.weights.lambda_cyc, cfg.weights.lambda_id);
  return std::string(buf) +
         "iteration,loss_d,loss_c,loss_g,adv_d,adv_g,cls_real,cls_fake,cycle,identity\n";
}

inline std::string loss_csv_line(const loss_row& row) {
  char buf[400];
  const auto& l = row.losses;
  std::snprintf(buf, sizeof(buf),
                "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                static_cast<long long>(row.iteration), l.total_d, l.total_c, l.total_g,
                l.adv_d, l.adv_g, l.cls_real, l.cls_fake, l.cycle, l.identity);
  return buf;
}

// ---------------------------------------------------------------------------
// Checkpoints: "VCCK" magic, version, JSON manifest (config, iteration, rng,
// tensor directory), then raw little-endian f64 tensors in manifest order.
// Tensors are stored at full 64-bit precision; resuming must reproduce the
// uninterrupted trajectory bit for bit.
// ---------------------------------------------------------------------------
namespace ckpt_detail {

inline void collect(const param_set& p, const std::string& prefix,
                    std::vector<std::pair<std::string, const tensor*>>& out) {
  for (std::size_t i = 0; i < p.size(); ++i)
    out.emplace_back(prefix + p.name(i), &p.value(i));
}

inline void collect_adam(const adam_state& a, const param_set& p,
                         const std::string& prefix,
                         std::vector<std::pair<std::string, const tensor*>>& out) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    out.emplace_back(prefix + p.name(i) + ".m", &a.m[i]);
    out.emplace_back(prefix + p.name(i) + ".v", &a.v[i]);
  }
}

}  // namespace ckpt_detail

inline constexpr std::uint32_t checkpoint_version = 1;

inline void checkpoint_save(const train_state& st, const training_config& cfg,
                            const std::filesystem::path& path) {
  std::vector<std::pair<std::string, const tensor*>> tensors;
  ckpt_detail::collect(st.models.gen, "gen.", tensors);
  ckpt_detail::collect(st.models.dis, "dis.", tensors);
  ckpt_detail::collect(st.models.cls, "cls.", tensors);
  ckpt_detail::collect_adam(st.opt_g, st.models.gen, "opt.gen.", tensors);
  ckpt_detail::collect_adam(st.opt_d, st.models.dis, "opt.dis.", tensors);
  ckpt_detail::collect_adam(st.opt_c, st.models.cls, "opt.cls.", tensors);

  nlohmann::json manifest;
  manifest["kind"] = "train_state";
  manifest["version"] = checkpoint_version;
  manifest["iteration"] = st.iteration;
  const rng::snapshot snap = st.rand.save();
  manifest["rng"] = {{"state", snap.state},
                     {"has_cached_normal", snap.has_cached_normal},
                     {"cached_normal", snap.cached_normal}};
  manifest["adam_steps"] = {{"g", st.opt_g.step}, {"d", st.opt_d.step},
                            {"c", st.opt_c.step}};
  manifest["training_config"] = to_json(cfg);
  manifest["model_config"] = to_json(cfg.make_model_config());
  nlohmann::json dir = nlohmann::json::array();
  for (const auto& [name, t] : tensors)
    dir.push_back({{"name", name}, {"shape", t->shape()}});
  manifest["tensors"] = dir;

  const std::string mjson = manifest.dump();
  std::string buf;
  buf.append("VCCK", 4);
  io_detail::put<std::uint32_t>(buf, checkpoint_version);
  io_detail::put<std::uint64_t>(buf, mjson.size());
  buf += mjson;
  for (const auto& [name, t] : tensors)
    for (std::size_t i = 0; i < t->numel(); ++i) io_detail::put<double>(buf, (*t)[i]);
  io_detail::write_file(path, buf);
}

struct loaded_checkpoint {
  train_state state;
  training_config config;
};

inline loaded_checkpoint checkpoint_load(const std::filesystem::path& path) {
  const std::string buf = io_detail::read_file(path);
  if (buf.size() < 16 || buf.compare(0, 4, "VCCK") != 0)
    throw data_error("checkpoint: bad magic");
  std::size_t pos = 4;
  const auto version = io_detail::take<std::uint32_t>(buf, pos);
  if (version != checkpoint_version)
    throw data_error("checkpoint: unsupported version " + std::to_string(version));
  const auto mlen = io_detail::take<std::uint64_t>(buf, pos);
  if (pos + mlen > buf.size()) throw data_error("checkpoint: truncated manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(buf.substr(pos, mlen));
  } catch (const nlohmann::json::exception&) {
    throw data_error("checkpoint: bad manifest");
  }
  pos += mlen;
  if (!manifest.is_object() || manifest.value("kind", "") != "train_state")
    throw data_error("checkpoint: bad manifest");

  loaded_checkpoint out;
  try {
    out.config = training_config_from_json(manifest.at("training_config"));
    out.state = init_train_state(out.config);
    out.state.iteration = manifest.at("iteration").get<std::int64_t>();
    rng::snapshot snap;
    const auto& rj = manifest.at("rng");
    snap.state = rj.at("state").get<std::array<std::uint64_t, 4>>();
    snap.has_cached_normal = rj.at("has_cached_normal").get<bool>();
    snap.cached_normal = rj.at("cached_normal").get<double>();
    out.state.rand.restore(snap);
    out.state.opt_g.step = manifest.at("adam_steps").at("g").get<std::int64_t>();
    out.state.opt_d.step = manifest.at("adam_steps").at("d").get<std::int64_t>();
    out.state.opt_c.step = manifest.at("adam_steps").at("c").get<std::int64_t>();
  } catch (const nlohmann::json::exception&) {
    throw data_error("checkpoint: bad manifest");
  }

  // Index writable destinations by canonical name.
  std::map<std::string, tensor*> dst;
  auto index_set = [&dst](param_set& p, const std::string& prefix) {
    for (std::size_t i = 0; i < p.size(); ++i) dst[prefix + p.name(i)] = &p.value(i);
  };
  auto index_adam = [&dst](adam_state& a, const param_set& p, const std::string& prefix) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      dst[prefix + p.name(i) + ".m"] = &a.m[i];
      dst[prefix + p.name(i) + ".v"] = &a.v[i];
    }
  };
  index_set(out.state.models.gen, "gen.");
  index_set(out.state.models.dis, "dis.");
  index_set(out.state.models.cls, "cls.");
  index_adam(out.state.opt_g, out.state.models.gen, "opt.gen.");
  index_adam(out.state.opt_d, out.state.models.dis, "opt.dis.");
  index_adam(out.state.opt_c, out.state.models.cls, "opt.cls.");

  std::size_t seen = 0;
  if (!manifest.contains("tensors") || !manifest["tensors"].is_array())
    throw data_error("checkpoint: bad manifest");
  for (const auto& entry : manifest.at("tensors")) {
    if (!entry.contains("name") || !entry.contains("shape"))
      throw data_error("checkpoint: bad manifest");
    const std::string name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    auto it = dst.find(name);
    if (it == dst.end()) throw data_error("checkpoint: unexpected tensor " + name);
    if (it->second->shape() != shape)
      throw data_error("checkpoint: shape mismatch for " + name);
    for (std::size_t i = 0; i < it->second->numel(); ++i)
      (*it->second)[i] = io_detail::take<double>(buf, pos);
    ++seen;
  }
  if (seen != dst.size()) throw data_error("checkpoint: missing tensors");
  if (pos != buf.size()) throw data_error("checkpoint: trailing bytes");
  return out;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------
struct train_callbacks {
  std::function<void(const loss_row&)> on_row;
  std::function<void(const train_state&, std::int64_t)> on_checkpoint;
  std::function<void(const train_state&)> on_abort;  // diagnostic snapshot hook
};

inline train_state train_loop(const domain_corpus& corpus, const training_config& cfg,
                              const train_callbacks& cb = {},
                              train_state* resume = nullptr) {
  cfg.validate();
  const model_config mc = cfg.make_model_config();
  const prepared_corpus prepared = prepare_corpus(corpus, cfg.segment_len);
  if (static_cast<int>(prepared.domain_ids.size()) != cfg.n_domains)
    throw data_error("train_loop: corpus domain count does not match config");

  train_state state = resume ? std::move(*resume) : init_train_state(cfg);
  try {
    while (state.iteration < cfg.iterations) {
      const training_batch batch = sample_batch(prepared, cfg, state.rand);
      const std::int64_t it = state.iteration;
      const auto bd = train_step(state, batch, cfg, mc);
      if (cb.on_row) cb.on_row(loss_row{it, bd});
      if (cb.on_checkpoint && (state.iteration % cfg.checkpoint_every == 0 ||
                               state.iteration == cfg.iterations))
        cb.on_checkpoint(state, state.iteration);
    }
  } catch (const numeric_error&) {
    if (cb.on_abort) cb.on_abort(state);
    throw;
  }
  return state;
}

// ---------------------------------------------------------------------------
// Conversion pipeline: normalize with source stats, convert the cepstra with
// the generator conditioned on (source, target), denormalize with target
// stats, transform log F0, pass the AP reference through.
// ---------------------------------------------------------------------------
inline feature_sequence convert_sequence(const model_config& mc, const param_set& gen,
                                         const speaker_stats& src_stats,
                                         const speaker_stats& tgt_stats,
                                         const feature_sequence& x, int src, int tgt) {
  check_pair(mc.gen.n_domains, {src, tgt});
  const feature_sequence normalized = normalize(x, src_stats);
  tensor in = mcep_to_tensor(normalized);
  const std::size_t padded = padded_time_length(x.t);
  if (padded != x.t) in = pad_time_reflect(in, padded);
  const tensor out = models::generator_forward(gen, mc.gen, in, {{src, tgt}});
  feature_sequence converted = x;
  for (std::size_t d = 0; d < x.q; ++d)
    for (std::size_t t = 0; t < x.t; ++t)
      converted.mc(d, t) = out.at(0, 0, d, t);
  converted = denormalize(converted, tgt_stats);
  converted.log_f0 = convert_log_f0(x.log_f0, x.voiced, src_stats, tgt_stats);
  converted.voiced = x.voiced;
  converted.ap_ref = x.ap_ref;  // aperiodicities are used directly
  converted.frame_period_ms = x.frame_period_ms;
  return converted;
}

inline metrics::eval_report evaluate_trained(const domain_corpus& eval_set,
                                             const model_config& mc,
                                             const param_set& gen,
                                             const std::map<int, speaker_stats>& stats) {
  metrics::convert_fn fn = [&](const feature_sequence& x, int src, int tgt) {
    return convert_sequence(mc, gen, stats.at(src), stats.at(tgt), x, src, tgt);
  };
  return metrics::evaluate_corpus(eval_set, fn);
}

// ---------------------------------------------------------------------------
// Ablation harness: one model per variant, three seeds each, mean +/- std
// (population) of the corpus-level MCD / MSD.
// ---------------------------------------------------------------------------
enum class ablation_axis { objective, conditioning };

inline std::string to_string(ablation_axis a) {
  return a == ablation_axis::objective ? "objective" : "conditioning";
}

inline ablation_axis ablation_axis_from_string(const std::string& s) {
  if (s == "objective") return ablation_axis::objective;
  if (s == "conditioning") return ablation_axis::conditioning;
  throw usage_error("unknown ablation axis: " + s);
}

struct ablation_row {
  std::string label;
  double mcd_mean = 0.0;
  double mcd_std = 0.0;
  double msd_mean = 0.0;
  double msd_std = 0.0;
  std::vector<std::uint64_t> seeds;
};

inline constexpr int ablation_seeds = 3;

inline std::vector<ablation_row> ablation_run(
    const domain_corpus& corpus, const training_config& base, ablation_axis axis,
    const std::function<void(const std::string&, std::uint64_t)>& on_progress = {}) {
  std::vector<training_config> variants;
  std::vector<std::string> labels;
  if (axis == ablation_axis::objective) {
    // Conditioning fixed to modulation-based while objectives vary.
    for (objective_variant v :
         {objective_variant::cls_only, objective_variant::t_adv,
          objective_variant::t_adv_plus_cls, objective_variant::st_adv}) {
      training_config c = base;
      c.variant = v;
      c.conditioning = conditioning_mode::modulation_based;
      variants.push_back(c);
      labels.push_back(to_string(v));
    }
  } else {
    // Objective fixed to st_adv while the generator conditioning varies.
    for (conditioning_mode m :
         {conditioning_mode::channel_wise, conditioning_mode::modulation_based}) {
      training_config c = base;
      c.variant = objective_variant::st_adv;
      c.conditioning = m;
      variants.push_back(c);
      labels.push_back(to_string(m));
    }
  }

  std::vector<ablation_row> rows;
  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    ablation_row row;
    row.label = labels[vi];
    std::vector<double> mcds, msds;
    for (int s = 0; s < ablation_seeds; ++s) {
      training_config cfg = variants[vi];
      cfg.seed = base.seed + static_cast<std::uint64_t>(s);
      row.seeds.push_back(cfg.seed);
      if (on_progress) on_progress(row.label, cfg.seed);
      const train_state st = train_loop(corpus, cfg);
      const prepared_corpus prepared = prepare_corpus(corpus, cfg.segment_len);
      const auto report =
          evaluate_trained(corpus, cfg.make_model_config(), st.models.gen,
                           prepared.stats);
      mcds.push_back(report.mcd_mean);
      msds.push_back(report.msd_mean);
    }
    auto mean_std = [](const std::vector<double>& xs) {
      double mean = 0.0;
      for (double v : xs) mean += v;
      mean /= static_cast<double>(xs.size());
      double var = 0.0;
      for (double v : xs) var += (v - mean) * (v - mean);
      var /= static_cast<double>(xs.size());
      return std::pair(mean, std::sqrt(var));
    };
    std::tie(row.mcd_mean, row.mcd_std) = mean_std(mcds);
    std::tie(row.msd_mean, row.msd_std) = mean_std(msds);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string ablation_csv(const std::vector<ablation_row>& rows) {
  std::string out = "variant,mcd_mean,mcd_std,msd_mean,msd_std,seeds\n";
  char line[300];
  for (const auto& r : rows) {
    std::string seeds;
    for (std::size_t i = 0; i < r.seeds.size(); ++i)
      seeds += (i ? ";" : "") + std::to_string(r.seeds[i]);
    std::snprintf(line, sizeof(line), "%s,%.17g,%.17g,%.17g,%.17g,%s\n",
                  r.label.c_str(), r.mcd_mean, r.mcd_std, r.msd_mean, r.msd_std,
                  seeds.c_str());
    out += line;
  }
  return out;
}

inline nlohmann::json ablation_json(const std::vector<ablation_row>& rows,
                                    ablation_axis axis) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows)
    arr.push_back({{"variant", r.label},
                   {"mcd_mean", r.mcd_mean},
                   {"mcd_std", r.mcd_std},
                   {"msd_mean", r.msd_mean},
                   {"msd_std", r.msd_std},
                   {"seeds", r.seeds}});
  return {{"axis", to_string(axis)},
          {"rows", arr},
          {"seeds_per_variant", ablation_seeds},
          {"conventions", metrics::conventions()}};
}

}  // namespace vcstar
