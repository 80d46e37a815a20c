#pragma once

#include <string>
#include <vector>

#include "vcstar/models.hpp"

namespace vcstar {

struct loss_weights {
  double lambda_cls = 1.0;
  double lambda_cyc = 10.0;
  double lambda_id = 5.0;

  void validate() const {
    if (lambda_cls < 0 || lambda_cyc < 0 || lambda_id < 0)
      throw usage_error("loss weights must be non-negative");
  }
};

// Training-objective families compared in the ablation: classification only,
// target-conditional adversarial, their combination, and the
// source-and-target conditional adversarial objective.
enum class objective_variant { cls_only, t_adv, t_adv_plus_cls, st_adv };

inline std::string to_string(objective_variant v) {
  switch (v) {
    case objective_variant::cls_only: return "cls_only";
    case objective_variant::t_adv: return "t_adv";
    case objective_variant::t_adv_plus_cls: return "t_adv_plus_cls";
    case objective_variant::st_adv: return "st_adv";
  }
  throw usage_error("bad objective variant");
}

inline objective_variant objective_variant_from_string(const std::string& s) {
  if (s == "cls_only") return objective_variant::cls_only;
  if (s == "t_adv") return objective_variant::t_adv;
  if (s == "t_adv_plus_cls") return objective_variant::t_adv_plus_cls;
  if (s == "st_adv") return objective_variant::st_adv;
  throw usage_error("unknown objective variant: " + s);
}

inline bool uses_discriminator(objective_variant v) {
  return v != objective_variant::cls_only;
}

inline bool uses_classifier(objective_variant v) {
  return v == objective_variant::cls_only || v == objective_variant::t_adv_plus_cls;
}

// The source code conditions the networks only under the source-and-target
// objective; the baselines stay target-conditional.
inline conditioning_scope scope_for(objective_variant v) {
  return v == objective_variant::st_adv ? conditioning_scope::source_and_target
                                        : conditioning_scope::target_only;
}

// One optimization instance: a batch of normalized cepstral segments with
// their true domain codes and independently sampled conversion targets.
struct training_batch {
  tensor x;                  // [B, 1, Q, T]
  std::vector<int> sources;  // true codes c, 1-based
  std::vector<int> targets;  // sampled codes c', 1-based

  std::size_t size() const { return sources.size(); }

  std::vector<domain_pair> conversion_pairs() const {
    std::vector<domain_pair> p(size());
    for (std::size_t i = 0; i < size(); ++i) p[i] = {sources[i], targets[i]};
    return p;
  }

  std::vector<domain_pair> reverse_pairs() const {
    std::vector<domain_pair> p(size());
    for (std::size_t i = 0; i < size(); ++i) p[i] = {targets[i], sources[i]};
    return p;
  }

  std::vector<domain_pair> identity_pairs() const {
    std::vector<domain_pair> p(size());
    for (std::size_t i = 0; i < size(); ++i) p[i] = {sources[i], sources[i]};
    return p;
  }

  // Real samples of domain c presented as the target of the sampled source c'.
  std::vector<domain_pair> real_presentation_pairs() const {
    std::vector<domain_pair> p(size());
    for (std::size_t i = 0; i < size(); ++i) p[i] = {targets[i], sources[i]};
    return p;
  }

  // Target-only conditioning of real samples on their own domain code.
  std::vector<domain_pair> real_target_pairs() const {
    std::vector<domain_pair> p(size());
    for (std::size_t i = 0; i < size(); ++i) p[i] = {sources[i], sources[i]};
    return p;
  }
};

// All models of one experiment bound onto one tape.
struct objective_context {
  const model_config* cfg = nullptr;
  bound_params gen;
  bound_params dis;  // empty unless the variant uses it
  bound_params cls;  // empty unless the variant uses it

  bool has_dis() const { return dis.src != nullptr && !dis.src->empty(); }
  bool has_cls() const { return cls.src != nullptr && !cls.src->empty(); }
};

inline objective_context bind_models(ad::graph& g, const model_config& cfg,
                                     const model_params& params, bool train_gen,
                                     bool train_dis, bool train_cls) {
  objective_context ctx;
  ctx.cfg = &cfg;
  ctx.gen = bind(g, params.gen, train_gen);
  if (!params.dis.empty()) ctx.dis = bind(g, params.dis, train_dis);
  if (!params.cls.empty()) ctx.cls = bind(g, params.cls, train_cls);
  return ctx;
}

namespace objectives {

// ---- least-squares functionals (normative per the training recipe) ----

inline ad::var mse_to(ad::var scores, double target) {
  ad::var d = ad::add_scalar(scores, -target);
  return ad::mean_all(ad::mul(d, d));
}

inline ad::var lsgan_d_loss(ad::var real_scores, ad::var fake_scores) {
  return ad::add(mse_to(real_scores, 1.0), mse_to(fake_scores, 0.0));
}

inline ad::var lsgan_g_loss(ad::var fake_scores) { return mse_to(fake_scores, 1.0); }

inline ad::var l1_mean(ad::var a, ad::var b) {
  return ad::mean_all(ad::abs_val(ad::sub(a, b)));
}

struct adv_losses {
  ad::var d_loss;
  ad::var g_loss;
};

// ---- target-conditional adversarial loss (baseline family) ----

inline adv_losses adv_loss_target(ad::graph& g, const objective_context& ctx,
                                  const training_batch& batch) {
  if (!ctx.has_dis()) throw usage_error("adv_loss_target: no discriminator bound");
  if (ctx.cfg->dis.scope != conditioning_scope::target_only)
    throw usage_error("adv_loss_target: discriminator is not target-conditional");
  ad::var x = g.constant(batch.x);
  ad::var fake = models::generator_apply(g, ctx.gen, ctx.cfg->gen, x,
                                         batch.conversion_pairs());
  ad::var real_scores = models::discriminator_apply(g, ctx.dis, ctx.cfg->dis, x,
                                                    batch.real_target_pairs());
  ad::var fake_scores_d = models::discriminator_apply(
      g, ctx.dis, ctx.cfg->dis, ad::detach(fake), batch.conversion_pairs());
  ad::var fake_scores_g = models::discriminator_apply(g, ctx.dis, ctx.cfg->dis, fake,
                                                      batch.conversion_pairs());
  return {lsgan_d_loss(real_scores, fake_scores_d), lsgan_g_loss(fake_scores_g)};
}

// ---- source-and-target conditional adversarial loss ----
// Real data of domain c is presented as the target of the sampled source c'
// (pair (c', c)); converted data carries its true conversion pair (c, c').

inline adv_losses st_adv_loss(ad::graph& g, const objective_context& ctx,
                              const training_batch& batch) {
  if (!ctx.has_dis()) throw usage_error("st_adv_loss: no discriminator bound");
  if (ctx.cfg->dis.scope != conditioning_scope::source_and_target)
    throw usage_error("st_adv_loss: discriminator is not source-and-target conditional");
  ad::var x = g.constant(batch.x);
  ad::var fake = models::generator_apply(g, ctx.gen, ctx.cfg->gen, x,
                                         batch.conversion_pairs());
  ad::var real_scores = models::discriminator_apply(
      g, ctx.dis, ctx.cfg->dis, x, batch.real_presentation_pairs());
  ad::var fake_scores_d = models::discriminator_apply(
      g, ctx.dis, ctx.cfg->dis, ad::detach(fake), batch.conversion_pairs());
  ad::var fake_scores_g = models::discriminator_apply(g, ctx.dis, ctx.cfg->dis, fake,
                                                      batch.conversion_pairs());
  return {lsgan_d_loss(real_scores, fake_scores_d), lsgan_g_loss(fake_scores_g)};
}

// ---- classification losses ----

inline ad::var cls_loss_real(ad::graph& g, const objective_context& ctx,
                             const training_batch& batch) {
  if (!ctx.has_cls()) throw usage_error("cls_loss_real: no classifier bound");
  ad::var lp = models::classifier_apply(g, ctx.cls, ctx.cfg->cls, g.constant(batch.x));
  std::vector<std::size_t> targets(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    targets[i] = static_cast<std::size_t>(batch.sources[i] - 1);
  return ad::nll_mean(lp, targets);
}

// The classifier is held fixed here; only the generator receives gradient.
inline ad::var cls_loss_fake(ad::graph& g, const objective_context& ctx,
                             const training_batch& batch, ad::var converted) {
  if (!ctx.has_cls()) throw usage_error("cls_loss_fake: no classifier bound");
  ad::var lp = models::classifier_apply(g, ctx.cls, ctx.cfg->cls, converted);
  std::vector<std::size_t> targets(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    targets[i] = static_cast<std::size_t>(batch.targets[i] - 1);
  return ad::nll_mean(lp, targets);
}

inline ad::var cls_loss_fake(ad::graph& g, const objective_context& ctx,
                             const training_batch& batch) {
  ad::var converted = models::generator_apply(
      g, ctx.gen, ctx.cfg->gen, g.constant(batch.x), batch.conversion_pairs());
  return cls_loss_fake(g, ctx, batch, converted);
}

// ---- reconstruction losses (mean over all elements) ----

inline ad::var cycle_loss(ad::graph& g, const objective_context& ctx,
                          const training_batch& batch, ad::var converted) {
  ad::var round_trip = models::generator_apply(g, ctx.gen, ctx.cfg->gen, converted,
                                               batch.reverse_pairs());
  return l1_mean(g.constant(batch.x), round_trip);
}

inline ad::var cycle_loss(ad::graph& g, const objective_context& ctx,
                          const training_batch& batch) {
  ad::var converted = models::generator_apply(
      g, ctx.gen, ctx.cfg->gen, g.constant(batch.x), batch.conversion_pairs());
  return cycle_loss(g, ctx, batch, converted);
}

inline ad::var identity_loss(ad::graph& g, const objective_context& ctx,
                             const training_batch& batch) {
  ad::var same = models::generator_apply(g, ctx.gen, ctx.cfg->gen,
                                         g.constant(batch.x), batch.identity_pairs());
  return l1_mean(same, g.constant(batch.x));
}

// ---- literal saturating log forms (documented, evaluation-only) ----
// Values of the adversarial objectives exactly as written, with the raw
// scores squashed through a sigmoid. The trained objective is least squares.

inline double adv_value_target_log(const model_config& cfg, const model_params& params,
                                   const training_batch& batch) {
  ad::graph g;
  objective_context ctx = bind_models(g, cfg, params, false, false, false);
  ad::var x = g.constant(batch.x);
  ad::var fake = models::generator_apply(g, ctx.gen, cfg.gen, x,
                                         batch.conversion_pairs());
  ad::var real_scores = models::discriminator_apply(g, ctx.dis, cfg.dis, x,
                                                    batch.real_target_pairs());
  ad::var fake_scores = models::discriminator_apply(g, ctx.dis, cfg.dis, fake,
                                                    batch.conversion_pairs());
  // E[log D(x, c)] + E[log(1 - D(G(x, c'), c'))]
  ad::var value = ad::add(ad::mean_all(ad::log_sigmoid(real_scores)),
                          ad::mean_all(ad::log_sigmoid(ad::mul_scalar(fake_scores, -1.0))));
  return g.value(value)[0];
}

inline double st_adv_value_log(const model_config& cfg, const model_params& params,
                               const training_batch& batch) {
  ad::graph g;
  objective_context ctx = bind_models(g, cfg, params, false, false, false);
  ad::var x = g.constant(batch.x);
  ad::var fake = models::generator_apply(g, ctx.gen, cfg.gen, x,
                                         batch.conversion_pairs());
  ad::var real_scores = models::discriminator_apply(
      g, ctx.dis, cfg.dis, x, batch.real_presentation_pairs());
  ad::var fake_scores = models::discriminator_apply(g, ctx.dis, cfg.dis, fake,
                                                    batch.conversion_pairs());
  // E[log D(x, c', c)] + E[log D(G(x, c, c'), c, c')], second term as written.
  ad::var value = ad::add(ad::mean_all(ad::log_sigmoid(real_scores)),
                          ad::mean_all(ad::log_sigmoid(fake_scores)));
  return g.value(value)[0];
}

// ---- full objectives ----

struct loss_breakdown {
  double total_d = 0.0;
  double total_c = 0.0;
  double total_g = 0.0;
  double adv_d = 0.0;
  double adv_g = 0.0;
  double cls_real = 0.0;
  double cls_fake = 0.0;
  double cycle = 0.0;
  double identity = 0.0;

  bool all_finite() const {
    for (double v : {total_d, total_c, total_g, adv_d, adv_g, cls_real, cls_fake,
                     cycle, identity})
      if (!is_finite(v)) return false;
    return true;
  }
};

inline void require_models(const objective_context& ctx, objective_variant variant) {
  if (uses_discriminator(variant) && !ctx.has_dis())
    throw usage_error("objective variant needs a discriminator");
  if (uses_classifier(variant) && !ctx.has_cls())
    throw usage_error("objective variant needs a classifier");
}

// Discriminator-phase loss (L_D).
inline ad::var discriminator_objective(ad::graph& g, const objective_context& ctx,
                                       const training_batch& batch,
                                       objective_variant variant,
                                       loss_breakdown* breakdown = nullptr) {
  require_models(ctx, variant);
  if (!uses_discriminator(variant))
    throw usage_error("discriminator_objective: variant has no adversarial term");
  adv_losses adv = variant == objective_variant::st_adv
                       ? st_adv_loss(g, ctx, batch)
                       : adv_loss_target(g, ctx, batch);
  if (breakdown) {
    breakdown->adv_d = g.value(adv.d_loss)[0];
    breakdown->total_d = breakdown->adv_d;
  }
  return adv.d_loss;
}

// Classifier-phase loss (L_C = lambda_cls * L_cls^r).
inline ad::var classifier_objective(ad::graph& g, const objective_context& ctx,
                                    const training_batch& batch,
                                    const loss_weights& weights,
                                    loss_breakdown* breakdown = nullptr) {
  ad::var real = cls_loss_real(g, ctx, batch);
  ad::var total = ad::mul_scalar(real, weights.lambda_cls);
  if (breakdown) {
    breakdown->cls_real = g.value(real)[0];
    breakdown->total_c = g.value(total)[0];
  }
  return total;
}

// Generator-phase loss (L_G); the converted batch is computed once and shared
// by the adversarial, classification, and cycle terms.
inline ad::var generator_objective(ad::graph& g, const objective_context& ctx,
                                   const training_batch& batch,
                                   objective_variant variant,
                                   const loss_weights& weights, bool id_active,
                                   loss_breakdown* breakdown = nullptr) {
  require_models(ctx, variant);
  ad::var x = g.constant(batch.x);
  ad::var converted = models::generator_apply(g, ctx.gen, ctx.cfg->gen, x,
                                              batch.conversion_pairs());

  ad::var total{};
  bool have_total = false;
  auto accumulate = [&](ad::var term, double scale) {
    ad::var scaled = scale == 1.0 ? term : ad::mul_scalar(term, scale);
    total = have_total ? ad::add(total, scaled) : scaled;
    have_total = true;
  };

  if (uses_discriminator(variant)) {
    ad::var scores = models::discriminator_apply(g, ctx.dis, ctx.cfg->dis, converted,
                                                 batch.conversion_pairs());
    ad::var adv_g = lsgan_g_loss(scores);
    if (breakdown) breakdown->adv_g = g.value(adv_g)[0];
    accumulate(adv_g, 1.0);
  }
  if (uses_classifier(variant)) {
    ad::var cls_f = cls_loss_fake(g, ctx, batch, converted);
    if (breakdown) breakdown->cls_fake = g.value(cls_f)[0];
    accumulate(cls_f, weights.lambda_cls);
  }
  ad::var cyc = cycle_loss(g, ctx, batch, converted);
  if (breakdown) breakdown->cycle = g.value(cyc)[0];
  accumulate(cyc, weights.lambda_cyc);
  if (id_active) {
    ad::var id = identity_loss(g, ctx, batch);
    if (breakdown) breakdown->identity = g.value(id)[0];
    accumulate(id, weights.lambda_id);
  }
  if (breakdown) breakdown->total_g = g.value(total)[0];
  return total;
}

// Evaluates every term of the full objective for the variant on the current
// parameters (no updates); a diagnostic and test surface.
inline loss_breakdown total_losses(const model_config& cfg, const model_params& params,
                                   const training_batch& batch,
                                   objective_variant variant,
                                   const loss_weights& weights, bool id_active) {
  weights.validate();
  loss_breakdown out;
  if (uses_discriminator(variant)) {
    ad::graph g;
    objective_context ctx = bind_models(g, cfg, params, false, false, false);
    discriminator_objective(g, ctx, batch, variant, &out);
  }
  if (uses_classifier(variant)) {
    ad::graph g;
    objective_context ctx = bind_models(g, cfg, params, false, false, false);
    classifier_objective(g, ctx, batch, weights, &out);
  }
  {
    ad::graph g;
    objective_context ctx = bind_models(g, cfg, params, false, false, false);
    generator_objective(g, ctx, batch, variant, weights, id_active, &out);
  }
  return out;
}

}  // namespace objectives
}  // namespace vcstar
