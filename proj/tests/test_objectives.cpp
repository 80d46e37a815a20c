#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "vcstar/objectives.hpp"
#include "vcstar/rng.hpp"
#include "testutil.hpp"

using namespace vcstar;
namespace ad = vcstar::ad;
namespace obj = vcstar::objectives;

namespace {

model_config tiny_models(objective_variant v,
                         conditioning_mode mode = conditioning_mode::modulation_based) {
  model_config m;
  m.gen.n_domains = 2;
  m.gen.q = 4;
  m.gen.mode = mode;
  m.gen.scope = scope_for(v);
  m.gen.base_channels = 2;
  m.gen.down_channels = 2;
  m.gen.bottleneck_channels = 4;
  m.gen.n_blocks = 1;
  m.dis.n_domains = 2;
  m.dis.scope = scope_for(v);
  m.dis.base_channels = 2;
  m.dis.down_channels = 2;
  m.dis.feature_channels = 3;
  m.cls.n_domains = 2;
  m.cls.channels = 2;
  return m;
}

model_params init_for(const model_config& cfg, objective_variant v, std::uint64_t seed) {
  rng r(seed);
  model_params p;
  p.gen = init_generator(cfg.gen, r);
  if (uses_discriminator(v)) p.dis = init_discriminator(cfg.dis, r);
  if (uses_classifier(v)) p.cls = init_classifier(cfg.cls, r);
  return p;
}

training_batch tiny_batch(std::size_t b, std::size_t q, std::size_t t,
                          std::uint64_t seed, int n_domains = 2) {
  rng r(seed);
  training_batch batch;
  batch.x = tensor({b, 1, q, t});
  for (std::size_t i = 0; i < batch.x.numel(); ++i) batch.x[i] = r.normal();
  batch.sources.resize(b);
  batch.targets.resize(b);
  for (std::size_t i = 0; i < b; ++i) {
    batch.sources[i] = 1 + static_cast<int>(r.next_below(std::uint64_t(n_domains)));
    batch.targets[i] = 1 + static_cast<int>(r.next_below(std::uint64_t(n_domains)));
  }
  return batch;
}

// Constant discriminator: zeroed stack with head bias v makes every score v.
void make_constant_discriminator(param_set& dis, double v) {
  for (std::size_t i = 0; i < dis.size(); ++i) dis.value(i).fill(0.0);
  dis.at("head.b")[0] = v;
}

}  // namespace

TEST_CASE("lsgan functionals at their optima and closed forms", "[objectives]") {
  ad::graph g;
  ad::var perfect_real = g.constant(tensor({4}, {1.0, 1.0, 1.0, 1.0}));
  ad::var perfect_fake = g.constant(tensor({4}, {0.0, 0.0, 0.0, 0.0}));
  CHECK(g.value(obj::lsgan_d_loss(perfect_real, perfect_fake))[0] == 0.0);

  // Generator optimum: fakes scored 1 give zero generator loss.
  CHECK(g.value(obj::lsgan_g_loss(perfect_real))[0] == 0.0);

  ad::var half = g.constant(tensor::full({4}, 0.5));
  CHECK(g.value(obj::lsgan_d_loss(half, half))[0] == Catch::Approx(0.5).margin(1e-9));
  CHECK(g.value(obj::lsgan_g_loss(half))[0] == Catch::Approx(0.25).margin(1e-9));
}

TEST_CASE("same-domain batches express the hard-negative A->A case",
          "[objectives]") {
  // With c' == c the real presentation pairs, conversion pairs, and identity
  // pairs all coincide: the adversarial game degenerates to same-domain
  // reconstruction, which the pair conditioning represents directly.
  training_batch batch = tiny_batch(4, 4, 8, 97);
  batch.targets = batch.sources;
  const auto conv = batch.conversion_pairs();
  const auto real = batch.real_presentation_pairs();
  const auto id = batch.identity_pairs();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(conv[i].source == real[i].source);
    CHECK(conv[i].target == real[i].target);
    CHECK(conv[i].source == id[i].source);
    CHECK(conv[i].target == id[i].target);
  }
  model_config cfg = tiny_models(objective_variant::st_adv);
  model_params params = init_for(cfg, objective_variant::st_adv, 99);
  ad::graph g;
  objective_context ctx = bind_models(g, cfg, params, false, false, false);
  const obj::adv_losses adv = obj::st_adv_loss(g, ctx, batch);
  CHECK(vcstar::is_finite(g.value(adv.d_loss)[0]));
  CHECK(vcstar::is_finite(g.value(adv.g_loss)[0]));
}

TEST_CASE("constant discriminator closed forms through both adversarial losses",
          "[objectives]") {
  for (objective_variant v : {objective_variant::t_adv, objective_variant::st_adv}) {
    model_config cfg = tiny_models(v);
    model_params params = init_for(cfg, v, 5);
    make_constant_discriminator(params.dis, 0.5);
    training_batch batch = tiny_batch(3, cfg.gen.q, 8, 17);
    ad::graph g;
    objective_context ctx = bind_models(g, cfg, params, false, false, false);
    obj::adv_losses adv = v == objective_variant::st_adv
                              ? obj::st_adv_loss(g, ctx, batch)
                              : obj::adv_loss_target(g, ctx, batch);
    CHECK(g.value(adv.d_loss)[0] == Catch::Approx(0.5).margin(1e-9));
    CHECK(g.value(adv.g_loss)[0] == Catch::Approx(0.25).margin(1e-9));
  }
}

TEST_CASE("batch permutation leaves adversarial losses unchanged", "[objectives]") {
  model_config cfg = tiny_models(objective_variant::st_adv);
  model_params params = init_for(cfg, objective_variant::st_adv, 7);
  training_batch batch = tiny_batch(4, cfg.gen.q, 8, 23);

  training_batch permuted;
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  permuted.x = tensor({4, 1, cfg.gen.q, 8});
  const std::size_t inst = cfg.gen.q * 8;
  for (std::size_t i = 0; i < 4; ++i) {
    std::copy(batch.x.data() + perm[i] * inst, batch.x.data() + (perm[i] + 1) * inst,
              permuted.x.data() + i * inst);
    permuted.sources.push_back(batch.sources[perm[i]]);
    permuted.targets.push_back(batch.targets[perm[i]]);
  }

  auto eval = [&](const training_batch& b) {
    ad::graph g;
    objective_context ctx = bind_models(g, cfg, params, false, false, false);
    obj::adv_losses adv = obj::st_adv_loss(g, ctx, b);
    return std::pair{g.value(adv.d_loss)[0], g.value(adv.g_loss)[0]};
  };
  auto [d0, g0] = eval(batch);
  auto [d1, g1] = eval(permuted);
  CHECK(d0 == Catch::Approx(d1).margin(1e-12));
  CHECK(g0 == Catch::Approx(g1).margin(1e-12));
}

TEST_CASE("classification loss closed forms", "[objectives]") {
  model_config cfg = tiny_models(objective_variant::cls_only);
  cfg.cls.n_domains = 4;
  cfg.gen.n_domains = 4;
  cfg.dis.n_domains = 4;
  model_params params = init_for(cfg, objective_variant::cls_only, 9);
  training_batch batch = tiny_batch(3, cfg.gen.q, 8, 31, 4);

  SECTION("uniform classifier gives ln N") {
    params.cls.at("head.w").fill(0.0);
    params.cls.at("head.b").fill(0.0);
    ad::graph g;
    objective_context ctx = bind_models(g, cfg, params, false, false, false);
    const double loss = g.value(obj::cls_loss_real(g, ctx, batch))[0];
    CHECK(loss == Catch::Approx(std::log(4.0)).margin(1e-9));
    const double fake = g.value(obj::cls_loss_fake(g, ctx, batch))[0];
    CHECK(fake == Catch::Approx(std::log(4.0)).margin(1e-9));
  }

  SECTION("near-perfect classifier drives the loss to zero") {
    for (std::size_t i = 0; i < params.cls.size(); ++i) params.cls.value(i).fill(0.0);
    // All trunk features collapse to zero, so logits equal head biases. Favor
    // class 1 (code 1) overwhelmingly and use a batch labeled with code 1.
    params.cls.at("head.b")[0] = 50.0;
    training_batch b1 = batch;
    for (auto& c : b1.sources) c = 1;
    ad::graph g;
    objective_context ctx = bind_models(g, cfg, params, false, false, false);
    CHECK(g.value(obj::cls_loss_real(g, ctx, b1))[0] < 1e-12);
  }

  SECTION("loss is non-negative") {
    ad::graph g;
    objective_context ctx = bind_models(g, cfg, params, false, false, false);
    CHECK(g.value(obj::cls_loss_real(g, ctx, batch))[0] >= 0.0);
  }
}

TEST_CASE("reconstruction loss formulas", "[objectives]") {
  SECTION("identity round trip is exactly zero") {
    ad::graph g;
    tensor x({1, 1, 1, 2}, {1.0, 2.0});
    CHECK(g.value(obj::l1_mean(g.constant(x), g.constant(x)))[0] == 0.0);
  }

  SECTION("hand-computed mean-over-elements convention") {
    ad::graph g;
    tensor x({1, 1, 1, 2}, {1.0, 2.0});
    tensor rt({1, 1, 1, 2}, {0.0, 0.0});
    CHECK(g.value(obj::l1_mean(g.constant(x), g.constant(rt)))[0] ==
          Catch::Approx(1.5));
  }

  SECTION("constant-zero generator against unit input gives identity loss 1") {
    model_config cfg = tiny_models(objective_variant::st_adv);
    model_params params = init_for(cfg, objective_variant::st_adv, 11);
    for (std::size_t i = 0; i < params.gen.size(); ++i) params.gen.value(i).fill(0.0);
    training_batch batch = tiny_batch(2, cfg.gen.q, 8, 37);
    batch.x.fill(1.0);
    ad::graph g;
    objective_context ctx = bind_models(g, cfg, params, false, false, false);
    CHECK(g.value(obj::identity_loss(g, ctx, batch))[0] == Catch::Approx(1.0));
    // Cycle loss through the zero generator is mean |x - 0| = 1 as well.
    CHECK(g.value(obj::cycle_loss(g, ctx, batch))[0] == Catch::Approx(1.0));
  }
}

TEST_CASE("freezing contracts per phase", "[objectives]") {
  model_config cfg = tiny_models(objective_variant::t_adv_plus_cls);
  model_params params = init_for(cfg, objective_variant::t_adv_plus_cls, 13);
  training_batch batch = tiny_batch(2, cfg.gen.q, 8, 41);
  loss_weights w;

  SECTION("discriminator phase leaves generator untouched") {
    ad::graph g;
    // Bind the generator trainable on purpose: detachment alone must keep it
    // out of the discriminator update.
    objective_context ctx = bind_models(g, cfg, params, true, true, true);
    ad::var d = obj::discriminator_objective(g, ctx, batch,
                                             objective_variant::t_adv_plus_cls);
    g.backward(d);
    for (ad::var v : ctx.gen.vars) {
      const tensor gr = g.grad(v);
      for (std::size_t i = 0; i < gr.numel(); ++i) CHECK(gr[i] == 0.0);
    }
    bool dis_nonzero = false;
    for (ad::var v : ctx.dis.vars) {
      const tensor gr = g.grad(v);
      for (std::size_t i = 0; i < gr.numel(); ++i)
        if (gr[i] != 0.0) dis_nonzero = true;
    }
    CHECK(dis_nonzero);
  }

  SECTION("generator phase keeps frozen critics at exactly zero gradient") {
    ad::graph g;
    objective_context ctx = bind_models(g, cfg, params, true, false, false);
    ad::var lg = obj::generator_objective(g, ctx, batch,
                                          objective_variant::t_adv_plus_cls, w, true);
    g.backward(lg);
    for (ad::var v : ctx.dis.vars)
      for (std::size_t i = 0; i < g.grad(v).numel(); ++i) CHECK(g.grad(v)[i] == 0.0);
    for (ad::var v : ctx.cls.vars)
      for (std::size_t i = 0; i < g.grad(v).numel(); ++i) CHECK(g.grad(v)[i] == 0.0);
    bool gen_nonzero = false;
    for (ad::var v : ctx.gen.vars)
      for (std::size_t i = 0; i < g.grad(v).numel(); ++i)
        if (g.grad(v)[i] != 0.0) gen_nonzero = true;
    CHECK(gen_nonzero);
  }
}

TEST_CASE("total losses gate terms per variant and decompose exactly",
          "[objectives]") {
  loss_weights w;  // (1, 10, 5) per the training recipe defaults
  CHECK(w.lambda_cls == 1.0);
  CHECK(w.lambda_cyc == 10.0);
  CHECK(w.lambda_id == 5.0);

  SECTION("zero weights reduce L_G to the pure adversarial term") {
    model_config cfg = tiny_models(objective_variant::t_adv);
    model_params params = init_for(cfg, objective_variant::t_adv, 15);
    training_batch batch = tiny_batch(2, cfg.gen.q, 8, 43);
    loss_weights zero{0.0, 0.0, 0.0};
    auto bd = obj::total_losses(cfg, params, batch, objective_variant::t_adv, zero, false);
    CHECK(bd.total_g == Catch::Approx(bd.adv_g).margin(1e-12));
  }

  SECTION("decomposition sums to the reported total") {
    model_config cfg = tiny_models(objective_variant::t_adv_plus_cls);
    model_params params = init_for(cfg, objective_variant::t_adv_plus_cls, 17);
    training_batch batch = tiny_batch(2, cfg.gen.q, 8, 47);
    auto bd = obj::total_losses(cfg, params, batch,
                                objective_variant::t_adv_plus_cls, w, true);
    CHECK(bd.total_g ==
          Catch::Approx(bd.adv_g + w.lambda_cls * bd.cls_fake +
                        w.lambda_cyc * bd.cycle + w.lambda_id * bd.identity)
              .margin(1e-10));
    CHECK(bd.total_c == Catch::Approx(w.lambda_cls * bd.cls_real).margin(1e-12));
    CHECK(bd.total_d == Catch::Approx(bd.adv_d).margin(1e-12));
  }

  SECTION("st_adv drops classification terms") {
    model_config cfg = tiny_models(objective_variant::st_adv);
    model_params params = init_for(cfg, objective_variant::st_adv, 19);
    training_batch batch = tiny_batch(2, cfg.gen.q, 8, 53);
    auto bd = obj::total_losses(cfg, params, batch, objective_variant::st_adv, w, false);
    CHECK(bd.cls_real == 0.0);
    CHECK(bd.cls_fake == 0.0);
    CHECK(bd.identity == 0.0);  // id inactive past the warm-up cutoff
    CHECK(bd.total_g == Catch::Approx(bd.adv_g + w.lambda_cyc * bd.cycle).margin(1e-10));
  }

  SECTION("missing models for the variant are rejected") {
    model_config cfg = tiny_models(objective_variant::t_adv_plus_cls);
    model_params params = init_for(cfg, objective_variant::t_adv, 21);  // no classifier
    training_batch batch = tiny_batch(2, cfg.gen.q, 8, 59);
    CHECK_THROWS_AS(obj::total_losses(cfg, params, batch,
                                      objective_variant::t_adv_plus_cls, w, false),
                    usage_error);
  }

  SECTION("variant and discriminator scope must agree") {
    model_config cfg = tiny_models(objective_variant::st_adv);
    cfg.dis.scope = conditioning_scope::target_only;
    model_params params = init_for(cfg, objective_variant::st_adv, 23);
    training_batch batch = tiny_batch(2, cfg.gen.q, 8, 61);
    ad::graph g;
    objective_context ctx = bind_models(g, cfg, params, false, false, false);
    CHECK_THROWS_AS(obj::st_adv_loss(g, ctx, batch), usage_error);
  }
}

TEST_CASE("literal log-form adversarial values", "[objectives]") {
  // With a constant zero-score discriminator both sigmoid terms are 1/2, so
  // each written objective evaluates to 2 log(1/2).
  for (objective_variant v : {objective_variant::t_adv, objective_variant::st_adv}) {
    model_config cfg = tiny_models(v);
    model_params params = init_for(cfg, v, 25);
    make_constant_discriminator(params.dis, 0.0);
    training_batch batch = tiny_batch(2, cfg.gen.q, 8, 67);
    const double value = v == objective_variant::st_adv
                             ? obj::st_adv_value_log(cfg, params, batch)
                             : obj::adv_value_target_log(cfg, params, batch);
    CHECK(value == Catch::Approx(-2.0 * std::log(2.0)).margin(1e-12));
  }
}

TEST_CASE("every objective's gradients match finite differences",
          "[objectives][grad]") {
  const objective_variant v = objective_variant::t_adv_plus_cls;
  model_config cfg = tiny_models(v);
  model_params params = init_for(cfg, v, 27);
  training_batch batch = tiny_batch(2, cfg.gen.q, 8, 71);
  loss_weights w;

  auto collect = [](ad::graph& g, const bound_params& b) {
    std::vector<tensor> out;
    for (ad::var vv : b.vars) out.push_back(g.grad(vv));
    return out;
  };
  auto vectorize = [](const param_set& ps) {
    std::vector<tensor> out;
    for (std::size_t i = 0; i < ps.size(); ++i) out.push_back(ps.value(i));
    return out;
  };
  auto assign = [](param_set& ps, const std::vector<tensor>& p) {
    for (std::size_t i = 0; i < ps.size(); ++i) ps.value(i) = p[i];
  };

  SECTION("d_loss w.r.t. discriminator parameters") {
    std::vector<tensor> p = vectorize(params.dis);
    auto eval = [&](const std::vector<tensor>& pv) {
      model_params local = params;
      assign(local.dis, pv);
      ad::graph g;
      objective_context ctx = bind_models(g, cfg, local, false, false, false);
      return g.value(obj::discriminator_objective(g, ctx, batch, v))[0];
    };
    ad::graph g;
    objective_context ctx = bind_models(g, cfg, params, false, true, false);
    g.backward(obj::discriminator_objective(g, ctx, batch, v));
    testutil::check_gradients(p, eval, collect(g, ctx.dis), 1e-4, 8);
  }

  SECTION("L_G w.r.t. generator parameters") {
    std::vector<tensor> p = vectorize(params.gen);
    auto eval = [&](const std::vector<tensor>& pv) {
      model_params local = params;
      assign(local.gen, pv);
      ad::graph g;
      objective_context ctx = bind_models(g, cfg, local, false, false, false);
      return g.value(obj::generator_objective(g, ctx, batch, v, w, true))[0];
    };
    ad::graph g;
    objective_context ctx = bind_models(g, cfg, params, true, false, false);
    g.backward(obj::generator_objective(g, ctx, batch, v, w, true));
    testutil::check_gradients(p, eval, collect(g, ctx.gen), 1e-4, 6);
  }

  SECTION("L_C w.r.t. classifier parameters") {
    std::vector<tensor> p = vectorize(params.cls);
    auto eval = [&](const std::vector<tensor>& pv) {
      model_params local = params;
      assign(local.cls, pv);
      ad::graph g;
      objective_context ctx = bind_models(g, cfg, local, false, false, false);
      return g.value(obj::classifier_objective(g, ctx, batch, w))[0];
    };
    ad::graph g;
    objective_context ctx = bind_models(g, cfg, params, false, false, true);
    g.backward(obj::classifier_objective(g, ctx, batch, w));
    testutil::check_gradients(p, eval, collect(g, ctx.cls), 1e-4, 8);
  }

  SECTION("st_adv g_loss w.r.t. generator parameters") {
    const objective_variant sv = objective_variant::st_adv;
    model_config scfg = tiny_models(sv);
    model_params sparams = init_for(scfg, sv, 29);
    std::vector<tensor> p = vectorize(sparams.gen);
    auto eval = [&](const std::vector<tensor>& pv) {
      model_params local = sparams;
      assign(local.gen, pv);
      ad::graph g;
      objective_context ctx = bind_models(g, scfg, local, false, false, false);
      return g.value(obj::st_adv_loss(g, ctx, batch).g_loss)[0];
    };
    ad::graph g;
    objective_context ctx = bind_models(g, scfg, sparams, true, false, false);
    g.backward(obj::st_adv_loss(g, ctx, batch).g_loss);
    testutil::check_gradients(p, eval, collect(g, ctx.gen), 1e-4, 6);
  }
}
