#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "vcstar/feature_io.hpp"
#include "vcstar/metrics.hpp"
#include "vcstar/synthetic.hpp"
#include "vcstar/training.hpp"

namespace vcstar::cli {

namespace fs = std::filesystem;

// Verbosity from VCSTAR_LOG: 0 quiet, 1 info (default), 2 debug.
class logger {
 public:
  static logger from_env() {
    logger l;
    if (const char* env = std::getenv("VCSTAR_LOG")) {
      const std::string v = env;
      if (v == "0" || v == "quiet") l.level_ = 0;
      else if (v == "2" || v == "debug") l.level_ = 2;
    }
    return l;
  }

  void info(const std::string& msg) const {
    if (level_ >= 1) std::fprintf(stderr, "[vcstar] %s\n", msg.c_str());
  }
  void debug(const std::string& msg) const {
    if (level_ >= 2) std::fprintf(stderr, "[vcstar:debug] %s\n", msg.c_str());
  }

 private:
  int level_ = 1;
};

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
  io_detail::write_file(path, text);
}

inline nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(io_detail::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw data_error("malformed JSON in " + path.string() + ": " + e.what());
  }
}

// Every command leaves an audit manifest: what ran, with which configuration
// hash and seed. No timestamps, so identical runs produce identical trees.
inline void write_manifest(const fs::path& dir, const std::string& command,
                           const nlohmann::json& config,
                           std::uint64_t seed,
                           const std::vector<std::string>& args) {
  nlohmann::json m;
  m["command"] = command;
  m["config_hash"] = hex64(fnv1a(config.dump()));
  m["seed"] = seed;
  m["version"] = std::string(version);
  m["args"] = args;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

inline void ensure_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw data_error("cannot create output directory: " + dir.string());
}

struct loaded_corpus {
  domain_corpus data;
  std::map<int, speaker_stats> stats;
  int n_domains = 0;
  std::size_t q = 0;
  bool parallel = false;
};

inline loaded_corpus load_corpus_dir(const fs::path& dir) {
  const fs::path meta_path = dir / "corpus.json";
  if (!fs::exists(meta_path))
    throw data_error("no corpus.json in " + dir.string() +
                     " (generate data with `vcstar synthdata`)");
  const nlohmann::json meta = read_json(meta_path);
  loaded_corpus out;
  try {
    out.parallel = meta.value("parallel", false);
    for (const auto& [key, files] : meta.at("files").items()) {
      const int domain = std::stoi(key);
      for (const auto& rel : files)
        out.data[domain].push_back(feature_io_load(dir / rel.get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw data_error("malformed corpus.json: " + std::string(e.what()));
  }
  if (out.data.size() < 2) throw data_error("corpus has fewer than 2 domains");
  out.n_domains = static_cast<int>(out.data.size());
  out.q = out.data.begin()->second.at(0).q;
  for (const auto& [domain, seqs] : out.data) {
    const fs::path stats_path = dir / "stats" / ("domain_" + std::to_string(domain) + ".json");
    out.stats[domain] = fs::exists(stats_path) ? stats_load(stats_path)
                                               : compute_speaker_stats(seqs);
  }
  return out;
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// synthdata: deterministic multi-domain corpus with parallel ground truth
// ---------------------------------------------------------------------------
inline int cmd_synthdata(const fs::path& out_dir, int domains, int utterances,
                         std::size_t frames, std::size_t q, std::uint64_t seed,
                         const std::vector<std::string>& args, const logger& log) {
  detail::ensure_out_dir(out_dir);
  const auto corpus = synth_corpus(domains, utterances, frames, seed, q);
  nlohmann::json files;
  for (const auto& [domain, seqs] : corpus.by_domain) {
    const fs::path ddir = out_dir / ("domain_" + std::to_string(domain));
    detail::ensure_out_dir(ddir);
    std::vector<std::string> rels;
    for (std::size_t u = 0; u < seqs.size(); ++u) {
      char name[32];
      std::snprintf(name, sizeof(name), "utt_%03zu.vcf", u);
      feature_meta meta;
      meta.speaker = "domain_" + std::to_string(domain);
      meta.provenance = "synthdata seed=" + std::to_string(seed);
      feature_io_save(seqs[u], ddir / name, meta);
      rels.push_back("domain_" + std::to_string(domain) + "/" + name);
    }
    files[std::to_string(domain)] = rels;
  }
  detail::ensure_out_dir(out_dir / "stats");
  for (const auto& [domain, seqs] : corpus.by_domain)
    stats_save(compute_speaker_stats(seqs),
               out_dir / "stats" / ("domain_" + std::to_string(domain) + ".json"));
  nlohmann::json meta;
  meta["n_domains"] = domains;
  meta["n_utterances"] = utterances;
  meta["frames"] = frames;
  meta["q"] = q;
  meta["seed"] = seed;
  meta["parallel"] = true;
  meta["files"] = files;
  detail::write_text(out_dir / "corpus.json", meta.dump(2) + "\n");
  detail::write_manifest(out_dir, "synthdata", meta, seed, args);
  log.info("wrote " + std::to_string(domains) + " domains x " +
           std::to_string(utterances) + " utterances to " + out_dir.string());
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------
inline int cmd_train(const fs::path& data_dir, const fs::path& out_dir,
                     training_config cfg, const fs::path& resume_path,
                     const std::vector<std::string>& args, const logger& log) {
  detail::ensure_out_dir(out_dir);
  const auto corpus = detail::load_corpus_dir(data_dir);

  train_state state;
  bool resuming = false;
  if (!resume_path.empty()) {
    auto loaded = checkpoint_load(resume_path);
    const std::int64_t target_iterations = cfg.iterations;
    cfg = loaded.config;
    cfg.iterations = target_iterations;
    state = std::move(loaded.state);
    resuming = true;
    log.info("resuming from iteration " + std::to_string(state.iteration));
  } else {
    // The data defines the domain count and feature dimensionality.
    cfg.n_domains = corpus.n_domains;
    cfg.q = corpus.q;
    state = init_train_state(cfg);
  }
  cfg.validate();
  if (cfg.n_domains != corpus.n_domains || cfg.q != corpus.q)
    throw data_error("checkpoint/config dimensions do not match the corpus");

  detail::write_text(out_dir / "config.json", to_json(cfg).dump(2) + "\n");
  detail::write_manifest(out_dir, "train", to_json(cfg), cfg.seed, args);

  const fs::path loss_path = out_dir / "loss.csv";
  std::ofstream loss_file;
  if (resuming && fs::exists(loss_path)) {
    loss_file.open(loss_path, std::ios::app);
  } else {
    loss_file.open(loss_path, std::ios::trunc);
    loss_file << loss_csv_header(cfg);
  }
  if (!loss_file) throw data_error("cannot write " + loss_path.string());

  train_callbacks cb;
  cb.on_row = [&loss_file](const loss_row& r) { loss_file << loss_csv_line(r); };
  cb.on_checkpoint = [&](const train_state& st, std::int64_t it) {
    checkpoint_save(st, cfg, out_dir / ("ckpt_" + std::to_string(it) + ".ckpt"));
  };
  cb.on_abort = [&](const train_state& st) {
    checkpoint_save(st, cfg, out_dir / "abort_snapshot.ckpt");
    log.info("numerical abort; diagnostic snapshot written");
  };

  train_state final_state = train_loop(corpus.data, cfg, cb, resuming ? &state : nullptr);
  checkpoint_save(final_state, cfg, out_dir / "final.ckpt");
  loss_file.flush();
  log.info("trained to iteration " + std::to_string(final_state.iteration));
  return 0;
}

// ---------------------------------------------------------------------------
// convert
// ---------------------------------------------------------------------------
inline int cmd_convert(const fs::path& model_path, const fs::path& input_path,
                       const fs::path& output_path, int source, int target,
                       const fs::path& stats_dir, const std::vector<std::string>& args,
                       const logger& log) {
  auto loaded = checkpoint_load(model_path);
  const model_config mc = loaded.config.make_model_config();
  auto load_stats = [&](int domain) {
    const fs::path p = stats_dir / "stats" / ("domain_" + std::to_string(domain) + ".json");
    if (!fs::exists(p)) throw data_error("no speaker stats for domain " +
                                         std::to_string(domain) + " under " +
                                         stats_dir.string());
    return stats_load(p);
  };
  check_pair(mc.gen.n_domains, {source, target});
  const speaker_stats src_stats = load_stats(source);
  const speaker_stats tgt_stats = load_stats(target);
  const feature_sequence x = feature_io_load(input_path);
  const feature_sequence y = convert_sequence(mc, loaded.state.models.gen, src_stats,
                                              tgt_stats, x, source, target);
  feature_meta meta;
  meta.speaker = "domain_" + std::to_string(target);
  meta.provenance = "convert " + std::to_string(source) + "->" + std::to_string(target);
  feature_io_save(y, output_path, meta);

  if (source == target) {
    double l1 = 0.0;
    for (std::size_t i = 0; i < x.mcep.size(); ++i) l1 += std::abs(x.mcep[i] - y.mcep[i]);
    l1 /= static_cast<double>(x.mcep.size());
    log.info("identity conversion mean L1 distance: " + detail::fmt_double(l1));
  }
  nlohmann::json cfg_json = {{"model", model_path.string()},
                             {"source", source},
                             {"target", target}};
  nlohmann::json m;
  m["command"] = "convert";
  m["config_hash"] = hex64(fnv1a(cfg_json.dump()));
  m["seed"] = loaded.config.seed;
  m["version"] = std::string(version);
  m["args"] = args;
  detail::write_text(output_path.string() + ".manifest.json", m.dump(2) + "\n");
  log.info("wrote " + output_path.string());
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------
inline int cmd_evaluate(const fs::path& model_path, const fs::path& data_dir,
                        const fs::path& out_dir, bool oracle,
                        const std::vector<std::string>& args, const logger& log) {
  detail::ensure_out_dir(out_dir);
  const auto corpus = detail::load_corpus_dir(data_dir);
  if (!corpus.parallel)
    throw data_error("evaluation corpus has no parallel ground truth");

  metrics::eval_report report;
  nlohmann::json cfg_json;
  std::uint64_t seed = 0;
  if (oracle) {
    // Ground-truth lookup converter: a correctness oracle for the harness.
    std::map<int, std::map<std::string, std::size_t>> index;
    for (const auto& [domain, seqs] : corpus.data)
      for (std::size_t u = 0; u < seqs.size(); ++u)
        index[domain][seqs[u].ap_ref] = u;
    metrics::convert_fn fn = [&](const feature_sequence& x, int src, int tgt) {
      return corpus.data.at(tgt).at(index.at(src).at(x.ap_ref));
    };
    report = metrics::evaluate_corpus(corpus.data, fn);
    cfg_json = {{"mode", "oracle"}};
  } else {
    if (model_path.empty()) throw usage_error("evaluate: --model or --oracle required");
    auto loaded = checkpoint_load(model_path);
    seed = loaded.config.seed;
    report = evaluate_trained(corpus.data, loaded.config.make_model_config(),
                              loaded.state.models.gen, corpus.stats);
    cfg_json = {{"mode", "model"}, {"model", model_path.string()}};
  }
  detail::write_text(out_dir / "eval.csv", metrics::to_csv(report));
  detail::write_text(out_dir / "eval.json", metrics::to_json(report).dump(2) + "\n");
  detail::write_manifest(out_dir, "evaluate", cfg_json, seed, args);
  log.info("MCD " + detail::fmt_double(report.mcd_mean) + " dB, MSD " +
           detail::fmt_double(report.msd_mean) + " dB over " +
           std::to_string(report.count) + " conversions");
  return 0;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------
inline int cmd_ablate(const fs::path& data_dir, const fs::path& out_dir,
                      ablation_axis axis, training_config base,
                      const std::vector<std::string>& args, const logger& log) {
  detail::ensure_out_dir(out_dir);
  const auto corpus = detail::load_corpus_dir(data_dir);
  if (!corpus.parallel)
    throw data_error("ablation corpus has no parallel ground truth");
  base.n_domains = corpus.n_domains;
  base.q = corpus.q;
  base.validate();

  auto progress = [&log](const std::string& label, std::uint64_t seed) {
    log.info("ablation: training " + label + " seed " + std::to_string(seed));
  };
  const auto rows = ablation_run(corpus.data, base, axis, progress);

  detail::write_text(out_dir / "ablation.csv", ablation_csv(rows));
  detail::write_text(out_dir / "ablation.json",
                     ablation_json(rows, axis).dump(2) + "\n");
  // Bar-chart data: one file per metric, consumable by any plotting tool.
  std::string mcd_csv = "label,value,err\n", msd_csv = "label,value,err\n";
  for (const auto& r : rows) {
    mcd_csv += r.label + "," + detail::fmt_double(r.mcd_mean) + "," +
               detail::fmt_double(r.mcd_std) + "\n";
    msd_csv += r.label + "," + detail::fmt_double(r.msd_mean) + "," +
               detail::fmt_double(r.msd_std) + "\n";
  }
  detail::write_text(out_dir / "plot_mcd.csv", mcd_csv);
  detail::write_text(out_dir / "plot_msd.csv", msd_csv);
  detail::write_manifest(out_dir, "ablate", to_json(base), base.seed, args);
  log.info("wrote ablation report with " + std::to_string(rows.size()) + " variants");
  return 0;
}

// ---------------------------------------------------------------------------
// argument parsing and dispatch
// ---------------------------------------------------------------------------
inline int run(int argc, char** argv) {
  const logger log = logger::from_env();
  std::vector<std::string> args(argv, argv + argc);

  CLI::App app{"Non-parallel multi-domain voice conversion workbench"};
  app.require_subcommand(1);
  app.fallthrough(true);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  app.add_option("--config", config_path, "training config JSON")->expected(1);
  app.add_option("--out", out_dir, "output directory")->expected(1);
  app.add_option("--seed", seed, "seed override")
      ->expected(1)
      ->each([&seed_set](const std::string&) { seed_set = true; });

  // synthdata
  auto* synth = app.add_subcommand("synthdata", "generate a synthetic corpus");
  int sd_domains = 4, sd_utts = 8;
  std::size_t sd_frames = 192, sd_q = 8;
  synth->add_option("--domains", sd_domains, "number of domains");
  synth->add_option("--utterances", sd_utts, "utterances per domain");
  synth->add_option("--frames", sd_frames, "frames per utterance");
  synth->add_option("--q", sd_q, "cepstral dimensions");

  // train
  auto* train = app.add_subcommand("train", "train a conversion model");
  std::string tr_data, tr_resume, tr_preset, tr_variant, tr_conditioning;
  std::int64_t tr_iterations = -1;
  train->add_option("--data", tr_data, "corpus directory")->required();
  train->add_option("--resume", tr_resume, "checkpoint to resume from");
  train->add_option("--preset", tr_preset, "desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  train->add_option("--iterations", tr_iterations, "iteration override");
  train->add_option("--variant", tr_variant,
                    "objective: cls_only|t_adv|t_adv_plus_cls|st_adv");
  train->add_option("--conditioning", tr_conditioning,
                    "generator conditioning: modulation_based|channel_wise");

  // convert
  auto* convert = app.add_subcommand("convert", "convert one feature file");
  std::string cv_model, cv_input, cv_output, cv_stats;
  int cv_source = 0, cv_target = 0;
  convert->add_option("--model", cv_model, "trained checkpoint")->required();
  convert->add_option("--input", cv_input, "input feature file")->required();
  convert->add_option("--output", cv_output, "output feature file")->required();
  convert->add_option("--source", cv_source, "source domain code")->required();
  convert->add_option("--target", cv_target, "target domain code")->required();
  convert->add_option("--stats", cv_stats, "corpus directory with speaker stats")
      ->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score conversions against ground truth");
  std::string ev_model, ev_data;
  bool ev_oracle = false;
  evaluate->add_option("--model", ev_model, "trained checkpoint");
  evaluate->add_option("--data", ev_data, "corpus directory")->required();
  evaluate->add_flag("--oracle", ev_oracle, "use the ground-truth lookup converter");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "run the comparison protocol");
  std::string ab_data, ab_axis = "objective", ab_preset;
  std::int64_t ab_iterations = -1;
  ablate->add_option("--data", ab_data, "corpus directory")->required();
  ablate->add_option("--axis", ab_axis, "objective or conditioning")
      ->check(CLI::IsMember({"objective", "conditioning"}));
  ablate->add_option("--preset", ab_preset, "desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  ablate->add_option("--iterations", ab_iterations, "iteration override");

  try {
    app.parse(argc, argv);

    auto resolve_config = [&](const std::string& preset) {
      if (!config_path.empty() && !preset.empty())
        throw usage_error("choose either --config or --preset, not both");
      training_config cfg;
      if (!config_path.empty())
        cfg = training_config_from_json(detail::read_json(config_path));
      else if (preset == "paper")
        cfg = training_config::paper_preset();
      else
        cfg = training_config::desk_preset();
      if (seed_set) cfg.seed = seed;
      return cfg;
    };
    auto require_out = [&] {
      if (out_dir.empty()) throw usage_error("--out is required");
      return fs::path(out_dir);
    };

    if (synth->parsed()) {
      return cmd_synthdata(require_out(), sd_domains, sd_utts, sd_frames, sd_q,
                           seed_set ? seed : 1, args, log);
    }
    if (train->parsed()) {
      training_config cfg = resolve_config(tr_preset);
      if (tr_iterations >= 0) cfg.iterations = tr_iterations;
      if (!tr_variant.empty()) cfg.variant = objective_variant_from_string(tr_variant);
      if (!tr_conditioning.empty())
        cfg.conditioning = conditioning_mode_from_string(tr_conditioning);
      return cmd_train(tr_data, require_out(), cfg, tr_resume, args, log);
    }
    if (convert->parsed()) {
      return cmd_convert(cv_model, cv_input, cv_output, cv_source, cv_target,
                         cv_stats, args, log);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(ev_model, ev_data, require_out(), ev_oracle, args, log);
    }
    if (ablate->parsed()) {
      training_config cfg = resolve_config(ab_preset);
      if (ab_iterations >= 0) cfg.iterations = ab_iterations;
      return cmd_ablate(ab_data, require_out(), ablation_axis_from_string(ab_axis),
                        cfg, args, log);
    }
    throw usage_error("no subcommand given");
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const usage_error& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const numeric_error& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace vcstar::cli
