// stlenc: command-line entry point for the STL kernel distillation pipeline.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "stlenc/bench.hpp"
#include "stlenc/config.hpp"
#include "stlenc/probe.hpp"
#include "stlenc/trainer.hpp"

namespace fs = std::filesystem;
using namespace stlenc;

namespace {

/// A subcommand whose every parameter lives in one or more bindings. Each key
/// becomes a --flag; config files are applied first and flags override them.
struct Command {
  explicit Command(CLI::App* a) : app(a) {}

  CLI::App* app = nullptr;
  std::vector<ConfigBinding*> bindings;
  std::map<std::string, std::string> flags;  // key -> value given on the command line
  std::vector<std::string> flag_order;

  void expose(ConfigBinding& b) {
    bindings.push_back(&b);
    for (const auto& key : b.keys()) {
      if (flags.count(key)) continue;
      std::string name = "--" + key;
      std::replace(name.begin(), name.end(), '_', '-');
      flags[key];
      flag_order.push_back(key);
      app->add_option(name, flags[key], "default: " + b.get(key));
    }
  }

  /// Applies command-line values (after any config files) to every binding that owns the key.
  void resolve() {
    for (const auto& key : flag_order) {
      const auto* opt = app->get_option("--" + dashed(key));
      if (opt->count() == 0) continue;
      for (auto* b : bindings) {
        if (b->has(key)) b->set(key, flags[key], "command line");
      }
    }
  }

  static std::string dashed(std::string k) {
    std::replace(k.begin(), k.end(), '_', '-');
    return k;
  }
};

void log_resolved(const std::string& name, const std::vector<const ConfigBinding*>& bindings) {
  std::string line;
  std::set<std::string> seen;
  for (const auto* b : bindings) {
    for (const auto& k : b->keys()) {
      if (!seen.insert(k).second) continue;
      line += " " + k + "=" + b->get(k);
    }
  }
  std::cerr << "resolved " << name << ":" << line << '\n';
}

void require_path(const std::string& value, const std::string& flag) {
  if (value.empty()) throw Error(ErrorKind::config, "missing required option --" + flag);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write: " + path);
  out << text;
  if (!out) throw Error(ErrorKind::io, "write failed: " + path);
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::vector<Formula> dataset_formulae(const std::string& path) { return formulae_of(load_dataset(path)); }

void check_grid(const std::vector<Formula>& formulae, const TrajectorySet& set) {
  for (std::size_t i = 0; i < formulae.size(); ++i) {
    try {
      check_horizon(formulae[i], set.points, set.horizon);
    } catch (const Error& e) {
      throw Error(e.kind(), "formula " + std::to_string(i) + ": " + e.what());
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stlenc: distill the STL robustness kernel into a neural encoder"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "worker threads (0: all cores)");

  // ---- gen-signals ----
  struct {
    std::size_t n = 1000;
    std::size_t points = 101;
    std::size_t vars = 3;
    double horizon = 100.0;
    std::uint64_t seed = 0;
    std::string out;
  } sig;
  ConfigBinding sig_b;
  sig_b.bind("n", sig.n).bind("points", sig.points).bind("vars", sig.vars).bind("horizon", sig.horizon)
      .bind("seed", sig.seed).bind("out", sig.out);
  Command gen_signals{app.add_subcommand("gen-signals", "sample trajectories from mu0 into a cache file")};
  gen_signals.expose(sig_b);

  // ---- gen-dataset ----
  AugmentConfig aug;
  struct {
    std::string seeds_file = STLENC_DATA_DIR "/seeds.stl";
    std::size_t total = 2000;
    std::string config;
    std::string out;
  } ds;
  ConfigBinding ds_b, aug_b;
  ds_b.bind("seeds_file", ds.seeds_file).bind("total", ds.total).bind("out", ds.out);
  bind_augment(aug_b, aug);
  Command gen_dataset{app.add_subcommand("gen-dataset", "build a stratified formula corpus from seed formulae")};
  gen_dataset.app->add_option("--config", ds.config, "key=value augmentation config file");
  gen_dataset.expose(ds_b);
  gen_dataset.expose(aug_b);

  // ---- kernel ----
  struct {
    std::string dataset, signals, out, csv;
    double sigma2 = kDefaultSigma2;
  } ker;
  ConfigBinding ker_b;
  ker_b.bind("dataset", ker.dataset).bind("signals", ker.signals).bind("sigma2", ker.sigma2).bind("out", ker.out)
      .bind("csv", ker.csv);
  Command kernel_cmd{app.add_subcommand("kernel", "Gram matrix of a dataset (binary cache + CSV)")};
  kernel_cmd.expose(ker_b);

  // ---- train ----
  EncoderConfig enc_cfg;
  TrainConfig train_cfg;
  struct {
    std::string dataset, signals, encoder_config, train_config, out_dir;
  } tr;
  ConfigBinding tr_b, enc_b, trc_b;
  tr_b.bind("dataset", tr.dataset).bind("signals", tr.signals).bind("out_dir", tr.out_dir);
  bind_encoder(enc_b, enc_cfg);
  bind_train(trc_b, train_cfg);
  Command train_cmd{app.add_subcommand("train", "distill the kernel into an encoder")};
  train_cmd.app->add_option("--encoder-config", tr.encoder_config, "key=value encoder config file");
  train_cmd.app->add_option("--train-config", tr.train_config, "key=value training config file");
  train_cmd.expose(tr_b);
  train_cmd.expose(enc_b);
  train_cmd.expose(trc_b);

  // ---- embed ----
  struct {
    std::string model, dataset, out;
  } emb;
  ConfigBinding emb_b;
  emb_b.bind("model", emb.model).bind("dataset", emb.dataset).bind("out", emb.out);
  Command embed_cmd{app.add_subcommand("embed", "embed every formula of a dataset")};
  embed_cmd.expose(emb_b);

  // ---- similarity ----
  struct {
    std::string embeddings, out, kernel;
  } sim;
  ConfigBinding sim_b;
  sim_b.bind("embeddings", sim.embeddings).bind("out", sim.out).bind("kernel", sim.kernel);
  Command sim_cmd{app.add_subcommand("similarity", "pairwise cosine similarity of embeddings (CSV)")};
  sim_cmd.expose(sim_b);

  // ---- gen-pairs ----
  PairMiningConfig pm;
  struct {
    std::string dataset, signals, out;
  } gp;
  ConfigBinding gp_b;
  gp_b.bind("dataset", gp.dataset).bind("signals", gp.signals).bind("out", gp.out)
      .bind("per_category", pm.per_category).bind("hard_negative_max_kernel", pm.hard_negative_max_kernel)
      .bind("non_equivalent_max_kernel", pm.non_equivalent_max_kernel).bind("sigma2", pm.sigma2).bind("seed", pm.seed);
  Command gen_pairs{app.add_subcommand("gen-pairs", "mine equivalent / non-equivalent / lexically similar pairs")};
  gen_pairs.expose(gp_b);

  // ---- eval-agreement ----
  struct {
    std::string model, pairs, signals, out;
    double sigma2 = kDefaultSigma2;
  } ag;
  ConfigBinding ag_b;
  ag_b.bind("model", ag.model).bind("pairs", ag.pairs).bind("signals", ag.signals).bind("out", ag.out)
      .bind("sigma2", ag.sigma2);
  Command agree_cmd{app.add_subcommand("eval-agreement", "semantic agreement of encoder and kernel on formula pairs")};
  agree_cmd.expose(ag_b);

  // ---- probe ----
  ProbeConfig probe_cfg;
  struct {
    std::string model, gram, dataset, signals, target = "satisfaction", out;
    std::size_t anchors = 256;
  } pr;
  ConfigBinding pr_b, prc_b;
  pr_b.bind("model", pr.model).bind("gram", pr.gram).bind("dataset", pr.dataset).bind("signals", pr.signals)
      .bind("target", pr.target).bind("anchors", pr.anchors).bind("out", pr.out);
  bind_probe(prc_b, probe_cfg);
  Command probe_cmd{app.add_subcommand("probe", "regress robustness / satisfaction from frozen features")};
  probe_cmd.expose(pr_b);
  probe_cmd.expose(prc_b);

  // ---- invert-nn ----
  struct {
    std::string model, corpus, query;
    std::size_t top_k = 5;
  } nn;
  ConfigBinding nn_b;
  nn_b.bind("model", nn.model).bind("corpus", nn.corpus).bind("query", nn.query).bind("top_k", nn.top_k);
  Command nn_cmd{app.add_subcommand("invert-nn", "nearest corpus formulae to a query formula")};
  nn_cmd.expose(nn_b);

  // ---- bench ----
  BenchConfig bench_cfg;
  struct {
    std::string phase, grid = "B=100,200;N=100,400,1600", dataset, model, out, config;
  } bn;
  ConfigBinding bn_b, bnc_b;
  bn_b.bind("grid", bn.grid).bind("dataset", bn.dataset).bind("model", bn.model).bind("out", bn.out);
  bind_bench(bnc_b, bench_cfg);
  Command bench_cmd{app.add_subcommand("bench", "time the kernel against the encoder over a B x N grid")};
  bench_cmd.app->add_option("phase", bn.phase, "embed | similarity")->required();
  bench_cmd.app->add_option("--config", bn.config, "key=value bench config file");
  bench_cmd.expose(bn_b);
  bench_cmd.expose(bnc_b);

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      throw Error(ErrorKind::config, e.what());
    }
    set_num_threads(threads);

    if (*gen_signals.app) {
      gen_signals.resolve();
      log_resolved("gen-signals", {&sig_b});
      require_path(sig.out, "out");
      ensure_parent(sig.out);
      save_trajectories(sample_mu0(sig.n, sig.points, sig.vars, sig.horizon, sig.seed), sig.out);
    } else if (*gen_dataset.app) {
      if (!ds.config.empty()) aug_b.apply(read_key_values(ds.config), ds.config);
      gen_dataset.resolve();
      log_resolved("gen-dataset", {&ds_b, &aug_b});
      require_path(ds.out, "out");
      aug.validate();
      const auto seeds = load_seed_file(ds.seeds_file, aug.num_vars);
      const auto records = build_dataset(seeds, ds.total, aug);
      ensure_parent(ds.out);
      save_dataset(records, ds.out);
    } else if (*kernel_cmd.app) {
      kernel_cmd.resolve();
      log_resolved("kernel", {&ker_b});
      require_path(ker.dataset, "dataset");
      require_path(ker.signals, "signals");
      require_path(ker.out, "out");
      const auto records = load_dataset(ker.dataset);
      const auto set = load_trajectories(ker.signals);
      std::vector<std::int64_t> ids;
      for (const auto& r : records) ids.push_back(r.id);
      const GramMatrix g = gram(formulae_of(records), set, ker.sigma2, ids);
      ensure_parent(ker.out);
      save_gram(g, ker.out);
      write_matrix_csv(g.values, ker.csv.empty() ? fs::path(ker.out).replace_extension(".csv").string() : ker.csv);
    } else if (*train_cmd.app) {
      if (!tr.encoder_config.empty()) enc_b.apply(read_key_values(tr.encoder_config), tr.encoder_config);
      if (!tr.train_config.empty()) trc_b.apply(read_key_values(tr.train_config), tr.train_config);
      train_cmd.resolve();
      log_resolved("train", {&tr_b, &enc_b, &trc_b});
      require_path(tr.dataset, "dataset");
      require_path(tr.signals, "signals");
      require_path(tr.out_dir, "out-dir");
      enc_cfg.validate();
      train_cfg.validate();
      const auto records = load_dataset(tr.dataset);
      const auto set = load_trajectories(tr.signals);
      check_grid(formulae_of(records), set);
      fs::create_directories(tr.out_dir);
      write_text(tr.out_dir + "/encoder.cfg", enc_b.dump());
      write_text(tr.out_dir + "/train.cfg", trc_b.dump());
      const TrainResult res = train(records, set, enc_cfg, train_cfg, TrainOutputs{tr.out_dir}, [](const MetricRow& r) {
        if (r.split == "val") std::cerr << format_metric_row(r) << '\n';
      });
      std::vector<DatasetRecord> val;
      for (std::size_t i : res.split.val) val.push_back(records[i]);
      save_dataset(val, tr.out_dir + "/val.jsonl");
      std::cout << "steps " << res.steps << " best_val_alignment " << res.best_val_alignment << '\n';
    } else if (*embed_cmd.app) {
      embed_cmd.resolve();
      log_resolved("embed", {&emb_b});
      require_path(emb.model, "model");
      require_path(emb.dataset, "dataset");
      require_path(emb.out, "out");
      const auto enc = load_encoder<float>(emb.model);
      const auto formulae = dataset_formulae(emb.dataset);
      ensure_parent(emb.out);
      save_embeddings(enc.embed(formulae), emb.out);
    } else if (*sim_cmd.app) {
      sim_cmd.resolve();
      log_resolved("similarity", {&sim_b});
      require_path(sim.embeddings, "embeddings");
      require_path(sim.out, "out");
      const Eigen::MatrixXd E = load_embeddings(sim.embeddings).cast<double>();
      const Eigen::MatrixXd S = E * E.transpose();
      ensure_parent(sim.out);
      write_matrix_csv(S, sim.out);
      if (!sim.kernel.empty()) {
        const Eigen::MatrixXd K = fs::path(sim.kernel).extension() == ".csv" ? read_matrix_csv(sim.kernel)
                                                                             : load_gram(sim.kernel).values;
        std::printf("alignment %.17g\nuniformity %.17g\n", kernel_alignment(K, S), uniformity(E));
      }
    } else if (*gen_pairs.app) {
      gen_pairs.resolve();
      log_resolved("gen-pairs", {&gp_b});
      require_path(gp.dataset, "dataset");
      require_path(gp.signals, "signals");
      require_path(gp.out, "out");
      AugmentConfig pair_aug;
      pair_aug.seed = pm.seed;
      const auto set = load_trajectories(gp.signals);
      const auto pairs = make_agreement_pairs(dataset_formulae(gp.dataset), set, pair_aug, pm);
      ensure_parent(gp.out);
      save_pairs(pairs, gp.out);
    } else if (*agree_cmd.app) {
      agree_cmd.resolve();
      log_resolved("eval-agreement", {&ag_b});
      require_path(ag.model, "model");
      require_path(ag.pairs, "pairs");
      require_path(ag.signals, "signals");
      const auto enc = load_encoder<float>(ag.model);
      const AgreementReport rep = agreement_eval(enc, load_pairs(ag.pairs), load_trajectories(ag.signals), ag.sigma2);
      std::cout << format_table(rep);
      if (!ag.out.empty()) {
        ensure_parent(ag.out);
        write_text(ag.out, to_json(rep).dump(2) + "\n");
      }
    } else if (*probe_cmd.app) {
      probe_cmd.resolve();
      log_resolved("probe", {&pr_b, &prc_b});
      if (pr.model.empty() == pr.gram.empty()) throw Error(ErrorKind::config, "probe needs exactly one of --model or --gram");
      require_path(pr.dataset, "dataset");
      require_path(pr.signals, "signals");
      const ProbeTarget target = parse_target(pr.target);
      const auto formulae = dataset_formulae(pr.dataset);
      const auto set = load_trajectories(pr.signals);
      const ProbeTargets targets = compute_targets(formulae, set);
      const ProbeSplit split = probe_split(formulae.size(), probe_cfg.test_fraction, probe_cfg.seed);
      Eigen::MatrixXd features;
      if (!pr.model.empty()) {
        features = load_encoder<float>(pr.model).embed(formulae).cast<double>();
      } else {
        const GramMatrix g = load_gram(pr.gram);
        if (g.size() != static_cast<Eigen::Index>(formulae.size())) {
          throw Error(ErrorKind::validation, "Gram cache has " + std::to_string(g.size()) + " rows but the dataset has " +
                                                 std::to_string(formulae.size()) + " formulae");
        }
        const std::size_t a = std::min(pr.anchors, split.train.size());
        features.resize(g.size(), static_cast<Eigen::Index>(a));
        for (std::size_t j = 0; j < a; ++j) features.col(static_cast<Eigen::Index>(j)) = g.values.col(static_cast<Eigen::Index>(split.train[j]));
      }
      ProbeReport rep = train_probe(
          features, target == ProbeTarget::avg_robustness ? targets.avg_robustness : targets.sat_probability, split, probe_cfg);
      rep.target = target;
      rep.source = pr.model.empty() ? FeatureSource::kernel : FeatureSource::neural;
      std::cout << format_table(rep);
      if (!pr.out.empty()) {
        ensure_parent(pr.out);
        write_text(pr.out, to_json(rep).dump(2) + "\n");
      }
    } else if (*nn_cmd.app) {
      nn_cmd.resolve();
      log_resolved("invert-nn", {&nn_b});
      require_path(nn.model, "model");
      require_path(nn.corpus, "corpus");
      require_path(nn.query, "query");
      const auto enc = load_encoder<float>(nn.model);
      const auto corpus = dataset_formulae(nn.corpus);
      const Eigen::MatrixXd E = enc.embed(corpus).cast<double>();
      const Eigen::RowVectorXd q = enc.embed(std::vector<Formula>{parse(nn.query)}).cast<double>().row(0);
      const auto hits = invert_nn(q, E, nn.top_k);
      for (std::size_t i = 0; i < hits.size(); ++i) {
        std::printf("%zu\t%.6f\t%s\n", i + 1, hits[i].similarity, print(corpus[hits[i].index]).c_str());
      }
    } else if (*bench_cmd.app) {
      if (!bn.config.empty()) bnc_b.apply(read_key_values(bn.config), bn.config);
      bench_cmd.resolve();
      log_resolved("bench", {&bn_b, &bnc_b});
      require_path(bn.dataset, "dataset");
      require_path(bn.out, "out");
      const BenchPhase phase = parse_phase(bn.phase);
      const BenchGrid grid = parse_grid(bn.grid);
      bench_cfg.model_path = bn.model;
      const Encoder<float> enc = bn.model.empty() ? Encoder<float>(EncoderConfig{}) : load_encoder<float>(bn.model);
      const auto records = run_bench(phase, dataset_formulae(bn.dataset), grid, enc, bench_cfg);
      ensure_parent(bn.out);
      write_bench_csv(records, bn.out);
      std::cout << bench_summary(records);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "%s: %s\n", std::string(error_prefix(e.kind())).c_str(), e.what());
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "E_IO: %s\n", e.what());
    return exit_code(ErrorKind::io);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "E_VALIDATION: %s\n", e.what());
    return exit_code(ErrorKind::validation);
  }
  return 0;
}
