#include "crftk/cli.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "crftk/chain.hpp"
#include "crftk/dataio.hpp"
#include "crftk/eval.hpp"
#include "crftk/latent.hpp"
#include "crftk/model_io.hpp"
#include "crftk/optimizer.hpp"
#include "crftk/semimarkov.hpp"
#include "crftk/tree.hpp"
#include "crftk/types.hpp"

namespace crftk {

namespace {

struct TrainArgs {
  std::string kind, data, model;
  int order = 2, max_seg_len = 0, epochs = -1, min_count = 2;
  double l1 = 0, l2 = 0, c = 1e-3, eta0 = 0.1, tol = 1e-6;
  std::uint64_t seed = 1;
  bool bos = false;
};

struct TagArgs {
  std::string model, data, output = "-";
};

struct EvalArgs {
  std::string gold, pred, background = "NON", pos, neg;
};

struct AgreeArgs {
  std::string ann1, ann2, mode = "both";
  int tokens = 0;
};

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void report_progress(double objective, int epochs) {
  std::fprintf(stderr, "objective %.6g after %d epochs\n", objective, epochs);
}

int default_epochs(ModelKind kind, int flag) {
  if (flag > 0) return flag;
  return kind == ModelKind::Latent || kind == ModelKind::LatentMarg ? 1000 : 100;
}

void fit_and_save(Model& m, const Objective& objective, const TrainArgs& a) {
  FitOptions fo;
  fo.max_epochs = default_epochs(m.kind, a.epochs);
  fo.tol = a.tol;
  FitResult fr = fit(objective, std::vector<double>(static_cast<size_t>(m.index.n_features()), 0.0), fo);
  m.weights = std::move(fr.theta);
  save_model(m, a.model);
  report_progress(fr.value, fr.epochs);
}

void cmd_train(const TrainArgs& a) {
  Model m;
  m.kind = kind_from_name(a.kind);
  m.lambda1 = a.l1;
  m.lambda2 = a.l2;

  FeatureTemplates tmpl;
  tmpl.bos = a.bos;

  switch (m.kind) {
    case ModelKind::Chain1:
    case ModelKind::ChainK: {
      ChainCorpus corpus = read_chain_corpus(a.data, true);
      m.labels = corpus.labels;
      m.order = m.kind == ModelKind::ChainK ? a.order : 1;
      m.index = build_feature_index(corpus.instances, m.labels, tmpl, a.min_count, m.order);
      const int order = m.order;
      fit_and_save(m,
                   [&corpus, &m, &a, order](const std::vector<double>& th) {
                     return loglik_gradient(corpus.instances, m.index, th, a.l1, a.l2, order);
                   },
                   a);
      break;
    }
    case ModelKind::SemiMarkov: {
      ChainCorpus corpus = read_chain_corpus(a.data, true);
      m.labels = corpus.labels;

      std::vector<SegmentedInstance> segged;
      int max_run = 1;
      for (const auto& inst : corpus.instances) {
        for (const Segment& s : runs_to_segments(inst.gold))
          max_run = std::max(max_run, s.end - s.start + 1);
      }
      m.max_seg_len = a.max_seg_len > 0 ? a.max_seg_len : max_run;
      for (size_t k = 0; k < corpus.instances.size(); ++k) {
        SegmentLabeling runs = runs_to_segments(corpus.instances[k].gold);
        for (const Segment& s : runs)
          if (s.end - s.start + 1 > m.max_seg_len)
            throw Error("instance " + std::to_string(k + 1) + ": gold segment [" +
                        std::to_string(s.start) + "," + std::to_string(s.end) +
                        "] exceeds --max-seg-len " + std::to_string(m.max_seg_len));
        segged.push_back({corpus.instances[k], std::move(runs)});
      }

      tmpl.seg_length = true;
      m.index = build_segment_feature_index(corpus.instances, m.labels, tmpl,
                                            a.min_count, m.max_seg_len);
      const int L = m.max_seg_len;
      fit_and_save(m,
                   [&segged, &m, &a, L](const std::vector<double>& th) {
                     return sm_loglik_gradient(segged, m.index, th, a.l1, a.l2, L);
                   },
                   a);
      break;
    }
    case ModelKind::Tree: {
      TreeCorpus corpus = read_tree_corpus(a.data);
      m.labels = corpus.labels;
      m.index = build_feature_index(corpus.instances, m.labels, tmpl, a.min_count);
      fit_and_save(m,
                   [&corpus, &m, &a](const std::vector<double>& th) {
                     return tree_loglik_gradient(corpus.instances, m.index, th, a.l1, a.l2);
                   },
                   a);
      break;
    }
    case ModelKind::Latent:
    case ModelKind::LatentMarg: {
      TreeCorpus corpus = read_tree_corpus(a.data);
      m.labels = corpus.labels;
      m.index = build_feature_index(corpus.instances, m.labels, tmpl, a.min_count);

      LatentObjectiveConfig cfg;
      cfg.mode = m.kind == ModelKind::Latent ? LatentMode::MaxMargin : LatentMode::Marginalized;
      cfg.c = a.c;
      cfg.epochs = default_epochs(m.kind, a.epochs);
      cfg.eta0 = a.eta0;
      cfg.tol = a.tol;
      cfg.seed = a.seed;
      m.lambda2 = a.c;  // the quadratic coefficient doubles as lambda2 here

      LatentTrainResult r = train_latent(corpus.instances, m.index, cfg);
      m.weights = std::move(r.weights);
      save_model(m, a.model);
      report_progress(r.objective.empty() ? 0.0 : r.objective.back(), r.epochs_run);
      break;
    }
  }
}

void write_output(const std::string& path, const std::string& content) {
  if (path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
}

void cmd_tag(const TagArgs& a) {
  Model m = load_model(a.model);
  std::ostringstream out;

  switch (m.kind) {
    case ModelKind::Chain1:
    case ModelKind::ChainK:
    case ModelKind::SemiMarkov: {
      ChainCorpus corpus = read_chain_corpus(a.data, false);
      for (size_t k = 0; k < corpus.instances.size(); ++k) {
        const ChainInstance& inst = corpus.instances[k];
        std::vector<int> tags;
        if (m.kind == ModelKind::SemiMarkov) {
          SmViterbiResult v = sm_viterbi(inst, m.index, m.weights, m.max_seg_len);
          tags.assign(static_cast<size_t>(inst.size()), 0);
          for (const Segment& s : v.segments)
            for (int i = s.start; i <= s.end; ++i) tags[static_cast<size_t>(i)] = s.label;
        } else {
          tags = viterbi(inst, m.index, m.weights, m.order).labels;
        }
        for (size_t i = 0; i < corpus.raw[k].size(); ++i)
          out << corpus.raw[k][i] << '\t' << m.labels.name(tags[i]) << '\n';
        out << '\n';
      }
      break;
    }
    case ModelKind::Tree:
    case ModelKind::Latent:
    case ModelKind::LatentMarg: {
      TreeCorpus corpus = read_tree_corpus(a.data);
      for (size_t k = 0; k < corpus.instances.size(); ++k) {
        const TreeInstance& inst = corpus.instances[k];
        std::vector<int> tags;
        if (m.kind == ModelKind::Tree) {
          tags = tree_map_decode(inst, m.index, m.weights).labels;
        } else {
          LatentMode mode = m.kind == ModelKind::Latent ? LatentMode::MaxMargin
                                                        : LatentMode::Marginalized;
          int root = predict_root(inst, m.index, m.weights, mode);
          tags = constrained_map(inst, m.index, m.weights, root).labels;
        }
        for (size_t i = 0; i < corpus.raw[k].size(); ++i) {
          const std::string& line = corpus.raw[k][i];
          size_t cut = line.rfind('\t');  // replace the label column
          out << line.substr(0, cut) << '\t' << m.labels.name(tags[i]) << '\n';
        }
        out << '\n';
      }
      break;
    }
  }
  write_output(a.output, out.str());
}

void cmd_eval(const EvalArgs& a) {
  ChainCorpus gold = read_chain_corpus(a.gold, true);
  ChainCorpus pred = read_chain_corpus(a.pred, true);
  if (gold.instances.size() != pred.instances.size())
    throw Error("gold and prediction differ in instance count");

  LabelAlphabet all;
  for (const auto& n : gold.labels.names()) all.add(n);
  for (const auto& n : pred.labels.names()) all.add(n);

  ConfusionCounts counts(all.size());
  SpanSet gspans, pspans;
  int offset = 0;
  for (size_t k = 0; k < gold.instances.size(); ++k) {
    const auto& g = gold.instances[k];
    const auto& p = pred.instances[k];
    if (g.size() != p.size())
      throw Error("instance " + std::to_string(k + 1) + ": token counts differ");
    std::vector<int> gt(static_cast<size_t>(g.size())), pt(static_cast<size_t>(p.size()));
    for (int i = 0; i < g.size(); ++i) {
      gt[static_cast<size_t>(i)] = all.id(gold.labels.name(g.gold[static_cast<size_t>(i)]));
      pt[static_cast<size_t>(i)] = all.id(pred.labels.name(p.gold[static_cast<size_t>(i)]));
      counts.at(gt[static_cast<size_t>(i)], pt[static_cast<size_t>(i)]) += 1;
    }
    int bg = all.id(a.background);
    for (Span s : tags_to_spans(gt, bg).spans) {
      s.start += offset;
      s.end += offset;
      gspans.spans.push_back(s);
    }
    for (Span s : tags_to_spans(pt, bg).spans) {
      s.start += offset;
      s.end += offset;
      pspans.spans.push_back(s);
    }
    offset += g.size();
  }
  gspans.universe = pspans.universe = offset;

  std::ostringstream out;
  int bg = all.id(a.background);
  double fsum = 0;
  int nlab = 0;
  for (int y = 0; y < all.size(); ++y) {
    if (y == bg) continue;
    Prf r = span_prf(gspans, pspans, y);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-12s P=%.4f R=%.4f F=%.4f\n",
                  all.name(y).c_str(), r.precision, r.recall, r.f);
    out << buf;
    fsum += r.f;
    ++nlab;
  }
  out << "macro-F     " << fixed4(nlab ? fsum / nlab : 1.0) << '\n';
  out << "micro-F     " << fixed4(micro_f(counts)) << '\n';
  if (!a.pos.empty() || !a.neg.empty()) {
    int pos = all.id(a.pos), neg = all.id(a.neg);
    if (pos < 0 || neg < 0)
      throw Error("polarity labels must occur in the data");
    out << "polarity-F  " << fixed4(macro_f_posneg(counts, pos, neg)) << '\n';
  }
  std::cout << out.str();
}

void cmd_agree(const AgreeArgs& a) {
  SpanSet s1{read_span_file(a.ann1), a.tokens};
  SpanSet s2{read_span_file(a.ann2), a.tokens};

  std::vector<std::pair<std::string, KappaResult>> results;
  if (a.mode == "binary" || a.mode == "both")
    results.emplace_back("binary", kappa(s1, s2, a.tokens, KappaMode::Binary));
  if (a.mode == "proportional" || a.mode == "both")
    results.emplace_back("proportional", kappa(s1, s2, a.tokens, KappaMode::Proportional));

  std::ostringstream out;
  char buf[64];
  out << "        ";
  for (const auto& [name, r] : results) {
    std::snprintf(buf, sizeof buf, " %14s", name.c_str());
    out << buf;
  }
  out << '\n';
  auto row = [&](const char* name, auto get) {
    out << name;
    for (const auto& [mode, r] : results) {
      std::snprintf(buf, sizeof buf, " %14s", get(r).c_str());
      out << buf;
    }
    out << '\n';
  };
  row("M1      ", [](const KappaResult& r) { return std::to_string(r.m1); });
  row("A1      ", [](const KappaResult& r) { return std::to_string(r.a1); });
  row("M2      ", [](const KappaResult& r) { return std::to_string(r.m2); });
  row("A2      ", [](const KappaResult& r) { return std::to_string(r.a2); });
  row("kappa   ", [](const KappaResult& r) { return fixed4(r.kappa); });
  std::cout << out.str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"conditional random field trainer, tagger and scorer"};
  app.name("crftk");
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "estimate a model from labeled data");
  train->add_option("--kind", ta.kind, "model family")
      ->required()
      ->check(CLI::IsMember({"chain1", "chainK", "semimarkov", "tree", "latent", "latentmarg"}));
  train->add_option("--data", ta.data, "training file")->required();
  train->add_option("--model", ta.model, "output model file")->required();
  train->add_option("--order", ta.order, "label-context length (chainK)");
  train->add_option("--max-seg-len", ta.max_seg_len,
                    "segment length cap (semimarkov); 0 = longest gold run");
  train->add_option("--l1", ta.l1, "L1 penalty weight");
  train->add_option("--l2", ta.l2, "squared-L2 penalty weight");
  train->add_option("--c", ta.c, "quadratic coefficient of the max-margin objective");
  train->add_option("--eta0", ta.eta0, "initial stochastic step size (latent kinds)");
  train->add_option("--epochs", ta.epochs, "epoch cap; defaults to 100 (1000 latent)");
  train->add_option("--tol", ta.tol, "relative objective-change stop threshold");
  train->add_option("--min-count", ta.min_count, "feature frequency cutoff");
  train->add_option("--seed", ta.seed, "shuffle seed (latent kinds)");
  train->add_flag("--bos", ta.bos, "add begin-of-sequence transition features");

  TagArgs ga;
  auto* tag = app.add_subcommand("tag", "label data with a trained model");
  tag->add_option("--model", ga.model, "model file")->required();
  tag->add_option("--data", ga.data, "input file")->required();
  tag->add_option("--output", ga.output, "output file, - for stdout");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "score predictions against gold labels");
  eval->add_option("--gold", ea.gold, "gold token file")->required();
  eval->add_option("--pred", ea.pred, "predicted token file")->required();
  eval->add_option("--background", ea.background, "label treated as unannotated");
  eval->add_option("--pos", ea.pos, "positive class for the polarity F-score");
  eval->add_option("--neg", ea.neg, "negative class for the polarity F-score");

  AgreeArgs aa;
  auto* agree = app.add_subcommand("agree", "inter-annotator agreement of two span files");
  agree->add_option("--ann1", aa.ann1, "first annotation span file")->required();
  agree->add_option("--ann2", aa.ann2, "second annotation span file")->required();
  agree->add_option("--tokens", aa.tokens, "token universe size")->required();
  agree->add_option("--mode", aa.mode, "agreement flavor")
      ->check(CLI::IsMember({"binary", "proportional", "both"}));

  try {
    std::vector<const char*> argv;
    argv.push_back("crftk");
    for (const auto& s : args) argv.push_back(s.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) cmd_train(ta);
    if (*tag) cmd_tag(ga);
    if (*eval) cmd_eval(ea);
    if (*agree) cmd_agree(aa);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace crftk
