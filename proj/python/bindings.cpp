#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <utility>

#include "crftk/chain.hpp"
#include "crftk/eval.hpp"
#include "crftk/features.hpp"
#include "crftk/model_io.hpp"
#include "crftk/optimizer.hpp"
#include "crftk/types.hpp"

namespace py = pybind11;
using namespace crftk;

namespace {

// One training instance from Python: per-token predicate lists + label names.
using PyInstance = std::pair<std::vector<std::vector<std::string>>, std::vector<std::string>>;

struct PyModel {
  Model m;

  std::vector<std::string> labels() const { return m.labels.names(); }

  std::vector<std::string> tag(const std::vector<std::vector<std::string>>& obs) const {
    if (m.kind != ModelKind::Chain1 && m.kind != ModelKind::ChainK)
      throw Error("tagging from python is limited to chain models");
    ChainInstance inst(obs);
    ViterbiResult v = viterbi(inst, m.index, m.weights, m.order);
    std::vector<std::string> out;
    out.reserve(v.labels.size());
    for (int y : v.labels) out.push_back(m.labels.name(y));
    return out;
  }

  double logprob(const std::vector<std::vector<std::string>>& obs,
                 const std::vector<std::string>& tags) const {
    ChainInstance inst(obs);
    std::vector<int> ys;
    ys.reserve(tags.size());
    for (const auto& t : tags) {
      int y = m.labels.id(t);
      if (y < 0) throw Error("unknown label '" + t + "'");
      ys.push_back(y);
    }
    return sequence_logprob(inst, ys, m.index, m.weights, m.order);
  }

  void save(const std::string& path) const { save_model(m, path); }
};

PyModel train_chain(const std::vector<PyInstance>& corpus, int order, double l1,
                    double l2, int min_count, int epochs, bool bos) {
  PyModel pm;
  std::vector<ChainInstance> instances;
  for (const auto& [obs, tags] : corpus) {
    std::vector<int> ys;
    ys.reserve(tags.size());
    for (const auto& t : tags) ys.push_back(pm.m.labels.add(t));
    instances.emplace_back(obs, std::move(ys));
  }
  if (instances.empty()) throw Error("empty corpus");

  FeatureTemplates tmpl;
  tmpl.bos = bos;
  pm.m.kind = order > 1 ? ModelKind::ChainK : ModelKind::Chain1;
  pm.m.order = order;
  pm.m.lambda1 = l1;
  pm.m.lambda2 = l2;
  pm.m.index = build_feature_index(instances, pm.m.labels, tmpl, min_count, order);

  FitOptions fo;
  fo.max_epochs = epochs;
  FitResult fr = fit(
      [&](const std::vector<double>& th) {
        return loglik_gradient(instances, pm.m.index, th, l1, l2, order);
      },
      std::vector<double>(static_cast<size_t>(pm.m.index.n_features()), 0.0), fo);
  pm.m.weights = std::move(fr.theta);
  return pm;
}

SpanSet to_span_set(const std::vector<std::pair<int, int>>& spans, int tokens) {
  SpanSet s;
  s.universe = tokens;
  for (auto [a, b] : spans) s.spans.push_back({a, b, 0});
  return s;
}

}  // namespace

PYBIND11_MODULE(crftk, mod) {
  mod.doc() = "conditional random field toolkit";

  py::class_<PyModel>(mod, "Model")
      .def_property_readonly("labels", &PyModel::labels)
      .def("tag", &PyModel::tag, py::arg("observations"))
      .def("logprob", &PyModel::logprob, py::arg("observations"), py::arg("tags"))
      .def("save", &PyModel::save, py::arg("path"));

  mod.def("train_chain", &train_chain, py::arg("corpus"), py::arg("order") = 1,
          py::arg("l1") = 0.0, py::arg("l2") = 0.01, py::arg("min_count") = 1,
          py::arg("epochs") = 100, py::arg("bos") = false,
          "Train a (higher-order) chain model on [(obs, tags), ...] instances.");

  mod.def(
      "load_model",
      [](const std::string& path) {
        PyModel pm;
        pm.m = load_model(path);
        return pm;
      },
      py::arg("path"));

  mod.def(
      "span_prf",
      [](const std::vector<std::pair<int, int>>& gold,
         const std::vector<std::pair<int, int>>& pred, int tokens) {
        Prf r = span_prf(to_span_set(gold, tokens), to_span_set(pred, tokens), 0);
        return py::make_tuple(r.precision, r.recall, r.f);
      },
      py::arg("gold"), py::arg("pred"), py::arg("tokens"),
      "Proportional-overlap span precision/recall/F over (start, end) pairs.");

  mod.def(
      "kappa",
      [](const std::vector<std::pair<int, int>>& ann1,
         const std::vector<std::pair<int, int>>& ann2, int tokens,
         const std::string& mode) {
        KappaMode m;
        if (mode == "binary")
          m = KappaMode::Binary;
        else if (mode == "proportional")
          m = KappaMode::Proportional;
        else
          throw Error("mode must be 'binary' or 'proportional'");
        KappaResult r = kappa(to_span_set(ann1, tokens), to_span_set(ann2, tokens), tokens, m);
        py::dict d;
        d["kappa"] = r.kappa;
        d["p_o"] = r.p_o;
        d["p_c"] = r.p_c;
        d["m1"] = r.m1;
        d["a1"] = r.a1;
        d["m2"] = r.m2;
        d["a2"] = r.a2;
        return d;
      },
      py::arg("ann1"), py::arg("ann2"), py::arg("tokens"), py::arg("mode"),
      "Chance-corrected span agreement with binary or proportional counting.");
}
