#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "crftk/features.hpp"
#include "crftk/types.hpp"

namespace crftk {

enum class ModelKind { Chain1, ChainK, SemiMarkov, Tree, Latent, LatentMarg };

const std::string& kind_name(ModelKind kind);
// Throws on an unknown name.
ModelKind kind_from_name(const std::string& name);

// A trained model: everything needed to tag new data.
struct Model {
  ModelKind kind = ModelKind::Chain1;
  LabelAlphabet labels;
  FeatureIndex index;
  std::vector<double> weights;
  double lambda1 = 0, lambda2 = 0;
  int order = 1;        // chainK only
  int max_seg_len = 1;  // semimarkov only
};

class ModelIoError : public Error {
 public:
  enum class Code { MalformedHeader, VersionMismatch, Truncated, BadRecord };
  ModelIoError(Code c, const std::string& msg) : Error(msg), code(c) {}
  Code code;
};

// Line-based UTF-8 format:
//   CRFTK 1 <kind>
//   [labels]    one label per line
//   [params]    lambda1 / lambda2, plus order (chainK), maxseglen (semimarkov),
//               densewidth (when the model carries dense features)
//   [features]  <key>\t<label-context>\t<weight>, one line per parameter,
//               dense block first, then sparse features in index order
// Weights are written as shortest round-trip decimals, so save -> load -> save
// reproduces the file byte for byte.
void save_model(const Model& m, std::ostream& out);
void save_model(const Model& m, const std::string& path);
Model load_model(std::istream& in);
Model load_model(const std::string& path);

// Shortest decimal representation that parses back to exactly this double.
std::string format_double(double v);

}  // namespace crftk
