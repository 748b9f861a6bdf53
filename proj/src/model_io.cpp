#include "crftk/model_io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

namespace crftk {

namespace {

const std::array<std::string, 6> kKindNames = {"chain1",  "chainK", "semimarkov",
                                               "tree",    "latent", "latentmarg"};

using Code = ModelIoError::Code;

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto r = std::from_chars(first, last, out);
  return r.ec == std::errc() && r.ptr == last;
}

bool parse_int(const std::string& s, int& out) {
  if (s.empty()) return false;
  auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

// getline with \r\n tolerance; false on EOF.
bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (true) {
    size_t hit = s.find(sep, pos);
    out.push_back(s.substr(pos, hit == std::string::npos ? hit : hit - pos));
    if (hit == std::string::npos) break;
    pos = hit + 1;
  }
  return out;
}

void check_name(const std::string& s, const char* what) {
  if (s.find_first_of("\t\n|>") != std::string::npos)
    throw Error(std::string(what) + " '" + s + "' contains a reserved character");
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

const std::string& kind_name(ModelKind kind) {
  return kKindNames[static_cast<size_t>(kind)];
}

ModelKind kind_from_name(const std::string& name) {
  for (size_t i = 0; i < kKindNames.size(); ++i)
    if (kKindNames[i] == name) return static_cast<ModelKind>(i);
  throw ModelIoError(Code::MalformedHeader, "unknown model kind '" + name + "'");
}

void save_model(const Model& m, std::ostream& out) {
  if (static_cast<int>(m.weights.size()) != m.index.n_features())
    throw Error("weight vector does not match feature index size");
  for (const auto& name : m.labels.names()) check_name(name, "label");

  out << "CRFTK 1 " << kind_name(m.kind) << "\n[labels]\n";
  for (const auto& name : m.labels.names()) out << name << "\n";
  out << "[params]\n";
  out << "lambda1 " << format_double(m.lambda1) << "\n";
  out << "lambda2 " << format_double(m.lambda2) << "\n";
  if (m.kind == ModelKind::ChainK) out << "order " << m.order << "\n";
  if (m.kind == ModelKind::SemiMarkov) out << "maxseglen " << m.max_seg_len << "\n";
  if (m.index.dense_width() > 0) out << "densewidth " << m.index.dense_width() << "\n";
  out << "[features]\n";
  for (int y = 0; y < m.index.n_labels(); ++y)
    for (int j = 0; j < m.index.dense_width(); ++j)
      out << "d:" << j << "\t" << m.labels.name(y) << "\t"
          << format_double(m.weights[static_cast<size_t>(m.index.dense_feature(y, j))]) << "\n";
  for (int i = 0; i < m.index.n_sparse(); ++i) {
    auto [key, ctx] = m.index.render(m.index.def(i), m.labels);
    check_name(key, "feature key");
    out << key << "\t" << ctx << "\t"
        << format_double(m.weights[static_cast<size_t>(m.index.dense_block() + i)]) << "\n";
  }
  if (!out) throw Error("write failed while saving model");
}

void save_model(const Model& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  save_model(m, out);
}

Model load_model(std::istream& in) {
  Model m;
  std::string line;

  if (!next_line(in, line))
    throw ModelIoError(Code::Truncated, "model file is empty");
  auto head = split(line, ' ');
  if (head.size() != 3 || head[0] != "CRFTK")
    throw ModelIoError(Code::MalformedHeader, "malformed model header '" + line + "'");
  if (head[1] != "1")
    throw ModelIoError(Code::VersionMismatch, "unsupported model version '" + head[1] + "'");
  m.kind = kind_from_name(head[2]);

  if (!next_line(in, line) || line != "[labels]")
    throw ModelIoError(in.eof() ? Code::Truncated : Code::BadRecord,
                       "expected [labels] section");
  bool saw_params = false;
  while (next_line(in, line)) {
    if (line == "[params]") { saw_params = true; break; }
    if (line.empty()) throw ModelIoError(Code::BadRecord, "empty label line");
    m.labels.add(line);
  }
  if (!saw_params) throw ModelIoError(Code::Truncated, "missing [params] section");

  int dense_width = 0;
  bool saw_features = false, saw_order = false;
  while (next_line(in, line)) {
    if (line == "[features]") { saw_features = true; break; }
    size_t sp = line.find(' ');
    if (sp == std::string::npos)
      throw ModelIoError(Code::BadRecord, "malformed parameter line '" + line + "'");
    std::string key = line.substr(0, sp), val = line.substr(sp + 1);
    if (key == "lambda1" || key == "lambda2") {
      double v;
      if (!parse_double(val, v))
        throw ModelIoError(Code::BadRecord, "bad value in parameter line '" + line + "'");
      (key == "lambda1" ? m.lambda1 : m.lambda2) = v;
    } else if (key == "order" || key == "maxseglen" || key == "densewidth") {
      int v;
      if (!parse_int(val, v) || v < 0)
        throw ModelIoError(Code::BadRecord, "bad value in parameter line '" + line + "'");
      if (key == "order") { m.order = v; saw_order = true; }
      else if (key == "maxseglen") m.max_seg_len = v;
      else dense_width = v;
    } else {
      throw ModelIoError(Code::BadRecord, "unknown parameter '" + key + "'");
    }
  }
  if (!saw_features) throw ModelIoError(Code::Truncated, "missing [features] section");
  if (m.labels.size() == 0) throw ModelIoError(Code::BadRecord, "model has no labels");
  if (m.kind == ModelKind::ChainK && !saw_order)
    throw ModelIoError(Code::BadRecord, "chainK model is missing its order");

  int order = m.kind == ModelKind::ChainK ? m.order : 1;
  m.index.init(m.labels.size(), order, dense_width);
  m.weights.assign(static_cast<size_t>(m.index.dense_block()), 0.0);
  int dense_seen = 0;

  while (next_line(in, line)) {
    auto cols = split(line, '\t');
    if (cols.size() != 3)
      throw ModelIoError(Code::Truncated, "truncated feature record '" + line + "'");
    double w;
    if (!parse_double(cols[2], w))
      throw ModelIoError(Code::BadRecord, "bad weight in feature record '" + line + "'");
    const std::string& key = cols[0];
    try {
      if (key.rfind("s:", 0) == 0) {
        m.index.add_state(key.substr(2), ctx_from_string(cols[1], order, m.labels));
        m.weights.push_back(w);
      } else if (key == "t" || key.rfind("t:", 0) == 0) {
        auto gt = cols[1].find('>');
        if (gt == std::string::npos)
          throw Error("transition context lacks '>'");
        m.index.add_transition(key == "t" ? "" : key.substr(2),
                               ctx_from_string(cols[1].substr(0, gt), order, m.labels),
                               ctx_from_string(cols[1].substr(gt + 1), order, m.labels));
        m.weights.push_back(w);
      } else if (key.rfind("g:", 0) == 0) {
        int len;
        if (!parse_int(key.substr(2), len) || len < 1) throw Error("bad segment length");
        int y = m.labels.id(cols[1]);
        if (y < 0) throw Error("unknown label '" + cols[1] + "'");
        m.index.add_seg_length(len, y);
        m.weights.push_back(w);
      } else if (key.rfind("d:", 0) == 0) {
        int j;
        if (!parse_int(key.substr(2), j) || j < 0 || j >= dense_width)
          throw Error("dense feature position out of range");
        int y = m.labels.id(cols[1]);
        if (y < 0) throw Error("unknown label '" + cols[1] + "'");
        m.weights[static_cast<size_t>(m.index.dense_feature(y, j))] = w;
        ++dense_seen;
      } else {
        throw Error("unknown feature key '" + key + "'");
      }
    } catch (const ModelIoError&) {
      throw;
    } catch (const Error& e) {
      throw ModelIoError(Code::BadRecord,
                         std::string("bad feature record '") + line + "': " + e.what());
    }
  }
  if (dense_seen != m.index.dense_block())
    throw ModelIoError(Code::Truncated, "dense feature block is incomplete");
  if (static_cast<int>(m.weights.size()) != m.index.n_features())
    throw ModelIoError(Code::Truncated, "model file truncated");
  return m;
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return load_model(in);
}

}  // namespace crftk
