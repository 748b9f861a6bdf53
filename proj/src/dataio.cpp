#include "crftk/dataio.hpp"

#include <charconv>
#include <fstream>

namespace crftk {

namespace {

[[noreturn]] void fail(const std::string& path, long line, const std::string& msg) {
  throw Error(path + ":" + std::to_string(line) + ": " + msg);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (true) {
    size_t next = s.find(sep, pos);
    out.push_back(s.substr(pos, next == std::string::npos ? next : next - pos));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

std::vector<std::string> split_nonempty(const std::string& s, char sep) {
  std::vector<std::string> out;
  for (auto& part : split(s, sep))
    if (!part.empty()) out.push_back(std::move(part));
  return out;
}

int parse_int(const std::string& s, const std::string& path, long line,
              const char* what) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    fail(path, line, std::string("bad ") + what + " '" + s + "'");
  return v;
}

double parse_num(const std::string& s, const std::string& path, long line,
                 const char* what) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    fail(path, line, std::string("bad ") + what + " '" + s + "'");
  return v;
}

// Reads the file into blocks of (line text, line number), split on blanks.
std::vector<std::vector<std::pair<std::string, long>>> read_blocks(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::vector<std::vector<std::pair<std::string, long>>> blocks;
  std::vector<std::pair<std::string, long>> cur;
  std::string line;
  long no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (!cur.empty()) blocks.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.emplace_back(line, no);
    }
  }
  if (!cur.empty()) blocks.push_back(std::move(cur));
  return blocks;
}

}  // namespace

ChainCorpus read_chain_corpus(const std::string& path, bool require_labels) {
  ChainCorpus corpus;
  for (const auto& block : read_blocks(path)) {
    ChainInstance inst;
    std::vector<std::string> raw;
    bool all_labeled = true;
    for (const auto& [line, no] : block) {
      auto cols = split(line, '\t');
      if (cols.size() < 2 || cols.size() > 3)
        fail(path, no, "expected token<TAB>features[<TAB>label], got " +
                           std::to_string(cols.size()) + " columns");
      inst.obs.push_back(split_nonempty(cols[1], ' '));
      if (cols.size() == 3 && !cols[2].empty()) {
        inst.gold.push_back(corpus.labels.add(cols[2]));
      } else {
        if (require_labels) fail(path, no, "missing label column");
        all_labeled = false;
      }
      raw.push_back(line);
    }
    if (!all_labeled) inst.gold.clear();
    corpus.instances.push_back(std::move(inst));
    corpus.raw.push_back(std::move(raw));
  }
  if (corpus.instances.empty()) throw Error("'" + path + "' holds no instances");
  return corpus;
}

TreeCorpus read_tree_corpus(const std::string& path) {
  TreeCorpus corpus;
  for (const auto& block : read_blocks(path)) {
    std::vector<TreeNode> nodes;
    std::vector<std::string> raw;
    nodes.reserve(block.size());
    int expect_id = 1;
    for (const auto& [line, no] : block) {
      auto cols = split(line, '\t');
      if (cols.size() != 5)
        fail(path, no, "expected id<TAB>parent<TAB>relation<TAB>features<TAB>label, got " +
                           std::to_string(cols.size()) + " columns");
      int id = parse_int(cols[0], path, no, "node id");
      if (id != expect_id) fail(path, no, "node ids must run 1..n in order");
      ++expect_id;
      int parent = parse_int(cols[1], path, no, "parent id");
      if (parent < 0 || parent > static_cast<int>(block.size()))
        fail(path, no, "parent id out of range");

      TreeNode nd;
      nd.parent = parent - 1;  // 0 marks the root -> -1 internally
      nd.relation = cols[2];
      bool saw_dense = false;
      for (const auto& field : split_nonempty(cols[3], '|')) {
        if (field.rfind("dense:", 0) == 0) {
          if (saw_dense) fail(path, no, "more than one dense field");
          saw_dense = true;
          for (const auto& v : split_nonempty(field.substr(6), ','))
            nd.dense.push_back(parse_num(v, path, no, "dense value"));
        } else {
          nd.obs.push_back(field);
        }
      }
      if (cols[4].empty()) fail(path, no, "empty label column ('_' hides a label)");
      nd.label = cols[4] == "_" ? -1 : corpus.labels.add(cols[4]);
      nodes.push_back(std::move(nd));
      raw.push_back(line);
    }
    try {
      corpus.instances.emplace_back(std::move(nodes));
    } catch (const Error& e) {
      fail(path, block.front().second, e.what());
    }
    corpus.raw.push_back(std::move(raw));
  }
  if (corpus.instances.empty()) throw Error("'" + path + "' holds no instances");
  return corpus;
}

std::vector<Span> read_span_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::vector<Span> spans;
  std::string line;
  long no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string norm = line;
    for (char& c : norm)
      if (c == '\t') c = ' ';
    auto parts = split_nonempty(norm, ' ');
    if (parts.empty()) continue;
    if (parts.size() != 2) fail(path, no, "expected 'start end'");
    Span s;
    s.start = parse_int(parts[0], path, no, "span start");
    s.end = parse_int(parts[1], path, no, "span end");
    s.label = 0;
    if (s.start < 0 || s.end < s.start) fail(path, no, "bad span bounds");
    spans.push_back(s);
  }
  return spans;
}

}  // namespace crftk
