#include "uparse/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "uparse/checkpoint.hpp"
#include "uparse/errors.hpp"

namespace uparse {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open: " + path);
  return is;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write: " + path);
  return os;
}

}  // namespace

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus,
                             int max_size) {
  if (max_size < 2) throw DataError("vocabulary needs room for <unk> and <s>");
  std::unordered_map<std::string, std::pair<long, long>> stats;  // count, first
  long position = 0;
  for (const auto& sent : corpus) {
    for (const auto& tok : sent) {
      auto [it, fresh] = stats.try_emplace(tok, std::make_pair(0L, position));
      ++it->second.first;
      ++position;
    }
  }
  std::vector<std::pair<std::string, std::pair<long, long>>> ranked(stats.begin(),
                                                                    stats.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second.first != b.second.first) return a.second.first > b.second.first;
    return a.second.second < b.second.second;
  });

  Vocabulary v;
  v.tokens_ = {kUnkToken, kBoundaryToken};
  for (const auto& [tok, info] : ranked) {
    if (static_cast<int>(v.tokens_.size()) >= max_size) break;
    if (tok == kUnkToken || tok == kBoundaryToken) continue;
    v.tokens_.push_back(tok);
  }
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    v.ids_[v.tokens_[i]] = static_cast<int>(i);
  }
  return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream is = open_in(path);
  Vocabulary v;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw DataError("vocabulary has a blank line: " + path);
    v.ids_[line] = static_cast<int>(v.tokens_.size());
    v.tokens_.push_back(line);
  }
  if (v.tokens_.size() < 2 || v.tokens_[0] != kUnkToken ||
      v.tokens_[1] != kBoundaryToken) {
    throw DataError("vocabulary must start with " + std::string(kUnkToken) +
                    " and " + std::string(kBoundaryToken) + ": " + path);
  }
  return v;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream os = open_out(path);
  for (const auto& tok : tokens_) os << tok << '\n';
  if (!os) throw DataError("write failed: " + path);
}

int Vocabulary::id_or_unk(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? 0 : it->second;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& words) const {
  std::vector<int> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(id_or_unk(w));
  return out;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw DataError("vocabulary id out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

// ---------------------------------------------------------------------------
// Corpora

std::vector<std::vector<std::string>> read_sentences(const std::string& path) {
  std::ifstream is = open_in(path);
  std::vector<std::vector<std::string>> out;
  std::string line;
  long lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::vector<std::string> toks = split_ws(line);
    if (toks.empty()) {
      throw DataError(path + ":" + std::to_string(lineno) + ": empty sentence");
    }
    out.push_back(std::move(toks));
  }
  return out;
}

void write_sentences(const std::string& path,
                     const std::vector<std::vector<std::string>>& sentences) {
  std::ofstream os = open_out(path);
  for (const auto& sent : sentences) {
    for (std::size_t i = 0; i < sent.size(); ++i) {
      if (i) os << ' ';
      os << sent[i];
    }
    os << '\n';
  }
  if (!os) throw DataError("write failed: " + path);
}

std::vector<LabeledTree> read_trees(const std::string& path) {
  std::ifstream is = open_in(path);
  std::vector<LabeledTree> out;
  std::string line;
  long lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    try {
      out.push_back(parse_ptb(line));
    } catch (const PtbParseError& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_trees(const std::string& path, const std::vector<LabeledTree>& trees) {
  std::ofstream os = open_out(path);
  for (const auto& t : trees) os << serialize(t) << '\n';
  if (!os) throw DataError("write failed: " + path);
}

void write_trees(const std::string& path, const std::vector<BinaryTree>& trees) {
  std::ofstream os = open_out(path);
  for (const auto& t : trees) os << serialize(t) << '\n';
  if (!os) throw DataError("write failed: " + path);
}

namespace {

BinaryTree to_binary_rec(const LabeledTree& t) {
  if (t.is_leaf()) return BinaryTree::leaf(t.token());
  if (t.children().size() != 2) {
    throw DataError("tree is not binary: node " + t.label() + " has " +
                    std::to_string(t.children().size()) + " children");
  }
  return BinaryTree::node(to_binary_rec(t.children()[0]),
                          to_binary_rec(t.children()[1]));
}

}  // namespace

BinaryTree to_binary(const LabeledTree& tree) { return to_binary_rec(tree); }

std::vector<DistanceVector> read_distances(const std::string& path) {
  std::ifstream is = open_in(path);
  std::vector<DistanceVector> out;
  std::string line;
  long lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::vector<std::string> toks = split_ws(line);
    DistanceVector d(static_cast<Eigen::Index>(toks.size()));
    for (std::size_t i = 0; i < toks.size(); ++i) {
      const std::string& tok = toks[i];
      double value = 0;
      auto r = std::from_chars(tok.data(), tok.data() + tok.size(), value);
      if (r.ec != std::errc() || r.ptr != tok.data() + tok.size()) {
        throw DataError(path + ":" + std::to_string(lineno) +
                        ": bad distance value '" + tok + "'");
      }
      d[static_cast<Eigen::Index>(i)] = value;
    }
    out.push_back(std::move(d));
  }
  return out;
}

void write_distances(const std::string& path,
                     const std::vector<DistanceVector>& distances) {
  std::ofstream os = open_out(path);
  for (const auto& d : distances) {
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      if (i) os << ' ';
      os << format_double(d[i]);
    }
    os << '\n';
  }
  if (!os) throw DataError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// NLI pairs

int nli_label_id(const std::string& name) {
  if (name == "entailment") return 0;
  if (name == "neutral") return 1;
  if (name == "contradiction") return 2;
  throw DataError("unknown NLI label: " + name);
}

const char* nli_label_name(int id) {
  switch (id) {
    case 0: return "entailment";
    case 1: return "neutral";
    case 2: return "contradiction";
  }
  throw DataError("bad NLI label id: " + std::to_string(id));
}

std::vector<NliPairText> read_pairs(const std::string& path) {
  std::ifstream is = open_in(path);
  std::vector<NliPairText> out;
  std::string line;
  long lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos
                                            ? std::string::npos
                                            : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 3) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected 3 tab-separated columns, got " +
                      std::to_string(cols.size()));
    }
    NliPairText pair;
    pair.label = nli_label_id(cols[0]);
    pair.premise = split_ws(cols[1]);
    pair.hypothesis = split_ws(cols[2]);
    if (pair.premise.empty() || pair.hypothesis.empty()) {
      throw DataError(path + ":" + std::to_string(lineno) + ": empty sentence");
    }
    out.push_back(std::move(pair));
  }
  return out;
}

void write_pairs(const std::string& path, const std::vector<NliPairText>& pairs) {
  std::ofstream os = open_out(path);
  for (const auto& pair : pairs) {
    os << nli_label_name(pair.label) << '\t';
    for (std::size_t i = 0; i < pair.premise.size(); ++i) {
      if (i) os << ' ';
      os << pair.premise[i];
    }
    os << '\t';
    for (std::size_t i = 0; i < pair.hypothesis.size(); ++i) {
      if (i) os << ' ';
      os << pair.hypothesis[i];
    }
    os << '\n';
  }
  if (!os) throw DataError("write failed: " + path);
}

std::set<std::string> read_token_set(const std::string& path) {
  std::ifstream is = open_in(path);
  std::set<std::string> out;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    out.insert(line);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Misc

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write: " + path);
  os << content;
  if (!os) throw DataError("write failed: " + path);
}

std::string format_double(double value) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, r.ptr);
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  static const char* digits = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = digits[h & 0xf];
    h >>= 4;
  }
  buf[16] = '\0';
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// Checkpoint sidecars

void save_checkpoint_meta(const CheckpointMeta& meta, const std::string& path) {
  std::ostringstream ss;
  ss << "version=" << meta.version << '\n';
  ss << "seed=" << meta.seed << '\n';
  ss << "steps=" << meta.steps << '\n';
  ss << "config_hash=" << meta.config_hash << '\n';
  for (const auto& [k, v] : meta.extra) ss << k << '=' << v << '\n';
  write_file(path, ss.str());
}

CheckpointMeta load_checkpoint_meta(const std::string& path) {
  std::ifstream is = open_in(path);
  CheckpointMeta meta;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw DataError("bad meta line: " + line);
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    if (key == "version") {
      meta.version = value;
    } else if (key == "seed") {
      meta.seed = std::stoull(value);
    } else if (key == "steps") {
      meta.steps = std::stoull(value);
    } else if (key == "config_hash") {
      meta.config_hash = value;
    } else {
      meta.extra[key] = value;
    }
  }
  return meta;
}

}  // namespace uparse
