#pragma once

#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "uparse/distance.hpp"
#include "uparse/trees.hpp"

namespace uparse {

// Token-id table. Line order defines the ids; id 0 is the unknown token and
// id 1 the boundary-padding token.
class Vocabulary {
 public:
  static constexpr const char* kUnkToken = "<unk>";
  static constexpr const char* kBoundaryToken = "<s>";

  // Frequency-ranked vocabulary over a corpus (ties by first occurrence),
  // truncated to max_size entries including the two specials.
  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus,
                          int max_size);
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  int id_or_unk(const std::string& token) const;
  std::vector<int> encode(const std::vector<std::string>& words) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

std::vector<std::vector<std::string>> read_sentences(const std::string& path);
void write_sentences(const std::string& path,
                     const std::vector<std::vector<std::string>>& sentences);

std::vector<LabeledTree> read_trees(const std::string& path);
void write_trees(const std::string& path, const std::vector<LabeledTree>& trees);
void write_trees(const std::string& path, const std::vector<BinaryTree>& trees);

// Strict view of a bracketed tree as binary: every node has exactly two
// children (or is a leaf).
BinaryTree to_binary(const LabeledTree& tree);

std::vector<DistanceVector> read_distances(const std::string& path);
void write_distances(const std::string& path,
                     const std::vector<DistanceVector>& distances);

struct NliPairText {
  int label = 0;
  std::vector<std::string> premise;
  std::vector<std::string> hypothesis;
};

int nli_label_id(const std::string& name);
const char* nli_label_name(int id);

// Tab-separated: label, premise tokens, hypothesis tokens.
std::vector<NliPairText> read_pairs(const std::string& path);
void write_pairs(const std::string& path, const std::vector<NliPairText>& pairs);

// One token per line; blank lines and # comments skipped.
std::set<std::string> read_token_set(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// Shortest decimal form that round-trips the exact double.
std::string format_double(double value);

// FNV-1a over a canonical key=value dump; used for config hashes.
std::string fnv1a_hex(const std::string& text);

}  // namespace uparse
