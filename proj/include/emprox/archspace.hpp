#pragma once

// Cell architectures: a complete DAG over `num_nodes` nodes where every edge
// (target <- source, source < target) carries one operation label.
//
// Edges are ordered lexicographically by (target, source):
//   (1<-0), (2<-0), (2<-1), (3<-0), (3<-1), (3<-2), ...
// which is also the order in which the cell string lists them.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace emprox {

using TokenId = std::int32_t;

class OperationVocabulary {
 public:
  explicit OperationVocabulary(std::vector<std::string> ops);

  // none, skip_connect, nor_conv_1x1, nor_conv_3x3, avg_pool_3x3
  static const OperationVocabulary& nb201();

  std::size_t num_ops() const noexcept { return ops_.size(); }
  const std::vector<std::string>& ops() const noexcept { return ops_; }
  const std::string& name(int op) const { return ops_.at(static_cast<std::size_t>(op)); }

  // Throws VocabularyError for names outside the vocabulary.
  int index_of(std::string_view name) const;
  std::optional<int> find(std::string_view name) const;

  // Operation ids are 0..num_ops-1; the three special tokens follow.
  TokenId pad() const noexcept { return static_cast<TokenId>(ops_.size()); }
  TokenId sos() const noexcept { return pad() + 1; }
  TokenId eos() const noexcept { return pad() + 2; }
  std::size_t token_count() const noexcept { return ops_.size() + 3; }
  bool is_op_token(TokenId t) const noexcept { return t >= 0 && t < pad(); }

  bool operator==(const OperationVocabulary&) const = default;

 private:
  std::vector<std::string> ops_;
};

constexpr std::size_t edge_count(std::size_t num_nodes) noexcept {
  return num_nodes * (num_nodes - 1) / 2;
}

// Position of edge (target <- source) in the fixed edge order.
constexpr std::size_t edge_index(std::size_t target, std::size_t source) noexcept {
  return target * (target - 1) / 2 + source;
}

struct Edge {
  std::size_t target;
  std::size_t source;
};

std::vector<Edge> edge_order(std::size_t num_nodes);

struct Architecture {
  std::size_t num_nodes = 4;
  // Operation index per edge, in fixed edge order.
  std::vector<int> edge_ops;

  bool operator==(const Architecture&) const = default;
  auto operator<=>(const Architecture&) const = default;
};

// Throws InputError if the edge count or an operation index is out of range.
void validate(const Architecture& arch, const OperationVocabulary& vocab);

Architecture parse_arch_string(std::string_view s,
                               const OperationVocabulary& vocab = OperationVocabulary::nb201());
std::string to_arch_string(const Architecture& arch,
                           const OperationVocabulary& vocab = OperationVocabulary::nb201());

struct TokenSequence {
  std::vector<TokenId> tokens;

  std::size_t size() const noexcept { return tokens.size(); }
  bool operator==(const TokenSequence&) const = default;
};

TokenSequence to_sequence(const Architecture& arch,
                          const OperationVocabulary& vocab = OperationVocabulary::nb201());

// Throws DecodeError on a malformed sequence or a wrong interior length.
Architecture from_sequence(const TokenSequence& seq, std::size_t num_nodes = 4,
                           const OperationVocabulary& vocab = OperationVocabulary::nb201());

// Entry (source, target) holds 0 for no edge or 1 + operation index.
struct AdjacencyView {
  std::size_t num_nodes = 0;
  std::vector<int> matrix;  // row-major num_nodes x num_nodes
  std::vector<int> flat;    // strict upper triangle, row-major

  int at(std::size_t row, std::size_t col) const { return matrix[row * num_nodes + col]; }
  bool operator==(const AdjacencyView&) const = default;
};

AdjacencyView to_adjacency(const Architecture& arch);
std::vector<int> flatten_upper(std::span<const int> matrix, std::size_t num_nodes);
std::vector<int> unflatten_upper(std::span<const int> flat, std::size_t num_nodes);
// Inverse of to_adjacency; requires every strict-upper entry to be labeled.
Architecture from_adjacency(const AdjacencyView& view, const OperationVocabulary& vocab);

std::uint64_t space_size(std::size_t num_ops, std::size_t num_nodes);

// Mixed-radix decoding: the first edge is the most significant digit.
Architecture architecture_at(std::uint64_t index, std::size_t num_ops, std::size_t num_nodes);

// Yields every operation assignment of a num_nodes cell exactly once, in
// architecture_at order.
class SpaceEnumerator {
 public:
  SpaceEnumerator(const OperationVocabulary& vocab, std::size_t num_nodes);

  std::optional<Architecture> next();
  std::uint64_t size() const noexcept { return size_; }

 private:
  std::size_t num_ops_;
  std::size_t num_nodes_;
  std::uint64_t size_;
  std::uint64_t cursor_ = 0;
};

std::vector<Architecture> enumerate_space(const OperationVocabulary& vocab, std::size_t num_nodes);

// {"num_nodes": 4, "edge_ops": ["none", ...]}
nlohmann::json arch_to_json(const Architecture& arch,
                            const OperationVocabulary& vocab = OperationVocabulary::nb201());
Architecture arch_from_json(const nlohmann::json& j,
                            const OperationVocabulary& vocab = OperationVocabulary::nb201());

}  // namespace emprox
