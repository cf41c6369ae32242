#include "emprox/archspace.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "emprox/errors.hpp"

namespace emprox {

OperationVocabulary::OperationVocabulary(std::vector<std::string> ops) : ops_(std::move(ops)) {
  if (ops_.empty()) throw ConfigError("operation vocabulary must not be empty");
  std::set<std::string> seen;
  for (const auto& op : ops_) {
    if (op.empty()) throw ConfigError("operation names must be non-empty");
    if (!seen.insert(op).second) throw ConfigError("duplicate operation name '" + op + "'");
  }
}

const OperationVocabulary& OperationVocabulary::nb201() {
  static const OperationVocabulary vocab(
      {"none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3", "avg_pool_3x3"});
  return vocab;
}

std::optional<int> OperationVocabulary::find(std::string_view name) const {
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    if (ops_[i] == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

int OperationVocabulary::index_of(std::string_view name) const {
  if (auto idx = find(name)) return *idx;
  throw VocabularyError(std::string(name));
}

std::vector<Edge> edge_order(std::size_t num_nodes) {
  std::vector<Edge> edges;
  edges.reserve(edge_count(num_nodes));
  for (std::size_t target = 1; target < num_nodes; ++target) {
    for (std::size_t source = 0; source < target; ++source) edges.push_back({target, source});
  }
  return edges;
}

void validate(const Architecture& arch, const OperationVocabulary& vocab) {
  if (arch.num_nodes < 2) throw InputError("architecture needs at least 2 nodes");
  if (arch.edge_ops.size() != edge_count(arch.num_nodes)) {
    throw InputError("architecture with " + std::to_string(arch.num_nodes) + " nodes needs " +
                     std::to_string(edge_count(arch.num_nodes)) + " edge operations, got " +
                     std::to_string(arch.edge_ops.size()));
  }
  for (int op : arch.edge_ops) {
    if (op < 0 || static_cast<std::size_t>(op) >= vocab.num_ops()) {
      throw InputError("operation index " + std::to_string(op) + " outside vocabulary");
    }
  }
}

namespace {

class CellParser {
 public:
  CellParser(std::string_view s, const OperationVocabulary& vocab) : s_(s), vocab_(vocab) {}

  Architecture parse() {
    Architecture arch;
    arch.edge_ops.clear();
    std::size_t target = 1;
    std::size_t in_group = 0;
    expect('|');
    for (;;) {
      if (in_group >= target) fail("too many edges for node " + std::to_string(target));
      const std::size_t name_start = pos_;
      while (pos_ < s_.size() && is_name_char(s_[pos_])) ++pos_;
      if (pos_ == name_start) fail("expected operation name");
      const std::string_view name = s_.substr(name_start, pos_ - name_start);
      const int op = vocab_.index_of(name);
      expect('~');
      const std::size_t num_start = pos_;
      std::size_t source = 0;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        source = source * 10 + static_cast<std::size_t>(s_[pos_] - '0');
        if (source > 1'000'000) throw ParseError("source index too large", num_start);
        ++pos_;
      }
      if (pos_ == num_start) fail("expected source index");
      if (source != in_group) {
        throw ParseError("expected source index " + std::to_string(in_group) + " for node " +
                             std::to_string(target),
                         num_start);
      }
      arch.edge_ops.push_back(op);
      ++in_group;
      expect('|');
      if (pos_ == s_.size()) break;
      if (s_[pos_] == '+') {
        if (in_group != target) fail("node " + std::to_string(target) + " is missing edges");
        ++pos_;
        ++target;
        in_group = 0;
        expect('|');
      }
    }
    if (in_group != target) fail("node " + std::to_string(target) + " is missing edges");
    arch.num_nodes = target + 1;
    return arch;
  }

 private:
  static bool is_name_char(char c) {
    return c != '|' && c != '~' && c != '+' && !std::isspace(static_cast<unsigned char>(c));
  }

  void expect(char c) {
    if (pos_ >= s_.size() || s_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, pos_); }

  std::string_view s_;
  const OperationVocabulary& vocab_;
  std::size_t pos_ = 0;
};

}  // namespace

Architecture parse_arch_string(std::string_view s, const OperationVocabulary& vocab) {
  return CellParser(s, vocab).parse();
}

std::string to_arch_string(const Architecture& arch, const OperationVocabulary& vocab) {
  validate(arch, vocab);
  std::string out;
  std::size_t e = 0;
  for (std::size_t target = 1; target < arch.num_nodes; ++target) {
    if (target > 1) out += '+';
    out += '|';
    for (std::size_t source = 0; source < target; ++source, ++e) {
      out += vocab.name(arch.edge_ops[e]);
      out += '~';
      out += std::to_string(source);
      out += '|';
    }
  }
  return out;
}

TokenSequence to_sequence(const Architecture& arch, const OperationVocabulary& vocab) {
  validate(arch, vocab);
  TokenSequence seq;
  seq.tokens.reserve(arch.edge_ops.size() + 2);
  seq.tokens.push_back(vocab.sos());
  for (int op : arch.edge_ops) seq.tokens.push_back(static_cast<TokenId>(op));
  seq.tokens.push_back(vocab.eos());
  return seq;
}

Architecture from_sequence(const TokenSequence& seq, std::size_t num_nodes,
                           const OperationVocabulary& vocab) {
  const auto& t = seq.tokens;
  if (t.size() < 2 || t.front() != vocab.sos() || t.back() != vocab.eos()) {
    throw DecodeError("sequence must start with SOS and end with EOS");
  }
  const std::size_t expected = edge_count(num_nodes);
  if (t.size() - 2 != expected) {
    throw DecodeError("sequence has " + std::to_string(t.size() - 2) +
                      " interior tokens, expected " + std::to_string(expected));
  }
  Architecture arch{num_nodes, {}};
  arch.edge_ops.reserve(expected);
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    if (!vocab.is_op_token(t[i])) {
      throw DecodeError("illegal interior token " + std::to_string(t[i]) + " at position " +
                        std::to_string(i));
    }
    arch.edge_ops.push_back(t[i]);
  }
  return arch;
}

AdjacencyView to_adjacency(const Architecture& arch) {
  AdjacencyView view;
  view.num_nodes = arch.num_nodes;
  view.matrix.assign(arch.num_nodes * arch.num_nodes, 0);
  const auto edges = edge_order(arch.num_nodes);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    view.matrix[edges[e].source * arch.num_nodes + edges[e].target] = 1 + arch.edge_ops.at(e);
  }
  view.flat = flatten_upper(view.matrix, arch.num_nodes);
  return view;
}

std::vector<int> flatten_upper(std::span<const int> matrix, std::size_t num_nodes) {
  std::vector<int> flat;
  flat.reserve(edge_count(num_nodes));
  for (std::size_t r = 0; r < num_nodes; ++r) {
    for (std::size_t c = r + 1; c < num_nodes; ++c) flat.push_back(matrix[r * num_nodes + c]);
  }
  return flat;
}

std::vector<int> unflatten_upper(std::span<const int> flat, std::size_t num_nodes) {
  if (flat.size() != edge_count(num_nodes)) {
    throw InputError("flat adjacency has wrong length for " + std::to_string(num_nodes) +
                     " nodes");
  }
  std::vector<int> matrix(num_nodes * num_nodes, 0);
  std::size_t i = 0;
  for (std::size_t r = 0; r < num_nodes; ++r) {
    for (std::size_t c = r + 1; c < num_nodes; ++c) matrix[r * num_nodes + c] = flat[i++];
  }
  return matrix;
}

Architecture from_adjacency(const AdjacencyView& view, const OperationVocabulary& vocab) {
  const std::size_t n = view.num_nodes;
  if (view.matrix.size() != n * n) throw InputError("adjacency matrix has wrong size");
  Architecture arch{n, {}};
  for (const auto& [target, source] : edge_order(n)) {
    const int label = view.at(source, target);
    if (label < 1 || static_cast<std::size_t>(label) > vocab.num_ops()) {
      throw InputError("adjacency entry (" + std::to_string(source) + "," +
                       std::to_string(target) + ") is not an operation label");
    }
    arch.edge_ops.push_back(label - 1);
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c <= r; ++c) {
      if (view.at(r, c) != 0) throw InputError("adjacency has entries on or below the diagonal");
    }
  }
  return arch;
}

std::uint64_t space_size(std::size_t num_ops, std::size_t num_nodes) {
  std::uint64_t size = 1;
  for (std::size_t e = 0; e < edge_count(num_nodes); ++e) {
    if (size > UINT64_MAX / num_ops) throw InputError("search space size overflows 64 bits");
    size *= num_ops;
  }
  return size;
}

Architecture architecture_at(std::uint64_t index, std::size_t num_ops, std::size_t num_nodes) {
  Architecture arch{num_nodes, std::vector<int>(edge_count(num_nodes), 0)};
  for (std::size_t e = arch.edge_ops.size(); e-- > 0;) {
    arch.edge_ops[e] = static_cast<int>(index % num_ops);
    index /= num_ops;
  }
  return arch;
}

SpaceEnumerator::SpaceEnumerator(const OperationVocabulary& vocab, std::size_t num_nodes)
    : num_ops_(vocab.num_ops()), num_nodes_(num_nodes), size_(0) {
  if (num_nodes < 2) throw InputError("enumeration needs at least 2 nodes");
  size_ = space_size(num_ops_, num_nodes_);
}

std::optional<Architecture> SpaceEnumerator::next() {
  if (cursor_ >= size_) return std::nullopt;
  return architecture_at(cursor_++, num_ops_, num_nodes_);
}

std::vector<Architecture> enumerate_space(const OperationVocabulary& vocab,
                                          std::size_t num_nodes) {
  SpaceEnumerator it(vocab, num_nodes);
  std::vector<Architecture> out;
  out.reserve(it.size());
  while (auto a = it.next()) out.push_back(std::move(*a));
  return out;
}

nlohmann::json arch_to_json(const Architecture& arch, const OperationVocabulary& vocab) {
  validate(arch, vocab);
  nlohmann::json ops = nlohmann::json::array();
  for (int op : arch.edge_ops) ops.push_back(vocab.name(op));
  return {{"num_nodes", arch.num_nodes}, {"edge_ops", std::move(ops)}};
}

Architecture arch_from_json(const nlohmann::json& j, const OperationVocabulary& vocab) {
  if (!j.is_object() || !j.contains("num_nodes") || !j.contains("edge_ops")) {
    throw InputError("architecture JSON needs 'num_nodes' and 'edge_ops'");
  }
  Architecture arch;
  arch.num_nodes = j.at("num_nodes").get<std::size_t>();
  for (const auto& op : j.at("edge_ops")) arch.edge_ops.push_back(vocab.index_of(op.get<std::string>()));
  validate(arch, vocab);
  return arch;
}

}  // namespace emprox
