#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "eqprior/ops.hpp"
#include "eqprior/term.hpp"

namespace eqprior {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = 0xffffffffu;

struct Node {
  Op op;
  std::uint32_t value;  // variable index, parameter slot, or integer constant
  std::array<NodeId, 2> kids{kNoNode, kNoNode};
  NodeId parent = kNoNode;
};

/// Flat expression tree. Nodes are stored in post-order (children before
/// parents), so the root is the last node and a forward sweep evaluates it.
class ExprTree {
 public:
  ExprTree() = default;

  /// Parameter slots follow the parameter names when every parameter leaf is
  /// named (a0, a1, ...), otherwise the post-order position of the leaves.
  static ExprTree from_term(const Term& term, std::vector<double> param_hints = {});

  Term to_term() const;

  std::span<const Node> nodes() const { return nodes_; }
  const Node& node(NodeId id) const { return nodes_[id]; }
  NodeId root() const { return static_cast<NodeId>(nodes_.size() - 1); }

  /// Number of nodes, k.
  std::size_t complexity() const { return nodes_.size(); }
  /// Number of distinct operator symbols (leaf kinds included), n.
  std::size_t num_operators() const;
  /// Number of free parameters, p.
  std::size_t num_params() const { return param_slots_.size(); }
  std::size_t num_variables() const { return num_variables_; }
  /// Node id of the leaf that houses each parameter slot.
  std::span<const NodeId> param_slots() const { return param_slots_; }
  /// Values of literals that were turned into parameters, one per slot, or empty.
  std::span<const double> param_hints() const { return param_hints_; }
  std::vector<std::uint32_t> int_constants() const;

  std::string_view token(NodeId id) const { return token_of(nodes_[id].op); }
  /// Distinct language-model tokens, sorted.
  std::vector<std::string> tokens() const;

  /// Prefix text of this tree as stored (not canonicalized).
  std::string to_string() const;
  /// Prefix text of the canonical form.
  std::string canonical() const;

  bool is_right_child(NodeId id) const;
  NodeId left_sibling(NodeId id) const;

 private:
  std::vector<Node> nodes_;
  std::vector<NodeId> param_slots_;
  std::vector<double> param_hints_;
  std::size_t num_variables_ = 0;
};

/// Canonical form of a tree: deterministic prefix text after normalization.
/// Equal strings denote the same family of functions.
std::string canonical_form(const ExprTree& tree);
ExprTree canonical_tree(const ExprTree& tree);

// ---------------------------------------------------------------------------
// Phrases

enum class PhraseKind : std::uint8_t { Left, Right };

/// Words run from the oldest ancestor to the target, which is last. A right
/// phrase has the target's left sibling immediately before the target.
struct Phrase {
  PhraseKind kind;
  std::vector<std::string> words;

  std::span<const std::string> context() const {
    return std::span<const std::string>(words).first(words.size() - 1);
  }
  const std::string& target() const { return words.back(); }
  bool operator==(const Phrase&) const = default;
};

/// One phrase per node. Left phrases (root, only children and left children)
/// carry up to n-1 ancestors; right phrases carry up to n-1 ancestors followed
/// by the left sibling.
std::vector<Phrase> extract_phrases(const ExprTree& tree, int n);

std::string_view to_string(PhraseKind kind);

// ---------------------------------------------------------------------------
// Evaluation

struct EvalOptions {
  /// Evaluate pow(u, v) as |u|^v.
  bool abs_pow = false;
};

/// Reusable evaluator. Not thread-safe; create one per thread. The tree must
/// outlive the evaluator.
class Evaluator {
 public:
  explicit Evaluator(const ExprTree& tree, EvalOptions opts = {});

  /// Rows of x are data points; columns are variables. The returned reference
  /// stays valid until the next call. Domain errors yield NaN/inf entries.
  const Eigen::ArrayXd& operator()(std::span<const double> theta, const Eigen::MatrixXd& x);

 private:
  struct Slot {
    bool scalar = true;
    double s = 0.0;
    Eigen::ArrayXd a;
  };

  const ExprTree* tree_;
  EvalOptions opts_;
  std::vector<Slot> slots_;
  Eigen::ArrayXd out_;
};

/// Pointwise evaluation. Throws std::invalid_argument on dimension mismatch.
Eigen::VectorXd evaluate(const ExprTree& tree, std::span<const double> theta,
                         const Eigen::MatrixXd& x, EvalOptions opts = {});

}  // namespace eqprior
