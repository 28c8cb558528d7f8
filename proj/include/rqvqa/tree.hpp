// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace rqvqa {

struct Token {
  std::string text;
  std::optional<std::string> pos;
  std::optional<std::string> dep;

  bool operator==(const Token&) const = default;
};

/// Half-open token index range.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t width() const noexcept { return end - start; }
  bool operator==(const Span&) const = default;
};

class ParseTree;
struct ConstituentRef;

/// A node of a constituency tree. Preterminals are leaves: they carry the POS
/// tag as `label` and exactly one token. Phrase nodes carry >= 1 child.
///
/// Spans are assigned when the node becomes part of a ParseTree; a free
/// standing node (e.g. a subtree copied out of a caption) keeps whatever spans
/// it had in its source tree until it is re-rooted.
class TreeNode {
 public:
  static TreeNode leaf(std::string label, Token token);
  static TreeNode phrase(std::string label, std::vector<TreeNode> children);

  const std::string& label() const noexcept { return label_; }
  const std::vector<TreeNode>& children() const noexcept { return children_; }
  const std::optional<Token>& token() const noexcept { return token_; }
  const Span& span() const noexcept { return span_; }
  bool is_leaf() const noexcept { return token_.has_value(); }

  /// Leaf tokens in left-to-right order.
  std::vector<Token> tokens() const;

  bool operator==(const TreeNode&) const = default;

 private:
  friend class ParseTree;
  friend ParseTree substitute(const ParseTree&, const ConstituentRef&, const TreeNode&);

  TreeNode() = default;
  std::size_t reindex(std::size_t start);

  std::string label_;
  std::vector<TreeNode> children_;
  std::optional<Token> token_;
  Span span_;
};

/// Sequence of child indices from the root.
using TreePath = std::vector<std::size_t>;

struct ConstituentRef {
  TreePath path;
  std::string label;
  Span span;

  bool operator==(const ConstituentRef&) const = default;
};

/// Immutable constituency parse tree. All spans are consistent with the leaf order.
class ParseTree {
 public:
  explicit ParseTree(TreeNode root);

  const TreeNode& root() const noexcept { return root_; }
  std::vector<Token> tokens() const { return root_.tokens(); }
  std::vector<std::string> words() const;

  /// Node at `path`, or nullptr when the path does not resolve.
  const TreeNode* find(const TreePath& path) const;
  /// Node at `ref.path`; throws InvalidArgument unless label and span match too.
  const TreeNode& resolve(const ConstituentRef& ref) const;

  bool operator==(const ParseTree&) const = default;

 private:
  TreeNode root_;
};

/// Phrase labels eligible for substitution when none are configured.
const std::set<std::string>& default_constituent_labels();

/// Reads one Penn-Treebank style bracketed tree, e.g. "(S (NP (DT the) (NN cat)) (VP (VBZ sits)))".
/// A single unlabeled outer wrapper "( (S ...) )" is accepted and dropped.
/// Throws ParseError carrying the byte offset of the defect.
ParseTree parse_bracketed(std::string_view text);

/// Inverse of parse_bracketed: single-space separated canonical bracketing.
std::string to_bracketed(const TreeNode& node);
inline std::string to_bracketed(const ParseTree& tree) { return to_bracketed(tree.root()); }

/// Space-joined surface form. Punctuation and clitic tokens attach to the
/// preceding token: . , ? ! ; : ' 's n't
std::string render_surface(const std::vector<std::string>& words);
std::string render_surface(const ParseTree& tree);

/// Every non-root phrase node whose label is in `labels`, in pre-order.
std::vector<ConstituentRef> enumerate_constituents(const ParseTree& tree,
                                                   const std::set<std::string>& labels);

/// Copy of `tree` with the node at `target` replaced by `source`. Spans are recomputed.
ParseTree substitute(const ParseTree& tree, const ConstituentRef& target, const TreeNode& source);

}  // namespace rqvqa
