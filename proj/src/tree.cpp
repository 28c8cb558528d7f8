// SPDX-License-Identifier: Apache-2.0
#include "rqvqa/tree.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <utility>

#include "rqvqa/error.hpp"

namespace rqvqa {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

void collect_tokens(const TreeNode& node, std::vector<Token>& out) {
  if (node.is_leaf()) {
    out.push_back(*node.token());
    return;
  }
  for (const auto& child : node.children()) collect_tokens(child, out);
}

class BracketReader {
 public:
  explicit BracketReader(std::string_view text) : text_(text) {}

  ParseTree read_tree() {
    skip_space();
    if (at_end()) throw ParseError("empty input", pos_);
    if (peek() != '(') throw ParseError("expected '('", pos_);
    std::size_t open = pos_;
    ++pos_;
    skip_space();
    std::optional<TreeNode> root;
    if (!at_end() && peek() == '(') {
      // Unlabeled outer wrapper "( (S ...) )".
      root = read_node();
      skip_space();
      if (at_end()) throw ParseError("unbalanced parentheses", pos_);
      if (peek() != ')') throw ParseError("label missing", open + 1);
      ++pos_;
    } else {
      pos_ = open;
      root = read_node();
    }
    skip_space();
    if (!at_end()) {
      if (peek() == ')') throw ParseError("unbalanced parentheses", pos_);
      throw ParseError("trailing content after tree", pos_);
    }
    return ParseTree(std::move(*root));
  }

 private:
  TreeNode read_node() {
    std::size_t open = pos_;
    ++pos_;  // '('
    skip_space();
    if (at_end()) throw ParseError("unbalanced parentheses", pos_);
    if (peek() == ')') throw ParseError("empty node", open);
    if (peek() == '(') throw ParseError("label missing", pos_);
    std::string label = read_atom();
    skip_space();
    if (at_end()) throw ParseError("unbalanced parentheses", pos_);
    if (peek() == ')') throw ParseError("empty node", open);

    if (peek() != '(') {
      std::string word = read_atom();
      skip_space();
      if (at_end()) throw ParseError("unbalanced parentheses", pos_);
      if (peek() != ')') throw ParseError("expected ')' after leaf token", pos_);
      ++pos_;
      return TreeNode::leaf(label, Token{std::move(word), label, std::nullopt});
    }

    std::vector<TreeNode> children;
    while (true) {
      skip_space();
      if (at_end()) throw ParseError("unbalanced parentheses", pos_);
      char c = peek();
      if (c == ')') {
        ++pos_;
        break;
      }
      if (c != '(') throw ParseError("bare token among phrase children", pos_);
      children.push_back(read_node());
    }
    return TreeNode::phrase(std::move(label), std::move(children));
  }

  std::string read_atom() {
    std::size_t start = pos_;
    while (!at_end() && !is_space(peek()) && peek() != '(' && peek() != ')') ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  void skip_space() {
    while (!at_end() && is_space(peek())) ++pos_;
  }
  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }

  std::string_view text_;
  std::size_t pos_ = 0;
};

void enumerate(const TreeNode& node, TreePath& path, const std::set<std::string>& labels,
               std::vector<ConstituentRef>& out) {
  if (node.is_leaf()) return;
  if (!path.empty() && labels.count(node.label()) > 0) {
    out.push_back(ConstituentRef{path, node.label(), node.span()});
  }
  for (std::size_t i = 0; i < node.children().size(); ++i) {
    path.push_back(i);
    enumerate(node.children()[i], path, labels, out);
    path.pop_back();
  }
}

void write_bracketed(const TreeNode& node, std::string& out) {
  out += '(';
  out += node.label();
  if (node.is_leaf()) {
    out += ' ';
    out += node.token()->text;
  } else {
    for (const auto& child : node.children()) {
      out += ' ';
      write_bracketed(child, out);
    }
  }
  out += ')';
}

bool attaches_left(std::string_view word) {
  static constexpr std::array<std::string_view, 9> kAttached = {".", ",", "?", "!", ";",
                                                                ":", "'", "'s", "n't"};
  return std::find(kAttached.begin(), kAttached.end(), word) != kAttached.end();
}

}  // namespace

TreeNode TreeNode::leaf(std::string label, Token token) {
  if (label.empty()) throw InvalidArgument("tree node label is empty");
  if (token.text.empty()) throw InvalidArgument("token text is empty");
  if (std::any_of(token.text.begin(), token.text.end(), is_space)) {
    throw InvalidArgument("token text contains whitespace: '" + token.text + "'");
  }
  TreeNode node;
  node.label_ = std::move(label);
  node.token_ = std::move(token);
  node.span_ = Span{0, 1};
  return node;
}

TreeNode TreeNode::phrase(std::string label, std::vector<TreeNode> children) {
  if (label.empty()) throw InvalidArgument("tree node label is empty");
  if (children.empty()) throw InvalidArgument("phrase node '" + label + "' has no children");
  TreeNode node;
  node.label_ = std::move(label);
  node.children_ = std::move(children);
  node.reindex(0);
  return node;
}

std::vector<Token> TreeNode::tokens() const {
  std::vector<Token> out;
  collect_tokens(*this, out);
  return out;
}

std::size_t TreeNode::reindex(std::size_t start) {
  if (is_leaf()) {
    span_ = Span{start, start + 1};
    return span_.end;
  }
  std::size_t pos = start;
  for (auto& child : children_) pos = child.reindex(pos);
  span_ = Span{start, pos};
  return pos;
}

ParseTree::ParseTree(TreeNode root) : root_(std::move(root)) { root_.reindex(0); }

std::vector<std::string> ParseTree::words() const {
  std::vector<std::string> out;
  for (auto& token : tokens()) out.push_back(std::move(token.text));
  return out;
}

const TreeNode* ParseTree::find(const TreePath& path) const {
  const TreeNode* node = &root_;
  for (std::size_t index : path) {
    if (node->is_leaf() || index >= node->children().size()) return nullptr;
    node = &node->children()[index];
  }
  return node;
}

const TreeNode& ParseTree::resolve(const ConstituentRef& ref) const {
  const TreeNode* node = find(ref.path);
  if (node == nullptr) throw InvalidArgument("constituent path does not resolve");
  if (node->label() != ref.label || node->span() != ref.span) {
    throw InvalidArgument("constituent reference is stale: label or span mismatch");
  }
  return *node;
}

const std::set<std::string>& default_constituent_labels() {
  static const std::set<std::string> kLabels = {"NP", "VP", "PP", "ADJP", "ADVP", "WHNP"};
  return kLabels;
}

ParseTree parse_bracketed(std::string_view text) { return BracketReader(text).read_tree(); }

std::string to_bracketed(const TreeNode& node) {
  std::string out;
  write_bracketed(node, out);
  return out;
}

std::string render_surface(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& word : words) {
    if (!out.empty() && !attaches_left(word)) out += ' ';
    out += word;
  }
  return out;
}

std::string render_surface(const ParseTree& tree) { return render_surface(tree.words()); }

std::vector<ConstituentRef> enumerate_constituents(const ParseTree& tree,
                                                   const std::set<std::string>& labels) {
  if (labels.empty()) throw InvalidArgument("constituent label set is empty");
  std::vector<ConstituentRef> out;
  TreePath path;
  enumerate(tree.root(), path, labels, out);
  return out;
}

ParseTree substitute(const ParseTree& tree, const ConstituentRef& target, const TreeNode& source) {
  tree.resolve(target);
  TreeNode root = tree.root();
  TreeNode* node = &root;
  for (std::size_t index : target.path) node = &node->children_[index];
  *node = source;
  return ParseTree(std::move(root));
}

}  // namespace rqvqa
