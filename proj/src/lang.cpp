#include "absparse/lang.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <limits>
#include <random>
#include <sstream>

namespace absparse {

std::string to_string(SemType t) {
  switch (t) {
    case SemType::Int: return "Int";
    case SemType::Bool: return "Bool";
    case SemType::Item: return "Item";
    case SemType::Size: return "Size";
    case SemType::Shape: return "Shape";
    case SemType::Color: return "Color";
    case SemType::Side: return "Side";
    case SemType::ItemSet: return "Set(Item)";
    case SemType::ItemPredicate: return "Func(Item,Bool)";
  }
  return "?";
}

// -- inventory ---------------------------------------------------------------

TokenInventory::TokenInventory() {
  auto add = [&](std::string name, TokenKind kind, std::vector<SemType> args,
                 SemType ret) -> TokenId {
    TokenId id = static_cast<TokenId>(sigs_.size());
    by_name_.emplace(name, id);
    sigs_.push_back(TokenSignature{std::move(name), kind, std::move(args), ret});
    return id;
  };
  auto fn = [&](const char* name, std::vector<SemType> args, SemType ret) {
    return add(name, TokenKind::Function, std::move(args), ret);
  };
  auto cst = [&](const char* name, SemType t) {
    return add(name, TokenKind::Constant, {}, t);
  };

  using T = SemType;
  for (int n = 1; n <= 9; ++n) numerals_[n] = cst(std::to_string(n).c_str(), T::Int);
  all_items_ = cst("ALL_ITEMS", T::ItemSet);
  cst("Side.Top", T::Side);
  cst("Side.Bottom", T::Side);
  cst("Side.Left", T::Side);
  cst("Side.Right", T::Side);
  cst("Side.Any", T::Side);
  variable_ = add("x", TokenKind::Variable, {}, T::Item);
  lambda_ = add("lambda", TokenKind::Lambda, {}, T::ItemPredicate);

  for (const char* name : {"IsYellow", "IsBlue", "IsBlack", "IsSquare", "IsCircle",
                           "IsTriangle", "IsBig", "IsMedium", "IsSmall", "IsTop",
                           "IsBottom"})
    fn(name, {T::Item}, T::Bool);
  fn("IsTouchingWall", {T::Item, T::Side}, T::Bool);
  fn("IsTouchingCorner", {T::Item, T::Side}, T::Bool);

  fn("Filter", {T::ItemSet, T::ItemPredicate}, T::ItemSet);
  fn("Count", {T::ItemSet}, T::Int);
  fn("Exist", {T::ItemSet}, T::Bool);
  fn("GetAbove", {T::ItemSet}, T::ItemSet);
  fn("GetBelow", {T::ItemSet}, T::ItemSet);
  fn("GetTouching", {T::ItemSet}, T::ItemSet);
  fn("AllSameColor", {T::ItemSet}, T::Bool);
  fn("AllSameShape", {T::ItemSet}, T::Bool);
  fn("ItemsInBox", {T::Int}, T::ItemSet);

  fn("And", {T::Bool, T::Bool}, T::Bool);
  fn("Or", {T::Bool, T::Bool}, T::Bool);
  fn("Not", {T::Bool}, T::Bool);

  fn("Equal", {T::Int, T::Int}, T::Bool);
  fn("EqualInt", {T::Int, T::Int}, T::Bool);  // alias kept for Table-style sources
  fn("GreaterEqual", {T::Int, T::Int}, T::Bool);
  fn("LessEqual", {T::Int, T::Int}, T::Bool);
  fn("Greater", {T::Int, T::Int}, T::Bool);
  fn("Less", {T::Int, T::Int}, T::Bool);

  // Validity tables. A token is legal for (top, in_lambda) iff its return
  // type matches the top and every argument it pushes can still be produced:
  // Item only by the bound variable (needs an open scope), ItemPredicate only
  // by a non-nested lambda (needs the outer level).
  for (int ti = 0; ti < 9; ++ti) {
    const SemType top = static_cast<SemType>(ti);
    for (int in_lambda = 0; in_lambda < 2; ++in_lambda) {
      for (TokenId t = 0; t < size(); ++t) {
        const TokenSignature& s = sigs_[t];
        if (s.return_type != top) continue;
        if (s.kind == TokenKind::Variable && !in_lambda) continue;
        if (s.kind == TokenKind::Lambda && in_lambda) continue;
        bool ok = true;
        for (SemType a : s.arg_types) {
          if (a == SemType::Item && !in_lambda) ok = false;
          if (a == SemType::ItemPredicate && in_lambda) ok = false;
        }
        if (ok) valid_[ti][in_lambda].push_back(t);
      }
    }
  }
}

const TokenInventory& TokenInventory::instance() {
  static const TokenInventory inv;
  return inv;
}

TokenId TokenInventory::id(std::string_view name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw Error("unknown token: '" + std::string(name) + "'");
  return it->second;
}

std::optional<TokenId> TokenInventory::find(std::string_view name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

TokenId TokenInventory::numeral(int n) const {
  if (n < 1 || n > 9) throw Error("numeral out of range: " + std::to_string(n));
  return numerals_[n];
}

std::optional<int> TokenInventory::numeral_value(TokenId t) const {
  for (int n = 1; n <= 9; ++n)
    if (numerals_[n] == t) return n;
  return std::nullopt;
}

const std::vector<TokenId>& TokenInventory::valid_tokens(SemType top, bool in_lambda) const {
  return valid_[static_cast<int>(top)][in_lambda ? 1 : 0];
}

TokenSubset TokenSubset::all() { return TokenSubset{}; }

TokenSubset TokenSubset::of(const std::vector<std::string>& names) {
  const auto& inv = TokenInventory::instance();
  TokenSubset s;
  s.member.assign(inv.size(), 0);
  for (const auto& n : names) s.member[inv.id(n)] = 1;
  return s;
}

// -- programs ----------------------------------------------------------------

std::string Program::text() const {
  const auto& inv = TokenInventory::instance();
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += inv.sig(tokens[i]).name;
  }
  return out;
}

Program Program::parse(std::string_view text) {
  const auto& inv = TokenInventory::instance();
  Program z;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) z.tokens.push_back(inv.id(tok));
  return z;
}

// -- type stack ---------------------------------------------------------------

TypeStack::TypeStack() { stack_.push_back(static_cast<std::uint8_t>(SemType::Bool)); }

SemType TypeStack::top() const {
  if (stack_.empty()) throw TypeError("type stack is empty: program is complete");
  assert(stack_.back() != kScopeEnd);
  return static_cast<SemType>(stack_.back());
}

std::size_t TypeStack::depth() const {
  std::size_t n = 0;
  for (std::uint8_t e : stack_)
    if (e != kScopeEnd) ++n;
  return n;
}

std::vector<SemType> TypeStack::types() const {
  std::vector<SemType> out;
  for (auto it = stack_.rbegin(); it != stack_.rend(); ++it)
    if (*it != kScopeEnd) out.push_back(static_cast<SemType>(*it));
  return out;
}

std::vector<std::pair<SemType, bool>> TypeStack::typed_entries() const {
  // Entries above a scope marker are consumed with the lambda variable bound.
  std::vector<std::pair<SemType, bool>> out;
  int markers_below = 0;
  std::vector<std::pair<SemType, bool>> bottom_up;
  for (std::uint8_t e : stack_) {
    if (e == kScopeEnd) {
      ++markers_below;
    } else {
      bottom_up.emplace_back(static_cast<SemType>(e), markers_below > 0);
    }
  }
  out.assign(bottom_up.rbegin(), bottom_up.rend());
  return out;
}

bool TypeStack::accepts(TokenId t) const {
  if (stack_.empty()) return false;
  const auto& valid = TokenInventory::instance().valid_tokens(top(), lambda_depth_ > 0);
  return std::find(valid.begin(), valid.end(), t) != valid.end();
}

void TypeStack::push_token(TokenId t) {
  const auto& inv = TokenInventory::instance();
  const TokenSignature& s = inv.sig(t);
  if (stack_.empty())
    throw TypeError("program already complete, cannot append '" + s.name + "'");
  if (!accepts(t))
    throw TypeError("token '" + s.name + "' (returns " + to_string(s.return_type) +
                    ") is invalid where " + to_string(top()) + " is expected" +
                    (lambda_depth_ > 0 ? " inside a lambda scope" : ""));
  stack_.pop_back();
  if (s.kind == TokenKind::Lambda) {
    stack_.push_back(kScopeEnd);
    stack_.push_back(static_cast<std::uint8_t>(SemType::Bool));
    ++lambda_depth_;
  } else {
    for (auto it = s.arg_types.rbegin(); it != s.arg_types.rend(); ++it)
      stack_.push_back(static_cast<std::uint8_t>(*it));
  }
  while (!stack_.empty() && stack_.back() == kScopeEnd) {
    stack_.pop_back();
    --lambda_depth_;
  }
}

std::vector<TokenId> TypeStack::valid_next() const {
  if (stack_.empty()) return {};
  return TokenInventory::instance().valid_tokens(top(), lambda_depth_ > 0);
}

std::vector<TokenId> TypeStack::valid_next(const TokenSubset& subset) const {
  if (stack_.empty()) return {};
  if (subset.member.empty()) return valid_next();
  std::vector<TokenId> out;
  for (TokenId t : valid_next())
    if (subset.contains(t)) out.push_back(t);
  return out;
}

bool well_typed(const Program& z) {
  TypeStack s;
  const auto& inv = TokenInventory::instance();
  for (TokenId t : z.tokens) {
    if (t < 0 || t >= inv.size()) return false;
    if (s.complete() || !s.accepts(t)) return false;
    s.push_token(t);
  }
  return s.complete();
}

// -- executor ----------------------------------------------------------------

namespace {

enum class SideKind : std::uint8_t { Top, Bottom, Left, Right, Any };

enum class Opcode : std::uint8_t {
  Numeral, AllItems, SideConst, Var, Lambda,
  IsYellow, IsBlue, IsBlack, IsSquare, IsCircle, IsTriangle,
  IsBig, IsMedium, IsSmall, IsTop, IsBottom,
  TouchWall, TouchCorner,
  Filter, Count, Exist, GetAbove, GetBelow, GetTouching,
  AllSameColor, AllSameShape, ItemsInBox,
  And, Or, Not,
  Equal, GreaterEqual, LessEqual, Greater, Less,
};

struct OpInfo {
  Opcode op = Opcode::Numeral;
  int numeral = 0;
  SideKind side = SideKind::Any;
};

const std::vector<OpInfo>& opcode_table() {
  static const std::vector<OpInfo> table = [] {
    const auto& inv = TokenInventory::instance();
    std::vector<OpInfo> t(inv.size());
    for (TokenId id = 0; id < inv.size(); ++id) {
      OpInfo& o = t[id];
      const std::string& name = inv.sig(id).name;
      if (auto n = inv.numeral_value(id)) {
        o.op = Opcode::Numeral;
        o.numeral = *n;
      } else if (name == "ALL_ITEMS") o.op = Opcode::AllItems;
      else if (name == "Side.Top") { o.op = Opcode::SideConst; o.side = SideKind::Top; }
      else if (name == "Side.Bottom") { o.op = Opcode::SideConst; o.side = SideKind::Bottom; }
      else if (name == "Side.Left") { o.op = Opcode::SideConst; o.side = SideKind::Left; }
      else if (name == "Side.Right") { o.op = Opcode::SideConst; o.side = SideKind::Right; }
      else if (name == "Side.Any") { o.op = Opcode::SideConst; o.side = SideKind::Any; }
      else if (name == "x") o.op = Opcode::Var;
      else if (name == "lambda") o.op = Opcode::Lambda;
      else if (name == "IsYellow") o.op = Opcode::IsYellow;
      else if (name == "IsBlue") o.op = Opcode::IsBlue;
      else if (name == "IsBlack") o.op = Opcode::IsBlack;
      else if (name == "IsSquare") o.op = Opcode::IsSquare;
      else if (name == "IsCircle") o.op = Opcode::IsCircle;
      else if (name == "IsTriangle") o.op = Opcode::IsTriangle;
      else if (name == "IsBig") o.op = Opcode::IsBig;
      else if (name == "IsMedium") o.op = Opcode::IsMedium;
      else if (name == "IsSmall") o.op = Opcode::IsSmall;
      else if (name == "IsTop") o.op = Opcode::IsTop;
      else if (name == "IsBottom") o.op = Opcode::IsBottom;
      else if (name == "IsTouchingWall") o.op = Opcode::TouchWall;
      else if (name == "IsTouchingCorner") o.op = Opcode::TouchCorner;
      else if (name == "Filter") o.op = Opcode::Filter;
      else if (name == "Count") o.op = Opcode::Count;
      else if (name == "Exist") o.op = Opcode::Exist;
      else if (name == "GetAbove") o.op = Opcode::GetAbove;
      else if (name == "GetBelow") o.op = Opcode::GetBelow;
      else if (name == "GetTouching") o.op = Opcode::GetTouching;
      else if (name == "AllSameColor") o.op = Opcode::AllSameColor;
      else if (name == "AllSameShape") o.op = Opcode::AllSameShape;
      else if (name == "ItemsInBox") o.op = Opcode::ItemsInBox;
      else if (name == "And") o.op = Opcode::And;
      else if (name == "Or") o.op = Opcode::Or;
      else if (name == "Not") o.op = Opcode::Not;
      else if (name == "Equal" || name == "EqualInt") o.op = Opcode::Equal;
      else if (name == "GreaterEqual") o.op = Opcode::GreaterEqual;
      else if (name == "LessEqual") o.op = Opcode::LessEqual;
      else if (name == "Greater") o.op = Opcode::Greater;
      else if (name == "Less") o.op = Opcode::Less;
      else throw TypeError("no semantics for token '" + name + "'");
    }
    return t;
  }();
  return table;
}

struct AstNode {
  TokenId token;
  int child0 = -1;
  int child1 = -1;
};

struct Ast {
  std::vector<AstNode> nodes;
  int root = -1;
};

int build_ast(const std::vector<TokenId>& toks, std::size_t& pos, std::vector<AstNode>& nodes) {
  const auto& inv = TokenInventory::instance();
  if (pos >= toks.size()) throw TypeError("unexpected end of program");
  const TokenId t = toks[pos++];
  const int idx = static_cast<int>(nodes.size());
  nodes.push_back(AstNode{t});
  const TokenSignature& s = inv.sig(t);
  const int n_children = s.kind == TokenKind::Lambda ? 1 : s.arity();
  if (n_children >= 1) {
    const int c = build_ast(toks, pos, nodes);
    nodes[idx].child0 = c;
  }
  if (n_children >= 2) {
    const int c = build_ast(toks, pos, nodes);
    nodes[idx].child1 = c;
  }
  return idx;
}

Ast parse_ast(const Program& z) {
  Ast ast;
  std::size_t pos = 0;
  ast.root = build_ast(z.tokens, pos, ast.nodes);
  if (pos != z.tokens.size()) throw TypeError("trailing tokens after complete program");
  return ast;
}

using ItemIndexSet = std::vector<int>;  // sorted indices into the flattened item list

struct Value {
  bool b = false;
  long long i = 0;
  SideKind side = SideKind::Any;
  int item = -1;
  int func_body = -1;  // AST node of a lambda body
  ItemIndexSet set;
};

struct Evaluator {
  const Ast& ast;
  const std::vector<Item>& items;
  int bound_item = -1;

  static bool x_overlap(const Item& a, const Item& b) {
    return a.x < b.x + extent(b.size) && b.x < a.x + extent(a.size);
  }
  static bool y_overlap(const Item& a, const Item& b) {
    return a.y < b.y + extent(b.size) && b.y < a.y + extent(a.size);
  }
  // i strictly above j: same box, smaller y, overlapping x-interval
  static bool above(const Item& i, const Item& j) {
    return i.box_index == j.box_index && i.y < j.y && x_overlap(i, j);
  }
  static bool below(const Item& i, const Item& j) {
    return i.box_index == j.box_index && i.y > j.y && x_overlap(i, j);
  }
  // edge adjacency with positive-length contact
  static bool touching(const Item& a, const Item& b) {
    if (a.box_index != b.box_index) return false;
    const int ea = extent(a.size), eb = extent(b.size);
    const bool x_adj = (a.x + ea == b.x) || (b.x + eb == a.x);
    const bool y_adj = (a.y + ea == b.y) || (b.y + eb == a.y);
    return (x_adj && y_overlap(a, b)) || (y_adj && x_overlap(a, b));
  }
  static bool touches_side(const Item& it, SideKind s) {
    const int e = extent(it.size);
    switch (s) {
      case SideKind::Top: return it.y == 0;
      case SideKind::Bottom: return it.y + e == kGridExtent;
      case SideKind::Left: return it.x == 0;
      case SideKind::Right: return it.x + e == kGridExtent;
      case SideKind::Any:
        return it.y == 0 || it.y + e == kGridExtent || it.x == 0 || it.x + e == kGridExtent;
    }
    return false;
  }
  // a corner is two orthogonal sides touched simultaneously
  static bool touches_corner(const Item& it, SideKind s) {
    const bool top = touches_side(it, SideKind::Top);
    const bool bottom = touches_side(it, SideKind::Bottom);
    const bool left = touches_side(it, SideKind::Left);
    const bool right = touches_side(it, SideKind::Right);
    const bool vert = left || right;
    switch (s) {
      case SideKind::Top: return top && vert;
      case SideKind::Bottom: return bottom && vert;
      case SideKind::Left: return left && (top || bottom);
      case SideKind::Right: return right && (top || bottom);
      case SideKind::Any: return (top || bottom) && vert;
    }
    return false;
  }

  bool apply_predicate(int func_body, int item_index) {
    const int saved = bound_item;
    bound_item = item_index;
    Value v = eval(func_body);
    bound_item = saved;
    return v.b;
  }

  ItemIndexSet related_set(const ItemIndexSet& src, bool (*rel)(const Item&, const Item&)) {
    ItemIndexSet out;
    for (int i = 0; i < static_cast<int>(items.size()); ++i) {
      for (int j : src) {
        if (i != j && rel(items[i], items[j])) {
          out.push_back(i);
          break;
        }
      }
    }
    return out;
  }

  const Item& item_arg(int node_index) { return items[eval(node_index).item]; }

  Value eval(int node_index) {
    const AstNode& node = ast.nodes[node_index];
    const OpInfo& info = opcode_table()[node.token];
    Value out;
    switch (info.op) {
      case Opcode::Numeral: out.i = info.numeral; break;
      case Opcode::SideConst: out.side = info.side; break;
      case Opcode::Var:
        if (bound_item < 0) throw TypeError("variable used outside lambda scope");
        out.item = bound_item;
        break;
      case Opcode::Lambda: out.func_body = node.child0; break;
      case Opcode::AllItems:
        for (int i = 0; i < static_cast<int>(items.size()); ++i) out.set.push_back(i);
        break;

      case Opcode::And: out.b = eval(node.child0).b && eval(node.child1).b; break;
      case Opcode::Or: out.b = eval(node.child0).b || eval(node.child1).b; break;
      case Opcode::Not: out.b = !eval(node.child0).b; break;

      // comparisons read as "m relates to threshold n", n first in prefix form:
      // GreaterEqual(1, Count(...)) holds iff Count >= 1
      case Opcode::Equal:
      case Opcode::GreaterEqual:
      case Opcode::LessEqual:
      case Opcode::Greater:
      case Opcode::Less: {
        const long long n = eval(node.child0).i;
        const long long m = eval(node.child1).i;
        switch (info.op) {
          case Opcode::Equal: out.b = (m == n); break;
          case Opcode::GreaterEqual: out.b = (m >= n); break;
          case Opcode::LessEqual: out.b = (m <= n); break;
          case Opcode::Greater: out.b = (m > n); break;
          default: out.b = (m < n); break;
        }
        break;
      }

      case Opcode::Count: out.i = static_cast<long long>(eval(node.child0).set.size()); break;
      case Opcode::Exist: out.b = !eval(node.child0).set.empty(); break;
      case Opcode::Filter: {
        Value src = eval(node.child0);
        Value pred = eval(node.child1);
        for (int i : src.set)
          if (apply_predicate(pred.func_body, i)) out.set.push_back(i);
        break;
      }
      case Opcode::GetAbove: out.set = related_set(eval(node.child0).set, &Evaluator::above); break;
      case Opcode::GetBelow: out.set = related_set(eval(node.child0).set, &Evaluator::below); break;
      case Opcode::GetTouching:
        out.set = related_set(eval(node.child0).set, &Evaluator::touching);
        break;
      case Opcode::AllSameColor:
      case Opcode::AllSameShape: {
        Value src = eval(node.child0);
        out.b = true;
        for (std::size_t i = 1; i < src.set.size(); ++i) {
          const Item& a = items[src.set[0]];
          const Item& b = items[src.set[i]];
          if (info.op == Opcode::AllSameColor ? (a.color != b.color) : (a.shape != b.shape)) {
            out.b = false;
            break;
          }
        }
        break;
      }
      case Opcode::ItemsInBox: {
        const long long n = eval(node.child0).i;
        if (n >= 1 && n <= kNumBoxes)
          for (int i = 0; i < static_cast<int>(items.size()); ++i)
            if (items[i].box_index == n - 1) out.set.push_back(i);
        break;
      }

      case Opcode::TouchWall:
        out.b = touches_side(item_arg(node.child0), eval(node.child1).side);
        break;
      case Opcode::TouchCorner:
        out.b = touches_corner(item_arg(node.child0), eval(node.child1).side);
        break;

      case Opcode::IsYellow: out.b = item_arg(node.child0).color == Color::Yellow; break;
      case Opcode::IsBlue: out.b = item_arg(node.child0).color == Color::Blue; break;
      case Opcode::IsBlack: out.b = item_arg(node.child0).color == Color::Black; break;
      case Opcode::IsSquare: out.b = item_arg(node.child0).shape == Shape::Square; break;
      case Opcode::IsCircle: out.b = item_arg(node.child0).shape == Shape::Circle; break;
      case Opcode::IsTriangle: out.b = item_arg(node.child0).shape == Shape::Triangle; break;
      case Opcode::IsBig: out.b = item_arg(node.child0).size == Size::Big; break;
      case Opcode::IsMedium: out.b = item_arg(node.child0).size == Size::Medium; break;
      case Opcode::IsSmall: out.b = item_arg(node.child0).size == Size::Small; break;
      case Opcode::IsTop: {
        const Item& it = item_arg(node.child0);
        out.b = true;
        for (const Item& other : items)
          if (&other != &it && above(other, it)) {
            out.b = false;
            break;
          }
        break;
      }
      case Opcode::IsBottom: {
        const Item& it = item_arg(node.child0);
        out.b = true;
        for (const Item& other : items)
          if (&other != &it && below(other, it)) {
            out.b = false;
            break;
          }
        break;
      }
    }
    return out;
  }
};

}  // namespace

bool execute(const Program& z, const KnowledgeBase& kb) {
  if (!well_typed(z)) throw TypeError("cannot execute ill-typed program: " + z.text());
  const Ast ast = parse_ast(z);
  const std::vector<Item> items = kb.all_items();
  Evaluator ev{ast, items};
  return ev.eval(ast.root).b;
}

// -- random programs ----------------------------------------------------------

CompletionCostTable CompletionCostTable::compute(const TokenSubset& subset) {
  const auto& inv = TokenInventory::instance();
  CompletionCostTable c;
  for (auto& row : c.cost_) row[0] = row[1] = kUnproducible;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int ti = 0; ti < 9; ++ti) {
      for (int ctx = 0; ctx < 2; ++ctx) {
        for (TokenId t : inv.valid_tokens(static_cast<SemType>(ti), ctx == 1)) {
          if (!subset.contains(t)) continue;
          const TokenSignature& s = inv.sig(t);
          int total = 1;
          if (s.kind == TokenKind::Lambda) {
            total += c.cost_[static_cast<int>(SemType::Bool)][1];
          } else {
            for (SemType a : s.arg_types) total += c.cost_[static_cast<int>(a)][ctx];
          }
          total = std::min(total, kUnproducible);
          if (total < c.cost_[ti][ctx]) {
            c.cost_[ti][ctx] = total;
            changed = true;
          }
        }
      }
    }
  }
  return c;
}

int CompletionCostTable::type_cost(SemType t, bool in_lambda) const {
  return cost_[static_cast<int>(t)][in_lambda ? 1 : 0];
}

int CompletionCostTable::stack_cost(const TypeStack& s) const {
  int total = 0;
  for (const auto& [type, in_scope] : s.typed_entries())
    total += type_cost(type, in_scope);
  return std::min(total, kUnproducible);
}

int min_completion_tokens(const TypeStack& s) {
  static const CompletionCostTable costs = CompletionCostTable::compute(TokenSubset::all());
  return costs.stack_cost(s);
}

Program random_program(std::uint64_t seed, int max_len) {
  return random_program(seed, max_len, TokenSubset::all());
}

Program random_program(std::uint64_t seed, int max_len, const TokenSubset& subset) {
  const CompletionCostTable costs = CompletionCostTable::compute(subset);
  std::mt19937_64 rng(seed);
  TypeStack stack;
  if (costs.stack_cost(stack) > max_len)
    throw Error("max_len " + std::to_string(max_len) +
                " is below the shortest completable program");
  Program z;
  while (!stack.complete()) {
    std::vector<TokenId> admissible;
    for (TokenId t : stack.valid_next(subset)) {
      TypeStack after = stack;
      after.push_token(t);
      const int need = static_cast<int>(z.tokens.size()) + 1 + costs.stack_cost(after);
      if (need <= max_len) admissible.push_back(t);
    }
    if (admissible.empty())
      throw Error("token subset cannot complete a program within max_len");
    std::uniform_int_distribution<std::size_t> pick(0, admissible.size() - 1);
    const TokenId t = admissible[pick(rng)];
    stack.push_token(t);
    z.tokens.push_back(t);
  }
  return z;
}

}  // namespace absparse
