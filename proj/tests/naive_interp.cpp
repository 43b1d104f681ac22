#include "naive_interp.hpp"

#include <functional>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace absparse::testing {

namespace {

struct Node {
  std::string op;
  std::vector<std::unique_ptr<Node>> kids;
};

int arity_of(const std::string& op) {
  if (op == "Filter" || op == "And" || op == "Or" || op == "Equal" || op == "EqualInt" ||
      op == "GreaterEqual" || op == "LessEqual" || op == "Greater" || op == "Less" ||
      op == "IsTouchingWall" || op == "IsTouchingCorner")
    return 2;
  if (op == "Count" || op == "Exist" || op == "GetAbove" || op == "GetBelow" ||
      op == "GetTouching" || op == "AllSameColor" || op == "AllSameShape" ||
      op == "ItemsInBox" || op == "Not" || op == "lambda" || op == "IsYellow" ||
      op == "IsBlue" || op == "IsBlack" || op == "IsSquare" || op == "IsCircle" ||
      op == "IsTriangle" || op == "IsBig" || op == "IsMedium" || op == "IsSmall" ||
      op == "IsTop" || op == "IsBottom")
    return 1;
  return 0;  // constants and the variable
}

std::unique_ptr<Node> parse(std::istringstream& in) {
  auto node = std::make_unique<Node>();
  if (!(in >> node->op)) throw std::runtime_error("naive: truncated program");
  for (int i = 0; i < arity_of(node->op); ++i) node->kids.push_back(parse(in));
  return node;
}

struct W {
  const Item* item;
};

using ItemSet = std::set<const Item*>;

struct NaiveEval {
  std::vector<Item> items;
  const Item* bound = nullptr;

  static int ext(const Item& it) {
    switch (it.size) {
      case Size::Small: return 10;
      case Size::Medium: return 20;
      default: return 30;
    }
  }
  static bool overlap_x(const Item& a, const Item& b) {
    return a.x < b.x + ext(b) && b.x < a.x + ext(a);
  }
  static bool overlap_y(const Item& a, const Item& b) {
    return a.y < b.y + ext(b) && b.y < a.y + ext(a);
  }
  static bool is_above(const Item& a, const Item& b) {
    return a.box_index == b.box_index && a.y < b.y && overlap_x(a, b);
  }
  static bool side_touch(const Item& it, const std::string& side) {
    const int e = ext(it);
    const bool top = it.y == 0, bottom = it.y + e == 100, left = it.x == 0,
               right = it.x + e == 100;
    if (side == "Side.Top") return top;
    if (side == "Side.Bottom") return bottom;
    if (side == "Side.Left") return left;
    if (side == "Side.Right") return right;
    return top || bottom || left || right;
  }
  static bool corner_touch(const Item& it, const std::string& side) {
    const int e = ext(it);
    const bool top = it.y == 0, bottom = it.y + e == 100, left = it.x == 0,
               right = it.x + e == 100;
    if (side == "Side.Top") return top && (left || right);
    if (side == "Side.Bottom") return bottom && (left || right);
    if (side == "Side.Left") return left && (top || bottom);
    if (side == "Side.Right") return right && (top || bottom);
    return (top || bottom) && (left || right);
  }
  static bool edge_touch(const Item& a, const Item& b) {
    if (a.box_index != b.box_index) return false;
    const bool xa = a.x + ext(a) == b.x || b.x + ext(b) == a.x;
    const bool ya = a.y + ext(a) == b.y || b.y + ext(b) == a.y;
    return (xa && overlap_y(a, b)) || (ya && overlap_x(a, b));
  }

  ItemSet all() const {
    ItemSet s;
    for (const Item& it : items) s.insert(&it);
    return s;
  }

  ItemSet relate(const ItemSet& src, const std::function<bool(const Item&, const Item&)>& rel) {
    ItemSet out;
    for (const Item& cand : items)
      for (const Item* s : src)
        if (&cand != s && rel(cand, *s)) {
          out.insert(&cand);
          break;
        }
    return out;
  }

  long long eval_int(const Node& n) {
    if (n.op == "Count") return static_cast<long long>(eval_set(*n.kids[0]).size());
    return std::stoll(n.op);
  }

  std::string eval_side(const Node& n) { return n.op; }

  ItemSet eval_set(const Node& n) {
    if (n.op == "ALL_ITEMS") return all();
    if (n.op == "ItemsInBox") {
      const long long b = eval_int(*n.kids[0]);
      ItemSet out;
      if (b >= 1 && b <= 3)
        for (const Item& it : items)
          if (it.box_index == b - 1) out.insert(&it);
      return out;
    }
    if (n.op == "Filter") {
      ItemSet src = eval_set(*n.kids[0]);
      const Node& lam = *n.kids[1];
      ItemSet out;
      for (const Item* it : src) {
        const Item* saved = bound;
        bound = it;
        if (eval_bool(*lam.kids[0])) out.insert(it);
        bound = saved;
      }
      return out;
    }
    if (n.op == "GetAbove") return relate(eval_set(*n.kids[0]), &NaiveEval::is_above);
    if (n.op == "GetBelow")
      return relate(eval_set(*n.kids[0]),
                    [](const Item& a, const Item& b) { return is_above(b, a); });
    if (n.op == "GetTouching") return relate(eval_set(*n.kids[0]), &NaiveEval::edge_touch);
    throw std::runtime_error("naive: not a set op: " + n.op);
  }

  const Item& eval_item(const Node& n) {
    if (n.op != "x" || !bound) throw std::runtime_error("naive: unbound variable");
    return *bound;
  }

  bool eval_bool(const Node& n) {
    const std::string& op = n.op;
    if (op == "And") return eval_bool(*n.kids[0]) && eval_bool(*n.kids[1]);
    if (op == "Or") return eval_bool(*n.kids[0]) || eval_bool(*n.kids[1]);
    if (op == "Not") return !eval_bool(*n.kids[0]);
    if (op == "Exist") return !eval_set(*n.kids[0]).empty();
    if (op == "Equal" || op == "EqualInt")
      return eval_int(*n.kids[1]) == eval_int(*n.kids[0]);
    if (op == "GreaterEqual") return eval_int(*n.kids[1]) >= eval_int(*n.kids[0]);
    if (op == "LessEqual") return eval_int(*n.kids[1]) <= eval_int(*n.kids[0]);
    if (op == "Greater") return eval_int(*n.kids[1]) > eval_int(*n.kids[0]);
    if (op == "Less") return eval_int(*n.kids[1]) < eval_int(*n.kids[0]);
    if (op == "AllSameColor" || op == "AllSameShape") {
      ItemSet s = eval_set(*n.kids[0]);
      for (const Item* a : s)
        for (const Item* b : s)
          if (op == "AllSameColor" ? a->color != b->color : a->shape != b->shape)
            return false;
      return true;
    }
    if (op == "IsTouchingWall")
      return side_touch(eval_item(*n.kids[0]), eval_side(*n.kids[1]));
    if (op == "IsTouchingCorner")
      return corner_touch(eval_item(*n.kids[0]), eval_side(*n.kids[1]));
    const Item& it = eval_item(*n.kids[0]);
    if (op == "IsYellow") return it.color == Color::Yellow;
    if (op == "IsBlue") return it.color == Color::Blue;
    if (op == "IsBlack") return it.color == Color::Black;
    if (op == "IsSquare") return it.shape == Shape::Square;
    if (op == "IsCircle") return it.shape == Shape::Circle;
    if (op == "IsTriangle") return it.shape == Shape::Triangle;
    if (op == "IsBig") return it.size == Size::Big;
    if (op == "IsMedium") return it.size == Size::Medium;
    if (op == "IsSmall") return it.size == Size::Small;
    if (op == "IsTop") {
      for (const Item& other : items)
        if (&other != &it && is_above(other, it)) return false;
      return true;
    }
    if (op == "IsBottom") {
      for (const Item& other : items)
        if (&other != &it && is_above(it, other)) return false;
      return true;
    }
    throw std::runtime_error("naive: not a bool op: " + op);
  }
};

}  // namespace

bool naive_execute(const std::string& program_text, const KnowledgeBase& kb) {
  std::istringstream in(program_text);
  const std::unique_ptr<Node> root = parse(in);
  std::string extra;
  if (in >> extra) throw std::runtime_error("naive: trailing tokens");
  NaiveEval ev;
  ev.items = kb.all_items();
  return ev.eval_bool(*root);
}

}  // namespace absparse::testing
