#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absparse/world.hpp"

namespace absparse {

// ---------------------------------------------------------------------------
// The visual-reasoning DSL: token inventory, prefix-notation programs, the
// type stack that constrains decoding, and a deterministic executor.
// ---------------------------------------------------------------------------

// Composite types appear only as the two instantiations the inventory uses,
// so they are folded into the enum: ItemSet = Set(Item), ItemPredicate =
// Func(Item, Bool).
enum class SemType : std::uint8_t {
  Int,
  Bool,
  Item,
  Size,
  Shape,
  Color,
  Side,
  ItemSet,
  ItemPredicate,
};

std::string to_string(SemType t);

enum class TokenKind : std::uint8_t { Function, Constant, Variable, Lambda };

using TokenId = std::int32_t;

struct TokenSignature {
  std::string name;
  TokenKind kind = TokenKind::Constant;
  std::vector<SemType> arg_types;  // empty unless kind == Function; arity <= 2
  SemType return_type = SemType::Bool;

  int arity() const { return static_cast<int>(arg_types.size()); }
};

struct TypeError : Error {
  using Error::Error;
};

// Fixed, process-wide inventory. Kept in one definition (lang.cpp) so the
// token list can be reconciled against other sources without touching the
// machinery around it.
class TokenInventory {
 public:
  static const TokenInventory& instance();

  int size() const { return static_cast<int>(sigs_.size()); }
  const TokenSignature& sig(TokenId t) const { return sigs_[t]; }
  TokenId id(std::string_view name) const;              // throws on unknown token
  std::optional<TokenId> find(std::string_view name) const;

  TokenId all_items() const { return all_items_; }
  TokenId variable() const { return variable_; }
  TokenId lambda() const { return lambda_; }
  TokenId numeral(int n) const;  // n in [1, 9]
  std::optional<int> numeral_value(TokenId t) const;

  // Tokens legal for a given stack top, split by whether a lambda variable is
  // currently in scope. Precomputed; this is the hot path of beam decoding.
  const std::vector<TokenId>& valid_tokens(SemType top, bool in_lambda) const;

 private:
  TokenInventory();
  std::vector<TokenSignature> sigs_;
  std::map<std::string, TokenId, std::less<>> by_name_;
  TokenId all_items_ = -1, variable_ = -1, lambda_ = -1;
  TokenId numerals_[10];
  std::vector<TokenId> valid_[9][2];
};

// Optional restriction of the inventory (toy grammars, model vocabularies).
struct TokenSubset {
  std::vector<char> member;  // indexed by TokenId; empty means "all tokens"

  static TokenSubset all();
  static TokenSubset of(const std::vector<std::string>& names);
  bool contains(TokenId t) const {
    return member.empty() || member[static_cast<std::size_t>(t)];
  }
};

struct Program {
  std::vector<TokenId> tokens;

  std::string text() const;  // whitespace-separated prefix tokens
  static Program parse(std::string_view text);  // throws Error on unknown token

  bool operator==(const Program&) const = default;
  bool operator<(const Program& o) const { return tokens < o.tokens; }
};

// Stack of expected semantic types driving decoding. Initialized to [Bool];
// an empty stack means the program is complete. Internally the stack also
// holds scope markers that close the lambda variable's scope when the body
// subtree is finished.
class TypeStack {
 public:
  TypeStack();

  bool complete() const { return stack_.empty(); }
  SemType top() const;  // requires !complete()
  int lambda_depth() const { return lambda_depth_; }
  std::size_t depth() const;

  // Expected types, top first, scope markers skipped.
  std::vector<SemType> types() const;

  // (type, produced-inside-open-scope) pairs, top first.
  std::vector<std::pair<SemType, bool>> typed_entries() const;

  bool accepts(TokenId t) const;
  // Throws TypeError naming the expected and offered type if !accepts(t).
  void push_token(TokenId t);

  // Exactly the tokens whose application keeps the prefix completable:
  // return type matches the top, variables require an open lambda scope,
  // lambdas do not nest, and argument types must be producible where they
  // will surface (Item needs a scope; ItemPredicate needs the outer level).
  std::vector<TokenId> valid_next() const;
  std::vector<TokenId> valid_next(const TokenSubset& subset) const;

  bool operator==(const TypeStack&) const = default;

 private:
  static constexpr std::uint8_t kScopeEnd = 0xff;
  std::vector<std::uint8_t> stack_;  // SemType values or kScopeEnd markers
  int lambda_depth_ = 0;
};

// True iff running the type stack over z from [Bool] consumes every token
// legally and ends empty.
bool well_typed(const Program& z);

// Deterministic denotation of a well-typed Bool program against a KB. Total
// on well-typed input; throws TypeError on ill-typed programs.
bool execute(const Program& z, const KnowledgeBase& kb);

// Longest program the decoders will produce.
inline constexpr int kMaxProgramLen = 45;

// Seeded random walk over valid_next with a completion bias near max_len.
// Always returns a complete, well-typed program of at most max_len tokens.
Program random_program(std::uint64_t seed, int max_len = kMaxProgramLen);
Program random_program(std::uint64_t seed, int max_len, const TokenSubset& subset);

// Minimal token counts needed to complete a stack state, per token subset.
// Drives the completion bias of random_program and budgeted greedy decoding.
class CompletionCostTable {
 public:
  static constexpr int kUnproducible = 0x3fff;
  static CompletionCostTable compute(const TokenSubset& subset);
  int type_cost(SemType t, bool in_lambda) const;
  int stack_cost(const TypeStack& s) const;

 private:
  int cost_[9][2];
};

// Minimal number of tokens needed to complete the given stack state under
// the full inventory.
int min_completion_tokens(const TypeStack& s);

}  // namespace absparse
