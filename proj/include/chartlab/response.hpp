#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "chartlab/chart_env.hpp"

namespace chartlab::resp {

// Fixed output vocabulary. Ids are stable and serialized in checkpoints;
// never renumber.
enum class Token : int {
    think_open = 0,
    think_close = 1,
    answer_open = 2,
    answer_close = 3,
    select = 4,
    s0 = 5,
    s1 = 6,
    s2 = 7,
    s3 = 8,
    c0 = 9,
    c1 = 10,
    c2 = 11,
    c3 = 12,
    c4 = 13,
    c5 = 14,
    c6 = 15,
    c7 = 16,
    argmax_row = 17,
    argmin_row = 18,
    rank_k = 19,
    k1 = 20,
    k2 = 21,
    k3 = 22,
    k4 = 23,
    read_paired = 24,
    diff = 25,
    ratio = 26,
    sum_row = 27,
    mean_row = 28,
    emit = 29,
    eos = 30,
};

inline constexpr int kVocabSize = 31;
inline constexpr int kMaxLen = 24;
inline constexpr int kVocabVersion = 1;

const std::string& token_symbol(Token t);
std::optional<Token> token_from_symbol(const std::string& s);

struct ParseError {
    std::size_t position = 0;  // byte offset for pretty text, token index for transcripts
    std::string message;
};

struct ParseResult {
    std::optional<std::vector<Token>> tokens;
    ParseError error;  // valid when !tokens

    bool ok() const { return tokens.has_value(); }
};

// Deterministic, total. Grammar-valid sequences render as the tagged
// template with a fenced JSON answer block; everything else renders as a
// plain token transcript.
std::string render(std::span<const Token> tokens);

// Exact inverse of render on its image.
ParseResult parse(const std::string& text);

// Template check: THINK_OPEN, >=1 complete operation, THINK_CLOSE,
// ANSWER_OPEN, EMIT, ANSWER_CLOSE, EOS; length <= kMaxLen; no tags elsewhere.
bool validate_grammar(std::span<const Token> tokens);

// Strips tags and maps operation tokens to executor ops (emit appended from
// the answer block). nullopt when the grammar is violated.
std::optional<std::vector<env::DslOp>> extract_program(std::span<const Token> tokens);

// Inverse direction, used for supervision traces: wrap a program (ending in
// emit) into the tagged token sequence.
std::vector<Token> tokens_for_program(std::span<const env::DslOp> program);

struct Response {
    std::vector<Token> tokens;
    std::string text;
    std::optional<std::vector<env::DslOp>> program;
};

Response make_response(std::vector<Token> tokens);

// Incremental grammar automaton shared by validate_grammar and the policy's
// structural masking. Tracks argument expectations and the token budget so
// that masked sampling always completes a valid template within kMaxLen.
//
// The template itself is purely structural: any operation sequence between
// the tags validates, and whether it executes to a value is the executor's
// concern. With operand_discipline enabled the automaton additionally
// restricts operations to those whose operands are in place (a SELECT before
// row operations, two stack values before a combiner) -- the policy uses this
// mode, so its mask and template prior cover only executable programs.
class GrammarState {
  public:
    explicit GrammarState(bool operand_discipline = false);

    // allowed()[t] is true iff appending t can still lead to a complete
    // grammar-valid sequence within kMaxLen.
    const std::array<bool, kVocabSize>& allowed() const { return allowed_; }
    bool is_allowed(Token t) const { return allowed_[static_cast<int>(t)]; }

    // Advances the automaton; returns false (and poisons the state) if t is
    // not structurally possible.
    bool advance(Token t);

    bool done() const { return phase_ == Phase::done; }

  private:
    enum class Phase { start, think, after_think, after_answer_open, after_emit, after_answer_close, done, dead };
    enum class Pending { none, series, category, rank_arg };

    void recompute_allowed();
    int min_tokens_to_finish(Phase phase, Pending pending, int completed_ops, int stack_depth) const;

    bool operand_discipline_ = false;
    Phase phase_ = Phase::start;
    Pending pending_ = Pending::none;
    int completed_ops_ = 0;
    int stack_depth_ = 0;
    bool select_done_ = false;
    int pos_ = 0;
    std::array<bool, kVocabSize> allowed_{};
};

// Versioned token-id manifest shipped with every checkpoint.
nlohmann::json vocab_manifest();

}  // namespace chartlab::resp
