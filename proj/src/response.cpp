#include "chartlab/response.hpp"

#include <algorithm>
#include <sstream>

namespace chartlab::resp {

namespace {

const std::string kSymbols[kVocabSize] = {
    "<thinking>", "</thinking>", "<answer>", "</answer>", "SELECT",      "S0",   "S1",    "S2",
    "S3",         "C0",          "C1",       "C2",        "C3",          "C4",   "C5",    "C6",
    "C7",         "ARGMAX_ROW",  "ARGMIN_ROW", "RANK_K",  "K1",          "K2",   "K3",    "K4",
    "READ_PAIRED", "DIFF",       "RATIO",    "SUM_ROW",   "MEAN_ROW",    "EMIT", "<eos>",
};

const std::string kPrettyAnswer = "</thinking><answer>```json\n{\"answer\": \"EMIT\"}\n```</answer>";

}  // namespace

const std::string& token_symbol(Token t) { return kSymbols[static_cast<int>(t)]; }

std::optional<Token> token_from_symbol(const std::string& s) {
    for (int i = 0; i < kVocabSize; ++i)
        if (kSymbols[i] == s) return static_cast<Token>(i);
    return std::nullopt;
}

GrammarState::GrammarState(bool operand_discipline) : operand_discipline_(operand_discipline) {
    recompute_allowed();
}

int GrammarState::min_tokens_to_finish(Phase phase, Pending pending, int completed_ops,
                                       int stack_depth) const {
    switch (phase) {
        case Phase::done: return 0;
        case Phase::after_answer_close: return 1;
        case Phase::after_emit: return 2;
        case Phase::after_answer_open: return 3;
        case Phase::after_think: return 4;
        case Phase::start:
            // THINK_OPEN + shortest operation + closing tail; under operand
            // discipline the shortest first operation is a full SELECT
            return operand_discipline_ ? 9 : 7;
        case Phase::think:
            switch (pending) {
                case Pending::series: return 7;  // series + category + closing tail
                case Pending::category: return 6;
                case Pending::rank_arg: return 6;
                case Pending::none:
                    if (operand_discipline_)
                        return (completed_ops >= 1 && stack_depth >= 1) ? 5 : 8;
                    return completed_ops >= 1 ? 5 : 6;
            }
            return 6;
        case Phase::dead: return kMaxLen + 1;
    }
    return kMaxLen + 1;
}

bool GrammarState::advance(Token t) {
    if (!is_allowed(t)) {
        phase_ = Phase::dead;
        recompute_allowed();
        return false;
    }
    switch (phase_) {
        case Phase::start:
            phase_ = Phase::think;
            break;
        case Phase::think:
            switch (pending_) {
                case Pending::series:
                    pending_ = Pending::category;
                    break;
                case Pending::category:
                    pending_ = Pending::none;
                    ++completed_ops_;
                    ++stack_depth_;
                    select_done_ = true;
                    break;
                case Pending::rank_arg:
                    pending_ = Pending::none;
                    ++completed_ops_;
                    ++stack_depth_;
                    break;
                case Pending::none:
                    switch (t) {
                        case Token::select:
                            pending_ = Pending::series;
                            break;
                        case Token::rank_k:
                            pending_ = Pending::rank_arg;
                            break;
                        case Token::diff:
                        case Token::ratio:
                            ++completed_ops_;
                            --stack_depth_;
                            break;
                        case Token::think_close:
                            phase_ = Phase::after_think;
                            break;
                        default:  // atomic value-producing operations
                            ++completed_ops_;
                            ++stack_depth_;
                            break;
                    }
                    break;
            }
            break;
        case Phase::after_think:
            phase_ = Phase::after_answer_open;
            break;
        case Phase::after_answer_open:
            phase_ = Phase::after_emit;
            break;
        case Phase::after_emit:
            phase_ = Phase::after_answer_close;
            break;
        case Phase::after_answer_close:
            phase_ = Phase::done;
            break;
        case Phase::done:
        case Phase::dead:
            phase_ = Phase::dead;
            break;
    }
    ++pos_;
    recompute_allowed();
    return phase_ != Phase::dead;
}

void GrammarState::recompute_allowed() {
    allowed_.fill(false);
    if (phase_ == Phase::dead || phase_ == Phase::done || pos_ >= kMaxLen) return;

    const int remaining = kMaxLen - pos_ - 1;  // tokens left after the next one

    auto consider = [&](Token t, Phase np, Pending npend, int nops, int nstack) {
        if (min_tokens_to_finish(np, npend, nops, nstack) <= remaining)
            allowed_[static_cast<int>(t)] = true;
    };

    switch (phase_) {
        case Phase::start:
            consider(Token::think_open, Phase::think, Pending::none, 0, 0);
            break;
        case Phase::think:
            switch (pending_) {
                case Pending::series:
                    for (int i = 0; i < 4; ++i)
                        consider(static_cast<Token>(static_cast<int>(Token::s0) + i), Phase::think,
                                 Pending::category, completed_ops_, stack_depth_);
                    break;
                case Pending::category:
                    for (int i = 0; i < 8; ++i)
                        consider(static_cast<Token>(static_cast<int>(Token::c0) + i), Phase::think,
                                 Pending::none, completed_ops_ + 1, stack_depth_ + 1);
                    break;
                case Pending::rank_arg:
                    for (int i = 0; i < 4; ++i)
                        consider(static_cast<Token>(static_cast<int>(Token::k1) + i), Phase::think,
                                 Pending::none, completed_ops_ + 1, stack_depth_ + 1);
                    break;
                case Pending::none:
                    // Without operand discipline any operation may start here:
                    // operand availability is an execution concern, not a
                    // template concern. With discipline the row operations need
                    // a completed SELECT and the combiners need two stack
                    // values.
                    consider(Token::select, Phase::think, Pending::series, completed_ops_,
                             stack_depth_);
                    if (!operand_discipline_ || select_done_) {
                        consider(Token::rank_k, Phase::think, Pending::rank_arg, completed_ops_,
                                 stack_depth_);
                        for (Token t : {Token::argmax_row, Token::argmin_row, Token::read_paired,
                                        Token::sum_row, Token::mean_row})
                            consider(t, Phase::think, Pending::none, completed_ops_ + 1,
                                     stack_depth_ + 1);
                    }
                    if (!operand_discipline_ || stack_depth_ >= 2)
                        for (Token t : {Token::diff, Token::ratio})
                            consider(t, Phase::think, Pending::none, completed_ops_ + 1,
                                     stack_depth_ - 1);
                    if (completed_ops_ >= 1 && (!operand_discipline_ || stack_depth_ >= 1))
                        consider(Token::think_close, Phase::after_think, Pending::none,
                                 completed_ops_, stack_depth_);
                    break;
            }
            break;
        case Phase::after_think:
            consider(Token::answer_open, Phase::after_answer_open, Pending::none, completed_ops_,
                     stack_depth_);
            break;
        case Phase::after_answer_open:
            consider(Token::emit, Phase::after_emit, Pending::none, completed_ops_, stack_depth_);
            break;
        case Phase::after_emit:
            consider(Token::answer_close, Phase::after_answer_close, Pending::none, completed_ops_,
                     stack_depth_);
            break;
        case Phase::after_answer_close:
            consider(Token::eos, Phase::done, Pending::none, completed_ops_, stack_depth_);
            break;
        case Phase::done:
        case Phase::dead:
            break;
    }
}

bool validate_grammar(std::span<const Token> tokens) {
    if (tokens.size() > static_cast<std::size_t>(kMaxLen)) return false;
    GrammarState st;
    for (Token t : tokens)
        if (!st.advance(t)) return false;
    return st.done();
}

std::optional<std::vector<env::DslOp>> extract_program(std::span<const Token> tokens) {
    if (!validate_grammar(tokens)) return std::nullopt;
    std::vector<env::DslOp> program;
    std::size_t i = 1;  // skip THINK_OPEN
    while (tokens[i] != Token::think_close) {
        const Token t = tokens[i];
        switch (t) {
            case Token::select: {
                const int s = static_cast<int>(tokens[i + 1]) - static_cast<int>(Token::s0);
                const int c = static_cast<int>(tokens[i + 2]) - static_cast<int>(Token::c0);
                program.push_back({env::OpKind::select, s, c});
                i += 3;
                break;
            }
            case Token::rank_k: {
                const int k = static_cast<int>(tokens[i + 1]) - static_cast<int>(Token::k1) + 1;
                program.push_back({env::OpKind::rank_k, k});
                i += 2;
                break;
            }
            case Token::argmax_row:
                program.push_back({env::OpKind::argmax_row});
                ++i;
                break;
            case Token::argmin_row:
                program.push_back({env::OpKind::argmin_row});
                ++i;
                break;
            case Token::read_paired:
                program.push_back({env::OpKind::read_paired});
                ++i;
                break;
            case Token::diff:
                program.push_back({env::OpKind::diff});
                ++i;
                break;
            case Token::ratio:
                program.push_back({env::OpKind::ratio});
                ++i;
                break;
            case Token::sum_row:
                program.push_back({env::OpKind::sum_row});
                ++i;
                break;
            case Token::mean_row:
                program.push_back({env::OpKind::mean_row});
                ++i;
                break;
            default:
                return std::nullopt;  // unreachable under validate_grammar
        }
    }
    program.push_back({env::OpKind::emit});
    return program;
}

std::vector<Token> tokens_for_program(std::span<const env::DslOp> program) {
    if (program.empty() || program.back().kind != env::OpKind::emit)
        throw ConfigError("program must end with emit");
    std::vector<Token> tokens;
    tokens.push_back(Token::think_open);
    for (std::size_t i = 0; i + 1 < program.size(); ++i) {
        const env::DslOp& op = program[i];
        switch (op.kind) {
            case env::OpKind::select:
                tokens.push_back(Token::select);
                tokens.push_back(static_cast<Token>(static_cast<int>(Token::s0) + op.a));
                tokens.push_back(static_cast<Token>(static_cast<int>(Token::c0) + op.b));
                break;
            case env::OpKind::rank_k:
                tokens.push_back(Token::rank_k);
                tokens.push_back(static_cast<Token>(static_cast<int>(Token::k1) + op.a - 1));
                break;
            case env::OpKind::argmax_row: tokens.push_back(Token::argmax_row); break;
            case env::OpKind::argmin_row: tokens.push_back(Token::argmin_row); break;
            case env::OpKind::read_paired: tokens.push_back(Token::read_paired); break;
            case env::OpKind::diff: tokens.push_back(Token::diff); break;
            case env::OpKind::ratio: tokens.push_back(Token::ratio); break;
            case env::OpKind::sum_row: tokens.push_back(Token::sum_row); break;
            case env::OpKind::mean_row: tokens.push_back(Token::mean_row); break;
            case env::OpKind::emit:
                throw ConfigError("emit may only terminate the program");
        }
    }
    tokens.push_back(Token::think_close);
    tokens.push_back(Token::answer_open);
    tokens.push_back(Token::emit);
    tokens.push_back(Token::answer_close);
    tokens.push_back(Token::eos);
    return tokens;
}

std::string render(std::span<const Token> tokens) {
    if (validate_grammar(tokens)) {
        std::ostringstream os;
        os << token_symbol(Token::think_open) << " ";
        for (std::size_t i = 1; tokens[i] != Token::think_close; ++i) os << token_symbol(tokens[i]) << " ";
        os << kPrettyAnswer;
        return os.str();
    }
    std::ostringstream os;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) os << " ";
        os << token_symbol(tokens[i]);
    }
    return os.str();
}

ParseResult parse(const std::string& text) {
    ParseResult res;
    if (text.empty()) {
        res.tokens = std::vector<Token>{};
        return res;
    }

    if (text.find("```json") != std::string::npos) {
        const std::string& open = token_symbol(Token::think_open);
        if (text.rfind(open + " ", 0) != 0) {
            res.error = {0, "expected '<thinking> ' prefix"};
            return res;
        }
        if (text.size() < open.size() + 1 + kPrettyAnswer.size() ||
            text.compare(text.size() - kPrettyAnswer.size(), kPrettyAnswer.size(), kPrettyAnswer) != 0) {
            res.error = {text.size(), "malformed answer block"};
            return res;
        }
        const std::size_t body_begin = open.size() + 1;
        const std::size_t body_end = text.size() - kPrettyAnswer.size();
        std::vector<Token> tokens{Token::think_open};
        std::size_t i = body_begin;
        while (i < body_end) {
            std::size_t j = text.find(' ', i);
            if (j == std::string::npos || j >= body_end) {
                res.error = {i, "unterminated operation list"};
                return res;
            }
            const std::string sym = text.substr(i, j - i);
            const auto tok = token_from_symbol(sym);
            if (!tok || static_cast<int>(*tok) < static_cast<int>(Token::select) ||
                *tok == Token::emit || *tok == Token::eos) {
                res.error = {i, "unknown operation token '" + sym + "'"};
                return res;
            }
            tokens.push_back(*tok);
            i = j + 1;
        }
        tokens.push_back(Token::think_close);
        tokens.push_back(Token::answer_open);
        tokens.push_back(Token::emit);
        tokens.push_back(Token::answer_close);
        tokens.push_back(Token::eos);
        if (tokens.size() > static_cast<std::size_t>(kMaxLen)) {
            res.error = {0, "sequence exceeds maximum length"};
            return res;
        }
        res.tokens = std::move(tokens);
        return res;
    }

    // token transcript
    std::vector<Token> tokens;
    std::size_t i = 0;
    std::size_t index = 0;
    while (i <= text.size()) {
        std::size_t j = text.find(' ', i);
        if (j == std::string::npos) j = text.size();
        const std::string sym = text.substr(i, j - i);
        const auto tok = token_from_symbol(sym);
        if (!tok) {
            res.error = {index, "unknown token '" + sym + "'"};
            return res;
        }
        tokens.push_back(*tok);
        ++index;
        if (j == text.size()) break;
        i = j + 1;
    }
    if (tokens.size() > static_cast<std::size_t>(kMaxLen)) {
        res.error = {0, "sequence exceeds maximum length"};
        return res;
    }
    res.tokens = std::move(tokens);
    return res;
}

Response make_response(std::vector<Token> tokens) {
    Response r;
    r.text = render(tokens);
    r.program = extract_program(tokens);
    r.tokens = std::move(tokens);
    return r;
}

nlohmann::json vocab_manifest() {
    nlohmann::json tokens = nlohmann::json::array();
    for (int i = 0; i < kVocabSize; ++i)
        tokens.push_back({{"id", i}, {"symbol", kSymbols[i]}});
    return {{"version", kVocabVersion}, {"size", kVocabSize}, {"max_len", kMaxLen}, {"tokens", tokens}};
}

}  // namespace chartlab::resp
