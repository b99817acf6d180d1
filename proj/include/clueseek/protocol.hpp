// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clueseek/quota.hpp"

namespace clueseek {

/// Per-turn strategy: request a cropped segment, or commit to a final answer.
enum class Phase { Tool, Answer };

inline const char * to_string(Phase p) {
    return p == Phase::Tool ? "tool" : "answer";
}

enum class ParseStatus {
    Ok,
    NoActionBlock,
    AmbiguousAction,
    BadDirectiveBody,
    MissingThink,
    MultipleThink,
    BadBlockOrder,
};

inline const char * to_string(ParseStatus s) {
    switch (s) {
        case ParseStatus::Ok:               return "Ok";
        case ParseStatus::NoActionBlock:    return "NoActionBlock";
        case ParseStatus::AmbiguousAction:  return "AmbiguousAction";
        case ParseStatus::BadDirectiveBody: return "BadDirectiveBody";
        case ParseStatus::MissingThink:     return "MissingThink";
        case ParseStatus::MultipleThink:    return "MultipleThink";
        case ParseStatus::BadBlockOrder:    return "BadBlockOrder";
    }
    return "?";
}

/// Result of interpreting one raw assistant message. Phase labeling is total:
/// text with no usable action is coerced to an Answer carrying the raw text.
struct ParsedMessage {
    Phase                        phase = Phase::Answer;
    std::optional<CropDirective> directive;  // engaged iff phase == Tool
    std::string                  answer;     // meaningful iff phase == Answer
    std::string                  think_text;
    bool                         has_tool_block   = false;
    bool                         has_answer_block = false;
    bool                         format_valid     = false;
    ParseStatus                  reason           = ParseStatus::Ok;
};

namespace detail {

struct FencedBlock {
    std::string tag;
    std::string body;
};

inline std::string_view trim_view(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t' ||
                          s.back() == '\n')) {
        s.remove_suffix(1);
    }
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\n' ||
                          s.front() == '\r')) {
        s.remove_prefix(1);
    }
    return s;
}

/// Extracts ```tag fenced blocks, in order of appearance. Unterminated
/// openers are treated as prose.
inline std::vector<FencedBlock> scan_blocks(std::string_view text) {
    std::vector<FencedBlock> blocks;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t line_end = text.find('\n', pos);
        if (line_end == std::string_view::npos) line_end = text.size();
        std::string_view line = trim_view(text.substr(pos, line_end - pos));
        if (line.rfind("```", 0) == 0 && line.size() > 3) {
            const std::string tag(trim_view(line.substr(3)));
            size_t body_start = line_end == text.size() ? text.size() : line_end + 1;
            // find a closing fence line
            size_t cursor = body_start;
            while (cursor <= text.size()) {
                size_t close_end = text.find('\n', cursor);
                if (close_end == std::string_view::npos) close_end = text.size();
                if (trim_view(text.substr(cursor, close_end - cursor)) == "```") {
                    blocks.push_back(FencedBlock{
                        tag, std::string(trim_view(text.substr(body_start, cursor - body_start)))});
                    pos = close_end == text.size() ? text.size() : close_end + 1;
                    break;
                }
                if (close_end == text.size()) {
                    cursor = text.size() + 1; // unterminated
                    break;
                }
                cursor = close_end + 1;
            }
            if (cursor > text.size()) {
                pos = line_end == text.size() ? text.size() : line_end + 1;
            }
            continue;
        }
        pos = line_end == text.size() ? text.size() : line_end + 1;
    }
    return blocks;
}

/// Directive bodies carry exactly the two wire field names.
inline std::optional<CropDirective> parse_directive_body(const std::string & body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || j.size() != 2) return std::nullopt;
    try {
        CropDirective d = parse_directive(j, "directive");
        if (d.temporal_segment.start < 0.0 || d.temporal_segment.empty()) return std::nullopt;
        return d;
    } catch (const Error &) {
        return std::nullopt;
    }
}

} // namespace detail

/// Interprets a raw assistant message against the block protocol. A turn is
/// format-valid iff it is exactly one think block followed by exactly one
/// action block whose directive (if any) is in range.
inline ParsedMessage parse_assistant_message(const std::string & text) {
    const auto blocks = detail::scan_blocks(text);

    ParsedMessage pm;
    int think_count = 0, tool_count = 0, answer_count = 0;
    int first_action_pos = -1, think_pos = -1;
    std::string first_tool_body, first_answer_body;
    for (size_t i = 0; i < blocks.size(); ++i) {
        const auto & b = blocks[i];
        if (b.tag == "think") {
            ++think_count;
            if (think_pos < 0) think_pos = static_cast<int>(i);
            if (!pm.think_text.empty()) pm.think_text += "\n";
            pm.think_text += b.body;
        } else if (b.tag == "tool_call") {
            ++tool_count;
            if (tool_count == 1) first_tool_body = b.body;
            if (first_action_pos < 0) first_action_pos = static_cast<int>(i);
        } else if (b.tag == "answer") {
            ++answer_count;
            if (answer_count == 1) first_answer_body = b.body;
            if (first_action_pos < 0) first_action_pos = static_cast<int>(i);
        }
    }
    pm.has_tool_block   = tool_count > 0;
    pm.has_answer_block = answer_count > 0;

    if (tool_count + answer_count == 0) {
        pm.phase  = Phase::Answer;
        pm.answer = std::string(detail::trim_view(text));
        pm.reason = ParseStatus::NoActionBlock;
        return pm;
    }

    if (tool_count + answer_count > 1) {
        pm.reason = ParseStatus::AmbiguousAction;
        if (answer_count > 0) {
            pm.phase  = Phase::Answer;
            pm.answer = first_answer_body;
        } else if (auto d = detail::parse_directive_body(first_tool_body)) {
            pm.phase     = Phase::Tool;
            pm.directive = *d;
        } else {
            pm.phase  = Phase::Answer;
            pm.answer = std::string(detail::trim_view(text));
        }
        return pm;
    }

    // exactly one action block
    if (tool_count == 1) {
        auto d = detail::parse_directive_body(first_tool_body);
        if (!d) {
            pm.phase  = Phase::Answer;
            pm.answer = std::string(detail::trim_view(text));
            pm.reason = ParseStatus::BadDirectiveBody;
            return pm;
        }
        pm.phase     = Phase::Tool;
        pm.directive = *d;
    } else {
        pm.phase  = Phase::Answer;
        pm.answer = first_answer_body;
    }

    if (think_count == 0) {
        pm.reason = ParseStatus::MissingThink;
    } else if (think_count > 1) {
        pm.reason = ParseStatus::MultipleThink;
    } else if (think_pos > first_action_pos) {
        pm.reason = ParseStatus::BadBlockOrder;
    } else {
        pm.reason       = ParseStatus::Ok;
        pm.format_valid = true;
    }
    return pm;
}

// ---- trajectory types ------------------------------------------------------

enum class CropStatus { Ok, RefusedBudget, InvalidDirective };

inline const char * to_string(CropStatus s) {
    switch (s) {
        case CropStatus::Ok:               return "ok";
        case CropStatus::RefusedBudget:    return "refused_budget";
        case CropStatus::InvalidDirective: return "invalid_directive";
    }
    return "?";
}

struct ObservedFrame {
    double                   timestamp = 0.0;
    long                     tokens    = 0;
    std::vector<std::string> event_payloads;

    bool operator==(const ObservedFrame &) const = default;
};

struct ToolObservation {
    std::vector<ObservedFrame> frames;
    long                       total_tokens = 0;

    // Refused or invalid crops attach an empty observation.
    bool executed() const { return !frames.empty(); }

    bool operator==(const ToolObservation &) const = default;

    void validate() const {
        long sum = 0;
        for (const ObservedFrame & f : frames) sum += f.tokens;
        if (sum != total_tokens) {
            throw Error(ErrorCode::InconsistentTokens,
                        "observation total_tokens does not match frame sum");
        }
    }
};

struct Turn {
    int                            index = 0; // 1-based
    std::string                    think_text;
    std::optional<CropDirective>   directive;   // exactly one of directive/answer
    std::optional<std::string>     answer;
    std::optional<ToolObservation> observation; // present iff directive action
    bool                           format_valid = false;

    bool is_tool_turn() const { return directive.has_value(); }

    bool operator==(const Turn &) const = default;
};

enum class Termination { Answered, ForcedAnswer, OverTurn, OverBudget };

inline const char * to_string(Termination t) {
    switch (t) {
        case Termination::Answered:     return "answered";
        case Termination::ForcedAnswer: return "forced_answer";
        case Termination::OverTurn:     return "over_turn";
        case Termination::OverBudget:   return "over_budget";
    }
    return "?";
}

inline Termination termination_from_string(const std::string & s) {
    if (s == "answered")      return Termination::Answered;
    if (s == "forced_answer") return Termination::ForcedAnswer;
    if (s == "over_turn")     return Termination::OverTurn;
    if (s == "over_budget")   return Termination::OverBudget;
    throw Error(ErrorCode::Malformed, "unknown termination '" + s + "'");
}

struct Trajectory {
    std::string       sample_ref;
    std::vector<Turn> turns;
    Termination       termination     = Termination::Answered;
    int               tool_call_count = 0; // == number of directive turns

    bool operator==(const Trajectory &) const = default;

    std::optional<std::string> final_answer() const {
        if (!turns.empty() && turns.back().answer) return turns.back().answer;
        return std::nullopt;
    }
};

// ---- dialogue state machine ------------------------------------------------

inline constexpr const char * kDefaultForcedAnswerPrompt =
    "The tool invocation limit has been reached and the visual budget is exhausted. "
    "No further tool calls will be executed. Review the evidence gathered so far and "
    "reply with your final answer in an answer block now.";

struct ProtocolConfig {
    int         turn_limit            = 8;    // max tool rounds (eval 8, training 6)
    bool        force_answer_at_limit = true; // false: exceeding the limit terminates OverTurn
    std::string forced_answer_prompt  = kDefaultForcedAnswerPrompt;
};

enum class DialogueStage { AwaitingAssistant, AwaitingObservation, ForcedAnswerPending, Terminal };

struct AdvanceResult {
    ParsedMessage parsed;
    bool          rejected             = false; // over-limit tool attempt, no turn appended
    bool          observation_expected = false;
};

/// Single-owner state machine for one dialogue. The runner feeds assistant
/// text in and attaches tool observations; forced-answer prompts are exposed
/// for injection rather than delivered implicitly.
class DialogueState {
public:
    DialogueState(std::string sample_ref, ProtocolConfig cfg = {})
        : cfg_(std::move(cfg)) {
        traj_.sample_ref = std::move(sample_ref);
    }

    DialogueStage stage() const { return stage_; }
    bool terminal() const { return stage_ == DialogueStage::Terminal; }
    const Trajectory & trajectory() const { return traj_; }
    const ProtocolConfig & config() const { return cfg_; }

    bool forced_answer_pending() const { return stage_ == DialogueStage::ForcedAnswerPending; }
    bool forced_prompt_pending() const { return forced_answer_pending() && !prompt_delivered_; }
    const std::string & forced_prompt() const { return cfg_.forced_answer_prompt; }

    /// Marks the forced prompt as delivered to the policy and returns it.
    std::string take_forced_prompt() {
        prompt_delivered_ = true;
        return cfg_.forced_answer_prompt;
    }

    AdvanceResult advance(const std::string & assistant_text) {
        if (stage_ == DialogueStage::Terminal) {
            throw Error(ErrorCode::AdvanceAfterTerminal, "dialogue already terminal");
        }
        if (stage_ == DialogueStage::AwaitingObservation) {
            throw Error(ErrorCode::ObservationPending, "tool observation must be attached first");
        }

        AdvanceResult res;
        res.parsed             = parse_assistant_message(assistant_text);
        const ParsedMessage & pm = res.parsed;

        if (stage_ == DialogueStage::ForcedAnswerPending) {
            if (pm.has_answer_block && !pm.has_tool_block) {
                append_answer_turn(pm);
                finish(Termination::ForcedAnswer);
            } else if (!prompt_delivered_) {
                // The policy has not seen the forced prompt; the attempt is
                // rejected and the prompt stays exposed.
                res.rejected = true;
            } else {
                Turn t;
                t.answer       = pm.phase == Phase::Answer ? pm.answer : std::string();
                t.think_text   = pm.think_text;
                t.format_valid = false;
                append_turn(std::move(t));
                finish(forced_by_budget_ ? Termination::OverBudget : Termination::OverTurn);
            }
            return res;
        }

        if (pm.phase == Phase::Tool) {
            if (traj_.tool_call_count >= cfg_.turn_limit) {
                res.rejected = true;
                if (cfg_.force_answer_at_limit) {
                    enter_forced(false);
                } else {
                    finish(Termination::OverTurn);
                }
                return res;
            }
            Turn t;
            t.directive    = pm.directive;
            t.think_text   = pm.think_text;
            t.format_valid = pm.format_valid;
            append_turn(std::move(t));
            traj_.tool_call_count += 1;
            stage_                   = DialogueStage::AwaitingObservation;
            res.observation_expected = true;
            return res;
        }

        append_answer_turn(pm);
        finish(Termination::Answered);
        return res;
    }

    /// Completes the pending tool turn. The executed directive (clamped to the
    /// video) replaces the requested one when given. A budget refusal flips
    /// the dialogue into forced-answer mode; reaching the round limit does the
    /// same when forcing is enabled.
    void attach_observation(ToolObservation obs, CropStatus status,
                            std::optional<CropDirective> executed = std::nullopt) {
        if (stage_ != DialogueStage::AwaitingObservation) {
            throw Error(ErrorCode::NoObservationExpected, "no tool turn awaiting observation");
        }
        obs.validate();
        traj_.turns.back().observation = std::move(obs);
        if (executed) {
            traj_.turns.back().directive = executed;
        }
        if (status == CropStatus::InvalidDirective) {
            traj_.turns.back().format_valid = false;
        }
        stage_ = DialogueStage::AwaitingAssistant;

        if (status == CropStatus::RefusedBudget) {
            enter_forced(true);
        } else if (traj_.tool_call_count >= cfg_.turn_limit && cfg_.force_answer_at_limit) {
            enter_forced(false);
        }
    }

    /// Terminates from the outside (policy failure and the like). The
    /// trajectory keeps whatever turns completed so far.
    void abort(Termination termination) {
        if (stage_ == DialogueStage::Terminal) {
            throw Error(ErrorCode::AdvanceAfterTerminal, "dialogue already terminal");
        }
        if (stage_ == DialogueStage::AwaitingObservation) {
            traj_.turns.back().observation = ToolObservation{};
        }
        finish(termination);
    }

private:
    void append_turn(Turn t) {
        t.index = static_cast<int>(traj_.turns.size()) + 1;
        traj_.turns.push_back(std::move(t));
    }

    void append_answer_turn(const ParsedMessage & pm) {
        Turn t;
        t.answer       = pm.answer;
        t.think_text   = pm.think_text;
        t.format_valid = pm.format_valid;
        append_turn(std::move(t));
    }

    void enter_forced(bool by_budget) {
        stage_            = DialogueStage::ForcedAnswerPending;
        forced_by_budget_ = by_budget;
        prompt_delivered_ = false;
    }

    void finish(Termination t) {
        traj_.termination = t;
        stage_            = DialogueStage::Terminal;
    }

    ProtocolConfig cfg_;
    Trajectory     traj_;
    DialogueStage  stage_            = DialogueStage::AwaitingAssistant;
    bool           forced_by_budget_ = false;
    bool           prompt_delivered_ = false;
};

// ---- trajectory serialization ----------------------------------------------

inline std::string serialize_observation(const ToolObservation & obs) {
    std::string out = "{\"frames\":";
    out += wire::array(obs.frames, [](const ObservedFrame & f) {
        return "{\"timestamp\":" + wire::sec(f.timestamp) + ",\"tokens\":" + wire::num(f.tokens) +
               ",\"event_payloads\":" +
               wire::array(f.event_payloads, [](const std::string & p) { return wire::str(p); }) + "}";
    });
    out += ",\"total_tokens\":" + wire::num(obs.total_tokens) + "}";
    return out;
}

inline std::string serialize_turn(const Turn & t) {
    std::string out = "{\"index\":" + wire::num(t.index) +
                      ",\"think_text\":" + wire::str(t.think_text) + ",\"action\":";
    if (t.directive) {
        out += "{\"directive\":" + serialize_directive(*t.directive) + "}";
    } else {
        out += "{\"answer\":" + wire::str(t.answer.value_or("")) + "}";
    }
    if (t.observation) {
        out += ",\"observation\":" + serialize_observation(*t.observation);
    }
    out += ",\"format_valid\":" + wire::boolean(t.format_valid) + "}";
    return out;
}

inline std::string serialize_trajectory(const Trajectory & t) {
    return "{\"sample_ref\":" + wire::str(t.sample_ref) +
           ",\"termination\":" + wire::str(to_string(t.termination)) +
           ",\"tool_call_count\":" + wire::num(t.tool_call_count) +
           ",\"turns\":" + wire::array(t.turns, serialize_turn) + "}";
}

inline ToolObservation parse_observation(const json & j) {
    ToolObservation obs;
    for (const json & fj : require_field(j, "frames", "observation")) {
        ObservedFrame f;
        f.timestamp = round_ms(require_number(fj, "timestamp", "frame"));
        f.tokens    = require_integer(fj, "tokens", "frame");
        if (fj.contains("event_payloads")) {
            for (const json & p : fj.at("event_payloads")) {
                f.event_payloads.push_back(p.get<std::string>());
            }
        }
        obs.frames.push_back(std::move(f));
    }
    obs.total_tokens = require_integer(j, "total_tokens", "observation");
    obs.validate();
    return obs;
}

/// Parses one trajectory document, enforcing the structural invariants. A
/// missing tool_call_count is recomputed from the turns; a contradictory one
/// is an error.
inline Trajectory parse_trajectory(const std::string & text) {
    const json j = parse_json(text, "trajectory");
    Trajectory t;
    t.sample_ref  = require_string(j, "sample_ref", "trajectory");
    t.termination = termination_from_string(require_string(j, "termination", "trajectory"));

    int directive_turns = 0;
    const json & turns = require_field(j, "turns", "trajectory");
    for (const json & tj : turns) {
        Turn turn;
        turn.index      = static_cast<int>(require_integer(tj, "index", "turn"));
        turn.think_text = require_string(tj, "think_text", "turn");
        const json & action = require_field(tj, "action", "turn");
        const bool has_directive = action.contains("directive");
        const bool has_answer    = action.contains("answer");
        if (has_directive == has_answer) {
            throw Error(ErrorCode::Malformed, "turn action must be exactly one of directive/answer");
        }
        if (has_directive) {
            turn.directive = parse_directive(action.at("directive"), "turn directive");
            if (!tj.contains("observation")) {
                throw Error(ErrorCode::Malformed, "directive turn requires an observation");
            }
            turn.observation = parse_observation(tj.at("observation"));
            ++directive_turns;
        } else {
            turn.answer = action.at("answer").get<std::string>();
            if (tj.contains("observation")) {
                throw Error(ErrorCode::Malformed, "answer turn must not carry an observation");
            }
        }
        const json & fv = require_field(tj, "format_valid", "turn");
        if (!fv.is_boolean()) {
            throw Error(ErrorCode::Malformed, "turn: field 'format_valid' must be a boolean");
        }
        turn.format_valid = fv.get<bool>();
        if (turn.index != static_cast<int>(t.turns.size()) + 1) {
            throw Error(ErrorCode::BadTurnIndex, "turn indices must be 1-based and consecutive");
        }
        t.turns.push_back(std::move(turn));
    }
    for (size_t i = 0; i + 1 < t.turns.size(); ++i) {
        if (t.turns[i].answer) {
            throw Error(ErrorCode::NonTerminalAnswer, "answer turns are terminal");
        }
    }
    if (t.termination == Termination::Answered) {
        if (t.turns.empty() || !t.turns.back().answer) {
            throw Error(ErrorCode::InvariantViolation,
                        "termination 'answered' requires a final answer turn");
        }
    }
    if (j.contains("tool_call_count")) {
        t.tool_call_count = static_cast<int>(require_integer(j, "tool_call_count", "trajectory"));
        if (t.tool_call_count != directive_turns) {
            throw Error(ErrorCode::InconsistentCount,
                        "tool_call_count does not match the number of directive turns");
        }
    } else {
        t.tool_call_count = directive_turns;
    }
    return t;
}

} // namespace clueseek
