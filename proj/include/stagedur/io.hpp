#pragma once

#include "stagedur/errors.hpp"
#include "stagedur/format.hpp"
#include "stagedur/model.hpp"
#include "stagedur/strategy.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace stagedur {

namespace detail {

struct Token {
    std::string_view text;
    std::size_t column; ///< 1-based
};

struct Line {
    std::size_t number; ///< 1-based
    std::vector<Token> tokens;
};

/// Splits on whitespace after dropping '#' comments; blank lines are skipped.
inline std::vector<Line> tokenize(std::string_view text) {
    std::vector<Line> out;
    std::size_t number = 0, pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view raw = text.substr(pos, end - pos);
        ++number;
        if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        Line line{number, {}};
        std::size_t i = 0;
        while (i < raw.size()) {
            while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
            const std::size_t start = i;
            while (i < raw.size() && !std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
            if (i > start) line.tokens.push_back({raw.substr(start, i - start), start + 1});
        }
        if (!line.tokens.empty()) out.push_back(std::move(line));
        if (end == text.size()) break;
        pos = end + 1;
    }
    return out;
}

inline double parse_number(const Line& line, const Token& tok) {
    double v = 0.0;
    const char* first = tok.text.data();
    const char* last = first + tok.text.size();
    if (first != last && *first == '+') ++first;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last)
        throw Error(ErrorCode::ParseError, line.number, tok.column,
                    "invalid number '" + std::string(tok.text) + "'");
    return v;
}

inline void expect_fields(const Line& line, std::size_t n, const char* shape) {
    if (line.tokens.size() < n)
        throw Error(ErrorCode::ParseError, line.number,
                    line.tokens.back().column + line.tokens.back().text.size(),
                    std::string("expected ") + shape);
    if (line.tokens.size() > n)
        throw Error(ErrorCode::ParseError, line.number, line.tokens[n].column,
                    std::string("unexpected '") + std::string(line.tokens[n].text) + "', expected " +
                        shape);
}

/// Name table for one declared set.
class NameIndex {
public:
    NameIndex(const char* kind) : kind_(kind) {}

    void declare(const Line& line, const Token& tok) {
        const std::string name(tok.text);
        if (!index_.emplace(name, names_.size()).second)
            throw Error(ErrorCode::DuplicateEntry, line.number, tok.column,
                        std::string(kind_) + " '" + name + "' declared twice");
        names_.push_back(name);
        positions_.push_back({line.number, tok.column});
    }
    std::size_t lookup(const Line& line, const Token& tok) const {
        auto it = index_.find(std::string(tok.text));
        if (it == index_.end())
            throw Error(ErrorCode::UnknownName, line.number, tok.column,
                        std::string("unknown ") + kind_ + " '" + std::string(tok.text) + "'");
        return it->second;
    }
    const std::vector<std::string>& names() const noexcept { return names_; }
    const std::vector<SourcePos>& positions() const noexcept { return positions_; }
    std::size_t size() const noexcept { return names_.size(); }

private:
    const char* kind_;
    std::vector<std::string> names_;
    std::vector<SourcePos> positions_;
    std::map<std::string, std::size_t> index_;
};

/// Section-structured reader shared by the model and controller formats.
class SectionReader {
public:
    using Handler = std::function<void(const Line&, std::size_t first_token)>;

    void on(const std::string& section, Handler h) { handlers_[section] = std::move(h); }

    /// Returns the header line of each section seen.
    std::map<std::string, std::size_t> run(const std::vector<Line>& lines) {
        std::map<std::string, std::size_t> seen;
        const Handler* current = nullptr;
        for (const Line& line : lines) {
            const Token& head = line.tokens.front();
            std::size_t first = 0;
            if (head.text.size() > 1 && head.text.back() == ':') {
                const std::string name(head.text.substr(0, head.text.size() - 1));
                auto it = handlers_.find(name);
                if (it == handlers_.end())
                    throw Error(ErrorCode::ParseError, line.number, head.column,
                                "unknown section '" + name + "'");
                if (!seen.emplace(name, line.number).second)
                    throw Error(ErrorCode::DuplicateEntry, line.number, head.column,
                                "section '" + name + "' repeated");
                current = &it->second;
                first = 1;
                if (line.tokens.size() == 1) continue;
            } else if (!current) {
                throw Error(ErrorCode::ParseError, line.number, head.column,
                            "expected a section header, found '" + std::string(head.text) + "'");
            }
            (*current)(line, first);
        }
        return seen;
    }

private:
    std::map<std::string, Handler> handlers_;
};

/// Copy of `line` without its first `n` tokens.
inline Line drop(const Line& line, std::size_t n) {
    return Line{line.number, std::vector<Token>(line.tokens.begin() + static_cast<std::ptrdiff_t>(n),
                                                line.tokens.end())};
}

} // namespace detail

/**
 * Parses the line-oriented model format:
 *
 *   states: w1 w2          # names, also accepted on following lines
 *   actions: a b
 *   signals: s1
 *   signal_map:            # state signal
 *   init:                  # state prob
 *   payoff:                # state action value (omitted entries are 0)
 *   transition:            # state action next prob (every (state, action) needs a row)
 *
 * With `normalize`, transition rows and init are rescaled to sum to one
 * before validation.
 */
inline PomdpModel parse_pomdp(std::string_view text, bool normalize = false) {
    using namespace detail;
    const std::vector<Line> lines = tokenize(text);
    NameIndex states("state"), actions("action"), signals("signal");
    std::vector<std::pair<Line, std::size_t>> deferred_signal, deferred_init, deferred_payoff,
        deferred_transition;

    SectionReader reader;
    auto names_into = [](NameIndex& idx) {
        return [&idx](const Line& line, std::size_t first) {
            for (std::size_t i = first; i < line.tokens.size(); ++i) idx.declare(line, line.tokens[i]);
        };
    };
    auto defer_into = [](std::vector<std::pair<Line, std::size_t>>& sink) {
        return [&sink](const Line& line, std::size_t first) { sink.emplace_back(line, first); };
    };
    reader.on("states", names_into(states));
    reader.on("actions", names_into(actions));
    reader.on("signals", names_into(signals));
    reader.on("signal_map", defer_into(deferred_signal));
    reader.on("init", defer_into(deferred_init));
    reader.on("payoff", defer_into(deferred_payoff));
    reader.on("transition", defer_into(deferred_transition));
    const auto seen = reader.run(lines);

    const std::size_t end_line = lines.empty() ? 1 : lines.back().number + 1;
    for (const char* required : {"states", "actions", "signals", "transition"})
        if (!seen.count(required))
            throw Error(ErrorCode::ParseError, end_line, 1,
                        std::string("missing section '") + required + "'");

    const std::size_t ns = states.size(), na = actions.size();
    ModelData d;
    d.states = states.names();
    d.actions = actions.names();
    d.signals = signals.names();
    d.signal_map.assign(ns, kNoSignal);
    d.payoff.assign(ns * na, 0.0);
    d.transition.assign(ns * na * ns, 0.0);
    d.init.assign(ns, 0.0);
    SourcePositions where;
    where.state = states.positions();
    where.payoff.resize(ns * na);
    where.row.resize(ns * na);
    where.entry.resize(ns * na * ns);
    where.init.resize(ns);
    where.init_section = {seen.count("init") ? seen.at("init") : end_line, 1};

    for (const auto& [full, first] : deferred_signal) {
        const Line line = drop(full, first);
        expect_fields(line, 2, "'state signal'");
        const std::size_t s = states.lookup(line, line.tokens[0]);
        const std::size_t z = signals.lookup(line, line.tokens[1]);
        if (d.signal_map[s] != kNoSignal)
            throw Error(ErrorCode::DuplicateEntry, line.number, line.tokens[0].column,
                        "signal of state '" + d.states[s] + "' given twice");
        d.signal_map[s] = z;
    }
    std::vector<bool> init_set(ns, false);
    for (const auto& [full, first] : deferred_init) {
        const Line line = drop(full, first);
        expect_fields(line, 2, "'state probability'");
        const std::size_t s = states.lookup(line, line.tokens[0]);
        const double p = parse_number(line, line.tokens[1]);
        if (init_set[s])
            throw Error(ErrorCode::DuplicateEntry, line.number, line.tokens[0].column,
                        "init of state '" + d.states[s] + "' given twice");
        init_set[s] = true;
        d.init[s] = p;
        where.init[s] = {line.number, line.tokens[0].column};
    }
    std::vector<bool> payoff_set(ns * na, false);
    for (const auto& [full, first] : deferred_payoff) {
        const Line line = drop(full, first);
        expect_fields(line, 3, "'state action value'");
        const std::size_t s = states.lookup(line, line.tokens[0]);
        const std::size_t a = actions.lookup(line, line.tokens[1]);
        const double g = parse_number(line, line.tokens[2]);
        if (payoff_set[s * na + a])
            throw Error(ErrorCode::DuplicateEntry, line.number, line.tokens[0].column,
                        "payoff of state '" + d.states[s] + "' action '" + d.actions[a] +
                            "' given twice");
        payoff_set[s * na + a] = true;
        d.payoff[s * na + a] = g;
        where.payoff[s * na + a] = {line.number, line.tokens[0].column};
    }
    std::vector<bool> row_set(ns * na, false), entry_set(ns * na * ns, false);
    for (const auto& [full, first] : deferred_transition) {
        const Line line = drop(full, first);
        expect_fields(line, 4, "'state action next probability'");
        const std::size_t s = states.lookup(line, line.tokens[0]);
        const std::size_t a = actions.lookup(line, line.tokens[1]);
        const std::size_t t = states.lookup(line, line.tokens[2]);
        const double p = parse_number(line, line.tokens[3]);
        const std::size_t at = (s * na + a) * ns + t;
        if (entry_set[at])
            throw Error(ErrorCode::DuplicateEntry, line.number, line.tokens[0].column,
                        "transition state '" + d.states[s] + "' action '" + d.actions[a] +
                            "' next '" + d.states[t] + "' given twice");
        entry_set[at] = true;
        if (!row_set[s * na + a]) where.row[s * na + a] = {line.number, line.tokens[0].column};
        row_set[s * na + a] = true;
        where.entry[at] = {line.number, line.tokens[0].column};
        d.transition[at] = p;
    }
    const std::size_t transition_line = seen.at("transition");
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t a = 0; a < na; ++a)
            if (!row_set[s * na + a])
                throw Error(ErrorCode::ParseError, transition_line, 1,
                            "missing transition row for state '" + d.states[s] + "' action '" +
                                d.actions[a] + "'");
    if (normalize) d = normalize_model(std::move(d));
    return validate_model(std::move(d), &where);
}

/// Canonical text: declaration order, zero entries omitted, 17 significant digits.
inline std::string serialize_pomdp(const PomdpModel& m) {
    std::ostringstream out;
    auto names = [&](const char* head, const std::vector<std::string>& v) {
        out << head;
        for (const auto& n : v) out << ' ' << n;
        out << '\n';
    };
    const ModelData& d = m.data();
    names("states:", d.states);
    names("actions:", d.actions);
    names("signals:", d.signals);
    out << "signal_map:\n";
    for (StateIndex s = 0; s < m.num_states(); ++s)
        out << d.states[s] << ' ' << d.signals[m.signal(s)] << '\n';
    out << "init:\n";
    for (StateIndex s = 0; s < m.num_states(); ++s)
        if (m.init(s) != 0.0) out << d.states[s] << ' ' << format_real17(m.init(s)) << '\n';
    bool any_payoff = false;
    for (double g : d.payoff) any_payoff = any_payoff || g != 0.0;
    if (any_payoff) {
        out << "payoff:\n";
        for (StateIndex s = 0; s < m.num_states(); ++s)
            for (ActionIndex a = 0; a < m.num_actions(); ++a)
                if (m.payoff(s, a) != 0.0)
                    out << d.states[s] << ' ' << d.actions[a] << ' ' << format_real17(m.payoff(s, a))
                        << '\n';
    }
    out << "transition:\n";
    for (StateIndex s = 0; s < m.num_states(); ++s)
        for (ActionIndex a = 0; a < m.num_actions(); ++a)
            for (StateIndex t = 0; t < m.num_states(); ++t)
                if (m.transition(s, a, t) != 0.0)
                    out << d.states[s] << ' ' << d.actions[a] << ' ' << d.states[t] << ' '
                        << format_real17(m.transition(s, a, t)) << '\n';
    return out.str();
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/**
 * Controller files, in the same style, against a model's action and signal names:
 *
 *   memory: q0 q1
 *   init:      # signal memory [prob]
 *   action:    # memory action prob
 *   update:    # memory action signal next [prob]
 *
 * A missing probability means 1. Unlisted entries are 0; every memory node
 * needs an action rule and every (memory, action, signal) an update row.
 */
inline FiniteStateController parse_controller(std::string_view text, const PomdpModel& m) {
    using namespace detail;
    const std::vector<Line> lines = tokenize(text);
    NameIndex memory("memory"), actions("action"), signals("signal");
    for (const auto& a : m.data().actions) actions.declare(Line{0, {}}, Token{a, 0});
    for (const auto& z : m.data().signals) signals.declare(Line{0, {}}, Token{z, 0});
    std::vector<std::pair<Line, std::size_t>> init_lines, action_lines, update_lines;

    SectionReader reader;
    reader.on("memory", [&](const Line& line, std::size_t first) {
        for (std::size_t i = first; i < line.tokens.size(); ++i) memory.declare(line, line.tokens[i]);
    });
    reader.on("init", [&](const Line& l, std::size_t f) { init_lines.emplace_back(l, f); });
    reader.on("action", [&](const Line& l, std::size_t f) { action_lines.emplace_back(l, f); });
    reader.on("update", [&](const Line& l, std::size_t f) { update_lines.emplace_back(l, f); });
    const auto seen = reader.run(lines);
    const std::size_t end_line = lines.empty() ? 1 : lines.back().number + 1;
    for (const char* required : {"memory", "init", "action", "update"})
        if (!seen.count(required))
            throw Error(ErrorCode::ParseError, end_line, 1,
                        std::string("missing section '") + required + "'");

    const std::size_t nq = memory.size(), na = m.num_actions(), nz = m.num_signals();
    auto optional_prob = [](const Line& line, std::size_t n) {
        if (line.tokens.size() == n + 1) return parse_number(line, line.tokens[n]);
        return 1.0;
    };
    auto fields = [](const Line& line, std::size_t n, const char* shape) {
        expect_fields(line, line.tokens.size() == n ? n : n + 1, shape);
    };

    std::vector<std::vector<double>> init(nz, std::vector<double>(nq, 0.0));
    std::vector<std::vector<bool>> init_seen(nz, std::vector<bool>(nq, false));
    for (const auto& [full, first] : init_lines) {
        const Line line = drop(full, first);
        fields(line, 2, "'signal memory [probability]'");
        const std::size_t z = signals.lookup(line, line.tokens[0]);
        const std::size_t q = memory.lookup(line, line.tokens[1]);
        if (init_seen[z][q])
            throw Error(ErrorCode::DuplicateEntry, line.number, line.tokens[0].column,
                        "init entry given twice");
        init_seen[z][q] = true;
        init[z][q] = optional_prob(line, 2);
    }
    std::vector<std::vector<double>> rule(nq, std::vector<double>(na, 0.0));
    std::vector<std::vector<bool>> rule_seen(nq, std::vector<bool>(na, false));
    for (const auto& [full, first] : action_lines) {
        const Line line = drop(full, first);
        fields(line, 2, "'memory action [probability]'");
        const std::size_t q = memory.lookup(line, line.tokens[0]);
        const std::size_t a = actions.lookup(line, line.tokens[1]);
        if (rule_seen[q][a])
            throw Error(ErrorCode::DuplicateEntry, line.number, line.tokens[0].column,
                        "action entry given twice");
        rule_seen[q][a] = true;
        rule[q][a] = optional_prob(line, 2);
    }
    std::vector<double> update(nq * na * nz * nq, 0.0);
    std::vector<bool> update_seen(update.size(), false);
    for (const auto& [full, first] : update_lines) {
        const Line line = drop(full, first);
        fields(line, 4, "'memory action signal next [probability]'");
        const std::size_t q = memory.lookup(line, line.tokens[0]);
        const std::size_t a = actions.lookup(line, line.tokens[1]);
        const std::size_t z = signals.lookup(line, line.tokens[2]);
        const std::size_t q2 = memory.lookup(line, line.tokens[3]);
        const std::size_t at = ((q * na + a) * nz + z) * nq + q2;
        if (update_seen[at])
            throw Error(ErrorCode::DuplicateEntry, line.number, line.tokens[0].column,
                        "update entry given twice");
        update_seen[at] = true;
        update[at] = optional_prob(line, 4);
    }
    std::vector<MixedAction> rules;
    for (std::size_t q = 0; q < nq; ++q) {
        double sum = 0.0;
        for (double w : rule[q]) sum += w;
        if (std::abs(sum - 1.0) > kProbabilityTolerance)
            throw Error(ErrorCode::RowNotStochastic, seen.at("action"), 1,
                        "action rule of memory '" + memory.names()[q] + "' sums to " + format_real(sum));
        rules.emplace_back(rule[q]);
    }
    return FiniteStateController(nz, std::move(init), std::move(rules), std::move(update),
                                 memory.names());
}

/// Strategy specs: `seq:a,b,...` (cyclic), `fsc:<file>`, `uniform`.
inline std::shared_ptr<const Strategy> parse_strategy_spec(
    const std::string& spec, const PomdpModel& m,
    const std::function<std::string(const std::string&)>& read_file = read_text_file) {
    if (spec == "uniform")
        return std::make_shared<SequenceStrategy>(SequenceStrategy::uniform(m.num_actions()));
    if (spec.rfind("seq:", 0) == 0) {
        std::vector<MixedAction> seq;
        std::stringstream list(spec.substr(4));
        std::string name;
        while (std::getline(list, name, ',')) {
            const auto& acts = m.data().actions;
            auto it = std::find(acts.begin(), acts.end(), name);
            if (it == acts.end())
                throw Error(ErrorCode::UnknownName, "unknown action '" + name + "' in strategy spec");
            seq.push_back(MixedAction::pure(m.num_actions(), static_cast<ActionIndex>(it - acts.begin())));
        }
        if (seq.empty()) throw Error(ErrorCode::InvalidArgument, "empty sequence in strategy spec");
        return std::make_shared<SequenceStrategy>(std::move(seq));
    }
    if (spec.rfind("fsc:", 0) == 0) {
        const std::string path = spec.substr(4);
        try {
            return std::make_shared<FiniteStateController>(parse_controller(read_file(path), m));
        } catch (const Error& e) {
            throw e.in_file(path);
        }
    }
    throw Error(ErrorCode::InvalidArgument,
                "strategy spec must be 'seq:<actions>', 'fsc:<file>' or 'uniform', got '" + spec + "'");
}

/**
 * Filtered-history tokens: the first signal, then alternating action and
 * signal names, e.g. `s1 a s1 b s2`.
 */
inline History parse_history_tokens(const std::vector<std::string>& tokens, const PomdpModel& m) {
    auto find = [](const std::vector<std::string>& v, const std::string& x, const char* kind) {
        auto it = std::find(v.begin(), v.end(), x);
        if (it == v.end())
            throw Error(ErrorCode::UnknownName, std::string("unknown ") + kind + " '" + x + "' in history");
        return static_cast<std::size_t>(it - v.begin());
    };
    if (tokens.empty() || tokens.size() % 2 == 0)
        throw Error(ErrorCode::InvalidArgument,
                    "history needs a first signal then action/signal pairs");
    History h(find(m.data().signals, tokens[0], "signal"));
    for (std::size_t i = 1; i + 1 < tokens.size(); i += 2)
        h.steps.emplace_back(find(m.data().actions, tokens[i], "action"),
                             find(m.data().signals, tokens[i + 1], "signal"));
    return h;
}

/// One sweep result line.
struct SweepRow {
    double h = 1.0;
    std::optional<double> lambda;
    double value = 0.0;
    std::string mode;
    std::string diag;
    std::optional<std::uint64_t> seed;
};

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

/// Header `h,lambda,value,mode,diag,seed`, LF line endings, shortest round-trip numbers.
inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "h,lambda,value,mode,diag,seed\n";
    for (const auto& r : rows) {
        if (!std::isfinite(r.value))
            throw Error(ErrorCode::InvalidArgument, "sweep value is not finite");
        out << format_real(r.h) << ',' << (r.lambda ? format_real(*r.lambda) : "") << ','
            << format_real(r.value) << ',' << csv_field(r.mode) << ',' << csv_field(r.diag) << ','
            << (r.seed ? std::to_string(*r.seed) : "") << '\n';
    }
}

} // namespace stagedur
