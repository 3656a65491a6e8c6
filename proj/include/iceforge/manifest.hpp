#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "iceforge/errors.hpp"
#include "iceforge/verspec.hpp"

namespace iceforge {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

enum class Ecosystem { PY, JS };
enum class Source { INDEX, GIT };
enum class Environment { ISOLATED, GLOBAL, PROJECT };

struct Entrypoint {
    std::string cli_name;
    std::string entry; // relative executable path within the installed tool

    bool operator==(const Entrypoint&) const = default;
};

struct ToolSpec {
    std::string name;
    Ecosystem ecosystem = Ecosystem::PY;
    Source source = Source::INDEX;
    std::optional<std::string> version_pin; // required iff source == INDEX
    std::optional<std::string> git_url;     // required iff source == GIT
    std::optional<std::string> git_commit;  // 40 lowercase hex, iff source == GIT
    Environment environment = Environment::ISOLATED;
    std::vector<Entrypoint> entrypoints;

    bool operator==(const ToolSpec&) const = default;
};

struct GitPin {
    std::string url;
    std::string commit;

    bool operator==(const GitPin&) const = default;
};

/// The four Dockerfile-style configuration lists plus the global
/// requirements, with overrides already folded into each ToolSpec.
struct Manifest {
    std::vector<ToolSpec> python_tools;
    std::vector<ToolSpec> nodejs_tools;
    std::set<std::string> system_tools;
    std::map<std::string, GitPin> git_tools;
    std::vector<std::string> global_requirements;

    bool operator==(const Manifest&) const = default;
};

enum class ToolClass { STATIC_ISOLATED, DYNAMIC_GLOBAL, STATIC_PROJECT };

inline const char* tool_class_name(ToolClass c) {
    switch (c) {
    case ToolClass::STATIC_ISOLATED: return "STATIC_ISOLATED";
    case ToolClass::DYNAMIC_GLOBAL: return "DYNAMIC_GLOBAL";
    case ToolClass::STATIC_PROJECT: return "STATIC_PROJECT";
    }
    return "?";
}

inline bool valid_identifier(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!(std::islower(static_cast<unsigned char>(c)) ||
              std::isdigit(static_cast<unsigned char>(c)) || c == '_' || c == '-'))
            return false;
    return true;
}

inline bool valid_commit_hash(std::string_view s) {
    if (s.size() != 40) return false;
    for (char c : s)
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
    return true;
}

inline const ToolSpec* find_tool(const Manifest& m, std::string_view name) {
    for (const ToolSpec& t : m.python_tools)
        if (t.name == name) return &t;
    for (const ToolSpec& t : m.nodejs_tools)
        if (t.name == name) return &t;
    return nullptr;
}

/// Manifest-order view: python_tools first, then nodejs_tools.
inline std::vector<const ToolSpec*> all_tools(const Manifest& m) {
    std::vector<const ToolSpec*> out;
    out.reserve(m.python_tools.size() + m.nodejs_tools.size());
    for (const ToolSpec& t : m.python_tools) out.push_back(&t);
    for (const ToolSpec& t : m.nodejs_tools) out.push_back(&t);
    return out;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

class ManifestParser {
public:
    explicit ManifestParser(std::string_view text) : text_(text) {}

    struct RawList {
        std::vector<std::pair<std::string, int>> values; // (string, line)
    };

    Manifest parse() {
        parse_statements();
        return resolve();
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;

    std::map<std::string, RawList> lists_;
    std::vector<std::pair<std::string, std::optional<RawList>>> tables_; // [tool.<name>] entrypoints
    bool seen_table_ = false;

    [[noreturn]] void fail(const std::string& msg) const {
        throw Error(ErrorCode::SyntaxError,
                    "line " + std::to_string(line_) + ", col " + std::to_string(col_) + ": " + msg);
    }

    bool at_end() const { return pos_ >= text_.size(); }
    char peek() const { return at_end() ? '\0' : text_[pos_]; }

    char advance() {
        char c = text_[pos_++];
        if (c == '\n') { ++line_; col_ = 1; }
        else ++col_;
        return c;
    }

    void skip_trivia() {
        while (!at_end()) {
            char c = peek();
            if (c == '#') {
                while (!at_end() && peek() != '\n') advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                return;
            }
        }
    }

    std::string parse_bare_key() {
        std::string out;
        while (!at_end()) {
            char c = peek();
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')
                out += advance();
            else
                break;
        }
        if (out.empty()) fail("expected a key");
        return out;
    }

    std::string parse_quoted_string() {
        if (peek() != '"') fail("expected '\"'");
        advance();
        std::string out;
        while (!at_end()) {
            char c = advance();
            if (c == '"') return out;
            if (c == '\n') fail("unterminated string");
            if (c == '\\') {
                if (at_end()) fail("unterminated escape");
                char e = advance();
                if (e == '"' || e == '\\') out += e;
                else fail("unsupported escape sequence");
            } else {
                out += c;
            }
        }
        fail("unterminated string");
    }

    RawList parse_list() {
        skip_trivia();
        if (peek() != '=') fail("expected '='");
        advance();
        skip_trivia();
        if (peek() != '[') fail("expected '['");
        advance();
        RawList list;
        for (;;) {
            skip_trivia();
            if (peek() == ']') { advance(); break; }
            int value_line = line_;
            list.values.emplace_back(parse_quoted_string(), value_line);
            skip_trivia();
            if (peek() == ',') { advance(); continue; }
            if (peek() == ']') { advance(); break; }
            fail("expected ',' or ']' in list");
        }
        return list;
    }

    void parse_table_header() {
        advance(); // '['
        skip_trivia();
        if (parse_bare_key() != "tool") fail("only [tool.<name>] tables are supported");
        if (peek() != '.') fail("expected '.' after 'tool'");
        advance();
        std::string name = parse_bare_key();
        if (!valid_identifier(name)) fail("tool name must match [a-z0-9_-]+");
        skip_trivia();
        if (peek() != ']') fail("expected ']' to close table header");
        advance();

        for (const auto& [seen, unused] : tables_)
            if (seen == name) fail("duplicate table [tool." + name + "]");

        skip_trivia();
        std::optional<RawList> eps;
        if (!at_end() && peek() != '[') {
            if (parse_bare_key() != "entrypoints") fail("only 'entrypoints' is allowed in a tool table");
            eps = parse_list();
            skip_trivia();
            if (!at_end() && peek() != '[') fail("unexpected content after entrypoints list");
        }
        tables_.emplace_back(name, std::move(eps));
        seen_table_ = true;
    }

    void parse_statements() {
        static const std::set<std::string> known_keys = {
            "python_tools", "nodejs_tools", "system_tools", "git_tools", "global_requirements"};
        for (;;) {
            skip_trivia();
            if (at_end()) return;
            if (peek() == '[') {
                parse_table_header();
                continue;
            }
            std::string key = parse_bare_key();
            if (!known_keys.count(key)) fail("unknown key '" + key + "'");
            if (seen_table_) fail("list keys must precede tool tables");
            if (lists_.count(key)) fail("duplicate key '" + key + "'");
            lists_.emplace(key, parse_list());
        }
    }

    // ---- entry syntaxes -------------------------------------------------

    void check_tool_name(const std::string& name, int value_line) {
        if (!valid_identifier(name)) {
            line_ = value_line;
            col_ = 1;
            fail("tool name '" + name + "' must match [a-z0-9_-]+");
        }
    }

    // name or name==version
    std::pair<std::string, std::optional<std::string>> split_py_entry(const std::string& s, int value_line) {
        auto sep = s.find("==");
        if (sep == std::string::npos) {
            check_tool_name(s, value_line);
            return {s, std::nullopt};
        }
        std::string name = s.substr(0, sep);
        std::string pin = s.substr(sep + 2);
        check_tool_name(name, value_line);
        if (pin.empty() || pin.find("==") != std::string::npos) {
            line_ = value_line;
            col_ = 1;
            fail("malformed python_tools entry '" + s + "'");
        }
        return {name, pin};
    }

    // name@version
    std::pair<std::string, std::optional<std::string>> split_js_entry(const std::string& s, int value_line) {
        auto sep = s.find('@');
        if (sep == std::string::npos) {
            check_tool_name(s, value_line);
            return {s, std::nullopt};
        }
        std::string name = s.substr(0, sep);
        std::string pin = s.substr(sep + 1);
        check_tool_name(name, value_line);
        if (pin.empty() || pin.find('@') != std::string::npos) {
            line_ = value_line;
            col_ = 1;
            fail("malformed nodejs_tools entry '" + s + "'");
        }
        return {name, pin};
    }

    // name=url#commit
    std::tuple<std::string, std::string, std::string> split_git_entry(const std::string& s, int value_line) {
        auto eq = s.find('=');
        if (eq == std::string::npos) {
            line_ = value_line;
            col_ = 1;
            fail("git_tools entry '" + s + "' must be name=url#commit");
        }
        std::string name = s.substr(0, eq);
        check_tool_name(name, value_line);
        std::string rest = s.substr(eq + 1);
        auto hash = rest.rfind('#');
        if (hash == std::string::npos || hash == 0 || hash + 1 == rest.size()) {
            line_ = value_line;
            col_ = 1;
            fail("git_tools entry '" + s + "' must be name=url#commit");
        }
        return {name, rest.substr(0, hash), rest.substr(hash + 1)};
    }

    // cli_name:relative/path
    Entrypoint split_entrypoint(const std::string& s, int value_line) {
        auto sep = s.find(':');
        if (sep == std::string::npos || sep == 0 || sep + 1 == s.size()) {
            line_ = value_line;
            col_ = 1;
            fail("entrypoint '" + s + "' must be cli_name:relative/path");
        }
        Entrypoint ep{s.substr(0, sep), s.substr(sep + 1)};
        if (!valid_identifier(ep.cli_name)) {
            line_ = value_line;
            col_ = 1;
            fail("cli name '" + ep.cli_name + "' must match [a-z0-9_-]+");
        }
        if (ep.entry.front() == '/') {
            line_ = value_line;
            col_ = 1;
            fail("entrypoint path '" + ep.entry + "' must be relative");
        }
        return ep;
    }

    // ---- override resolution --------------------------------------------

    Manifest resolve() {
        Manifest m;

        std::vector<std::pair<std::string, std::optional<std::string>>> py, js;
        if (auto it = lists_.find("python_tools"); it != lists_.end())
            for (const auto& [value, vline] : it->second.values)
                py.push_back(split_py_entry(value, vline));
        if (auto it = lists_.find("nodejs_tools"); it != lists_.end())
            for (const auto& [value, vline] : it->second.values)
                js.push_back(split_js_entry(value, vline));

        std::set<std::string> seen;
        for (const auto& [name, pin] : py)
            if (!seen.insert(name).second)
                throw Error(ErrorCode::DuplicateTool, "tool '" + name + "' listed more than once");
        for (const auto& [name, pin] : js)
            if (!seen.insert(name).second)
                throw Error(ErrorCode::DuplicateTool, "tool '" + name + "' listed more than once");

        if (auto it = lists_.find("system_tools"); it != lists_.end())
            for (const auto& [value, vline] : it->second.values) {
                check_tool_name(value, vline);
                m.system_tools.insert(value);
            }

        if (auto it = lists_.find("git_tools"); it != lists_.end())
            for (const auto& [value, vline] : it->second.values) {
                auto [name, url, commit] = split_git_entry(value, vline);
                if (m.git_tools.count(name))
                    throw Error(ErrorCode::DuplicateTool, "git_tools entry '" + name + "' listed more than once");
                if (!valid_commit_hash(commit))
                    throw Error(ErrorCode::MalformedCommit,
                                "git_tools entry '" + name + "': commit must be 40 lowercase hex characters");
                m.git_tools.emplace(name, GitPin{url, commit});
            }

        if (auto it = lists_.find("global_requirements"); it != lists_.end())
            for (const auto& [value, vline] : it->second.values)
                m.global_requirements.push_back(value);

        std::set<std::string> py_names;
        for (const auto& [name, pin] : py) py_names.insert(name);

        // overrides apply to python tools only
        for (const std::string& name : m.system_tools)
            if (!py_names.count(name))
                throw Error(ErrorCode::DanglingOverride,
                            "system_tools entry '" + name + "' is not a python tool");
        for (const auto& [name, unused] : m.git_tools)
            if (!py_names.count(name))
                throw Error(ErrorCode::DanglingOverride,
                            "git_tools entry '" + name + "' is not a python tool");

        for (const auto& [name, pin] : py) {
            ToolSpec t;
            t.name = name;
            t.ecosystem = Ecosystem::PY;
            t.version_pin = pin;
            auto git = m.git_tools.find(name);
            if (git != m.git_tools.end()) {
                t.source = Source::GIT;
                t.git_url = git->second.url;
                t.git_commit = git->second.commit;
            } else {
                t.source = Source::INDEX;
                if (!pin)
                    throw Error(ErrorCode::MissingPin,
                                "tool '" + name + "' has neither a version pin nor a git override");
            }
            t.environment = m.system_tools.count(name) ? Environment::GLOBAL : Environment::ISOLATED;
            t.entrypoints = {{name, "bin/" + name}};
            m.python_tools.push_back(std::move(t));
        }

        for (const auto& [name, pin] : js) {
            ToolSpec t;
            t.name = name;
            t.ecosystem = Ecosystem::JS;
            t.source = Source::INDEX;
            if (!pin)
                throw Error(ErrorCode::MissingPin, "nodejs tool '" + name + "' has no version pin");
            t.version_pin = pin;
            t.environment = Environment::PROJECT;
            t.entrypoints = {{name, "node_modules/.bin/" + name}};
            m.nodejs_tools.push_back(std::move(t));
        }

        for (const auto& [name, eps] : tables_) {
            ToolSpec* tool = nullptr;
            for (ToolSpec& t : m.python_tools)
                if (t.name == name) tool = &t;
            for (ToolSpec& t : m.nodejs_tools)
                if (t.name == name) tool = &t;
            if (!tool)
                throw Error(ErrorCode::DanglingOverride,
                            "[tool." + name + "] does not match any declared tool");
            if (!eps) continue; // bare table keeps the default entrypoint
            tool->entrypoints.clear();
            for (const auto& [value, vline] : eps->values)
                tool->entrypoints.push_back(split_entrypoint(value, vline));
        }

        return m;
    }
};

inline std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    out += '"';
    return out;
}

} // namespace detail

/// Parse manifest text. Throws Error with code SyntaxError (carrying
/// line/column), DuplicateTool, DanglingOverride, MissingPin or
/// MalformedCommit. Overrides are resolved into each ToolSpec; list order
/// is preserved.
inline Manifest parse_manifest(std::string_view text) {
    return detail::ManifestParser(text).parse();
}

/// Canonical text form; parse_manifest(render_manifest(m)) == m.
inline std::string render_manifest(const Manifest& m) {
    std::string out;
    auto emit_list = [&out](const char* key, const std::vector<std::string>& values) {
        out += key;
        out += " = [";
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out += ", ";
            out += detail::quote(values[i]);
        }
        out += "]\n";
    };

    std::vector<std::string> py, js, sys, git;
    for (const ToolSpec& t : m.python_tools)
        py.push_back(t.version_pin ? t.name + "==" + *t.version_pin : t.name);
    for (const ToolSpec& t : m.nodejs_tools)
        js.push_back(t.version_pin ? t.name + "@" + *t.version_pin : t.name);
    sys.assign(m.system_tools.begin(), m.system_tools.end());
    for (const auto& [name, pin] : m.git_tools)
        git.push_back(name + "=" + pin.url + "#" + pin.commit);

    emit_list("python_tools", py);
    emit_list("nodejs_tools", js);
    emit_list("system_tools", sys);
    emit_list("git_tools", git);
    emit_list("global_requirements", m.global_requirements);

    for (const ToolSpec* t : all_tools(m)) {
        out += "\n[tool." + t->name + "]\n";
        std::vector<std::string> eps;
        for (const Entrypoint& ep : t->entrypoints)
            eps.push_back(ep.cli_name + ":" + ep.entry);
        emit_list("entrypoints", eps);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
    ErrorCode code;
    std::string subject;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
};

inline std::string render_violation(const Violation& v) {
    return std::string(error_code_name(v.code)) + " " + v.subject + ": " + v.message;
}

/// Check every Manifest/ToolSpec invariant plus cross-tool CLI-name
/// collisions. Violations are data, not failures; an empty report means
/// the manifest is buildable.
inline ValidationReport validate_manifest(const Manifest& m) {
    ValidationReport report;
    auto add = [&report](ErrorCode code, std::string subject, std::string message) {
        report.violations.push_back({code, std::move(subject), std::move(message)});
    };

    std::set<std::string> names;
    for (const ToolSpec* t : all_tools(m)) {
        if (!names.insert(t->name).second)
            add(ErrorCode::DuplicateTool, t->name, "tool name appears more than once");

        if (!valid_identifier(t->name))
            add(ErrorCode::BadIdentifier, t->name, "tool name must match [a-z0-9_-]+");

        if (t->ecosystem == Ecosystem::JS && t->environment != Environment::PROJECT)
            add(ErrorCode::EnvironmentMismatch, t->name, "nodejs tools must use the PROJECT environment");
        if (t->ecosystem == Ecosystem::PY && t->environment == Environment::PROJECT)
            add(ErrorCode::EnvironmentMismatch, t->name, "python tools must use ISOLATED or GLOBAL");

        if (t->source == Source::INDEX) {
            if (!t->version_pin) {
                add(ErrorCode::MissingPin, t->name, "index-sourced tool needs a version pin");
            } else {
                try {
                    parse_version(*t->version_pin);
                } catch (const Error& e) {
                    add(ErrorCode::MalformedVersion, t->name, e.what());
                }
            }
        } else {
            if (!t->git_url || t->git_url->empty())
                add(ErrorCode::DanglingOverride, t->name, "git-sourced tool needs a repository url");
            if (!t->git_commit || !valid_commit_hash(*t->git_commit))
                add(ErrorCode::MalformedCommit, t->name, "commit must be 40 lowercase hex characters");
        }

        std::set<std::string> clis;
        for (const Entrypoint& ep : t->entrypoints) {
            if (!valid_identifier(ep.cli_name))
                add(ErrorCode::BadIdentifier, t->name, "cli name '" + ep.cli_name + "' must match [a-z0-9_-]+");
            if (!clis.insert(ep.cli_name).second)
                add(ErrorCode::CliNameCollision, ep.cli_name,
                    "cli name repeated within tool '" + t->name + "'");
        }
    }

    // overrides must target python tools
    std::set<std::string> py_names;
    for (const ToolSpec& t : m.python_tools) py_names.insert(t.name);
    for (const std::string& name : m.system_tools) {
        if (!py_names.count(name))
            add(ErrorCode::DanglingOverride, name, "system_tools entry is not a python tool");
    }
    for (const auto& [name, pin] : m.git_tools) {
        if (!py_names.count(name))
            add(ErrorCode::DanglingOverride, name, "git_tools entry is not a python tool");
    }

    // resolved fields must agree with the override sets
    for (const ToolSpec& t : m.python_tools) {
        bool is_system = m.system_tools.count(t.name) > 0;
        if (is_system != (t.environment == Environment::GLOBAL))
            add(ErrorCode::EnvironmentMismatch, t.name, "environment disagrees with system_tools override");
        bool is_git = m.git_tools.count(t.name) > 0;
        if (is_git != (t.source == Source::GIT))
            add(ErrorCode::DanglingOverride, t.name, "source disagrees with git_tools override");
    }

    // cross-tool CLI name collisions
    std::map<std::string, std::vector<std::string>> cli_owners;
    for (const ToolSpec* t : all_tools(m))
        for (const Entrypoint& ep : t->entrypoints)
            cli_owners[ep.cli_name].push_back(t->name);
    for (const auto& [cli, owners] : cli_owners) {
        if (owners.size() > 1) {
            std::string joined;
            for (std::size_t i = 0; i < owners.size(); ++i)
                joined += (i ? ", " : "") + owners[i];
            add(ErrorCode::CliNameCollision, cli, "cli name exposed by multiple tools: " + joined);
        }
    }

    return report;
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

/// Pure function of the manifest: a tool is DYNAMIC_GLOBAL exactly when it
/// sits in system_tools, STATIC_PROJECT when it is a nodejs tool, and
/// STATIC_ISOLATED otherwise.
inline ToolClass classify_tool(const Manifest& m, std::string_view name) {
    const ToolSpec* t = find_tool(m, name);
    if (!t) throw Error(ErrorCode::UnknownTool, "no tool named '" + std::string(name) + "'");
    if (m.system_tools.count(t->name)) return ToolClass::DYNAMIC_GLOBAL;
    if (t->ecosystem == Ecosystem::JS) return ToolClass::STATIC_PROJECT;
    return ToolClass::STATIC_ISOLATED;
}

} // namespace iceforge
