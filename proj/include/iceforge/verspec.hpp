#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "iceforge/errors.hpp"

namespace iceforge {

// ---------------------------------------------------------------------------
// Version
// ---------------------------------------------------------------------------

enum class PrePhase { Alpha, Beta, Rc };

/// Pinning version: dotted numeric release, optional pre-release marker
/// ({a|b|rc}N, sorts before the plain release) and optional post-release
/// marker (.postN, sorts after). Trailing zero segments are kept for
/// rendering but ignored by the ordering ("1.0" == "1.0.0").
struct Version {
    std::vector<long long> release;
    std::optional<std::pair<PrePhase, long long>> pre;
    std::optional<long long> post;

    bool operator==(const Version&) const = default;
};

enum class Ordering { LT, EQ, GT };

namespace detail {

inline bool take_number(std::string_view text, std::size_t& pos, long long& out) {
    std::size_t start = pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos == start || pos - start > 18) return false;
    out = 0;
    for (std::size_t i = start; i < pos; ++i) out = out * 10 + (text[i] - '0');
    return true;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

} // namespace detail

/// Grammar: N(.N)* [{a|b|rc}N] [.postN]
inline Version parse_version(std::string_view text) {
    std::string_view s = detail::trim(text);
    if (s.empty()) throw Error(ErrorCode::MalformedVersion, "empty version string");

    Version v;
    std::size_t pos = 0;
    long long seg = 0;
    if (!detail::take_number(s, pos, seg))
        throw Error(ErrorCode::MalformedVersion, "expected leading release segment in '" + std::string(text) + "'");
    v.release.push_back(seg);

    // further release segments: '.' must be followed by a digit ('.post' ends the release)
    while (pos < s.size() && s[pos] == '.' && pos + 1 < s.size() &&
           std::isdigit(static_cast<unsigned char>(s[pos + 1]))) {
        ++pos;
        detail::take_number(s, pos, seg);
        v.release.push_back(seg);
    }

    if (pos < s.size() && (s[pos] == 'a' || s[pos] == 'b' || s[pos] == 'r')) {
        PrePhase phase;
        if (s[pos] == 'a') { phase = PrePhase::Alpha; ++pos; }
        else if (s[pos] == 'b') { phase = PrePhase::Beta; ++pos; }
        else if (s.substr(pos, 2) == "rc") { phase = PrePhase::Rc; pos += 2; }
        else throw Error(ErrorCode::MalformedVersion, "bad pre-release phase in '" + std::string(text) + "'");
        long long n = 0;
        if (!detail::take_number(s, pos, n))
            throw Error(ErrorCode::MalformedVersion, "pre-release marker needs a number in '" + std::string(text) + "'");
        v.pre = {phase, n};
    }

    if (pos < s.size() && s.substr(pos, 5) == ".post") {
        pos += 5;
        long long n = 0;
        if (!detail::take_number(s, pos, n))
            throw Error(ErrorCode::MalformedVersion, "post-release marker needs a number in '" + std::string(text) + "'");
        v.post = n;
    }

    if (pos != s.size())
        throw Error(ErrorCode::MalformedVersion, "trailing garbage in '" + std::string(text) + "'");
    return v;
}

inline std::string render_version(const Version& v) {
    std::string out;
    for (std::size_t i = 0; i < v.release.size(); ++i) {
        if (i) out += '.';
        out += std::to_string(v.release[i]);
    }
    if (v.pre) {
        switch (v.pre->first) {
        case PrePhase::Alpha: out += 'a'; break;
        case PrePhase::Beta: out += 'b'; break;
        case PrePhase::Rc: out += "rc"; break;
        }
        out += std::to_string(v.pre->second);
    }
    if (v.post) out += ".post" + std::to_string(*v.post);
    return out;
}

/// Total order: zero-padded release compare, then pre-release before the
/// plain release (phases a < b < rc), then post-release after it.
inline Ordering compare_versions(const Version& a, const Version& b) {
    std::size_t n = std::max(a.release.size(), b.release.size());
    for (std::size_t i = 0; i < n; ++i) {
        long long x = i < a.release.size() ? a.release[i] : 0;
        long long y = i < b.release.size() ? b.release[i] : 0;
        if (x != y) return x < y ? Ordering::LT : Ordering::GT;
    }
    // pre-release: (absent) ranks above any phase
    int pa = a.pre ? static_cast<int>(a.pre->first) : 3;
    int pb = b.pre ? static_cast<int>(b.pre->first) : 3;
    if (pa != pb) return pa < pb ? Ordering::LT : Ordering::GT;
    if (a.pre) {
        if (a.pre->second != b.pre->second)
            return a.pre->second < b.pre->second ? Ordering::LT : Ordering::GT;
    }
    long long qa = a.post ? 1 + *a.post : 0;
    long long qb = b.post ? 1 + *b.post : 0;
    if (qa != qb) return qa < qb ? Ordering::LT : Ordering::GT;
    return Ordering::EQ;
}

inline bool version_lt(const Version& a, const Version& b) { return compare_versions(a, b) == Ordering::LT; }
inline bool version_eq(const Version& a, const Version& b) { return compare_versions(a, b) == Ordering::EQ; }

// ---------------------------------------------------------------------------
// Requirement
// ---------------------------------------------------------------------------

enum class SpecOp { Eq, Ne, Ge, Le, Gt, Lt, Compatible };

inline const char* spec_op_text(SpecOp op) {
    switch (op) {
    case SpecOp::Eq: return "==";
    case SpecOp::Ne: return "!=";
    case SpecOp::Ge: return ">=";
    case SpecOp::Le: return "<=";
    case SpecOp::Gt: return ">";
    case SpecOp::Lt: return "<";
    case SpecOp::Compatible: return "~=";
    }
    return "?";
}

struct Specifier {
    SpecOp op;
    Version version;

    bool operator==(const Specifier&) const = default;
};

/// Package requirement: normalized name plus a conjunction of specifiers.
/// An empty specifier list accepts any version.
struct Requirement {
    std::string name;
    std::vector<Specifier> specifiers;

    bool operator==(const Requirement&) const = default;
};

/// Lowercase, underscores folded to hyphens ("Foo_Bar" and "foo-bar" name
/// the same package).
inline std::string normalize_package_name(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (char c : raw)
        out += c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

namespace detail {

inline bool valid_package_name(std::string_view name) {
    if (name.empty()) return false;
    auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)); };
    if (!alnum(name.front()) || !alnum(name.back())) return false;
    for (char c : name)
        if (!alnum(c) && c != '-' && c != '.') return false;
    return true;
}

} // namespace detail

/// Grammar: name [op version {, op version}]
inline Requirement parse_requirement(std::string_view text) {
    std::string_view s = detail::trim(text);
    if (s.empty()) throw Error(ErrorCode::MalformedRequirement, "empty requirement");

    std::size_t pos = 0;
    while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) ||
                              s[pos] == '-' || s[pos] == '_' || s[pos] == '.'))
        ++pos;
    Requirement req;
    req.name = normalize_package_name(s.substr(0, pos));
    if (!detail::valid_package_name(req.name))
        throw Error(ErrorCode::MalformedRequirement, "bad package name in '" + std::string(text) + "'");

    std::string_view rest = detail::trim(s.substr(pos));
    if (rest.empty()) return req;

    // comma-separated specifier clauses
    std::size_t start = 0;
    while (start <= rest.size()) {
        std::size_t comma = rest.find(',', start);
        std::string_view clause = detail::trim(
            rest.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (clause.empty())
            throw Error(ErrorCode::MalformedRequirement, "empty specifier in '" + std::string(text) + "'");

        SpecOp op;
        std::size_t oplen = 2;
        if (clause.substr(0, 2) == "==") op = SpecOp::Eq;
        else if (clause.substr(0, 2) == "!=") op = SpecOp::Ne;
        else if (clause.substr(0, 2) == ">=") op = SpecOp::Ge;
        else if (clause.substr(0, 2) == "<=") op = SpecOp::Le;
        else if (clause.substr(0, 2) == "~=") op = SpecOp::Compatible;
        else if (clause[0] == '>') { op = SpecOp::Gt; oplen = 1; }
        else if (clause[0] == '<') { op = SpecOp::Lt; oplen = 1; }
        else throw Error(ErrorCode::MalformedRequirement, "unknown operator in '" + std::string(text) + "'");

        Version v = parse_version(detail::trim(clause.substr(oplen)));
        if (op == SpecOp::Compatible && v.release.size() < 2)
            throw Error(ErrorCode::MalformedRequirement,
                        "~= needs at least two release segments in '" + std::string(text) + "'");
        Specifier spec{op, v};
        if (std::find(req.specifiers.begin(), req.specifiers.end(), spec) == req.specifiers.end())
            req.specifiers.push_back(spec);

        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return req;
}

inline std::string render_specifiers(const std::vector<Specifier>& specs) {
    std::string out;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (i) out += ',';
        out += spec_op_text(specs[i].op);
        out += render_version(specs[i].version);
    }
    return out;
}

inline std::string render_requirement(const Requirement& r) {
    return r.name + render_specifiers(r.specifiers);
}

inline bool satisfies(const Version& v, const Specifier& s) {
    Ordering ord = compare_versions(v, s.version);
    switch (s.op) {
    case SpecOp::Eq: return ord == Ordering::EQ;
    case SpecOp::Ne: return ord != Ordering::EQ;
    case SpecOp::Ge: return ord != Ordering::LT;
    case SpecOp::Le: return ord != Ordering::GT;
    case SpecOp::Gt: return ord == Ordering::GT;
    case SpecOp::Lt: return ord == Ordering::LT;
    case SpecOp::Compatible: {
        // ~= X.Y(.Z): >= X.Y(.Z) and release prefix equal on all but the last segment
        if (ord == Ordering::LT) return false;
        std::size_t prefix = s.version.release.size() - 1;
        for (std::size_t i = 0; i < prefix; ++i) {
            long long have = i < v.release.size() ? v.release[i] : 0;
            if (have != s.version.release[i]) return false;
        }
        return true;
    }
    }
    return false;
}

/// Conjunction over all specifiers; empty set means any version.
inline bool satisfies(const Version& v, const Requirement& r) {
    return std::all_of(r.specifiers.begin(), r.specifiers.end(),
                       [&](const Specifier& s) { return satisfies(v, s); });
}

// ---------------------------------------------------------------------------
// Global requirements merge
// ---------------------------------------------------------------------------

/// Contributor name (tool) -> its direct requirements.
using RequirementSets = std::map<std::string, std::vector<Requirement>>;

/// Package name -> the finite set of version strings available in the index.
using AvailableVersions = std::map<std::string, std::vector<std::string>>;

struct MergeConflict {
    struct Contributor {
        std::string tool;
        std::vector<Specifier> specifiers;

        bool operator==(const Contributor&) const = default;
    };
    std::string package;
    std::vector<Contributor> contributors; // sorted by tool name

    bool operator==(const MergeConflict&) const = default;
};

struct MergeResult {
    enum class Status { OK, CONFLICT };
    Status status = Status::OK;
    std::map<std::string, Version> pins;  // populated iff status == OK
    std::vector<MergeConflict> conflicts; // populated iff status == CONFLICT
};

/// Pin every package referenced by any contributor to the maximum available
/// version satisfying the intersection of all contributing specifiers.
/// A package with no satisfying version yields a CONFLICT entry; a package
/// absent from the index entirely is an error.
inline MergeResult merge_global_requirements(const RequirementSets& req_sets,
                                             const AvailableVersions& available) {
    // package -> contributor tool -> aggregated specifiers
    std::map<std::string, std::map<std::string, std::vector<Specifier>>> contributions;
    for (const auto& [tool, reqs] : req_sets)
        for (const Requirement& r : reqs) {
            auto& specs = contributions[r.name][tool];
            specs.insert(specs.end(), r.specifiers.begin(), r.specifiers.end());
        }

    MergeResult result;
    for (const auto& [package, by_tool] : contributions) {
        auto avail = available.find(package);
        if (avail == available.end())
            throw Error(ErrorCode::UnknownPackage, "package '" + package + "' not present in index");

        std::optional<std::pair<Version, std::string>> best;
        for (const std::string& vs : avail->second) {
            Version v = parse_version(vs);
            bool ok = true;
            for (const auto& [tool, specs] : by_tool)
                for (const Specifier& s : specs)
                    if (!satisfies(v, s)) { ok = false; break; }
            if (!ok) continue;
            if (!best || version_lt(best->first, v) ||
                (version_eq(best->first, v) && best->second < vs))
                best = {v, vs};
        }

        if (best) {
            result.pins.emplace(package, best->first);
        } else {
            MergeConflict c;
            c.package = package;
            for (const auto& [tool, specs] : by_tool)
                c.contributors.push_back({tool, specs});
            result.conflicts.push_back(std::move(c));
        }
    }

    if (!result.conflicts.empty()) {
        result.status = MergeResult::Status::CONFLICT;
        result.pins.clear();
    }
    return result;
}

/// Lockfile text: one "name==version" per line, names sorted, trailing newline.
inline std::string render_lockfile(const std::map<std::string, Version>& pins) {
    std::string out;
    for (const auto& [name, version] : pins)
        out += name + "==" + render_version(version) + "\n";
    return out;
}

} // namespace iceforge
