#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "iceforge/errors.hpp"
#include "iceforge/fstree.hpp"

namespace iceforge {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

enum class LineTag { Context, Delete, Add };

struct HunkLine {
    LineTag tag;
    std::string text; // without trailing '\n'; '\r' kept verbatim

    bool operator==(const HunkLine&) const = default;
};

struct Hunk {
    long old_start = 0; // 1-based; insertion hunks (old_len == 0) attach after this line
    long old_len = 0;
    long new_start = 0;
    long new_len = 0;
    std::vector<HunkLine> lines;

    bool operator==(const Hunk&) const = default;
};

struct FilePatch {
    std::string old_path; // "/dev/null" for file creation
    std::string new_path; // "/dev/null" for file deletion
    std::vector<Hunk> hunks;
    bool old_missing_eof_newline = false;
    bool new_missing_eof_newline = false;

    bool operator==(const FilePatch&) const = default;
};

struct Patch {
    std::vector<FilePatch> file_patches;

    bool operator==(const Patch&) const = default;
};

/// Everything found under one tool's patch directory: overlay files copied
/// verbatim before any diff applies, then the diffs in filename order.
struct PatchSet {
    std::string tool;
    std::vector<std::pair<std::string, std::string>> overlays; // relative path, bytes
    std::vector<std::pair<std::string, Patch>> diffs;          // filename, parsed patch

    bool empty() const { return overlays.empty() && diffs.empty(); }
};

// ---------------------------------------------------------------------------
// Line splitting (endings preserved)
// ---------------------------------------------------------------------------

namespace detail {

struct SplitFile {
    std::vector<std::string> lines; // without the '\n' terminator
    bool trailing_newline = true;
};

inline SplitFile split_lines(std::string_view content) {
    SplitFile out;
    if (content.empty()) return out;
    std::size_t start = 0;
    while (start < content.size()) {
        std::size_t nl = content.find('\n', start);
        if (nl == std::string_view::npos) {
            out.lines.emplace_back(content.substr(start));
            out.trailing_newline = false;
            return out;
        }
        out.lines.emplace_back(content.substr(start, nl - start));
        start = nl + 1;
    }
    return out;
}

inline std::string join_lines(const std::vector<std::string>& lines, bool trailing_newline) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        out += lines[i];
        if (i + 1 < lines.size() || trailing_newline) out += '\n';
    }
    return out;
}

// "a/x/y" and "b/x/y" headers collapse to "x/y"; timestamps after a tab drop.
inline std::string clean_diff_path(std::string_view raw) {
    std::size_t tab = raw.find('\t');
    if (tab != std::string_view::npos) raw = raw.substr(0, tab);
    if (raw == "/dev/null") return std::string(raw);
    if (raw.size() > 2 && (raw.substr(0, 2) == "a/" || raw.substr(0, 2) == "b/"))
        raw = raw.substr(2);
    return std::string(raw);
}

inline bool parse_hunk_range(std::string_view& s, long& start, long& len) {
    auto digits = [&s](long& out) {
        if (s.empty() || s[0] < '0' || s[0] > '9') return false;
        out = 0;
        while (!s.empty() && s[0] >= '0' && s[0] <= '9') {
            out = out * 10 + (s[0] - '0');
            s.remove_prefix(1);
        }
        return true;
    };
    if (!digits(start)) return false;
    len = 1;
    if (!s.empty() && s[0] == ',') {
        s.remove_prefix(1);
        if (!digits(len)) return false;
    }
    return true;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Parse a standard unified diff ("---"/"+++" headers, "@@ -a,b +c,d @@"
/// hunks, optional "\ No newline at end of file" markers). Throws
/// MalformedDiff with the offending line number, or HunkCountMismatch when
/// a hunk body disagrees with its declared counts.
inline Patch parse_unified_diff(std::string_view text) {
    detail::SplitFile input = detail::split_lines(text);
    const auto& lines = input.lines;

    auto fail = [](std::size_t lineno, const std::string& msg) -> void {
        throw Error(ErrorCode::MalformedDiff, "line " + std::to_string(lineno) + ": " + msg);
    };

    Patch patch;
    std::size_t i = 0;
    auto starts = [&](std::size_t idx, std::string_view prefix) {
        return idx < lines.size() && std::string_view(lines[idx]).substr(0, prefix.size()) == prefix;
    };

    while (i < lines.size()) {
        if (!starts(i, "--- ")) { ++i; continue; } // preamble / "diff --git" / "index" lines

        FilePatch fp;
        fp.old_path = detail::clean_diff_path(std::string_view(lines[i]).substr(4));
        ++i;
        if (!starts(i, "+++ ")) fail(i + 1, "expected '+++' after '---' header");
        fp.new_path = detail::clean_diff_path(std::string_view(lines[i]).substr(4));
        ++i;

        bool saw_hunk = false;
        while (starts(i, "@@ ")) {
            saw_hunk = true;
            std::size_t header_line = i + 1;
            std::string_view s(lines[i]);
            s.remove_prefix(3);
            Hunk hunk;
            if (s.empty() || s[0] != '-') fail(header_line, "bad hunk header");
            s.remove_prefix(1);
            if (!detail::parse_hunk_range(s, hunk.old_start, hunk.old_len)) fail(header_line, "bad hunk header");
            if (s.empty() || s[0] != ' ') fail(header_line, "bad hunk header");
            s.remove_prefix(1);
            if (s.empty() || s[0] != '+') fail(header_line, "bad hunk header");
            s.remove_prefix(1);
            if (!detail::parse_hunk_range(s, hunk.new_start, hunk.new_len)) fail(header_line, "bad hunk header");
            if (s.substr(0, 3) != " @@") fail(header_line, "bad hunk header");
            ++i;

            long old_seen = 0, new_seen = 0;
            LineTag last_tag = LineTag::Context;
            while (old_seen < hunk.old_len || new_seen < hunk.new_len) {
                if (i >= lines.size())
                    throw Error(ErrorCode::HunkCountMismatch,
                                "hunk at line " + std::to_string(header_line) + " is shorter than declared");
                const std::string& body = lines[i];
                // a fully blank body line is an empty context line whose
                // leading space was stripped somewhere along the way
                char tag = body.empty() ? ' ' : body[0];
                std::string rest = body.empty() ? std::string() : body.substr(1);
                if (tag == ' ') {
                    if (old_seen >= hunk.old_len || new_seen >= hunk.new_len)
                        throw Error(ErrorCode::HunkCountMismatch,
                                    "hunk at line " + std::to_string(header_line) + " is longer than declared");
                    hunk.lines.push_back({LineTag::Context, rest});
                    ++old_seen;
                    ++new_seen;
                    last_tag = LineTag::Context;
                } else if (tag == '-') {
                    if (old_seen >= hunk.old_len)
                        throw Error(ErrorCode::HunkCountMismatch,
                                    "hunk at line " + std::to_string(header_line) + " is longer than declared");
                    hunk.lines.push_back({LineTag::Delete, rest});
                    ++old_seen;
                    last_tag = LineTag::Delete;
                } else if (tag == '+') {
                    if (new_seen >= hunk.new_len)
                        throw Error(ErrorCode::HunkCountMismatch,
                                    "hunk at line " + std::to_string(header_line) + " is longer than declared");
                    hunk.lines.push_back({LineTag::Add, rest});
                    ++new_seen;
                    last_tag = LineTag::Add;
                } else if (tag == '\\') {
                    if (last_tag == LineTag::Add) fp.new_missing_eof_newline = true;
                    else { fp.old_missing_eof_newline = true; if (last_tag == LineTag::Context) fp.new_missing_eof_newline = true; }
                } else {
                    fail(i + 1, "unexpected line inside hunk body");
                }
                ++i;
            }

            // trailing no-newline marker after the last counted line
            if (starts(i, "\\")) {
                if (last_tag == LineTag::Add) fp.new_missing_eof_newline = true;
                else { fp.old_missing_eof_newline = true; if (last_tag == LineTag::Context) fp.new_missing_eof_newline = true; }
                ++i;
            }

            // a body continuing past the declared counts is a count mismatch
            if (i < lines.size() && !lines[i].empty()) {
                char c = lines[i][0];
                bool looks_like_body = (c == ' ') || (c == '+' && !starts(i, "+++ ")) ||
                                       (c == '-' && !starts(i, "--- "));
                if (looks_like_body)
                    throw Error(ErrorCode::HunkCountMismatch,
                                "hunk at line " + std::to_string(header_line) + " is longer than declared");
            }

            if (!fp.hunks.empty()) {
                const Hunk& prev = fp.hunks.back();
                if (hunk.old_start < prev.old_start + prev.old_len)
                    fail(header_line, "hunks overlap or are out of order");
            }
            fp.hunks.push_back(std::move(hunk));
        }
        if (!saw_hunk) fail(i + 1, "file section without hunks");
        patch.file_patches.push_back(std::move(fp));
    }

    if (patch.file_patches.empty())
        throw Error(ErrorCode::MalformedDiff, "line 1: no file headers found");
    return patch;
}

// ---------------------------------------------------------------------------
// Application (zero fuzz)
// ---------------------------------------------------------------------------

namespace detail {

[[noreturn]] inline void context_mismatch(const std::string& file, std::size_t hunk_index,
                                          long old_line, const std::string& expected,
                                          const std::string& actual) {
    throw Error(ErrorCode::ContextMismatch,
                file + ", hunk " + std::to_string(hunk_index + 1) + ", line " +
                    std::to_string(old_line) + ": expected '" + expected + "', found '" + actual + "'");
}

inline std::vector<std::string> apply_hunks(const std::string& file, const SplitFile& old_file,
                                            const std::vector<Hunk>& hunks) {
    const auto& old_lines = old_file.lines;
    std::vector<std::string> out;
    std::size_t cursor = 0; // next unconsumed old line (0-based)

    for (std::size_t hi = 0; hi < hunks.size(); ++hi) {
        const Hunk& h = hunks[hi];
        // old_len == 0 inserts after line old_start; otherwise the hunk begins at old_start
        std::size_t first = h.old_len == 0 ? static_cast<std::size_t>(h.old_start)
                                           : static_cast<std::size_t>(h.old_start - 1);
        if (first > old_lines.size())
            throw Error(ErrorCode::ContextMismatch,
                        file + ", hunk " + std::to_string(hi + 1) + ": hunk starts past end of file");
        while (cursor < first) out.push_back(old_lines[cursor++]);

        for (const HunkLine& hl : h.lines) {
            switch (hl.tag) {
            case LineTag::Context:
            case LineTag::Delete:
                if (cursor >= old_lines.size())
                    context_mismatch(file, hi, static_cast<long>(cursor + 1), hl.text, "<end of file>");
                if (old_lines[cursor] != hl.text)
                    context_mismatch(file, hi, static_cast<long>(cursor + 1), hl.text, old_lines[cursor]);
                if (hl.tag == LineTag::Context) out.push_back(old_lines[cursor]);
                ++cursor;
                break;
            case LineTag::Add:
                out.push_back(hl.text);
                break;
            }
        }
    }
    while (cursor < old_lines.size()) out.push_back(old_lines[cursor++]);
    return out;
}

} // namespace detail

/// Apply a parsed patch to a file tree. Context and delete lines must match
/// byte-for-byte at the stated positions; untouched files pass through
/// unchanged. File creation/deletion uses "/dev/null" paths.
inline FileTree apply_patch(const FileTree& tree, const Patch& patch) {
    FileTree out = tree;
    for (const FilePatch& fp : patch.file_patches) {
        if (fp.old_path == "/dev/null") {
            if (out.count(fp.new_path))
                throw Error(ErrorCode::ContextMismatch,
                            fp.new_path + ": cannot create, file already exists");
            std::vector<std::string> created =
                detail::apply_hunks(fp.new_path, detail::SplitFile{}, fp.hunks);
            out[fp.new_path] = detail::join_lines(created, !fp.new_missing_eof_newline);
            continue;
        }

        auto it = out.find(fp.old_path);
        if (it == out.end())
            throw Error(ErrorCode::TargetMissing, fp.old_path + ": no such file in tree");
        detail::SplitFile old_file = detail::split_lines(it->second);

        // when a hunk covers the old file's last line, the end-of-file newline
        // state must match the patch exactly (zero fuzz)
        bool touches_eof = false;
        for (const Hunk& h : fp.hunks)
            if (h.old_len > 0 && h.old_start + h.old_len - 1 == static_cast<long>(old_file.lines.size()))
                touches_eof = true;
        if (touches_eof && !old_file.lines.empty() &&
            old_file.trailing_newline == fp.old_missing_eof_newline) {
            throw Error(ErrorCode::ContextMismatch,
                        fp.old_path + ": end-of-file newline does not match patch");
        }

        std::vector<std::string> result = detail::apply_hunks(fp.old_path, old_file, fp.hunks);

        if (fp.new_path == "/dev/null") {
            if (!result.empty())
                throw Error(ErrorCode::ContextMismatch,
                            fp.old_path + ": deletion patch leaves content behind");
            out.erase(fp.old_path);
            continue;
        }

        bool trailing = touches_eof ? !fp.new_missing_eof_newline : old_file.trailing_newline;
        if (fp.new_path != fp.old_path) out.erase(fp.old_path);
        out[fp.new_path] = detail::join_lines(result, trailing);
    }
    return out;
}

/// Overlays copy first (creating or overwriting), then diffs apply in order.
inline FileTree apply_patchset(const FileTree& tree, const PatchSet& ps) {
    FileTree out = tree;
    for (const auto& [path, bytes] : ps.overlays) out[path] = bytes;
    for (const auto& [name, patch] : ps.diffs) out = apply_patch(out, patch);
    return out;
}

// ---------------------------------------------------------------------------
// Discovery
// ---------------------------------------------------------------------------

/// Gather `<tool>/overlay/**` and `<tool>/*.diff` from a patches directory
/// tree. Diff files apply in lexicographic filename order; an absent tool
/// directory yields an empty PatchSet.
inline PatchSet collect_patches(const FileTree& patch_root, const std::string& tool) {
    PatchSet ps;
    ps.tool = tool;
    const std::string overlay_prefix = tool + "/overlay";
    const std::string tool_prefix = tool + "/";

    for (const auto& [path, bytes] : patch_root) {
        if (path_under(path, overlay_prefix) && path.size() > overlay_prefix.size()) {
            ps.overlays.emplace_back(path.substr(overlay_prefix.size() + 1), bytes);
        } else if (path.size() > tool_prefix.size() && path.compare(0, tool_prefix.size(), tool_prefix) == 0) {
            std::string name = path.substr(tool_prefix.size());
            if (name.find('/') == std::string::npos && name.size() > 5 &&
                name.compare(name.size() - 5, 5, ".diff") == 0)
                ps.diffs.emplace_back(name, parse_unified_diff(bytes));
        }
    }
    // map iteration already sorts overlays and diffs lexicographically
    return ps;
}

} // namespace iceforge
