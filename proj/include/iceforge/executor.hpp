#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "iceforge/emitter.hpp"
#include "iceforge/errors.hpp"
#include "iceforge/fstree.hpp"
#include "iceforge/manifest.hpp"
#include "iceforge/patchkit.hpp"
#include "iceforge/planner.hpp"
#include "iceforge/verspec.hpp"

namespace iceforge {

/// Layout checks share the violations-as-data shape of manifest validation.
using VerificationReport = ValidationReport;

// ---------------------------------------------------------------------------
// Fixture registry and git store
// ---------------------------------------------------------------------------

/// Offline stand-in for a package index entry: the unpacked source tree,
/// the package's direct requirement strings and its console entrypoints.
struct PackageRecord {
    FileTree files;
    std::vector<std::string> requirements;
    std::vector<Entrypoint> entrypoints;
};

struct RegistryIndex {
    // (ecosystem "py"|"js", normalized package name) -> version string -> record
    std::map<std::pair<std::string, std::string>, std::map<std::string, PackageRecord>> packages;

    const PackageRecord* find(const std::string& eco, const std::string& name,
                              const std::string& version) const {
        auto pkg = packages.find({eco, normalize_package_name(name)});
        if (pkg == packages.end()) return nullptr;
        auto rec = pkg->second.find(version);
        return rec == pkg->second.end() ? nullptr : &rec->second;
    }
};

/// (url hash, commit) -> source tree. URLs are keyed by fnv1a64_hex so the
/// on-disk store needs no url-unsafe directory names.
using GitStore = std::map<std::pair<std::string, std::string>, FileTree>;

inline std::string git_url_hash(std::string_view url) { return fnv1a64_hex(url); }

/// Disk format: registry/<eco>/<name>/<version>/ holding an optional `meta`
/// (lines: "requires <spec>", "entrypoint <cli>:<entry>") plus a `files/`
/// tree.
inline RegistryIndex load_registry(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    RegistryIndex index;
    FileTree tree = load_tree(dir);

    // group paths by <eco>/<name>/<version>/
    for (const auto& [path, bytes] : tree) {
        std::size_t a = path.find('/');
        if (a == std::string::npos) continue;
        std::size_t b = path.find('/', a + 1);
        if (b == std::string::npos) continue;
        std::size_t c = path.find('/', b + 1);
        if (c == std::string::npos) continue;
        std::string eco = path.substr(0, a);
        std::string name = normalize_package_name(path.substr(a + 1, b - a - 1));
        std::string version = path.substr(b + 1, c - b - 1);
        std::string rest = path.substr(c + 1);
        if (eco != "py" && eco != "js")
            throw Error(ErrorCode::UnreadableTree, "unexpected ecosystem directory '" + eco + "'");
        parse_version(version); // registry invariant: version strings parse

        PackageRecord& rec = index.packages[{eco, name}][version];
        if (rest == "meta") {
            detail::SplitFile meta = detail::split_lines(bytes);
            for (std::size_t i = 0; i < meta.lines.size(); ++i) {
                std::string line = meta.lines[i];
                while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
                if (line.empty() || line[0] == '#') continue;
                if (line.rfind("requires ", 0) == 0) {
                    rec.requirements.push_back(line.substr(9));
                } else if (line.rfind("entrypoint ", 0) == 0) {
                    std::string ep = line.substr(11);
                    std::size_t colon = ep.find(':');
                    if (colon == std::string::npos || colon == 0 || colon + 1 == ep.size())
                        throw Error(ErrorCode::SyntaxError,
                                    path + ": line " + std::to_string(i + 1) + ": bad entrypoint");
                    rec.entrypoints.push_back({ep.substr(0, colon), ep.substr(colon + 1)});
                } else {
                    throw Error(ErrorCode::SyntaxError,
                                path + ": line " + std::to_string(i + 1) + ": unknown meta directive");
                }
            }
        } else if (path_under(rest, "files") && rest.size() > 6) {
            rec.files.emplace(rest.substr(6), bytes);
        }
    }

    for (const auto& [key, versions] : index.packages)
        for (const auto& [version, rec] : versions)
            if (rec.files.empty())
                throw Error(ErrorCode::UnreadableTree,
                            "registry entry " + key.first + "/" + key.second + "/" + version +
                                " has an empty files tree");
    return index;
}

/// Disk format: gitstore/<url-hash>/<commit>/ holding the checked-out tree.
inline GitStore load_git_store(const std::filesystem::path& dir) {
    GitStore store;
    FileTree tree = load_tree(dir);
    for (const auto& [path, bytes] : tree) {
        std::size_t a = path.find('/');
        if (a == std::string::npos) continue;
        std::size_t b = path.find('/', a + 1);
        if (b == std::string::npos) continue;
        std::string hash = path.substr(0, a);
        std::string commit = path.substr(a + 1, b - a - 1);
        if (!valid_commit_hash(commit))
            throw Error(ErrorCode::UnreadableTree, "gitstore commit dir '" + commit + "' is not 40-hex");
        store[{hash, commit}].emplace(path.substr(b + 1), bytes);
    }
    return store;
}

/// Adapter for the merge: every python package's available version strings.
inline AvailableVersions registry_available_py(const RegistryIndex& index) {
    AvailableVersions out;
    for (const auto& [key, versions] : index.packages) {
        if (key.first != "py") continue;
        auto& list = out[key.second];
        for (const auto& [version, rec] : versions) list.push_back(version);
    }
    return out;
}

/// Requirement sets feeding the global merge: every DYNAMIC_GLOBAL tool
/// contributes a self-pin (name==pin, index-sourced tools only) plus its
/// registry-declared direct requirements; the manifest's
/// global_requirements list joins as contributor "global_requirements".
inline RequirementSets global_requirement_sets(const Manifest& m, const RegistryIndex& index) {
    RequirementSets sets;
    for (const ToolSpec& t : m.python_tools) {
        if (classify_tool(m, t.name) != ToolClass::DYNAMIC_GLOBAL) continue;
        if (t.source != Source::INDEX) continue; // git pins are commits, not versions
        std::vector<Requirement>& reqs = sets[t.name];
        reqs.push_back(parse_requirement(t.name + "==" + *t.version_pin));
        if (const PackageRecord* rec = index.find("py", t.name, *t.version_pin))
            for (const std::string& raw : rec->requirements) reqs.push_back(parse_requirement(raw));
    }
    if (!m.global_requirements.empty()) {
        std::vector<Requirement>& reqs = sets["global_requirements"];
        for (const std::string& raw : m.global_requirements) reqs.push_back(parse_requirement(raw));
    }
    return sets;
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

struct ActionEntry {
    std::size_t step_index; // 1-based, matches the serialized plan
    StepKind kind;
    bool ok;
    std::string detail;
};

/// Append-only execution record; execution halts at the first failure so
/// at most one entry is FAILED.
struct ActionLog {
    std::vector<ActionEntry> entries;

    bool all_ok() const {
        for (const ActionEntry& e : entries)
            if (!e.ok) return false;
        return true;
    }
};

inline std::string render_action_entry(const ActionEntry& e) {
    std::string out = e.ok ? "[ok]     " : "[failed] ";
    out += std::to_string(e.step_index) + ". " + step_kind_name(e.kind);
    if (!e.detail.empty()) out += " " + e.detail;
    return out;
}

/// The build result: a virtual tree of everything under layout_root, the
/// global environment's pinned packages, and the bin symlinks.
struct Layout {
    std::string layout_root;
    FileTree root;                                // paths relative to layout_root
    std::map<std::string, Version> global_env_packages;
    std::map<std::string, std::string> symlinks;  // bin name -> root-relative target
};

namespace detail {

struct ExecState {
    std::map<std::string, FileTree> stage;
    std::map<std::string, PackageRecord> staged_record; // index fetches only
    std::map<std::string, std::string> staged_pin;      // index fetches only
    std::vector<std::pair<std::string, std::string>> global_installs; // (tool, pin)
};

inline void materialize_entrypoints(FileTree& root, const std::string& prefix,
                                    const std::vector<Entrypoint>& entrypoints,
                                    const std::string& shebang) {
    for (const Entrypoint& ep : entrypoints) {
        std::string path = prefix + "/" + ep.entry;
        if (!root.count(path))
            root[path] = shebang + "\n# console entry: " + ep.cli_name + "\n";
    }
}

inline std::string run_step(const BuildPlan& plan, const Step& s, const RegistryIndex& index,
                            const GitStore& git_store, const std::map<std::string, PatchSet>& patches,
                            const FileTree& scripts, Layout& layout, ExecState& st) {
    const std::string& root_path = plan.layout_root;
    switch (s.kind) {
    case StepKind::CREATE_ISOLATED_ENV: {
        std::string env = "envs/" + s.tool;
        layout.root[env + "/pyvenv.cfg"] = "home = /usr/bin\n";
        layout.root[env + "/bin/python"] = "#!/bin/sh\n# interpreter stub for " + s.tool + "\n";
        return step_param_or_fail(s, "env");
    }
    case StepKind::CREATE_PROJECT_DIR: {
        layout.root["projects/" + s.tool + "/package.json"] = "{}\n";
        return step_param_or_fail(s, "dir");
    }
    case StepKind::FETCH_INDEX: {
        const std::string& eco = step_param_or_fail(s, "ecosystem");
        const std::string& package = step_param_or_fail(s, "package");
        const std::string& version = step_param_or_fail(s, "version");
        const PackageRecord* rec = index.find(eco, package, version);
        if (!rec)
            throw Error(ErrorCode::FetchMiss,
                        eco + " package " + package + "==" + version + " not in registry");
        st.stage[s.tool] = rec->files;
        st.staged_record[s.tool] = *rec;
        st.staged_pin[s.tool] = version;
        return package + "==" + version;
    }
    case StepKind::FETCH_GIT: {
        const std::string& url = step_param_or_fail(s, "url");
        const std::string& commit = step_param_or_fail(s, "commit");
        auto it = git_store.find({git_url_hash(url), commit});
        if (it == git_store.end())
            throw Error(ErrorCode::FetchMiss, url + " @ " + commit + " not in git store");
        st.stage[s.tool] = it->second;
        st.staged_record.erase(s.tool);
        st.staged_pin.erase(s.tool);
        return url + " @ " + commit.substr(0, 12);
    }
    case StepKind::APPLY_PATCHES: {
        auto staged = st.stage.find(s.tool);
        if (staged == st.stage.end())
            throw Error(ErrorCode::TargetMissing, "nothing staged for tool '" + s.tool + "'");
        auto ps = patches.find(s.tool);
        if (ps == patches.end())
            throw Error(ErrorCode::TargetMissing, "no patch set for tool '" + s.tool + "'");
        staged->second = apply_patchset(staged->second, ps->second);
        return std::to_string(ps->second.overlays.size()) + " overlay(s), " +
               std::to_string(ps->second.diffs.size()) + " diff(s)";
    }
    case StepKind::INSTALL_ISOLATED:
    case StepKind::INSTALL_GLOBAL:
    case StepKind::INSTALL_PROJECT: {
        auto staged = st.stage.find(s.tool);
        if (staged == st.stage.end())
            throw Error(ErrorCode::TargetMissing, "nothing staged for tool '" + s.tool + "'");
        auto rec = st.staged_record.find(s.tool);
        const std::vector<Entrypoint>* eps = rec == st.staged_record.end() ? nullptr : &rec->second.entrypoints;

        std::string prefix;
        if (s.kind == StepKind::INSTALL_ISOLATED) {
            prefix = "envs/" + s.tool;
            insert_subtree(layout.root, prefix, staged->second);
            if (eps)
                materialize_entrypoints(layout.root, prefix, *eps,
                                        "#!" + root_path + "/" + prefix + "/bin/python");
        } else if (s.kind == StepKind::INSTALL_PROJECT) {
            prefix = "projects/" + s.tool;
            insert_subtree(layout.root, prefix + "/node_modules/" + s.tool, staged->second);
            if (eps) materialize_entrypoints(layout.root, prefix, *eps, "#!/bin/sh");
        } else {
            prefix = "global/site-packages/" + s.tool;
            insert_subtree(layout.root, prefix, staged->second);
            if (eps) materialize_entrypoints(layout.root, "global", *eps, "#!/usr/bin/python3");
            auto pin = st.staged_pin.find(s.tool);
            if (pin != st.staged_pin.end()) {
                // index-sourced dynamic tool: its own pin joins the global environment
                st.global_installs.emplace_back(s.tool, pin->second);
                layout.global_env_packages[normalize_package_name(s.tool)] = parse_version(pin->second);
            }
        }
        st.stage.erase(s.tool);
        return prefix;
    }
    case StepKind::INSTALL_GLOBAL_REQUIREMENTS: {
        RequirementSets sets;
        for (const auto& [tool, pin] : st.global_installs) {
            std::vector<Requirement>& reqs = sets[tool];
            reqs.push_back(parse_requirement(tool + "==" + pin));
            auto rec = st.staged_record.find(tool);
            if (rec != st.staged_record.end())
                for (const std::string& raw : rec->second.requirements)
                    reqs.push_back(parse_requirement(raw));
        }
        std::vector<Requirement> manifest_reqs;
        for (const auto& [k, v] : s.params)
            if (k == "req") manifest_reqs.push_back(parse_requirement(v));
        if (!manifest_reqs.empty()) sets["global_requirements"] = std::move(manifest_reqs);

        MergeResult merged = merge_global_requirements(sets, registry_available_py(index));
        if (merged.status == MergeResult::Status::CONFLICT) {
            std::string detail = "unsatisfiable global requirements:";
            for (const MergeConflict& c : merged.conflicts) {
                detail += " " + c.package + " (";
                for (std::size_t i = 0; i < c.contributors.size(); ++i) {
                    if (i) detail += "; ";
                    detail += c.contributors[i].tool + " wants " +
                              render_specifiers(c.contributors[i].specifiers);
                }
                detail += ")";
            }
            throw Error(ErrorCode::MergeConflict, detail);
        }
        for (const auto& [name, version] : merged.pins) layout.global_env_packages[name] = version;
        return "pinned " + std::to_string(merged.pins.size()) + " package(s)";
    }
    case StepKind::WRITE_WRAPPER: {
        std::string content = render_wrapper_parts(step_param_or_fail(s, "env_kind"), s.tool,
                                                   step_param_or_fail(s, "entry"), root_path);
        std::string rel = "cli_scripts/" + s.tool + "/" + step_param_or_fail(s, "cli");
        layout.root[rel] = content;
        return rel;
    }
    case StepKind::CREATE_SYMLINK: {
        const std::string& link = step_param_or_fail(s, "link");
        const std::string& target = step_param_or_fail(s, "target");
        std::string name = link.substr(link.rfind('/') + 1);
        if (layout.symlinks.count(name))
            throw Error(ErrorCode::SymlinkCollision, "bin/" + name + " already exists");
        std::string target_rel =
            path_under(target, root_path) ? target.substr(root_path.size() + 1) : target;
        if (const std::string* script = step_param(s, "script")) {
            auto file = scripts.find(*script);
            if (file == scripts.end())
                throw Error(ErrorCode::FetchMiss, "custom script '" + *script + "' not found");
            layout.root[target_rel] = file->second;
        }
        layout.symlinks[name] = target_rel;
        return "bin/" + name + " -> " + target_rel;
    }
    }
    throw Error(ErrorCode::InvalidManifest, "unknown step kind");
}

} // namespace detail

/// Run a plan against the fixture registry, git store, patch sets and
/// custom-script tree. Steps execute strictly in plan order; the first
/// failure halts execution, leaving the log's single FAILED entry and a
/// partial layout without any trace of later steps.
inline std::pair<ActionLog, Layout> execute(const BuildPlan& plan, const RegistryIndex& index,
                                            const GitStore& git_store,
                                            const std::map<std::string, PatchSet>& patches,
                                            const FileTree& scripts = {}) {
    ActionLog log;
    Layout layout;
    layout.layout_root = plan.layout_root;
    detail::ExecState st;

    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
        const Step& s = plan.steps[i];
        try {
            std::string detail = detail::run_step(plan, s, index, git_store, patches, scripts, layout, st);
            log.entries.push_back({i + 1, s.kind, true, detail});
        } catch (const Error& e) {
            log.entries.push_back({i + 1, s.kind, false, e.what()});
            break;
        }
    }
    return {log, layout};
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

/// Read-only checks over a finished layout: static entrypoints resolve
/// through exactly one bin symlink to an existing wrapper, wrapper exec
/// targets exist, dynamic tools have no symlinks, and the global
/// environment's pins satisfy the manifest requirements.
inline VerificationReport verify_layout(const Layout& l, const Manifest& m) {
    VerificationReport report;
    auto add = [&report](ErrorCode code, std::string subject, std::string message) {
        report.violations.push_back({code, std::move(subject), std::move(message)});
    };

    // (a) static entrypoints: one symlink each, pointing at an existing file
    for (const ToolSpec* t : all_tools(m)) {
        if (classify_tool(m, t->name) == ToolClass::DYNAMIC_GLOBAL) continue;
        for (const Entrypoint& ep : t->entrypoints) {
            auto link = l.symlinks.find(ep.cli_name);
            if (link == l.symlinks.end()) {
                add(ErrorCode::TargetMissing, ep.cli_name,
                    "static entrypoint of '" + t->name + "' has no bin symlink");
            }
        }
    }

    // any symlink with a nonexistent target is dangling
    for (const auto& [name, target] : l.symlinks) {
        if (!l.root.count(target))
            add(ErrorCode::DanglingSymlink, name, "symlink target '" + target + "' does not exist");
    }

    // (b) wrapper exec targets
    for (const auto& [path, content] : l.root) {
        if (!path_under(path, "cli_scripts")) continue;
        detail::SplitFile f = detail::split_lines(content);
        if (f.lines.size() != 2 || f.lines[0] != "#!/bin/sh") continue; // custom script, not a wrapper
        const std::string& body = f.lines[1];
        std::string target;
        if (body.rfind("exec \"", 0) == 0) {
            std::size_t end = body.find('"', 6);
            if (end == std::string::npos) continue;
            target = body.substr(6, end - 6);
        } else if (body.rfind("cd \"", 0) == 0) {
            std::size_t dir_end = body.find('"', 4);
            if (dir_end == std::string::npos) continue;
            std::string dir = body.substr(4, dir_end - 4);
            std::size_t exec_at = body.find("exec \"./", dir_end);
            if (exec_at == std::string::npos) continue;
            std::size_t end = body.find('"', exec_at + 8);
            if (end == std::string::npos) continue;
            target = dir + "/" + body.substr(exec_at + 8, end - (exec_at + 8));
        } else {
            continue;
        }
        if (path_under(target, l.layout_root)) {
            std::string rel = target.substr(l.layout_root.size() + 1);
            if (!l.root.count(rel))
                add(ErrorCode::TargetMissing, path, "wrapper exec target '" + rel + "' does not exist");
        } else {
            add(ErrorCode::TargetMissing, path, "wrapper exec target '" + target + "' escapes the layout");
        }
    }

    // (c) dynamic tools never surface in bin
    for (const ToolSpec* t : all_tools(m)) {
        if (classify_tool(m, t->name) != ToolClass::DYNAMIC_GLOBAL) continue;
        for (const Entrypoint& ep : t->entrypoints)
            if (l.symlinks.count(ep.cli_name))
                add(ErrorCode::UnexpectedSymlink, ep.cli_name,
                    "dynamic tool '" + t->name + "' must not have a bin symlink");
        if (l.symlinks.count(t->name) && t->entrypoints.empty())
            add(ErrorCode::UnexpectedSymlink, t->name, "dynamic tool must not have a bin symlink");
    }

    // (d) global pins satisfy the manifest's requirements and tool self-pins
    for (const std::string& raw : m.global_requirements) {
        Requirement req;
        try {
            req = parse_requirement(raw);
        } catch (const Error& e) {
            add(ErrorCode::MalformedRequirement, raw, e.what());
            continue;
        }
        auto pin = l.global_env_packages.find(req.name);
        if (pin != l.global_env_packages.end() && !satisfies(pin->second, req))
            add(ErrorCode::PinViolation, req.name,
                "pinned " + render_version(pin->second) + " violates '" + raw + "'");
    }
    for (const ToolSpec& t : m.python_tools) {
        if (classify_tool(m, t.name) != ToolClass::DYNAMIC_GLOBAL) continue;
        if (t.source != Source::INDEX) continue;
        auto pin = l.global_env_packages.find(normalize_package_name(t.name));
        if (pin == l.global_env_packages.end())
            add(ErrorCode::PinViolation, t.name, "global tool missing from the environment pins");
        else if (!version_eq(pin->second, parse_version(*t.version_pin)))
            add(ErrorCode::PinViolation, t.name,
                "environment pin " + render_version(pin->second) + " differs from manifest pin " +
                    *t.version_pin);
    }

    return report;
}

/// Sorted path manifest with content digests; the golden-test form of a
/// layout. Two equal layouts export byte-identical text.
inline std::string export_layout(const Layout& l) {
    std::string out = "root " + l.layout_root + "\n";
    for (const auto& [path, bytes] : l.root)
        out += "file " + path + " fnv64=" + fnv1a64_hex(bytes) + "\n";
    for (const auto& [name, target] : l.symlinks)
        out += "link bin/" + name + " -> " + target + "\n";
    for (const auto& [name, version] : l.global_env_packages)
        out += "pin " + name + "==" + render_version(version) + "\n";
    return out;
}

} // namespace iceforge
