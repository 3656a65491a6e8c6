#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "iceforge/errors.hpp"
#include "iceforge/fstree.hpp"
#include "iceforge/manifest.hpp"
#include "iceforge/patchkit.hpp"

namespace iceforge {

// ---------------------------------------------------------------------------
// Layout conventions
// ---------------------------------------------------------------------------

inline constexpr const char* kDefaultLayoutRoot = "/opt/iceforge";

inline std::string layout_env_dir(const std::string& root, const std::string& tool) {
    return root + "/envs/" + tool;
}
inline std::string layout_project_dir(const std::string& root, const std::string& tool) {
    return root + "/projects/" + tool;
}
inline std::string layout_stage_dir(const std::string& root, const std::string& tool) {
    return root + "/stage/" + tool;
}
inline std::string layout_wrapper_path(const std::string& root, const std::string& tool,
                                       const std::string& cli) {
    return root + "/cli_scripts/" + tool + "/" + cli;
}
inline std::string layout_bin_link(const std::string& root, const std::string& cli) {
    return root + "/bin/" + cli;
}

// ---------------------------------------------------------------------------
// Steps
// ---------------------------------------------------------------------------

enum class StepKind {
    CREATE_ISOLATED_ENV,
    CREATE_PROJECT_DIR,
    FETCH_INDEX,
    FETCH_GIT,
    APPLY_PATCHES,
    INSTALL_ISOLATED,
    INSTALL_GLOBAL,
    INSTALL_PROJECT,
    INSTALL_GLOBAL_REQUIREMENTS,
    WRITE_WRAPPER,
    CREATE_SYMLINK,
};

inline const char* step_kind_name(StepKind k) {
    switch (k) {
    case StepKind::CREATE_ISOLATED_ENV: return "CREATE_ISOLATED_ENV";
    case StepKind::CREATE_PROJECT_DIR: return "CREATE_PROJECT_DIR";
    case StepKind::FETCH_INDEX: return "FETCH_INDEX";
    case StepKind::FETCH_GIT: return "FETCH_GIT";
    case StepKind::APPLY_PATCHES: return "APPLY_PATCHES";
    case StepKind::INSTALL_ISOLATED: return "INSTALL_ISOLATED";
    case StepKind::INSTALL_GLOBAL: return "INSTALL_GLOBAL";
    case StepKind::INSTALL_PROJECT: return "INSTALL_PROJECT";
    case StepKind::INSTALL_GLOBAL_REQUIREMENTS: return "INSTALL_GLOBAL_REQUIREMENTS";
    case StepKind::WRITE_WRAPPER: return "WRITE_WRAPPER";
    case StepKind::CREATE_SYMLINK: return "CREATE_SYMLINK";
    }
    return "?";
}

/// One node of the realized flowchart. `tool` is empty only for
/// INSTALL_GLOBAL_REQUIREMENTS; params are ordered key/value pairs and
/// serialize in declaration order.
struct Step {
    StepKind kind;
    std::string tool;
    std::vector<std::pair<std::string, std::string>> params;

    bool operator==(const Step&) const = default;
};

inline const std::string* step_param(const Step& s, std::string_view key) {
    for (const auto& [k, v] : s.params)
        if (k == key) return &v;
    return nullptr;
}

inline const std::string& step_param_or_fail(const Step& s, std::string_view key) {
    const std::string* v = step_param(s, key);
    if (!v)
        throw Error(ErrorCode::InvalidManifest,
                    std::string(step_kind_name(s.kind)) + " step lacks param '" + std::string(key) + "'");
    return *v;
}

struct BuildPlan {
    std::vector<Step> steps;
    std::string layout_root;

    bool operator==(const BuildPlan&) const = default;
};

/// Line-oriented plan text used by golden tests and the `plan` command:
/// "<index>. <KIND> tool=<name> <key>=<value>...", 1-based indices.
inline std::string serialize_plan(const BuildPlan& plan) {
    std::string out;
    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
        const Step& s = plan.steps[i];
        out += std::to_string(i + 1) + ". " + step_kind_name(s.kind);
        if (!s.tool.empty()) out += " tool=" + s.tool;
        for (const auto& [k, v] : s.params) out += " " + k + "=" + v;
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Planning
// ---------------------------------------------------------------------------

/// Realize the build flowchart for a validated manifest: per tool (manifest
/// order) environment creation, fetch, optional patching, install; then the
/// single global-requirements step; then wrappers and symlinks for every
/// static tool entrypoint. Deterministic for equal inputs.
inline BuildPlan plan_build(const Manifest& m, const std::map<std::string, PatchSet>& patches,
                            const std::string& layout_root = kDefaultLayoutRoot) {
    ValidationReport report = validate_manifest(m);
    if (!report.ok())
        throw Error(ErrorCode::InvalidManifest,
                    "manifest has " + std::to_string(report.violations.size()) +
                        " violation(s); first: " + render_violation(report.violations.front()));

    BuildPlan plan;
    plan.layout_root = layout_root;

    for (const ToolSpec* t : all_tools(m)) {
        ToolClass cls = classify_tool(m, t->name);

        switch (cls) {
        case ToolClass::STATIC_ISOLATED:
            plan.steps.push_back({StepKind::CREATE_ISOLATED_ENV, t->name,
                                  {{"env", layout_env_dir(layout_root, t->name)}}});
            break;
        case ToolClass::STATIC_PROJECT:
            plan.steps.push_back({StepKind::CREATE_PROJECT_DIR, t->name,
                                  {{"dir", layout_project_dir(layout_root, t->name)}}});
            break;
        case ToolClass::DYNAMIC_GLOBAL:
            break; // installs straight into the global environment
        }

        if (t->source == Source::GIT) {
            plan.steps.push_back({StepKind::FETCH_GIT, t->name,
                                  {{"url", *t->git_url}, {"commit", *t->git_commit}}});
        } else {
            plan.steps.push_back({StepKind::FETCH_INDEX, t->name,
                                  {{"ecosystem", t->ecosystem == Ecosystem::PY ? "py" : "js"},
                                   {"package", t->name},
                                   {"version", *t->version_pin}}});
        }

        auto ps = patches.find(t->name);
        if (ps != patches.end() && !ps->second.empty()) {
            plan.steps.push_back({StepKind::APPLY_PATCHES, t->name,
                                  {{"overlays", std::to_string(ps->second.overlays.size())},
                                   {"diffs", std::to_string(ps->second.diffs.size())}}});
        }

        switch (cls) {
        case ToolClass::STATIC_ISOLATED:
            plan.steps.push_back({StepKind::INSTALL_ISOLATED, t->name,
                                  {{"env", layout_env_dir(layout_root, t->name)}}});
            break;
        case ToolClass::STATIC_PROJECT:
            plan.steps.push_back({StepKind::INSTALL_PROJECT, t->name,
                                  {{"dir", layout_project_dir(layout_root, t->name)}}});
            break;
        case ToolClass::DYNAMIC_GLOBAL:
            plan.steps.push_back({StepKind::INSTALL_GLOBAL, t->name, {}});
            break;
        }
    }

    Step reqs{StepKind::INSTALL_GLOBAL_REQUIREMENTS, "", {}};
    reqs.params.emplace_back("reqs", std::to_string(m.global_requirements.size()));
    for (const std::string& r : m.global_requirements) reqs.params.emplace_back("req", r);
    plan.steps.push_back(std::move(reqs));

    for (const ToolSpec* t : all_tools(m)) {
        if (classify_tool(m, t->name) == ToolClass::DYNAMIC_GLOBAL) continue;
        for (const Entrypoint& ep : t->entrypoints) {
            std::string wrapper = layout_wrapper_path(layout_root, t->name, ep.cli_name);
            plan.steps.push_back({StepKind::WRITE_WRAPPER, t->name,
                                  {{"cli", ep.cli_name},
                                   {"path", wrapper},
                                   {"env_kind", t->environment == Environment::PROJECT ? "project" : "isolated"},
                                   {"entry", ep.entry}}});
            plan.steps.push_back({StepKind::CREATE_SYMLINK, t->name,
                                  {{"link", layout_bin_link(layout_root, ep.cli_name)},
                                   {"target", wrapper}}});
        }
    }

    return plan;
}

/// Plan symlinks for self-contained CLI scripts laid out as
/// `<tool>/<name>` inside a cli_scripts directory tree. Scripts get no
/// wrapper; each becomes one CREATE_SYMLINK carrying a `script` param with
/// the source path. Throws CliNameCollision against manifest entrypoints
/// and between scripts.
inline std::vector<Step> plan_custom_scripts(const Manifest& m, const FileTree& script_root,
                                             const std::string& layout_root = kDefaultLayoutRoot) {
    std::set<std::string> taken;
    for (const ToolSpec* t : all_tools(m))
        for (const Entrypoint& ep : t->entrypoints) taken.insert(ep.cli_name);

    std::vector<std::pair<std::string, std::string>> scripts; // (tool, name)
    for (const auto& [path, bytes] : script_root) {
        std::size_t slash = path.find('/');
        if (slash == std::string::npos) continue;
        if (path.find('/', slash + 1) != std::string::npos) continue; // support files
        scripts.emplace_back(path.substr(0, slash), path.substr(slash + 1));
    }
    std::sort(scripts.begin(), scripts.end());

    std::vector<Step> steps;
    for (const auto& [tool, name] : scripts) {
        if (!taken.insert(name).second)
            throw Error(ErrorCode::CliNameCollision,
                        "custom script '" + tool + "/" + name + "' collides with an existing cli name");
        steps.push_back({StepKind::CREATE_SYMLINK, tool,
                         {{"link", layout_bin_link(layout_root, name)},
                          {"target", layout_wrapper_path(layout_root, tool, name)},
                          {"script", tool + "/" + name}}});
    }
    return steps;
}

} // namespace iceforge
