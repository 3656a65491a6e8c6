#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "iceforge/errors.hpp"
#include "iceforge/manifest.hpp"
#include "iceforge/planner.hpp"

namespace iceforge {

struct EmitOptions {
    // base-image choice is out of scope; callers override the placeholder
    std::string base_image = "iceforge-base:placeholder";
};

// ---------------------------------------------------------------------------
// Wrapper scripts
// ---------------------------------------------------------------------------

/// Two-line launcher delegating a CLI name to the tool's entrypoint. The
/// entry file inside an isolated environment carries its own interpreter
/// shebang; the wrapper only needs a portable exec.
inline std::string render_wrapper_parts(std::string_view env_kind, const std::string& tool,
                                        const std::string& entry, const std::string& root) {
    if (env_kind == "isolated")
        return "#!/bin/sh\nexec \"" + layout_env_dir(root, tool) + "/" + entry + "\" \"$@\"\n";
    if (env_kind == "project")
        return "#!/bin/sh\ncd \"" + layout_project_dir(root, tool) + "\" && exec \"./" + entry +
               "\" \"$@\"\n";
    throw Error(ErrorCode::NotStatic, "tool '" + tool + "' has no wrapper form");
}

inline std::string render_wrapper(const ToolSpec& tool, const Entrypoint& ep,
                                  const std::string& root = kDefaultLayoutRoot) {
    switch (tool.environment) {
    case Environment::ISOLATED: return render_wrapper_parts("isolated", tool.name, ep.entry, root);
    case Environment::PROJECT: return render_wrapper_parts("project", tool.name, ep.entry, root);
    case Environment::GLOBAL:
        throw Error(ErrorCode::NotStatic, "tool '" + tool.name + "' installs globally and gets no wrapper");
    }
    throw Error(ErrorCode::NotStatic, "unreachable");
}

// ---------------------------------------------------------------------------
// Shared block bodies
// ---------------------------------------------------------------------------

namespace detail {

// Shell-quote a wrapper script as printf arguments: one '%s\n' per line.
inline std::string printf_wrapper(const std::string& content) {
    std::string args;
    std::size_t start = 0;
    while (start < content.size()) {
        std::size_t nl = content.find('\n', start);
        std::string line = content.substr(start, nl - start);
        args += " '" + line + "'";
        if (nl == std::string::npos) break;
        start = nl + 1;
    }
    return "printf '%s\\n'" + args;
}

struct StepCommands {
    std::string copy_src;  // build-context path to copy in, empty if none
    std::string copy_dst;
    std::vector<std::string> commands;
};

/// Commands realizing one step; shared between the container buildfile and
/// the shell script so the two artifacts cannot drift apart.
inline StepCommands step_commands(const BuildPlan& plan, const Step& s) {
    const std::string& root = plan.layout_root;
    StepCommands out;
    switch (s.kind) {
    case StepKind::CREATE_ISOLATED_ENV:
        out.commands.push_back("python3 -m venv \"" + step_param_or_fail(s, "env") + "\"");
        break;
    case StepKind::CREATE_PROJECT_DIR:
        out.commands.push_back("mkdir -p \"" + step_param_or_fail(s, "dir") + "\"");
        break;
    case StepKind::FETCH_INDEX: {
        std::string stage = layout_stage_dir(root, s.tool);
        // stage the unpacked source tree so patching sees real files
        if (step_param_or_fail(s, "ecosystem") == "py") {
            out.commands.push_back("mkdir -p \"" + stage + "\" && pip download --no-deps --no-binary :all: --dest \"" +
                                   stage + "\" \"" + step_param_or_fail(s, "package") + "==" +
                                   step_param_or_fail(s, "version") + "\"");
            out.commands.push_back("find \"" + stage + "\" -maxdepth 1 -name '*.tar.gz'" +
                                   " -exec tar -xzf '{}' -C \"" + stage + "\" --strip-components=1 ';'" +
                                   " -exec rm '{}' ';'");
        } else {
            out.commands.push_back("mkdir -p \"" + stage + "\" && npm pack --pack-destination \"" + stage +
                                   "\" \"" + step_param_or_fail(s, "package") + "@" +
                                   step_param_or_fail(s, "version") + "\"");
            out.commands.push_back("find \"" + stage + "\" -maxdepth 1 -name '*.tgz'" +
                                   " -exec tar -xzf '{}' -C \"" + stage + "\" --strip-components=1 ';'" +
                                   " -exec rm '{}' ';'");
        }
        break;
    }
    case StepKind::FETCH_GIT: {
        std::string stage = layout_stage_dir(root, s.tool);
        out.commands.push_back("git clone \"" + step_param_or_fail(s, "url") + "\" \"" + stage + "\"");
        out.commands.push_back("git -C \"" + stage + "\" checkout --detach \"" +
                               step_param_or_fail(s, "commit") + "\"");
        break;
    }
    case StepKind::APPLY_PATCHES: {
        std::string stage = layout_stage_dir(root, s.tool);
        std::string pdir = root + "/patches/" + s.tool;
        out.copy_src = "patches/" + s.tool;
        out.copy_dst = pdir;
        out.commands.push_back("if [ -d \"" + pdir + "/overlay\" ]; then cp -R \"" + pdir +
                               "/overlay/.\" \"" + stage + "/\"; fi");
        out.commands.push_back("for f in \"" + pdir + "\"/*.diff; do [ -e \"$f\" ] || continue; patch -d \"" +
                               stage + "\" -p0 --fuzz=0 -i \"$f\"; done");
        break;
    }
    case StepKind::INSTALL_ISOLATED:
        out.commands.push_back("\"" + step_param_or_fail(s, "env") + "/bin/pip\" install --no-deps \"" +
                               layout_stage_dir(root, s.tool) + "\"");
        break;
    case StepKind::INSTALL_GLOBAL:
        out.commands.push_back("pip install --no-deps \"" + layout_stage_dir(root, s.tool) + "\"");
        break;
    case StepKind::INSTALL_PROJECT:
        out.commands.push_back("cd \"" + step_param_or_fail(s, "dir") + "\" && npm install --no-save \"" +
                               layout_stage_dir(root, s.tool) + "\"");
        break;
    case StepKind::INSTALL_GLOBAL_REQUIREMENTS:
        if (step_param_or_fail(s, "reqs") == "0") {
            out.commands.push_back("true # no global requirements pinned");
        } else {
            out.copy_src = "global_requirements.txt";
            out.copy_dst = root + "/global_requirements.txt";
            out.commands.push_back("pip install --requirement \"" + root + "/global_requirements.txt\"");
        }
        break;
    case StepKind::WRITE_WRAPPER: {
        std::string content = render_wrapper_parts(step_param_or_fail(s, "env_kind"), s.tool,
                                                   step_param_or_fail(s, "entry"), root);
        const std::string& path = step_param_or_fail(s, "path");
        out.commands.push_back("mkdir -p \"" + root + "/cli_scripts/" + s.tool + "\"");
        out.commands.push_back(printf_wrapper(content) + " > \"" + path + "\"");
        out.commands.push_back("chmod 755 \"" + path + "\"");
        break;
    }
    case StepKind::CREATE_SYMLINK: {
        const std::string& target = step_param_or_fail(s, "target");
        if (const std::string* script = step_param(s, "script")) {
            out.copy_src = "cli_scripts/" + *script;
            out.copy_dst = target;
            out.commands.push_back("chmod 755 \"" + target + "\"");
        }
        out.commands.push_back("ln -s \"" + target + "\" \"" + step_param_or_fail(s, "link") + "\"");
        break;
    }
    }
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

/// Container build file: fixed header, then one instruction block per plan
/// step (block comment "# <index>. <KIND> tool=<name>"). Byte-identical
/// across invocations on equal plans.
inline std::string emit_buildfile(const BuildPlan& plan, const EmitOptions& options = {}) {
    const std::string& root = plan.layout_root;
    std::string out;
    out += "# iceforge container build file (generated; do not edit by hand)\n";
    out += "FROM " + options.base_image + "\n";
    out += "ENV ICEFORGE_ROOT=\"" + root + "\"\n";
    out += "ENV PATH=\"" + root + "/bin:${PATH}\"\n";
    out += "RUN mkdir -p \"" + root + "/bin\"\n";

    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
        const Step& s = plan.steps[i];
        out += "\n# " + std::to_string(i + 1) + ". " + step_kind_name(s.kind);
        if (!s.tool.empty()) out += " tool=" + s.tool;
        out += "\n";
        detail::StepCommands cmds = detail::step_commands(plan, s);
        if (!cmds.copy_src.empty())
            out += "COPY \"" + cmds.copy_src + "\" \"" + cmds.copy_dst + "\"\n";
        if (!cmds.commands.empty()) {
            out += "RUN ";
            for (std::size_t c = 0; c < cmds.commands.size(); ++c) {
                if (c) out += " \\\n && ";
                out += cmds.commands[c];
            }
            out += "\n";
        }
    }
    return out;
}

/// Containerless realization of the same plan: a strict-mode shell script
/// with one command group per step, exiting nonzero on first failure.
inline std::string emit_shell(const BuildPlan& plan) {
    const std::string& root = plan.layout_root;
    std::string out;
    out += "#!/bin/sh\n";
    out += "# iceforge build script (generated; do not edit by hand)\n";
    out += "set -eu\n";
    out += "mkdir -p \"" + root + "/bin\"\n";

    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
        const Step& s = plan.steps[i];
        out += "\n# " + std::to_string(i + 1) + ". " + step_kind_name(s.kind);
        if (!s.tool.empty()) out += " tool=" + s.tool;
        out += "\n";
        detail::StepCommands cmds = detail::step_commands(plan, s);
        if (!cmds.copy_src.empty()) {
            std::size_t dir_end = cmds.copy_dst.rfind('/');
            out += "mkdir -p \"" + cmds.copy_dst.substr(0, dir_end) + "\"\n";
            out += "cp -R \"" + cmds.copy_src + "\" \"" + cmds.copy_dst + "\"\n";
        }
        for (const std::string& c : cmds.commands) out += c + "\n";
    }
    return out;
}

} // namespace iceforge
