// iceforge: manifest-driven build orchestrator for bundled CLI tooling.
//
// Exit codes: 0 success, 1 domain failure (validation violations, merge
// conflicts, failed build steps), 2 usage or I/O errors (bad flags,
// unreadable inputs, manifest syntax errors).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "iceforge/iceforge.hpp"

namespace fs = std::filesystem;
using namespace iceforge;

namespace {

constexpr int kOk = 0;
constexpr int kDomainFailure = 1;
constexpr int kUsageError = 2;

std::string read_file_or_exit(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "error: cannot read " << path << "\n";
        std::exit(kUsageError);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Parse the manifest, exiting 2 on grammar errors and 1 on resolution
/// errors (duplicates, dangling overrides, missing pins, bad commits).
Manifest load_manifest_or_exit(const std::string& path) {
    std::string text = read_file_or_exit(path);
    try {
        return parse_manifest(text);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::SyntaxError) {
            std::cerr << path << ": " << e.what() << "\n";
            std::exit(kUsageError);
        }
        std::cout << e.what() << "\n";
        std::exit(kDomainFailure);
    }
}

FileTree load_dir_or_exit(const std::string& path, const char* what) {
    try {
        return load_tree(path);
    } catch (const Error& e) {
        std::cerr << "error: bad " << what << " directory: " << e.what() << "\n";
        std::exit(kUsageError);
    }
}

std::map<std::string, PatchSet> collect_patch_sets(const Manifest& m, const std::string& patches_dir) {
    std::map<std::string, PatchSet> out;
    if (patches_dir.empty()) return out;
    FileTree tree = load_dir_or_exit(patches_dir, "patches");
    for (const ToolSpec* t : all_tools(m)) {
        try {
            PatchSet ps = collect_patches(tree, t->name);
            if (!ps.empty()) out.emplace(t->name, std::move(ps));
        } catch (const Error& e) {
            std::cerr << "error: patches for '" << t->name << "': " << e.what() << "\n";
            std::exit(kUsageError);
        }
    }
    return out;
}

/// plan_build + optional custom-script symlinks appended.
BuildPlan make_plan_or_exit(const Manifest& m, const std::map<std::string, PatchSet>& patches,
                            const std::string& scripts_dir, const std::string& root) {
    try {
        BuildPlan plan = plan_build(m, patches, root);
        if (!scripts_dir.empty()) {
            FileTree scripts = load_dir_or_exit(scripts_dir, "cli_scripts");
            std::vector<Step> extra = plan_custom_scripts(m, scripts, root);
            plan.steps.insert(plan.steps.end(), extra.begin(), extra.end());
        }
        return plan;
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        std::exit(kDomainFailure);
    }
}

int cmd_validate(const std::string& manifest_path) {
    Manifest m = load_manifest_or_exit(manifest_path);
    ValidationReport report = validate_manifest(m);
    for (const Violation& v : report.violations) std::cout << render_violation(v) << "\n";
    return report.ok() ? kOk : kDomainFailure;
}

int cmd_plan(const std::string& manifest_path, const std::string& patches_dir,
             const std::string& scripts_dir, const std::string& root) {
    Manifest m = load_manifest_or_exit(manifest_path);
    auto patches = collect_patch_sets(m, patches_dir);
    BuildPlan plan = make_plan_or_exit(m, patches, scripts_dir, root);
    std::cout << serialize_plan(plan);
    return kOk;
}

int cmd_emit(const std::string& manifest_path, const std::string& patches_dir,
             const std::string& scripts_dir, const std::string& root, const std::string& format,
             const std::string& out_path, const std::string& base_image) {
    Manifest m = load_manifest_or_exit(manifest_path);
    auto patches = collect_patch_sets(m, patches_dir);
    BuildPlan plan = make_plan_or_exit(m, patches, scripts_dir, root);

    std::string artifact;
    if (format == "buildfile") {
        EmitOptions options;
        if (!base_image.empty()) options.base_image = base_image;
        artifact = emit_buildfile(plan, options);
    } else {
        artifact = emit_shell(plan);
    }

    if (out_path.empty()) {
        std::cout << artifact;
    } else {
        std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
        if (!out) {
            std::cerr << "error: cannot write " << out_path << "\n";
            return kUsageError;
        }
        out.write(artifact.data(), static_cast<std::streamsize>(artifact.size()));
    }
    return kOk;
}

int cmd_build(const std::string& manifest_path, const std::string& patches_dir,
              const std::string& scripts_dir, const std::string& root,
              const std::string& registry_dir, const std::string& gitstore_dir,
              const std::string& sandbox_dir) {
    Manifest m = load_manifest_or_exit(manifest_path);
    auto patches = collect_patch_sets(m, patches_dir);
    BuildPlan plan = make_plan_or_exit(m, patches, scripts_dir, root);

    RegistryIndex index;
    try {
        index = load_registry(registry_dir);
    } catch (const Error& e) {
        std::cerr << "error: registry: " << e.what() << "\n";
        return kUsageError;
    }
    GitStore git_store;
    if (!gitstore_dir.empty()) {
        try {
            git_store = load_git_store(gitstore_dir);
        } catch (const Error& e) {
            std::cerr << "error: gitstore: " << e.what() << "\n";
            return kUsageError;
        }
    }
    FileTree scripts;
    if (!scripts_dir.empty()) scripts = load_dir_or_exit(scripts_dir, "cli_scripts");

    auto [log, layout] = execute(plan, index, git_store, patches, scripts);
    for (const ActionEntry& e : log.entries) std::cout << render_action_entry(e) << "\n";

    VerificationReport report = verify_layout(layout, m);
    for (const Violation& v : report.violations)
        std::cout << "[violation] " << render_violation(v) << "\n";

    if (!sandbox_dir.empty()) {
        try {
            fs::create_directories(fs::path(sandbox_dir));
            write_tree(fs::path(sandbox_dir) / "root", layout.root);
            for (const auto& [name, target] : layout.symlinks) {
                fs::path link = fs::path(sandbox_dir) / "root" / "bin" / name;
                fs::create_directories(link.parent_path());
                std::error_code ec;
                fs::remove(link, ec);
                fs::create_symlink(fs::path("..") / target, link, ec);
            }
            std::ofstream out(fs::path(sandbox_dir) / "layout.manifest", std::ios::binary | std::ios::trunc);
            out << export_layout(layout);
        } catch (const std::exception& e) {
            std::cerr << "error: sandbox: " << e.what() << "\n";
            return kUsageError;
        }
    }

    return log.all_ok() && report.ok() ? kOk : kDomainFailure;
}

int cmd_check_conflicts(const std::string& manifest_path, const std::string& registry_dir) {
    Manifest m = load_manifest_or_exit(manifest_path);
    RegistryIndex index;
    try {
        index = load_registry(registry_dir);
    } catch (const Error& e) {
        std::cerr << "error: registry: " << e.what() << "\n";
        return kUsageError;
    }

    try {
        RequirementSets sets = global_requirement_sets(m, index);
        MergeResult merged = merge_global_requirements(sets, registry_available_py(index));
        if (merged.status == MergeResult::Status::OK) {
            std::cout << render_lockfile(merged.pins);
            return kOk;
        }
        for (const MergeConflict& c : merged.conflicts) {
            std::cout << "CONFLICT " << c.package << ":";
            for (std::size_t i = 0; i < c.contributors.size(); ++i) {
                std::cout << (i ? "; " : " ") << c.contributors[i].tool << " wants "
                          << render_specifiers(c.contributors[i].specifiers);
            }
            std::cout << "\n";
        }
        return kDomainFailure;
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return kDomainFailure;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"manifest-driven build orchestrator for bundled CLI tooling"};
    app.set_version_flag("--version", std::string("iceforge ") + kVersion + " (manifest grammar " +
                                          kManifestGrammarVersion + ")");
    app.require_subcommand(1);

    std::string manifest_path, patches_dir, scripts_dir, registry_dir, gitstore_dir, sandbox_dir;
    std::string format = "buildfile", out_path, base_image;
    std::string root = kDefaultLayoutRoot;

    auto add_root = [&root](CLI::App* cmd) {
        cmd->add_option("--root", root, "layout root path")->envname("ICEFORGE_ROOT");
    };
    auto add_patches = [&patches_dir](CLI::App* cmd) {
        cmd->add_option("--patches", patches_dir, "patches directory (patches/<tool>/...)");
    };
    auto add_scripts = [&scripts_dir](CLI::App* cmd) {
        cmd->add_option("--scripts", scripts_dir, "custom CLI scripts directory (cli_scripts/<tool>/<name>)");
    };

    CLI::App* validate = app.add_subcommand("validate", "parse and validate a manifest");
    validate->add_option("manifest", manifest_path, "manifest file")->required();

    CLI::App* plan = app.add_subcommand("plan", "print the deterministic build plan");
    plan->add_option("manifest", manifest_path, "manifest file")->required();
    add_patches(plan);
    add_scripts(plan);
    add_root(plan);

    CLI::App* emit = app.add_subcommand("emit", "write a container build file or shell script");
    emit->add_option("manifest", manifest_path, "manifest file")->required();
    add_patches(emit);
    add_scripts(emit);
    add_root(emit);
    emit->add_option("--format", format, "artifact format")
        ->check(CLI::IsMember({"buildfile", "shell"}))
        ->required();
    emit->add_option("--out", out_path, "output file (stdout when omitted)");
    emit->add_option("--base-image", base_image, "base image name for the buildfile header");

    CLI::App* build = app.add_subcommand("build", "execute the plan in the offline sandbox");
    build->add_option("manifest", manifest_path, "manifest file")->required();
    add_patches(build);
    add_scripts(build);
    add_root(build);
    build->add_option("--registry", registry_dir, "fixture registry directory")->required();
    build->add_option("--gitstore", gitstore_dir, "fixture git store directory");
    build->add_option("--sandbox", sandbox_dir, "materialize the resulting layout here");

    CLI::App* conflicts = app.add_subcommand("check-conflicts", "merge global requirements and report");
    conflicts->add_option("manifest", manifest_path, "manifest file")->required();
    conflicts->add_option("--registry", registry_dir, "fixture registry directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageError;
    }

    if (validate->parsed()) return cmd_validate(manifest_path);
    if (plan->parsed()) return cmd_plan(manifest_path, patches_dir, scripts_dir, root);
    if (emit->parsed())
        return cmd_emit(manifest_path, patches_dir, scripts_dir, root, format, out_path, base_image);
    if (build->parsed())
        return cmd_build(manifest_path, patches_dir, scripts_dir, root, registry_dir, gitstore_dir,
                         sandbox_dir);
    if (conflicts->parsed()) return cmd_check_conflicts(manifest_path, registry_dir);
    return kUsageError;
}
