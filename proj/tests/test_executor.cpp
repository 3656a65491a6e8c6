#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "iceforge/executor.hpp"

using namespace iceforge;

namespace {

std::string fixtures(const std::string& rel) { return std::string(FIXTURES_DIR) + "/" + rel; }

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct FixtureBundle {
    Manifest manifest;
    std::map<std::string, PatchSet> patches;
    RegistryIndex registry;
    GitStore git_store;
    FileTree scripts;
    BuildPlan plan;
};

FixtureBundle load_bundle() {
    FixtureBundle b;
    b.manifest = parse_manifest(read_file(fixtures("bundle/manifest.toml")));
    FileTree patch_tree = load_tree(fixtures("bundle/patches"));
    for (const ToolSpec* t : all_tools(b.manifest)) {
        PatchSet ps = collect_patches(patch_tree, t->name);
        if (!ps.empty()) b.patches.emplace(t->name, std::move(ps));
    }
    b.registry = load_registry(fixtures("bundle/registry"));
    b.git_store = load_git_store(fixtures("bundle/gitstore"));
    b.scripts = load_tree(fixtures("bundle/cli_scripts"));
    b.plan = plan_build(b.manifest, b.patches);
    std::vector<Step> extra = plan_custom_scripts(b.manifest, b.scripts);
    b.plan.steps.insert(b.plan.steps.end(), extra.begin(), extra.end());
    return b;
}

} // namespace

TEST_CASE("an empty plan leaves an empty layout and a single OK entry") {
    BuildPlan plan = plan_build(Manifest{}, {});
    auto [log, layout] = execute(plan, RegistryIndex{}, {}, {});
    REQUIRE(log.entries.size() == 1);
    CHECK(log.entries[0].kind == StepKind::INSTALL_GLOBAL_REQUIREMENTS);
    CHECK(log.entries[0].ok);
    CHECK(layout.root.empty());
    CHECK(layout.symlinks.empty());
    CHECK(layout.global_env_packages.empty());
}

TEST_CASE("the full fixture executes to a verified layout") {
    FixtureBundle b = load_bundle();
    auto [log, layout] = execute(b.plan, b.registry, b.git_store, b.patches, b.scripts);

    REQUIRE(log.all_ok());
    CHECK(log.entries.size() == b.plan.steps.size());

    // log kinds mirror the serialized plan kinds, in order
    for (std::size_t i = 0; i < log.entries.size(); ++i) {
        CHECK(log.entries[i].kind == b.plan.steps[i].kind);
        CHECK(log.entries[i].step_index == i + 1);
    }

    // 11 isolated environments + 1 project + 2 global site-packages trees
    int envs = 0;
    for (const ToolSpec& t : b.manifest.python_tools)
        if (layout.root.count("envs/" + t.name + "/pyvenv.cfg")) ++envs;
    CHECK(envs == 11);
    CHECK(layout.root.count("projects/promptfoo/package.json"));
    CHECK(layout.root.count("global/site-packages/pyrit/pyrit/__init__.py"));
    CHECK(layout.root.count("global/site-packages/rigging/rigging/__init__.py"));

    // exactly the two dynamic tools in the global environment
    REQUIRE(layout.global_env_packages.size() == 2);
    CHECK(render_version(layout.global_env_packages.at("pyrit")) == "0.4.2");
    CHECK(render_version(layout.global_env_packages.at("rigging")) == "2.0.5");

    // symlinks: 12 static entrypoints + biasforge
    CHECK(layout.symlinks.size() == 13);
    CHECK(layout.symlinks.count("biasforge"));
    CHECK_FALSE(layout.symlinks.count("pyrit"));
    CHECK_FALSE(layout.symlinks.count("rigging"));

    // patched content landed in the installed trees
    CHECK(layout.root.at("envs/cyberseceval/security_benchmarks/prompts.py").find("security analyst") !=
          std::string::npos);
    CHECK(layout.root.at("envs/cyberseceval/security_benchmarks/client.py").find("MAX_RETRIES = 3") !=
          std::string::npos);
    CHECK(layout.root.count("envs/garak/garak/custom_client.py"));

    // custom script bytes were materialized
    CHECK(layout.root.at("cli_scripts/biasforge/biasforge") ==
          b.scripts.at("biasforge/biasforge"));

    // declared entrypoint landed where the wrapper points
    CHECK(layout.root.count("envs/giskard/bin/giskard_cli"));
    CHECK(layout.root.at("cli_scripts/giskard/giskard").find("envs/giskard/bin/giskard_cli") !=
          std::string::npos);

    CHECK(verify_layout(layout, b.manifest).ok());
}

TEST_CASE("execution is deterministic across runs") {
    FixtureBundle b = load_bundle();
    auto first = execute(b.plan, b.registry, b.git_store, b.patches, b.scripts);
    auto second = execute(b.plan, b.registry, b.git_store, b.patches, b.scripts);
    CHECK(export_layout(first.second) == export_layout(second.second));

    std::string exported = export_layout(first.second);
    CHECK(exported.rfind("root /opt/iceforge\n", 0) == 0);
    CHECK(exported.find("link bin/garak -> cli_scripts/garak/garak\n") != std::string::npos);
    CHECK(exported.find("pin pyrit==0.4.2\n") != std::string::npos);
}

TEST_CASE("a missing git commit halts execution at that fetch") {
    FixtureBundle b = load_bundle();
    GitStore incomplete = b.git_store;
    incomplete.erase({git_url_hash("https://github.com/zjunlp/easyedit"),
                      "11f3c82617428406cf4affea05069bdd0a4a9815"});

    auto [log, layout] = execute(b.plan, b.registry, incomplete, b.patches, b.scripts);
    CHECK_FALSE(log.all_ok());

    // exactly one FAILED entry, and it is the last one
    int failed = 0;
    for (const ActionEntry& e : log.entries)
        if (!e.ok) ++failed;
    CHECK(failed == 1);
    const ActionEntry& last = log.entries.back();
    CHECK_FALSE(last.ok);
    CHECK(last.kind == StepKind::FETCH_GIT);
    CHECK(last.detail.find("FetchMiss") != std::string::npos);

    // failure isolation: tools later in the plan leave no trace
    CHECK_FALSE(layout.root.count("envs/easyedit/easyedit/__init__.py"));
    CHECK_FALSE(layout.root.count("envs/promptmap/pyvenv.cfg"));
    CHECK(layout.symlinks.empty());
    // tools before the failure are present
    CHECK(layout.root.count("envs/garak/garak/__init__.py"));
}

TEST_CASE("a context mismatch during patching fails that step") {
    FixtureBundle b = load_bundle();
    GitStore tampered = b.git_store;
    FileTree& tree = tampered[{git_url_hash("https://github.com/meta-llama/purplellama"),
                               "59322989dfb97be9d45cae9d40858e194084472e"}];
    tree["security_benchmarks/prompts.py"] =
        "\"\"\"Prompt assembly for the benchmark runs.\"\"\"\n\nDEFAULT_SYSTEM_PROMPT = \"drifted\"\n";

    auto [log, layout] = execute(b.plan, b.registry, tampered, b.patches, b.scripts);
    CHECK_FALSE(log.all_ok());
    const ActionEntry& last = log.entries.back();
    CHECK(last.kind == StepKind::APPLY_PATCHES);
    CHECK(last.detail.find("ContextMismatch") != std::string::npos);
}

TEST_CASE("colliding symlinks fail the second step") {
    BuildPlan plan;
    plan.layout_root = "/opt/iceforge";
    plan.steps.push_back({StepKind::CREATE_SYMLINK, "a",
                          {{"link", "/opt/iceforge/bin/dup"}, {"target", "/opt/iceforge/cli_scripts/a/dup"},
                           {"script", "a/dup"}}});
    plan.steps.push_back({StepKind::CREATE_SYMLINK, "b",
                          {{"link", "/opt/iceforge/bin/dup"}, {"target", "/opt/iceforge/cli_scripts/b/dup"},
                           {"script", "b/dup"}}});
    FileTree scripts{{"a/dup", "#!/bin/sh\n"}, {"b/dup", "#!/bin/sh\n"}};

    auto [log, layout] = execute(plan, RegistryIndex{}, {}, {}, scripts);
    REQUIRE(log.entries.size() == 2);
    CHECK(log.entries[0].ok);
    CHECK_FALSE(log.entries[1].ok);
    CHECK(log.entries[1].detail.find("SymlinkCollision") != std::string::npos);
}

TEST_CASE("verification flags injected layout damage") {
    FixtureBundle b = load_bundle();
    auto [log, layout] = execute(b.plan, b.registry, b.git_store, b.patches, b.scripts);
    REQUIRE(log.all_ok());

    SUBCASE("dangling symlink") {
        Layout broken = layout;
        broken.symlinks["ghostcli"] = "cli_scripts/ghost/ghostcli";
        VerificationReport r = verify_layout(broken, b.manifest);
        REQUIRE(r.violations.size() == 1);
        CHECK(r.violations[0].code == ErrorCode::DanglingSymlink);
        CHECK(r.violations[0].subject == "ghostcli");
    }

    SUBCASE("symlink for a dynamic tool") {
        Layout broken = layout;
        broken.root["cli_scripts/pyrit/pyrit"] = "#!/bin/sh\nexec \"/opt/iceforge/envs/pyrit/bin/pyrit\" \"$@\"\n";
        broken.symlinks["pyrit"] = "cli_scripts/pyrit/pyrit";
        VerificationReport r = verify_layout(broken, b.manifest);
        bool unexpected = false;
        for (const Violation& v : r.violations)
            if (v.code == ErrorCode::UnexpectedSymlink && v.subject == "pyrit") unexpected = true;
        CHECK(unexpected);
    }

    SUBCASE("missing static entrypoint symlink") {
        Layout broken = layout;
        broken.symlinks.erase("garak");
        VerificationReport r = verify_layout(broken, b.manifest);
        REQUIRE(r.violations.size() == 1);
        CHECK(r.violations[0].code == ErrorCode::TargetMissing);
        CHECK(r.violations[0].subject == "garak");
    }

    SUBCASE("wrapper exec target removed") {
        Layout broken = layout;
        broken.root.erase("envs/garak/bin/garak");
        VerificationReport r = verify_layout(broken, b.manifest);
        bool flagged = false;
        for (const Violation& v : r.violations)
            if (v.code == ErrorCode::TargetMissing && v.subject == "cli_scripts/garak/garak") flagged = true;
        CHECK(flagged);
    }

    SUBCASE("tampered global pin") {
        Layout broken = layout;
        broken.global_env_packages["pyrit"] = parse_version("9.9");
        VerificationReport r = verify_layout(broken, b.manifest);
        bool flagged = false;
        for (const Violation& v : r.violations)
            if (v.code == ErrorCode::PinViolation && v.subject == "pyrit") flagged = true;
        CHECK(flagged);
    }
}

TEST_CASE("verification is read-only") {
    FixtureBundle b = load_bundle();
    auto [log, layout] = execute(b.plan, b.registry, b.git_store, b.patches, b.scripts);
    std::string before = export_layout(layout);
    verify_layout(layout, b.manifest);
    CHECK(export_layout(layout) == before);
}

TEST_CASE("the requirements merge feeds the layout pins") {
    Manifest m = parse_manifest(read_file(fixtures("reqs/manifest.toml")));
    RegistryIndex registry = load_registry(fixtures("reqs/registry"));
    BuildPlan plan = plan_build(m, {});
    auto [log, layout] = execute(plan, registry, {}, {});

    REQUIRE(log.all_ok());
    REQUIRE(layout.global_env_packages.size() == 4);
    CHECK(render_version(layout.global_env_packages.at("httpx")) == "0.27.2");
    CHECK(render_version(layout.global_env_packages.at("pydantic")) == "2.6.0");
    CHECK(render_version(layout.global_env_packages.at("pyrit")) == "0.4.2");
    CHECK(render_version(layout.global_env_packages.at("rigging")) == "2.0.5");
    CHECK(verify_layout(layout, m).ok());

    // the check-conflicts path produces the same pins as a lockfile
    MergeResult merged =
        merge_global_requirements(global_requirement_sets(m, registry), registry_available_py(registry));
    REQUIRE(merged.status == MergeResult::Status::OK);
    CHECK(render_lockfile(merged.pins) ==
          "httpx==0.27.2\npydantic==2.6.0\npyrit==0.4.2\nrigging==2.0.5\n");
}

TEST_CASE("an unsatisfiable requirement set fails the requirements step") {
    Manifest m = parse_manifest(read_file(fixtures("conflict/manifest.toml")));
    RegistryIndex registry = load_registry(fixtures("reqs/registry"));
    BuildPlan plan = plan_build(m, {});
    auto [log, layout] = execute(plan, registry, {}, {});

    CHECK_FALSE(log.all_ok());
    const ActionEntry& last = log.entries.back();
    CHECK(last.kind == StepKind::INSTALL_GLOBAL_REQUIREMENTS);
    CHECK(last.detail.find("MergeConflict") != std::string::npos);
    CHECK(last.detail.find("httpx") != std::string::npos);
    CHECK(layout.global_env_packages.count("httpx") == 0);
}

TEST_CASE("registry and git store loaders enforce their formats") {
    RegistryIndex registry = load_registry(fixtures("bundle/registry"));
    const PackageRecord* garak = registry.find("py", "garak", "0.10.2");
    REQUIRE(garak);
    CHECK(garak->files.count("garak/__init__.py"));
    REQUIRE(garak->entrypoints.size() == 1);
    CHECK(garak->entrypoints[0].cli_name == "garak");
    CHECK(registry.find("py", "garak", "9.9") == nullptr);
    CHECK(registry.find("py", "ghost", "1.0") == nullptr);

    // underscore/case variants resolve to the same package
    CHECK(registry.find("py", "GARAK", "0.10.2") == garak);

    CHECK_THROWS_AS(load_registry(fixtures("does-not-exist")), Error);
    CHECK_THROWS_AS(load_git_store(fixtures("does-not-exist")), Error);

    GitStore store = load_git_store(fixtures("bundle/gitstore"));
    CHECK(store.size() == 6);
    auto key = std::make_pair(git_url_hash("https://github.com/utkusen/promptmap"),
                              std::string("bae7506a683423e0de1ea656300422595867836c"));
    REQUIRE(store.count(key));
    CHECK(store.at(key).count("bin/promptmap"));
}
