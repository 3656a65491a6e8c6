#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>

#include "iceforge/patchkit.hpp"
#include "support/oracles.hpp"

using namespace iceforge;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::SyntaxError;
}

const char* kOneLineDiff =
    "--- notes.txt\n"
    "+++ notes.txt\n"
    "@@ -1,3 +1,3 @@\n"
    " first\n"
    "-second\n"
    "+patched\n"
    " third\n";

} // namespace

TEST_CASE("a minimal single-hunk diff parses to matching counts") {
    Patch p = parse_unified_diff(kOneLineDiff);
    REQUIRE(p.file_patches.size() == 1);
    const FilePatch& fp = p.file_patches[0];
    CHECK(fp.old_path == "notes.txt");
    CHECK(fp.new_path == "notes.txt");
    REQUIRE(fp.hunks.size() == 1);
    const Hunk& h = fp.hunks[0];
    CHECK(h.old_len == h.new_len);
    CHECK(h.lines.size() == 4);
}

TEST_CASE("git-style prefixes and timestamps are stripped from headers") {
    Patch p = parse_unified_diff(
        "diff --git a/src/mod.py b/src/mod.py\n"
        "index 000000..111111 100644\n"
        "--- a/src/mod.py\t2024-01-01 10:00:00\n"
        "+++ b/src/mod.py\t2024-01-02 10:00:00\n"
        "@@ -1,1 +1,1 @@\n"
        "-x\n"
        "+y\n");
    CHECK(p.file_patches[0].old_path == "src/mod.py");
    CHECK(p.file_patches[0].new_path == "src/mod.py");
}

TEST_CASE("multi-file diffs keep textual order") {
    // frozen expectation cross-checked against GNU diff output for the same trees
    Patch p = parse_unified_diff(
        "--- b.txt\n"
        "+++ b.txt\n"
        "@@ -1,1 +1,1 @@\n"
        "-old b\n"
        "+new b\n"
        "--- a.txt\n"
        "+++ a.txt\n"
        "@@ -1,1 +1,2 @@\n"
        " keep\n"
        "+added\n");
    REQUIRE(p.file_patches.size() == 2);
    CHECK(p.file_patches[0].old_path == "b.txt");
    CHECK(p.file_patches[1].old_path == "a.txt");
    CHECK(p.file_patches[1].hunks[0].new_len == 2);
}

TEST_CASE("malformed diffs report the offending line") {
    CHECK(code_of([] { parse_unified_diff("not a diff at all\n"); }) == ErrorCode::MalformedDiff);
    CHECK(code_of([] { parse_unified_diff("--- a.txt\nno plus header\n"); }) == ErrorCode::MalformedDiff);
    CHECK(code_of([] {
        parse_unified_diff("--- a.txt\n+++ a.txt\n@@ bogus @@\n");
    }) == ErrorCode::MalformedDiff);
    CHECK(code_of([] { parse_unified_diff("--- a.txt\n+++ a.txt\n"); }) == ErrorCode::MalformedDiff);

    try {
        parse_unified_diff("--- a.txt\n+++ a.txt\n@@ broken\n");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("count mismatches are their own failure") {
    // header promises two old lines, body provides one
    CHECK(code_of([] {
        parse_unified_diff("--- a.txt\n+++ a.txt\n@@ -1,2 +1,2 @@\n x\n");
    }) == ErrorCode::HunkCountMismatch);
    // body runs past the declared counts
    CHECK(code_of([] {
        parse_unified_diff("--- a.txt\n+++ a.txt\n@@ -1,1 +1,1 @@\n x\n x\n");
    }) == ErrorCode::HunkCountMismatch);
}

TEST_CASE("an empty patch leaves the tree unchanged") {
    FileTree tree{{"a.txt", "alpha\n"}};
    CHECK(apply_patch(tree, Patch{}) == tree);
}

TEST_CASE("a one-line replacement rewrites exactly that line") {
    FileTree tree{{"notes.txt", "first\nsecond\nthird\n"}};
    FileTree out = apply_patch(tree, parse_unified_diff(kOneLineDiff));
    CHECK(out.at("notes.txt") == "first\npatched\nthird\n");
    CHECK(tree.at("notes.txt") == "first\nsecond\nthird\n"); // input untouched
}

TEST_CASE("apply faults cleanly") {
    FileTree tree{{"other.txt", "x\n"}};
    CHECK(code_of([&] { apply_patch(tree, parse_unified_diff(kOneLineDiff)); }) ==
          ErrorCode::TargetMissing);

    FileTree drifted{{"notes.txt", "first\nsecondX\nthird\n"}};
    try {
        apply_patch(drifted, parse_unified_diff(kOneLineDiff));
        FAIL("expected ContextMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ContextMismatch);
        std::string msg = e.what();
        CHECK(msg.find("notes.txt") != std::string::npos);
        CHECK(msg.find("hunk 1") != std::string::npos);
        CHECK(msg.find("line 2") != std::string::npos);
    }
}

TEST_CASE("dev/null paths create and delete files") {
    Patch create = parse_unified_diff(
        "--- /dev/null\n"
        "+++ fresh.txt\n"
        "@@ -0,0 +1,2 @@\n"
        "+hello\n"
        "+world\n");
    FileTree out = apply_patch({}, create);
    CHECK(out.at("fresh.txt") == "hello\nworld\n");
    CHECK(code_of([&] { apply_patch(out, create); }) == ErrorCode::ContextMismatch);

    Patch remove = parse_unified_diff(
        "--- fresh.txt\n"
        "+++ /dev/null\n"
        "@@ -1,2 +0,0 @@\n"
        "-hello\n"
        "-world\n");
    CHECK(apply_patch(out, remove).count("fresh.txt") == 0);
}

TEST_CASE("carriage returns inside lines survive application") {
    FileTree tree{{"dos.txt", "one\r\ntwo\r\nthree\r\n"}};
    Patch p = parse_unified_diff(
        "--- dos.txt\n"
        "+++ dos.txt\n"
        "@@ -1,3 +1,3 @@\n"
        " one\r\n"
        "-two\r\n"
        "+TWO\r\n"
        " three\r\n");
    CHECK(apply_patch(tree, p).at("dos.txt") == "one\r\nTWO\r\nthree\r\n");
}

TEST_CASE("missing end-of-file newlines are honoured both ways") {
    Patch p = parse_unified_diff(
        "--- t.txt\n"
        "+++ t.txt\n"
        "@@ -1,2 +1,2 @@\n"
        " a\n"
        "-b\n"
        "\\ No newline at end of file\n"
        "+B\n"
        "\\ No newline at end of file\n");
    FileTree tree{{"t.txt", "a\nb"}};
    CHECK(apply_patch(tree, p).at("t.txt") == "a\nB");

    // the same patch against a newline-terminated file is a context mismatch
    FileTree terminated{{"t.txt", "a\nb\n"}};
    CHECK(code_of([&] { apply_patch(terminated, p); }) == ErrorCode::ContextMismatch);

    // adding the trailing newline is expressible too
    Patch fix = parse_unified_diff(
        "--- t.txt\n"
        "+++ t.txt\n"
        "@@ -1,2 +1,2 @@\n"
        " a\n"
        "-b\n"
        "\\ No newline at end of file\n"
        "+b\n");
    CHECK(apply_patch(tree, fix).at("t.txt") == "a\nb\n");
}

TEST_CASE("patch sets apply overlays before diffs") {
    PatchSet ps;
    ps.tool = "demo";
    ps.overlays = {{"pkg/new_module.py", "print('hi')\n"}, {"pkg/data.txt", "fresh\n"}};
    ps.diffs = {{"01-edit.diff", parse_unified_diff("--- pkg/data.txt\n"
                                                    "+++ pkg/data.txt\n"
                                                    "@@ -1,1 +1,1 @@\n"
                                                    "-fresh\n"
                                                    "+patched overlay file\n")}};
    FileTree tree{{"pkg/existing.py", "pass\n"}};
    FileTree out = apply_patchset(tree, ps);
    CHECK(out.at("pkg/new_module.py") == "print('hi')\n");
    CHECK(out.at("pkg/data.txt") == "patched overlay file\n"); // diff saw the overlay
    CHECK(out.at("pkg/existing.py") == "pass\n");

    CHECK(apply_patchset(tree, PatchSet{}) == tree);
}

TEST_CASE("dependent diffs only apply in lexicographic order") {
    Patch first = parse_unified_diff(
        "--- conf.txt\n+++ conf.txt\n@@ -1,1 +1,1 @@\n-stage0\n+stage1\n");
    Patch second = parse_unified_diff(
        "--- conf.txt\n+++ conf.txt\n@@ -1,1 +1,1 @@\n-stage1\n+stage2\n");

    FileTree tree{{"conf.txt", "stage0\n"}};
    PatchSet ordered;
    ordered.diffs = {{"01.diff", first}, {"02.diff", second}};
    CHECK(apply_patchset(tree, ordered).at("conf.txt") == "stage2\n");

    PatchSet reversed;
    reversed.diffs = {{"01.diff", second}, {"02.diff", first}};
    CHECK(code_of([&] { apply_patchset(tree, reversed); }) == ErrorCode::ContextMismatch);
}

TEST_CASE("collect_patches mirrors the on-disk convention") {
    FileTree root{
        {"cybersec/02-client.diff", "--- f\n+++ f\n@@ -1,1 +1,1 @@\n-a\n+b\n"},
        {"cybersec/01-sysprompt.diff", "--- g\n+++ g\n@@ -1,1 +1,1 @@\n-c\n+d\n"},
        {"cybersec/README", "not a diff\n"},
        {"garak/overlay/garak/custom_client.mod", "module contents\n"},
    };

    PatchSet none = collect_patches(root, "evalharness");
    CHECK(none.empty());

    PatchSet cybersec = collect_patches(root, "cybersec");
    REQUIRE(cybersec.diffs.size() == 2);
    CHECK(cybersec.diffs[0].first == "01-sysprompt.diff");
    CHECK(cybersec.diffs[1].first == "02-client.diff");
    CHECK(cybersec.overlays.empty());

    PatchSet garak = collect_patches(root, "garak");
    REQUIRE(garak.overlays.size() == 1);
    CHECK(garak.overlays[0].first == "garak/custom_client.mod");
    CHECK(garak.diffs.empty());
}

TEST_CASE("round-trip: generated diffs reproduce the edited tree byte-exactly") {
    oracle::Rng rng(20240601);
    int applied = 0;
    for (int iter = 0; iter < 60; ++iter) {
        std::vector<std::string> before = oracle::random_lines(rng, 5, 25);
        std::vector<std::string> after = oracle::random_edit(rng, before, rng.range(1, 3));
        std::string diff = oracle::make_unified_diff("file.txt", before, after);
        if (diff.empty()) continue;

        FileTree tree{{"file.txt", detail::join_lines(before, true)}};
        Patch p = parse_unified_diff(diff);
        FileTree out = apply_patch(tree, p);
        CHECK(out.at("file.txt") == detail::join_lines(after, true));

        // applying the inverse restores the original bytes
        FileTree back = apply_patch(out, oracle::invert(p));
        CHECK(back == tree);
        ++applied;
    }
    CHECK(applied >= 50);
}

TEST_CASE("any single-character perturbation of a context line is caught") {
    oracle::Rng rng(555);
    int perturbed = 0;
    for (int iter = 0; iter < 25; ++iter) {
        std::vector<std::string> before = oracle::random_lines(rng, 6, 20);
        std::vector<std::string> after = oracle::random_edit(rng, before, 2);
        std::string diff = oracle::make_unified_diff("file.txt", before, after);
        if (diff.empty()) continue;
        Patch p = parse_unified_diff(diff);

        for (const Hunk& h : p.file_patches[0].hunks) {
            long old_line = h.old_start;
            for (const HunkLine& hl : h.lines) {
                if (hl.tag == LineTag::Add) continue;
                std::size_t idx = static_cast<std::size_t>(old_line - 1);
                if (!hl.text.empty()) {
                    std::vector<std::string> mutated = before;
                    char& c = mutated[idx][0];
                    c = c == 'z' ? 'a' : 'z';
                    FileTree bad{{"file.txt", detail::join_lines(mutated, true)}};
                    CHECK(code_of([&] { apply_patch(bad, p); }) == ErrorCode::ContextMismatch);
                    ++perturbed;
                }
                ++old_line;
            }
        }
    }
    CHECK(perturbed >= 100);
}
