#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "iceforge/errors.hpp"

namespace iceforge {

/// Virtual file tree: relative '/'-separated path -> file bytes.
/// std::map keeps iteration order deterministic (lexicographic by path).
using FileTree = std::map<std::string, std::string>;

inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string fnv1a64_hex(std::string_view data) {
    static const char* digits = "0123456789abcdef";
    std::uint64_t h = fnv1a64(data);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

/// True when `path` equals `prefix` or lies under `prefix` + '/'.
inline bool path_under(std::string_view path, std::string_view prefix) {
    if (prefix.empty()) return true;
    if (path.size() < prefix.size() || path.substr(0, prefix.size()) != prefix) return false;
    return path.size() == prefix.size() || path[prefix.size()] == '/';
}

/// All entries of `tree` under `prefix`, re-rooted (prefix stripped).
inline FileTree subtree(const FileTree& tree, const std::string& prefix) {
    FileTree out;
    for (const auto& [path, bytes] : tree) {
        if (path_under(path, prefix) && path.size() > prefix.size())
            out.emplace(path.substr(prefix.size() + 1), bytes);
    }
    return out;
}

/// Copy every entry of `src` into `dst` below `prefix` (overwrites).
inline void insert_subtree(FileTree& dst, const std::string& prefix, const FileTree& src) {
    for (const auto& [path, bytes] : src)
        dst[prefix.empty() ? path : prefix + "/" + path] = bytes;
}

inline void erase_subtree(FileTree& tree, const std::string& prefix) {
    for (auto it = tree.begin(); it != tree.end();) {
        if (path_under(it->first, prefix))
            it = tree.erase(it);
        else
            ++it;
    }
}

/// Load a directory from disk into a FileTree. Throws UnreadableTree when the
/// root is missing or not a directory. Symlinks are followed; only regular
/// files are recorded.
inline FileTree load_tree(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(root, ec))
        throw Error(ErrorCode::UnreadableTree, "not a readable directory: " + root.string());

    FileTree tree;
    try {
        for (const fs::directory_entry& entry : fs::recursive_directory_iterator(root)) {
            if (!entry.is_regular_file()) continue;
            std::ifstream in(entry.path(), std::ios::binary);
            if (!in) throw Error(ErrorCode::UnreadableTree, "cannot read " + entry.path().string());
            std::ostringstream buf;
            buf << in.rdbuf();
            tree.emplace(fs::relative(entry.path(), root).generic_string(), buf.str());
        }
    } catch (const fs::filesystem_error& e) {
        throw Error(ErrorCode::UnreadableTree, "cannot walk " + root.string() + ": " + e.what());
    }
    return tree;
}

/// Materialize a FileTree on disk under `root`, creating directories as needed.
inline void write_tree(const std::filesystem::path& root, const FileTree& tree) {
    namespace fs = std::filesystem;
    for (const auto& [path, bytes] : tree) {
        fs::path dst = root / fs::path(path);
        fs::create_directories(dst.parent_path());
        std::ofstream out(dst, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::UnreadableTree, "cannot write " + dst.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
}

} // namespace iceforge
