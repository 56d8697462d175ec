#include "ablate/workspace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "ablate/hash.hpp"

namespace fs = std::filesystem;

namespace ablate {

namespace {

std::string read_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("cannot read file: " + file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& file, const std::string& content) {
    fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write file: " + file.string());
    out << content;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string current;
    for (char c : text) {
        if (c == '\n') {
            lines.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) lines.push_back(current);
    return lines;
}

std::string join_lines(const std::vector<std::string>& lines, bool trailing_newline) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        out += lines[i];
        if (i + 1 < lines.size() || trailing_newline) out += '\n';
    }
    return out;
}

// Numeric rendering for scaled config values: integers stay integers.
std::string format_scaled(double v) {
    char buf[40];
    if (std::isfinite(v) && std::floor(v) == v && std::abs(v) < 1e15)
        std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
    else
        std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

bool is_space(char c) { return c == ' ' || c == '\t'; }

// Rewrites `key = value` / `key: value` preserving indentation, separator
// and any trailing comment-free suffix structure.
std::optional<std::string> rewrite_key_line(const std::string& line, const std::string& key,
                                            const std::optional<double>& scale,
                                            const std::string& value, std::string* error) {
    std::size_t i = 0;
    while (i < line.size() && is_space(line[i])) ++i;
    if (line.compare(i, key.size(), key) != 0) return std::nullopt;
    std::size_t after_key = i + key.size();
    std::size_t j = after_key;
    while (j < line.size() && is_space(line[j])) ++j;
    if (j >= line.size() || (line[j] != '=' && line[j] != ':')) return std::nullopt;
    ++j;
    while (j < line.size() && is_space(line[j])) ++j;

    std::string new_value = value;
    if (scale.has_value()) {
        const std::string old_value = line.substr(j);
        char* end = nullptr;
        const double current = std::strtod(old_value.c_str(), &end);
        if (end == old_value.c_str()) {
            if (error != nullptr)
                *error = "set_key: value of '" + key + "' is not numeric: '" + old_value + "'";
            return std::nullopt;
        }
        new_value = format_scaled(current * *scale);
    }
    return line.substr(0, j) + new_value;
}

}  // namespace

std::string to_string(WorkspaceState state) {
    switch (state) {
        case WorkspaceState::Created: return "created";
        case WorkspaceState::Mutated: return "mutated";
        case WorkspaceState::Executed: return "executed";
        case WorkspaceState::Harvested: return "harvested";
        case WorkspaceState::Destroyed: return "destroyed";
    }
    return "unknown";
}

std::string file_digest(const fs::path& file) { return content_hash(read_file(file)); }

std::vector<ManifestEntry> digest_tree(const fs::path& dir) {
    if (!fs::exists(dir) || !fs::is_directory(dir))
        throw Error("digest_tree: not a readable directory: " + dir.string());
    std::vector<ManifestEntry> entries;
    for (const auto& item : fs::recursive_directory_iterator(dir)) {
        if (!item.is_regular_file()) continue;
        const std::string content = read_file(item.path());
        ManifestEntry entry;
        entry.path = fs::relative(item.path(), dir).generic_string();
        entry.digest = content_hash(content);
        entry.size = content.size();
        entries.push_back(std::move(entry));
    }
    std::sort(entries.begin(), entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
    return entries;
}

std::string manifest_id(const std::vector<ManifestEntry>& manifest) {
    std::ostringstream data;
    for (const auto& e : manifest) data << e.path << '\t' << e.digest << '\t' << e.size << '\n';
    return content_hash(data.str());
}

std::string unified_diff(const std::string& path, const std::vector<std::string>& before,
                         const std::vector<std::string>& after) {
    const std::size_t n = before.size();
    const std::size_t m = after.size();

    // LCS table; workspace files are small configuration/source files.
    std::vector<std::vector<std::uint32_t>> lcs(n + 1, std::vector<std::uint32_t>(m + 1, 0));
    for (std::size_t i = n; i-- > 0;)
        for (std::size_t j = m; j-- > 0;)
            lcs[i][j] = before[i] == after[j] ? lcs[i + 1][j + 1] + 1
                                              : std::max(lcs[i + 1][j], lcs[i][j + 1]);

    struct Edit {
        char tag;  // '-' or '+'
        std::size_t old_line;
        std::size_t new_line;
        const std::string* text;
    };
    std::vector<Edit> edits;
    std::size_t i = 0, j = 0;
    while (i < n || j < m) {
        if (i < n && j < m && before[i] == after[j]) {
            ++i;
            ++j;
        } else if (j < m && (i == n || lcs[i][j + 1] >= lcs[i + 1][j])) {
            edits.push_back({'+', i, j, &after[j]});
            ++j;
        } else {
            edits.push_back({'-', i, j, &before[i]});
            ++i;
        }
    }
    if (edits.empty()) return "";

    std::ostringstream out;
    out << "--- a/" << path << "\n+++ b/" << path << "\n";
    std::size_t k = 0;
    while (k < edits.size()) {
        // One hunk per contiguous run of edits.
        std::size_t end = k + 1;
        while (end < edits.size() && edits[end].old_line <= edits[end - 1].old_line + 1 &&
               edits[end].new_line <= edits[end - 1].new_line + 1)
            ++end;
        std::size_t del = 0, ins = 0;
        for (std::size_t e = k; e < end; ++e) (edits[e].tag == '-' ? del : ins) += 1;
        const std::size_t old_start = edits[k].old_line + (del > 0 ? 1 : 0);
        const std::size_t new_start = edits[k].new_line + (ins > 0 ? 1 : 0);
        out << "@@ -" << old_start << "," << del << " +" << new_start << "," << ins << " @@\n";
        for (std::size_t e = k; e < end; ++e)
            if (edits[e].tag == '-') out << "-" << *edits[e].text << "\n";
        for (std::size_t e = k; e < end; ++e)
            if (edits[e].tag == '+') out << "+" << *edits[e].text << "\n";
        k = end;
    }
    return out.str();
}

bool glob_match(const std::string& pattern, const std::string& path) {
    // Recursive matcher over the pattern; '**' may cross '/' boundaries.
    std::function<bool(std::size_t, std::size_t)> match = [&](std::size_t p, std::size_t s) {
        while (p < pattern.size()) {
            if (pattern[p] == '*') {
                const bool cross = p + 1 < pattern.size() && pattern[p + 1] == '*';
                const std::size_t next = p + (cross ? 2 : 1);
                for (std::size_t skip = s; skip <= path.size(); ++skip) {
                    if (match(next, skip)) return true;
                    if (skip < path.size() && !cross && path[skip] == '/') break;
                }
                return false;
            }
            if (s >= path.size()) return false;
            if (pattern[p] == '?') {
                if (path[s] == '/') return false;
            } else if (pattern[p] != path[s]) {
                return false;
            }
            ++p;
            ++s;
        }
        return s == path.size();
    };
    return match(0, 0);
}

WorkspaceManager::WorkspaceManager(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_ / "snapshots");
    fs::create_directories(root_ / "workspaces");
    remove_fn_ = [](const fs::path& p, std::error_code& ec) { return fs::remove_all(p, ec); };
}

fs::path WorkspaceManager::snapshot_tree(const std::string& snapshot_id) const {
    return root_ / "snapshots" / snapshot_id / "tree";
}

void WorkspaceManager::add_warning(std::string msg) {
    std::lock_guard<std::mutex> lock(mutex_);
    warnings_.push_back(std::move(msg));
}

std::vector<std::string> WorkspaceManager::take_warnings() {
    std::lock_guard<std::mutex> lock(mutex_);
    return std::exchange(warnings_, {});
}

BaseSnapshot WorkspaceManager::snapshot(const fs::path& base_dir) {
    if (!fs::exists(base_dir) || !fs::is_directory(base_dir))
        throw Error("snapshot: not a readable directory: " + base_dir.string());

    BaseSnapshot snap;
    snap.root_manifest = digest_tree(base_dir);
    snap.snapshot_id = manifest_id(snap.root_manifest);
    if (snap.root_manifest.empty())
        add_warning("snapshot of empty directory: " + base_dir.string());

    const fs::path store = root_ / "snapshots" / snap.snapshot_id;
    if (fs::exists(store / "manifest")) return snap;  // already recorded

    const fs::path tree = store / "tree";
    fs::create_directories(tree);
    for (const auto& entry : snap.root_manifest) {
        const fs::path dst = tree / entry.path;
        fs::create_directories(dst.parent_path());
        fs::copy_file(base_dir / entry.path, dst, fs::copy_options::overwrite_existing);
    }
    std::ostringstream manifest;
    for (const auto& e : snap.root_manifest)
        manifest << e.path << '\t' << e.digest << '\t' << e.size << '\n';
    write_file(store / "manifest", manifest.str());
    return snap;
}

Workspace WorkspaceManager::create_workspace(const BaseSnapshot& snapshot,
                                             const std::string& candidate_id) {
    const fs::path tree = snapshot_tree(snapshot.snapshot_id);
    if (!fs::exists(tree) && !snapshot.root_manifest.empty())
        throw Error("create_workspace: snapshot tree missing for " + snapshot.snapshot_id);

    Workspace ws;
    ws.candidate_id = candidate_id;
    {
        // Ids derive from the candidate so run logs do not depend on
        // creation order; suffixes only appear when a candidate id is
        // reused.
        std::lock_guard<std::mutex> lock(mutex_);
        for (std::uint64_t n = 1;; ++n) {
            ws.workspace_id =
                n == 1 ? candidate_id : candidate_id + "-" + std::to_string(n);
            ws.path = root_ / "workspaces" / ws.workspace_id;
            if (!live_paths_.count(ws.path.string()) && !fs::exists(ws.path)) break;
            if (n > 1000000)
                throw Error("create_workspace: path collision at " + ws.path.string());
        }
        live_paths_.insert(ws.path.string());
    }
    fs::create_directories(ws.path);
    for (const auto& entry : snapshot.root_manifest) {
        const fs::path dst = ws.path / entry.path;
        fs::create_directories(dst.parent_path());
        fs::copy_file(tree / entry.path, dst, fs::copy_options::overwrite_existing);
    }
    ws.state = WorkspaceState::Created;
    return ws;
}

void WorkspaceManager::apply_mutation(Workspace& ws, const Patch& patch) {
    if (ws.state != WorkspaceState::Created)
        throw StateError("apply_mutation: workspace is " + to_string(ws.state) + ", expected created");

    // Stage every edit in memory first; nothing is written unless all ops
    // succeed, so a failed patch leaves the workspace digest-equal to the
    // snapshot.
    std::map<std::string, std::vector<std::string>> staged;
    std::map<std::string, std::vector<std::string>> originals;
    std::map<std::string, bool> trailing_newline;

    auto load = [&](const std::string& rel) -> std::vector<std::string>& {
        auto it = staged.find(rel);
        if (it != staged.end()) return it->second;
        const fs::path full = ws.path / rel;
        if (!fs::exists(full)) throw PatchError("patch targets missing file: " + rel);
        const std::string content = read_file(full);
        trailing_newline[rel] = content.empty() || content.back() == '\n';
        auto lines = split_lines(content);
        originals[rel] = lines;
        return staged.emplace(rel, std::move(lines)).first->second;
    };

    for (const auto& op : patch.ops) {
        auto& lines = load(op.file);
        switch (op.kind) {
            case PatchOp::Kind::SetKey: {
                bool done = false;
                std::string error;
                for (auto& line : lines) {
                    auto rewritten = rewrite_key_line(line, op.key, op.scale, op.value, &error);
                    if (rewritten.has_value()) {
                        line = *rewritten;
                        done = true;
                        break;
                    }
                    if (!error.empty()) throw PatchError(error + " in " + op.file);
                }
                if (!done)
                    throw PatchError("set_key: key '" + op.key + "' not found in " + op.file);
                break;
            }
            case PatchOp::Kind::ReplaceAnchored: {
                bool done = false;
                for (auto& line : lines) {
                    const std::size_t pos = line.find(op.anchor);
                    if (pos == std::string::npos) continue;
                    line = line.substr(0, pos) + op.replacement + line.substr(pos + op.anchor.size());
                    done = true;
                    break;
                }
                if (!done)
                    throw PatchError("replace_anchored: anchor '" + op.anchor + "' not found in " +
                                     op.file);
                break;
            }
            case PatchOp::Kind::DeleteLines: {
                const std::size_t before = lines.size();
                lines.erase(std::remove_if(lines.begin(), lines.end(),
                                           [&](const std::string& line) {
                                               return line.find(op.anchor) != std::string::npos;
                                           }),
                            lines.end());
                if (lines.size() == before)
                    throw PatchError("delete_lines: anchor '" + op.anchor + "' not found in " +
                                     op.file);
                break;
            }
        }
    }

    std::string diff;
    for (const auto& [rel, lines] : staged) {
        diff += unified_diff(rel, originals[rel], lines);
        write_file(ws.path / rel, join_lines(lines, trailing_newline[rel]));
    }
    ws.applied_patch = diff;
    ws.state = WorkspaceState::Mutated;
}

void WorkspaceManager::mark_executed(Workspace& ws) {
    if (ws.state != WorkspaceState::Mutated)
        throw StateError("mark_executed: workspace is " + to_string(ws.state) + ", expected mutated");
    ws.state = WorkspaceState::Executed;
}

HarvestResult WorkspaceManager::harvest(Workspace& ws, const fs::path& archive_dir,
                                        const std::vector<std::string>& artifact_globs) {
    if (ws.state != WorkspaceState::Executed)
        throw StateError("harvest: workspace is " + to_string(ws.state) + ", expected executed");

    HarvestResult result;
    fs::create_directories(archive_dir);
    write_file(archive_dir / "diff.patch", ws.applied_patch);

    const auto manifest = digest_tree(ws.path);
    for (const auto& pattern : artifact_globs) {
        bool matched = false;
        for (const auto& entry : manifest) {
            if (entry.path.rfind("ablate_logs/", 0) == 0) continue;
            if (!glob_match(pattern, entry.path)) continue;
            const fs::path dst = archive_dir / "artifacts" / entry.path;
            fs::create_directories(dst.parent_path());
            fs::copy_file(ws.path / entry.path, dst, fs::copy_options::overwrite_existing);
            result.artifacts.push_back(entry.path);
            matched = true;
        }
        if (!matched) {
            result.missing_globs.push_back(pattern);
            add_warning("harvest: no artifact matched '" + pattern + "' for " + ws.workspace_id);
        }
    }

    const fs::path logs = ws.path / "ablate_logs";
    if (fs::exists(logs)) {
        for (const auto& item : fs::recursive_directory_iterator(logs)) {
            if (!item.is_regular_file()) continue;
            const fs::path rel = fs::relative(item.path(), logs);
            const fs::path dst = archive_dir / "logs" / rel;
            fs::create_directories(dst.parent_path());
            fs::copy_file(item.path(), dst, fs::copy_options::overwrite_existing);
        }
    }
    ws.state = WorkspaceState::Harvested;
    return result;
}

std::error_code WorkspaceManager::destroy(Workspace& ws) {
    if (ws.state == WorkspaceState::Destroyed) return {};
    std::error_code ec;
    remove_fn_(ws.path, ec);
    if (ec) add_warning("destroy: " + ws.path.string() + ": " + ec.message());
    {
        std::lock_guard<std::mutex> lock(mutex_);
        live_paths_.erase(ws.path.string());
    }
    ws.state = WorkspaceState::Destroyed;
    return ec;
}

}  // namespace ablate
