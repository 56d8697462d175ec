#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <system_error>
#include <vector>

#include "ablate/errors.hpp"

namespace ablate {

// A patch could not be applied to the workspace (anchor or key not found,
// missing file, conflicting edit). The orchestrator marks the candidate
// failed with the mapping-failure category.
class PatchError : public Error {
public:
    explicit PatchError(const std::string& msg) : Error(msg) {}
};

struct ManifestEntry {
    std::string path;  // relative, '/' separated
    std::string digest;
    std::uint64_t size = 0;
};

// Immutable, content-addressed capture of a base directory tree.
struct BaseSnapshot {
    std::string snapshot_id;
    std::vector<ManifestEntry> root_manifest;  // sorted by path
};

enum class WorkspaceState { Created, Mutated, Executed, Harvested, Destroyed };

std::string to_string(WorkspaceState state);

struct Workspace {
    std::string workspace_id;
    std::string candidate_id;
    std::filesystem::path path;
    WorkspaceState state = WorkspaceState::Created;
    std::string applied_patch;  // unified diff against the snapshot
};

// One declarative edit. set_key rewrites the value of a `key = value` /
// `key: value` line; with `scale` set, the current numeric value is
// multiplied instead of replaced. replace_anchored substitutes the first
// occurrence of the anchor text. delete_lines removes every line containing
// the anchor.
struct PatchOp {
    enum class Kind { SetKey, ReplaceAnchored, DeleteLines };
    Kind kind = Kind::SetKey;
    std::string file;
    std::string key;
    std::string value;
    std::optional<double> scale;
    std::string anchor;
    std::string replacement;
};

struct Patch {
    std::vector<PatchOp> ops;
};

struct HarvestResult {
    std::vector<std::string> artifacts;  // relative paths copied into the archive
    std::vector<std::string> missing_globs;
};

std::string file_digest(const std::filesystem::path& file);
std::vector<ManifestEntry> digest_tree(const std::filesystem::path& dir);
std::string manifest_id(const std::vector<ManifestEntry>& manifest);

// Zero-context unified diff between two line vectors.
std::string unified_diff(const std::string& path, const std::vector<std::string>& before,
                         const std::vector<std::string>& after);

// Simple glob: '*' matches within a path segment, '**' crosses segments,
// '?' matches one character.
bool glob_match(const std::string& pattern, const std::string& path);

// Owns the snapshot store (<root>/snapshots/<id>/{manifest,tree/}) and the
// workspace area (<root>/workspaces/). Safe to use from several threads as
// long as any single workspace is driven by one thread at a time.
class WorkspaceManager {
public:
    explicit WorkspaceManager(std::filesystem::path root);

    // Records a content-addressed snapshot of base_dir; the base tree is
    // never modified. Re-snapshotting an unchanged tree is a no-op returning
    // the same id.
    BaseSnapshot snapshot(const std::filesystem::path& base_dir);

    // Materializes an independent working copy of the snapshot.
    Workspace create_workspace(const BaseSnapshot& snapshot, const std::string& candidate_id);

    // Applies all ops atomically: any failure leaves the workspace
    // bit-identical to the snapshot and the state unchanged.
    void apply_mutation(Workspace& ws, const Patch& patch);

    // Used by executors once the candidate has run in the workspace.
    void mark_executed(Workspace& ws);

    // Copies the recorded diff, artifact-glob matches, and workspace logs
    // into archive_dir ({diff.patch, artifacts/, logs/}).
    HarvestResult harvest(Workspace& ws, const std::filesystem::path& archive_dir,
                          const std::vector<std::string>& artifact_globs);

    // Removes the workspace directory. Idempotent; filesystem errors are
    // returned but the workspace is still considered destroyed.
    std::error_code destroy(Workspace& ws);

    std::filesystem::path snapshot_tree(const std::string& snapshot_id) const;
    std::vector<std::string> take_warnings();

    // Test seam: replaces the recursive-remove implementation.
    using RemoveFn = std::function<std::uintmax_t(const std::filesystem::path&, std::error_code&)>;
    void set_remove_hook(RemoveFn fn) { remove_fn_ = std::move(fn); }

private:
    void add_warning(std::string msg);

    std::filesystem::path root_;
    std::mutex mutex_;
    std::set<std::string> live_paths_;
    std::vector<std::string> warnings_;
    RemoveFn remove_fn_;
};

}  // namespace ablate
