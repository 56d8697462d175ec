#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ablate/core.hpp"

namespace ablate::test {

namespace fs = std::filesystem;

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "ablate") {
        static std::atomic<unsigned> counter{0};
        const auto base = fs::temp_directory_path();
        path_ = base / (tag + "-" + std::to_string(::getpid()) + "-" +
                        std::to_string(counter.fetch_add(1)));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

inline void write_file(const fs::path& file, const std::string& content) {
    fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    out << content;
}

inline std::string read_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// n components, toggle-only, one arm per component.
inline ComponentSpace toggle_space(int n, double baseline = 1.0) {
    ComponentSpace space;
    space.baseline_score = baseline;
    space.primary_metric = "score";
    for (int i = 0; i < n; ++i) {
        Component c;
        c.id = "c" + std::to_string(i + 1);
        c.name = c.id;
        c.arm_id = "arm" + std::to_string(i + 1);
        c.allowed_mutations = {MutationDecl{MutationOp::Toggle, {}, {}, "", {}}};
        space.components.push_back(c);
        space.arms.push_back({c.arm_id, 1.0});
    }
    return space;
}

inline MutationDecl toggle_decl() { return MutationDecl{MutationOp::Toggle, {}, {}, "", {}}; }

inline MutationDecl scale_decl(std::vector<double> factors) {
    return MutationDecl{MutationOp::Scale, std::move(factors), {}, "", {}};
}

inline MutationDecl replace_decl(std::vector<std::string> alternatives) {
    return MutationDecl{MutationOp::Replace, {}, std::move(alternatives), "", {}};
}

inline MutationDecl grid_decl(std::string key, std::vector<std::string> values) {
    return MutationDecl{MutationOp::ParamGrid, {}, {}, std::move(key), std::move(values)};
}

}  // namespace ablate::test
