#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>

// Scratch directory removed on scope exit.  Names are process-unique so tests
// can run in parallel without clashing.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        const int n = counter.fetch_add(1);
        path = std::filesystem::temp_directory_path() /
               ("aftermath-" + tag + "-" + std::to_string(::getpid()) + "-" +
                std::to_string(n));
        std::filesystem::create_directories(path);
    }

    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }

    std::filesystem::path operator/(const std::string& rel) const { return path / rel; }
    std::string str() const { return path.string(); }
};

inline std::filesystem::path source_path(const std::string& rel) {
    return std::filesystem::path(AFTERMATH_SOURCE_DIR) / rel;
}
