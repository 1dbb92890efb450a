#pragma once

#include "qsc/pointcloud.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace qsc::test {

inline PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> coord(lo, hi);
    std::vector<Point3> pts(n);
    for (auto& p : pts)
        p = {coord(rng), coord(rng), coord(rng)};
    return PointCloud(std::move(pts));
}

/// Cloud whose coordinates are exactly representable as 32-bit floats.
inline PointCloud random_f32_cloud(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<float> coord(-1.0f, 1.0f);
    std::vector<Point3> pts(n);
    for (auto& p : pts)
        p = {coord(rng), coord(rng), coord(rng)};
    return PointCloud(std::move(pts));
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("qsc_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace qsc::test
