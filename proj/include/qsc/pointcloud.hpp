#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace qsc {

using Point3 = std::array<double, 3>;

/// Ordered set of N >= 1 finite 3D points. Immutable after construction.
class PointCloud {
public:
    /// Throws ValidationError when empty or when any coordinate is NaN/Inf.
    explicit PointCloud(std::vector<Point3> points);

    std::size_t size() const noexcept { return points_.size(); }
    const Point3& operator[](std::size_t i) const { return points_[i]; }
    std::span<const Point3> points() const noexcept { return points_; }

    friend bool operator==(const PointCloud&, const PointCloud&) = default;

private:
    std::vector<Point3> points_;
};

enum class CloudFormat { XyzText, F32Binary };

/// Picks the on-disk format from the extension: ".xyz"/".txt" are text,
/// ".bin"/".f32" are binary. Throws ArgumentError otherwise.
CloudFormat format_from_extension(const std::filesystem::path& path);

PointCloud load_pointcloud(const std::filesystem::path& path, CloudFormat format);
void save_pointcloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);

/// Neighbour lists sorted by ascending squared distance, ties by ascending index.
struct KnnGraph {
    std::size_t k = 0;
    std::vector<std::vector<std::size_t>> adjacency;
};

inline constexpr std::size_t kDefaultNeighbors = 20;

/// Brute-force kNN. Requires 1 <= k <= N-1, otherwise ArgumentError.
KnnGraph knn_graph(const PointCloud& cloud, std::size_t k = kDefaultNeighbors);

inline double squared_distance(const Point3& a, const Point3& b) noexcept {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    const double dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

/// Chamfer distance with squared Euclidean norms:
///   (1/|P|) sum_i min_j |a_i - b_j|^2 + (1/|Q|) sum_j min_i |b_j - a_i|^2
/// Both sums run in ascending index order so the result is reproducible bit for bit.
double chamfer_distance(const PointCloud& p, const PointCloud& q);

}  // namespace qsc
