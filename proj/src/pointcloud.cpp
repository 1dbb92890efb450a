#include "qsc/pointcloud.hpp"

#include "qsc/errors.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace qsc {

static_assert(std::endian::native == std::endian::little, "binary cloud I/O assumes a little-endian host");

PointCloud::PointCloud(std::vector<Point3> points) : points_(std::move(points)) {
    if (points_.empty())
        throw ValidationError("point cloud must contain at least one point");
    for (std::size_t i = 0; i < points_.size(); ++i) {
        for (double c : points_[i]) {
            if (!std::isfinite(c))
                throw ValidationError("non-finite coordinate at point " + std::to_string(i));
        }
    }
}

CloudFormat format_from_extension(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".xyz" || ext == ".txt")
        return CloudFormat::XyzText;
    if (ext == ".bin" || ext == ".f32")
        return CloudFormat::F32Binary;
    throw ArgumentError("unrecognised point cloud extension '" + ext + "' (" + path.string() + ")");
}

namespace {

std::string read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

PointCloud parse_text(const std::string& text, const std::filesystem::path& path) {
    std::vector<Point3> points;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos)
            eol = text.size();
        ++line_no;
        const char* cur = text.data() + pos;
        const char* end = text.data() + eol;
        pos = eol + 1;

        auto skip_ws = [&] {
            while (cur != end && (*cur == ' ' || *cur == '\t' || *cur == '\r'))
                ++cur;
        };
        skip_ws();
        if (cur == end)
            continue;  // blank line

        Point3 p{};
        for (int axis = 0; axis < 3; ++axis) {
            skip_ws();
            auto [next, ec] = std::from_chars(cur, end, p[axis]);
            if (ec != std::errc{} || next == cur)
                throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                                 ": expected 3 real values");
            cur = next;
        }
        skip_ws();
        if (cur != end)
            throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": trailing characters");
        for (double c : p) {
            if (!std::isfinite(c))
                throw ValidationError(path.string() + ": line " + std::to_string(line_no) +
                                      ": non-finite coordinate");
        }
        points.push_back(p);
    }
    if (points.empty())
        throw ParseError(path.string() + ": no points");
    return PointCloud(std::move(points));
}

PointCloud parse_binary(const std::string& bytes, const std::filesystem::path& path) {
    if (bytes.empty())
        throw ParseError(path.string() + ": empty file");
    if (bytes.size() % 12 != 0) {
        const std::size_t valid = bytes.size() - bytes.size() % 12;
        throw ParseError(path.string() + ": truncated record at byte offset " + std::to_string(valid) +
                         " (size " + std::to_string(bytes.size()) + " not divisible by 12)");
    }
    const std::size_t n = bytes.size() / 12;
    std::vector<Point3> points(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int axis = 0; axis < 3; ++axis) {
            float v;
            std::memcpy(&v, bytes.data() + i * 12 + axis * 4, 4);
            if (!std::isfinite(v))
                throw ValidationError(path.string() + ": non-finite coordinate at byte offset " +
                                      std::to_string(i * 12 + axis * 4));
            points[i][axis] = v;
        }
    }
    return PointCloud(std::move(points));
}

}  // namespace

PointCloud load_pointcloud(const std::filesystem::path& path, CloudFormat format) {
    const std::string data = read_all(path);
    return format == CloudFormat::XyzText ? parse_text(data, path) : parse_binary(data, path);
}

void save_pointcloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path.string());
    if (format == CloudFormat::XyzText) {
        char buf[32];
        for (const auto& p : cloud.points()) {
            for (int axis = 0; axis < 3; ++axis) {
                auto [end, ec] = std::to_chars(buf, buf + sizeof buf, p[axis]);
                out.write(buf, end - buf);
                out.put(axis == 2 ? '\n' : ' ');
            }
        }
    } else {
        for (const auto& p : cloud.points()) {
            for (double c : p) {
                const float v = static_cast<float>(c);
                out.write(reinterpret_cast<const char*>(&v), 4);
            }
        }
    }
    if (!out)
        throw IoError("write failed: " + path.string());
}

KnnGraph knn_graph(const PointCloud& cloud, std::size_t k) {
    const std::size_t n = cloud.size();
    if (k == 0 || k >= n)
        throw ArgumentError("knn_graph: k must satisfy 1 <= k <= N-1 (k=" + std::to_string(k) +
                            ", N=" + std::to_string(n) + ")");

    KnnGraph graph;
    graph.k = k;
    graph.adjacency.resize(n);

    std::vector<std::pair<double, std::size_t>> candidates;
    candidates.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        candidates.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i)
                candidates.emplace_back(squared_distance(cloud[i], cloud[j]), j);
        }
        // pair ordering gives (distance, index), i.e. the tie rule.
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                          candidates.end());
        auto& row = graph.adjacency[i];
        row.reserve(k);
        for (std::size_t r = 0; r < k; ++r)
            row.push_back(candidates[r].second);
    }
    return graph;
}

namespace {

double directed_mean(const PointCloud& from, const PointCloud& to) {
    double sum = 0.0;
    for (const auto& a : from.points()) {
        double best = squared_distance(a, to[0]);
        for (std::size_t j = 1; j < to.size(); ++j)
            best = std::min(best, squared_distance(a, to[j]));
        sum += best;
    }
    return sum / static_cast<double>(from.size());
}

}  // namespace

double chamfer_distance(const PointCloud& p, const PointCloud& q) {
    return directed_mean(p, q) + directed_mean(q, p);
}

}  // namespace qsc
