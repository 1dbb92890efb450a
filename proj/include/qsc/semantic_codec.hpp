#pragma once

#include "qsc/pointcloud.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qsc {

/// Length-n real code vector, the payload sent over the quantum channel.
class SemanticCode {
public:
    /// Throws ValidationError on an empty vector or non-finite values.
    explicit SemanticCode(std::vector<double> values);

    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double energy() const noexcept;

    friend bool operator==(const SemanticCode&, const SemanticCode&) = default;

private:
    std::vector<double> values_;
};

/// Returns v * sqrt(n) / |v|_2 so that the output has sum of squares n.
/// Throws NormalizationError for an all-zero vector, ArgumentError when |v| != n.
std::vector<double> power_normalize(std::span<const double> v, std::size_t n);

/// A code together with the scale factor needed to undo normalization.
struct EncodedCloud {
    std::string id;
    SemanticCode code;
    double scale = 1.0;

    friend bool operator==(const EncodedCloud&, const EncodedCloud&) = default;
};

/// Code values rounded to 32-bit floats, as they travel on the link.
SemanticCode quantize_f32(const SemanticCode& code);

/// Farthest-point sampling of m points. The seed is the lowest-index point with
/// minimal x; each step picks the point with the largest distance to the
/// selected set, ties broken by lowest index.
std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t m);

/// FPS of n/3 points, flattened in selection order, then power-normalized.
/// Throws ArgumentError when n % 3 != 0 or n/3 > N.
EncodedCloud baseline_encode(const PointCloud& cloud, std::size_t n, std::string id = {});

/// Un-normalizes with the carried scale and replicates points round-robin up to
/// target_points. Throws FormatError without a usable scale.
PointCloud baseline_decode(const SemanticCode& code, std::optional<double> scale, std::size_t target_points);

// --- QSCC code archive --------------------------------------------------------
//
// magic "QSCC", u16 version = 1, u32 record count, then per record:
// u16 id length, UTF-8 id, u32 n, f64 scale, n x f32. Little-endian throughout.

inline constexpr std::uint16_t kArchiveVersion = 1;
inline constexpr double kArchiveEnergyTolerance = 1e-3;

void write_code_archive(const std::filesystem::path& path, std::span<const EncodedCloud> records);

/// Reads and validates every record. Throws FormatError naming the record index
/// on a bad header, truncation, or |sum x^2 - n| / n > 1e-3.
std::vector<EncodedCloud> load_external_codes(const std::filesystem::path& path);

// --- Codec abstraction --------------------------------------------------------

enum class CodecKind { BaselineFps, ExternalNeural };

struct CodecDescriptor {
    CodecKind kind = CodecKind::BaselineFps;
    std::size_t n = 300;
    std::optional<std::filesystem::path> source;           // QSCC archive for external codes
    std::optional<std::filesystem::path> reconstructions;  // directory of <id>.xyz / <id>.bin
};

/// Code lengths used for the reported comparisons.
inline constexpr std::array<std::size_t, 6> kReportedCodeLengths{10, 20, 50, 100, 200, 300};

class Codec {
public:
    virtual ~Codec() = default;
    virtual std::size_t code_length() const = 0;
    virtual EncodedCloud encode(const PointCloud& cloud, const std::string& id) const = 0;
    virtual PointCloud decode(const EncodedCloud& encoded, std::size_t target_points) const = 0;
};

class BaselineCodec final : public Codec {
public:
    explicit BaselineCodec(std::size_t n);
    std::size_t code_length() const override { return n_; }
    EncodedCloud encode(const PointCloud& cloud, const std::string& id) const override;
    PointCloud decode(const EncodedCloud& encoded, std::size_t target_points) const override;

private:
    std::size_t n_;
};

/// Serves codes produced by an externally trained network. Encoding looks the
/// cloud up by identifier in the archive; decoding returns the matching
/// reconstruction file.
class ExternalCodec final : public Codec {
public:
    ExternalCodec(std::vector<EncodedCloud> codes, std::map<std::string, PointCloud> reconstructions);
    std::size_t code_length() const override { return n_; }
    EncodedCloud encode(const PointCloud& cloud, const std::string& id) const override;
    PointCloud decode(const EncodedCloud& encoded, std::size_t target_points) const override;

private:
    std::map<std::string, EncodedCloud> codes_;
    std::map<std::string, PointCloud> reconstructions_;
    std::size_t n_ = 0;
};

std::unique_ptr<Codec> make_codec(const CodecDescriptor& descriptor);

}  // namespace qsc
