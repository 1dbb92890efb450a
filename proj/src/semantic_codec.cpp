#include "qsc/semantic_codec.hpp"

#include "qsc/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace qsc {

SemanticCode::SemanticCode(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty())
        throw ValidationError("semantic code must have at least one symbol");
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i]))
            throw ValidationError("non-finite code value at symbol " + std::to_string(i));
    }
}

double SemanticCode::energy() const noexcept {
    double e = 0.0;
    for (double v : values_)
        e += v * v;
    return e;
}

std::vector<double> power_normalize(std::span<const double> v, std::size_t n) {
    if (n == 0 || v.size() != n)
        throw ArgumentError("power_normalize: vector length " + std::to_string(v.size()) +
                            " does not match n=" + std::to_string(n));
    double energy = 0.0;
    for (double x : v)
        energy += x * x;
    if (!(energy > 0.0))
        throw NormalizationError("power_normalize: zero vector");
    const double gain = std::sqrt(static_cast<double>(n)) / std::sqrt(energy);
    std::vector<double> out(v.begin(), v.end());
    for (double& x : out)
        x *= gain;
    return out;
}

SemanticCode quantize_f32(const SemanticCode& code) {
    std::vector<double> values(code.values().begin(), code.values().end());
    for (double& v : values)
        v = static_cast<double>(static_cast<float>(v));
    return SemanticCode(std::move(values));
}

std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t m) {
    const std::size_t n = cloud.size();
    if (m > n)
        throw ArgumentError("farthest_point_sample: m=" + std::to_string(m) + " exceeds N=" + std::to_string(n));
    std::vector<std::size_t> selected;
    if (m == 0)
        return selected;
    selected.reserve(m);

    std::size_t seed = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (cloud[i][0] < cloud[seed][0])
            seed = i;
    }

    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<bool> taken(n, false);
    std::size_t current = seed;
    for (;;) {
        selected.push_back(current);
        taken[current] = true;
        if (selected.size() == m)
            break;
        std::size_t best = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i])
                continue;
            dist[i] = std::min(dist[i], squared_distance(cloud[i], cloud[current]));
            if (best == n || dist[i] > dist[best])
                best = i;
        }
        current = best;
    }
    return selected;
}

EncodedCloud baseline_encode(const PointCloud& cloud, std::size_t n, std::string id) {
    if (n == 0 || n % 3 != 0)
        throw ArgumentError("baseline_encode: code length " + std::to_string(n) + " is not a positive multiple of 3");
    const std::size_t m = n / 3;
    if (m > cloud.size())
        throw ArgumentError("baseline_encode: n/3=" + std::to_string(m) + " exceeds point count " +
                            std::to_string(cloud.size()));

    std::vector<double> flat;
    flat.reserve(n);
    for (std::size_t idx : farthest_point_sample(cloud, m))
        flat.insert(flat.end(), cloud[idx].begin(), cloud[idx].end());

    double energy = 0.0;
    for (double x : flat)
        energy += x * x;
    auto normalized = power_normalize(flat, n);
    return EncodedCloud{std::move(id), SemanticCode(std::move(normalized)),
                        std::sqrt(energy / static_cast<double>(n))};
}

PointCloud baseline_decode(const SemanticCode& code, std::optional<double> scale, std::size_t target_points) {
    if (!scale || !std::isfinite(*scale) || *scale <= 0.0)
        throw FormatError("baseline_decode: missing or invalid scale metadata");
    if (code.size() % 3 != 0)
        throw ArgumentError("baseline_decode: code length " + std::to_string(code.size()) + " is not divisible by 3");
    if (target_points == 0)
        throw ArgumentError("baseline_decode: target point count must be positive");

    const auto values = code.values();
    const std::size_t m = code.size() / 3;
    std::vector<Point3> points(target_points);
    for (std::size_t i = 0; i < target_points; ++i) {
        const std::size_t src = (i % m) * 3;
        points[i] = {values[src] * *scale, values[src + 1] * *scale, values[src + 2] * *scale};
    }
    return PointCloud(std::move(points));
}

// --- archive ----------------------------------------------------------------

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'Q', 'S', 'C', 'C'};

template <typename T>
void put(std::string& buf, T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    buf.append(bytes, sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::string& data) : data_(data) {}

    template <typename T>
    T get(const char* what, std::size_t record) {
        need(sizeof(T), what, record);
        T value;
        std::memcpy(&value, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    std::string bytes(std::size_t count, const char* what, std::size_t record) {
        need(count, what, record);
        std::string out = data_.substr(pos_, count);
        pos_ += count;
        return out;
    }

    bool at_end() const noexcept { return pos_ == data_.size(); }
    std::size_t offset() const noexcept { return pos_; }

private:
    void need(std::size_t count, const char* what, std::size_t record) const {
        if (data_.size() - pos_ < count)
            throw FormatError("record " + std::to_string(record) + ": truncated while reading " + what +
                              " at byte offset " + std::to_string(pos_));
    }

    const std::string& data_;
    std::size_t pos_ = 0;
};

}  // namespace

void write_code_archive(const std::filesystem::path& path, std::span<const EncodedCloud> records) {
    if (records.size() > std::numeric_limits<std::uint32_t>::max())
        throw ArgumentError("too many records for a code archive");
    std::string buf(kMagic, 4);
    put<std::uint16_t>(buf, kArchiveVersion);
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(records.size()));
    for (const auto& rec : records) {
        if (rec.id.size() > std::numeric_limits<std::uint16_t>::max())
            throw ArgumentError("identifier too long: " + rec.id.substr(0, 32) + "...");
        put<std::uint16_t>(buf, static_cast<std::uint16_t>(rec.id.size()));
        buf += rec.id;
        put<std::uint32_t>(buf, static_cast<std::uint32_t>(rec.code.size()));
        put<double>(buf, rec.scale);
        for (double v : rec.code.values())
            put<float>(buf, static_cast<float>(v));
    }

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out)
        throw IoError("write failed: " + path.string());
}

std::vector<EncodedCloud> load_external_codes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    const std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};

    Reader reader(data);
    const std::size_t header = static_cast<std::size_t>(-1);
    if (reader.bytes(4, "magic", 0) != std::string(kMagic, 4))
        throw FormatError(path.string() + ": bad magic bytes (expected QSCC)");
    const auto version = reader.get<std::uint16_t>("version", header);
    if (version != kArchiveVersion)
        throw FormatError(path.string() + ": unsupported archive version " + std::to_string(version));
    const auto count = reader.get<std::uint32_t>("record count", header);

    std::vector<EncodedCloud> records;
    records.reserve(std::min<std::size_t>(count, data.size() / 16));
    for (std::size_t r = 0; r < count; ++r) {
        const auto id_len = reader.get<std::uint16_t>("identifier length", r);
        std::string id = reader.bytes(id_len, "identifier", r);
        const auto n = reader.get<std::uint32_t>("code length", r);
        if (n == 0)
            throw FormatError("record " + std::to_string(r) + ": code length is zero");
        const auto scale = reader.get<double>("scale factor", r);
        if (!std::isfinite(scale) || scale <= 0.0)
            throw FormatError("record " + std::to_string(r) + ": invalid scale factor");
        std::vector<double> values(n);
        for (auto& v : values) {
            v = reader.get<float>("code values", r);
            if (!std::isfinite(v))
                throw FormatError("record " + std::to_string(r) + ": non-finite code value");
        }
        SemanticCode code(std::move(values));
        const double drift = std::abs(code.energy() - static_cast<double>(n)) / static_cast<double>(n);
        if (drift > kArchiveEnergyTolerance)
            throw FormatError("record " + std::to_string(r) + ": code energy deviates from n by " +
                              std::to_string(drift) + " (relative)");
        records.push_back(EncodedCloud{std::move(id), std::move(code), scale});
    }
    if (!reader.at_end())
        throw FormatError(path.string() + ": trailing bytes after record " + std::to_string(count) +
                          " at offset " + std::to_string(reader.offset()));
    return records;
}

// --- codecs -----------------------------------------------------------------

BaselineCodec::BaselineCodec(std::size_t n) : n_(n) {
    if (n == 0 || n % 3 != 0)
        throw ArgumentError("baseline codec requires n to be a positive multiple of 3, got " + std::to_string(n));
}

EncodedCloud BaselineCodec::encode(const PointCloud& cloud, const std::string& id) const {
    return baseline_encode(cloud, n_, id);
}

PointCloud BaselineCodec::decode(const EncodedCloud& encoded, std::size_t target_points) const {
    return baseline_decode(encoded.code, encoded.scale, target_points);
}

ExternalCodec::ExternalCodec(std::vector<EncodedCloud> codes, std::map<std::string, PointCloud> reconstructions)
    : reconstructions_(std::move(reconstructions)) {
    if (codes.empty())
        throw ArgumentError("external codec archive holds no records");
    n_ = codes.front().code.size();
    for (auto& rec : codes) {
        if (rec.code.size() != n_)
            throw FormatError("record '" + rec.id + "' has code length " + std::to_string(rec.code.size()) +
                              ", expected " + std::to_string(n_));
        std::string key = rec.id;
        if (!codes_.emplace(std::move(key), std::move(rec)).second)
            throw FormatError("duplicate identifier in archive");
    }
}

EncodedCloud ExternalCodec::encode(const PointCloud&, const std::string& id) const {
    auto it = codes_.find(id);
    if (it == codes_.end())
        throw ArgumentError("no external code for identifier '" + id + "'");
    return it->second;
}

PointCloud ExternalCodec::decode(const EncodedCloud& encoded, std::size_t) const {
    auto it = reconstructions_.find(encoded.id);
    if (it == reconstructions_.end())
        throw ArgumentError("no reconstruction for identifier '" + encoded.id + "'");
    return it->second;
}

std::unique_ptr<Codec> make_codec(const CodecDescriptor& descriptor) {
    if (descriptor.kind == CodecKind::BaselineFps)
        return std::make_unique<BaselineCodec>(descriptor.n);

    if (!descriptor.source)
        throw ArgumentError("external-neural codec requires a source archive");
    auto codes = load_external_codes(*descriptor.source);
    if (!codes.empty() && codes.front().code.size() != descriptor.n)
        throw FormatError("archive code length " + std::to_string(codes.front().code.size()) +
                          " does not match configured n=" + std::to_string(descriptor.n));

    std::map<std::string, PointCloud> recon;
    if (descriptor.reconstructions) {
        for (const auto& entry : std::filesystem::directory_iterator(*descriptor.reconstructions)) {
            if (!entry.is_regular_file())
                continue;
            const auto ext = entry.path().extension().string();
            if (ext != ".xyz" && ext != ".txt" && ext != ".bin" && ext != ".f32")
                continue;
            recon.emplace(entry.path().stem().string(),
                          load_pointcloud(entry.path(), format_from_extension(entry.path())));
        }
    }
    return std::make_unique<ExternalCodec>(std::move(codes), std::move(recon));
}

}  // namespace qsc
