#include "qsc/pipeline.hpp"

#include "qsc/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace qsc {

std::vector<NamedCloud> load_dataset(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw IoError("dataset directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file())
            continue;
        const auto ext = entry.path().extension().string();
        if (ext == ".xyz" || ext == ".txt" || ext == ".bin" || ext == ".f32")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });

    std::vector<NamedCloud> dataset;
    dataset.reserve(files.size());
    for (const auto& f : files)
        dataset.push_back({f.stem().string(), load_pointcloud(f, format_from_extension(f))});
    return dataset;
}

void validate(const TimingModel& t) {
    if (!(std::isfinite(t.per_round_overhead_ms) && t.per_round_overhead_ms >= 0.0))
        throw ValidationError("timing.per_round_overhead_ms: must be finite and >= 0");
    if (!(std::isfinite(t.effective_rate_bps) && t.effective_rate_bps > 0.0))
        throw ValidationError("timing.effective_rate_bps: must be finite and > 0");
    if (!(std::isfinite(t.encode_ms) && t.encode_ms >= 0.0))
        throw ValidationError("timing.encode_ms: must be finite and >= 0");
    if (!(std::isfinite(t.decode_ms) && t.decode_ms >= 0.0))
        throw ValidationError("timing.decode_ms: must be finite and >= 0");
}

double round_time_ms(const TimingModel& timing, double round_bits) {
    return timing.per_round_overhead_ms + round_bits / timing.effective_rate_bps * 1000.0;
}

std::size_t rounds_for(std::size_t dataset_size, std::size_t batch_size) {
    if (batch_size == 0)
        throw ArgumentError("batch size must be positive");
    return (dataset_size + batch_size - 1) / batch_size;
}

namespace {

/// Sum of round times; the last round may carry fewer clouds.
double channel_time_ms(std::span<const double> cloud_bits, const TimingModel& timing, std::size_t batch_size) {
    double total = 0.0;
    for (std::size_t start = 0; start < cloud_bits.size(); start += batch_size) {
        double bits = 0.0;
        const std::size_t stop = std::min(cloud_bits.size(), start + batch_size);
        for (std::size_t i = start; i < stop; ++i)
            bits += cloud_bits[i];
        total += round_time_ms(timing, bits);
    }
    return total;
}

}  // namespace

double raw_transmission_time_ms(std::span<const NamedCloud> dataset, const TimingModel& timing,
                                std::size_t batch_size) {
    rounds_for(dataset.size(), batch_size);
    std::vector<double> bits;
    bits.reserve(dataset.size());
    for (const auto& item : dataset)
        bits.push_back(static_cast<double>(item.cloud.size() * 3 * kBitsPerSymbol));
    return channel_time_ms(bits, timing, batch_size);
}

std::vector<EncodedCloud> encode_dataset(std::span<const NamedCloud> dataset, const Codec& codec) {
    std::vector<EncodedCloud> out;
    out.reserve(dataset.size());
    for (const auto& item : dataset) {
        try {
            out.push_back(codec.encode(item.cloud, item.id));
        } catch (const Error& e) {
            throw RunError(item.id, std::string("encode failed: ") + e.what());
        }
    }
    return out;
}

TransmissionReport assemble_report(std::span<const NamedCloud> dataset, std::span<const EncodedCloud> received,
                                   const Codec& codec, const TimingModel& timing, std::size_t batch_size,
                                   const RunOptions& options) {
    if (dataset.empty())
        throw ArgumentError("simulate_run: dataset is empty");
    if (received.size() != dataset.size())
        throw ArgumentError("simulate_run: received code count does not match dataset size");
    validate(timing);

    TransmissionReport report;
    report.n = codec.code_length();
    report.batch_size = batch_size;
    report.rounds = rounds_for(dataset.size(), batch_size);

    double cd_sum = 0.0;
    std::vector<double> code_bits;
    code_bits.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& item = dataset[i];
        PointCloud reconstructed = [&] {
            try {
                return codec.decode(received[i], item.cloud.size());
            } catch (const Error& e) {
                throw RunError(item.id, std::string("decode failed: ") + e.what());
            }
        }();
        cd_sum += chamfer_distance(item.cloud, reconstructed);
        code_bits.push_back(static_cast<double>(received[i].code.size() * kBitsPerSymbol));
        report.total_bits += item.cloud.size() * 3 * kBitsPerSymbol;
    }
    report.mean_cd = cd_sum / static_cast<double>(dataset.size());

    const double codec_ms = static_cast<double>(dataset.size()) * (timing.encode_ms + timing.decode_ms);
    report.total_time_ms = channel_time_ms(code_bits, timing, batch_size) + codec_ms;
    report.edr_bps = compute_edr(report.total_bits, report.total_time_ms);
    const double raw = options.raw_time_ms.value_or(raw_transmission_time_ms(dataset, timing, batch_size));
    report.rte = compute_rte(raw, report.total_time_ms);
    return report;
}

TransmissionReport simulate_run(std::span<const NamedCloud> dataset, const Codec& codec, const TimingModel& timing,
                                const ChannelParams& link, std::size_t batch_size, const RunOptions& options) {
    validate(link);
    if (dataset.empty())
        throw ArgumentError("simulate_run: dataset is empty");
    auto encoded = encode_dataset(dataset, codec);
    for (auto& e : encoded)
        e.code = quantize_f32(e.code);
    return assemble_report(dataset, encoded, codec, timing, batch_size, options);
}

TransmissionReport simulate_run(std::span<const NamedCloud> dataset, const CodecDescriptor& codec,
                                const TimingModel& timing, const ChannelParams& link, std::size_t batch_size,
                                const RunOptions& options) {
    const auto impl = make_codec(codec);
    return simulate_run(dataset, *impl, timing, link, batch_size, options);
}

double compute_edr(std::uint64_t total_reconstructed_bits, double total_time_ms) {
    if (!(total_time_ms > 0.0))
        throw ArgumentError("compute_edr: total time must be positive");
    return static_cast<double>(total_reconstructed_bits) / (total_time_ms / 1000.0);
}

double compute_rte(double raw_time_ms, double task_time_ms) {
    if (!(task_time_ms > 0.0) || !(raw_time_ms > 0.0))
        throw ArgumentError("compute_rte: times must be positive");
    return raw_time_ms / task_time_ms;
}

// --- packing -----------------------------------------------------------------------

Bits pack_codes(std::span<const EncodedCloud> codes) {
    Bits bits;
    for (const auto& c : codes) {
        for (double v : c.code.values()) {
            const auto word = std::bit_cast<std::uint32_t>(static_cast<float>(v));
            for (unsigned b = 0; b < 32; ++b)
                bits.push_back(static_cast<std::uint8_t>((word >> b) & 1u));
        }
    }
    return bits;
}

std::vector<EncodedCloud> unpack_codes(std::span<const std::uint8_t> bits, std::span<const EncodedCloud> layout) {
    std::size_t expected = 0;
    for (const auto& c : layout)
        expected += c.code.size() * 32;
    if (bits.size() != expected)
        throw FormatError("unpack_codes: got " + std::to_string(bits.size()) + " bits, expected " +
                          std::to_string(expected));

    std::vector<EncodedCloud> out;
    out.reserve(layout.size());
    std::size_t pos = 0;
    for (const auto& c : layout) {
        std::vector<double> values(c.code.size());
        for (auto& v : values) {
            std::uint32_t word = 0;
            for (unsigned b = 0; b < 32; ++b)
                word |= static_cast<std::uint32_t>(bits[pos++] & 1u) << b;
            v = std::bit_cast<float>(word);
        }
        out.push_back({c.id, SemanticCode(std::move(values)), c.scale});
    }
    return out;
}

// --- calibration -----------------------------------------------------------------

CalibrationResult calibrate_timing(std::span<const TableRow> rows, std::size_t dataset_size, std::size_t batch_size) {
    if (rows.size() < 2)
        throw CalibrationError("calibrate_timing: need at least two rows, got " + std::to_string(rows.size()));
    if (dataset_size == 0)
        throw CalibrationError("calibrate_timing: dataset size must be positive");

    CalibrationResult result;
    result.rounds = rounds_for(dataset_size, batch_size);
    const double rounds = static_cast<double>(result.rounds);

    std::vector<double> x;
    std::vector<double> y;
    for (const auto& row : rows) {
        if (!(row.total_time_ms > 0.0) || row.n == 0)
            throw CalibrationError("calibrate_timing: rows need n > 0 and a positive total time");
        x.push_back(static_cast<double>(batch_size * row.n * kBitsPerSymbol));
        y.push_back(row.total_time_ms / rounds);
    }

    const double count = static_cast<double>(x.size());
    double mean_x = 0.0;
    double mean_y = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mean_x += x[i];
        mean_y += y[i];
    }
    mean_x /= count;
    mean_y /= count;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mean_x) * (x[i] - mean_x);
        sxy += (x[i] - mean_x) * (y[i] - mean_y);
    }
    if (!(sxx > 0.0))
        throw CalibrationError("calibrate_timing: singular fit (all rows share the same n)");

    result.slope_ms_per_bit = sxy / sxx;
    result.intercept_ms = mean_y - result.slope_ms_per_bit * mean_x;
    if (!(result.slope_ms_per_bit > 0.0))
        throw CalibrationError("calibrate_timing: fitted time does not grow with bits (nonpositive slope)");

    result.model.per_round_overhead_ms = std::max(0.0, result.intercept_ms);
    result.model.effective_rate_bps = 1000.0 / result.slope_ms_per_bit;
    for (std::size_t i = 0; i < x.size(); ++i)
        result.residuals_ms.push_back(y[i] - round_time_ms(result.model, x[i]));
    return result;
}

double total_time_ms(const TimingModel& timing, std::size_t n, std::size_t dataset_size, std::size_t batch_size) {
    const double rounds = static_cast<double>(rounds_for(dataset_size, batch_size));
    const double d = static_cast<double>(dataset_size);
    const double bits = d * static_cast<double>(n * kBitsPerSymbol);
    return rounds * timing.per_round_overhead_ms + bits / timing.effective_rate_bps * 1000.0 +
           d * (timing.encode_ms + timing.decode_ms);
}

BatchSaturation batch_saturation_report(const TimingModel& timing, std::size_t n, std::size_t dataset_size) {
    validate(timing);
    BatchSaturation s;
    s.time_b3_ms = total_time_ms(timing, n, dataset_size, 3);
    s.time_b32_ms = total_time_ms(timing, n, dataset_size, 32);
    s.reduction = 1.0 - s.time_b32_ms / s.time_b3_ms;
    return s;
}

// --- reports -----------------------------------------------------------------------

ReportFormat parse_report_format(const std::string& text) {
    if (text == "json")
        return ReportFormat::Json;
    if (text == "csv")
        return ReportFormat::Csv;
    throw ArgumentError("unknown report format '" + text + "' (expected json or csv)");
}

nlohmann::json to_json(const TransmissionReport& r) {
    return {{"n", r.n},
            {"total_time_ms", r.total_time_ms},
            {"total_bits", r.total_bits},
            {"mean_cd", r.mean_cd},
            {"edr_bps", r.edr_bps},
            {"rte", r.rte},
            {"rounds", r.rounds},
            {"batch_size", r.batch_size}};
}

TransmissionReport report_from_json(const nlohmann::json& j) {
    try {
        TransmissionReport r;
        r.n = j.at("n").get<std::size_t>();
        r.total_time_ms = j.at("total_time_ms").get<double>();
        r.total_bits = j.at("total_bits").get<std::uint64_t>();
        r.mean_cd = j.at("mean_cd").get<double>();
        r.edr_bps = j.at("edr_bps").get<double>();
        r.rte = j.at("rte").get<double>();
        r.rounds = j.at("rounds").get<std::size_t>();
        r.batch_size = j.at("batch_size").get<std::size_t>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("transmission report: ") + e.what());
    }
}

void write_json_file(const nlohmann::json& j, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out)
        throw IoError("write failed: " + path.string());
}

void emit_report(const TransmissionReport& report, const std::filesystem::path& path, ReportFormat format) {
    if (format == ReportFormat::Json) {
        write_json_file(to_json(report), path);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path.string());
    out.precision(17);
    out << kReportCsvHeader << '\n'
        << report.n << ',' << report.total_time_ms << ',' << report.total_bits << ',' << report.mean_cd << ','
        << report.edr_bps << ',' << report.rte << ',' << report.rounds << ',' << report.batch_size << '\n';
    if (!out)
        throw IoError("write failed: " + path.string());
}

TransmissionReport read_report_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return report_from_json(j);
}

}  // namespace qsc
