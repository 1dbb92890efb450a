#pragma once

#include "qsc/pointcloud.hpp"
#include "qsc/qsdc_link.hpp"
#include "qsc/semantic_codec.hpp"
#include "qsc/stike.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace qsc {

inline constexpr std::size_t kBitsPerSymbol = 32;

struct NamedCloud {
    std::string id;
    PointCloud cloud;
};

/// Loads every .xyz/.txt/.bin/.f32 file in `dir`, sorted by file name.
/// The identifier is the file stem.
std::vector<NamedCloud> load_dataset(const std::filesystem::path& dir);

/// Affine round-time model: each round costs a fixed overhead plus its bits
/// over the effective rate. Encode/decode latencies are per cloud.
struct TimingModel {
    double per_round_overhead_ms = 0.0;
    double effective_rate_bps = 1.0;
    double encode_ms = 0.0;
    double decode_ms = 0.0;

    friend bool operator==(const TimingModel&, const TimingModel&) = default;
};

/// Throws ValidationError naming the field.
void validate(const TimingModel& timing);

double round_time_ms(const TimingModel& timing, double round_bits);

struct TransmissionReport {
    std::size_t n = 0;
    double total_time_ms = 0.0;
    std::uint64_t total_bits = 0;
    double mean_cd = 0.0;
    double edr_bps = 0.0;
    double rte = 0.0;
    std::size_t rounds = 0;
    std::size_t batch_size = 0;

    friend bool operator==(const TransmissionReport&, const TransmissionReport&) = default;
};

struct RunOptions {
    /// Raw-transmission reference time for RTE. When unset it is computed from
    /// the timing model with N * 3 * 32 bits per cloud and no codec latency.
    std::optional<double> raw_time_ms;
};

std::size_t rounds_for(std::size_t dataset_size, std::size_t batch_size);

/// Encodes every cloud; a failure is rethrown as RunError naming the cloud.
std::vector<EncodedCloud> encode_dataset(std::span<const NamedCloud> dataset, const Codec& codec);

/// Decodes received codes, scores them against the originals and applies the
/// round timing model.
TransmissionReport assemble_report(std::span<const NamedCloud> dataset, std::span<const EncodedCloud> received,
                                   const Codec& codec, const TimingModel& timing, std::size_t batch_size,
                                   const RunOptions& options = {});

/// Encode, quantize to 32-bit symbols, decode, and time the whole dataset.
/// `link` is validated; the channel rate itself comes from `timing`.
TransmissionReport simulate_run(std::span<const NamedCloud> dataset, const Codec& codec, const TimingModel& timing,
                                const ChannelParams& link, std::size_t batch_size, const RunOptions& options = {});

TransmissionReport simulate_run(std::span<const NamedCloud> dataset, const CodecDescriptor& codec,
                                const TimingModel& timing, const ChannelParams& link, std::size_t batch_size,
                                const RunOptions& options = {});

/// Channel time of a raw (uncoded) transmission of the dataset.
double raw_transmission_time_ms(std::span<const NamedCloud> dataset, const TimingModel& timing,
                                std::size_t batch_size);

/// bits / (ms / 1000). Throws ArgumentError for a nonpositive time.
double compute_edr(std::uint64_t total_reconstructed_bits, double total_time_ms);

/// raw / task. Throws ArgumentError for nonpositive times.
double compute_rte(double raw_time_ms, double task_time_ms);

// --- payload packing ---------------------------------------------------------------

/// Concatenated little-endian IEEE-754 binary32 symbols, bit 0 of each byte first.
Bits pack_codes(std::span<const EncodedCloud> codes);

/// Inverse of pack_codes; ids, lengths and scales are taken from `layout`.
std::vector<EncodedCloud> unpack_codes(std::span<const std::uint8_t> bits, std::span<const EncodedCloud> layout);

// --- calibration ---------------------------------------------------------------------

struct TableRow {
    std::size_t n = 0;
    double total_time_ms = 0.0;
};

struct CalibrationResult {
    TimingModel model;
    double intercept_ms = 0.0;  // before clamping at zero
    double slope_ms_per_bit = 0.0;
    std::size_t rounds = 0;
    /// Per-row residual of per-round time (observed - fitted), ms.
    std::vector<double> residuals_ms;
};

/// Least-squares fit of per-round time (total / rounds) against per-round bits
/// (batch * n * 32). Throws CalibrationError with fewer than two rows or when
/// all rows share the same n.
CalibrationResult calibrate_timing(std::span<const TableRow> rows, std::size_t dataset_size, std::size_t batch_size);

struct BatchSaturation {
    double time_b3_ms = 0.0;
    double time_b32_ms = 0.0;
    double reduction = 0.0;  // 1 - time_b32 / time_b3
};

/// Total time of `dataset_size` clouds at code length n for the given batch size.
double total_time_ms(const TimingModel& timing, std::size_t n, std::size_t dataset_size, std::size_t batch_size);

BatchSaturation batch_saturation_report(const TimingModel& timing, std::size_t n, std::size_t dataset_size);

// --- reference measurements -------------------------------------------------------------

struct ReferenceRow {
    std::size_t n;
    double encode_ms;
    double decode_ms;
    double total_ms;
    double cd_e3;
    double edr_kbps;
    double rte;
};

inline constexpr std::size_t kReferenceDatasetSize = 10'261;
inline constexpr std::size_t kReferencePoints = 2048;
inline constexpr std::size_t kRawCodeLength = kReferencePoints * 3;
inline constexpr std::size_t kReferenceBatch = 3;

/// Published per-code-length measurements over the 10,261-cloud test set at batch size 3.
inline constexpr std::array<ReferenceRow, 7> kReferenceTable{{
    {6144, 0.00, 0.00, 57'636'000, 0.00, 34.37, 1.00},
    {10, 3.72, 1.44, 1'244'715, 3.40, 1591.52, 46.30},
    {20, 3.86, 1.41, 1'690'240, 2.58, 1172.02, 34.10},
    {50, 3.89, 1.35, 2'708'329, 2.00, 731.44, 21.28},
    {100, 3.15, 1.34, 4'855'498, 1.68, 407.99, 11.87},
    {200, 2.76, 1.22, 5'303'667, 1.47, 373.51, 10.87},
    {300, 3.21, 1.39, 7'530'870, 1.38, 263.05, 7.65},
}};

// --- reports --------------------------------------------------------------------------

enum class ReportFormat { Json, Csv };

ReportFormat parse_report_format(const std::string& text);

inline constexpr const char* kReportCsvHeader = "n,total_time_ms,total_bits,mean_cd,edr_bps,rte,rounds,batch_size";

nlohmann::json to_json(const TransmissionReport& report);
TransmissionReport report_from_json(const nlohmann::json& j);

/// Throws IoError naming the path.
void emit_report(const TransmissionReport& report, const std::filesystem::path& path, ReportFormat format);
TransmissionReport read_report_json(const std::filesystem::path& path);

/// Writes JSON with a trailing newline; throws IoError naming the path.
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace qsc
