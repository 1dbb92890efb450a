#pragma once

#include "qsc/pipeline.hpp"
#include "qsc/qsdc_link.hpp"
#include "qsc/semantic_codec.hpp"
#include "qsc/stike.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <json.hpp>

namespace qsc {

/// Looks up an environment variable; returns nullopt when unset.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

EnvLookup process_environment();

/// Settings for fitting the timing model from a table at load time.
struct TimingCalibrationSource {
    std::filesystem::path table;
    std::size_t dataset_size = kReferenceDatasetSize;
};

struct RunConfig {
    ChannelParams channel;
    CodecDescriptor codec;
    /// Resolved timing model. When `timing_source` is set it was fitted from that table.
    TimingModel timing;
    std::optional<TimingCalibrationSource> timing_source;
    std::size_t batch_size = kReferenceBatch;
    std::filesystem::path dataset_dir;
    std::uint64_t seed = 0;
    double threshold = 0.12;
    double eve_fraction = 0.0;
    std::optional<double> raw_time_ms;
    CapacityConfig capacity;

    // STIKE session framing
    bool authenticated = true;
    std::size_t frame_bits = 65'536;
    double check_fraction = 1.0 / 16.0;
    std::size_t initial_key_bits = 1u << 22;
    double residual_ber = 0.0;

    SessionConfig session_config() const;
};

/// Parses and validates a run configuration. Relative paths resolve against
/// `base_dir`. Top-level scalar fields can be overridden through environment
/// variables named QSC_<FIELD> (e.g. QSC_SEED). Every problem is reported as a
/// ConfigError carrying the JSON field path.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir, const EnvLookup& env);

RunConfig load_config(const std::filesystem::path& path, const EnvLookup& env = process_environment());

/// JSON serialisation of the resolved configuration (paths as given).
nlohmann::json to_json(const RunConfig& config);

/// Reads a "n,total_time_ms" CSV. Throws ParseError naming the line.
std::vector<TableRow> read_timing_table(const std::filesystem::path& path);

/// Timing model file written by the calibrate command.
nlohmann::json to_json(const CalibrationResult& result);
TimingModel timing_from_json(const nlohmann::json& j, const std::string& field);

}  // namespace qsc
