#pragma once

#include "qsc/config.hpp"
#include "qsc/pipeline.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qsc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitAborted = 2;

struct SimulateOptions {
    std::filesystem::path config;
    std::optional<std::uint64_t> seed;
    std::filesystem::path out = "report.json";
    ReportFormat format = ReportFormat::Json;
    bool dry_run = false;
};

/// Session report path written next to the transmission report: <stem>.session.json.
std::filesystem::path session_report_path(const std::filesystem::path& out);

/// Encodes the dataset, sends it through a STIKE session, decodes what arrived
/// and writes the transmission report plus the session report.
/// Returns 0 when the session completes, 2 when it aborts, 1 on any error.
int cmd_simulate(const SimulateOptions& options, std::ostream& out, std::ostream& err,
                 const EnvLookup& env = process_environment());

struct CapacityOptions {
    std::optional<std::filesystem::path> config;
    CapacityMode mode = CapacityMode::Reference;
    std::optional<double> eve_error;
    std::vector<std::filesystem::path> reports;
    bool dry_run = false;
};

int cmd_capacity(const CapacityOptions& options, std::ostream& out, std::ostream& err,
                 const EnvLookup& env = process_environment());

struct CalibrateOptions {
    std::filesystem::path table;
    std::size_t dataset_size = kReferenceDatasetSize;
    std::size_t batch_size = kReferenceBatch;
    std::filesystem::path out = "timing.json";
    bool dry_run = false;
};

int cmd_calibrate(const CalibrateOptions& options, std::ostream& out, std::ostream& err);

struct CodesValidateOptions {
    std::filesystem::path archive;
    bool dry_run = false;
};

int cmd_codes_validate(const CodesValidateOptions& options, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a subcommand.
int run(int argc, char** argv);

}  // namespace qsc::cli
