#include "qsc/cli.hpp"

#include "qsc/errors.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <ostream>

namespace qsc::cli {

namespace {

std::string kbps(double bps) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", bps / 1000.0);
    return buf;
}

}  // namespace

std::filesystem::path session_report_path(const std::filesystem::path& out) {
    auto p = out;
    p.replace_filename(out.stem().string() + ".session.json");
    return p;
}

int cmd_simulate(const SimulateOptions& options, std::ostream& out, std::ostream& err, const EnvLookup& env) {
    try {
        RunConfig config = load_config(options.config, env);
        if (options.seed)
            config.seed = *options.seed;
        const auto out_dir = options.out.has_parent_path() ? options.out.parent_path() : std::filesystem::path(".");
        if (!std::filesystem::is_directory(out_dir))
            throw ConfigError("--out", "directory does not exist: " + out_dir.string());
        if (options.dry_run) {
            out << "config ok: " << options.config.string() << '\n';
            return kExitOk;
        }

        const auto dataset = load_dataset(config.dataset_dir);
        if (dataset.empty())
            throw ConfigError("dataset_dir", "no point cloud files in " + config.dataset_dir.string());
        const auto codec = make_codec(config.codec);
        const auto sent = encode_dataset(dataset, *codec);

        const Bits payload = pack_codes(sent);
        const SessionReport session = run_session(payload, config.session_config(), config.seed);
        write_json_file(to_json(session), session_report_path(options.out));

        out << "session: " << to_string(session.phase) << " after " << session.frames.size() << " frame(s)";
        if (!session.frames.empty())
            out << ", last qber_hat " << session.frames.back().qber_hat;
        out << '\n';

        if (session.phase == Phase::Aborted) {
            err << "eavesdropping detected: QBER above threshold " << config.threshold << ", session aborted\n";
            return kExitAborted;
        }
        if (session.paused) {
            err << "session paused: key pool exhausted (" << session.pool.available << " bits left)\n";
            return kExitError;
        }

        const auto received = unpack_codes(session.delivered, sent);
        RunOptions run_options;
        run_options.raw_time_ms = config.raw_time_ms;
        const TransmissionReport report =
            assemble_report(dataset, received, *codec, config.timing, config.batch_size, run_options);
        emit_report(report, options.out, options.format);

        out << "n=" << report.n << " clouds=" << dataset.size() << " rounds=" << report.rounds
            << " total_time_ms=" << report.total_time_ms << " mean_cd=" << report.mean_cd
            << " edr_kbps=" << kbps(report.edr_bps) << " rte=" << report.rte << '\n';
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
    }
    return kExitError;
}

int cmd_capacity(const CapacityOptions& options, std::ostream& out, std::ostream& err, const EnvLookup& env) {
    try {
        ChannelParams channel;
        CapacityConfig capacity;
        if (options.config) {
            const RunConfig config = load_config(*options.config, env);
            channel = config.channel;
            capacity = config.capacity;
        }
        capacity.mode = options.mode;
        if (options.eve_error)
            capacity.eve_error = options.eve_error;

        std::vector<TransmissionReport> reports;
        for (const auto& path : options.reports)
            reports.push_back(read_report_json(path));
        if (options.dry_run) {
            out << "config ok\n";
            return kExitOk;
        }

        const CapacityLines lines = capacity_lines(channel, capacity);
        out << "mode " << to_string(capacity.mode) << '\n';
        out << "shannon_kbps " << kbps(lines.shannon_bps) << '\n';
        out << "wyner_kbps " << kbps(lines.secrecy_bps) << '\n';
        for (const auto& r : reports) {
            out << "n=" << r.n << " edr_kbps=" << kbps(r.edr_bps) << " wyner "
                << (r.edr_bps > lines.secrecy_bps ? '>' : '<') << " shannon "
                << (r.edr_bps > lines.shannon_bps ? '>' : '<') << '\n';
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
    }
    return kExitError;
}

int cmd_calibrate(const CalibrateOptions& options, std::ostream& out, std::ostream& err) {
    try {
        const auto rows = read_timing_table(options.table);
        if (rows.size() < 2)
            throw CalibrationError(options.table.string() + ": need at least two rows");
        if (options.dry_run) {
            out << "table ok: " << rows.size() << " rows\n";
            return kExitOk;
        }
        const CalibrationResult fit = calibrate_timing(rows, options.dataset_size, options.batch_size);
        write_json_file(to_json(fit), options.out);

        out << "rounds " << fit.rounds << '\n';
        out << "per_round_overhead_ms " << fit.model.per_round_overhead_ms << '\n';
        out << "effective_rate_bps " << fit.model.effective_rate_bps << '\n';
        for (std::size_t i = 0; i < rows.size(); ++i)
            out << "residual n=" << rows[i].n << " ms_per_round " << fit.residuals_ms[i] << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
    }
    return kExitError;
}

int cmd_codes_validate(const CodesValidateOptions& options, std::ostream& out, std::ostream& err) {
    try {
        if (!std::filesystem::is_regular_file(options.archive))
            throw IoError("archive not found: " + options.archive.string());
        if (options.dry_run) {
            out << "archive present: " << options.archive.string() << '\n';
            return kExitOk;
        }
        const auto records = load_external_codes(options.archive);
        out << records.size() << " record(s) valid\n";
        for (const auto& r : records)
            out << r.id << " n=" << r.code.size() << " scale=" << r.scale << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
    }
    return kExitError;
}

int run(int argc, char** argv) {
    CLI::App app{"Quantum semantic communication simulator for point clouds"};
    app.require_subcommand(1);

    SimulateOptions sim;
    std::string sim_format = "json";
    auto* simulate = app.add_subcommand("simulate", "Encode a dataset, send it over a STIKE session and report");
    simulate->add_option("--config", sim.config, "Run configuration (JSON)")->required();
    simulate->add_option("--seed", sim.seed, "Override the configured seed");
    simulate->add_option("--out", sim.out, "Report path");
    simulate->add_option("--format", sim_format, "Report format")->check(CLI::IsMember({"json", "csv"}));
    simulate->add_flag("--dry-run", sim.dry_run, "Validate the configuration and exit");

    CapacityOptions cap;
    std::string cap_config;
    std::string cap_mode = "reference";
    auto* capacity = app.add_subcommand("capacity", "Print Shannon and Wyner capacity lines");
    capacity->add_option("--config", cap_config, "Run configuration (JSON)");
    capacity->add_option("--mode", cap_mode, "reference or model")->check(CLI::IsMember({"reference", "model"}));
    capacity->add_option("--eve-error", cap.eve_error, "Eavesdropper bit error rate (model mode)");
    capacity->add_option("--report", cap.reports, "Transmission report(s) to compare");
    capacity->add_flag("--dry-run", cap.dry_run, "Validate inputs and exit");

    CalibrateOptions cal;
    auto* calibrate = app.add_subcommand("calibrate", "Fit the affine round-time model to a timing table");
    calibrate->add_option("--table", cal.table, "CSV with header n,total_time_ms")->required();
    calibrate->add_option("--dataset-size", cal.dataset_size, "Clouds in the measured run");
    calibrate->add_option("--batch-size", cal.batch_size, "Batch size of the measured run");
    calibrate->add_option("--out", cal.out, "Timing model output path");
    calibrate->add_flag("--dry-run", cal.dry_run, "Validate the table and exit");

    CodesValidateOptions codes;
    auto* validate_cmd = app.add_subcommand("codes-validate", "Check a QSCC code archive");
    validate_cmd->add_option("--archive", codes.archive, "Archive path")->required();
    validate_cmd->add_flag("--dry-run", codes.dry_run, "Only check that the archive exists");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitError;
    }

    if (simulate->parsed()) {
        sim.format = parse_report_format(sim_format);
        return cmd_simulate(sim, std::cout, std::cerr);
    }
    if (capacity->parsed()) {
        if (!cap_config.empty())
            cap.config = cap_config;
        cap.mode = parse_capacity_mode(cap_mode);
        return cmd_capacity(cap, std::cout, std::cerr);
    }
    if (calibrate->parsed())
        return cmd_calibrate(cal, std::cout, std::cerr);
    return cmd_codes_validate(codes, std::cout, std::cerr);
}

}  // namespace qsc::cli
