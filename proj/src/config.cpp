#include "qsc/config.hpp"

#include "qsc/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

namespace qsc {

EnvLookup process_environment() {
    return [](const std::string& name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name.c_str()))
            return std::string(v);
        return std::nullopt;
    };
}

SessionConfig RunConfig::session_config() const {
    SessionConfig s;
    s.authenticated = authenticated;
    s.threshold = threshold;
    s.frame_bits = frame_bits;
    s.check_fraction = check_fraction;
    s.initial_key_bits = initial_key_bits;
    s.residual_ber = residual_ber;
    s.link = channel;
    s.eve.fraction = eve_fraction;
    return s;
}

namespace {

using nlohmann::json;

const std::set<std::string> kTopLevelKeys{
    "channel",        "codec",          "timing",       "timing_table", "calibration_dataset_size",
    "batch_size",     "dataset_dir",    "seed",         "threshold",    "eve_fraction",
    "raw_time_ms",    "capacity",       "session",
};

const std::set<std::string> kScalarOverrides{
    "timing",    "timing_table", "calibration_dataset_size", "batch_size", "dataset_dir",
    "seed",      "threshold",    "eve_fraction",            "raw_time_ms",
};

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& prefix) {
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.count(key))
            throw ConfigError(prefix + key, "unknown field");
    }
}

std::string path_of(const std::string& prefix, const std::string& key) { return prefix + key; }

double get_number(const json& obj, const std::string& key, const std::string& prefix, double fallback) {
    if (!obj.contains(key))
        return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number())
        throw ConfigError(path_of(prefix, key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d))
        throw ConfigError(path_of(prefix, key), "must be finite");
    return d;
}

std::uint64_t get_unsigned(const json& obj, const std::string& key, const std::string& prefix,
                           std::uint64_t fallback) {
    if (!obj.contains(key))
        return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        throw ConfigError(path_of(prefix, key), "expected a nonnegative integer");
    return v.get<std::uint64_t>();
}

bool get_bool(const json& obj, const std::string& key, const std::string& prefix, bool fallback) {
    if (!obj.contains(key))
        return fallback;
    if (!obj.at(key).is_boolean())
        throw ConfigError(path_of(prefix, key), "expected a boolean");
    return obj.at(key).get<bool>();
}

std::string get_string(const json& obj, const std::string& key, const std::string& prefix) {
    if (!obj.at(key).is_string())
        throw ConfigError(path_of(prefix, key), "expected a string");
    return obj.at(key).get<std::string>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

ChannelParams parse_channel(const json& j) {
    const std::string pre = "channel.";
    if (!j.is_object())
        throw ConfigError("channel", "expected an object");
    reject_unknown(j,
                   {"distance_km", "loss_db_per_km", "rep_rate_hz", "pulse_width_s", "mu_signal", "mu_decoy1",
                    "mu_decoy2", "det_efficiency", "dark_count_per_gate", "spread_ratio", "fec_ratio",
                    "misalignment_error", "duty_factor"},
                   pre);
    ChannelParams c;
    c.distance_km = get_number(j, "distance_km", pre, c.distance_km);
    c.loss_db_per_km = get_number(j, "loss_db_per_km", pre, c.loss_db_per_km);
    c.rep_rate_hz = get_number(j, "rep_rate_hz", pre, c.rep_rate_hz);
    c.pulse_width_s = get_number(j, "pulse_width_s", pre, c.pulse_width_s);
    c.mu_signal = get_number(j, "mu_signal", pre, c.mu_signal);
    c.mu_decoy1 = get_number(j, "mu_decoy1", pre, c.mu_decoy1);
    c.mu_decoy2 = get_number(j, "mu_decoy2", pre, c.mu_decoy2);
    c.det_efficiency = get_number(j, "det_efficiency", pre, c.det_efficiency);
    c.dark_count_per_gate = get_number(j, "dark_count_per_gate", pre, c.dark_count_per_gate);
    const auto spread = get_unsigned(j, "spread_ratio", pre, c.spread_ratio);
    const auto fec = get_unsigned(j, "fec_ratio", pre, c.fec_ratio);
    if (spread < 1 || spread > 0xFFFFFFFFu)
        throw ConfigError("channel.spread_ratio", "must be >= 1");
    if (fec < 1 || fec > 0xFFFFFFFFu)
        throw ConfigError("channel.fec_ratio", "must be >= 1");
    c.spread_ratio = static_cast<std::uint32_t>(spread);
    c.fec_ratio = static_cast<std::uint32_t>(fec);
    c.misalignment_error = get_number(j, "misalignment_error", pre, c.misalignment_error);
    c.duty_factor = get_number(j, "duty_factor", pre, c.duty_factor);
    return c;
}

CodecDescriptor parse_codec(const json& j, const std::filesystem::path& base) {
    const std::string pre = "codec.";
    if (!j.is_object())
        throw ConfigError("codec", "expected an object");
    reject_unknown(j, {"kind", "n", "source", "reconstructions"}, pre);
    CodecDescriptor d;
    if (j.contains("kind")) {
        const auto kind = get_string(j, "kind", pre);
        if (kind == "baseline-fps")
            d.kind = CodecKind::BaselineFps;
        else if (kind == "external-neural")
            d.kind = CodecKind::ExternalNeural;
        else
            throw ConfigError("codec.kind", "expected baseline-fps or external-neural, got '" + kind + "'");
    }
    d.n = get_unsigned(j, "n", pre, d.n);
    if (d.n == 0)
        throw ConfigError("codec.n", "must be >= 1");
    if (d.kind == CodecKind::BaselineFps && d.n % 3 != 0)
        throw ConfigError("codec.n", "baseline-fps requires a multiple of 3");
    if (j.contains("source") && !j.at("source").is_null())
        d.source = resolve(base, get_string(j, "source", pre));
    if (j.contains("reconstructions") && !j.at("reconstructions").is_null())
        d.reconstructions = resolve(base, get_string(j, "reconstructions", pre));
    if (d.kind == CodecKind::ExternalNeural) {
        if (!d.source)
            throw ConfigError("codec.source", "required for external-neural codecs");
        if (!std::filesystem::is_regular_file(*d.source))
            throw ConfigError("codec.source", "file not found: " + d.source->string());
        if (d.reconstructions && !std::filesystem::is_directory(*d.reconstructions))
            throw ConfigError("codec.reconstructions", "directory not found: " + d.reconstructions->string());
    }
    return d;
}

/// Interprets an override value as JSON when it parses, otherwise as a plain string.
json parse_override(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return json(text);
    }
}

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return s;
}

}  // namespace

TimingModel timing_from_json(const json& j, const std::string& field) {
    const std::string pre = field + ".";
    if (!j.is_object())
        throw ConfigError(field, "expected an object");
    TimingModel t;
    if (!j.contains("per_round_overhead_ms"))
        throw ConfigError(pre + "per_round_overhead_ms", "missing");
    if (!j.contains("effective_rate_bps"))
        throw ConfigError(pre + "effective_rate_bps", "missing");
    t.per_round_overhead_ms = get_number(j, "per_round_overhead_ms", pre, 0.0);
    t.effective_rate_bps = get_number(j, "effective_rate_bps", pre, 0.0);
    t.encode_ms = get_number(j, "encode_ms", pre, 0.0);
    t.decode_ms = get_number(j, "decode_ms", pre, 0.0);
    try {
        validate(t);
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        const auto colon = msg.find(':');
        throw ConfigError(pre + msg.substr(std::string("timing.").size(), colon - std::string("timing.").size()),
                          msg.substr(colon + 2));
    }
    return t;
}

RunConfig parse_config(const json& input, const std::filesystem::path& base_dir, const EnvLookup& env) {
    if (!input.is_object())
        throw ConfigError("$", "configuration must be a JSON object");
    json j = input;
    reject_unknown(j, kTopLevelKeys, "");

    if (env) {
        for (const auto& key : kScalarOverrides) {
            if (auto v = env("QSC_" + upper(key)))
                j[key] = parse_override(*v);
        }
    }

    RunConfig c;
    if (j.contains("channel"))
        c.channel = parse_channel(j.at("channel"));
    try {
        validate(c.channel);
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        const auto colon = msg.find(':');
        throw ConfigError(msg.substr(0, colon), msg.substr(colon + 2));
    }

    if (j.contains("codec"))
        c.codec = parse_codec(j.at("codec"), base_dir);

    c.batch_size = get_unsigned(j, "batch_size", "", c.batch_size);
    if (c.batch_size == 0)
        throw ConfigError("batch_size", "must be >= 1");

    if (!j.contains("dataset_dir"))
        throw ConfigError("dataset_dir", "missing");
    c.dataset_dir = resolve(base_dir, get_string(j, "dataset_dir", ""));
    if (!std::filesystem::is_directory(c.dataset_dir))
        throw ConfigError("dataset_dir", "directory not found: " + c.dataset_dir.string());

    c.seed = get_unsigned(j, "seed", "", c.seed);
    c.threshold = get_number(j, "threshold", "", c.threshold);
    if (c.threshold < 0.0 || c.threshold > 0.5)
        throw ConfigError("threshold", "must lie in [0, 0.5]");
    c.eve_fraction = get_number(j, "eve_fraction", "", c.eve_fraction);
    if (c.eve_fraction < 0.0 || c.eve_fraction > 1.0)
        throw ConfigError("eve_fraction", "must lie in [0, 1]");
    if (j.contains("raw_time_ms") && !j.at("raw_time_ms").is_null()) {
        c.raw_time_ms = get_number(j, "raw_time_ms", "", 0.0);
        if (!(*c.raw_time_ms > 0.0))
            throw ConfigError("raw_time_ms", "must be > 0");
    }

    if (j.contains("capacity")) {
        const auto& cap = j.at("capacity");
        if (!cap.is_object())
            throw ConfigError("capacity", "expected an object");
        reject_unknown(cap, {"mode", "eve_error"}, "capacity.");
        if (cap.contains("mode")) {
            try {
                c.capacity.mode = parse_capacity_mode(get_string(cap, "mode", "capacity."));
            } catch (const ArgumentError& e) {
                throw ConfigError("capacity.mode", e.what());
            }
        }
        if (cap.contains("eve_error") && !cap.at("eve_error").is_null()) {
            const double e = get_number(cap, "eve_error", "capacity.", 0.0);
            if (e < 0.0 || e > 1.0)
                throw ConfigError("capacity.eve_error", "must lie in [0, 1]");
            c.capacity.eve_error = e;
        }
    }

    if (j.contains("session")) {
        const auto& s = j.at("session");
        const std::string pre = "session.";
        if (!s.is_object())
            throw ConfigError("session", "expected an object");
        reject_unknown(s, {"authenticated", "frame_bits", "check_fraction", "initial_key_bits", "residual_ber"}, pre);
        c.authenticated = get_bool(s, "authenticated", pre, c.authenticated);
        c.frame_bits = get_unsigned(s, "frame_bits", pre, c.frame_bits);
        c.check_fraction = get_number(s, "check_fraction", pre, c.check_fraction);
        c.initial_key_bits = get_unsigned(s, "initial_key_bits", pre, c.initial_key_bits);
        c.residual_ber = get_number(s, "residual_ber", pre, c.residual_ber);
    }
    validate(c.session_config());

    // Timing: explicit object, a model file path, "calibrate", or derived from the link.
    if (!j.contains("timing") || j.at("timing").is_null()) {
        c.timing = TimingModel{0.0, info_rate(c.channel), 0.0, 0.0};
    } else if (j.at("timing").is_object()) {
        c.timing = timing_from_json(j.at("timing"), "timing");
    } else if (j.at("timing").is_string()) {
        const auto value = j.at("timing").get<std::string>();
        if (value == "calibrate") {
            if (!j.contains("timing_table"))
                throw ConfigError("timing_table", "required when timing is \"calibrate\"");
            TimingCalibrationSource src;
            src.table = resolve(base_dir, get_string(j, "timing_table", ""));
            if (!std::filesystem::is_regular_file(src.table))
                throw ConfigError("timing_table", "file not found: " + src.table.string());
            src.dataset_size = get_unsigned(j, "calibration_dataset_size", "", src.dataset_size);
            if (src.dataset_size == 0)
                throw ConfigError("calibration_dataset_size", "must be >= 1");
            try {
                const auto rows = read_timing_table(src.table);
                c.timing = calibrate_timing(rows, src.dataset_size, c.batch_size).model;
            } catch (const Error& e) {
                throw ConfigError("timing_table", e.what());
            }
            c.timing_source = src;
        } else {
            const auto file = resolve(base_dir, value);
            std::ifstream in(file);
            if (!in)
                throw ConfigError("timing", "model file not found: " + file.string());
            json model;
            try {
                in >> model;
            } catch (const json::exception& e) {
                throw ConfigError("timing", file.string() + ": " + e.what());
            }
            c.timing = timing_from_json(model, "timing");
        }
    } else {
        throw ConfigError("timing", "expected an object, \"calibrate\", or a model file path");
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path, const EnvLookup& env) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("--config", "cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("$", path.string() + ": " + e.what());
    }
    return parse_config(j, path.parent_path(), env);
}

json to_json(const RunConfig& c) {
    json channel{{"distance_km", c.channel.distance_km},
                 {"loss_db_per_km", c.channel.loss_db_per_km},
                 {"rep_rate_hz", c.channel.rep_rate_hz},
                 {"pulse_width_s", c.channel.pulse_width_s},
                 {"mu_signal", c.channel.mu_signal},
                 {"mu_decoy1", c.channel.mu_decoy1},
                 {"mu_decoy2", c.channel.mu_decoy2},
                 {"det_efficiency", c.channel.det_efficiency},
                 {"dark_count_per_gate", c.channel.dark_count_per_gate},
                 {"spread_ratio", c.channel.spread_ratio},
                 {"fec_ratio", c.channel.fec_ratio},
                 {"misalignment_error", c.channel.misalignment_error},
                 {"duty_factor", c.channel.duty_factor}};
    json codec{{"kind", c.codec.kind == CodecKind::BaselineFps ? "baseline-fps" : "external-neural"},
               {"n", c.codec.n}};
    if (c.codec.source)
        codec["source"] = c.codec.source->string();
    if (c.codec.reconstructions)
        codec["reconstructions"] = c.codec.reconstructions->string();
    json out{{"channel", channel},
             {"codec", codec},
             {"timing",
              {{"per_round_overhead_ms", c.timing.per_round_overhead_ms},
               {"effective_rate_bps", c.timing.effective_rate_bps},
               {"encode_ms", c.timing.encode_ms},
               {"decode_ms", c.timing.decode_ms}}},
             {"batch_size", c.batch_size},
             {"dataset_dir", c.dataset_dir.string()},
             {"seed", c.seed},
             {"threshold", c.threshold},
             {"eve_fraction", c.eve_fraction},
             {"session",
              {{"authenticated", c.authenticated},
               {"frame_bits", c.frame_bits},
               {"check_fraction", c.check_fraction},
               {"initial_key_bits", c.initial_key_bits},
               {"residual_ber", c.residual_ber}}}};
    json cap{{"mode", to_string(c.capacity.mode)}};
    if (c.capacity.eve_error)
        cap["eve_error"] = *c.capacity.eve_error;
    out["capacity"] = cap;
    if (c.raw_time_ms)
        out["raw_time_ms"] = *c.raw_time_ms;
    return out;
}

std::vector<TableRow> read_timing_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::vector<TableRow> rows;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos)
            continue;
        if (!header_seen) {
            if (line != "n,total_time_ms")
                throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                                 ": expected header \"n,total_time_ms\"");
            header_seen = true;
            continue;
        }
        const auto comma = line.find(',');
        TableRow row;
        const char* begin = line.data();
        const char* end = line.data() + line.size();
        bool ok = comma != std::string::npos;
        if (ok) {
            auto [p1, e1] = std::from_chars(begin, begin + comma, row.n);
            auto [p2, e2] = std::from_chars(begin + comma + 1, end, row.total_time_ms);
            ok = e1 == std::errc{} && p1 == begin + comma && e2 == std::errc{} && p2 == end &&
                 std::isfinite(row.total_time_ms);
        }
        if (!ok)
            throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": malformed row \"" + line + "\"");
        rows.push_back(row);
    }
    if (!header_seen)
        throw ParseError(path.string() + ": line 1: missing header");
    return rows;
}

json to_json(const CalibrationResult& r) {
    return {{"per_round_overhead_ms", r.model.per_round_overhead_ms},
            {"effective_rate_bps", r.model.effective_rate_bps},
            {"encode_ms", r.model.encode_ms},
            {"decode_ms", r.model.decode_ms},
            {"intercept_ms", r.intercept_ms},
            {"slope_ms_per_bit", r.slope_ms_per_bit},
            {"rounds", r.rounds},
            {"residuals_ms", r.residuals_ms}};
}

}  // namespace qsc
