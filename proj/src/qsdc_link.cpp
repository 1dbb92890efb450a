#include "qsc/qsdc_link.hpp"

#include "qsc/errors.hpp"
#include "qsc/random.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace qsc {

namespace {

void require(bool ok, const char* field, const char* what) {
    if (!ok)
        throw ValidationError(std::string("channel.") + field + ": " + what);
}

bool is_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

}  // namespace

void validate(const ChannelParams& p) {
    require(std::isfinite(p.distance_km) && p.distance_km >= 0.0, "distance_km", "must be finite and >= 0");
    require(std::isfinite(p.loss_db_per_km) && p.loss_db_per_km >= 0.0, "loss_db_per_km", "must be finite and >= 0");
    require(std::isfinite(p.rep_rate_hz) && p.rep_rate_hz > 0.0, "rep_rate_hz", "must be > 0");
    require(std::isfinite(p.pulse_width_s) && p.pulse_width_s >= 0.0, "pulse_width_s", "must be >= 0");
    require(std::isfinite(p.mu_signal) && p.mu_signal >= 0.0, "mu_signal", "must be >= 0");
    require(std::isfinite(p.mu_decoy1) && p.mu_decoy1 >= 0.0, "mu_decoy1", "must be >= 0");
    require(std::isfinite(p.mu_decoy2) && p.mu_decoy2 >= 0.0, "mu_decoy2", "must be >= 0");
    require(is_probability(p.det_efficiency), "det_efficiency", "must lie in [0, 1]");
    require(is_probability(p.dark_count_per_gate), "dark_count_per_gate", "must lie in [0, 1]");
    require(p.spread_ratio >= 1, "spread_ratio", "must be >= 1");
    require(p.fec_ratio >= 1, "fec_ratio", "must be >= 1");
    require(is_probability(p.misalignment_error), "misalignment_error", "must lie in [0, 1]");
    require(std::isfinite(p.duty_factor) && p.duty_factor > 0.0 && p.duty_factor <= 1.0, "duty_factor",
            "must lie in (0, 1]");
}

double transmittance(const ChannelParams& params) {
    if (params.distance_km < 0.0)
        throw ArgumentError("transmittance: negative distance");
    return std::pow(10.0, -params.distance_km * params.loss_db_per_km / 10.0);
}

double photon_click_probability(double mu, const ChannelParams& params) {
    if (mu < 0.0)
        throw ArgumentError("mean photon number must be >= 0");
    return -std::expm1(-mu * transmittance(params) * params.det_efficiency);
}

double click_probability(double mu, const ChannelParams& params) {
    if (mu < 0.0)
        throw ArgumentError("mean photon number must be >= 0");
    const double no_photon = std::exp(-mu * transmittance(params) * params.det_efficiency);
    return 1.0 - (1.0 - params.dark_count_per_gate) * no_photon;
}

double qber_model(const ChannelParams& params) {
    const double p_dark = params.dark_count_per_gate;
    const double p_photon = photon_click_probability(params.mu_signal, params);
    const double total = p_dark + p_photon;
    if (!(total > 0.0))
        throw DegenerateChannelError("qber_model: channel produces no clicks");
    return (0.5 * p_dark + params.misalignment_error * p_photon) / total;
}

double detection_rate(const ChannelParams& params) {
    return params.rep_rate_hz * click_probability(params.mu_signal, params) * params.duty_factor;
}

double info_rate(const ChannelParams& params) {
    const double fec = params.fec_ratio;
    return detection_rate(params) / params.spread_ratio * fec / (fec + 1.0);
}

LinkBudget link_budget(const ChannelParams& params) {
    LinkBudget b;
    b.transmittance = transmittance(params);
    b.p_click_signal = click_probability(params.mu_signal, params);
    b.p_dark = params.dark_count_per_gate;
    b.qber = qber_model(params);
    b.raw_detection_rate_hz = detection_rate(params);
    b.info_rate_bps = info_rate(params);
    return b;
}

LinkCalibration calibrate_link(const ChannelParams& params, double target_qber, double target_rate_bps) {
    const double p_dark = params.dark_count_per_gate;
    const double p_photon = photon_click_probability(params.mu_signal, params);
    if (!(p_photon > 0.0))
        throw CalibrationError("calibrate_link: no photon clicks, misalignment is unidentifiable");

    LinkCalibration cal;
    // Linear in the misalignment error once the click mix is fixed.
    cal.misalignment_error = (target_qber * (p_dark + p_photon) - 0.5 * p_dark) / p_photon;
    if (cal.misalignment_error < 0.0 || cal.misalignment_error > 1.0)
        throw CalibrationError("calibrate_link: target QBER unreachable (misalignment " +
                               std::to_string(cal.misalignment_error) + ")");

    ChannelParams full_duty = params;
    full_duty.duty_factor = 1.0;
    const double ceiling = info_rate(full_duty);
    cal.duty_factor = target_rate_bps / ceiling;
    if (!(cal.duty_factor > 0.0) || cal.duty_factor > 1.0)
        throw CalibrationError("calibrate_link: target rate " + std::to_string(target_rate_bps) +
                               " bps exceeds the full-duty rate " + std::to_string(ceiling) + " bps");
    return cal;
}

double binary_entropy(double p) {
    if (!(p >= 0.0 && p <= 1.0))
        throw ArgumentError("binary_entropy: p must lie in [0, 1]");
    if (p == 0.0 || p == 1.0)
        return 0.0;
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

double inverse_binary_entropy(double h) {
    if (!(h >= 0.0 && h <= 1.0))
        throw ArgumentError("inverse_binary_entropy: h must lie in [0, 1]");
    double lo = 0.0;
    double hi = 0.5;
    for (int i = 0; i < 200 && hi - lo > 1e-16; ++i) {
        const double mid = 0.5 * (lo + hi);
        (binary_entropy(mid) < h ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

CapacityMode parse_capacity_mode(const std::string& text) {
    if (text == "reference")
        return CapacityMode::Reference;
    if (text == "model")
        return CapacityMode::Model;
    throw ArgumentError("unknown capacity mode '" + text + "' (expected reference or model)");
}

std::string to_string(CapacityMode mode) { return mode == CapacityMode::Reference ? "reference" : "model"; }

double eve_error_for_ratio(double qber, double ratio) {
    const double h_link = binary_entropy(qber);
    return inverse_binary_entropy(std::clamp((1.0 - h_link) * (1.0 - ratio), 0.0, 1.0));
}

CapacityLines capacity_lines(const ChannelParams& params, const CapacityConfig& config) {
    if (config.mode == CapacityMode::Reference)
        return {kReferenceShannonBps, kReferenceSecrecyBps};
    if (config.mode != CapacityMode::Model)
        throw ArgumentError("capacity_lines: unknown mode");

    const double qber = qber_model(params);
    const double eve = config.eve_error.value_or(
        eve_error_for_ratio(qber, kReferenceSecrecyBps / kReferenceShannonBps));
    const double r_det = detection_rate(params);
    const double h_link = binary_entropy(qber);
    CapacityLines lines;
    lines.shannon_bps = r_det * std::max(0.0, 1.0 - h_link);
    lines.secrecy_bps = r_det * std::max(0.0, 1.0 - h_link - binary_entropy(eve));
    return lines;
}

MonteCarloResult monte_carlo_gates(const ChannelParams& params, std::uint64_t gates, std::uint64_t seed,
                                   const IntensityMix& mix) {
    validate(params);
    const double mix_sum = mix.signal + mix.decoy1 + mix.decoy2;
    if (mix.signal < 0 || mix.decoy1 < 0 || mix.decoy2 < 0 || std::abs(mix_sum - 1.0) > 1e-12)
        throw ArgumentError("intensity mix fractions must be nonnegative and sum to 1");

    const double mus[3] = {params.mu_signal, params.mu_decoy1, params.mu_decoy2};
    double p_click[3];
    double p_dark_given_click[3];
    for (int i = 0; i < 3; ++i) {
        const double photon = photon_click_probability(mus[i], params);
        p_click[i] = click_probability(mus[i], params);
        const double denom = params.dark_count_per_gate + photon;
        p_dark_given_click[i] = denom > 0.0 ? params.dark_count_per_gate / denom : 0.0;
    }

    enum Lane : std::uint64_t { kIntensity = 1, kClick = 2, kSource = 3, kError = 4 };

    MonteCarloResult r;
    r.seed = seed;
    r.gates = gates;
    for (std::uint64_t g = 0; g < gates; ++g) {
        int which = 0;
        if (mix.signal < 1.0) {
            const double u = uniform_at(seed, kIntensity, g);
            which = u < mix.signal ? 0 : (u < mix.signal + mix.decoy1 ? 1 : 2);
        }
        if (which == 0)
            ++r.signal_gates;
        if (uniform_at(seed, kClick, g) >= p_click[which])
            continue;
        ++r.clicks;
        const bool dark = uniform_at(seed, kSource, g) < p_dark_given_click[which];
        const double p_err = dark ? 0.5 : params.misalignment_error;
        const bool error = uniform_at(seed, kError, g) < p_err;
        r.errors += error;
        if (which == 0) {
            ++r.signal_clicks;
            r.signal_errors += error;
        }
    }
    r.qber_hat = r.clicks ? static_cast<double>(r.errors) / static_cast<double>(r.clicks) : 0.0;
    if (r.signal_gates > 0) {
        const double fec = params.fec_ratio;
        r.rate_hat = params.rep_rate_hz * (static_cast<double>(r.signal_clicks) / static_cast<double>(r.signal_gates)) *
                     params.duty_factor / params.spread_ratio * fec / (fec + 1.0);
    }
    return r;
}

void write_csv_row(std::ostream& out, const MonteCarloResult& r) {
    const auto old = out.precision(17);
    out << r.seed << ',' << r.gates << ',' << r.clicks << ',' << r.errors << ',' << r.qber_hat << ','
        << r.rate_hat << '\n';
    out.precision(old);
}

}  // namespace qsc
