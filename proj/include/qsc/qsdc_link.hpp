#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace qsc {

/// Physical-layer constants of the decoy-state weak-coherent QSDC link.
///
/// Defaults describe a 50 km fiber at 0.2 dB/km, 1.25 GHz pulses, signal and
/// decoy intensities 0.6 / 0.2 / 0, a 20% efficient detector with 1.2e-6 dark
/// counts per gate, 1:192 spreading and 1:12 FEC. misalignment_error and
/// duty_factor are the values calibrate_link() solves for against a 3.31% QBER
/// and a 37.36 kbps information rate; they are frozen here so runs do not
/// depend on re-solving.
struct ChannelParams {
    double distance_km = 50.0;
    double loss_db_per_km = 0.2;
    double rep_rate_hz = 1.25e9;
    double pulse_width_s = 50e-12;
    double mu_signal = 0.6;
    double mu_decoy1 = 0.2;
    double mu_decoy2 = 0.0;
    double det_efficiency = 0.20;
    double dark_count_per_gate = 1.2e-6;
    std::uint32_t spread_ratio = 192;
    std::uint32_t fec_ratio = 12;
    double misalignment_error = 0.0330530293;
    double duty_factor = 0.5211214353;

    friend bool operator==(const ChannelParams&, const ChannelParams&) = default;
};

/// Throws ValidationError naming the offending field.
void validate(const ChannelParams& params);

inline constexpr double kReferenceQber = 0.0331;
inline constexpr double kReferenceInfoRateBps = 37'360.0;
inline constexpr double kReferenceShannonBps = 1'496'530.0;
inline constexpr double kReferenceSecrecyBps = 560'200.0;

/// 10^(-distance * loss / 10). Throws ArgumentError for a negative distance.
double transmittance(const ChannelParams& params);

/// Probability that a pulse of mean photon number mu produces a detection,
/// Poisson source with a threshold detector: 1 - (1 - dark) exp(-mu t eta).
double click_probability(double mu, const ChannelParams& params);

/// Photon-only part of the click probability, 1 - exp(-mu t eta).
double photon_click_probability(double mu, const ChannelParams& params);

/// (0.5 p_dark + e_mis p_photon) / (p_dark + p_photon) at the signal intensity.
/// Throws DegenerateChannelError when no clicks are possible.
double qber_model(const ChannelParams& params);

/// rep_rate * p_click * duty / spread * fec / (fec + 1), in bits per second.
double info_rate(const ChannelParams& params);

/// Post-duty detection rate before spreading and FEC, rep_rate * p_click * duty.
double detection_rate(const ChannelParams& params);

struct LinkBudget {
    double transmittance = 0.0;
    double p_click_signal = 0.0;
    double p_dark = 0.0;
    double qber = 0.0;
    double raw_detection_rate_hz = 0.0;
    double info_rate_bps = 0.0;
};

LinkBudget link_budget(const ChannelParams& params);

/// Solved values that pin the model to an observed operating point.
struct LinkCalibration {
    double misalignment_error = 0.0;
    double duty_factor = 0.0;
};

/// Solves qber_model(params) == target_qber for misalignment_error and
/// info_rate(params) == target_rate_bps for duty_factor. Throws
/// CalibrationError when either target is unreachable (e.g. duty > 1).
LinkCalibration calibrate_link(const ChannelParams& params, double target_qber = kReferenceQber,
                               double target_rate_bps = kReferenceInfoRateBps);

/// Binary entropy in bits; h(0) = h(1) = 0. Throws ArgumentError outside [0, 1].
double binary_entropy(double p);

/// Inverse of binary_entropy on [0, 0.5]. Throws ArgumentError outside [0, 1].
double inverse_binary_entropy(double h);

enum class CapacityMode { Reference, Model };

CapacityMode parse_capacity_mode(const std::string& text);
std::string to_string(CapacityMode mode);

struct CapacityConfig {
    CapacityMode mode = CapacityMode::Reference;
    /// Eavesdropper's bit error rate for the wiretap model. When unset, the
    /// value that reproduces the reference secrecy/Shannon ratio is used.
    std::optional<double> eve_error;
};

struct CapacityLines {
    double shannon_bps = 0.0;
    double secrecy_bps = 0.0;
};

/// Reference mode returns the fixed 1496.53 / 560.20 kbps lines. Model mode
/// computes R_det (1 - h(qber)) and R_det max(0, 1 - h(qber) - h(e_eve)).
CapacityLines capacity_lines(const ChannelParams& params, const CapacityConfig& config);

/// Eavesdropper error that makes the model's secrecy/Shannon ratio equal to
/// `ratio` at the given QBER.
double eve_error_for_ratio(double qber, double ratio);

/// Fractions of gates sent at each intensity; must sum to 1.
struct IntensityMix {
    double signal = 1.0;
    double decoy1 = 0.0;
    double decoy2 = 0.0;
};

struct MonteCarloResult {
    std::uint64_t seed = 0;
    std::uint64_t gates = 0;
    std::uint64_t clicks = 0;
    std::uint64_t errors = 0;
    double qber_hat = 0.0;
    double rate_hat = 0.0;  // info rate implied by the observed click fraction
    std::uint64_t signal_gates = 0;
    std::uint64_t signal_clicks = 0;
    std::uint64_t signal_errors = 0;
};

/// Per-gate Bernoulli simulation. Each draw is keyed by (seed, gate index), so
/// results do not depend on evaluation order or chunking.
MonteCarloResult monte_carlo_gates(const ChannelParams& params, std::uint64_t gates, std::uint64_t seed,
                                   const IntensityMix& mix = {});

inline constexpr const char* kMonteCarloCsvHeader = "seed,gates,clicks,errors,qber_hat,rate_hat";
void write_csv_row(std::ostream& out, const MonteCarloResult& result);

}  // namespace qsc
