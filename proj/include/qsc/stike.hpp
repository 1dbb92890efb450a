#pragma once

#include "qsc/qsdc_link.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace qsc {

/// One bit per element, values 0 or 1.
using Bits = std::vector<std::uint8_t>;

/// Half-open range [begin, end) of the key stream handed to one encryption.
struct KeySegment {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const noexcept { return end - begin; }
};

/// Inventory of shared secret bits. Key material is consumed strictly in
/// stream order, so no bit is ever handed out twice; distilled bits are
/// appended to the end of the stream.
///
/// Ledger: initial + distilled == available + consumed.
class KeyPool {
public:
    KeyPool() = default;
    explicit KeyPool(Bits preshared);

    std::size_t initial_bits() const noexcept { return initial_; }
    std::size_t consumed_bits() const noexcept { return consumed_; }
    std::size_t distilled_bits() const noexcept { return distilled_; }
    std::size_t available_bits() const noexcept { return stream_.size() - consumed_; }

    /// Hands out the next `count` bits. Throws KeyExhaustedError without
    /// consuming anything when fewer are available.
    std::pair<Bits, KeySegment> take(std::size_t count);

    /// Credits freshly distilled key.
    void deposit_distilled(std::span<const std::uint8_t> bits);

    /// Adds out-of-band preshared material (e.g. to resume a paused session).
    void top_up(std::span<const std::uint8_t> bits);

    const std::vector<KeySegment>& segments() const noexcept { return segments_; }

    bool ledger_balanced() const noexcept { return initial_ + distilled_ == available_bits() + consumed_; }

    /// True when every handed-out segment starts at or after the end of the previous one.
    bool segments_disjoint() const noexcept;

private:
    Bits stream_;
    std::size_t initial_ = 0;
    std::size_t consumed_ = 0;
    std::size_t distilled_ = 0;
    std::vector<KeySegment> segments_;
};

struct OtpResult {
    Bits output;
    KeySegment segment;
};

/// XORs the payload with the next |payload| key bits. Throws KeyExhaustedError
/// when the pool is short; the pool is left untouched in that case.
OtpResult otp_encrypt(std::span<const std::uint8_t> payload, KeyPool& pool);

/// Identical operation on the receiver's copy of the pool.
inline OtpResult otp_decrypt(std::span<const std::uint8_t> ciphertext, KeyPool& pool) {
    return otp_encrypt(ciphertext, pool);
}

// --- framing and transmission --------------------------------------------------

struct Frame {
    std::uint64_t sequence_no = 0;
    Bits payload_bits;
    Bits check_bits;
    /// Wire positions of the check bits, ascending; payload occupies the rest.
    std::vector<std::size_t> check_positions;
    bool encrypted = false;

    std::size_t wire_length() const noexcept { return payload_bits.size() + check_bits.size(); }
};

/// Builds a frame with `check_count` PRF-chosen check positions and PRF check values.
Frame make_frame(std::uint64_t sequence_no, Bits payload, std::size_t check_count, std::uint64_t seed,
                 bool encrypted);

/// Intercept-resend eavesdropper acting on a fraction of the transmitted bits.
struct EveModel {
    double fraction = 0.0;
};

/// Error rate seen by the receiver: q (1 - f) + f (q (1 - 1/4) + (1 - q) / 4).
double effective_qber(double q_link, double eve_fraction);

enum class Phase { Idle, Authenticated, Transmitting, Aborted, Completed };

std::string to_string(Phase phase);
Phase parse_phase(const std::string& text);

struct SessionState {
    Phase phase = Phase::Idle;
    std::vector<double> qber_estimates;
    double threshold = 0.12;
};

/// Idle -> Authenticated, only when the pre-authentication flag is set.
SessionState authenticate(SessionState state, bool pre_authenticated);
/// Authenticated -> Transmitting.
SessionState begin_transmission(SessionState state);
/// Transmitting -> Completed.
SessionState complete(SessionState state);

struct TransmitResult {
    Frame received;
    double qber_hat = 0.0;
};

/// Flips each wire bit independently with effective_qber(qber_model(link), eve)
/// and estimates the QBER from the disclosed check bits only.
/// Throws ProtocolStateError unless the session is Transmitting.
TransmitResult transmit_frame(const SessionState& state, const Frame& frame, const ChannelParams& link,
                              const EveModel& eve, std::uint64_t seed);

/// Appends the estimate; aborts when qber_hat > threshold (qber_hat == threshold is accepted).
SessionState qber_gate(SessionState state, double qber_hat);

/// Bits credited after an accepted frame: floor(|payload| max(0, 1 - 2 h(qber_hat))).
std::size_t distill_key(const SessionState& state, std::size_t payload_bits, double qber_hat);

// --- session ------------------------------------------------------------------

struct SessionConfig {
    bool authenticated = true;
    double threshold = 0.12;
    std::size_t frame_bits = 65'536;
    /// Fraction of each frame's nominal size disclosed for QBER estimation.
    double check_fraction = 1.0 / 16.0;
    std::size_t initial_key_bits = 1u << 22;
    /// Bit error rate left after FEC on accepted frames.
    double residual_ber = 0.0;
    ChannelParams link;
    EveModel eve;

    std::size_t check_bits_per_frame() const;
    std::size_t payload_bits_per_frame() const;
};

/// Throws ConfigError naming the offending field.
void validate(const SessionConfig& config);

struct FrameRecord {
    std::uint64_t seq = 0;
    double qber_hat = 0.0;
    bool accepted = false;
    std::size_t distilled_bits = 0;
    KeySegment key;
};

struct PoolLedger {
    std::size_t initial = 0;
    std::size_t consumed = 0;
    std::size_t distilled = 0;
    std::size_t available = 0;

    friend bool operator==(const PoolLedger&, const PoolLedger&) = default;
};

struct SessionReport {
    Phase phase = Phase::Idle;
    /// Set when the session stopped for lack of key; it can be resumed.
    bool paused = false;
    std::vector<FrameRecord> frames;
    PoolLedger pool;
    std::string payload_sha256;  // of the payload delivered to the receiver
    Bits delivered;
    /// Ledger or key-reuse violations observed after each frame.
    std::size_t ledger_violations = 0;
};

/// Sender and receiver ends of one STIKE session. Single owner, mutated sequentially.
class StikeSession {
public:
    StikeSession(SessionConfig config, std::uint64_t seed);

    /// Runs frames until the payload is delivered, the session aborts, or key runs out.
    const SessionReport& run(std::span<const std::uint8_t> payload);

    /// Adds preshared key to both ends and continues a paused session.
    const SessionReport& resume(std::size_t extra_key_bits);

    const SessionReport& report() const noexcept { return report_; }
    const SessionState& state() const noexcept { return state_; }
    const KeyPool& sender_pool() const noexcept { return alice_; }
    const KeyPool& receiver_pool() const noexcept { return bob_; }

private:
    void drive();
    void record_ledger();

    SessionConfig config_;
    std::uint64_t seed_;
    SessionState state_;
    KeyPool alice_;
    KeyPool bob_;
    Bits payload_;
    std::size_t next_offset_ = 0;
    std::uint64_t next_seq_ = 0;
    std::size_t topups_ = 0;
    SessionReport report_;
};

/// Authenticate, encrypt, transmit, check, distill for every frame of the payload.
SessionReport run_session(std::span<const std::uint8_t> payload, const SessionConfig& config, std::uint64_t seed);

/// Hex SHA-256 of the bits packed MSB-first into bytes (last byte zero-padded).
std::string sha256_hex(std::span<const std::uint8_t> bits);

/// {phase, paused, frames: [{seq, qber_hat, accepted, distilled_bits}],
///  pool: {initial, consumed, distilled, available}, payload_sha256}
nlohmann::json to_json(const SessionReport& report);

}  // namespace qsc
