#include "qsc/stike.hpp"

#include "qsc/errors.hpp"
#include "qsc/random.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <memory>

namespace qsc {

namespace {

// Stream identifiers for the keyed generators.
enum Lane : std::uint64_t {
    kPreshared = 0x70736b,
    kTopUp = 0x746f70,
    kCheckPositions = 1,
    kCheckValues = 2,
    kChannelFlips = 3,
    kResidual = 4,
    kDistilled = 5,
};

std::uint64_t frame_stream(std::uint64_t seq, Lane lane) { return mix64(seq) ^ (static_cast<std::uint64_t>(lane) << 56); }

Bits random_bits(std::size_t count, std::uint64_t seed, std::uint64_t stream) {
    CounterRng rng(seed, stream);
    Bits bits(count);
    std::size_t i = 0;
    while (i < count) {
        std::uint64_t word = rng();
        for (int b = 0; b < 64 && i < count; ++b, ++i) {
            bits[i] = static_cast<std::uint8_t>(word & 1u);
            word >>= 1;
        }
    }
    return bits;
}

}  // namespace

// --- key pool -------------------------------------------------------------------

KeyPool::KeyPool(Bits preshared) : stream_(std::move(preshared)), initial_(stream_.size()) {}

std::pair<Bits, KeySegment> KeyPool::take(std::size_t count) {
    if (count > available_bits())
        throw KeyExhaustedError(count, available_bits());
    KeySegment seg{consumed_, consumed_ + count};
    Bits key(stream_.begin() + static_cast<std::ptrdiff_t>(seg.begin),
             stream_.begin() + static_cast<std::ptrdiff_t>(seg.end));
    consumed_ = seg.end;
    if (count > 0)
        segments_.push_back(seg);
    return {std::move(key), seg};
}

void KeyPool::deposit_distilled(std::span<const std::uint8_t> bits) {
    stream_.insert(stream_.end(), bits.begin(), bits.end());
    distilled_ += bits.size();
}

void KeyPool::top_up(std::span<const std::uint8_t> bits) {
    stream_.insert(stream_.end(), bits.begin(), bits.end());
    initial_ += bits.size();
}

bool KeyPool::segments_disjoint() const noexcept {
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        if (segments_[i].end <= segments_[i].begin)
            return false;
        if (i > 0 && segments_[i].begin < segments_[i - 1].end)
            return false;
    }
    return true;
}

OtpResult otp_encrypt(std::span<const std::uint8_t> payload, KeyPool& pool) {
    auto [key, seg] = pool.take(payload.size());
    Bits out(payload.size());
    for (std::size_t i = 0; i < payload.size(); ++i)
        out[i] = static_cast<std::uint8_t>((payload[i] ^ key[i]) & 1u);
    return {std::move(out), seg};
}

// --- framing --------------------------------------------------------------------

Frame make_frame(std::uint64_t sequence_no, Bits payload, std::size_t check_count, std::uint64_t seed,
                 bool encrypted) {
    Frame frame;
    frame.sequence_no = sequence_no;
    frame.encrypted = encrypted;
    const std::size_t wire = payload.size() + check_count;
    frame.payload_bits = std::move(payload);

    // Partial Fisher-Yates over wire positions.
    std::vector<std::size_t> order(wire);
    for (std::size_t i = 0; i < wire; ++i)
        order[i] = i;
    CounterRng rng(seed, frame_stream(sequence_no, kCheckPositions));
    for (std::size_t i = 0; i < check_count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(wire - i));
        std::swap(order[i], order[j]);
    }
    frame.check_positions.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(check_count));
    std::sort(frame.check_positions.begin(), frame.check_positions.end());
    frame.check_bits = random_bits(check_count, seed, frame_stream(sequence_no, kCheckValues));
    return frame;
}

double effective_qber(double q_link, double eve_fraction) {
    constexpr double kInterceptResend = 0.25;
    const double intercepted = q_link * (1.0 - kInterceptResend) + (1.0 - q_link) * kInterceptResend;
    return q_link * (1.0 - eve_fraction) + eve_fraction * intercepted;
}

std::string to_string(Phase phase) {
    switch (phase) {
    case Phase::Idle: return "Idle";
    case Phase::Authenticated: return "Authenticated";
    case Phase::Transmitting: return "Transmitting";
    case Phase::Aborted: return "Aborted";
    case Phase::Completed: return "Completed";
    }
    return "?";
}

Phase parse_phase(const std::string& text) {
    for (Phase p : {Phase::Idle, Phase::Authenticated, Phase::Transmitting, Phase::Aborted, Phase::Completed}) {
        if (to_string(p) == text)
            return p;
    }
    throw ArgumentError("unknown session phase '" + text + "'");
}

namespace {

void expect_phase(const SessionState& state, Phase expected, const char* op) {
    if (state.phase != expected)
        throw ProtocolStateError(std::string(op) + ": session is " + to_string(state.phase) + ", expected " +
                                 to_string(expected));
}

}  // namespace

SessionState authenticate(SessionState state, bool pre_authenticated) {
    expect_phase(state, Phase::Idle, "authenticate");
    if (!pre_authenticated)
        throw ProtocolStateError("authenticate: channel is not pre-authenticated");
    state.phase = Phase::Authenticated;
    return state;
}

SessionState begin_transmission(SessionState state) {
    expect_phase(state, Phase::Authenticated, "begin_transmission");
    state.phase = Phase::Transmitting;
    return state;
}

SessionState complete(SessionState state) {
    expect_phase(state, Phase::Transmitting, "complete");
    state.phase = Phase::Completed;
    return state;
}

TransmitResult transmit_frame(const SessionState& state, const Frame& frame, const ChannelParams& link,
                              const EveModel& eve, std::uint64_t seed) {
    expect_phase(state, Phase::Transmitting, "transmit_frame");
    if (!(eve.fraction >= 0.0 && eve.fraction <= 1.0))
        throw ArgumentError("eavesdropper fraction must lie in [0, 1]");
    const double q = effective_qber(qber_model(link), eve.fraction);

    CounterRng rng(seed, frame_stream(frame.sequence_no, kChannelFlips));
    TransmitResult result;
    Frame& rx = result.received;
    rx.sequence_no = frame.sequence_no;
    rx.encrypted = frame.encrypted;
    rx.check_positions = frame.check_positions;
    rx.payload_bits.reserve(frame.payload_bits.size());
    rx.check_bits.reserve(frame.check_bits.size());

    std::size_t next_check = 0;
    std::size_t next_payload = 0;
    std::size_t check_errors = 0;
    for (std::size_t pos = 0; pos < frame.wire_length(); ++pos) {
        const std::uint8_t flip = rng.bernoulli(q) ? 1 : 0;
        if (next_check < frame.check_positions.size() && frame.check_positions[next_check] == pos) {
            const std::uint8_t bit = frame.check_bits[next_check] ^ flip;
            rx.check_bits.push_back(bit);
            check_errors += flip;
            ++next_check;
        } else {
            rx.payload_bits.push_back(frame.payload_bits[next_payload++] ^ flip);
        }
    }
    result.qber_hat = frame.check_bits.empty()
                          ? 0.0
                          : static_cast<double>(check_errors) / static_cast<double>(frame.check_bits.size());
    return result;
}

SessionState qber_gate(SessionState state, double qber_hat) {
    expect_phase(state, Phase::Transmitting, "qber_gate");
    state.qber_estimates.push_back(qber_hat);
    if (qber_hat > state.threshold)
        state.phase = Phase::Aborted;
    return state;
}

std::size_t distill_key(const SessionState& state, std::size_t payload_bits, double qber_hat) {
    if (state.phase != Phase::Transmitting && state.phase != Phase::Completed)
        throw ProtocolStateError("distill_key: frame was not accepted (session " + to_string(state.phase) + ")");
    const double h = binary_entropy(std::clamp(qber_hat, 0.0, 1.0));
    const double factor = std::max(0.0, 1.0 - 2.0 * h);
    return static_cast<std::size_t>(std::floor(static_cast<double>(payload_bits) * factor));
}

// --- session --------------------------------------------------------------------

std::size_t SessionConfig::check_bits_per_frame() const {
    return static_cast<std::size_t>(std::llround(static_cast<double>(frame_bits) * check_fraction));
}

std::size_t SessionConfig::payload_bits_per_frame() const { return frame_bits - check_bits_per_frame(); }

void validate(const SessionConfig& c) {
    if (!(c.threshold >= 0.0 && c.threshold <= 0.5))
        throw ConfigError("threshold", "must lie in [0, 0.5]");
    if (!(c.check_fraction > 0.0 && c.check_fraction < 1.0))
        throw ConfigError("session.check_fraction", "must lie in (0, 1)");
    if (c.frame_bits < 2)
        throw ConfigError("session.frame_bits", "must be >= 2");
    if (c.check_bits_per_frame() == 0 || c.payload_bits_per_frame() == 0)
        throw ConfigError("session.frame_bits", "frame leaves no room for payload or check bits");
    if (!(c.residual_ber >= 0.0 && c.residual_ber <= 0.5))
        throw ConfigError("session.residual_ber", "must lie in [0, 0.5]");
    if (!(c.eve.fraction >= 0.0 && c.eve.fraction <= 1.0))
        throw ConfigError("eve_fraction", "must lie in [0, 1]");
    try {
        qsc::validate(c.link);
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        const auto colon = msg.find(':');
        throw ConfigError(msg.substr(0, colon), msg.substr(colon + 2));
    }
}

StikeSession::StikeSession(SessionConfig config, std::uint64_t seed)
    : config_(std::move(config)), seed_(seed) {
    validate(config_);
    state_.threshold = config_.threshold;
    Bits preshared = random_bits(config_.initial_key_bits, seed_, kPreshared);
    alice_ = KeyPool(preshared);
    bob_ = KeyPool(std::move(preshared));
}

const SessionReport& StikeSession::run(std::span<const std::uint8_t> payload) {
    if (state_.phase != Phase::Idle)
        throw ProtocolStateError("run: session already started");
    payload_.assign(payload.begin(), payload.end());
    state_ = authenticate(state_, config_.authenticated);
    state_ = begin_transmission(state_);
    drive();
    return report_;
}

const SessionReport& StikeSession::resume(std::size_t extra_key_bits) {
    if (!report_.paused)
        throw ProtocolStateError("resume: session is not paused");
    const Bits extra = random_bits(extra_key_bits, seed_, kTopUp ^ mix64(++topups_));
    alice_.top_up(extra);
    bob_.top_up(extra);
    drive();
    return report_;
}

void StikeSession::record_ledger() {
    for (const KeyPool* pool : {&alice_, &bob_}) {
        if (!pool->ledger_balanced() || !pool->segments_disjoint())
            ++report_.ledger_violations;
    }
    report_.pool = {alice_.initial_bits(), alice_.consumed_bits(), alice_.distilled_bits(), alice_.available_bits()};
}

void StikeSession::drive() {
    report_.paused = false;
    const std::size_t per_frame = config_.payload_bits_per_frame();
    const std::size_t check_count = config_.check_bits_per_frame();

    while (state_.phase == Phase::Transmitting && next_offset_ < payload_.size()) {
        const std::size_t chunk = std::min(per_frame, payload_.size() - next_offset_);
        if (alice_.available_bits() < chunk) {
            report_.paused = true;
            break;
        }
        const std::span<const std::uint8_t> plain(payload_.data() + next_offset_, chunk);
        OtpResult enc = otp_encrypt(plain, alice_);
        const Frame frame = make_frame(next_seq_, std::move(enc.output), check_count, seed_, true);
        const TransmitResult tx = transmit_frame(state_, frame, config_.link, config_.eve, seed_);
        state_ = qber_gate(state_, tx.qber_hat);

        FrameRecord rec{next_seq_, tx.qber_hat, state_.phase == Phase::Transmitting, 0, enc.segment};
        if (rec.accepted) {
            // FEC restores the transmitted ciphertext up to residual_ber.
            Bits corrected = frame.payload_bits;
            if (config_.residual_ber > 0.0) {
                CounterRng rng(seed_, frame_stream(next_seq_, kResidual));
                for (auto& bit : corrected)
                    bit ^= rng.bernoulli(config_.residual_ber) ? 1 : 0;
            }
            const OtpResult dec = otp_decrypt(corrected, bob_);
            report_.delivered.insert(report_.delivered.end(), dec.output.begin(), dec.output.end());

            rec.distilled_bits = distill_key(state_, chunk, tx.qber_hat);
            const Bits fresh = random_bits(rec.distilled_bits, seed_, frame_stream(next_seq_, kDistilled));
            alice_.deposit_distilled(fresh);
            bob_.deposit_distilled(fresh);
        }
        report_.frames.push_back(rec);
        record_ledger();
        ++next_seq_;
        next_offset_ += chunk;
    }

    if (state_.phase == Phase::Transmitting && !report_.paused && next_offset_ >= payload_.size())
        state_ = complete(state_);
    record_ledger();
    report_.phase = state_.phase;
    report_.payload_sha256 = sha256_hex(report_.delivered);
}

SessionReport run_session(std::span<const std::uint8_t> payload, const SessionConfig& config, std::uint64_t seed) {
    StikeSession session(config, seed);
    return session.run(payload);
}

std::string sha256_hex(std::span<const std::uint8_t> bits) {
    std::vector<unsigned char> bytes((bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] & 1u)
            bytes[i / 8] |= static_cast<unsigned char>(0x80u >> (i % 8));
    }

    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        throw Error("sha256 computation failed");

    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xF]);
    }
    return out;
}

nlohmann::json to_json(const SessionReport& report) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : report.frames) {
        frames.push_back({{"seq", f.seq},
                          {"qber_hat", f.qber_hat},
                          {"accepted", f.accepted},
                          {"distilled_bits", f.distilled_bits}});
    }
    return {{"phase", to_string(report.phase)},
            {"paused", report.paused},
            {"frames", std::move(frames)},
            {"pool",
             {{"initial", report.pool.initial},
              {"consumed", report.pool.consumed},
              {"distilled", report.pool.distilled},
              {"available", report.pool.available}}},
            {"payload_sha256", report.payload_sha256}};
}

}  // namespace qsc
