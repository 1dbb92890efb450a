// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "qsc/cli.hpp"
#include "qsc/errors.hpp"
#include "qsc/pipeline.hpp"
#include "qsc/qsdc_link.hpp"
#include "qsc/stike.hpp"
#include "test_support.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>

using namespace qsc;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

int failures = 0;

void report(const char* id, const char* name, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %s %s (%s; %.2f s)\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass)
        ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

double oracle_chamfer(const PointCloud& p, const PointCloud& q) {
    auto directed = [](const PointCloud& a, const PointCloud& b) {
        double sum = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < b.size(); ++j) {
                double d = 0.0;
                for (int k = 0; k < 3; ++k)
                    d += (a[i][k] - b[j][k]) * (a[i][k] - b[j][k]);
                best = std::min(best, d);
            }
            sum += best;
        }
        return sum / double(a.size());
    };
    return directed(p, q) + directed(q, p);
}

Bits random_bits(std::mt19937_64& rng, std::size_t n) {
    Bits b(n);
    for (auto& x : b)
        x = static_cast<std::uint8_t>(rng() & 1u);
    return b;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Session sweep shared by criteria 4 and 5.
struct SweepStats {
    int eve_aborted = 0;
    int clean_completed = 0;
    double eve_qber_sum = 0.0;
    int eve_qber_count = 0;
    std::size_t frames_checked = 0;
    std::size_t ledger_violations = 0;
    std::size_t overlap_violations = 0;
};

SweepStats session_sweep(int sessions) {
    SweepStats s;
    std::mt19937_64 rng(2025);
    for (int eve = 0; eve <= 1; ++eve) {
        for (int i = 0; i < sessions; ++i) {
            SessionConfig cfg;
            cfg.threshold = 0.12;
            cfg.eve.fraction = eve;
            // default framing: 4096 check bits per frame, partial frames included
            cfg.initial_key_bits = 1u << 16;
            const Bits payload = random_bits(rng, 4096 * 3);
            StikeSession session(cfg, 1'000'000u * eve + i);
            const auto& rep = session.run(payload);
            s.frames_checked += rep.frames.size();
            s.ledger_violations += rep.ledger_violations;
            if (!session.sender_pool().segments_disjoint() || !session.receiver_pool().segments_disjoint())
                ++s.overlap_violations;
            if (!session.sender_pool().ledger_balanced() || !session.receiver_pool().ledger_balanced())
                ++s.ledger_violations;
            if (eve) {
                s.eve_aborted += rep.phase == Phase::Aborted;
                for (const auto& f : rep.frames) {
                    s.eve_qber_sum += f.qber_hat;
                    ++s.eve_qber_count;
                }
            } else {
                s.clean_completed += rep.phase == Phase::Completed && rep.delivered == payload;
            }
        }
    }
    return s;
}

}  // namespace

int main() {
    report("C1", "RTE reproduction", [] {
        double worst = 0.0;
        for (const auto& r : kReferenceTable)
            worst = std::max(worst, std::abs(compute_rte(kReferenceTable[0].total_ms, r.total_ms) - r.rte));
        return Outcome{worst <= 0.005, fmt("max |rte - table| = %.5f over 7 rows", worst)};
    });

    report("C2", "Chamfer oracle equivalence", [] {
        std::mt19937_64 rng(31);
        std::uniform_int_distribution<std::size_t> size(1, 64);
        int mismatches = 0;
        int broken = 0;
        for (int t = 0; t < 200; ++t) {
            const auto p = test::random_cloud(rng, size(rng));
            const auto q = test::random_cloud(rng, size(rng));
            const double cd = chamfer_distance(p, q);
            mismatches += std::bit_cast<std::uint64_t>(cd) != std::bit_cast<std::uint64_t>(oracle_chamfer(p, q));
            broken += chamfer_distance(p, p) != 0.0 || cd != chamfer_distance(q, p);
        }
        return Outcome{mismatches == 0 && broken == 0,
                       fmt("200 pairs, %g bitwise mismatches, %g identity/symmetry failures", mismatches, broken)};
    });

    report("C3", "Link operating point", [] {
        const ChannelParams p;
        const double q = qber_model(p);
        const auto mc = monte_carlo_gates(p, 1'000'000, 7);
        const double sigma = std::sqrt(q * (1 - q) / double(mc.clicks));
        const double rate = info_rate(p);
        const bool ok = std::abs(q - 0.0331) <= 1e-4 && std::abs(mc.qber_hat - q) <= 3 * sigma &&
                        std::abs(rate - 37'360.0) / 37'360.0 <= 0.005;
        return Outcome{ok, fmt("qber %.6f, mc %.6f (3 sigma %.6f)", q, mc.qber_hat, 3 * sigma) +
                               fmt(", rate %.1f bps", rate)};
    });

    const SweepStats sweep = session_sweep(1000);

    report("C4", "Eavesdropping detection", [&] {
        const double abort_rate = sweep.eve_aborted / 1000.0;
        const double complete_rate = sweep.clean_completed / 1000.0;
        const double mean_q = sweep.eve_qber_sum / std::max(1, sweep.eve_qber_count);
        const bool ok = abort_rate >= 0.999 && complete_rate >= 0.999 && mean_q >= 0.26 && mean_q <= 0.30;
        return Outcome{ok, fmt("abort %.4f with eve, complete %.4f without, mean qber %.5f", abort_rate, complete_rate,
                               mean_q)};
    });

    report("C5", "Key ledger", [&] {
        const bool ok = sweep.ledger_violations == 0 && sweep.overlap_violations == 0 && sweep.frames_checked > 0;
        return Outcome{ok, fmt("%g frames, %g ledger violations, %g overlapping pools", double(sweep.frames_checked),
                               double(sweep.ledger_violations), double(sweep.overlap_violations))};
    });

    report("C6", "Capacity ordering", [] {
        const auto lines = capacity_lines(ChannelParams{}, {CapacityMode::Reference, std::nullopt});
        double n10 = 0;
        double n50 = 0;
        double raw = 0;
        for (const auto& r : kReferenceTable) {
            const double edr = r.edr_kbps * 1000.0;
            if (r.n == 10)
                n10 = edr;
            if (r.n == 50)
                n50 = edr;
            if (r.n == kRawCodeLength)
                raw = edr;
        }
        const bool ok = n10 > lines.shannon_bps && n50 > lines.secrecy_bps && n50 < lines.shannon_bps &&
                        raw < lines.secrecy_bps;
        return Outcome{ok, fmt("edr kbps n=10 %.2f, n=50 %.2f, raw %.2f", n10 / 1000, n50 / 1000, raw / 1000)};
    });

    report("C7", "Baseline codec identity", [] {
        std::mt19937_64 rng(77);
        std::uniform_int_distribution<std::size_t> size(1, 512);
        double worst = 0.0;
        for (int t = 0; t < 50; ++t) {
            const std::size_t n_points = size(rng);
            const std::vector<NamedCloud> ds{{"c" + std::to_string(t), test::random_cloud(rng, n_points)}};
            CodecDescriptor d;
            d.n = 3 * n_points;
            const auto rep = simulate_run(ds, d, TimingModel{0.0, 37'360.0, 0.0, 0.0}, ChannelParams{}, 3);
            worst = std::max(worst, rep.mean_cd);
        }
        return Outcome{worst < 1e-9, fmt("worst mean_cd %.3e over 50 clouds", worst)};
    });

    report("C8", "Calibration", [] {
        const TimingModel truth{300.0, 15'000.0, 0.0, 0.0};
        // rounds * (overhead + per-round bits / rate)
        auto synth = [&](double n) {
            return 3421.0 * (truth.per_round_overhead_ms + 3.0 * n * 32.0 / truth.effective_rate_bps * 1000.0);
        };
        const std::vector<TableRow> synthetic{{10, synth(10)}, {300, synth(300)}};
        const auto syn = calibrate_timing(synthetic, kReferenceDatasetSize, 3);
        const double syn_err = std::max(std::abs(syn.model.per_round_overhead_ms - 300.0) / 300.0,
                                        std::abs(syn.model.effective_rate_bps - 15'000.0) / 15'000.0);

        std::vector<TableRow> all;
        for (const auto& r : kReferenceTable)
            if (r.n != kRawCodeLength)
                all.push_back({r.n, r.total_ms});
        const auto full = calibrate_timing(all, kReferenceDatasetSize, 3);
        std::string residuals;
        for (std::size_t i = 0; i < all.size(); ++i)
            residuals += " n=" + std::to_string(all[i].n) + ":" + fmt("%.1f", full.residuals_ms[i]);

        const std::vector<TableRow> anchors{{10, kReferenceTable[1].total_ms}, {300, kReferenceTable[6].total_ms}};
        const auto fit = calibrate_timing(anchors, kReferenceDatasetSize, 3);
        const double red = batch_saturation_report(fit.model, 10, kReferenceDatasetSize).reduction;
        const double red_full = batch_saturation_report(full.model, 10, kReferenceDatasetSize).reduction;
        const bool ok = syn_err <= 1e-6 && full.residuals_ms.size() == all.size() && red >= 0.45 && red <= 0.75;
        return Outcome{ok, fmt("synthetic rel err %.2e, anchor-fit reduction %.2f%%, all-row fit %.2f%%", syn_err,
                               100 * red, 100 * red_full) +
                               "; residuals ms/round" + residuals};
    });

    report("C9", "Determinism", [] {
        test::TempDir dir("acceptance");
        std::filesystem::create_directories(dir / "data");
        std::mt19937_64 rng(9);
        for (int i = 0; i < 6; ++i)
            save_pointcloud(test::random_cloud(rng, 64), dir / "data" / ("p" + std::to_string(i) + ".bin"),
                            CloudFormat::F32Binary);
        std::ofstream(dir / "config.json") << R"({"dataset_dir": "data", "codec": {"n": 60}, "seed": 123})";
        std::ostringstream sink;
        const EnvLookup no_env = [](const std::string&) { return std::optional<std::string>{}; };
        cli::SimulateOptions a{dir / "config.json", std::nullopt, dir / "a.json", ReportFormat::Json, false};
        cli::SimulateOptions b{dir / "config.json", std::nullopt, dir / "b.json", ReportFormat::Json, false};
        const int ra = cli::cmd_simulate(a, sink, sink, no_env);
        const int rb = cli::cmd_simulate(b, sink, sink, no_env);
        const bool same = slurp(a.out) == slurp(b.out) &&
                          slurp(cli::session_report_path(a.out)) == slurp(cli::session_report_path(b.out));
        return Outcome{ra == 0 && rb == 0 && same && !slurp(a.out).empty(),
                       fmt("exit codes %g/%g, reports identical: %g", ra, rb, same)};
    });

    report("C12", "Archive boundary (hand-built bytes)", [] {
        // Writes the archive layout byte by byte, independent of the library writer.
        test::TempDir dir("boundary");
        std::string bytes = "QSCC";
        auto put = [&](auto v) {
            char raw[sizeof v];
            std::memcpy(raw, &v, sizeof v);
            bytes.append(raw, sizeof v);
        };
        std::mt19937_64 rng(12);
        std::normal_distribution<float> g(0.0f, 1.0f);
        std::vector<std::vector<float>> values;
        put(std::uint16_t{1});
        put(std::uint32_t{8});
        for (int r = 0; r < 8; ++r) {
            std::vector<float> v(30);
            double energy = 0.0;
            for (auto& x : v) {
                x = g(rng);
                energy += double(x) * x;
            }
            const double k = std::sqrt(30.0 / energy);
            for (auto& x : v)
                x = static_cast<float>(x * k);
            values.push_back(v);
            const std::string id = "rec" + std::to_string(r);
            put(static_cast<std::uint16_t>(id.size()));
            bytes += id;
            put(std::uint32_t{30});
            put(0.25 + r);
            for (float x : v)
                put(x);
        }
        std::ofstream(dir / "codes.qscc", std::ios::binary) << bytes;
        const auto recs = load_external_codes(dir / "codes.qscc");
        int mismatches = recs.size() == 8 ? 0 : 1;
        for (std::size_t r = 0; r < recs.size() && r < 8; ++r)
            for (std::size_t i = 0; i < 30; ++i)
                mismatches += std::bit_cast<std::uint32_t>(static_cast<float>(recs[r].code.values()[i])) !=
                              std::bit_cast<std::uint32_t>(values[r][i]);
        return Outcome{mismatches == 0, fmt("%g records, %g value mismatches", double(recs.size()), mismatches)};
    });

    std::printf("%d failing criteria\n", failures);
    return failures == 0 ? 0 : 1;
}
